//! Exact channel combining and splitting at desk-scale blocklengths.
//!
//! The encoder is `G_N = F^{(x)n}` with `F = [[1,0],[1,1]]` and no
//! bit-reversal permutation: bit reversal commutes through `F^{(x)n}` onto the
//! codeword positions, and permuting i.i.d. channel uses changes nothing, so
//! the synthesized channels agree index-for-index with the bit-reversed
//! convention. Words are row vectors, `x = u G_N`, packed into `u64` with
//! position 1 as the most significant bit.
//!
//! Synthesized channels are computed by exact enumeration over all `2^N`
//! input words rather than by Monte Carlo: at these sizes exactness is cheap
//! and the tests stay deterministic. The forward direction conditions on the
//! prefix `u_1^{i-1}` and randomizes the future; the transposed direction
//! (phase variables, encoder `G_N^T`) conditions on the suffix and randomizes
//! the past.

use rayon::prelude::*;

use crate::channel::{Degradability, QuantumChannel};
use crate::cqsynth::{
    self, amplitude_channel, environment_channel, holevo_fidelity_floor, holevo_of_pair,
    phase_channel, sqrt_fidelity_of_pair, BinaryCqChannel, CqLabel,
};
use crate::error::{Error, Result};
use crate::linalg::{cplx, CMatrix, DensityOperator, DimCap};

/// Arikan's encoder as an explicit binary matrix. Row `i` is stored as a
/// bitmask over output positions, position 1 at the most significant bit.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EncoderMatrix {
    level: u32,
    rows: Vec<u64>,
}

impl EncoderMatrix {
    pub fn size(&self) -> usize {
        self.rows.len()
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    /// Entry `G[i][j]` with 1-based `i`, `j`.
    pub fn bit(&self, i: usize, j: usize) -> u8 {
        let n = self.size();
        ((self.rows[i - 1] >> (n - j)) & 1) as u8
    }

    /// `x = u G` over GF(2); words packed with position 1 as the MSB.
    pub fn encode(&self, word: u64) -> u64 {
        let n = self.size();
        let mut x = 0u64;
        for i in 0..n {
            if (word >> (n - 1 - i)) & 1 == 1 {
                x ^= self.rows[i];
            }
        }
        x
    }

    pub fn transposed(&self) -> EncoderMatrix {
        let n = self.size();
        let mut rows = vec![0u64; n];
        for i in 0..n {
            for j in 0..n {
                if (self.rows[i] >> (n - 1 - j)) & 1 == 1 {
                    rows[j] |= 1 << (n - 1 - i);
                }
            }
        }
        EncoderMatrix {
            level: self.level,
            rows,
        }
    }
}

/// `F^{(x)n}`, built by the Kronecker recursion `[[G, 0], [G, G]]`.
pub fn gn_matrix(level: u32) -> Result<EncoderMatrix> {
    if level > 6 {
        return Err(Error::ResourceLimit(format!(
            "encoder level {level} gives N = 2^{level} > 64"
        )));
    }
    let mut rows: Vec<u64> = vec![1];
    let mut size = 1usize;
    for _ in 0..level {
        let mut next = Vec::with_capacity(size * 2);
        for &r in &rows {
            next.push(r << size);
        }
        for &r in &rows {
            next.push((r << size) | r);
        }
        rows = next;
        size *= 2;
    }
    Ok(EncoderMatrix { level, rows })
}

/// Which encoding matrix a synthesized-channel table was built with.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    /// `G_N`, prefix conditioning (amplitude and environment variables).
    Forward,
    /// `G_N^T`, suffix conditioning (phase variables).
    Transposed,
}

impl Direction {
    pub fn as_str(&self) -> &'static str {
        match self {
            Direction::Forward => "fwd",
            Direction::Transposed => "transposed",
        }
    }
}

impl std::str::FromStr for Direction {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fwd" | "forward" => Ok(Direction::Forward),
            "transposed" | "gnt" => Ok(Direction::Transposed),
            other => Err(Error::Argument(format!(
                "unknown direction \"{other}\" (use fwd|transposed)"
            ))),
        }
    }
}

/// Per-index parameters of one synthesized channel.
#[derive(Clone, Copy, Debug)]
pub struct ChannelRecord {
    /// 1-based physical input index.
    pub index: usize,
    pub sqrt_fidelity: f64,
    pub holevo: f64,
}

/// Exact `sqrt(F)` / `I` parameters of every synthesized channel at one
/// blocklength.
#[derive(Clone, Debug)]
pub struct SynthesizedChannelTable {
    pub n_size: usize,
    pub direction: Direction,
    pub records: Vec<ChannelRecord>,
}

impl SynthesizedChannelTable {
    pub fn sum_holevo(&self) -> f64 {
        self.records.iter().map(|r| r.holevo).sum()
    }

    pub fn holevo_variance(&self) -> f64 {
        let n = self.records.len() as f64;
        let mean = self.sum_holevo() / n;
        self.records
            .iter()
            .map(|r| (r.holevo - mean).powi(2))
            .sum::<f64>()
            / n
    }

    /// Indices satisfying the polar coding rule `sqrt(F_i) < 2^{-N^beta}`;
    /// ties go to the bad set.
    pub fn good_set(&self, beta: f64) -> Vec<usize> {
        let thr = good_threshold(self.n_size, beta);
        self.records
            .iter()
            .filter(|r| r.sqrt_fidelity < thr)
            .map(|r| r.index)
            .collect()
    }

    pub fn fraction_holevo_above(&self, floor: f64) -> f64 {
        self.records.iter().filter(|r| r.holevo > floor).count() as f64
            / self.records.len() as f64
    }

    /// CSV rows `N,direction,i,sqrt_fidelity,holevo` (no header).
    pub fn csv_rows(&self) -> Vec<String> {
        self.records
            .iter()
            .map(|r| {
                format!(
                    "{},{},{},{},{}",
                    self.n_size,
                    self.direction.as_str(),
                    r.index,
                    r.sqrt_fidelity,
                    r.holevo
                )
            })
            .collect()
    }

    pub const CSV_HEADER: &'static str = "N,direction,i,sqrt_fidelity,holevo";
}

pub fn good_threshold(n_size: usize, beta: f64) -> f64 {
    2f64.powf(-(n_size as f64).powf(beta))
}

/// Synthesis limits. `max_dim` caps the dimension of any dense operator the
/// enumerator forms, i.e. `(output_dim)^N`.
#[derive(Clone, Copy, Debug)]
pub struct SynthesisConfig {
    pub max_dim: usize,
}

impl Default for SynthesisConfig {
    fn default() -> Self {
        Self {
            max_dim: DimCap::default().0,
        }
    }
}

impl SynthesisConfig {
    pub fn with_cap(max_dim: usize) -> Self {
        Self { max_dim }
    }
}

fn validate_blocklength(n_size: usize) -> Result<u32> {
    if n_size == 0 || !n_size.is_power_of_two() {
        return Err(Error::Argument(format!(
            "blocklength {n_size} is not a power of two"
        )));
    }
    Ok(n_size.trailing_zeros())
}

fn joint_dim(out_dim: usize, n_size: usize, cap: usize) -> Result<usize> {
    let mut dim = 1usize;
    for _ in 0..n_size {
        dim = dim
            .checked_mul(out_dim)
            .filter(|&d| d <= cap)
            .ok_or_else(|| {
                Error::ResourceLimit(format!(
                    "synthesis needs operators of dimension {out_dim}^{n_size} > cap {cap}"
                ))
            })?;
    }
    Ok(dim)
}

/// Positions conditioned on (classical side information) when decoding
/// input `i`, in decode order.
fn conditioned_positions(direction: Direction, n_size: usize, i: usize) -> Vec<usize> {
    match direction {
        Direction::Forward => (1..i).collect(),
        Direction::Transposed => (i + 1..=n_size).rev().collect(),
    }
}

fn averaged_positions(direction: Direction, n_size: usize, i: usize) -> Vec<usize> {
    match direction {
        Direction::Forward => (i + 1..=n_size).collect(),
        Direction::Transposed => (1..i).collect(),
    }
}

/// The pair of conditional output states seen by input `i` given concrete
/// values (`known`, a packed word covering the conditioned positions), with
/// the unconditioned inputs averaged uniformly:
/// `rho_b = 2^{-#avg} sum_avg rho_{(word G)_1} (x) ... (x) rho_{(word G)_N}`.
pub fn branch_hypothesis_pair(
    w: &BinaryCqChannel,
    enc: &EncoderMatrix,
    direction: Direction,
    i: usize,
    known: u64,
) -> (CMatrix, CMatrix) {
    let n_size = enc.size();
    let d = w.output_dim();
    let dim = d.pow(n_size as u32);
    let avg = averaged_positions(direction, n_size, i);
    let weight = cplx(1.0 / (1u64 << avg.len()) as f64);
    let mut acc = [CMatrix::zeros(dim, dim), CMatrix::zeros(dim, dim)];
    for bit in 0..2u64 {
        for a in 0..(1u64 << avg.len()) {
            let mut word = known | (bit << (n_size - i));
            for (k, &p) in avg.iter().enumerate() {
                if (a >> k) & 1 == 1 {
                    word |= 1 << (n_size - p);
                }
            }
            let x = enc.encode(word);
            let mut prod = CMatrix::identity(1, 1);
            for p in 1..=n_size {
                let xb = ((x >> (n_size - p)) & 1) as u8;
                prod = prod.kronecker(w.output(xb).matrix());
            }
            acc[bit as usize] += prod * weight;
        }
    }
    let [a, b] = acc;
    (a, b)
}

/// One polarization step. `W-` sees no side information; `W+` carries the
/// first input as a classical register (block-diagonal, weight 1/2 each).
pub fn one_step_transform(
    w: &BinaryCqChannel,
    cfg: &SynthesisConfig,
) -> Result<(BinaryCqChannel, BinaryCqChannel)> {
    let d = w.output_dim();
    let d2 = joint_dim(d, 2, cfg.max_dim)?;
    if 2 * d2 > cfg.max_dim {
        return Err(Error::ResourceLimit(format!(
            "one-step transform needs dimension {} > cap {}",
            2 * d2,
            cfg.max_dim
        )));
    }
    let half = cplx(0.5);
    let mut minus = [CMatrix::zeros(d2, d2), CMatrix::zeros(d2, d2)];
    let mut plus = [CMatrix::zeros(2 * d2, 2 * d2), CMatrix::zeros(2 * d2, 2 * d2)];
    for u1 in 0..2usize {
        for u2 in 0..2usize {
            let prod = w.output((u1 ^ u2) as u8).matrix().kronecker(w.output(u2 as u8).matrix());
            minus[u1] += &prod * half;
            // classical |u1><u1| register in front
            let block = &prod * half;
            for r in 0..d2 {
                for c in 0..d2 {
                    plus[u2][(u1 * d2 + r, u1 * d2 + c)] += block[(r, c)];
                }
            }
        }
    }
    let [m0, m1] = minus;
    let [p0, p1] = plus;
    Ok((
        BinaryCqChannel::new(
            DensityOperator::from_valid(m0),
            DensityOperator::from_valid(m1),
            CqLabel::Synthesized,
        )?,
        BinaryCqChannel::new(
            DensityOperator::from_valid(p0),
            DensityOperator::from_valid(p1),
            CqLabel::Synthesized,
        )?,
    ))
}

/// Exact parameters of every synthesized channel `W_N^(i)`.
///
/// Per index, the synthesized output is block-diagonal over the conditioned
/// word `b`: using `H(⊕_b p_b sigma_b) = H(p) + sum_b p_b H(sigma_b)`, both
/// parameters reduce to branch averages,
/// `sqrt(F_i) = sum_b 2^{-#cond} sqrt(F(pair_b))` and likewise for `I_i`.
pub fn synthesize_all(
    w: &BinaryCqChannel,
    n_size: usize,
    direction: Direction,
    cfg: &SynthesisConfig,
) -> Result<SynthesizedChannelTable> {
    let level = validate_blocklength(n_size)?;
    joint_dim(w.output_dim(), n_size, cfg.max_dim)?;
    let g = gn_matrix(level)?;
    let enc = match direction {
        Direction::Forward => g,
        Direction::Transposed => g.transposed(),
    };

    let mut tasks: Vec<(usize, u64)> = Vec::new();
    for i in 1..=n_size {
        let cond = conditioned_positions(direction, n_size, i);
        for b in 0..(1u64 << cond.len()) {
            let mut known = 0u64;
            for (k, &p) in cond.iter().enumerate() {
                if (b >> k) & 1 == 1 {
                    known |= 1 << (n_size - p);
                }
            }
            tasks.push((i, known));
        }
    }

    // Embarrassingly parallel over (index, branch); the reduction below runs
    // in task order so results are bit-stable across thread counts.
    let partials: Vec<(usize, f64, f64)> = tasks
        .par_iter()
        .map(|&(i, known)| {
            let (r0, r1) = branch_hypothesis_pair(w, &enc, direction, i, known);
            (i, sqrt_fidelity_of_pair(&r0, &r1), holevo_of_pair(&r0, &r1))
        })
        .collect();

    let mut records: Vec<ChannelRecord> = (1..=n_size)
        .map(|index| ChannelRecord {
            index,
            sqrt_fidelity: 0.0,
            holevo: 0.0,
        })
        .collect();
    for &(i, sf, hol) in &partials {
        let cond_count = conditioned_positions(direction, n_size, i).len();
        let weight = 1.0 / (1u64 << cond_count) as f64;
        records[i - 1].sqrt_fidelity += weight * sf;
        records[i - 1].holevo += weight * hol;
    }
    Ok(SynthesizedChannelTable {
        n_size,
        direction,
        records,
    })
}

/// The four input classes at blocklength `N` and threshold exponent `beta`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChannelPartition {
    pub n_size: usize,
    pub a: Vec<usize>,
    pub x: Vec<usize>,
    pub z: Vec<usize>,
    pub b: Vec<usize>,
}

impl ChannelPartition {
    pub fn good_amplitude_count(&self) -> usize {
        self.a.len() + self.x.len()
    }

    pub fn good_phase_count(&self) -> usize {
        self.a.len() + self.z.len()
    }
}

/// Intersects the good sets of an amplitude table and a phase table. Index
/// `i` refers to the same physical encoder input in both tables.
pub fn classify(
    table_a: &SynthesizedChannelTable,
    table_p: &SynthesizedChannelTable,
    beta: f64,
) -> Result<ChannelPartition> {
    if table_a.n_size != table_p.n_size {
        return Err(Error::Argument(format!(
            "table blocklengths differ: {} vs {}",
            table_a.n_size, table_p.n_size
        )));
    }
    if !(beta > 0.0 && beta < 0.5) {
        return Err(Error::Argument(format!("beta = {beta} outside (0, 1/2)")));
    }
    let ga = table_a.good_set(beta);
    let gp = table_p.good_set(beta);
    let mut part = ChannelPartition {
        n_size: table_a.n_size,
        a: vec![],
        x: vec![],
        z: vec![],
        b: vec![],
    };
    for i in 1..=table_a.n_size {
        match (ga.contains(&i), gp.contains(&i)) {
            (true, true) => part.a.push(i),
            (true, false) => part.x.push(i),
            (false, true) => part.z.push(i),
            (false, false) => part.b.push(i),
        }
    }
    Ok(part)
}

/// Symmetric coherent information `H(B) - H(E)` at maximally mixed input.
/// May be negative.
pub fn coherent_information(ch: &QuantumChannel) -> f64 {
    let mixed = DensityOperator::maximally_mixed(ch.in_dim());
    let b = ch.apply(&mixed).expect("dimension matches by construction");
    let e = ch
        .complementary(&mixed)
        .expect("dimension matches by construction");
    crate::linalg::von_neumann_entropy(&b) - crate::linalg::von_neumann_entropy(&e)
}

/// Net-rate bookkeeping for a partition.
#[derive(Clone, Debug)]
pub struct RateReport {
    pub n_size: usize,
    pub size_a: usize,
    pub size_x: usize,
    pub size_z: usize,
    pub size_b: usize,
    pub net_rate: f64,
    pub ebit_rate: f64,
    pub coherent_info: f64,
}

pub fn rate_report(partition: &ChannelPartition, ch: &QuantumChannel) -> RateReport {
    let n = partition.n_size;
    let (a, x, z, b) = (
        partition.a.len(),
        partition.x.len(),
        partition.z.len(),
        partition.b.len(),
    );
    assert_eq!(a + x + z + b, n, "partition must cover [N]");
    // |A| - |B| = |G(W_A)| + |G(W_P)| - N, exactly, in integers.
    assert_eq!(
        a as i64 - b as i64,
        (a + x) as i64 + (a + z) as i64 - n as i64,
        "partition set identity violated"
    );
    RateReport {
        n_size: n,
        size_a: a,
        size_x: x,
        size_z: z,
        size_b: b,
        net_rate: (a as f64 - b as f64) / n as f64,
        ebit_rate: b as f64 / n as f64,
        coherent_info: coherent_information(ch),
    }
}

impl RateReport {
    pub const CSV_HEADER: &'static str =
        "N,size_a,size_x,size_z,size_b,net_rate,ebit_rate,coherent_info";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.n_size,
            self.size_a,
            self.size_x,
            self.size_z,
            self.size_b,
            self.net_rate,
            self.ebit_rate,
            self.coherent_info
        )
    }
}

/// Per-index uncertainty checks between the phase table (to Bob) and the
/// environment table (to Eve).
#[derive(Clone, Copy, Debug)]
pub struct UncertaintyRecord {
    pub index: usize,
    pub holevo_phase: f64,
    pub holevo_env: f64,
    pub sqrt_f_phase: f64,
    pub sqrt_f_env: f64,
}

impl UncertaintyRecord {
    const SLACK: f64 = 1e-9;

    pub fn holevo_sum_ok(&self) -> bool {
        self.holevo_phase + self.holevo_env <= 1.0 + Self::SLACK
    }

    pub fn fidelity_relation_1_ok(&self) -> bool {
        2.0 * self.sqrt_f_phase + self.sqrt_f_env >= 1.0 - Self::SLACK
    }

    pub fn fidelity_relation_2_ok(&self) -> bool {
        self.sqrt_f_phase + 2.0 * self.sqrt_f_env >= 1.0 - Self::SLACK
    }

    pub fn pass(&self) -> bool {
        self.holevo_sum_ok() && self.fidelity_relation_1_ok() && self.fidelity_relation_2_ok()
    }
}

#[derive(Clone, Debug)]
pub struct UncertaintyReport {
    pub n_size: usize,
    pub beta: f64,
    pub records: Vec<UncertaintyRecord>,
    pub partition: ChannelPartition,
    pub good_env: Vec<usize>,
    /// `G(W_P) ∩ G(W_E) = ∅`
    pub phase_env_disjoint: bool,
    /// `B ∩ G(W_E) = ∅`; checked only when the channel is known degradable.
    pub bad_env_disjoint: Option<bool>,
    /// `I >= log2(2/(1+sqrt F))` held for every record of every table.
    pub fidelity_floor_ok: bool,
}

impl UncertaintyReport {
    pub fn all_pass(&self) -> bool {
        self.records.iter().all(|r| r.pass())
            && self.phase_env_disjoint
            && self.bad_env_disjoint.unwrap_or(true)
            && self.fidelity_floor_ok
    }

    pub const CSV_HEADER: &'static str =
        "N,i,holevo_phase,holevo_env,sqrt_f_phase,sqrt_f_env,status";

    pub fn csv_rows(&self) -> Vec<String> {
        self.records
            .iter()
            .map(|r| {
                format!(
                    "{},{},{},{},{},{},{}",
                    self.n_size,
                    r.index,
                    r.holevo_phase,
                    r.holevo_env,
                    r.sqrt_f_phase,
                    r.sqrt_f_env,
                    if r.pass() { "PASS" } else { "FAIL" }
                )
            })
            .collect()
    }
}

fn table_floor_ok(table: &SynthesizedChannelTable) -> bool {
    table
        .records
        .iter()
        .all(|r| r.holevo >= holevo_fidelity_floor(r.sqrt_fidelity) - 1e-9)
}

/// Synthesizes the phase and environment tables at blocklength `N` and
/// evaluates every per-index uncertainty relation plus the set-disjointness
/// consequences of degradability.
pub fn uncertainty_report(
    ch: &QuantumChannel,
    n_size: usize,
    beta: f64,
    cfg: &SynthesisConfig,
) -> Result<UncertaintyReport> {
    let wa = amplitude_channel(ch)?;
    let wp = phase_channel(ch)?;
    let we = environment_channel(ch)?;
    let table_a = synthesize_all(&wa, n_size, Direction::Forward, cfg)?;
    let table_p = synthesize_all(&wp, n_size, Direction::Transposed, cfg)?;
    let table_e = synthesize_all(&we, n_size, Direction::Forward, cfg)?;
    let partition = classify(&table_a, &table_p, beta)?;
    let good_env = table_e.good_set(beta);

    let records: Vec<UncertaintyRecord> = (0..n_size)
        .map(|k| UncertaintyRecord {
            index: k + 1,
            holevo_phase: table_p.records[k].holevo,
            holevo_env: table_e.records[k].holevo,
            sqrt_f_phase: table_p.records[k].sqrt_fidelity,
            sqrt_f_env: table_e.records[k].sqrt_fidelity,
        })
        .collect();

    let phase_good = table_p.good_set(beta);
    let phase_env_disjoint = phase_good.iter().all(|i| !good_env.contains(i));
    let bad_env_disjoint = match ch.degradable() {
        Degradability::KnownDegradable => {
            Some(partition.b.iter().all(|i| !good_env.contains(i)))
        }
        _ => None,
    };
    let fidelity_floor_ok =
        table_floor_ok(&table_a) && table_floor_ok(&table_p) && table_floor_ok(&table_e);

    Ok(UncertaintyReport {
        n_size,
        beta,
        records,
        partition,
        good_env,
        phase_env_disjoint,
        bad_env_disjoint,
        fidelity_floor_ok,
    })
}

/// Convenience bundle: all three cq channels of a qubit-input channel.
pub fn cq_triple(ch: &QuantumChannel) -> Result<(BinaryCqChannel, BinaryCqChannel, BinaryCqChannel)> {
    Ok((
        amplitude_channel(ch)?,
        phase_channel(ch)?,
        environment_channel(ch)?,
    ))
}

/// Appendix-A style cross-check target: `I(Z;B) + I(X;BC) - 1` assembled from
/// the single-use cq channels. Equals `coherent_information` for every
/// channel; kept as an independent code path.
pub fn coherent_information_via_cq(ch: &QuantumChannel) -> Result<f64> {
    let wa = amplitude_channel(ch)?;
    let wp = phase_channel(ch)?;
    Ok(cqsynth::holevo(&wa) + cqsynth::holevo(&wp) - 1.0)
}
