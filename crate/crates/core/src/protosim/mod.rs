//! Pure-state simulation of the full coherent protocol at tiny blocklength:
//! initial entangled resources, coherent polar encoder, channel isometries,
//! coherent amplitude-then-phase successive cancellation, and the final CNOT
//! correction, ending in an ebit-fidelity report.
//!
//! Frozen bits run in two modes. With `average_frozen` the amplitude-frozen
//! bits are purified against explicit reference registers (their uniform
//! randomization is exact and coherent, and the references join the fidelity
//! target), while the phase-frozen bits are averaged by exhaustive
//! enumeration. Without it, both frozen strings are fixed classical values.

mod povm;
mod registers;

pub use povm::{build_scd_povm, DecoderPovm, PovmKind};
pub use registers::{GlobalState, Reg};

use std::collections::BTreeMap;

use crate::channel::QuantumChannel;
use crate::cqsynth::{amplitude_channel, phase_channel, BinaryCqChannel};
use crate::error::{Error, Result};
use crate::linalg::{cplx, CMatrix, CVector};
use crate::polar::{gn_matrix, ChannelPartition, EncoderMatrix};

/// Hard blocklength ceiling for protocol runs; the decoder POVMs grow as
/// `(2 d_B)^N` elements of matching dimension.
pub const MAX_PROTOCOL_N: usize = 4;

const DEFAULT_STATE_CAP: usize = 1 << 22;
/// Norm drift beyond this is a hard numeric error at each pipeline stage.
const NORM_DRIFT_ERROR: f64 = 1e-6;

#[derive(Clone, Debug)]
pub struct ProtocolConfig {
    pub channel: QuantumChannel,
    pub partition: ChannelPartition,
    /// Amplitude-frozen bits, one per `Z` position in ascending order.
    pub frozen_amp: Vec<u8>,
    /// Phase-frozen bits, one per `X` position in ascending order.
    pub frozen_phase: Vec<u8>,
    pub average_frozen: bool,
    pub seed: u64,
    pub max_state_dim: usize,
}

impl ProtocolConfig {
    pub fn new(
        channel: QuantumChannel,
        partition: ChannelPartition,
        frozen_amp: Vec<u8>,
        frozen_phase: Vec<u8>,
        average_frozen: bool,
        seed: u64,
    ) -> Self {
        Self {
            channel,
            partition,
            frozen_amp,
            frozen_phase,
            average_frozen,
            seed,
            max_state_dim: DEFAULT_STATE_CAP,
        }
    }

    pub fn n_size(&self) -> usize {
        self.partition.n_size
    }

    fn validate(&self) -> Result<()> {
        if self.channel.in_dim() != 2 {
            return Err(Error::Argument(
                "protocol simulation needs a qubit-input channel".into(),
            ));
        }
        let n = self.n_size();
        if n == 0 || !n.is_power_of_two() || n > MAX_PROTOCOL_N {
            return Err(Error::ResourceLimit(format!(
                "protocol blocklength {n} outside the supported {{1, 2, 4}}"
            )));
        }
        let p = &self.partition;
        let mut cover: Vec<usize> = p
            .a
            .iter()
            .chain(&p.x)
            .chain(&p.z)
            .chain(&p.b)
            .copied()
            .collect();
        cover.sort_unstable();
        if cover != (1..=n).collect::<Vec<_>>() {
            return Err(Error::Argument(
                "partition sets must disjointly cover 1..=N".into(),
            ));
        }
        if self.frozen_amp.len() != p.z.len() || self.frozen_phase.len() != p.x.len() {
            return Err(Error::Argument(format!(
                "frozen strings must match set sizes: |Z| = {}, |X| = {}",
                p.z.len(),
                p.x.len()
            )));
        }
        Ok(())
    }
}

/// End-of-run report. `stage_overlaps` holds the squared overlaps with the
/// ideal post-amplitude and post-phase states.
#[derive(Clone, Debug, serde::Serialize)]
pub struct ProtocolReport {
    pub n_size: usize,
    pub ebit_fidelity: f64,
    pub stage_overlaps: Vec<f64>,
    pub eps_amp: f64,
    pub eps_phase: f64,
    pub averaged_over_frozen: bool,
}

/// The coherent polar encoder: the permutation `|u> -> |u G_N>` on the
/// send block.
pub fn coherent_encoder(n_size: usize) -> Result<CMatrix> {
    if n_size == 0 || !n_size.is_power_of_two() {
        return Err(Error::Argument(format!(
            "blocklength {n_size} is not a power of two"
        )));
    }
    let g = gn_matrix(n_size.trailing_zeros())?;
    let dim = 1usize << n_size;
    let mut m = CMatrix::zeros(dim, dim);
    for u in 0..dim as u64 {
        m[(g.encode(u) as usize, u as usize)] = cplx(1.0);
    }
    Ok(m)
}

fn h_gate() -> CMatrix {
    let s = cplx(1.0 / 2f64.sqrt());
    CMatrix::from_fn(2, 2, |i, j| if i == 1 && j == 1 { -s } else { s })
}

fn cnot_gate() -> CMatrix {
    let mut m = CMatrix::zeros(4, 4);
    m[(0, 0)] = cplx(1.0);
    m[(1, 1)] = cplx(1.0);
    m[(2, 3)] = cplx(1.0);
    m[(3, 2)] = cplx(1.0);
    m
}

fn phase_basis_vec(bit: u8) -> CVector {
    let s = 1.0 / 2f64.sqrt();
    CVector::from_vec(vec![cplx(s), cplx(if bit == 1 { -s } else { s })])
}

fn basis_vec(dim: usize, k: usize) -> CVector {
    let mut v = CVector::zeros(dim);
    v[k] = cplx(1.0);
    v
}

/// Packs bits sitting at `positions` (ascending) of an N-bit word into a
/// compact value, first position most significant.
fn extract_bits(word: u64, positions: &[usize], n_size: usize) -> u64 {
    let mut c = 0u64;
    for &p in positions {
        c = (c << 1) | ((word >> (n_size - p)) & 1);
    }
    c
}

/// Inverse of [`extract_bits`].
fn spread_bits(compact: u64, positions: &[usize], n_size: usize) -> u64 {
    let mut word = 0u64;
    for (k, &p) in positions.iter().enumerate() {
        let bit = (compact >> (positions.len() - 1 - k)) & 1;
        word |= bit << (n_size - p);
    }
    word
}

#[derive(Clone, Copy)]
enum FrozenAmpMode {
    /// Compact `u_Z` value over the `Z` positions.
    Fixed(u64),
    Purified,
}

/// Everything derived once per protocol run.
struct ProtocolContext {
    n_size: usize,
    partition: ChannelPartition,
    w_a: BinaryCqChannel,
    w_p: BinaryCqChannel,
    enc_fwd: EncoderMatrix,
    enc_t: EncoderMatrix,
    encoder_gate: CMatrix,
    d_b: usize,
    d_e: usize,
    extension: CMatrix,
    max_state_dim: usize,
}

impl ProtocolContext {
    fn new(cfg: &ProtocolConfig) -> Result<Self> {
        cfg.validate()?;
        let n_size = cfg.n_size();
        let enc_fwd = gn_matrix(n_size.trailing_zeros())?;
        let enc_t = enc_fwd.transposed();
        Ok(Self {
            n_size,
            partition: cfg.partition.clone(),
            w_a: amplitude_channel(&cfg.channel)?,
            w_p: phase_channel(&cfg.channel)?,
            enc_fwd,
            enc_t,
            encoder_gate: coherent_encoder(n_size)?,
            d_b: cfg.channel.out_dim(),
            d_e: cfg.channel.env_dim(),
            extension: cfg.channel.extension().matrix().clone(),
            max_state_dim: cfg.max_state_dim,
        })
    }

    /// The register holding position `i` of Bob's decoded word `C^N`.
    fn c_reg(&self, i: usize) -> Reg {
        let p = &self.partition;
        if in_set(&p.a, i) || in_set(&p.x, i) {
            Reg::AmpOut(i as u8)
        } else {
            Reg::AmpCopy(i as u8)
        }
    }

    /// Amplitude-stage control positions (quantum side information).
    fn amp_control_positions(&self, mode: FrozenAmpMode) -> Vec<usize> {
        let mut pos = self.partition.b.clone();
        if matches!(mode, FrozenAmpMode::Purified) {
            pos.extend(&self.partition.z);
        }
        pos.sort_unstable();
        pos
    }

    fn amp_control_regs(&self, mode: FrozenAmpMode) -> Vec<Reg> {
        self.amp_control_positions(mode)
            .into_iter()
            .map(|i| {
                if in_set(&self.partition.b, i) {
                    Reg::BobEbit(i as u8)
                } else {
                    Reg::RefAmp(i as u8)
                }
            })
            .collect()
    }

    /// One amplitude POVM per control value; conditioning carries the control
    /// bits plus, in fixed mode, the classical `u_Z` assignment.
    fn amplitude_povms(&self, mode: FrozenAmpMode) -> Result<Vec<DecoderPovm>> {
        let controls = self.amp_control_positions(mode);
        let mut families = Vec::with_capacity(1 << controls.len());
        for c in 0..(1u64 << controls.len()) {
            let mut conditioning: BTreeMap<usize, u8> = BTreeMap::new();
            let word = spread_bits(c, &controls, self.n_size);
            for &p in &controls {
                conditioning.insert(p, ((word >> (self.n_size - p)) & 1) as u8);
            }
            if let FrozenAmpMode::Fixed(uz) = mode {
                for (k, &p) in self.partition.z.iter().enumerate() {
                    conditioning
                        .insert(p, ((uz >> (self.partition.z.len() - 1 - k)) & 1) as u8);
                }
            }
            families.push(build_scd_povm(
                &self.w_a,
                &self.enc_fwd,
                PovmKind::AmplitudeLambda,
                &conditioning,
                self.max_state_dim,
            )?);
        }
        Ok(families)
    }

    /// One phase POVM per `x_B` control value at a given `u_X` assignment.
    fn phase_povms(&self, ux: u64) -> Result<Vec<DecoderPovm>> {
        let controls = self.partition.b.clone();
        let mut families = Vec::with_capacity(1 << controls.len());
        for c in 0..(1u64 << controls.len()) {
            let mut conditioning: BTreeMap<usize, u8> = BTreeMap::new();
            let word = spread_bits(c, &controls, self.n_size);
            for &p in &controls {
                conditioning.insert(p, ((word >> (self.n_size - p)) & 1) as u8);
            }
            for (k, &p) in self.partition.x.iter().enumerate() {
                conditioning.insert(p, ((ux >> (self.partition.x.len() - 1 - k)) & 1) as u8);
            }
            families.push(build_scd_povm(
                &self.w_p,
                &self.enc_t,
                PovmKind::PhaseGamma,
                &conditioning,
                self.max_state_dim,
            )?);
        }
        Ok(families)
    }
}

fn compact_bits(bits: &[u8]) -> u64 {
    bits.iter().fold(0u64, |acc, &b| (acc << 1) | b as u64)
}

fn in_set(set: &[usize], i: usize) -> bool {
    set.contains(&i)
}

/// Builds the protocol's opening state: information pairs on `A`, shared
/// ebits on `B`, amplitude-frozen inputs on `Z` (purified against reference
/// registers when averaging), phase-frozen inputs on `X`.
pub fn build_initial_state(cfg: &ProtocolConfig) -> Result<GlobalState> {
    let ctx = ProtocolContext::new(cfg)?;
    let mode = if cfg.average_frozen {
        FrozenAmpMode::Purified
    } else {
        FrozenAmpMode::Fixed(compact_bits(&cfg.frozen_amp))
    };
    initial_state(&ctx, compact_bits(&cfg.frozen_phase), mode)
}

fn initial_state(ctx: &ProtocolContext, ux: u64, mode: FrozenAmpMode) -> Result<GlobalState> {
    let n = ctx.n_size;
    let p = &ctx.partition;
    let mut st = GlobalState::empty();

    let mut expected_dim = 1usize << (p.a.len() + p.b.len() + n);
    if matches!(mode, FrozenAmpMode::Purified) {
        expected_dim <<= p.z.len();
    }
    if expected_dim > ctx.max_state_dim {
        return Err(Error::ResourceLimit(format!(
            "initial state dimension {expected_dim} exceeds cap {}",
            ctx.max_state_dim
        )));
    }

    for &i in &p.a {
        st.append_basis(Reg::Kept(i as u8), 2, 0)?;
    }
    if matches!(mode, FrozenAmpMode::Purified) {
        for &i in &p.z {
            st.append_basis(Reg::RefAmp(i as u8), 2, 0)?;
        }
    }
    for i in 1..=n {
        let value = if in_set(&p.z, i) {
            match mode {
                FrozenAmpMode::Fixed(uz) => {
                    let k = p.z.iter().position(|&q| q == i).unwrap();
                    ((uz >> (p.z.len() - 1 - k)) & 1) as usize
                }
                FrozenAmpMode::Purified => 0,
            }
        } else if in_set(&p.x, i) {
            let k = p.x.iter().position(|&q| q == i).unwrap();
            ((ux >> (p.x.len() - 1 - k)) & 1) as usize
        } else {
            0
        };
        st.append_basis(Reg::Send(i as u8), 2, value)?;
    }
    for &i in &p.b {
        st.append_basis(Reg::BobEbit(i as u8), 2, 0)?;
    }

    let h = h_gate();
    let cnot = cnot_gate();
    for &i in &p.a {
        st.apply(&[Reg::Kept(i as u8)], &h);
        st.apply(&[Reg::Kept(i as u8), Reg::Send(i as u8)], &cnot);
    }
    for &i in &p.b {
        st.apply(&[Reg::BobEbit(i as u8)], &h);
        st.apply(&[Reg::BobEbit(i as u8), Reg::Send(i as u8)], &cnot);
    }
    if matches!(mode, FrozenAmpMode::Purified) {
        for &i in &p.z {
            st.apply(&[Reg::RefAmp(i as u8)], &h);
            st.apply(&[Reg::RefAmp(i as u8), Reg::Send(i as u8)], &cnot);
        }
    }
    for &i in &p.x {
        st.apply(&[Reg::Send(i as u8)], &h);
    }
    Ok(st)
}

/// One coherent decoding stage: the controlled isometry
/// `sum_o sqrt(element_o) (x) |o>` with the POVM family selected by the
/// control registers. Outcome registers are appended; the norm may drift by
/// at most 1e-6 (and in practice stays within 1e-8).
pub fn coherent_decode_step(
    state: &mut GlobalState,
    families: &[DecoderPovm],
    controls: &[Reg],
    targets: &[Reg],
    outcome_regs: &[(Reg, usize)],
) -> Result<()> {
    let sqrt_elements: Vec<Vec<CMatrix>> = families
        .iter()
        .map(|f| f.sqrt_elements().to_vec())
        .collect();
    state.apply_controlled_outcome_isometry(
        controls,
        targets,
        &sqrt_elements,
        outcome_regs,
        NORM_DRIFT_ERROR,
    )
}

/// The closing correction: one CNOT per position from Bob's decoded-word
/// register onto the phase-basis register, which strips the residual phase
/// operator and leaves the `A` pairs as clean ebits.
pub fn final_cnot_correction(state: &mut GlobalState, ctx_partition: &ChannelPartition) {
    let n = ctx_partition.n_size;
    let p = ctx_partition;
    let cnot = cnot_gate();
    let in_set = |set: &[usize], i: usize| set.contains(&i);
    for i in 1..=n {
        let c_reg = if in_set(&p.a, i) || in_set(&p.x, i) {
            Reg::AmpOut(i as u8)
        } else {
            Reg::AmpCopy(i as u8)
        };
        let phase_reg = if in_set(&p.a, i) || in_set(&p.z, i) {
            Reg::PhaseOut(i as u8)
        } else if in_set(&p.x, i) {
            Reg::PhaseFrozen(i as u8)
        } else {
            Reg::BobEbit(i as u8)
        };
        state.apply(&[c_reg, phase_reg], &cnot);
    }
}

struct PipelineOutput {
    fidelity: f64,
    overlap_amp: f64,
    overlap_phase: f64,
}

fn run_pipeline(
    ctx: &ProtocolContext,
    amp_povms: &[DecoderPovm],
    phase_povms: &[DecoderPovm],
    ux: u64,
    mode: FrozenAmpMode,
) -> Result<PipelineOutput> {
    let n = ctx.n_size;
    let p = ctx.partition.clone();
    let mut st = initial_state(ctx, ux, mode)?;

    // the channel turns the N send qubits into (d_b d_e)^N dimensions and the
    // decoders append 2a + 2x + 2z + b more qubits
    let appended = 2 * p.a.len() + 2 * p.x.len() + 2 * p.z.len() + p.b.len();
    let final_dim = (ctx.d_b * ctx.d_e)
        .checked_pow(n as u32)
        .and_then(|g| g.checked_mul(st.dim() >> n))
        .and_then(|g| g.checked_mul(1usize << appended))
        .ok_or_else(|| Error::ResourceLimit("state dimension overflow".into()))?;
    if final_dim > ctx.max_state_dim {
        return Err(Error::ResourceLimit(format!(
            "protocol state would reach dimension {final_dim} > cap {}",
            ctx.max_state_dim
        )));
    }

    // coherent encoder on the send block
    let send_regs: Vec<Reg> = (1..=n).map(|i| Reg::Send(i as u8)).collect();
    st.apply(&send_regs, &ctx.encoder_gate);

    // channel isometries, splitting each position into output + environment
    for i in 1..=n {
        st.apply_isometry_at(Reg::Send(i as u8), &ctx.extension);
        st.split_register(
            Reg::Send(i as u8),
            (Reg::ChanB(i as u8), ctx.d_b),
            (Reg::ChanE(i as u8), ctx.d_e),
        );
    }

    // amplitude stage: coherent QSCD controlled on Bob's quantum side
    // information, then the classical/coherent copies of u_B and u_Z
    let amp_controls = ctx.amp_control_regs(mode);
    let amp_targets: Vec<Reg> = (1..=n).map(|i| Reg::ChanB(i as u8)).collect();
    let mut amp_outcomes: Vec<(Reg, usize)> = Vec::new();
    for i in 1..=n {
        if in_set(&p.a, i) || in_set(&p.x, i) {
            amp_outcomes.push((Reg::AmpOut(i as u8), 2));
        }
    }
    coherent_decode_step(&mut st, amp_povms, &amp_controls, &amp_targets, &amp_outcomes)?;
    let cnot = cnot_gate();
    for i in 1..=n {
        if in_set(&p.b, i) {
            st.append_basis(Reg::AmpCopy(i as u8), 2, 0)?;
            st.apply(&[Reg::BobEbit(i as u8), Reg::AmpCopy(i as u8)], &cnot);
        } else if in_set(&p.z, i) {
            match mode {
                FrozenAmpMode::Fixed(uz) => {
                    let k = p.z.iter().position(|&q| q == i).unwrap();
                    let bit = ((uz >> (p.z.len() - 1 - k)) & 1) as usize;
                    st.append_basis(Reg::AmpCopy(i as u8), 2, bit)?;
                }
                FrozenAmpMode::Purified => {
                    st.append_basis(Reg::AmpCopy(i as u8), 2, 0)?;
                    st.apply(&[Reg::RefAmp(i as u8), Reg::AmpCopy(i as u8)], &cnot);
                }
            }
        }
    }
    let ideal2 = ideal_post_amplitude(ctx, &st, ux, mode);
    let overlap_amp = st.inner(&ideal2).norm_sqr();

    // phase stage: unwrap the encoder on C^N, decode coherently with the
    // frozen-phase conditioning, wrap the encoder back
    let c_regs: Vec<Reg> = (1..=n).map(|i| ctx.c_reg(i)).collect();
    let ue_dag = ctx.encoder_gate.adjoint();
    st.apply(&c_regs, &ue_dag);

    let h = h_gate();
    for &i in &p.b {
        st.apply(&[Reg::BobEbit(i as u8)], &h);
    }
    let phase_controls: Vec<Reg> = p.b.iter().map(|&i| Reg::BobEbit(i as u8)).collect();
    let mut phase_targets: Vec<Reg> = Vec::new();
    for i in 1..=n {
        phase_targets.push(Reg::ChanB(i as u8));
        phase_targets.push(ctx.c_reg(i));
    }
    let mut phase_outcomes: Vec<(Reg, usize)> = Vec::new();
    for i in 1..=n {
        if in_set(&p.a, i) || in_set(&p.z, i) {
            phase_outcomes.push((Reg::PhaseOut(i as u8), 2));
        }
    }
    coherent_decode_step(
        &mut st,
        phase_povms,
        &phase_controls,
        &phase_targets,
        &phase_outcomes,
    )?;
    for &i in &p.b {
        st.apply(&[Reg::BobEbit(i as u8)], &h);
    }
    // outcome registers carry |x>; the protocol's registers are |x~>
    for &(reg, _) in &phase_outcomes {
        st.apply(&[reg], &h);
    }
    for (k, &i) in p.x.iter().enumerate() {
        let bit = ((ux >> (p.x.len() - 1 - k)) & 1) as usize;
        st.append_basis(Reg::PhaseFrozen(i as u8), 2, bit)?;
        st.apply(&[Reg::PhaseFrozen(i as u8)], &h);
    }
    st.apply(&c_regs, &ctx.encoder_gate);

    let ideal3 = ideal_post_phase(ctx, &st, ux, mode);
    let overlap_phase = st.inner(&ideal3).norm_sqr();

    final_cnot_correction(&mut st, &p);

    let mut pairs: Vec<(Reg, Reg)> = p
        .a
        .iter()
        .map(|&i| (Reg::Kept(i as u8), Reg::PhaseOut(i as u8)))
        .collect();
    if matches!(mode, FrozenAmpMode::Purified) {
        pairs.extend(
            p.z
                .iter()
                .map(|&i| (Reg::RefAmp(i as u8), Reg::PhaseOut(i as u8))),
        );
    }
    let fidelity = st.ebit_projection_fidelity(&pairs);

    Ok(PipelineOutput {
        fidelity,
        overlap_amp,
        overlap_phase,
    })
}

fn kron_fold(parts: &[CVector]) -> CVector {
    let mut acc = CVector::from_element(1, cplx(1.0));
    for p in parts {
        let mut next = CVector::zeros(acc.len() * p.len());
        for (i, a) in acc.iter().enumerate() {
            if a.norm_sqr() == 0.0 {
                continue;
            }
            for (j, b) in p.iter().enumerate() {
                next[i * p.len() + j] = a * b;
            }
        }
        acc = next;
    }
    acc
}

/// Ideal state after the amplitude stage, assembled term by term in the
/// layout of `template`.
fn ideal_post_amplitude(
    ctx: &ProtocolContext,
    template: &GlobalState,
    ux: u64,
    mode: FrozenAmpMode,
) -> GlobalState {
    let n = ctx.n_size;
    let p = &ctx.partition;
    let purified = matches!(mode, FrozenAmpMode::Purified);
    let (na, nb, nx, nz) = (p.a.len(), p.b.len(), p.x.len(), p.z.len());
    let uz_fixed = match mode {
        FrozenAmpMode::Fixed(uz) => uz,
        FrozenAmpMode::Purified => 0,
    };
    let zsum = if purified { nz } else { 0 };
    let mut amp = CVector::zeros(template.dim());
    let norm = 1.0 / ((1u64 << (na + nb + nx + zsum)) as f64).sqrt();
    let ux_word = spread_bits(ux, &p.x, n);

    for ua in 0..(1u64 << na) {
        for ub in 0..(1u64 << nb) {
            for vx in 0..(1u64 << nx) {
                for uzc in 0..(1u64 << zsum) {
                    let uz = if purified { uzc } else { uz_fixed };
                    let word = spread_bits(ua, &p.a, n)
                        | spread_bits(ub, &p.b, n)
                        | spread_bits(vx, &p.x, n)
                        | spread_bits(uz, &p.z, n);
                    let vx_word = spread_bits(vx, &p.x, n);
                    let sign = if (ux_word & vx_word).count_ones() % 2 == 1 {
                        -1.0
                    } else {
                        1.0
                    };
                    let x = ctx.enc_fwd.encode(word);
                    let mut parts: Vec<CVector> = Vec::new();
                    for &(reg, _dim) in template.registers() {
                        let part = match reg {
                            Reg::Kept(i) | Reg::RefAmp(i) => {
                                basis_vec(2, ((word >> (n - i as usize)) & 1) as usize)
                            }
                            Reg::ChanB(i) => {
                                // V's column spans the adjacent (B, E) pair
                                let bit = ((x >> (n - i as usize)) & 1) as usize;
                                ctx.extension.column(bit).into_owned()
                            }
                            Reg::ChanE(_) => continue,
                            Reg::BobEbit(i) | Reg::AmpOut(i) | Reg::AmpCopy(i) => {
                                basis_vec(2, ((word >> (n - i as usize)) & 1) as usize)
                            }
                            other => panic!("unexpected register {other:?} after amplitude stage"),
                        };
                        parts.push(part);
                    }
                    amp += kron_fold(&parts) * cplx(sign * norm);
                }
            }
        }
    }
    GlobalState::from_layout(template.registers().to_vec(), amp)
}

/// Ideal state after the phase stage (before the closing CNOTs).
fn ideal_post_phase(
    ctx: &ProtocolContext,
    template: &GlobalState,
    ux: u64,
    mode: FrozenAmpMode,
) -> GlobalState {
    let n = ctx.n_size;
    let p = &ctx.partition;
    let purified = matches!(mode, FrozenAmpMode::Purified);
    let (na, nb, nz) = (p.a.len(), p.b.len(), p.z.len());
    let uz_fixed = match mode {
        FrozenAmpMode::Fixed(uz) => uz,
        FrozenAmpMode::Purified => 0,
    };
    let mut amp = CVector::zeros(template.dim());
    let norm = 1.0 / ((1u64 << (na + nb + nz + n)) as f64).sqrt();
    let ux_word = spread_bits(ux, &p.x, n);
    let uz_word = spread_bits(uz_fixed, &p.z, n);

    for xa in 0..(1u64 << na) {
        for xb in 0..(1u64 << nb) {
            for xz in 0..(1u64 << nz) {
                let xz_word = spread_bits(xz, &p.z, n);
                let xword =
                    spread_bits(xa, &p.a, n) | spread_bits(xb, &p.b, n) | xz_word | ux_word;
                let frozen_sign = if !purified && (uz_word & xz_word).count_ones() % 2 == 1 {
                    -1.0
                } else {
                    1.0
                };
                for w in 0..(1u64 << n) {
                    let sign = if (xword & w).count_ones() % 2 == 1 {
                        -frozen_sign
                    } else {
                        frozen_sign
                    };
                    let xg = ctx.enc_fwd.encode(w);
                    let mut parts: Vec<CVector> = Vec::new();
                    for &(reg, _dim) in template.registers() {
                        let part = match reg {
                            Reg::Kept(i) => {
                                phase_basis_vec(((xword >> (n - i as usize)) & 1) as u8)
                            }
                            Reg::RefAmp(i) => {
                                phase_basis_vec(((xz_word >> (n - i as usize)) & 1) as u8)
                            }
                            Reg::ChanB(i) => {
                                let bit = ((xg >> (n - i as usize)) & 1) as usize;
                                ctx.extension.column(bit).into_owned()
                            }
                            Reg::ChanE(_) => continue,
                            Reg::BobEbit(i) => {
                                phase_basis_vec(((xword >> (n - i as usize)) & 1) as u8)
                            }
                            Reg::AmpOut(i) | Reg::AmpCopy(i) => {
                                basis_vec(2, ((w >> (n - i as usize)) & 1) as usize)
                            }
                            Reg::PhaseOut(i) | Reg::PhaseFrozen(i) => {
                                phase_basis_vec(((xword >> (n - i as usize)) & 1) as u8)
                            }
                            other => panic!("unexpected register {other:?} after phase stage"),
                        };
                        parts.push(part);
                    }
                    let term = kron_fold(&parts);
                    amp += term * cplx(sign * norm);
                }
            }
        }
    }
    GlobalState::from_layout(template.registers().to_vec(), amp)
}

fn codeword_product(w: &BinaryCqChannel, enc: &EncoderMatrix, word: u64) -> CMatrix {
    let n = enc.size();
    let x = enc.encode(word);
    let mut prod = CMatrix::identity(1, 1);
    for pos in 1..=n {
        let bit = ((x >> (n - pos)) & 1) as u8;
        prod = prod.kronecker(w.output(bit).matrix());
    }
    prod
}

/// Average decoding error of a POVM family over uniformly random words,
/// restricted to words consistent with `required` (positions, compact value).
fn average_decode_error(
    w: &BinaryCqChannel,
    enc: &EncoderMatrix,
    families: &[DecoderPovm],
    control_positions: &[usize],
    required: Option<(&[usize], u64)>,
    n_size: usize,
) -> f64 {
    let mut success = 0.0;
    let mut count = 0usize;
    for word in 0..(1u64 << n_size) {
        if let Some((pos, val)) = required {
            if extract_bits(word, pos, n_size) != val {
                continue;
            }
        }
        let c = extract_bits(word, control_positions, n_size) as usize;
        let povm = &families[c];
        debug_assert!(povm.matches_conditioning(word));
        let key = povm.outcome_key_of_word(word) as usize;
        let rho = codeword_product(w, enc, word);
        success += (povm.elements()[key].clone() * rho).trace().re;
        count += 1;
    }
    1.0 - success / count as f64
}

/// Runs the full protocol and reports the end-to-end ebit fidelity together
/// with the stage overlaps and the decoders' own average error probabilities
/// (computed directly from the POVM elements, independent of the state
/// pipeline).
pub fn run_protocol(cfg: &ProtocolConfig) -> Result<ProtocolReport> {
    let ctx = ProtocolContext::new(cfg)?;
    let p = &ctx.partition;
    let n = ctx.n_size;

    if cfg.average_frozen {
        let mode = FrozenAmpMode::Purified;
        let amp_povms = ctx.amplitude_povms(mode)?;
        let amp_controls = ctx.amp_control_positions(mode);
        let eps_amp = average_decode_error(
            &ctx.w_a,
            &ctx.enc_fwd,
            &amp_povms,
            &amp_controls,
            None,
            n,
        );
        let runs = 1u64 << p.x.len();
        let (mut fid, mut ov2, mut ov3, mut eps_phase) = (0.0, 0.0, 0.0, 0.0);
        for ux in 0..runs {
            let phase_povms = ctx.phase_povms(ux)?;
            let out = run_pipeline(&ctx, &amp_povms, &phase_povms, ux, mode)?;
            fid += out.fidelity;
            ov2 += out.overlap_amp;
            ov3 += out.overlap_phase;
            eps_phase += average_decode_error(
                &ctx.w_p,
                &ctx.enc_t,
                &phase_povms,
                &p.b,
                Some((&p.x, ux)),
                n,
            );
        }
        let scale = runs as f64;
        Ok(ProtocolReport {
            n_size: n,
            ebit_fidelity: fid / scale,
            stage_overlaps: vec![ov2 / scale, ov3 / scale],
            eps_amp,
            eps_phase: eps_phase / scale,
            averaged_over_frozen: true,
        })
    } else {
        let uz = compact_bits(&cfg.frozen_amp);
        let ux = compact_bits(&cfg.frozen_phase);
        let mode = FrozenAmpMode::Fixed(uz);
        let amp_povms = ctx.amplitude_povms(mode)?;
        let amp_controls = ctx.amp_control_positions(mode);
        let eps_amp = average_decode_error(
            &ctx.w_a,
            &ctx.enc_fwd,
            &amp_povms,
            &amp_controls,
            Some((&p.z, uz)),
            n,
        );
        let phase_povms = ctx.phase_povms(ux)?;
        let eps_phase = average_decode_error(
            &ctx.w_p,
            &ctx.enc_t,
            &phase_povms,
            &p.b,
            Some((&p.x, ux)),
            n,
        );
        let out = run_pipeline(&ctx, &amp_povms, &phase_povms, ux, mode)?;
        Ok(ProtocolReport {
            n_size: n,
            ebit_fidelity: out.fidelity,
            stage_overlaps: vec![out.overlap_amp, out.overlap_phase],
            eps_amp,
            eps_phase,
            averaged_over_frozen: false,
        })
    }
}
