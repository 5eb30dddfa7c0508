//! Quantum successive cancellation decoding POVMs, built from sequential
//! binary Helstrom tests.
//!
//! For decode step `i` with previously decided bits `u` (decoded outcomes and
//! conditioned frozen values alike), the step projector is the projector onto
//! the nonnegative eigenspace of `rho_{u,0} - rho_{u,1}`; zero eigenvalues go
//! to the bit-0 projector. An element is the sandwich `A† A` with
//! `A = Pi_last ... Pi_first` (first-decoded projector applied first).
//! Summed over all bits the sandwich telescopes to the identity; conditioning
//! frozen positions leaves a PSD residual `I - sum`, which is folded into the
//! lexicographically last outcome when it exceeds 1e-10.

use std::collections::BTreeMap;

use crate::cqsynth::BinaryCqChannel;
use crate::error::{Error, Result};
use crate::linalg::{cplx, hermitian_eigen, hermitize, matrix_sqrt_psd, CMatrix};
use crate::polar::{branch_hypothesis_pair, Direction, EncoderMatrix};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PovmKind {
    /// Amplitude-variable decoder (forward order, positions 1..N).
    AmplitudeLambda,
    /// Phase-variable decoder (reverse order, future bits first).
    PhaseGamma,
}

impl PovmKind {
    fn direction(&self) -> Direction {
        match self {
            PovmKind::AmplitudeLambda => Direction::Forward,
            PovmKind::PhaseGamma => Direction::Transposed,
        }
    }

    fn decode_order(&self, n_size: usize) -> Vec<usize> {
        match self {
            PovmKind::AmplitudeLambda => (1..=n_size).collect(),
            PovmKind::PhaseGamma => (1..=n_size).rev().collect(),
        }
    }
}

/// A complete decoding POVM for one frozen assignment. Elements are indexed
/// by the packed outcome word: outcome positions ascending, first position
/// owning the most significant bit.
#[derive(Clone, Debug)]
pub struct DecoderPovm {
    pub kind: PovmKind,
    pub n_size: usize,
    pub outcome_positions: Vec<usize>,
    pub conditioning: BTreeMap<usize, u8>,
    elements: Vec<CMatrix>,
    sqrt_elements: Vec<CMatrix>,
}

impl DecoderPovm {
    pub fn elements(&self) -> &[CMatrix] {
        &self.elements
    }

    pub fn sqrt_elements(&self) -> &[CMatrix] {
        &self.sqrt_elements
    }

    pub fn outcome_count(&self) -> usize {
        self.elements.len()
    }

    /// Packs the outcome bits of a full input word into an element index.
    pub fn outcome_key_of_word(&self, word: u64) -> u64 {
        let mut key = 0u64;
        for &p in &self.outcome_positions {
            key = (key << 1) | ((word >> (self.n_size - p)) & 1);
        }
        key
    }

    /// Whether a full input word carries the conditioned values.
    pub fn matches_conditioning(&self, word: u64) -> bool {
        self.conditioning
            .iter()
            .all(|(&p, &bit)| ((word >> (self.n_size - p)) & 1) as u8 == bit)
    }
}

/// Projector onto the nonnegative eigenspace of `a - b`.
fn helstrom_projector(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let delta = hermitize(&(a - b));
    let (vals, vecs) = hermitian_eigen(&delta);
    let n = delta.nrows();
    let mut proj = CMatrix::zeros(n, n);
    for (k, &l) in vals.iter().enumerate() {
        if l >= 0.0 {
            let v = vecs.column(k);
            for i in 0..n {
                let vi = v[i];
                for j in 0..n {
                    proj[(i, j)] += vi * v[j].conj();
                }
            }
        }
    }
    proj
}

/// Builds the sequential-Helstrom decoding POVM for `w` under the given
/// encoder, with outcomes at every position not in `conditioning`.
pub fn build_scd_povm(
    w: &BinaryCqChannel,
    enc: &EncoderMatrix,
    kind: PovmKind,
    conditioning: &BTreeMap<usize, u8>,
    max_dim: usize,
) -> Result<DecoderPovm> {
    let n_size = enc.size();
    let dim = w
        .output_dim()
        .checked_pow(n_size as u32)
        .filter(|&d| d <= max_dim)
        .ok_or_else(|| {
            Error::ResourceLimit(format!(
                "decoder POVM needs operators of dimension {}^{} > cap {}",
                w.output_dim(),
                n_size,
                max_dim
            ))
        })?;
    if conditioning.keys().any(|&p| p == 0 || p > n_size) {
        return Err(Error::Argument(format!(
            "conditioning positions {:?} out of range 1..={}",
            conditioning.keys().collect::<Vec<_>>(),
            n_size
        )));
    }
    let direction = kind.direction();
    let order = kind.decode_order(n_size);
    let outcome_positions: Vec<usize> =
        (1..=n_size).filter(|p| !conditioning.contains_key(p)).collect();

    // Depth-first over decode steps, carrying the running projector product.
    let mut leaves: Vec<(u64, CMatrix)> = Vec::new();
    let mut stack: Vec<(usize, u64, CMatrix)> = vec![(0, 0, CMatrix::identity(dim, dim))];
    while let Some((step, word, a_op)) = stack.pop() {
        if step == n_size {
            leaves.push((word, a_op));
            continue;
        }
        let p = order[step];
        let (r0, r1) = branch_hypothesis_pair(w, enc, direction, p, word);
        let p0 = helstrom_projector(&r0, &r1);
        let p1 = CMatrix::identity(dim, dim) - &p0;
        let bits: &[u8] = match conditioning.get(&p) {
            Some(&bit) => {
                if bit == 0 {
                    &[0]
                } else {
                    &[1]
                }
            }
            None => &[0, 1],
        };
        for &bit in bits {
            let proj = if bit == 0 { &p0 } else { &p1 };
            stack.push((step + 1, word | ((bit as u64) << (n_size - p)), proj * &a_op));
        }
    }

    let n_outcomes = 1usize << outcome_positions.len();
    let mut elements = vec![CMatrix::zeros(dim, dim); n_outcomes];
    let mut seen = vec![false; n_outcomes];
    for (word, a_op) in leaves {
        let mut key = 0u64;
        for &p in &outcome_positions {
            key = (key << 1) | ((word >> (n_size - p)) & 1);
        }
        let key = key as usize;
        if seen[key] {
            return Err(Error::Construction(format!(
                "duplicate outcome {key} in POVM construction"
            )));
        }
        seen[key] = true;
        elements[key] = hermitize(&(a_op.adjoint() * &a_op));
    }

    // Conditioning cuts probability mass; complete the family explicitly.
    let mut total = CMatrix::zeros(dim, dim);
    for e in &elements {
        total += e;
    }
    let residual = hermitize(&(CMatrix::identity(dim, dim) - &total));
    let low = crate::linalg::hermitian_eigenvalues(&residual)
        .first()
        .copied()
        .unwrap_or(0.0);
    if low < -1e-8 {
        return Err(Error::Construction(format!(
            "POVM residual has eigenvalue {low:.3e}; family exceeds the identity"
        )));
    }
    if residual.norm() > 1e-10 {
        let last = elements.len() - 1;
        elements[last] = hermitize(&(&elements[last] + residual));
    }

    let sqrt_elements = elements
        .iter()
        .map(matrix_sqrt_psd)
        .collect::<Result<Vec<_>>>()?;

    // sanity: the completed family resolves the identity
    let mut total = CMatrix::zeros(dim, dim);
    for e in &elements {
        total += e;
    }
    let defect = (total - CMatrix::identity(dim, dim) * cplx(1.0)).norm();
    if defect > 1e-8 {
        return Err(Error::Construction(format!(
            "completed POVM misses the identity by {defect:.3e}"
        )));
    }

    Ok(DecoderPovm {
        kind,
        n_size,
        outcome_positions,
        conditioning: conditioning.clone(),
        elements,
        sqrt_elements,
    })
}
