//! The binary classical-quantum channels induced by a qubit-input channel:
//! amplitude information to the receiver (`W_A`), phase information to the
//! receiver with entangled side information (`W_P`), and amplitude
//! information leaked to the environment (`W_E`).
//!
//! `W_P` outputs live on `B (x) C` with the side-information qubit `C` as the
//! rightmost factor. The square-rooted fidelity is the stored primitive: all
//! polarization thresholds are phrased in `sqrt(F)`.

use crate::channel::QuantumChannel;
use crate::error::{Error, Result};
use crate::linalg::{
    cplx, entropy_of_hermitian, hermitize, matrix_sqrt_psd, trace_norm, CMatrix, CVector,
    DensityOperator, PureStateVector,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CqLabel {
    Amplitude,
    Phase,
    Environment,
    Synthesized,
}

/// A binary cq channel `x -> rho_x` with equal-dimension outputs.
#[derive(Clone, Debug)]
pub struct BinaryCqChannel {
    rho0: DensityOperator,
    rho1: DensityOperator,
    label: CqLabel,
}

impl BinaryCqChannel {
    pub fn new(rho0: DensityOperator, rho1: DensityOperator, label: CqLabel) -> Result<Self> {
        if rho0.dim() != rho1.dim() {
            return Err(Error::Argument(format!(
                "cq channel outputs must share a dimension, got {} and {}",
                rho0.dim(),
                rho1.dim()
            )));
        }
        Ok(Self { rho0, rho1, label })
    }

    pub fn output(&self, bit: u8) -> &DensityOperator {
        if bit == 0 {
            &self.rho0
        } else {
            &self.rho1
        }
    }

    pub fn output_dim(&self) -> usize {
        self.rho0.dim()
    }

    pub fn label(&self) -> CqLabel {
        self.label
    }
}

/// The four-party pure state relating `W_A` and `W_P`: measuring `A` in the
/// amplitude basis produces `W_A` outputs on `B`, measuring it in the phase
/// basis produces `W_P` outputs on `B (x) C`. Factor order is `(A, B, C, E)`.
#[derive(Clone, Debug)]
pub struct JointChannelState {
    psi: PureStateVector,
}

impl JointChannelState {
    pub fn state(&self) -> &PureStateVector {
        &self.psi
    }
}

fn require_qubit_input(ch: &QuantumChannel) -> Result<()> {
    if ch.in_dim() != 2 {
        return Err(Error::Argument(format!(
            "expected a qubit-input channel, got input dimension {}",
            ch.in_dim()
        )));
    }
    Ok(())
}

/// `|psi> = 2^{-1/2} sum_z |z>_A |z>_C V|z>_{BE}`, reordered to `(A, B, C, E)`.
pub fn joint_state(ch: &QuantumChannel) -> Result<JointChannelState> {
    require_qubit_input(ch)?;
    let (db, de) = (ch.out_dim(), ch.env_dim());
    let mut amp = CVector::zeros(2 * db * 2 * de);
    let norm = cplx(1.0 / 2f64.sqrt());
    for z in 0..2usize {
        let phi = ch.basis_purification(z); // indexed (b, e)
        for b in 0..db {
            for e in 0..de {
                // composite (a, b, c, e) with a = c = z
                let idx = ((z * db + b) * 2 + z) * de + e;
                amp[idx] = norm * phi[b * de + e];
            }
        }
    }
    Ok(JointChannelState {
        psi: PureStateVector::new(amp, vec![2, db, 2, de])?,
    })
}

/// `W_A: z -> N(|z><z|)`.
pub fn amplitude_channel(ch: &QuantumChannel) -> Result<BinaryCqChannel> {
    require_qubit_input(ch)?;
    let rho0 = ch.apply(&DensityOperator::basis_state(2, 0))?;
    let rho1 = ch.apply(&DensityOperator::basis_state(2, 1))?;
    BinaryCqChannel::new(rho0, rho1, CqLabel::Amplitude)
}

/// `W_E: z -> Tr_B(V |z><z| V†)`.
pub fn environment_channel(ch: &QuantumChannel) -> Result<BinaryCqChannel> {
    require_qubit_input(ch)?;
    let rho0 = ch.complementary(&DensityOperator::basis_state(2, 0))?;
    let rho1 = ch.complementary(&DensityOperator::basis_state(2, 1))?;
    BinaryCqChannel::new(rho0, rho1, CqLabel::Environment)
}

/// `W_P: x -> sigma_x = Tr_E |sigma_x><sigma_x|` with
/// `|sigma_x> = V (Z^x) |Phi>_{A'C}` — the phase modulation applied to one
/// half of an ebit before transmission.
pub fn phase_channel(ch: &QuantumChannel) -> Result<BinaryCqChannel> {
    require_qubit_input(ch)?;
    let (db, de) = (ch.out_dim(), ch.env_dim());
    let mut outputs = Vec::with_capacity(2);
    for x in 0..2usize {
        // |sigma_x> on (B, C, E): amp[(b, c, e)] = (-1)^{x c} phi_c[b, e] / sqrt(2)
        let mut vec = CVector::zeros(db * 2 * de);
        for c in 0..2usize {
            let phi = ch.basis_purification(c);
            let sign = if x == 1 && c == 1 { -1.0 } else { 1.0 };
            let w = cplx(sign / 2f64.sqrt());
            for b in 0..db {
                for e in 0..de {
                    vec[(b * 2 + c) * de + e] = w * phi[b * de + e];
                }
            }
        }
        let psv = PureStateVector::new(vec, vec![db, 2, de])?;
        outputs.push(psv.reduced_density(&[0, 1])?);
    }
    let rho1 = outputs.pop().expect("two outputs");
    let rho0 = outputs.pop().expect("two outputs");
    BinaryCqChannel::new(rho0, rho1, CqLabel::Phase)
}

/// Symmetric Holevo information `I(W) = H((rho0+rho1)/2) - [H(rho0)+H(rho1)]/2`.
pub fn holevo(w: &BinaryCqChannel) -> f64 {
    holevo_of_pair(w.rho0.matrix(), w.rho1.matrix())
}

/// Holevo information of an equiprobable pair given as raw Hermitian
/// matrices; shared by the polar-synthesis branch enumerator.
pub fn holevo_of_pair(rho0: &CMatrix, rho1: &CMatrix) -> f64 {
    let avg = (rho0 + rho1) * cplx(0.5);
    let i = entropy_of_hermitian(&avg)
        - 0.5 * (entropy_of_hermitian(rho0) + entropy_of_hermitian(rho1));
    debug_assert!(i > -1e-9 && i < 1.0 + 1e-9, "holevo out of range: {i}");
    i.clamp(0.0, 1.0)
}

/// `sqrt(F(W)) = ||sqrt(rho0) sqrt(rho1)||_1` — the polarization thresholds
/// are all phrased in this square root.
pub fn sqrt_fidelity_param(w: &BinaryCqChannel) -> f64 {
    sqrt_fidelity_of_pair(w.rho0.matrix(), w.rho1.matrix())
}

pub fn sqrt_fidelity_of_pair(rho0: &CMatrix, rho1: &CMatrix) -> f64 {
    let m = matrix_sqrt_psd(&hermitize(rho0)).expect("mixture is PSD")
        * matrix_sqrt_psd(&hermitize(rho1)).expect("mixture is PSD");
    let sf = trace_norm(&m);
    debug_assert!(sf > -1e-9 && sf < 1.0 + 1e-9);
    sf.clamp(0.0, 1.0)
}

/// Lower bound `I(W) >= log2(2 / (1 + sqrt(F(W))))` relating the two channel
/// parameters; every constructed cq channel must satisfy it.
pub fn holevo_fidelity_floor(sqrt_fidelity: f64) -> f64 {
    (2.0 / (1.0 + sqrt_fidelity)).log2()
}

/// `I(W_P) + I(W_E) - 1`. This vanishes identically for every qubit-input
/// channel; the returned gap is a verification probe, contractually within
/// 1e-8 of zero.
pub fn duality_gap(ch: &QuantumChannel) -> Result<f64> {
    let wp = phase_channel(ch)?;
    let we = environment_channel(ch)?;
    Ok(holevo(&wp) + holevo(&we) - 1.0)
}
