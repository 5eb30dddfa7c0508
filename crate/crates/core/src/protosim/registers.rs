//! Named-register state vectors. Every protocol operation addresses
//! registers by name, never by raw index arithmetic; the layout is the one
//! place that knows where a register sits.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{cplx, CMatrix, CVector};

/// Protocol registers, one per encoder position `i` (1-based).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Reg {
    /// Alice's retained half of an information pair, `i` in `A`.
    Kept(u8),
    /// Encoder input qubit at position `i` (pre-channel).
    Send(u8),
    /// Channel output for position `i`.
    ChanB(u8),
    /// Environment for position `i`.
    ChanE(u8),
    /// Bob's pre-shared ebit half, `i` in `B`.
    BobEbit(u8),
    /// Purification reference for the amplitude-frozen bit, `i` in `Z`.
    RefAmp(u8),
    /// Amplitude-decoder outcome, `i` in `A ∪ X`.
    AmpOut(u8),
    /// Amplitude-decoder appended copy, `i` in `B ∪ Z`.
    AmpCopy(u8),
    /// Phase-decoder outcome, `i` in `A ∪ Z`.
    PhaseOut(u8),
    /// Phase-decoder appended frozen-phase register, `i` in `X`.
    PhaseFrozen(u8),
}

/// A pure state over an ordered list of named registers. The leftmost
/// register is the most significant part of the amplitude index.
#[derive(Clone, Debug)]
pub struct GlobalState {
    regs: Vec<(Reg, usize)>,
    amp: CVector,
}

impl GlobalState {
    /// The trivial one-dimensional state; registers are appended onto it.
    pub fn empty() -> Self {
        Self {
            regs: Vec::new(),
            amp: CVector::from_element(1, cplx(1.0)),
        }
    }

    /// Wraps amplitudes over an existing layout (used when assembling ideal
    /// comparison states term by term).
    pub fn from_layout(regs: Vec<(Reg, usize)>, amp: CVector) -> Self {
        let total: usize = regs.iter().map(|&(_, d)| d).product();
        assert_eq!(total, amp.len(), "amplitudes do not match the layout");
        Self { regs, amp }
    }

    pub fn dim(&self) -> usize {
        self.amp.len()
    }

    pub fn registers(&self) -> &[(Reg, usize)] {
        &self.regs
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amp
    }

    pub fn norm(&self) -> f64 {
        self.amp.norm()
    }

    pub fn inner(&self, other: &GlobalState) -> Complex64 {
        assert_eq!(self.regs, other.regs, "layouts must match for overlaps");
        self.amp.dotc(&other.amp)
    }

    fn position(&self, reg: Reg) -> usize {
        self.regs
            .iter()
            .position(|&(r, _)| r == reg)
            .unwrap_or_else(|| panic!("register {reg:?} not in layout"))
    }

    fn dims(&self) -> Vec<usize> {
        self.regs.iter().map(|&(_, d)| d).collect()
    }

    pub fn has(&self, reg: Reg) -> bool {
        self.regs.iter().any(|&(r, _)| r == reg)
    }

    /// Appends `reg` (least significant position) in basis state `value`.
    pub fn append_basis(&mut self, reg: Reg, dim: usize, value: usize) -> Result<()> {
        assert!(value < dim);
        if self.has(reg) {
            return Err(Error::Construction(format!("register {reg:?} appended twice")));
        }
        let mut amp = CVector::zeros(self.amp.len() * dim);
        for (i, a) in self.amp.iter().enumerate() {
            amp[i * dim + value] = *a;
        }
        self.amp = amp;
        self.regs.push((reg, dim));
        Ok(())
    }

    /// Applies a square operator to the listed registers (any order; the
    /// operator's index runs over them in the order given).
    pub fn apply(&mut self, targets: &[Reg], op: &CMatrix) {
        let positions: Vec<usize> = targets.iter().map(|&r| self.position(r)).collect();
        self.amp = crate::linalg::apply_to_subsystems(&self.amp, &self.dims(), &positions, op);
    }

    /// Applies an isometry to a single register, growing its dimension from
    /// `v.ncols()` to `v.nrows()`.
    pub fn apply_isometry_at(&mut self, target: Reg, v: &CMatrix) {
        let pos = self.position(target);
        let dims = self.dims();
        let (in_dim, out_dim) = (v.ncols(), v.nrows());
        assert_eq!(dims[pos], in_dim);
        let left: usize = dims[..pos].iter().product();
        let right: usize = dims[pos + 1..].iter().product();
        let mut amp = CVector::zeros(left * out_dim * right);
        for l in 0..left {
            for i in 0..in_dim {
                for r in 0..right {
                    let src = (l * in_dim + i) * right + r;
                    let a = self.amp[src];
                    if a.norm_sqr() == 0.0 {
                        continue;
                    }
                    for o in 0..out_dim {
                        let vo = v[(o, i)];
                        if vo.norm_sqr() == 0.0 {
                            continue;
                        }
                        amp[(l * out_dim + o) * right + r] += vo * a;
                    }
                }
            }
        }
        self.amp = amp;
        self.regs[pos].1 = out_dim;
    }

    /// Relabels a register of dimension `d1 * d2` as two adjacent registers;
    /// the composite index is already `(first, second)` by construction.
    pub fn split_register(&mut self, target: Reg, first: (Reg, usize), second: (Reg, usize)) {
        let pos = self.position(target);
        assert_eq!(self.regs[pos].1, first.1 * second.1);
        self.regs.splice(pos..=pos, [first, second]);
    }

    /// Reads out every basis index decomposed over a register subset.
    fn packed_offsets(&self, regs: &[Reg]) -> (usize, Vec<usize>) {
        let dims = self.dims();
        let mut strides = vec![1usize; dims.len()];
        for k in (0..dims.len().saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * dims[k + 1];
        }
        let positions: Vec<usize> = regs.iter().map(|&r| self.position(r)).collect();
        let sub_dims: Vec<usize> = positions.iter().map(|&p| dims[p]).collect();
        let total: usize = sub_dims.iter().product();
        let mut offsets = Vec::with_capacity(total);
        for mut flat in 0..total {
            let mut off = 0usize;
            for (j, &p) in positions.iter().enumerate().rev() {
                off += (flat % sub_dims[j]) * strides[p];
                flat /= sub_dims[j];
            }
            offsets.push(off);
        }
        (total, offsets)
    }

    /// Coherent application of a controlled outcome isometry:
    /// for control value `c` (packed over `controls`, first register most
    /// significant) the map `sum_o sqrt_elements[c][o] (x) |o>` acts on
    /// `targets`, writing the outcome into freshly appended registers
    /// (`outcome_regs`, first register owning the outcome's most significant
    /// bit). Norm must be preserved to `norm_tol`.
    pub fn apply_controlled_outcome_isometry(
        &mut self,
        controls: &[Reg],
        targets: &[Reg],
        sqrt_elements: &[Vec<CMatrix>],
        outcome_regs: &[(Reg, usize)],
        norm_tol: f64,
    ) -> Result<()> {
        let (c_dim, c_offsets) = self.packed_offsets(controls);
        let (t_dim, t_offsets) = self.packed_offsets(targets);
        assert_eq!(sqrt_elements.len(), c_dim, "one POVM family per control value");
        let o_dim: usize = outcome_regs.iter().map(|&(_, d)| d).product();
        for fam in sqrt_elements {
            assert_eq!(fam.len(), o_dim);
        }

        // rest = everything that is neither control nor target
        let rest_regs: Vec<Reg> = self
            .regs
            .iter()
            .map(|&(r, _)| r)
            .filter(|r| !controls.contains(r) && !targets.contains(r))
            .collect();
        let (rest_dim, rest_offsets) = self.packed_offsets(&rest_regs);

        let before = self.norm();
        let mut out = CVector::zeros(self.amp.len() * o_dim);
        let mut tvec = vec![Complex64::new(0.0, 0.0); t_dim];
        for c in 0..c_dim {
            let fam = &sqrt_elements[c];
            for r in 0..rest_dim {
                let base = c_offsets[c] + rest_offsets[r];
                let mut occupied = false;
                for (t, slot) in tvec.iter_mut().enumerate() {
                    *slot = self.amp[base + t_offsets[t]];
                    occupied |= slot.norm_sqr() != 0.0;
                }
                if !occupied {
                    continue;
                }
                for (o, mat) in fam.iter().enumerate() {
                    for tp in 0..t_dim {
                        let mut acc = Complex64::new(0.0, 0.0);
                        for (t, amp_t) in tvec.iter().enumerate() {
                            acc += mat[(tp, t)] * amp_t;
                        }
                        if acc.norm_sqr() != 0.0 {
                            out[(base + t_offsets[tp]) * o_dim + o] = acc;
                        }
                    }
                }
            }
        }
        self.amp = out;
        for &(reg, dim) in outcome_regs {
            if self.has(reg) {
                return Err(Error::Construction(format!("register {reg:?} appended twice")));
            }
            self.regs.push((reg, dim));
        }
        let after = self.norm();
        if (after - before).abs() > norm_tol {
            return Err(Error::NumericDomain(format!(
                "decode step drifted the norm by {:.3e}",
                (after - before).abs()
            )));
        }
        Ok(())
    }

    /// Contracts register pairs against perfect ebits `<Phi|` and returns the
    /// squared norm of the remainder: the fidelity of the reduced state on
    /// those pairs with the ideal ebits.
    pub fn ebit_projection_fidelity(&self, pairs: &[(Reg, Reg)]) -> f64 {
        let mut state = self.clone();
        for &(a, b) in pairs {
            state = state.contract_ebit(a, b);
        }
        state.amp.norm_squared()
    }

    fn contract_ebit(&self, a: Reg, b: Reg) -> GlobalState {
        let pa = self.position(a);
        let pb = self.position(b);
        let dims = self.dims();
        assert_eq!(dims[pa], 2);
        assert_eq!(dims[pb], 2);
        let mut strides = vec![1usize; dims.len()];
        for k in (0..dims.len().saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * dims[k + 1];
        }
        let mut new_regs = self.regs.clone();
        let (hi, lo) = if pa > pb { (pa, pb) } else { (pb, pa) };
        new_regs.remove(hi);
        new_regs.remove(lo);
        let new_dims: Vec<usize> = new_regs.iter().map(|&(_, d)| d).collect();
        let new_total: usize = new_dims.iter().product::<usize>().max(1);
        let mut amp = CVector::zeros(new_total);
        let w = cplx(1.0 / 2f64.sqrt());
        // walk the remaining registers, summing the two aligned components
        let kept_positions: Vec<usize> =
            (0..dims.len()).filter(|&p| p != pa && p != pb).collect();
        for flat in 0..new_total {
            let mut off = 0usize;
            let mut rem = flat;
            for (j, &p) in kept_positions.iter().enumerate() {
                let stride: usize = new_dims[j + 1..].iter().product();
                off += (rem / stride) * strides[p];
                rem %= stride;
            }
            let v0 = self.amp[off];
            let v1 = self.amp[off + strides[pa] + strides[pb]];
            amp[flat] = w * (v0 + v1);
        }
        GlobalState {
            regs: new_regs,
            amp,
        }
    }
}
