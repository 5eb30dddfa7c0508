//! Dense complex linear algebra over explicit tensor-product structures.
//!
//! Composite indices follow one fixed convention: the leftmost factor is the
//! most significant part of the index, i.e. for `dims = [d1, d2]` the basis
//! vector `|i1, i2>` sits at position `i1 * d2 + i2`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Tolerance for validating caller-supplied operators (Hermiticity, trace,
/// normalization, eigenvalue positivity).
pub const TOL_INPUT: f64 = 1e-10;
/// Tolerance for products derived from validated inputs.
pub const TOL_DERIVED: f64 = 1e-8;
/// Eigenvalues below this contribute nothing to an entropy.
const ENTROPY_FLOOR: f64 = 1e-12;

/// Hard cap on the dimension of any dense operator produced by an operation.
/// Exceeding it is a resource error, not an attempt.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DimCap(pub usize);

impl Default for DimCap {
    fn default() -> Self {
        DimCap(4096)
    }
}

pub fn cplx(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// `(m + m†)/2` — used to scrub roundoff drift off operators that are
/// Hermitian by construction.
pub fn hermitize(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * cplx(0.5)
}

fn hermiticity_defect(m: &CMatrix) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..m.nrows() {
        for j in i..m.ncols() {
            let d = (m[(i, j)] - m[(j, i)].conj()).norm();
            if d > worst {
                worst = d;
            }
        }
    }
    worst
}

/// Hands a Hermitian matrix to LAPACK in its native column-major layout.
/// (The row-major path hands back conjugated eigenvectors for complex input.)
fn to_fortran_layout(h: &CMatrix) -> ndarray::Array2<Complex64> {
    use ndarray::ShapeBuilder;
    let n = h.nrows();
    let mut a = ndarray::Array2::zeros((n, n).f());
    for j in 0..n {
        for i in 0..n {
            a[(i, j)] = h[(i, j)];
        }
    }
    a
}

/// Eigendecomposition of a Hermitian matrix, eigenvalues ascending.
/// Column `k` of the returned matrix is the eigenvector for eigenvalue `k`.
///
/// Backed by LAPACK's Hermitian solver: iterative pure-Rust alternatives were
/// observed to diverge on the reducible Kronecker-structured operators this
/// crate produces constantly.
pub fn hermitian_eigen(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    use ndarray_linalg::{Eigh, UPLO};
    let n = m.nrows();
    let (vals, vecs) = to_fortran_layout(&hermitize(m))
        .eigh(UPLO::Lower)
        .expect("LAPACK eigh failed on a Hermitian matrix");
    let vecs = CMatrix::from_fn(n, n, |i, j| vecs[(i, j)]);
    (vals.to_vec(), vecs)
}

/// Eigenvalues only, ascending.
pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    use ndarray_linalg::{EigValsh, UPLO};
    let vals = to_fortran_layout(&hermitize(m))
        .eigvalsh(UPLO::Lower)
        .expect("LAPACK eigvalsh failed on a Hermitian matrix");
    vals.to_vec()
}

/// Kronecker product; the left factor owns the most significant index.
pub fn tensor_product(a: &CMatrix, b: &CMatrix, cap: DimCap) -> Result<CMatrix> {
    let rows = a.nrows().checked_mul(b.nrows());
    let cols = a.ncols().checked_mul(b.ncols());
    match (rows, cols) {
        (Some(r), Some(c)) if r <= cap.0 && c <= cap.0 => Ok(a.kronecker(b)),
        _ => Err(Error::ResourceLimit(format!(
            "tensor product of {}x{} and {}x{} exceeds dimension cap {}",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols(),
            cap.0
        ))),
    }
}

/// Kronecker product of a list, left to right. Empty input gives the 1x1
/// identity (the empty tensor factor).
pub fn tensor_product_all(factors: &[&CMatrix], cap: DimCap) -> Result<CMatrix> {
    let mut out = CMatrix::identity(1, 1);
    for f in factors {
        out = tensor_product(&out, f, cap)?;
    }
    Ok(out)
}

fn strides(dims: &[usize]) -> Vec<usize> {
    let mut s = vec![1usize; dims.len()];
    for k in (0..dims.len().saturating_sub(1)).rev() {
        s[k] = s[k + 1] * dims[k + 1];
    }
    s
}

/// Partial trace of a square operator over the factors NOT listed in `keep`.
/// `keep` must be strictly increasing; kept factors retain their relative
/// order. The trace is preserved.
pub fn partial_trace(op: &CMatrix, dims: &[usize], keep: &[usize]) -> Result<CMatrix> {
    let total: usize = dims.iter().product();
    if op.nrows() != op.ncols() {
        return Err(Error::Argument(format!(
            "partial trace needs a square operator, got {}x{}",
            op.nrows(),
            op.ncols()
        )));
    }
    if total != op.nrows() {
        return Err(Error::Argument(format!(
            "subsystem dims {:?} do not multiply to operator dimension {}",
            dims,
            op.nrows()
        )));
    }
    if keep.windows(2).any(|w| w[0] >= w[1]) || keep.iter().any(|&k| k >= dims.len()) {
        return Err(Error::Argument(format!(
            "keep set {:?} is not a strictly increasing subset of 0..{}",
            keep,
            dims.len()
        )));
    }
    let st = strides(dims);
    let traced: Vec<usize> = (0..dims.len()).filter(|k| !keep.contains(k)).collect();
    let kept_dims: Vec<usize> = keep.iter().map(|&k| dims[k]).collect();
    let dim_k: usize = kept_dims.iter().product();
    let dim_t: usize = traced.iter().map(|&k| dims[k]).product();

    // Offsets of each kept (resp. traced) multi-index in the full index.
    let offsets = |positions: &[usize], count: usize| -> Vec<usize> {
        let pdims: Vec<usize> = positions.iter().map(|&p| dims[p]).collect();
        let pst = strides(&pdims);
        (0..count)
            .map(|mut idx_flat| {
                let mut off = 0;
                for (j, &p) in positions.iter().enumerate() {
                    let comp = idx_flat / pst[j];
                    idx_flat %= pst[j];
                    off += comp * st[p];
                }
                off
            })
            .collect()
    };
    let keep_off = offsets(keep, dim_k);
    let trace_off = offsets(&traced, dim_t);

    let mut out = CMatrix::zeros(dim_k, dim_k);
    for (r, &ro) in keep_off.iter().enumerate() {
        for (c, &co) in keep_off.iter().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for &to in &trace_off {
                acc += op[(ro + to, co + to)];
            }
            out[(r, c)] = acc;
        }
    }
    Ok(out)
}

/// Square root of a Hermitian PSD operator. Eigenvalues in `[-1e-8, 0)` are
/// clamped to zero; anything below that is a numeric-domain error.
pub fn matrix_sqrt_psd(op: &CMatrix) -> Result<CMatrix> {
    if op.nrows() != op.ncols() {
        return Err(Error::Argument("matrix_sqrt_psd needs a square operator".into()));
    }
    if hermiticity_defect(op) > TOL_DERIVED {
        return Err(Error::NumericDomain(
            "matrix_sqrt_psd input is not Hermitian within tolerance".into(),
        ));
    }
    let (vals, vecs) = hermitian_eigen(op);
    if let Some(&low) = vals.first() {
        if low < -TOL_DERIVED {
            return Err(Error::NumericDomain(format!(
                "matrix_sqrt_psd input has eigenvalue {low:.3e} below -1e-8"
            )));
        }
    }
    let n = op.nrows();
    let mut out = CMatrix::zeros(n, n);
    for k in 0..n {
        // the floor also drops positive roundoff noise, whose square root
        // would otherwise inject O(1e-8) junk directions
        if vals[k] <= ENTROPY_FLOOR {
            continue;
        }
        let root = cplx(vals[k].sqrt());
        let v = vecs.column(k);
        for i in 0..n {
            let vi = v[i] * root;
            for j in 0..n {
                out[(i, j)] += vi * v[j].conj();
            }
        }
    }
    Ok(out)
}

/// Sum of singular values of a square matrix.
pub fn trace_norm(op: &CMatrix) -> f64 {
    assert_eq!(op.nrows(), op.ncols(), "trace_norm needs a square matrix");
    let gram = op.adjoint() * op;
    hermitian_eigenvalues(&gram)
        .into_iter()
        .map(|l| if l > 0.0 { l.sqrt() } else { 0.0 })
        .sum()
}

/// `F(rho, sigma) = ||sqrt(rho) sqrt(sigma)||_1^2`, in `[0, 1]`.
pub fn fidelity(rho: &DensityOperator, sigma: &DensityOperator) -> Result<f64> {
    if rho.dim() != sigma.dim() {
        return Err(Error::Argument(format!(
            "fidelity dimension mismatch: {} vs {}",
            rho.dim(),
            sigma.dim()
        )));
    }
    let m = matrix_sqrt_psd(rho.matrix())? * matrix_sqrt_psd(sigma.matrix())?;
    let f = trace_norm(&m).powi(2);
    Ok(f.clamp(0.0, 1.0))
}

/// Base-2 von Neumann entropy. Eigenvalues below 1e-12 contribute zero.
pub fn von_neumann_entropy(rho: &DensityOperator) -> f64 {
    entropy_of_hermitian(rho.matrix())
}

/// Entropy of a Hermitian PSD matrix given directly (no density-operator
/// validation); used on mixture accumulators that are valid by construction.
pub fn entropy_of_hermitian(m: &CMatrix) -> f64 {
    hermitian_eigenvalues(m)
        .into_iter()
        .filter(|&l| l > ENTROPY_FLOOR)
        .map(|l| -l * l.log2())
        .sum()
}

/// Reorders tensor factors of a state vector. `perm[k]` names the old factor
/// that becomes the new factor `k`.
pub fn permute_subsystems_vec(state: &CVector, dims: &[usize], perm: &[usize]) -> CVector {
    assert_eq!(dims.len(), perm.len());
    let total: usize = dims.iter().product();
    assert_eq!(state.len(), total);
    let st_old = strides(dims);
    let new_dims: Vec<usize> = perm.iter().map(|&p| dims[p]).collect();
    let st_new = strides(&new_dims);
    let mut out = CVector::zeros(total);
    for idx in 0..total {
        let mut new_idx = 0usize;
        for (k, &p) in perm.iter().enumerate() {
            let comp = (idx / st_old[p]) % dims[p];
            new_idx += comp * st_new[k];
        }
        out[new_idx] = state[idx];
    }
    out
}

/// Reorders tensor factors of a square operator (rows and columns alike).
pub fn permute_subsystems_mat(op: &CMatrix, dims: &[usize], perm: &[usize]) -> CMatrix {
    let total: usize = dims.iter().product();
    assert_eq!(op.nrows(), total);
    assert_eq!(op.ncols(), total);
    let st_old = strides(dims);
    let new_dims: Vec<usize> = perm.iter().map(|&p| dims[p]).collect();
    let st_new = strides(&new_dims);
    let map: Vec<usize> = (0..total)
        .map(|idx| {
            let mut new_idx = 0usize;
            for (k, &p) in perm.iter().enumerate() {
                let comp = (idx / st_old[p]) % dims[p];
                new_idx += comp * st_new[k];
            }
            new_idx
        })
        .collect();
    let mut out = CMatrix::zeros(total, total);
    for r in 0..total {
        for c in 0..total {
            out[(map[r], map[c])] = op[(r, c)];
        }
    }
    out
}

/// Applies a square operator to the listed tensor factors of a state vector.
/// `targets` may appear in any order; the operator's index runs over the
/// target dims in that order.
pub fn apply_to_subsystems(
    state: &CVector,
    dims: &[usize],
    targets: &[usize],
    op: &CMatrix,
) -> CVector {
    let total: usize = dims.iter().product();
    assert_eq!(state.len(), total);
    let t_dims: Vec<usize> = targets.iter().map(|&t| dims[t]).collect();
    let t_dim: usize = t_dims.iter().product();
    assert_eq!(op.nrows(), t_dim, "operator does not match target dims");
    assert_eq!(op.ncols(), t_dim);
    let st = strides(dims);
    let t_st = strides(&t_dims);

    // Offset of each target multi-index inside the full index.
    let t_offsets: Vec<usize> = (0..t_dim)
        .map(|mut flat| {
            let mut off = 0;
            for (j, &t) in targets.iter().enumerate() {
                off += (flat / t_st[j]) * st[t];
                flat %= t_st[j];
            }
            off
        })
        .collect();

    // Base offsets enumerate every assignment of the non-target factors.
    let rest: Vec<usize> = (0..dims.len()).filter(|k| !targets.contains(k)).collect();
    let rest_dims: Vec<usize> = rest.iter().map(|&k| dims[k]).collect();
    let rest_dim: usize = rest_dims.iter().product();
    let rest_st = strides(&rest_dims);
    let mut out = CVector::zeros(total);
    let mut buf = vec![Complex64::new(0.0, 0.0); t_dim];
    for rflat in 0..rest_dim {
        let mut base = 0usize;
        let mut rem = rflat;
        for (j, &k) in rest.iter().enumerate() {
            base += (rem / rest_st[j]) * st[k];
            rem %= rest_st[j];
        }
        for (a, &toff) in t_offsets.iter().enumerate() {
            buf[a] = state[base + toff];
        }
        for (b, &toff_b) in t_offsets.iter().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for (a, amp) in buf.iter().enumerate() {
                acc += op[(b, a)] * amp;
            }
            out[base + toff_b] = acc;
        }
    }
    out
}

/// A validated density operator: Hermitian, PSD, unit trace (all to 1e-10).
#[derive(Clone, Debug, PartialEq)]
pub struct DensityOperator {
    mat: CMatrix,
}

impl DensityOperator {
    pub fn new(mat: CMatrix) -> Result<Self> {
        if mat.nrows() != mat.ncols() || mat.nrows() == 0 {
            return Err(Error::Argument(format!(
                "density operator must be square and nonempty, got {}x{}",
                mat.nrows(),
                mat.ncols()
            )));
        }
        if hermiticity_defect(&mat) > TOL_INPUT {
            return Err(Error::Validation("density operator is not Hermitian".into()));
        }
        let tr = mat.trace();
        if (tr.re - 1.0).abs() > TOL_INPUT || tr.im.abs() > TOL_INPUT {
            return Err(Error::Validation(format!(
                "density operator trace is {tr}, expected 1"
            )));
        }
        let vals = hermitian_eigenvalues(&mat);
        if vals.first().is_some_and(|&l| l < -TOL_INPUT) {
            return Err(Error::Validation(format!(
                "density operator has eigenvalue {:.3e} < -1e-10",
                vals[0]
            )));
        }
        Ok(Self { mat })
    }

    /// Wraps a matrix that is a valid density operator by construction.
    /// Only the cheap invariants are checked (and only in debug builds).
    pub fn from_valid(mat: CMatrix) -> Self {
        debug_assert!(hermiticity_defect(&mat) <= TOL_DERIVED);
        debug_assert!((mat.trace().re - 1.0).abs() <= TOL_DERIVED);
        Self { mat }
    }

    pub fn pure(state: &CVector) -> Result<Self> {
        let n2 = state.norm_squared();
        if (n2 - 1.0).abs() > TOL_INPUT {
            return Err(Error::Validation(format!(
                "pure state has squared norm {n2}, expected 1"
            )));
        }
        let m = state * state.adjoint();
        Ok(Self { mat: m })
    }

    pub fn basis_state(dim: usize, k: usize) -> Self {
        let mut m = CMatrix::zeros(dim, dim);
        m[(k, k)] = cplx(1.0);
        Self { mat: m }
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self {
            mat: CMatrix::identity(dim, dim) * cplx(1.0 / dim as f64),
        }
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.mat
    }

    pub fn into_matrix(self) -> CMatrix {
        self.mat
    }
}

/// A normalized pure state together with its tensor factorization.
#[derive(Clone, Debug, PartialEq)]
pub struct PureStateVector {
    amplitudes: CVector,
    subsystem_dims: Vec<usize>,
}

impl PureStateVector {
    pub fn new(amplitudes: CVector, subsystem_dims: Vec<usize>) -> Result<Self> {
        let total: usize = subsystem_dims.iter().product();
        if total != amplitudes.len() || subsystem_dims.iter().any(|&d| d == 0) {
            return Err(Error::Argument(format!(
                "subsystem dims {:?} do not multiply to state length {}",
                subsystem_dims,
                amplitudes.len()
            )));
        }
        let n2 = amplitudes.norm_squared();
        if (n2 - 1.0).abs() > TOL_INPUT {
            return Err(Error::Validation(format!(
                "state has squared norm {n2}, expected 1"
            )));
        }
        Ok(Self {
            amplitudes,
            subsystem_dims,
        })
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amplitudes
    }

    pub fn subsystem_dims(&self) -> &[usize] {
        &self.subsystem_dims
    }

    /// Reduced density operator on the kept factors (strictly increasing).
    pub fn reduced_density(&self, keep: &[usize]) -> Result<DensityOperator> {
        if keep.windows(2).any(|w| w[0] >= w[1])
            || keep.iter().any(|&k| k >= self.subsystem_dims.len())
        {
            return Err(Error::Argument(format!(
                "keep set {:?} out of range for {:?}",
                keep, self.subsystem_dims
            )));
        }
        let dims = &self.subsystem_dims;
        let st = strides(dims);
        let traced: Vec<usize> = (0..dims.len()).filter(|k| !keep.contains(k)).collect();
        let kept_dims: Vec<usize> = keep.iter().map(|&k| dims[k]).collect();
        let dim_k: usize = kept_dims.iter().product();
        let t_dims: Vec<usize> = traced.iter().map(|&k| dims[k]).collect();
        let dim_t: usize = t_dims.iter().product();
        let offset = |positions: &[usize], pdims: &[usize], mut flat: usize| -> usize {
            let pst = strides(pdims);
            let mut off = 0;
            for (j, &p) in positions.iter().enumerate() {
                off += (flat / pst[j]) * st[p];
                flat %= pst[j];
            }
            off
        };
        let mut out = CMatrix::zeros(dim_k, dim_k);
        for t in 0..dim_t {
            let to = offset(&traced, &t_dims, t);
            for r in 0..dim_k {
                let ro = offset(keep, &kept_dims, r);
                let ar = self.amplitudes[ro + to];
                if ar.norm_sqr() == 0.0 {
                    continue;
                }
                for c in 0..dim_k {
                    let co = offset(keep, &kept_dims, c);
                    out[(r, c)] += ar * self.amplitudes[co + to].conj();
                }
            }
        }
        Ok(DensityOperator::from_valid(hermitize(&out)))
    }

    /// Applies a square operator to the listed factors; norm is re-checked.
    pub fn apply(&self, targets: &[usize], op: &CMatrix) -> Result<Self> {
        let out = apply_to_subsystems(&self.amplitudes, &self.subsystem_dims, targets, op);
        PureStateVector::new(out, self.subsystem_dims.clone())
    }

    pub fn inner(&self, other: &Self) -> Complex64 {
        self.amplitudes.dotc(&other.amplitudes)
    }
}

/// A validated isometry `V: in -> out`, `V†V = I`.
#[derive(Clone, Debug, PartialEq)]
pub struct IsometryMatrix {
    mat: CMatrix,
}

impl IsometryMatrix {
    pub fn new(mat: CMatrix) -> Result<Self> {
        if mat.nrows() < mat.ncols() || mat.ncols() == 0 {
            return Err(Error::Argument(format!(
                "isometry must have out_dim >= in_dim > 0, got {}x{}",
                mat.nrows(),
                mat.ncols()
            )));
        }
        let gram = mat.adjoint() * &mat;
        let defect = (&gram - CMatrix::identity(mat.ncols(), mat.ncols())).norm();
        if defect > TOL_DERIVED {
            return Err(Error::Validation(format!(
                "V†V deviates from identity by {defect:.3e}"
            )));
        }
        Ok(Self { mat })
    }

    pub fn in_dim(&self) -> usize {
        self.mat.ncols()
    }

    pub fn out_dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.mat
    }
}

/// Random density operator from a normalized Gaussian Gram matrix.
pub fn random_density_operator<R: Rng>(dim: usize, rng: &mut R) -> DensityOperator {
    let g = CMatrix::from_fn(dim, dim, |_, _| {
        Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    });
    let gram = &g * g.adjoint();
    let tr = gram.trace().re;
    DensityOperator::from_valid(gram * cplx(1.0 / tr))
}

/// Haar-distributed isometry `in -> out` via QR of a Gaussian matrix, with
/// the phase convention that makes R's diagonal real positive.
pub fn haar_random_isometry<R: Rng>(out_dim: usize, in_dim: usize, rng: &mut R) -> IsometryMatrix {
    assert!(out_dim >= in_dim);
    let g = CMatrix::from_fn(out_dim, in_dim, |_, _| {
        Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    });
    let qr = g.qr();
    let q = qr.q();
    let r = qr.r();
    let mut v = CMatrix::zeros(out_dim, in_dim);
    for j in 0..in_dim {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { cplx(1.0) };
        let col = q.column(j) * phase;
        v.set_column(j, &col);
    }
    IsometryMatrix::new(v).expect("QR produces an isometry")
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn mat(rows: usize, cols: usize, re: &[f64]) -> CMatrix {
        CMatrix::from_fn(rows, cols, |i, j| cplx(re[i * cols + j]))
    }

    fn diag(entries: &[f64]) -> CMatrix {
        CMatrix::from_diagonal(&CVector::from_iterator(
            entries.len(),
            entries.iter().map(|&x| cplx(x)),
        ))
    }

    #[test]
    fn tensor_product_identities() {
        let i2 = CMatrix::identity(2, 2);
        let t = tensor_product(&i2, &i2, DimCap::default()).unwrap();
        assert_eq!(t, CMatrix::identity(4, 4));

        let p0 = diag(&[1.0, 0.0]);
        let p1 = diag(&[0.0, 1.0]);
        let t = tensor_product(&p0, &p1, DimCap::default()).unwrap();
        assert_eq!(t, diag(&[0.0, 1.0, 0.0, 0.0]));
    }

    #[test]
    fn tensor_product_x_z_by_hand() {
        // Hand Kronecker expansion of X (x) Z.
        let x = mat(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let z = diag(&[1.0, -1.0]);
        let t = tensor_product(&x, &z, DimCap::default()).unwrap();
        let mut expect = CMatrix::zeros(4, 4);
        expect[(0, 2)] = cplx(1.0);
        expect[(1, 3)] = cplx(-1.0);
        expect[(2, 0)] = cplx(1.0);
        expect[(3, 1)] = cplx(-1.0);
        assert_eq!(t, expect);
    }

    #[test]
    fn tensor_product_cap() {
        let big = CMatrix::identity(100, 100);
        let err = tensor_product(&big, &big, DimCap(4096)).unwrap_err();
        assert!(matches!(err, Error::ResourceLimit(_)));
    }

    #[test]
    fn partial_trace_maximally_entangled() {
        // |Phi> = (|00> + |11>)/sqrt(2); both marginals are I/2.
        let mut phi = CVector::zeros(4);
        phi[0] = cplx(1.0 / 2f64.sqrt());
        phi[3] = cplx(1.0 / 2f64.sqrt());
        let rho = &phi * phi.adjoint();
        for keep in [&[0usize][..], &[1usize][..]] {
            let red = partial_trace(&rho, &[2, 2], keep).unwrap();
            assert_relative_eq!((red - diag(&[0.5, 0.5])).norm(), 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn partial_trace_product_case() {
        let rho = diag(&[0.25, 0.75]);
        let sigma = mat(2, 2, &[0.5, 0.1, 0.1, 0.5]);
        let joint = tensor_product(&rho, &sigma, DimCap::default()).unwrap();
        let back = partial_trace(&joint, &[2, 2], &[1]).unwrap();
        assert_relative_eq!((back - &sigma).norm(), 0.0, epsilon = 1e-12);
        let front = partial_trace(&joint, &[2, 2], &[0]).unwrap();
        assert_relative_eq!((front - &rho).norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn partial_trace_rejects_bad_keep() {
        let op = CMatrix::identity(4, 4);
        assert!(matches!(
            partial_trace(&op, &[2, 2], &[2]),
            Err(Error::Argument(_))
        ));
        assert!(matches!(
            partial_trace(&op, &[2, 3], &[0]),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn sqrt_psd_cases() {
        let i4 = CMatrix::identity(4, 4);
        assert_relative_eq!(
            (matrix_sqrt_psd(&i4).unwrap() - &i4).norm(),
            0.0,
            epsilon = 1e-12
        );
        let s = matrix_sqrt_psd(&diag(&[4.0, 9.0])).unwrap();
        assert_relative_eq!((s - diag(&[2.0, 3.0])).norm(), 0.0, epsilon = 1e-10);
        // rank-1 projector is its own square root
        let mut v = CVector::zeros(3);
        v[0] = cplx(0.6);
        v[2] = cplx(0.8);
        let p = &v * v.adjoint();
        let s = matrix_sqrt_psd(&p).unwrap();
        assert_relative_eq!((s - &p).norm(), 0.0, epsilon = 1e-9);
    }

    #[test]
    fn sqrt_psd_rejects_negative() {
        let err = matrix_sqrt_psd(&diag(&[1.0, -0.5])).unwrap_err();
        assert!(matches!(err, Error::NumericDomain(_)));
    }

    #[test]
    fn trace_norm_cases() {
        assert_relative_eq!(trace_norm(&CMatrix::identity(5, 5)), 5.0, epsilon = 1e-10);
        assert_relative_eq!(trace_norm(&diag(&[1.0, -2.0])), 3.0, epsilon = 1e-10);
        // sqrt(rho0) sqrt(rho1) for rho0 = |0><0|, rho1 = diag(0.36, 0.64)
        let m = matrix_sqrt_psd(&diag(&[1.0, 0.0])).unwrap()
            * matrix_sqrt_psd(&diag(&[0.36, 0.64])).unwrap();
        assert_relative_eq!(trace_norm(&m), 0.6, epsilon = 1e-10);
    }

    #[test]
    fn fidelity_cases() {
        let rho = DensityOperator::new(diag(&[0.3, 0.7])).unwrap();
        assert_relative_eq!(fidelity(&rho, &rho).unwrap(), 1.0, epsilon = 1e-9);
        let zero = DensityOperator::basis_state(2, 0);
        let one = DensityOperator::basis_state(2, 1);
        assert_relative_eq!(fidelity(&zero, &one).unwrap(), 0.0, epsilon = 1e-12);
        let mixed = DensityOperator::new(diag(&[0.36, 0.64])).unwrap();
        assert_relative_eq!(fidelity(&zero, &mixed).unwrap(), 0.36, epsilon = 1e-10);
    }

    #[test]
    fn fidelity_dimension_mismatch() {
        let a = DensityOperator::basis_state(2, 0);
        let b = DensityOperator::basis_state(3, 0);
        assert!(matches!(fidelity(&a, &b), Err(Error::Argument(_))));
    }

    #[test]
    fn entropy_cases() {
        let pure = DensityOperator::basis_state(4, 2);
        assert_relative_eq!(von_neumann_entropy(&pure), 0.0, epsilon = 1e-12);
        let mixed = DensityOperator::maximally_mixed(2);
        assert_relative_eq!(von_neumann_entropy(&mixed), 1.0, epsilon = 1e-12);
        // binary entropy closed form
        let h = |p: f64| -p * p.log2() - (1.0 - p) * (1.0 - p).log2();
        let rho = DensityOperator::new(diag(&[0.75, 0.25])).unwrap();
        assert_relative_eq!(von_neumann_entropy(&rho), h(0.25), epsilon = 1e-12);
    }

    #[test]
    fn permute_and_apply_subsystems() {
        // |01> under swap becomes |10>
        let mut v = CVector::zeros(4);
        v[1] = cplx(1.0);
        let w = permute_subsystems_vec(&v, &[2, 2], &[1, 0]);
        assert_eq!(w[2], cplx(1.0));

        // applying X to factor 1 of |00> gives |01>
        let mut v = CVector::zeros(4);
        v[0] = cplx(1.0);
        let x = mat(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let w = apply_to_subsystems(&v, &[2, 2], &[1], &x);
        assert_eq!(w[1], cplx(1.0));

        // applying CNOT (targets in order [0, 1]) to |10> gives |11>
        let mut v = CVector::zeros(4);
        v[2] = cplx(1.0);
        let cnot = mat(
            4,
            4,
            &[
                1.0, 0.0, 0.0, 0.0, //
                0.0, 1.0, 0.0, 0.0, //
                0.0, 0.0, 0.0, 1.0, //
                0.0, 0.0, 1.0, 0.0,
            ],
        );
        let w = apply_to_subsystems(&v, &[2, 2], &[0, 1], &cnot);
        assert_eq!(w[3], cplx(1.0));
        // same op with reversed target order flips control and target
        let w = apply_to_subsystems(&v, &[2, 2], &[1, 0], &cnot);
        assert_eq!(w[2], cplx(1.0));
    }

    #[test]
    fn permute_mat_roundtrip() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let rho = random_density_operator(12, &mut rng).into_matrix();
        let perm = [2usize, 0, 1];
        let dims = [2usize, 3, 2];
        let p = permute_subsystems_mat(&rho, &dims, &perm);
        // applying the inverse permutation restores the original
        let mut inv = [0usize; 3];
        for (k, &q) in perm.iter().enumerate() {
            inv[q] = k;
        }
        let new_dims: Vec<usize> = perm.iter().map(|&q| dims[q]).collect();
        let back = permute_subsystems_mat(&p, &new_dims, &inv);
        assert_relative_eq!((back - rho).norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn isometry_validation() {
        let mut v = CMatrix::zeros(4, 2);
        v[(0, 0)] = cplx(1.0);
        v[(3, 1)] = cplx(1.0);
        assert!(IsometryMatrix::new(v).is_ok());
        let bad = CMatrix::from_fn(4, 2, |_, _| cplx(0.5));
        assert!(IsometryMatrix::new(bad).is_err());
    }

    #[test]
    fn density_operator_validation() {
        assert!(DensityOperator::new(diag(&[0.5, 0.5])).is_ok());
        assert!(DensityOperator::new(diag(&[0.7, 0.7])).is_err());
        assert!(DensityOperator::new(diag(&[1.2, -0.2])).is_err());
        let mut m = diag(&[0.5, 0.5]);
        m[(0, 1)] = cplx(0.3); // not Hermitian
        assert!(DensityOperator::new(m).is_err());
    }
}
