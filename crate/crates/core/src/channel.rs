//! Quantum channels as Kraus families with Stinespring isometric extensions.
//!
//! The extension output is ordered `B (x) E` with the environment as the
//! rightmost factor, and `V = sum_k K_k (x) |k>_E`. Built-in channels carry an
//! analytically-known degradability flag; anything user-supplied is `Unknown`.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    cplx, haar_random_isometry, hermitize, partial_trace, CMatrix, DensityOperator,
    IsometryMatrix, TOL_DERIVED,
};

/// What is known analytically about a channel's degradability. This is
/// declared, never solved for; it only selects which verification checks run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Degradability {
    KnownDegradable,
    KnownNotDegradable,
    Unknown,
}

/// A completely positive trace-preserving map with its isometric extension.
#[derive(Clone, Debug)]
pub struct QuantumChannel {
    in_dim: usize,
    out_dim: usize,
    env_dim: usize,
    kraus: Vec<CMatrix>,
    extension: IsometryMatrix,
    degradable: Degradability,
}

/// Declarative channel description: a recognized name with parameters, or an
/// explicit Kraus family. This is the JSON schema the CLI consumes:
/// `{"name": "...", "params": {...}}` or
/// `{"kraus": [[[re,im], ...], ...], "in_dim": n, "out_dim": m}` with each
/// Kraus operator given as `out_dim * in_dim` row-major `[re, im]` pairs.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum ChannelSpec {
    Builtin {
        name: String,
        #[serde(default)]
        params: BTreeMap<String, f64>,
    },
    Kraus {
        in_dim: usize,
        out_dim: usize,
        kraus: Vec<Vec<[f64; 2]>>,
    },
}

impl ChannelSpec {
    pub fn builtin(name: &str, params: &[(&str, f64)]) -> Self {
        ChannelSpec::Builtin {
            name: name.to_string(),
            params: params.iter().map(|&(k, v)| (k.to_string(), v)).collect(),
        }
    }

    /// Parses the JSON schema above, reporting line/column on syntax errors.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| {
            Error::Validation(format!(
                "malformed channel spec JSON at line {}, column {}: {}",
                e.line(),
                e.column(),
                e
            ))
        })?;
        let obj = value
            .as_object()
            .ok_or_else(|| Error::Validation("channel spec must be a JSON object".into()))?;
        if obj.contains_key("kraus") {
            serde_json::from_value::<ChannelSpec>(value.clone())
                .map_err(|e| Error::Validation(format!("bad explicit-Kraus channel spec: {e}")))
        } else if obj.contains_key("name") {
            serde_json::from_value::<ChannelSpec>(value.clone())
                .map_err(|e| Error::Validation(format!("bad named channel spec: {e}")))
        } else {
            Err(Error::Validation(
                "channel spec needs either a \"name\" or a \"kraus\" field".into(),
            ))
        }
    }
}

fn get_param(params: &BTreeMap<String, f64>, key: &str) -> Result<f64> {
    params
        .get(key)
        .copied()
        .ok_or_else(|| Error::Argument(format!("missing channel parameter \"{key}\"")))
}

fn get_probability(params: &BTreeMap<String, f64>, key: &str) -> Result<f64> {
    let v = get_param(params, key)?;
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::Argument(format!(
            "parameter \"{key}\" = {v} is outside [0, 1]"
        )));
    }
    Ok(v)
}

fn get_dimension(params: &BTreeMap<String, f64>, key: &str, default: Option<usize>) -> Result<usize> {
    match params.get(key) {
        None => default.ok_or_else(|| Error::Argument(format!("missing channel parameter \"{key}\""))),
        Some(&v) => {
            if v.fract() != 0.0 || v < 1.0 {
                return Err(Error::Argument(format!(
                    "parameter \"{key}\" = {v} must be a positive integer"
                )));
            }
            Ok(v as usize)
        }
    }
}

/// Builds the canonical Stinespring extension `V = sum_k K_k (x) |k>_E` after
/// checking the completeness relation to 1e-8.
pub fn stinespring(kraus: &[CMatrix]) -> Result<IsometryMatrix> {
    if kraus.is_empty() {
        return Err(Error::Argument("empty Kraus family".into()));
    }
    let out_dim = kraus[0].nrows();
    let in_dim = kraus[0].ncols();
    if kraus.iter().any(|k| k.nrows() != out_dim || k.ncols() != in_dim) {
        return Err(Error::Argument("Kraus operators have mixed shapes".into()));
    }
    let mut gram = CMatrix::zeros(in_dim, in_dim);
    for k in kraus {
        gram += k.adjoint() * k;
    }
    let defect = (&gram - CMatrix::identity(in_dim, in_dim)).norm();
    if defect > TOL_DERIVED {
        return Err(Error::Validation(format!(
            "Kraus completeness relation fails: ||sum K†K - I|| = {defect:.3e}"
        )));
    }
    let env_dim = kraus.len();
    let mut v = CMatrix::zeros(out_dim * env_dim, in_dim);
    for (e, k) in kraus.iter().enumerate() {
        for b in 0..out_dim {
            for a in 0..in_dim {
                v[(b * env_dim + e, a)] = k[(b, a)];
            }
        }
    }
    IsometryMatrix::new(v)
}

impl QuantumChannel {
    /// Builds a channel from an explicit Kraus family. Degradability is
    /// `Unknown`: it is declared for built-ins only, never solved for.
    pub fn from_kraus(kraus: Vec<CMatrix>) -> Result<Self> {
        Self::from_kraus_flagged(kraus, Degradability::Unknown)
    }

    fn from_kraus_flagged(kraus: Vec<CMatrix>, degradable: Degradability) -> Result<Self> {
        let extension = stinespring(&kraus)?;
        let out_dim = kraus[0].nrows();
        let in_dim = kraus[0].ncols();
        Ok(Self {
            in_dim,
            out_dim,
            env_dim: kraus.len(),
            kraus,
            extension,
            degradable,
        })
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_kraus_flagged(
            vec![CMatrix::identity(dim, dim)],
            Degradability::KnownDegradable,
        )
        .expect("identity Kraus set is complete")
    }

    pub fn amplitude_damping(gamma: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&gamma) {
            return Err(Error::Argument(format!("gamma = {gamma} outside [0, 1]")));
        }
        let mut k0 = CMatrix::zeros(2, 2);
        k0[(0, 0)] = cplx(1.0);
        k0[(1, 1)] = cplx((1.0 - gamma).sqrt());
        let mut k1 = CMatrix::zeros(2, 2);
        k1[(0, 1)] = cplx(gamma.sqrt());
        let flag = if gamma <= 0.5 {
            Degradability::KnownDegradable
        } else {
            Degradability::Unknown
        };
        Self::from_kraus_flagged(vec![k0, k1], flag)
    }

    /// `rho -> (1-p) rho + p Z rho Z`; full dephasing sits at p = 1/2.
    pub fn dephasing(p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Argument(format!("p = {p} outside [0, 1]")));
        }
        let k0 = CMatrix::identity(2, 2) * cplx((1.0 - p).sqrt());
        let mut k1 = CMatrix::zeros(2, 2);
        k1[(0, 0)] = cplx(p.sqrt());
        k1[(1, 1)] = cplx(-p.sqrt());
        Self::from_kraus_flagged(vec![k0, k1], Degradability::KnownDegradable)
    }

    /// `rho -> (1-p) rho + p I/2`.
    pub fn depolarizing(p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Argument(format!("p = {p} outside [0, 1]")));
        }
        let id = CMatrix::identity(2, 2) * cplx((1.0 - 0.75 * p).sqrt());
        let w = cplx((p / 4.0).sqrt());
        let mut x = CMatrix::zeros(2, 2);
        x[(0, 1)] = w;
        x[(1, 0)] = w;
        let mut y = CMatrix::zeros(2, 2);
        y[(0, 1)] = Complex64::new(0.0, -1.0) * w;
        y[(1, 0)] = Complex64::new(0.0, 1.0) * w;
        let mut z = CMatrix::zeros(2, 2);
        z[(0, 0)] = w;
        z[(1, 1)] = -w;
        Self::from_kraus_flagged(vec![id, x, y, z], Degradability::Unknown)
    }

    /// Erasure channel on a `dim`-dimensional input: with probability `1-p`
    /// the input passes through, otherwise the flag symbol (the last basis
    /// vector of the enlarged output) is emitted.
    pub fn erasure(dim: usize, p: f64) -> Result<Self> {
        if dim < 2 {
            return Err(Error::Argument(format!("erasure dimension {dim} < 2")));
        }
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Argument(format!("p = {p} outside [0, 1]")));
        }
        let out = dim + 1;
        let mut keep = CMatrix::zeros(out, dim);
        for i in 0..dim {
            keep[(i, i)] = cplx((1.0 - p).sqrt());
        }
        let mut kraus = vec![keep];
        for i in 0..dim {
            let mut k = CMatrix::zeros(out, dim);
            k[(dim, i)] = cplx(p.sqrt());
            kraus.push(k);
        }
        let flag = if p <= 0.5 {
            Degradability::KnownDegradable
        } else {
            Degradability::Unknown
        };
        Self::from_kraus_flagged(kraus, flag)
    }

    pub fn qubit_erasure(p: f64) -> Result<Self> {
        Self::erasure(2, p)
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn env_dim(&self) -> usize {
        self.env_dim
    }

    pub fn kraus(&self) -> &[CMatrix] {
        &self.kraus
    }

    pub fn extension(&self) -> &IsometryMatrix {
        &self.extension
    }

    pub fn degradable(&self) -> Degradability {
        self.degradable
    }

    /// Channel action `rho -> sum_k K rho K†`.
    pub fn apply(&self, rho: &DensityOperator) -> Result<DensityOperator> {
        if rho.dim() != self.in_dim {
            return Err(Error::Argument(format!(
                "input dimension {} does not match channel input {}",
                rho.dim(),
                self.in_dim
            )));
        }
        let mut out = CMatrix::zeros(self.out_dim, self.out_dim);
        for k in &self.kraus {
            out += k * rho.matrix() * k.adjoint();
        }
        Ok(DensityOperator::from_valid(hermitize(&out)))
    }

    /// Complementary channel action `rho -> Tr_B(V rho V†)`.
    pub fn complementary(&self, rho: &DensityOperator) -> Result<DensityOperator> {
        if rho.dim() != self.in_dim {
            return Err(Error::Argument(format!(
                "input dimension {} does not match channel input {}",
                rho.dim(),
                self.in_dim
            )));
        }
        let v = self.extension.matrix();
        let lifted = v * rho.matrix() * v.adjoint();
        let env = partial_trace(&lifted, &[self.out_dim, self.env_dim], &[1])?;
        Ok(DensityOperator::from_valid(hermitize(&env)))
    }

    /// `|phi_z> = V|z>` — the joint output/environment purification of a
    /// basis input, as a vector on `B (x) E`.
    pub fn basis_purification(&self, z: usize) -> crate::linalg::CVector {
        self.extension.matrix().column(z).into_owned()
    }
}

/// Instantiates a channel from a declarative spec.
pub fn make_builtin(spec: &ChannelSpec) -> Result<QuantumChannel> {
    match spec {
        ChannelSpec::Builtin { name, params } => match name.as_str() {
            "identity" => Ok(QuantumChannel::identity(get_dimension(params, "d", Some(2))?)),
            "amplitude_damping" => QuantumChannel::amplitude_damping(get_probability(params, "gamma")?),
            "dephasing" => QuantumChannel::dephasing(get_probability(params, "p")?),
            "depolarizing" => QuantumChannel::depolarizing(get_probability(params, "p")?),
            "qubit_erasure" => QuantumChannel::qubit_erasure(get_probability(params, "p")?),
            "erasure" => QuantumChannel::erasure(
                get_dimension(params, "d", None)?,
                get_probability(params, "p")?,
            ),
            other => Err(Error::Argument(format!("unknown channel name \"{other}\""))),
        },
        ChannelSpec::Kraus {
            in_dim,
            out_dim,
            kraus,
        } => {
            let mut ops = Vec::with_capacity(kraus.len());
            for (idx, flat) in kraus.iter().enumerate() {
                if flat.len() != in_dim * out_dim {
                    return Err(Error::Validation(format!(
                        "Kraus operator {idx} has {} entries, expected {} ({}x{} row-major)",
                        flat.len(),
                        in_dim * out_dim,
                        out_dim,
                        in_dim
                    )));
                }
                ops.push(CMatrix::from_fn(*out_dim, *in_dim, |i, j| {
                    let [re, im] = flat[i * in_dim + j];
                    Complex64::new(re, im)
                }));
            }
            QuantumChannel::from_kraus(ops)
        }
    }
}

/// Haar-random channel `in_dim -> d_b` with environment `d_e`, generated from
/// a Haar isometry (QR of a seeded Gaussian matrix).
pub fn haar_random_channel<R: Rng>(
    in_dim: usize,
    d_b: usize,
    d_e: usize,
    rng: &mut R,
) -> QuantumChannel {
    let v = haar_random_isometry(d_b * d_e, in_dim, rng);
    let mut kraus = Vec::with_capacity(d_e);
    for e in 0..d_e {
        kraus.push(CMatrix::from_fn(d_b, in_dim, |b, a| {
            v.matrix()[(b * d_e + e, a)]
        }));
    }
    QuantumChannel::from_kraus(kraus).expect("Kraus family from an isometry is complete")
}
