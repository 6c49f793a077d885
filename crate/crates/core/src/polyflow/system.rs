use serde::{Deserialize, Serialize};

use super::integrate::{integrate, IntegratorOptions, Trajectory, VectorField};
use super::tensor::SparseTensor;
use crate::error::{Error, Result};
use crate::linalg::{log_norm, spectral_norm, vec_norm, CMat, C64, ZERO};

/// Largest tensor-power length `kron_power` will allocate.
pub const KRON_LIMIT: u128 = 100_000_000;

/// Polynomial vector field `ẋ = Σ_k F_k x^{⊗k}`.
///
/// `tensors[k]` has degree `k`; missing degrees are stored as empty tensors.
#[derive(Debug, Clone, PartialEq)]
pub struct PolySystem {
    dim: usize,
    tensors: Vec<SparseTensor>,
}

impl PolySystem {
    pub fn new(dim: usize) -> Self {
        Self { dim, tensors: vec![SparseTensor::new(dim, 0)] }
    }

    /// Builds a system from tensors of any degrees; equal degrees are summed.
    pub fn from_tensors(dim: usize, tensors: impl IntoIterator<Item = SparseTensor>) -> Result<Self> {
        let mut sys = Self::new(dim);
        for t in tensors {
            sys.add_tensor(&t)?;
        }
        Ok(sys)
    }

    pub fn add_tensor(&mut self, t: &SparseTensor) -> Result<()> {
        if t.dim() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: t.dim() });
        }
        let k = t.degree();
        while self.tensors.len() <= k {
            let deg = self.tensors.len();
            self.tensors.push(SparseTensor::new(self.dim, deg));
        }
        for (i, cols, v) in t.iter() {
            self.tensors[k].insert(i, cols, v)?;
        }
        self.trim();
        Ok(())
    }

    fn trim(&mut self) {
        while self.tensors.len() > 1 && self.tensors.last().is_some_and(SparseTensor::is_zero) {
            self.tensors.pop();
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Highest degree with a nonzero tensor (0 for the empty system).
    pub fn max_degree(&self) -> usize {
        self.tensors.len() - 1
    }

    /// Tensor of degree `k`, or `None` when that degree is absent.
    pub fn tensor(&self, k: usize) -> Option<&SparseTensor> {
        self.tensors.get(k).filter(|t| !t.is_zero())
    }

    pub fn tensors(&self) -> &[SparseTensor] {
        &self.tensors
    }

    pub fn constant_term(&self) -> Vec<C64> {
        let mut f0 = vec![ZERO; self.dim];
        for (i, _, v) in self.tensors[0].iter() {
            f0[i] += v;
        }
        f0
    }

    /// Linear part as a dense `d × d` matrix.
    pub fn linear_part(&self) -> CMat {
        match self.tensors.get(1) {
            Some(t) => t.flatten(),
            None => CMat::zeros(self.dim, self.dim),
        }
    }

    pub fn eval_rhs(&self, x: &[C64]) -> Result<Vec<C64>> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: x.len() });
        }
        let mut out = vec![ZERO; self.dim];
        self.eval_into(x, &mut out);
        Ok(out)
    }

    fn eval_into(&self, x: &[C64], out: &mut [C64]) {
        out.iter_mut().for_each(|o| *o = ZERO);
        for t in &self.tensors {
            for (i, cols, v) in t.iter() {
                out[i] += cols.iter().fold(v, |acc, &j| acc * x[j]);
            }
        }
    }

    /// Integrates from `x0` and samples at `times` (first entry is the start time).
    pub fn integrate_reference(&self, x0: &[C64], times: &[f64], tol: f64) -> Result<Trajectory> {
        integrate(self, x0, times, &IntegratorOptions::with_tol(tol))
    }

    pub fn to_json(&self) -> serde_json::Value {
        let desc = SystemDescriptor {
            dim: self.dim,
            tensors: self
                .tensors
                .iter()
                .filter(|t| !t.is_zero())
                .map(|t| TensorDescriptor {
                    degree: t.degree(),
                    entries: t.iter().map(|(i, c, v)| (i, c.to_vec(), v.re, v.im)).collect(),
                })
                .collect(),
        };
        serde_json::to_value(desc).expect("descriptor serializes")
    }

    pub fn from_json(value: &serde_json::Value) -> Result<Self> {
        let desc: SystemDescriptor = serde_json::from_value(value.clone())
            .map_err(|e| Error::InvalidParameter(format!("system descriptor: {e}")))?;
        if desc.dim == 0 {
            return Err(Error::InvalidParameter("dim must be positive".into()));
        }
        let mut sys = Self::new(desc.dim);
        for td in desc.tensors {
            let t = SparseTensor::from_entries(
                desc.dim,
                td.degree,
                td.entries.into_iter().map(|(i, c, re, im)| (i, c, C64::new(re, im))),
            )?;
            sys.add_tensor(&t)?;
        }
        Ok(sys)
    }
}

impl VectorField for PolySystem {
    fn dim(&self) -> usize {
        self.dim
    }
    fn eval(&self, x: &[C64], out: &mut [C64]) {
        self.eval_into(x, out)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SystemDescriptor {
    dim: usize,
    tensors: Vec<TensorDescriptor>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TensorDescriptor {
    degree: usize,
    entries: Vec<(usize, Vec<usize>, f64, f64)>,
}

/// `v^{⊗k}` with `j₁` the most significant index.
pub fn kron_power(v: &[C64], k: usize) -> Result<Vec<C64>> {
    if k == 0 {
        return Err(Error::InvalidParameter("tensor power must be at least 1".into()));
    }
    let len = (v.len() as u128).checked_pow(k as u32).unwrap_or(u128::MAX);
    if len > KRON_LIMIT {
        return Err(Error::Overflow { what: "tensor power", size: len, limit: KRON_LIMIT });
    }
    let mut out = v.to_vec();
    for _ in 1..k {
        out = out.iter().flat_map(|&a| v.iter().map(move |&b| a * b)).collect();
    }
    Ok(out)
}

/// `(‖F₂‖‖z₀‖ + ‖F₀‖/‖z₀‖) / |μ(F₁)|` with spectral tensor norms.
pub fn quadratic_r_number(f0: &[C64], f1: &CMat, f2: &SparseTensor, z0: &[C64]) -> Result<f64> {
    let d = f1.nrows();
    if f0.len() != d || z0.len() != d || f2.dim() != d {
        let got = [f0.len(), z0.len(), f2.dim()].into_iter().find(|&n| n != d).unwrap_or(d);
        return Err(Error::DimensionMismatch { expected: d, got });
    }
    if f2.degree() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, got: f2.degree() });
    }
    let mu = log_norm(f1)?;
    if mu >= 0.0 {
        return Err(Error::NonDissipative(mu));
    }
    let z = vec_norm(z0);
    if z == 0.0 {
        return Err(Error::ZeroInitialState);
    }
    let f2n = if f2.is_zero() { 0.0 } else { spectral_norm(&f2.flatten()) };
    Ok((f2n * z + vec_norm(f0) / z) / mu.abs())
}
