//! Truncated Carleman lifting of a polynomial system without constant term.
//!
//! The lifted generator is block upper-triangular: block row `k` (acting on
//! `x^{⊗k}`) receives `Σ_pos I^{⊗pos} ⊗ F_n ⊗ I^{⊗(k−pos−1)}` applied to
//! block `k + n − 1`. [`CarlemanOperator::apply`] evaluates this with strided
//! loops over the sparse entries of each `F_n`.

use crate::error::{Error, Result};
use crate::linalg::{kron, vec_norm, CMat, C64, ONE, ZERO};
use crate::polyflow::{
    integrate, integrate_observed, kron_power, IntegratorOptions, PolySystem, Trajectory,
    TrajectoryStatus, VectorField, KRON_LIMIT,
};

/// `Σ_{k=1}^{order} d^k`, guarded against exceeding 10⁸.
pub fn carleman_dimension(d: usize, order: usize) -> Result<usize> {
    if d == 0 || order == 0 {
        return Err(Error::InvalidParameter("dimension and order must be positive".into()));
    }
    let mut total: u128 = 0;
    let mut block: u128 = 1;
    for _ in 0..order {
        block = block.saturating_mul(d as u128);
        total = total.saturating_add(block);
        if total > KRON_LIMIT {
            return Err(Error::Overflow { what: "Carleman dimension", size: total, limit: KRON_LIMIT });
        }
    }
    Ok(total as usize)
}

#[derive(Debug, Clone)]
struct FlatEntry {
    row: usize,
    col: usize,
    value: C64,
}

#[derive(Debug, Clone)]
pub struct CarlemanOperator {
    dim: usize,
    order: usize,
    /// `terms[n - 1]` holds the entries of `F_n` with flattened column index.
    terms: Vec<Vec<FlatEntry>>,
    offsets: Vec<usize>,
    total: usize,
}

impl CarlemanOperator {
    /// Lifts `sys` to truncation order `order`. Degrees above `order` are ignored.
    pub fn new(sys: &PolySystem, order: usize) -> Result<Self> {
        if sys.constant_term().iter().any(|z| *z != ZERO) {
            return Err(Error::NonzeroConstantTerm);
        }
        let d = sys.dim();
        let total = carleman_dimension(d, order)?;
        let mut offsets = Vec::with_capacity(order + 1);
        let mut off = 0;
        for k in 1..=order {
            offsets.push(off);
            off += d.pow(k as u32);
        }
        offsets.push(off);
        let max_n = sys.max_degree().min(order);
        let terms = (1..=max_n)
            .map(|n| match sys.tensor(n) {
                Some(t) => t
                    .iter()
                    .map(|(row, cols, value)| FlatEntry { row, col: t.flat_col(cols), value })
                    .collect(),
                None => Vec::new(),
            })
            .collect();
        Ok(Self { dim: d, order, terms, offsets, total })
    }

    pub fn base_dim(&self) -> usize {
        self.dim
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn total_dim(&self) -> usize {
        self.total
    }

    /// Start index of block `k` (1-based), plus one trailing entry equal to the total.
    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    /// Number of stored coefficients, which is the total tensor nonzero count.
    pub fn stored_entries(&self) -> usize {
        self.terms.iter().map(Vec::len).sum()
    }

    fn block_range(&self, k: usize) -> std::ops::Range<usize> {
        self.offsets[k - 1]..self.offsets[k]
    }

    /// `out = C g` without forming any block of `C`.
    pub fn apply_into(&self, g: &[C64], out: &mut [C64]) {
        out.iter_mut().for_each(|z| *z = ZERO);
        let d = self.dim;
        for k in 1..=self.order {
            let out_blk = &mut out[self.block_range(k)];
            for (idx, entries) in self.terms.iter().enumerate() {
                let n = idx + 1;
                let m = k + n - 1;
                if m > self.order || entries.is_empty() {
                    continue;
                }
                let in_blk = &g[self.offsets[m - 1]..self.offsets[m]];
                let dn = d.pow(n as u32);
                for pos in 0..k {
                    // out index (a, i, b), in index (a, J, b); |a| = pos, |b| = k − pos − 1
                    let inner = d.pow((k - pos - 1) as u32);
                    let outer = d.pow(pos as u32);
                    let out_stride = d * inner;
                    let in_stride = dn * inner;
                    for e in entries {
                        for a in 0..outer {
                            let o = a * out_stride + e.row * inner;
                            let i = a * in_stride + e.col * inner;
                            let dst = &mut out_blk[o..o + inner];
                            let src = &in_blk[i..i + inner];
                            for (y, x) in dst.iter_mut().zip(src) {
                                *y += e.value * *x;
                            }
                        }
                    }
                }
            }
        }
    }

    pub fn apply(&self, g: &LiftedState) -> Result<LiftedState> {
        if g.dim != self.dim || g.order != self.order {
            return Err(Error::DimensionMismatch { expected: self.total, got: g.data.len() });
        }
        let mut out = vec![ZERO; self.total];
        self.apply_into(&g.data, &mut out);
        Ok(LiftedState { dim: self.dim, order: self.order, data: out })
    }

    /// Dense `D × D` matrix assembled from explicit Kronecker products.
    /// Intended as a cross-check on small instances.
    pub fn to_dense(&self) -> Result<CMat> {
        if self.total > 4096 {
            return Err(Error::Overflow { what: "dense Carleman matrix", size: (self.total as u128).pow(2), limit: 4096 * 4096 });
        }
        let d = self.dim;
        let eye = CMat::identity(d, d);
        let mut c = CMat::zeros(self.total, self.total);
        for (idx, entries) in self.terms.iter().enumerate() {
            let n = idx + 1;
            let mut f = CMat::zeros(d, d.pow(n as u32));
            for e in entries {
                f[(e.row, e.col)] += e.value;
            }
            for k in 1..=self.order {
                let m = k + n - 1;
                if m > self.order {
                    break;
                }
                let mut blk = CMat::zeros(d.pow(k as u32), d.pow(m as u32));
                for pos in 0..k {
                    let mut term = CMat::from_element(1, 1, ONE);
                    for _ in 0..pos {
                        term = kron(&term, &eye);
                    }
                    term = kron(&term, &f);
                    for _ in pos + 1..k {
                        term = kron(&term, &eye);
                    }
                    blk += term;
                }
                let mut view = c.view_mut((self.offsets[k - 1], self.offsets[m - 1]), blk.shape());
                view += &blk;
            }
        }
        Ok(c)
    }

    /// Integrates `ġ = C g` and samples at `times`.
    pub fn evolve(&self, g0: &LiftedState, times: &[f64], tol: f64) -> Result<Trajectory> {
        self.check(g0)?;
        integrate(self, &g0.data, times, &IntegratorOptions::with_tol(tol))
    }

    /// Same as [`evolve`](Self::evolve) but keeps only block 1 of each sample.
    pub fn evolve_first_block(&self, g0: &LiftedState, times: &[f64], tol: f64) -> Result<Trajectory> {
        self.check(g0)?;
        let d = self.dim;
        integrate_observed(self, &g0.data, times, &IntegratorOptions::with_tol(tol), |x| {
            x[..d].to_vec()
        })
    }

    fn check(&self, g: &LiftedState) -> Result<()> {
        if g.dim != self.dim || g.order != self.order {
            return Err(Error::DimensionMismatch { expected: self.total, got: g.data.len() });
        }
        Ok(())
    }
}

impl VectorField for CarlemanOperator {
    fn dim(&self) -> usize {
        self.total_dim()
    }
    fn eval(&self, x: &[C64], out: &mut [C64]) {
        self.apply_into(x, out)
    }
}

pub fn build_carleman(sys: &PolySystem, order: usize) -> Result<CarlemanOperator> {
    CarlemanOperator::new(sys, order)
}

/// Lifted vector `[g^(1), …, g^(N)]` with `g^(k)` of length `d^k`.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftedState {
    dim: usize,
    order: usize,
    data: Vec<C64>,
}

impl LiftedState {
    pub fn from_data(dim: usize, order: usize, data: Vec<C64>) -> Result<Self> {
        let total = carleman_dimension(dim, order)?;
        if data.len() != total {
            return Err(Error::DimensionMismatch { expected: total, got: data.len() });
        }
        Ok(Self { dim, order, data })
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Block `k` (1-based).
    pub fn block(&self, k: usize) -> &[C64] {
        assert!(k >= 1 && k <= self.order, "block index {k} outside 1..={}", self.order);
        let start: usize = (1..k).map(|j| self.dim.pow(j as u32)).sum();
        &self.data[start..start + self.dim.pow(k as u32)]
    }
}

/// `[z0, z0^{⊗2}, …, z0^{⊗order}]`.
pub fn initial_lift(z0: &[C64], order: usize) -> Result<LiftedState> {
    let d = z0.len();
    carleman_dimension(d, order)?;
    let mut data = Vec::new();
    for k in 1..=order {
        data.extend(kron_power(z0, k)?);
    }
    Ok(LiftedState { dim: d, order, data })
}

/// Per-sample distance `‖reference(t_s) − back_map(g^(1)(t_s))‖₂` and its maximum.
///
/// `lifted` may hold full lifted states or only block 1; the first `d`
/// components are used. A diverged lifted trajectory reports `+∞` as maximum.
pub fn truncation_error<B>(reference: &Trajectory, lifted: &Trajectory, back_map: B) -> Result<(Vec<f64>, f64)>
where
    B: Fn(&[C64]) -> Vec<C64>,
{
    let n = lifted.times.len();
    if n > reference.times.len() || reference.times[..n] != lifted.times[..] {
        return Err(Error::TimeGridMismatch(format!(
            "reference has {} samples, lifted has {}",
            reference.times.len(),
            n
        )));
    }
    let d = reference.states.first().map_or(0, Vec::len);
    let mut profile = Vec::with_capacity(n);
    for (r, g) in reference.states.iter().zip(&lifted.states) {
        if g.len() < d {
            return Err(Error::DimensionMismatch { expected: d, got: g.len() });
        }
        let approx = back_map(&g[..d]);
        let diff: Vec<C64> = r.iter().zip(&approx).map(|(a, b)| a - b).collect();
        profile.push(vec_norm(&diff));
    }
    let diverged = matches!(lifted.status, TrajectoryStatus::Diverged { .. })
        || reference.is_diverged()
        || n < reference.times.len();
    let max = if diverged {
        f64::INFINITY
    } else {
        profile.iter().cloned().fold(0.0, f64::max)
    };
    Ok((profile, max))
}
