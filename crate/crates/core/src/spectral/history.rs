use super::modes::NormalKoopman;
use crate::error::{Error, Result};
use crate::linalg::{expm, log_norm, spectral_norm, CMat, CVec, C64};

/// Largest accepted `‖T_l(Ah)‖`.
pub const PROPAGATOR_GUARD: f64 = 1.5;

/// `T_l(Ah) = Σ_{r≤l} (Ah)^r / r!`.
pub fn taylor_propagator(a: &CMat, h: f64, order: usize) -> CMat {
    let n = a.nrows();
    let ah = a * C64::new(h, 0.0);
    let mut out = CMat::identity(n, n);
    let mut term = CMat::identity(n, n);
    for r in 1..=order {
        term = &term * &ah / C64::new(r as f64, 0.0);
        out += &term;
    }
    out
}

/// Block-bidiagonal embedding `C y = e₀ ⊗ x0` of `m` Taylor steps followed by
/// `p` padded copies of the final state.
#[derive(Debug, Clone)]
pub struct HistorySystem {
    pub steps: usize,
    pub padding: usize,
    pub order: usize,
    pub h: f64,
    pub a: CMat,
    pub propagator: CMat,
    pub c: CMat,
    pub b: CVec,
}

#[derive(Debug, Clone)]
pub struct HistorySolution {
    /// `y_s` for `s = 0..m+p`.
    pub blocks: Vec<CVec>,
    /// `max_s ‖y_s − T_l^{min(s,m)} x0‖`.
    pub taylor_residual: f64,
    /// `‖y_s − e^{A h min(s,m)} x0‖` per block.
    pub exact_residuals: Vec<f64>,
    /// `max_s ‖y_{s+1} − T_l y_s‖` (s < m) or `‖y_{s+1} − y_s‖` (s ≥ m).
    pub recurrence_residual: f64,
}

impl HistorySolution {
    /// `‖P y‖² / ‖y‖²` for the projector onto blocks `s ≥ m + d`.
    pub fn tail_probability(&self, start: usize) -> f64 {
        let norms: Vec<f64> = self.blocks.iter().map(|y| y.norm_squared()).collect();
        norms[start.min(norms.len())..].iter().sum::<f64>() / norms.iter().sum::<f64>()
    }
}

impl HistorySystem {
    pub fn new(a: &CMat, x0: &[C64], steps: usize, padding: usize, order: usize, h: f64) -> Result<Self> {
        let n = a.nrows();
        if !a.is_square() || x0.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: x0.len() });
        }
        if steps == 0 || padding == 0 || order == 0 {
            return Err(Error::InvalidParameter("steps, padding and Taylor order must be positive".into()));
        }
        if !(h > 0.0) {
            return Err(Error::InvalidParameter(format!("step must be positive, got {h}")));
        }
        let mu = log_norm(a)?;
        if mu > 1e-12 {
            return Err(Error::NonDissipative(mu));
        }
        let propagator = taylor_propagator(a, h, order);
        let pn = spectral_norm(&propagator);
        if pn > PROPAGATOR_GUARD {
            return Err(Error::UnstablePropagator(pn));
        }
        let blocks = steps + padding;
        let mut c = CMat::identity(blocks * n, blocks * n);
        let neg_id = -CMat::identity(n, n);
        for s in 0..blocks - 1 {
            let sub = if s < steps { -&propagator } else { neg_id.clone() };
            c.view_mut(((s + 1) * n, s * n), (n, n)).copy_from(&sub);
        }
        let mut b = CVec::zeros(blocks * n);
        b.rows_mut(0, n).copy_from_slice(x0);
        Ok(Self { steps, padding, order, h, a: a.clone(), propagator, c, b })
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    /// Dense LU solve with residuals against forward substitution and the
    /// exact exponential.
    pub fn solve(&self) -> Result<HistorySolution> {
        let n = self.dim();
        let y = self.c.clone().lu().solve(&self.b).ok_or_else(|| Error::Singular("history matrix".into()))?;
        let total = self.steps + self.padding;
        let blocks: Vec<CVec> = (0..total).map(|s| y.rows(s * n, n).into_owned()).collect();
        let x0 = self.b.rows(0, n).into_owned();
        let mut taylor = x0.clone();
        let mut taylor_residual = 0.0_f64;
        let mut exact_residuals = Vec::with_capacity(total);
        let mut recurrence_residual = 0.0_f64;
        for (s, ys) in blocks.iter().enumerate() {
            if s > 0 && s <= self.steps {
                taylor = &self.propagator * taylor;
            }
            let t = self.h * s.min(self.steps) as f64;
            let exact = expm(&(&self.a * C64::new(t, 0.0))) * &x0;
            taylor_residual = taylor_residual.max((ys - &taylor).norm());
            exact_residuals.push((ys - &exact).norm());
            if s + 1 < total {
                let next = if s < self.steps { &self.propagator * ys } else { ys.clone() };
                recurrence_residual = recurrence_residual.max((&blocks[s + 1] - next).norm());
            }
        }
        Ok(HistorySolution { blocks, taylor_residual, exact_residuals, recurrence_residual })
    }
}

/// Builds and solves the history system in one call.
pub fn history_system(
    a: &CMat,
    x0: &[C64],
    steps: usize,
    padding: usize,
    order: usize,
    h: f64,
) -> Result<(HistorySystem, HistorySolution)> {
    let sys = HistorySystem::new(a, x0, steps, padding, order, h)?;
    let sol = sys.solve()?;
    Ok((sys, sol))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FamilyMember {
    pub steps: usize,
    pub padding: usize,
    pub discard: usize,
}

/// Equal-size history systems reaching `T₁ + jΔt` for `j = 0..J`, with
/// `T₁ = ah` and `Δt = ch`.
#[derive(Debug, Clone, PartialEq)]
pub struct UniformFamily {
    pub a: usize,
    pub c: usize,
    pub members: Vec<FamilyMember>,
}

pub fn uniform_family(a: usize, c: usize, len: usize) -> Result<UniformFamily> {
    if a == 0 || c == 0 || len == 0 {
        return Err(Error::InvalidParameter("a, c and J must be positive".into()));
    }
    let size = 2 * (a + (len - 1) * c);
    let kept = a + (len - 1) * c;
    let members: Vec<FamilyMember> = (0..len)
        .map(|j| FamilyMember { steps: a + j * c, padding: a + (2 * len - 2 - j) * c, discard: (len - 1 - j) * c })
        .collect();
    for (j, m) in members.iter().enumerate() {
        if m.steps + m.padding != size || m.steps + m.discard != kept {
            return Err(Error::InvalidParameter(format!("family member {j} breaks the uniform size")));
        }
    }
    Ok(UniformFamily { a, c, members })
}

impl UniformFamily {
    /// Probability of landing in the retained blocks for each member,
    /// `(p_j − d_j)‖g(T_j)‖² / (Σ_{s<m_j} ‖g(sh)‖² + p_j ‖g(T_j)‖²)`, using the
    /// exact flow of `modes`.
    pub fn post_selection_probabilities(&self, modes: &NormalKoopman, h: f64) -> Vec<f64> {
        self.members
            .iter()
            .map(|m| {
                let end = modes.norm_sqr(m.steps as f64 * h);
                let history: f64 = (0..m.steps).map(|s| modes.norm_sqr(s as f64 * h)).sum();
                (m.padding - m.discard) as f64 * end / (history + m.padding as f64 * end)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::Mode;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn scalar_exponential() {
        let a = CMat::from_element(1, 1, c(-1.0));
        let (_, sol) = history_system(&a, &[c(1.0)], 4, 3, 20, 0.5).unwrap();
        assert!((sol.blocks[4][0].re - (-2.0f64).exp()).abs() < 1e-10);
        for s in 4..7 {
            assert_eq!(sol.blocks[s], sol.blocks[4]);
        }
        assert!(sol.recurrence_residual < 1e-14);
    }

    #[test]
    fn guards() {
        let a = CMat::from_element(1, 1, c(-1.0));
        assert!(matches!(HistorySystem::new(&a, &[c(1.0)], 2, 2, 1, 3.0), Err(Error::UnstablePropagator(_))));
        let grow = CMat::from_element(1, 1, c(0.5));
        assert!(matches!(HistorySystem::new(&grow, &[c(1.0)], 2, 2, 4, 0.1), Err(Error::NonDissipative(_))));
    }

    #[test]
    fn family_examples() {
        let f = uniform_family(3, 2, 5).unwrap();
        assert_eq!(f.members[0], FamilyMember { steps: 3, padding: 3 + 16, discard: 8 });
        for m in &f.members {
            assert_eq!(m.padding - m.discard, 3 + 4 * 2);
        }
        let k = NormalKoopman::new(vec![Mode::new(0.0, 1.0, c(0.6)), Mode::new(0.0, -0.5, c(0.8))]).unwrap();
        for p in f.post_selection_probabilities(&k, 0.1) {
            assert!((p - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn formula_matches_solved_history() {
        // scalar decay: the formula with exact norms against the solved blocks
        let mu = 0.3;
        let h = 0.05;
        let a = CMat::from_element(1, 1, c(-mu));
        let f = uniform_family(2, 1, 4).unwrap();
        let k = NormalKoopman::new(vec![Mode::new(mu, 0.0, c(1.0))]).unwrap();
        let probs = f.post_selection_probabilities(&k, h);
        for (m, p) in f.members.iter().zip(probs) {
            let (_, sol) = history_system(&a, &[c(1.0)], m.steps, m.padding, 16, h).unwrap();
            assert!((sol.tail_probability(m.steps + m.discard) - p).abs() < 1e-12);
        }
    }
}
