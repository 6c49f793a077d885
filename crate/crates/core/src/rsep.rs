//! A family of quadratic systems `ẋ = Fx + v − x(c†x + α)` whose R-number is
//! huge in the original coordinates but small after the projective change of
//! variables `η = Ax/(b†x + 1)`.

use std::io::Write;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{expm, max_abs, vec_norm, CMat, CVec, C64, ONE, ZERO};
use crate::polyflow::{
    fmt_f64, integrate, quadratic_r_number, uniform_grid, IntegratorOptions, SparseTensor,
    VectorField,
};

/// `|b†x + 1|` below this counts as hitting the pole of the transform.
pub const POLE_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct RsepParams {
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
    /// Diagonal entries `2..d−1` of `D`.
    pub middle: Vec<f64>,
    /// Unitary change of basis.
    pub a: CMat,
}

impl RsepParams {
    /// Identity `A` and middle eigenvalues at their upper limit `1 − 2β`.
    pub fn new(d: usize, beta: f64, gamma: f64, delta: f64) -> Result<Self> {
        if d < 3 {
            return Err(Error::InvalidParameter(format!("d must be at least 3, got {d}")));
        }
        let p = Self { beta, gamma, delta, middle: vec![1.0 - 2.0 * beta; d - 2], a: CMat::identity(d, d) };
        p.validate()?;
        Ok(p)
    }

    /// Same as [`new`](Self::new) with a Haar-random unitary `A`.
    pub fn with_random_unitary<R: Rng>(d: usize, beta: f64, gamma: f64, delta: f64, rng: &mut R) -> Result<Self> {
        let mut p = Self::new(d, beta, gamma, delta)?;
        p.a = haar_unitary(d, rng);
        p.validate()?;
        Ok(p)
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dim();
        if d < 3 || !self.a.is_square() {
            return Err(Error::InvalidParameter("A must be square with d >= 3".into()));
        }
        if self.middle.len() != d - 2 {
            return Err(Error::DimensionMismatch { expected: d - 2, got: self.middle.len() });
        }
        if !(self.beta > 1.0) {
            return Err(Error::InvalidParameter(format!("beta must exceed 1, got {}", self.beta)));
        }
        if !(self.gamma > self.beta) {
            return Err(Error::InvalidParameter(format!("gamma must exceed beta, got {}", self.gamma)));
        }
        if !(0.0..1.0).contains(&self.delta) {
            return Err(Error::InvalidParameter(format!("delta must lie in [0, 1), got {}", self.delta)));
        }
        if let Some(l) = self.middle.iter().find(|&&l| l > 1.0 - 2.0 * self.beta) {
            return Err(Error::InvalidParameter(format!("middle eigenvalue {l} exceeds 1 - 2 beta")));
        }
        let dev = max_abs(&(self.a.adjoint() * &self.a - CMat::identity(d, d)));
        if dev > 1e-12 {
            return Err(Error::InvalidParameter(format!("A is not unitary (deviation {dev:e})")));
        }
        Ok(())
    }

    fn diag(&self) -> Vec<f64> {
        let mut dd = vec![1.0 - self.delta];
        dd.extend_from_slice(&self.middle);
        dd.push(1.0 - self.gamma);
        dd
    }
}

/// Haar-random unitary from the QR factorization of a complex Ginibre matrix.
pub fn haar_unitary<R: Rng>(d: usize, rng: &mut R) -> CMat {
    let g = CMat::from_fn(d, d, |_, _| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)));
    let qr = g.qr();
    let (q, r) = (qr.q(), qr.r());
    let phases = CMat::from_diagonal(&r.diagonal().map(|z| if z.norm() > 0.0 { z / z.norm() } else { ONE }));
    q * phases
}

/// Coefficients `(F, v, c, α)` of `ẋ = Fx + v − x(c†x + α)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Riccati {
    pub f: CMat,
    pub v: CVec,
    pub c: CVec,
    pub alpha: C64,
}

impl Riccati {
    pub fn dim(&self) -> usize {
        self.v.len()
    }

    /// `[[F, v], [c†, α]]`.
    pub fn lifted(&self) -> CMat {
        let d = self.dim();
        let mut h = CMat::zeros(d + 1, d + 1);
        h.view_mut((0, 0), (d, d)).copy_from(&self.f);
        h.view_mut((0, d), (d, 1)).copy_from(&self.v);
        h.view_mut((d, 0), (1, d)).copy_from(&self.c.adjoint());
        h[(d, d)] = self.alpha;
        h
    }

    /// Quadratic coefficients `(F₀, F₁, F₂) = (v, F − αI, −I ⊗ c†)`.
    pub fn quadratic_form(&self) -> (Vec<C64>, CMat, SparseTensor) {
        let d = self.dim();
        let f1 = &self.f - CMat::identity(d, d) * self.alpha;
        let mut f2 = SparseTensor::new(d, 2);
        for i in 0..d {
            for k in 0..d {
                if self.c[k] != ZERO {
                    f2.insert(i, &[i, k], -self.c[k].conj()).expect("indices in range");
                }
            }
        }
        (self.v.iter().cloned().collect(), f1, f2)
    }

    pub fn r_number(&self, z0: &[C64]) -> Result<f64> {
        let (f0, f1, f2) = self.quadratic_form();
        quadratic_r_number(&f0, &f1, &f2, z0)
    }
}

impl VectorField for Riccati {
    fn dim(&self) -> usize {
        self.v.len()
    }

    fn eval(&self, x: &[C64], out: &mut [C64]) {
        let d = self.v.len();
        let cx: C64 = (0..d).map(|k| self.c[k].conj() * x[k]).sum::<C64>() + self.alpha;
        for i in 0..d {
            let fx: C64 = (0..d).map(|j| self.f[(i, j)] * x[j]).sum();
            out[i] = fx + self.v[i] - x[i] * cx;
        }
    }
}

#[derive(Debug, Clone)]
pub struct RsepSystems {
    pub x: Riccati,
    /// η-system from the general transform formulas.
    pub eta: Riccati,
    /// η-system from the closed forms `F̃ = D − βδ e_d e_d†`, `ṽ = δe_d`, `c̃ = δe₁`, `α̃ = 1 + βδ`.
    pub eta_closed: Riccati,
    pub b: CVec,
    pub a: CMat,
    pub p: CMat,
    pub p_inv: CMat,
}

fn unit(d: usize, k: usize) -> CVec {
    let mut e = CVec::zeros(d);
    e[k] = ONE;
    e
}

pub fn build_rsep(params: &RsepParams) -> Result<RsepSystems> {
    params.validate()?;
    let d = params.dim();
    let (beta, delta) = (C64::new(params.beta, 0.0), C64::new(params.delta, 0.0));
    let a = params.a.clone();
    let a_inv = a.adjoint();
    let dmat = CMat::from_diagonal(&CVec::from_iterator(d, params.diag().into_iter().map(|v| C64::new(v, 0.0))));
    let e1 = unit(d, 0);
    let ed = unit(d, d - 1);

    let b = &a_inv * &ed * beta;
    let f = &a_inv * &dmat * &a;
    let v = &a_inv * &ed * delta;
    let bt_vconj = (b.transpose() * v.conjugate())[(0, 0)];
    let c = -(f.adjoint() * &b) + &b * (bt_vconj + ONE) + &a_inv * &e1 * delta;
    let x = Riccati { f, v, c, alpha: ONE };

    let bd = b.adjoint();
    let bd_v = (&bd * &x.v)[(0, 0)];
    let f_t = &a * (&x.f - &x.v * &bd) * &a_inv;
    let v_t = &a * &x.v;
    let c_t_dag = (&bd * &x.f + x.c.adjoint() - &bd * (bd_v + x.alpha)) * &a_inv;
    let eta = Riccati { f: f_t, v: v_t, c: c_t_dag.adjoint(), alpha: bd_v + x.alpha };

    let eta_closed = Riccati {
        f: &dmat - &ed * ed.adjoint() * (beta * delta),
        v: &ed * delta,
        c: &e1 * delta,
        alpha: ONE + beta * delta,
    };

    let mut p = CMat::zeros(d + 1, d + 1);
    p.view_mut((0, 0), (d, d)).copy_from(&a);
    p.view_mut((d, 0), (1, d)).copy_from(&bd);
    p[(d, d)] = ONE;
    let mut p_inv = CMat::zeros(d + 1, d + 1);
    p_inv.view_mut((0, 0), (d, d)).copy_from(&a_inv);
    p_inv.view_mut((d, 0), (1, d)).copy_from(&(-(&bd * &a_inv)));
    p_inv[(d, d)] = ONE;

    Ok(RsepSystems { x, eta, eta_closed, b, a, p, p_inv })
}

impl RsepSystems {
    pub fn dim(&self) -> usize {
        self.x.dim()
    }

    /// `max |H_η − P H_x P⁻¹|` with `H_η` assembled from the transformed blocks.
    pub fn conjugation_residual(&self) -> f64 {
        let lhs = self.eta.lifted();
        let rhs = &self.p * self.x.lifted() * &self.p_inv;
        let d = self.dim() + 1;
        max_abs(&(lhs - rhs)).max(max_abs(&(&self.p * &self.p_inv - CMat::identity(d, d))))
    }

    /// Largest deviation between the general-formula and closed-form η systems.
    pub fn closed_form_residual(&self) -> f64 {
        let (g, c) = (&self.eta, &self.eta_closed);
        max_abs(&(&g.f - &c.f))
            .max((&g.v - &c.v).camax())
            .max((&g.c - &c.c).camax())
            .max((g.alpha - c.alpha).norm())
    }

    /// `x0 = A⁻¹e₁`, mapped to `η0 = e₁`.
    pub fn x0(&self) -> Vec<C64> {
        (self.a.adjoint() * unit(self.dim(), 0)).iter().cloned().collect()
    }

    pub fn eta0(&self) -> Vec<C64> {
        unit(self.dim(), 0).iter().cloned().collect()
    }

    /// `η = Ax/(b†x + 1)`.
    pub fn transform(&self, x: &[C64]) -> Result<Vec<C64>> {
        let xv = CVec::from_column_slice(x);
        let den = (self.b.adjoint() * &xv)[(0, 0)] + ONE;
        if den.norm() < POLE_EPS {
            return Err(Error::PoleEncountered { t: f64::NAN });
        }
        Ok((&self.a * xv / den).iter().cloned().collect())
    }
}

/// `(R_x, R_η)` at `x0 = A⁻¹e₁`, `η0 = e₁`.
pub fn rsep_r_numbers(sys: &RsepSystems) -> Result<(f64, f64)> {
    Ok((sys.x.r_number(&sys.x0())?, sys.eta.r_number(&sys.eta0())?))
}

/// Analytic lower bound `γβ/δ + β² + 1` on `R_x`.
pub fn r_x_lower_bound(p: &RsepParams) -> f64 {
    p.gamma * p.beta / p.delta + p.beta * p.beta + 1.0
}

/// `max_s ‖A x(t_s)/(b†x(t_s) + 1) − η(t_s)‖` over `samples + 1` points.
pub fn equivalence_residual(sys: &RsepSystems, t_end: f64, samples: usize) -> Result<f64> {
    let times = uniform_grid(t_end, samples);
    let opts = IntegratorOptions::with_tol(1e-12);
    let xs = integrate(&sys.x, &sys.x0(), &times, &opts)?;
    let es = integrate(&sys.eta, &sys.eta0(), &times, &opts)?;
    if xs.is_diverged() || es.is_diverged() {
        let t = match (xs.status, es.status) {
            (crate::polyflow::TrajectoryStatus::Diverged { t }, _) => t,
            (_, crate::polyflow::TrajectoryStatus::Diverged { t }) => t,
            _ => t_end,
        };
        return Err(Error::PoleEncountered { t });
    }
    let mut max: f64 = 0.0;
    for ((t, x), eta) in xs.times.iter().zip(&xs.states).zip(&es.states) {
        let mapped = sys.transform(x).map_err(|_| Error::PoleEncountered { t: *t })?;
        let diff: Vec<C64> = mapped.iter().zip(eta).map(|(a, b)| a - b).collect();
        max = max.max(vec_norm(&diff));
    }
    Ok(max)
}

/// Compares `x(t)` from the Riccati flow with `u/w` from `e^{H_x t}(x0, 1)`.
pub fn lifted_flow_residual(sys: &RsepSystems, t_end: f64, samples: usize) -> Result<f64> {
    let times = uniform_grid(t_end, samples);
    let xs = integrate(&sys.x, &sys.x0(), &times, &IntegratorOptions::with_tol(1e-12))?;
    let d = sys.dim();
    let hx = sys.x.lifted();
    let mut z0 = CVec::zeros(d + 1);
    z0.rows_mut(0, d).copy_from(&CVec::from_vec(sys.x0()));
    z0[d] = ONE;
    let mut max: f64 = 0.0;
    for (t, x) in xs.times.iter().zip(&xs.states) {
        let z = expm(&(&hx * C64::new(*t, 0.0))) * &z0;
        let diff: Vec<C64> = (0..d).map(|i| z[i] / z[d] - x[i]).collect();
        max = max.max(vec_norm(&diff));
    }
    Ok(max)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
    pub d: usize,
    pub r_x_lower_bound: f64,
    pub r_x: f64,
    pub r_eta: f64,
    pub equiv_residual: f64,
}

pub fn sweep_point(params: &RsepParams, t_end: f64, samples: usize) -> Result<SweepRow> {
    let sys = build_rsep(params)?;
    let (r_x, r_eta) = rsep_r_numbers(&sys)?;
    Ok(SweepRow {
        beta: params.beta,
        gamma: params.gamma,
        delta: params.delta,
        d: params.dim(),
        r_x_lower_bound: r_x_lower_bound(params),
        r_x,
        r_eta,
        equiv_residual: equivalence_residual(&sys, t_end, samples)?,
    })
}

pub fn write_sweep_csv<W: Write>(mut w: W, rows: &[SweepRow]) -> std::io::Result<()> {
    writeln!(w, "beta,gamma,delta,d,R_x_lower_bound,R_x,R_eta,equiv_residual")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            fmt_f64(r.beta),
            fmt_f64(r.gamma),
            fmt_f64(r.delta),
            r.d,
            fmt_f64(r.r_x_lower_bound),
            fmt_f64(r.r_x),
            fmt_f64(r.r_eta),
            fmt_f64(r.equiv_residual)
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::log_norm;

    #[test]
    fn unperturbed_eta_system_decouples() {
        let sys = build_rsep(&RsepParams::new(4, 3.0, 5.0, 0.0).unwrap()).unwrap();
        assert!(sys.eta.v.camax() < 1e-14);
        assert!(sys.eta.c.camax() < 1e-14);
        assert!((sys.eta.alpha - ONE).norm() < 1e-14);
        assert!(sys.closed_form_residual() < 1e-12);
    }

    #[test]
    fn identity_basis_formulas() {
        let sys = build_rsep(&RsepParams::new(3, 2.0, 3.0, 0.2).unwrap()).unwrap();
        assert_eq!(sys.b, unit(3, 2) * C64::new(2.0, 0.0));
        assert!(sys.conjugation_residual() < 1e-12);
        assert!(sys.closed_form_residual() < 1e-12);
    }

    #[test]
    fn r_numbers_at_beta_nine() {
        let sys = build_rsep(&RsepParams::new(4, 9.0, 12.0, 0.3).unwrap()).unwrap();
        let (r_x, r_eta) = rsep_r_numbers(&sys).unwrap();
        assert!((r_eta - 0.2).abs() < 1e-12);
        assert!(r_x >= 12.0 * 9.0 / 0.3 + 82.0);
    }

    #[test]
    fn log_norms() {
        let p = RsepParams::new(5, 4.0, 6.0, 0.25).unwrap();
        let sys = build_rsep(&p).unwrap();
        let (_, f1, _) = sys.x.quadratic_form();
        let (_, f1t, _) = sys.eta.quadratic_form();
        assert!((log_norm(&f1).unwrap() + 0.25).abs() < 1e-10);
        assert!((log_norm(&f1t).unwrap() + 5.0 * 0.25).abs() < 1e-10);
    }

    #[test]
    fn initial_condition_consistency() {
        let sys = build_rsep(&RsepParams::new(4, 10.0, 20.0, 0.1).unwrap()).unwrap();
        assert!(equivalence_residual(&sys, 0.0, 1).unwrap() <= 1e-12);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(RsepParams::new(2, 2.0, 3.0, 0.1).is_err());
        assert!(RsepParams::new(3, 0.5, 3.0, 0.1).is_err());
        assert!(RsepParams::new(3, 2.0, 1.5, 0.1).is_err());
        assert!(RsepParams::new(3, 2.0, 3.0, 1.0).is_err());
    }
}
