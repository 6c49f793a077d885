//! Adaptive Dormand–Prince 5(4) integration of autonomous complex ODEs.
//!
//! Steps are clipped so that every requested sample time is hit exactly;
//! no interpolant is involved in the reported states.

use std::io::Write;

use crate::error::{Error, Result};
use crate::linalg::{vec_norm, C64, ZERO};

/// Right-hand side of an autonomous ODE `ẋ = f(x)`.
pub trait VectorField: Sync {
    fn dim(&self) -> usize;
    fn eval(&self, x: &[C64], out: &mut [C64]);
}

impl<F> VectorField for (usize, F)
where
    F: Fn(&[C64], &mut [C64]) + Sync,
{
    fn dim(&self) -> usize {
        self.0
    }
    fn eval(&self, x: &[C64], out: &mut [C64]) {
        (self.1)(x, out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorOptions {
    /// Mixed tolerance: each component is scaled by `tol·(1 + |x_i|)`.
    pub tol: f64,
    /// Abort and flag divergence once `‖x‖₂` exceeds this.
    pub divergence_threshold: f64,
    pub max_steps: usize,
}

impl IntegratorOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self { tol, ..Self::default() }
    }
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        Self { tol: 1e-10, divergence_threshold: 1e9, max_steps: 20_000_000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TrajectoryStatus {
    Completed,
    /// Norm exceeded the divergence threshold at time `t`; samples after
    /// that point are missing.
    Diverged { t: f64 },
}

/// Sampled solution. `states[s]` is the state at `times[s]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<C64>>,
    pub status: TrajectoryStatus,
    pub steps: usize,
}

impl Trajectory {
    pub fn is_diverged(&self) -> bool {
        matches!(self.status, TrajectoryStatus::Diverged { .. })
    }

    pub fn last(&self) -> &[C64] {
        self.states.last().map(Vec::as_slice).unwrap_or(&[])
    }

    /// Writes `t,re_0,im_0,...` with 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let d = self.states.first().map_or(0, Vec::len);
        write_complex_header(&mut w, d)?;
        for (t, x) in self.times.iter().zip(&self.states) {
            write_complex_row(&mut w, *t, x)?;
        }
        Ok(())
    }
}

pub(crate) fn write_complex_header<W: Write>(w: &mut W, d: usize) -> std::io::Result<()> {
    write!(w, "t")?;
    for i in 0..d {
        write!(w, ",re_{i},im_{i}")?;
    }
    writeln!(w)
}

pub(crate) fn write_complex_row<W: Write>(w: &mut W, t: f64, x: &[C64]) -> std::io::Result<()> {
    write!(w, "{}", fmt_f64(t))?;
    for z in x {
        write!(w, ",{},{}", fmt_f64(z.re), fmt_f64(z.im))?;
    }
    writeln!(w)
}

/// Round-trip formatting with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "nan".to_string()
    } else if x > 0.0 {
        "inf".to_string()
    } else {
        "-inf".to_string()
    }
}

/// `n + 1` equispaced samples on `[0, t_end]`; a single sample when `t_end = 0`.
pub fn uniform_grid(t_end: f64, n: usize) -> Vec<f64> {
    if t_end == 0.0 || n == 0 {
        return vec![0.0];
    }
    (0..=n).map(|s| t_end * s as f64 / n as f64).collect()
}

// Dormand–Prince 5(4) tableau; the node values are not needed for autonomous fields.
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

#[inline]
fn combine(out: &mut [C64], x: &[C64], h: f64, terms: &[(f64, &[C64])]) {
    for i in 0..out.len() {
        let mut acc = ZERO;
        for (c, k) in terms {
            acc += k[i] * *c;
        }
        out[i] = x[i] + acc * h;
    }
}

/// Integrates `ẋ = f(x)` from `x0` at `times[0]` and reports the state at
/// every entry of `times`, which must be strictly increasing.
pub fn integrate<F: VectorField + ?Sized>(
    f: &F,
    x0: &[C64],
    times: &[f64],
    opts: &IntegratorOptions,
) -> Result<Trajectory> {
    integrate_observed(f, x0, times, opts, |x| x.to_vec())
}

/// Like [`integrate`], but records `observe(x)` instead of the full state.
/// Useful when the state is large and only a projection is needed.
pub fn integrate_observed<F, O>(
    f: &F,
    x0: &[C64],
    times: &[f64],
    opts: &IntegratorOptions,
    observe: O,
) -> Result<Trajectory>
where
    F: VectorField + ?Sized,
    O: Fn(&[C64]) -> Vec<C64>,
{
    let n = f.dim();
    if x0.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: x0.len() });
    }
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tolerance must be positive, got {}", opts.tol)));
    }
    if times.is_empty() {
        return Err(Error::InvalidParameter("empty sample grid".into()));
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidParameter("sample times must be strictly increasing".into()));
    }

    let mut traj = Trajectory {
        times: vec![times[0]],
        states: vec![observe(x0)],
        status: TrajectoryStatus::Completed,
        steps: 0,
    };
    if vec_norm(x0) > opts.divergence_threshold {
        traj.status = TrajectoryStatus::Diverged { t: times[0] };
        return Ok(traj);
    }
    if times.len() == 1 {
        return Ok(traj);
    }

    let mut x = x0.to_vec();
    let mut xn = vec![ZERO; n];
    let mut tmp = vec![ZERO; n];
    let mut k: [Vec<C64>; 7] = std::array::from_fn(|_| vec![ZERO; n]);
    f.eval(&x, &mut k[0]);

    let tol = opts.tol;
    let scaled_norm = |v: &[C64], a: &[C64], b: &[C64]| -> f64 {
        let s: f64 = v
            .iter()
            .zip(a.iter().zip(b))
            .map(|(e, (xa, xb))| {
                let sc = tol * (1.0 + xa.norm().max(xb.norm()));
                (e.norm() / sc).powi(2)
            })
            .sum();
        (s / n.max(1) as f64).sqrt()
    };

    let span = times[times.len() - 1] - times[0];
    let mut h = {
        let d0 = scaled_norm(&x, &x, &x) * tol;
        let d1 = scaled_norm(&k[0], &x, &x) * tol;
        let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        h0.min(span)
    };
    let mut t = times[0];
    let mut next = 1;
    let mut err_prev: f64 = 1e-4;

    while next < times.len() {
        if traj.steps >= opts.max_steps {
            return Err(Error::MaxStepsExceeded { t });
        }
        let target = times[next];
        let mut step = h;
        let mut lands = false;
        if t + step >= target - 1e-14 * target.abs().max(1.0) {
            step = target - t;
            lands = true;
        }
        if step < 1e-14 * t.abs().max(1.0) && !lands {
            return Err(Error::StepUnderflow { t });
        }

        let (k1, rest) = k.split_at_mut(1);
        let (k2, rest) = rest.split_at_mut(1);
        let (k3, rest) = rest.split_at_mut(1);
        let (k4, rest) = rest.split_at_mut(1);
        let (k5, rest) = rest.split_at_mut(1);
        let (k6, k7) = rest.split_at_mut(1);
        let (k1, k2, k3, k4, k5, k6, k7) =
            (&k1[0], &mut k2[0], &mut k3[0], &mut k4[0], &mut k5[0], &mut k6[0], &mut k7[0]);

        combine(&mut tmp, &x, step, &[(A21, k1)]);
        f.eval(&tmp, k2);
        combine(&mut tmp, &x, step, &[(A31, k1), (A32, k2)]);
        f.eval(&tmp, k3);
        combine(&mut tmp, &x, step, &[(A41, k1), (A42, k2), (A43, k3)]);
        f.eval(&tmp, k4);
        combine(&mut tmp, &x, step, &[(A51, k1), (A52, k2), (A53, k3), (A54, k4)]);
        f.eval(&tmp, k5);
        combine(&mut tmp, &x, step, &[(A61, k1), (A62, k2), (A63, k3), (A64, k4), (A65, k5)]);
        f.eval(&tmp, k6);
        combine(&mut xn, &x, step, &[(B1, k1), (B3, k3), (B4, k4), (B5, k5), (B6, k6)]);
        f.eval(&xn, k7);
        for i in 0..n {
            tmp[i] = (k1[i] * E1 + k3[i] * E3 + k4[i] * E4 + k5[i] * E5 + k6[i] * E6 + k7[i] * E7)
                * step;
        }
        let err = scaled_norm(&tmp, &x, &xn);
        traj.steps += 1;

        if err.is_finite() && err <= 1.0 {
            t = if lands { target } else { t + step };
            std::mem::swap(&mut x, &mut xn);
            k.swap(0, 6);
            // PI controller
            let fac = 0.9 * err.max(1e-10).powf(-0.7 / 5.0) * err_prev.powf(0.4 / 5.0);
            let fac = fac.clamp(0.2, 5.0);
            if !lands || step >= h {
                h = step * fac;
            } else {
                h = h.max(step * fac);
            }
            err_prev = err.max(1e-4);
            if vec_norm(&x) > opts.divergence_threshold || x.iter().any(|z| !z.is_finite()) {
                traj.status = TrajectoryStatus::Diverged { t };
                return Ok(traj);
            }
            if lands {
                traj.times.push(target);
                traj.states.push(observe(&x));
                next += 1;
            }
        } else {
            let fac = if err.is_finite() { (0.9 * err.powf(-0.2)).clamp(0.1, 0.9) } else { 0.1 };
            h = step * fac;
            if h < 1e-14 * t.abs().max(1.0) {
                // a non-finite error estimate at tiny steps is blow-up, not stiffness
                if !err.is_finite() || vec_norm(&xn) > opts.divergence_threshold {
                    traj.status = TrajectoryStatus::Diverged { t };
                    return Ok(traj);
                }
                return Err(Error::StepUnderflow { t });
            }
        }
    }
    Ok(traj)
}
