use super::{antisymmetrize, energy, from_row_major, row_major, CovarianceState, FermionSystem};
use crate::error::{Error, Result};
use crate::linalg::{RMat, C64};
use crate::polyflow::{integrate, IntegratorOptions, VectorField};

struct MatrixForm<'a> {
    sys: &'a FermionSystem,
}

impl VectorField for MatrixForm<'_> {
    fn dim(&self) -> usize {
        self.sys.majorana_count().pow(2)
    }

    fn eval(&self, x: &[C64], out: &mut [C64]) {
        let m = self.sys.majorana_count();
        let g = RMat::from_fn(m, m, |i, j| x[i * m + j].re);
        let rhs = self.sys.b() * &g + &g * self.sys.b().transpose() + self.sys.y();
        // Γ̇ is antisymmetric whenever Γ is; projecting removes rounding drift.
        let rhs = antisymmetrize(&rhs);
        for (o, v) in out.iter_mut().zip(row_major(&rhs)) {
            *o = C64::new(v, 0.0);
        }
    }
}

struct VectorizedForm {
    generator: RMat,
    vec_y: Vec<f64>,
}

impl VectorField for VectorizedForm {
    fn dim(&self) -> usize {
        self.vec_y.len()
    }

    fn eval(&self, x: &[C64], out: &mut [C64]) {
        for (r, o) in out.iter_mut().enumerate() {
            let mut acc = self.vec_y[r];
            for (c, xc) in x.iter().enumerate() {
                let a = self.generator[(r, c)];
                if a != 0.0 {
                    acc += a * xc.re;
                }
            }
            *o = C64::new(acc, 0.0);
        }
    }
}

fn check_dims(sys: &FermionSystem, gamma0: &CovarianceState) -> Result<()> {
    let m = sys.majorana_count();
    if gamma0.matrix().nrows() != m {
        return Err(Error::DimensionMismatch { expected: m, got: gamma0.matrix().nrows() });
    }
    Ok(())
}

fn unpack(states: Vec<Vec<C64>>, m: usize) -> Result<Vec<CovarianceState>> {
    states
        .into_iter()
        .map(|s| {
            let v: Vec<f64> = s.iter().map(|z| z.re).collect();
            CovarianceState::new(antisymmetrize(&from_row_major(&v, m)))
        })
        .collect()
}

fn to_c(v: Vec<f64>) -> Vec<C64> {
    v.into_iter().map(|x| C64::new(x, 0.0)).collect()
}

/// `Γ(t_s)` for each sample time, integrating `Γ̇ = BΓ + ΓBᵀ + Y` from `times[0]`.
pub fn evolve_covariance(
    sys: &FermionSystem,
    gamma0: &CovarianceState,
    times: &[f64],
    tol: f64,
) -> Result<Vec<CovarianceState>> {
    check_dims(sys, gamma0)?;
    let x0 = to_c(row_major(gamma0.matrix()));
    let tr = integrate(&MatrixForm { sys }, &x0, times, &IntegratorOptions::with_tol(tol))?;
    if tr.is_diverged() {
        return Err(Error::Diverged { t: *tr.times.last().unwrap_or(&0.0) });
    }
    unpack(tr.states, sys.majorana_count())
}

/// Same flow through `d vec(Γ)/dt = 𝔹 vec(Γ) + vec(Y)`.
pub fn evolve_covariance_vectorized(
    sys: &FermionSystem,
    gamma0: &CovarianceState,
    times: &[f64],
    tol: f64,
) -> Result<Vec<CovarianceState>> {
    check_dims(sys, gamma0)?;
    let f = VectorizedForm { generator: sys.vectorized_generator()?, vec_y: sys.vec_y() };
    let x0 = to_c(row_major(gamma0.matrix()));
    let tr = integrate(&f, &x0, times, &IntegratorOptions::with_tol(tol))?;
    if tr.is_diverged() {
        return Err(Error::Diverged { t: *tr.times.last().unwrap_or(&0.0) });
    }
    unpack(tr.states, sys.majorana_count())
}

/// `Q = (E(0) − E(t)) / N`.
pub fn heat_per_fermion(sys: &FermionSystem, gamma0: &CovarianceState, t: f64, tol: f64) -> Result<f64> {
    let e0 = energy(sys.h(), gamma0.matrix());
    if t == 0.0 {
        return Ok(0.0);
    }
    let states = evolve_covariance(sys, gamma0, &[0.0, t], tol)?;
    let et = energy(sys.h(), states[1].matrix());
    Ok((e0 - et) / sys.modes() as f64)
}
