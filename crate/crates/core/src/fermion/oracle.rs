//! Brute-force density-matrix evolution on the full `2^N`-dimensional Fock
//! space, used to cross-check the covariance equations.

use rand::Rng;
use rand_distr::StandardNormal;

use super::{CovarianceState, FermionSystem};
use crate::error::{Error, Result};
use crate::linalg::{kron, max_abs, CMat, C64, I, ONE, ZERO};
use crate::polyflow::{integrate, IntegratorOptions, VectorField};

pub const MAX_ORACLE_MODES: usize = 4;

/// Jordan–Wigner Majoranas: `c_{2k} = Z^{⊗k} X I…`, `c_{2k+1} = Z^{⊗k} Y I…`.
pub fn majoranas(modes: usize) -> Vec<CMat> {
    let id = CMat::identity(2, 2);
    let px = CMat::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]);
    let py = CMat::from_row_slice(2, 2, &[ZERO, -I, I, ZERO]);
    let pz = CMat::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE]);
    let string = |k: usize, op: &CMat| {
        let mut out = CMat::from_element(1, 1, ONE);
        for site in 0..modes {
            let f = if site < k {
                &pz
            } else if site == k {
                op
            } else {
                &id
            };
            out = kron(&out, f);
        }
        out
    };
    (0..modes).flat_map(|k| [string(k, &px), string(k, &py)]).collect()
}

fn check_anticommutation(c: &[CMat]) -> Result<()> {
    let dim = c[0].nrows();
    for (i, ci) in c.iter().enumerate() {
        for (j, cj) in c.iter().enumerate() {
            let anti = ci * cj + cj * ci;
            let expect = if i == j { CMat::identity(dim, dim) * C64::new(2.0, 0.0) } else { CMat::zeros(dim, dim) };
            if anti != expect {
                return Err(Error::InvalidParameter(format!(
                    "Majorana operators {i} and {j} violate the anticommutation relation"
                )));
            }
        }
    }
    Ok(())
}

fn check_density_matrix(rho: &CMat, dim: usize) -> Result<()> {
    if rho.nrows() != dim || rho.ncols() != dim {
        return Err(Error::InvalidDensityMatrix(format!("expected {dim}x{dim}, got {}x{}", rho.nrows(), rho.ncols())));
    }
    let herm = max_abs(&(rho - rho.adjoint()));
    if herm > 1e-10 {
        return Err(Error::InvalidDensityMatrix(format!("not Hermitian (deviation {herm:e})")));
    }
    let tr = rho.trace();
    if (tr - ONE).norm() > 1e-10 {
        return Err(Error::InvalidDensityMatrix(format!("trace {tr} != 1")));
    }
    let h = (rho + rho.adjoint()) * C64::new(0.5, 0.0);
    let min = h.symmetric_eigen().eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    if min < -1e-10 {
        return Err(Error::InvalidDensityMatrix(format!("negative eigenvalue {min:e}")));
    }
    Ok(())
}

struct Lindblad {
    dim: usize,
    /// `−iH − ½ Σ L†L`
    drift: CMat,
    jumps: Vec<CMat>,
}

impl VectorField for Lindblad {
    fn dim(&self) -> usize {
        self.dim * self.dim
    }

    fn eval(&self, x: &[C64], out: &mut [C64]) {
        let n = self.dim;
        let rho = CMat::from_row_slice(n, n, x);
        let g_rho = &self.drift * &rho;
        let mut rhs = &g_rho + g_rho.adjoint();
        for l in &self.jumps {
            rhs += l * &rho * l.adjoint();
        }
        for r in 0..n {
            for c in 0..n {
                out[r * n + c] = rhs[(r, c)];
            }
        }
    }
}

/// Covariances and energies `Tr(Hρ)` at every sample time.
#[derive(Debug, Clone)]
pub struct OracleRun {
    pub gammas: Vec<CovarianceState>,
    pub energies: Vec<f64>,
}

fn covariance(c: &[CMat], rho: &CMat) -> Result<CovarianceState> {
    let m = c.len();
    let mut g = crate::linalg::RMat::zeros(m, m);
    for k in 0..m {
        for l in k + 1..m {
            let comm = &c[k] * &c[l] - &c[l] * &c[k];
            let v = (I * 0.5 * (rho * comm).trace()).re;
            g[(k, l)] = v;
            g[(l, k)] = -v;
        }
    }
    CovarianceState::new(g)
}

/// Builds the many-body Hamiltonian `H = (i/4) Σ h_ij c_i c_j`.
fn hamiltonian(sys: &FermionSystem, c: &[CMat]) -> CMat {
    let m = c.len();
    let dim = c[0].nrows();
    let mut h = CMat::zeros(dim, dim);
    for i in 0..m {
        for j in 0..m {
            let v = sys.h()[(i, j)];
            if v != 0.0 {
                h += &c[i] * &c[j] * (I * (v / 4.0));
            }
        }
    }
    h
}

/// `Tr(Hρ)` for the many-body Hamiltonian of `sys`.
pub fn oracle_energy(sys: &FermionSystem, rho: &CMat) -> Result<f64> {
    if sys.modes() > MAX_ORACLE_MODES {
        return Err(Error::InvalidParameter(format!("oracle supports N <= {MAX_ORACLE_MODES}")));
    }
    let c = majoranas(sys.modes());
    Ok((hamiltonian(sys, &c) * rho).trace().re)
}

/// Integrates the master equation from `rho0` and reads off `Γ(t_s)`.
pub fn exact_lindblad_oracle(sys: &FermionSystem, rho0: &CMat, times: &[f64]) -> Result<OracleRun> {
    let n = sys.modes();
    if n > MAX_ORACLE_MODES {
        return Err(Error::InvalidParameter(format!(
            "oracle supports N <= {MAX_ORACLE_MODES}, got {n}"
        )));
    }
    let c = majoranas(n);
    check_anticommutation(&c)?;
    let dim = 1usize << n;
    check_density_matrix(rho0, dim)?;

    let ham = hamiltonian(sys, &c);
    let jumps: Vec<CMat> = sys
        .jumps()
        .iter()
        .map(|l| {
            l.iter().zip(&c).fold(CMat::zeros(dim, dim), |acc, (coef, ci)| acc + ci * *coef)
        })
        .collect();
    let mut drift = &ham * (-I);
    for l in &jumps {
        drift -= l.adjoint() * l * C64::new(0.5, 0.0);
    }
    let field = Lindblad { dim, drift, jumps };
    let x0: Vec<C64> = (0..dim * dim).map(|k| rho0[(k / dim, k % dim)]).collect();
    let tr = integrate(&field, &x0, times, &IntegratorOptions::with_tol(1e-12))?;
    if tr.is_diverged() {
        return Err(Error::Diverged { t: *tr.times.last().unwrap_or(&0.0) });
    }
    let mut gammas = Vec::with_capacity(tr.states.len());
    let mut energies = Vec::with_capacity(tr.states.len());
    for s in &tr.states {
        let rho = CMat::from_row_slice(dim, dim, s);
        gammas.push(covariance(&c, &rho)?);
        energies.push((&ham * &rho).trace().re);
    }
    Ok(OracleRun { gammas, energies })
}

/// Haar-random pure state `|ψ⟩⟨ψ|` on `modes` qubits.
pub fn pure_state<R: Rng>(modes: usize, rng: &mut R) -> CMat {
    let dim = 1usize << modes;
    let psi: Vec<C64> = (0..dim)
        .map(|_| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
        .collect();
    let norm = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let v = crate::linalg::CVec::from_iterator(dim, psi.into_iter().map(|z| z / norm));
    &v * v.adjoint()
}
