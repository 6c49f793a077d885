//! Open free-fermion dynamics on the level of the Majorana covariance matrix.
//!
//! For `H = (i/4) Σ h_ij c_i c_j` and jumps `L_μ = Σ_i l_{μ,i} c_i` the
//! covariance `Γ_kl = (i/2)⟨[c_k, c_l]⟩` obeys the closed linear equation
//! `Γ̇ = BΓ + ΓBᵀ + Y` with `B = h − X`.

mod evolve;
mod oracle;
mod spectrum;

pub use evolve::{evolve_covariance, evolve_covariance_vectorized, heat_per_fermion};
pub use oracle::{exact_lindblad_oracle, majoranas, oracle_energy, pure_state, OracleRun, MAX_ORACLE_MODES};
pub use spectrum::{decay_spectrum, lindblad_gap, steady_state, DecayComponent, DecaySpectrum};

use std::io::Write;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{kron_real, max_abs_real, RMat, C64};
use crate::polyflow::fmt_f64;

/// Tolerance on `hᵀ = −h` and the symmetry of the derived matrices.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Largest mode count for which the vectorized generator is formed.
pub const MAX_VECTORIZED_MODES: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct FermionSystem {
    modes: usize,
    h: RMat,
    jumps: Vec<Vec<C64>>,
    x: RMat,
    y: RMat,
    b: RMat,
}

impl FermionSystem {
    pub fn new(h: RMat, jumps: Vec<Vec<C64>>) -> Result<Self> {
        let m = h.nrows();
        if m != h.ncols() {
            return Err(Error::DimensionMismatch { expected: m, got: h.ncols() });
        }
        if m == 0 || !m.is_multiple_of(2) {
            return Err(Error::InvalidParameter(format!("h must be 2N x 2N with N >= 1, got {m}")));
        }
        let dev = max_abs_real(&(&h + h.transpose()));
        if dev > SYMMETRY_TOL {
            return Err(Error::NotAntisymmetric { what: "h", deviation: dev });
        }
        let mut x = RMat::zeros(m, m);
        let mut y = RMat::zeros(m, m);
        for l in &jumps {
            if l.len() != m {
                return Err(Error::DimensionMismatch { expected: m, got: l.len() });
            }
            for i in 0..m {
                for j in 0..m {
                    let ldl = l[i].conj() * l[j];
                    x[(i, j)] += 2.0 * ldl.re;
                    y[(i, j)] -= 4.0 * ldl.im;
                }
            }
        }
        let b = &h - &x;
        Ok(Self { modes: m / 2, h, jumps, x, y, b })
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    /// Number of Majorana operators, `2N`.
    pub fn majorana_count(&self) -> usize {
        2 * self.modes
    }

    pub fn h(&self) -> &RMat {
        &self.h
    }

    pub fn jumps(&self) -> &[Vec<C64>] {
        &self.jumps
    }

    pub fn x(&self) -> &RMat {
        &self.x
    }

    pub fn y(&self) -> &RMat {
        &self.y
    }

    pub fn b(&self) -> &RMat {
        &self.b
    }

    /// `B ⊗ I + I ⊗ B`, acting on row-major `vec(Γ)`.
    pub fn vectorized_generator(&self) -> Result<RMat> {
        if self.modes > MAX_VECTORIZED_MODES {
            return Err(Error::Overflow {
                what: "vectorized generator",
                size: (self.majorana_count() as u128).pow(4),
                limit: (2 * MAX_VECTORIZED_MODES as u128).pow(4),
            });
        }
        let eye = RMat::identity(self.majorana_count(), self.majorana_count());
        Ok(kron_real(&self.b, &eye) + kron_real(&eye, &self.b))
    }

    /// Row-major `vec(Y)`.
    pub fn vec_y(&self) -> Vec<f64> {
        row_major(&self.y)
    }

    /// `max |[h, X]|`; zero when the secular condition holds.
    pub fn commutator_norm(&self) -> f64 {
        max_abs_real(&(&self.h * &self.x - &self.x * &self.h))
    }

    pub fn to_json(&self) -> serde_json::Value {
        let m = self.majorana_count();
        let mut h = Vec::new();
        for i in 0..m {
            for j in i + 1..m {
                if self.h[(i, j)] != 0.0 {
                    h.push((i, j, self.h[(i, j)]));
                }
            }
        }
        let jumps = self.jumps.iter().map(|l| l.iter().map(|z| (z.re, z.im)).collect()).collect();
        serde_json::to_value(SystemDescriptor { modes: self.modes, h, jumps }).expect("serializes")
    }

    pub fn from_json(value: &serde_json::Value) -> Result<Self> {
        let desc: SystemDescriptor = serde_json::from_value(value.clone())
            .map_err(|e| Error::InvalidParameter(format!("fermion system: {e}")))?;
        let m = 2 * desc.modes;
        let mut h = RMat::zeros(m, m);
        for (i, j, v) in desc.h {
            if i >= j || j >= m {
                return Err(Error::InvalidParameter(format!(
                    "h entry ({i}, {j}) must satisfy i < j < 2N = {m}"
                )));
            }
            h[(i, j)] += v;
            h[(j, i)] -= v;
        }
        let jumps = desc
            .jumps
            .into_iter()
            .map(|l| l.into_iter().map(|(re, im)| C64::new(re, im)).collect())
            .collect();
        Self::new(h, jumps)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SystemDescriptor {
    #[serde(rename = "N")]
    modes: usize,
    h: Vec<(usize, usize, f64)>,
    jumps: Vec<Vec<(f64, f64)>>,
}

pub(crate) fn row_major(m: &RMat) -> Vec<f64> {
    let (r, c) = m.shape();
    (0..r * c).map(|k| m[(k / c, k % c)]).collect()
}

pub(crate) fn from_row_major(v: &[f64], n: usize) -> RMat {
    RMat::from_row_slice(n, n, v)
}

pub(crate) fn antisymmetrize(m: &RMat) -> RMat {
    (m - m.transpose()) * 0.5
}

/// A real antisymmetric covariance matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceState {
    gamma: RMat,
}

impl CovarianceState {
    /// Antisymmetry tolerance on construction.
    pub const TOL: f64 = 1e-10;

    pub fn new(gamma: RMat) -> Result<Self> {
        if !gamma.is_square() || !gamma.nrows().is_multiple_of(2) {
            return Err(Error::InvalidParameter("covariance must be 2N x 2N".into()));
        }
        let dev = max_abs_real(&(&gamma + gamma.transpose()));
        if dev > Self::TOL {
            return Err(Error::NotAntisymmetric { what: "Gamma", deviation: dev });
        }
        Ok(Self { gamma })
    }

    pub fn zeros(modes: usize) -> Self {
        Self { gamma: RMat::zeros(2 * modes, 2 * modes) }
    }

    pub fn matrix(&self) -> &RMat {
        &self.gamma
    }

    pub fn into_matrix(self) -> RMat {
        self.gamma
    }

    /// Fock vacuum, `Γ_{2k,2k+1} = −1`.
    pub fn vacuum(modes: usize) -> Self {
        let mut gamma = RMat::zeros(2 * modes, 2 * modes);
        for k in 0..modes {
            gamma[(2 * k, 2 * k + 1)] = -1.0;
            gamma[(2 * k + 1, 2 * k)] = 1.0;
        }
        Self { gamma }
    }

    /// Random pure Gaussian state `QΓ_vac Qᵀ` with `Q` a random orthogonal matrix.
    pub fn random_pure<R: Rng>(modes: usize, rng: &mut R) -> Self {
        let q = random_orthogonal(2 * modes, rng);
        let g = &q * Self::vacuum(modes).gamma * q.transpose();
        Self { gamma: antisymmetrize(&g) }
    }

    /// `Γ` is physical when the spectrum of the Hermitian matrix `iΓ` lies in `[−1, 1]`.
    pub fn is_physical(&self) -> bool {
        let ig = self.gamma.map(|v| C64::new(0.0, v));
        let eig = ig.symmetric_eigen();
        eig.eigenvalues.iter().all(|e| e.abs() <= 1.0 + 1e-8)
    }

    /// `‖Γ‖_F / √N`, expected to stay of order one for generic extensive states.
    pub fn frobenius_per_sqrt_mode(&self) -> f64 {
        self.gamma.norm() / ((self.gamma.nrows() / 2) as f64).sqrt()
    }

    /// `i,j,value` rows for `i < j`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "i,j,value")?;
        let m = self.gamma.nrows();
        for i in 0..m {
            for j in i + 1..m {
                writeln!(w, "{i},{j},{}", fmt_f64(self.gamma[(i, j)]))?;
            }
        }
        Ok(())
    }
}

/// `E = −Tr(hΓ)/4`.
pub fn energy(h: &RMat, gamma: &RMat) -> f64 {
    -(h * gamma).trace() / 4.0
}

/// Nearest-neighbour chain with boundary losses.
///
/// Hopping couples `c_{2k+1}` to `c_{2k+2}` of neighbouring sites, so every
/// row of `h` has at most two nonzeros. The left jump acts on site 0 and the
/// right jump on site `N − 1`, each as `√γ (c_{2k} + i c_{2k+1}) / 2`.
pub fn chain_example(modes: usize, hopping: f64, rates: (f64, f64)) -> Result<(RMat, Vec<Vec<C64>>)> {
    if modes < 2 {
        return Err(Error::InvalidParameter(format!("chain needs N >= 2, got {modes}")));
    }
    let m = 2 * modes;
    let mut h = RMat::zeros(m, m);
    for k in 0..modes - 1 {
        let (a, b) = (2 * k + 1, 2 * k + 2);
        h[(a, b)] = hopping;
        h[(b, a)] = -hopping;
    }
    let mut jumps = Vec::new();
    for (site, rate) in [(0, rates.0), (modes - 1, rates.1)] {
        if rate != 0.0 {
            let s = rate.sqrt() / 2.0;
            let mut l = vec![C64::new(0.0, 0.0); m];
            l[2 * site] = C64::new(s, 0.0);
            l[2 * site + 1] = C64::new(0.0, s);
            jumps.push(l);
        }
    }
    Ok((h, jumps))
}

/// Random antisymmetric `h` with standard normal entries and `jumps`
/// complex Gaussian jump vectors scaled by `1/√(2N)`.
pub fn random_system<R: Rng>(modes: usize, jumps: usize, rng: &mut R) -> FermionSystem {
    let m = 2 * modes;
    let mut h = RMat::zeros(m, m);
    for i in 0..m {
        for j in i + 1..m {
            let v: f64 = rng.sample(StandardNormal);
            h[(i, j)] = v;
            h[(j, i)] = -v;
        }
    }
    let scale = 1.0 / (m as f64).sqrt();
    let ls = (0..jumps)
        .map(|_| {
            (0..m)
                .map(|_| {
                    let re: f64 = rng.sample(StandardNormal);
                    let im: f64 = rng.sample(StandardNormal);
                    C64::new(re, im) * scale
                })
                .collect()
        })
        .collect();
    FermionSystem::new(h, ls).expect("random instance is well formed")
}

/// Random orthogonal matrix from the QR factorization of a Gaussian matrix.
pub fn random_orthogonal<R: Rng>(n: usize, rng: &mut R) -> RMat {
    let g = RMat::from_fn(n, n, |_, _| rng.sample(StandardNormal));
    let qr = g.qr();
    let (q, r) = (qr.q(), qr.r());
    let signs = RMat::from_diagonal(&r.diagonal().map(|d| if d < 0.0 { -1.0 } else { 1.0 }));
    q * signs
}

/// Instance with `[h, X] = 0`: independent damped oscillators, optionally
/// rotated by a common orthogonal change of Majorana basis.
///
/// Mode `k` has frequency `freqs[k]` and loss amplitude `amps[k]`, giving
/// `ν = 2 amps[k]²` twice and a nonzero `Y` block.
pub fn commuting_system(freqs: &[f64], amps: &[f64], rotation: Option<&RMat>) -> Result<FermionSystem> {
    if freqs.len() != amps.len() || freqs.is_empty() {
        return Err(Error::DimensionMismatch { expected: freqs.len(), got: amps.len() });
    }
    let n = freqs.len();
    let m = 2 * n;
    let mut h = RMat::zeros(m, m);
    let mut jumps = Vec::new();
    for k in 0..n {
        h[(2 * k, 2 * k + 1)] = freqs[k];
        h[(2 * k + 1, 2 * k)] = -freqs[k];
        let mut l = vec![C64::new(0.0, 0.0); m];
        l[2 * k] = C64::new(amps[k], 0.0);
        l[2 * k + 1] = C64::new(0.0, amps[k]);
        jumps.push(l);
    }
    if let Some(q) = rotation {
        if q.nrows() != m || q.ncols() != m {
            return Err(Error::DimensionMismatch { expected: m, got: q.nrows() });
        }
        h = q * &h * q.transpose();
        h = antisymmetrize(&h);
        jumps = jumps
            .into_iter()
            .map(|l| (0..m).map(|i| (0..m).map(|j| l[j] * q[(i, j)]).sum()).collect())
            .collect();
    }
    FermionSystem::new(h, jumps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn single_complex_jump() {
        let l = vec![C64::new(1.0, 0.0), C64::new(0.0, 1.0)];
        let sys = FermionSystem::new(RMat::zeros(2, 2), vec![l]).unwrap();
        assert_eq!(sys.x(), &RMat::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 2.0]));
        assert_eq!(sys.y(), &RMat::from_row_slice(2, 2, &[0.0, -4.0, 4.0, 0.0]));
    }

    #[test]
    fn closed_and_real_jumps() {
        let h = RMat::from_row_slice(2, 2, &[0.0, 1.5, -1.5, 0.0]);
        let sys = FermionSystem::new(h.clone(), vec![]).unwrap();
        assert_eq!(sys.b(), &h);
        assert!(sys.y().iter().all(|&v| v == 0.0));
        let real = FermionSystem::new(h, vec![vec![C64::new(0.3, 0.0), C64::new(-0.7, 0.0)]]).unwrap();
        assert!(real.y().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn rejects_symmetric_h() {
        let h = RMat::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        assert!(matches!(FermionSystem::new(h, vec![]), Err(Error::NotAntisymmetric { .. })));
    }

    #[test]
    fn chain_pattern() {
        let (h, jumps) = chain_example(2, 1.0, (0.0, 0.0)).unwrap();
        let pairs = (0..4).flat_map(|i| (i + 1..4).map(move |j| (i, j))).filter(|&(i, j)| h[(i, j)] != 0.0);
        assert_eq!(pairs.count(), 1);
        assert!(jumps.is_empty());
        let (h, _) = chain_example(5, 0.7, (0.2, 0.1)).unwrap();
        for i in 0..10 {
            assert!(h.row(i).iter().filter(|v| **v != 0.0).count() <= 4);
        }
    }

    #[test]
    fn vacuum_matches_fock_space() {
        // |0…0⟩ on two qubits
        let mut rho = crate::linalg::CMat::zeros(4, 4);
        rho[(0, 0)] = C64::new(1.0, 0.0);
        let sys = FermionSystem::new(RMat::zeros(4, 4), vec![]).unwrap();
        let run = exact_lindblad_oracle(&sys, &rho, &[0.0]).unwrap();
        assert!(max_abs_real(&(run.gammas[0].matrix() - CovarianceState::vacuum(2).matrix())) < 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let g = CovarianceState::random_pure(3, &mut rng);
        let sq = g.matrix() * g.matrix();
        assert!(max_abs_real(&(sq + RMat::identity(6, 6))) < 1e-12);
    }

    #[test]
    fn json_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let sys = random_system(2, 2, &mut rng);
        let back = FermionSystem::from_json(&sys.to_json()).unwrap();
        assert!(max_abs_real(&(back.h() - sys.h())) == 0.0);
        assert_eq!(back.jumps(), sys.jumps());
        let bad = serde_json::json!({"N": 1, "h": [[1, 0, 1.0]], "jumps": []});
        assert!(FermionSystem::from_json(&bad).is_err());
    }

    #[test]
    fn commuting_instance_commutes() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let q = random_orthogonal(6, &mut rng);
        let sys = commuting_system(&[0.5, 1.1, 2.0], &[0.3, 0.4, 0.5], Some(&q)).unwrap();
        assert!(sys.commutator_norm() < 1e-12);
    }
}
