use super::{antisymmetrize, from_row_major, CovarianceState, FermionSystem};
use crate::error::{Error, Result};
use crate::linalg::{normal_eigen, to_complex, C64};

/// Largest `‖[h, X]‖_max` accepted as commuting.
pub const COMMUTATOR_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayComponent {
    /// `ν_k + ν_l`.
    pub rate: f64,
    /// `|a_kl|²`.
    pub weight: f64,
    pub amplitude: C64,
    pub pair: (usize, usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecaySpectrum {
    /// Single-mode rates `ν_k = −Re λ_k(B)`.
    pub nu: Vec<f64>,
    /// All `(2N)²` pair components, heaviest first.
    pub components: Vec<DecayComponent>,
    pub gap: f64,
}

impl DecaySpectrum {
    pub fn total_weight(&self) -> f64 {
        self.components.iter().map(|c| c.weight).sum()
    }
}

fn gap_from_rates(nu: &[f64]) -> f64 {
    let mut gap = f64::INFINITY;
    for j in 0..nu.len() {
        for k in j + 1..nu.len() {
            gap = gap.min(nu[j] + nu[k]);
        }
    }
    gap
}

/// Expands `vec(Γ)` in the product eigenbasis `φ_k ⊗ φ_l` of `B ⊗ I + I ⊗ B`.
///
/// Requires `[h, X] = 0`, which makes `B` normal. Each coefficient then decays
/// as `e^{−(ν_k + ν_l) t}` under the homogeneous flow.
pub fn decay_spectrum(sys: &FermionSystem, gamma: &CovarianceState) -> Result<DecaySpectrum> {
    let comm = sys.commutator_norm();
    if comm > COMMUTATOR_TOL {
        return Err(Error::NonCommuting(comm));
    }
    let m = sys.majorana_count();
    if gamma.matrix().nrows() != m {
        return Err(Error::DimensionMismatch { expected: m, got: gamma.matrix().nrows() });
    }
    let b = to_complex(sys.b());
    let scale = sys.b().amax().max(1.0);
    let (lambda, v) = normal_eigen(&b, 1e-9 * scale * scale)?;
    let nu: Vec<f64> = lambda.iter().map(|l| -l.re).collect();
    // a_kl = Σ_ab conj(φ_k[a]) conj(φ_l[b]) Γ_ab
    let coeffs = v.adjoint() * to_complex(gamma.matrix()) * v.conjugate();
    let mut components = Vec::with_capacity(m * m);
    for k in 0..m {
        for l in 0..m {
            let a = coeffs[(k, l)];
            components.push(DecayComponent { rate: nu[k] + nu[l], weight: a.norm_sqr(), amplitude: a, pair: (k, l) });
        }
    }
    components.sort_by(|x, y| y.weight.total_cmp(&x.weight).then(x.pair.cmp(&y.pair)));
    let gap = gap_from_rates(&nu);
    Ok(DecaySpectrum { nu, components, gap })
}

/// `Δ_L = min_{j≠k} (ν_j + ν_k)` over the eigenvalues of `B`, which is the
/// slowest decay rate on antisymmetric matrices.
pub fn lindblad_gap(sys: &FermionSystem) -> f64 {
    let nu: Vec<f64> = sys.b().complex_eigenvalues().iter().map(|l| -l.re).collect();
    gap_from_rates(&nu)
}

/// Solves `BΓ∞ + Γ∞Bᵀ = −Y` through the dense vectorized system.
pub fn steady_state(sys: &FermionSystem) -> Result<CovarianceState> {
    let gap = lindblad_gap(sys);
    if !(gap > 1e-12) {
        return Err(Error::Singular(format!("Lindblad gap {gap:e} is not positive")));
    }
    let generator = sys.vectorized_generator()?;
    let rhs = nalgebra::DVector::from_iterator(sys.vec_y().len(), sys.vec_y().into_iter().map(|v| -v));
    let sol = generator
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Singular("vectorized generator is not invertible".into()))?;
    let m = sys.majorana_count();
    CovarianceState::new(antisymmetrize(&from_row_major(sol.as_slice(), m)))
}
