use crate::error::{Error, Result};
use crate::linalg::{normal_eigen, CMat, C64};

/// Tolerance on `μ_k` for a mode to count as oscillatory.
pub const OSCILLATORY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mode {
    /// Decay rate, `λ = −μ + iω`.
    pub mu: f64,
    pub omega: f64,
    pub amplitude: C64,
}

impl Mode {
    pub fn new(mu: f64, omega: f64, amplitude: C64) -> Self {
        Self { mu, omega, amplitude }
    }

    pub fn lambda(&self) -> C64 {
        C64::new(-self.mu, self.omega)
    }

    pub fn is_oscillatory(&self) -> bool {
        self.mu.abs() <= OSCILLATORY_TOL
    }
}

/// A normal Koopman generator stored in its eigenbasis: the eigenvalues and
/// the amplitudes of the initial state.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalKoopman {
    modes: Vec<Mode>,
}

impl NormalKoopman {
    /// Requires `μ_k ≥ −1e−12` and `Σ|a_k|² = 1` within 1e−9.
    pub fn new(modes: Vec<Mode>) -> Result<Self> {
        if modes.is_empty() {
            return Err(Error::InvalidParameter("at least one mode is required".into()));
        }
        for (k, m) in modes.iter().enumerate() {
            if !(m.mu >= -OSCILLATORY_TOL) || !m.omega.is_finite() || !m.mu.is_finite() {
                return Err(Error::InvalidParameter(format!("mode {k} has invalid eigenvalue {}", m.lambda())));
            }
        }
        let weight: f64 = modes.iter().map(|m| m.amplitude.norm_sqr()).sum();
        if (weight - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!("amplitudes have total weight {weight}, expected 1")));
        }
        Ok(Self { modes })
    }

    /// Diagonalizes a normal `K` and expands `x0` (normalized) in its eigenbasis.
    pub fn from_matrix(k: &CMat, x0: &[C64]) -> Result<Self> {
        if x0.len() != k.nrows() {
            return Err(Error::DimensionMismatch { expected: k.nrows(), got: x0.len() });
        }
        let norm = crate::linalg::vec_norm(x0);
        if norm == 0.0 {
            return Err(Error::ZeroInitialState);
        }
        let (lambda, v) = normal_eigen(k, 1e-8)?;
        let x = crate::linalg::CVec::from_iterator(x0.len(), x0.iter().map(|z| z / norm));
        let a = v.adjoint() * x;
        let modes = lambda.iter().zip(a.iter()).map(|(l, a)| Mode::new(-l.re, l.im, *a)).collect();
        Self::new(modes)
    }

    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn oscillatory(&self) -> impl Iterator<Item = &Mode> {
        self.modes.iter().filter(|m| m.is_oscillatory())
    }

    pub fn decaying(&self) -> impl Iterator<Item = &Mode> {
        self.modes.iter().filter(|m| !m.is_oscillatory())
    }

    /// `w_S = Σ_{k∈S} |a_k|²`.
    pub fn oscillatory_weight(&self) -> f64 {
        self.oscillatory().map(|m| m.amplitude.norm_sqr()).sum()
    }

    /// Smallest decay rate among decaying modes, `None` if there are none.
    pub fn gap(&self) -> Option<f64> {
        self.decaying().map(|m| m.mu).reduce(f64::min)
    }

    /// `g(t) = Σ_k a_k e^{λ_k t} |k⟩`.
    pub fn state(&self, t: f64) -> Vec<C64> {
        self.modes.iter().map(|m| m.amplitude * (m.lambda() * t).exp()).collect()
    }

    /// The oscillatory part `g̃(t)` of [`NormalKoopman::state`].
    pub fn oscillatory_state(&self, t: f64) -> Vec<C64> {
        self.modes
            .iter()
            .map(|m| if m.is_oscillatory() { m.amplitude * (m.lambda() * t).exp() } else { C64::new(0.0, 0.0) })
            .collect()
    }

    /// `‖g(t)‖²` in closed form.
    pub fn norm_sqr(&self, t: f64) -> f64 {
        self.modes.iter().map(|m| m.amplitude.norm_sqr() * (-2.0 * m.mu * t).exp()).sum()
    }

    /// `‖g(t) − g̃(t)‖`, bounded by `e^{−Δt}`.
    pub fn decaying_residual(&self, t: f64) -> f64 {
        self.decaying().map(|m| m.amplitude.norm_sqr() * (-2.0 * m.mu * t).exp()).sum::<f64>().sqrt()
    }
}

/// `T₁ = ln(1/ε₁)/Δ`, after which decaying modes carry norm at most `ε₁`.
pub fn suppression_time(gap: f64, eps1: f64) -> Result<f64> {
    if !(gap > 0.0) {
        return Err(Error::InvalidParameter(format!("gap must be positive, got {gap}")));
    }
    if !(eps1 > 0.0 && eps1 <= 1.0) {
        return Err(Error::InvalidParameter(format!("suppression target must lie in (0, 1], got {eps1}")));
    }
    Ok((1.0 / eps1).ln() / gap)
}
