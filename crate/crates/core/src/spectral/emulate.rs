use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::modes::NormalKoopman;
use super::window::{check_margin, decode, inverse_dft, qpe_distribution, WindowSpec, NYQUIST_MARGIN};
use crate::error::{Error, Result};
use crate::linalg::{vec_norm, C64};

fn check_modes(modes: &NormalKoopman, dt: f64) -> Result<f64> {
    if !(dt > 0.0) {
        return Err(Error::InvalidParameter(format!("time step must be positive, got {dt}")));
    }
    let w = modes.oscillatory_weight();
    if !(w > 0.0) {
        return Err(Error::EmptyOscillatorySet);
    }
    for m in modes.oscillatory() {
        check_margin(m.omega * dt, NYQUIST_MARGIN)?;
    }
    Ok(w)
}

/// `p̃(ℓ) = Σ_{k∈S} (|a_k|²/w_S) |γ_ℓ(ω_k Δt)|²`.
pub fn ideal_mode_distribution(modes: &NormalKoopman, dt: f64, window: &WindowSpec) -> Result<Vec<f64>> {
    let w = check_modes(modes, dt)?;
    let mut p = vec![0.0; window.len];
    for m in modes.oscillatory() {
        let weight = m.amplitude.norm_sqr() / w;
        for (pl, q) in p.iter_mut().zip(qpe_distribution(window, m.omega * dt)) {
            *pl += weight * q;
        }
    }
    Ok(p)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Emulation {
    /// Outcome distribution of the index register.
    pub p: Vec<f64>,
    pub p_ideal: Vec<f64>,
    pub tv_to_ideal: f64,
}

/// Exact outcome distribution of the windowed solver.
///
/// Builds `Σ_j β_j |j⟩ ⊗ ḡ(T₁ + jΔt)` with `ḡ` the normalized state, applies
/// the inverse DFT to the index register and traces out the mode register.
pub fn emulate_spectral_qka(modes: &NormalKoopman, window: &WindowSpec, t1: f64, dt: f64) -> Result<Emulation> {
    let p_ideal = ideal_mode_distribution(modes, dt, window)?;
    if !(t1 >= 0.0) {
        return Err(Error::InvalidParameter(format!("suppression time must be non-negative, got {t1}")));
    }
    let len = window.len;
    let states: Vec<Vec<C64>> = (0..len)
        .map(|j| {
            let g = modes.state(t1 + j as f64 * dt);
            let n = vec_norm(&g);
            g.into_iter().map(|z| z / n).collect()
        })
        .collect();
    let mut p = vec![0.0; len];
    for k in 0..modes.len() {
        let column: Vec<C64> = states.iter().zip(&window.beta).map(|(g, b)| g[k] * b).collect();
        for (pl, amp) in p.iter_mut().zip(inverse_dft(&column)) {
            *pl += amp.norm_sqr();
        }
    }
    let tv = total_variation(&p, &p_ideal);
    Ok(Emulation { p, p_ideal, tv_to_ideal: tv })
}

pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// Mass of bins whose decoded phase lies within `eps_phase` of `theta`.
pub fn ball_mass(p: &[f64], theta: f64, eps_phase: f64) -> Result<f64> {
    let mut mass = 0.0;
    for (l, pl) in p.iter().enumerate() {
        if (decode(l, p.len(), 1.0)?.0 - theta).abs() <= eps_phase {
            mass += pl;
        }
    }
    Ok(mass)
}

/// Histogram of `n` seeded draws from `dist`.
pub fn sample_outcomes(dist: &[f64], n: usize, seed: u64) -> Result<Vec<u64>> {
    if dist.is_empty() || dist.iter().any(|p| !(*p >= 0.0)) {
        return Err(Error::InvalidDistribution("entries must be finite and non-negative".into()));
    }
    let total: f64 = dist.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidDistribution(format!("probabilities sum to {total}")));
    }
    let mut counts = vec![0u64; dist.len()];
    if n == 0 {
        return Ok(counts);
    }
    let sampler = WeightedIndex::new(dist).map_err(|e| Error::InvalidDistribution(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..n {
        counts[sampler.sample(&mut rng)] += 1;
    }
    Ok(counts)
}
