//! Decay spectrum and steady state of a commuting dissipative instance.

use koopman_lab::fermion::{
    commuting_system, decay_spectrum, evolve_covariance, random_orthogonal, steady_state, CovarianceState,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> koopman_lab::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let q = random_orthogonal(6, &mut rng);
    let sys = commuting_system(&[0.5, 0.9, 1.3], &[0.3, 0.4, 0.5], Some(&q))?;
    let steady = steady_state(&sys)?;
    let g0 = CovarianceState::random_pure(3, &mut rng);
    let delta = CovarianceState::new(g0.matrix() - steady.matrix())?;
    let spec = decay_spectrum(&sys, &delta)?;
    println!("Lindblad gap: {:.4}", spec.gap);
    for c in spec.components.iter().take(5) {
        println!("rate {:.4}  weight {:.4e}", c.rate, c.weight);
    }
    for t in [1.0, 2.0, 4.0] {
        let g = evolve_covariance(&sys, &g0, &[0.0, t], 1e-12)?;
        let dist = (g[1].matrix() - steady.matrix()).norm();
        println!("t = {t}: |Gamma - Gamma_inf| = {dist:.4e}, envelope {:.4e}", (-spec.gap * t).exp() * delta.matrix().norm());
    }
    Ok(())
}
