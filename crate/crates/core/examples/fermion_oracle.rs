//! Covariance dynamics of a random open free-fermion system against the
//! full master equation on the Fock space.

use koopman_lab::fermion::{evolve_covariance, exact_lindblad_oracle, heat_per_fermion, oracle_energy, pure_state, random_system};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> koopman_lab::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let sys = random_system(3, 2, &mut rng);
    let rho0 = pure_state(3, &mut rng);
    let times = [0.0, 0.1, 1.0];
    let oracle = exact_lindblad_oracle(&sys, &rho0, &times)?;
    let ode = evolve_covariance(&sys, &oracle.gammas[0], &times, 1e-12)?;
    let e0 = oracle_energy(&sys, &rho0)?;
    for (s, t) in times.iter().enumerate() {
        let dev = (ode[s].matrix() - oracle.gammas[s].matrix()).amax();
        let q_oracle = (e0 - oracle.energies[s]) / 3.0;
        let q_cov = heat_per_fermion(&sys, &oracle.gammas[0], *t, 1e-12)?;
        println!("t = {t:3}: max |dGamma| = {dev:.2e}, heat {q_cov:+.6} (oracle {q_oracle:+.6})");
    }
    Ok(())
}
