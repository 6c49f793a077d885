use koopman_lab::fermion::{
    chain_example, commuting_system, decay_spectrum, energy, evolve_covariance, evolve_covariance_vectorized,
    exact_lindblad_oracle, heat_per_fermion, lindblad_gap, oracle_energy, pure_state, random_orthogonal,
    random_system, steady_state, CovarianceState, FermionSystem,
};
use koopman_lab::linalg::{max_abs_real, RMat, C64};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn random_gamma(modes: usize, rng: &mut ChaCha8Rng) -> CovarianceState {
    CovarianceState::random_pure(modes, rng)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn matrix_and_vectorized_paths_agree(seed in any::<u64>(), modes in 1usize..=3, jumps in 0usize..=3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sys = random_system(modes, jumps, &mut rng);
        let g0 = random_gamma(modes, &mut rng);
        let times = [0.0, 0.3, 1.0, 2.0];
        let a = evolve_covariance(&sys, &g0, &times, 1e-12).unwrap();
        let b = evolve_covariance_vectorized(&sys, &g0, &times, 1e-12).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!(max_abs_real(&(x.matrix() - y.matrix())) <= 1e-9);
        }
    }

    #[test]
    fn antisymmetry_survives_long_runs(seed in any::<u64>(), modes in 1usize..=4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sys = random_system(modes, 2, &mut rng);
        let g0 = random_gamma(modes, &mut rng);
        let times: Vec<f64> = (0..=20).map(|k| 0.5 * k as f64).collect();
        for g in evolve_covariance(&sys, &g0, &times, 1e-10).unwrap() {
            let m = g.matrix();
            prop_assert!(max_abs_real(&(m + m.transpose())) <= 1e-10);
        }
    }
}

#[test]
fn single_complex_jump_assembly() {
    let sys = FermionSystem::new(RMat::zeros(2, 2), vec![vec![C64::new(1.0, 0.0), C64::new(0.0, 1.0)]]).unwrap();
    assert_eq!(sys.x(), &(RMat::identity(2, 2) * 2.0));
    assert_eq!(sys.y(), &RMat::from_row_slice(2, 2, &[0.0, -4.0, 4.0, 0.0]));

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let h = random_system(2, 0, &mut rng).h().clone();
    let closed = FermionSystem::new(h.clone(), vec![]).unwrap();
    assert!(max_abs_real(closed.x()) == 0.0 && max_abs_real(closed.y()) == 0.0);
    assert_eq!(closed.b(), &h);
    let real = FermionSystem::new(h, vec![vec![C64::new(0.3, 0.0), C64::new(-0.2, 0.0), C64::new(0.5, 0.0), C64::new(0.1, 0.0)]]).unwrap();
    assert_eq!(max_abs_real(real.y()), 0.0);
}

#[test]
fn chain_structure() {
    let (h, jumps) = chain_example(2, 1.0, (0.0, 0.0)).unwrap();
    let nonzero = h.iter().filter(|v| **v != 0.0).count();
    assert_eq!(nonzero, 2);
    assert!(jumps.is_empty());
    let (h, _) = chain_example(6, 0.7, (0.2, 0.4)).unwrap();
    for r in 0..12 {
        assert!(h.row(r).iter().filter(|v| **v != 0.0).count() <= 4);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (h, jumps) = chain_example(3, 1.0, (0.0, 0.0)).unwrap();
    let closed = FermionSystem::new(h, jumps).unwrap();
    let g0 = random_gamma(3, &mut rng);
    assert!(heat_per_fermion(&closed, &g0, 2.0, 1e-12).unwrap().abs() <= 1e-10);
}

#[test]
fn lossy_chain_matches_fock_space() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (h, jumps) = chain_example(3, 1.0, (0.3, 0.0)).unwrap();
    let sys = FermionSystem::new(h, jumps).unwrap();
    let rho = pure_state(3, &mut rng);
    let times = [0.0, 0.5, 1.0];
    let oracle = exact_lindblad_oracle(&sys, &rho, &times).unwrap();
    let ode = evolve_covariance(&sys, &oracle.gammas[0], &times, 1e-12).unwrap();
    for (a, b) in ode.iter().zip(&oracle.gammas) {
        assert!(max_abs_real(&(a.matrix() - b.matrix())) <= 1e-6);
    }
}

#[test]
fn heat_matches_oracle_energy() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let sys = random_system(3, 2, &mut rng);
    let rho = pure_state(3, &mut rng);
    let oracle = exact_lindblad_oracle(&sys, &rho, &[0.0, 1.0]).unwrap();
    let g0 = &oracle.gammas[0];
    assert!((energy(sys.h(), g0.matrix()) - oracle_energy(&sys, &rho).unwrap()).abs() < 1e-12);
    let q_oracle = (oracle.energies[0] - oracle.energies[1]) / 3.0;
    let q = heat_per_fermion(&sys, g0, 1.0, 1e-12).unwrap();
    assert!((q - q_oracle).abs() <= 1e-8, "{q} vs {q_oracle}");
    assert_eq!(energy(sys.h(), &RMat::zeros(6, 6)), 0.0);
}

fn rotated_commuting(seed: u64) -> FermionSystem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let q = random_orthogonal(6, &mut rng);
    commuting_system(&[0.7, 1.3, 2.1], &[0.5, 0.6, 0.8], Some(&q)).unwrap()
}

#[test]
fn relaxation_rate_is_at_least_the_gap() {
    let sys = rotated_commuting(23);
    let mut rng = ChaCha8Rng::seed_from_u64(29);
    let g0 = random_gamma(3, &mut rng);
    let inf = steady_state(&sys).unwrap();
    let gap = lindblad_gap(&sys);
    let times: Vec<f64> = (0..=40).map(|k| k as f64 * 5.0 / gap / 40.0).collect();
    let traj = evolve_covariance(&sys, &g0, &times, 1e-12).unwrap();
    let logs: Vec<f64> = traj.iter().map(|g| (g.matrix() - inf.matrix()).norm().ln()).collect();
    let n = times.len() as f64;
    let (mt, ml) = (times.iter().sum::<f64>() / n, logs.iter().sum::<f64>() / n);
    let cov: f64 = times.iter().zip(&logs).map(|(t, l)| (t - mt) * (l - ml)).sum();
    let var: f64 = times.iter().map(|t| (t - mt).powi(2)).sum();
    let slope = cov / var;
    assert!(-slope >= gap * 0.99, "rate {} < gap {gap}", -slope);
}

#[test]
fn steady_state_limits() {
    let sys = rotated_commuting(31);
    let inf = steady_state(&sys).unwrap();
    let g = inf.matrix();
    let residual = sys.b() * g + g * sys.b().transpose() + sys.y();
    assert!(max_abs_real(&residual) <= 1e-10);

    // B = −I from two real jumps of weight 1/2 gives Y = 0 and Γ∞ = 0
    let half = 0.5f64.sqrt();
    let damped = FermionSystem::new(
        RMat::zeros(2, 2),
        vec![vec![C64::new(half, 0.0), C64::new(0.0, 0.0)], vec![C64::new(0.0, 0.0), C64::new(half, 0.0)]],
    )
    .unwrap();
    assert_eq!(max_abs_real(steady_state(&damped).unwrap().matrix()), 0.0);
}

#[test]
fn decay_weights_are_parseval_complete() {
    let sys = rotated_commuting(37);
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let g0 = random_gamma(3, &mut rng);
    let spec = decay_spectrum(&sys, &g0).unwrap();
    assert!((spec.total_weight() - g0.matrix().norm_squared()).abs() <= 1e-10);
    assert!(spec.components.iter().all(|c| c.rate >= -1e-12));
    assert!(spec.components.windows(2).all(|w| w[0].weight >= w[1].weight));
    assert!((spec.gap - lindblad_gap(&sys)).abs() < 1e-10);
}
