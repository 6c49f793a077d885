use koopman_lab::linalg::{expm, log_norm, spectral_norm, CMat, C64};
use koopman_lab::polyflow::{kron_power, PolySystem, SparseTensor};
use koopman_lab::population::benchmark_model;
use koopman_lab::nip::koopman_tensors;
use proptest::prelude::*;

fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

fn tensor_strategy(dim: usize, degree: usize) -> impl Strategy<Value = SparseTensor> {
    let entry = (0..dim, prop::collection::vec(0..dim, degree), -2.0..2.0f64, -2.0..2.0f64);
    prop::collection::vec(entry, 0..8).prop_map(move |entries| {
        SparseTensor::from_entries(dim, degree, entries.into_iter().map(|(i, js, re, im)| (i, js, C64::new(re, im))))
            .unwrap()
    })
}

fn system_of(dim: usize, tensors: &[SparseTensor]) -> PolySystem {
    PolySystem::from_tensors(dim, tensors.iter().cloned()).unwrap()
}

fn close(a: &[C64], b: &[C64], tol: f64) -> bool {
    a.iter().zip(b).all(|(x, y)| (x - y).norm() <= tol * (1.0 + y.norm()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rhs_superposes_across_degrees(
        (dim, t1, t2, t3) in (1usize..=4).prop_flat_map(|d| (Just(d), tensor_strategy(d, 1), tensor_strategy(d, 2), tensor_strategy(d, 3))),
        s in -3.0..3.0f64,
    ) {
        let x: Vec<C64> = (0..dim).map(|k| C64::new(0.3 * k as f64 - 0.4, 0.1 * k as f64)).collect();

        let whole = system_of(dim, &[t1.clone(), t2.clone(), t3.clone()]).eval_rhs(&x).unwrap();
        let parts: Vec<Vec<C64>> = [&t1, &t2, &t3]
            .iter()
            .map(|t| system_of(dim, &[(*t).clone()]).eval_rhs(&x).unwrap())
            .collect();
        let sum: Vec<C64> = (0..dim).map(|i| parts.iter().map(|p| p[i]).sum()).collect();
        prop_assert!(close(&whole, &sum, 1e-12));

        // scaling one tensor scales only its own contribution
        let scaled = system_of(dim, &[t1.clone(), t2.scaled(c(s)), t3.clone()]).eval_rhs(&x).unwrap();
        let expect: Vec<C64> = (0..dim).map(|i| parts[0][i] + parts[1][i] * s + parts[2][i]).collect();
        prop_assert!(close(&scaled, &expect, 1e-12));
    }

    #[test]
    fn linear_flow_matches_matrix_exponential(
        entries in prop::collection::vec(-0.5..0.5f64, 16),
        x0 in prop::collection::vec(-1.0..1.0f64, 4),
        t in 0.0..2.0f64,
    ) {
        let a = CMat::from_fn(4, 4, |i, j| c(entries[i * 4 + j]));
        prop_assume!(spectral_norm(&a) <= 2.0);
        let t1 = SparseTensor::from_entries(
            4,
            1,
            (0..16).map(|k| (k / 4, vec![k % 4], c(entries[k]))),
        ).unwrap();
        let sys = system_of(4, &[t1]);
        let z0: Vec<C64> = x0.iter().map(|&v| c(v)).collect();
        let tol = 1e-10;
        let tr = sys.integrate_reference(&z0, &[0.0, t], tol).unwrap();
        let exact = expm(&(&a * c(t))) * koopman_lab::linalg::CVec::from_vec(z0);
        for (x, e) in tr.last().iter().zip(exact.iter()) {
            prop_assert!((x - e).norm() <= 10.0 * tol, "{x} vs {e}");
        }
    }

    #[test]
    fn log_norm_bounds_spectral_abscissa(entries in prop::collection::vec(-3.0..3.0f64, 50)) {
        let m = CMat::from_fn(5, 5, |i, j| C64::new(entries[i * 5 + j], entries[25 + i * 5 + j]));
        let mu = log_norm(&m).unwrap();
        let abscissa = m.clone().schur().eigenvalues().unwrap().iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(mu >= abscissa - 1e-10, "{mu} < {abscissa}");
    }
}

#[test]
fn kron_power_exhaustive() {
    let v = [C64::new(0.5, 0.25), C64::new(-1.5, 0.0), C64::new(2.0, -1.0)];
    for k in 1..=4u32 {
        let p = kron_power(&v, k as usize).unwrap();
        assert_eq!(p.len(), 3usize.pow(k));
        for (flat, got) in p.iter().enumerate() {
            let mut rest = flat;
            let mut expect = C64::new(1.0, 0.0);
            let mut digits = Vec::new();
            for _ in 0..k {
                digits.push(rest % 3);
                rest /= 3;
            }
            // j₁ is the most significant digit
            for &j in digits.iter().rev() {
                expect *= v[j];
            }
            assert_eq!(*got, expect, "flat index {flat} at k = {k}");
        }
    }
}

#[test]
fn closed_form_flows() {
    let decay = system_of(1, &[SparseTensor::from_entries(1, 1, [(0, vec![0], c(-1.0))]).unwrap()]);
    let tr = decay.integrate_reference(&[c(1.0)], &[0.0, 1.0], 1e-12).unwrap();
    assert!((tr.last()[0].re - (-1.0f64).exp()).abs() < 1e-10);

    let logistic = system_of(
        1,
        &[
            SparseTensor::from_entries(1, 1, [(0, vec![0], c(1.0))]).unwrap(),
            SparseTensor::from_entries(1, 2, [(0, vec![0, 0], c(-1.0))]).unwrap(),
        ],
    );
    let tr = logistic.integrate_reference(&[c(0.5)], &[0.0, 3f64.ln()], 1e-12).unwrap();
    assert!((tr.last()[0].re - 0.75).abs() < 1e-9);

    let tr = logistic.integrate_reference(&[c(0.5)], &[0.0], 1e-12).unwrap();
    assert_eq!(tr.states, vec![vec![c(0.5)]]);
}

#[test]
fn koopman_quadratic_norm_matches_rate_scaled_value() {
    let model = benchmark_model();
    let (_, g2) = koopman_tensors(&model);
    let expect = 36.3316 * 30.1714;
    let got = g2.spectral_norm();
    assert!((got / expect - 1.0).abs() < 1e-3, "{got} vs {expect}");
}
