use koopman_lab::carleman::{build_carleman, carleman_dimension, initial_lift, truncation_error, LiftedState};
use koopman_lab::linalg::{expm, CMat, CVec, C64, ZERO};
use koopman_lab::polyflow::{kron_power, PolySystem, SparseTensor};
use koopman_lab::Error;
use proptest::prelude::*;

fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

fn tensor_strategy(dim: usize, degree: usize) -> impl Strategy<Value = SparseTensor> {
    let entry = (0..dim, prop::collection::vec(0..dim, degree), -1.0..1.0f64, -1.0..1.0f64);
    prop::collection::vec(entry, 1..10).prop_map(move |entries| {
        SparseTensor::from_entries(dim, degree, entries.into_iter().map(|(i, js, re, im)| (i, js, C64::new(re, im))))
            .unwrap()
    })
}

/// Random system with degrees 1..=3 and a Carleman order keeping `D ≤ 500`.
fn lifted_case() -> impl Strategy<Value = (PolySystem, usize, Vec<C64>)> {
    (1usize..=4)
        .prop_flat_map(|d| {
            let max_order = (1..=8).take_while(|&n| carleman_dimension(d, n).unwrap() <= 500).last().unwrap();
            (
                Just(d),
                1..=max_order,
                tensor_strategy(d, 1),
                tensor_strategy(d, 2),
                tensor_strategy(d, 3),
                prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), d),
            )
        })
        .prop_map(|(d, order, t1, t2, t3, z)| {
            let sys = PolySystem::from_tensors(d, [t1, t2, t3]).unwrap();
            (sys, order, z.into_iter().map(|(a, b)| C64::new(a, b)).collect())
        })
}

fn linear_system(a: &CMat) -> PolySystem {
    let d = a.nrows();
    let t = SparseTensor::from_entries(d, 1, (0..d * d).map(|k| (k / d, vec![k % d], a[(k / d, k % d)]))).unwrap();
    PolySystem::from_tensors(d, [t]).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn matrix_free_apply_matches_dense((sys, order, _z) in lifted_case()) {
        let op = build_carleman(&sys, order).unwrap();
        let total = op.total_dim();
        let g: Vec<C64> = (0..total).map(|k| C64::new((k as f64 * 0.37).sin(), (k as f64 * 0.11).cos())).collect();
        let mut out = vec![ZERO; total];
        op.apply_into(&g, &mut out);
        let dense = op.to_dense().unwrap() * CVec::from_vec(g);
        for (a, b) in out.iter().zip(dense.iter()) {
            prop_assert!((a - b).norm() <= 1e-12 * (1.0 + b.norm()));
        }
    }

    #[test]
    fn lift_blocks_are_tensor_powers((sys, order, z) in lifted_case()) {
        let g = initial_lift(&z, order).unwrap();
        prop_assert_eq!(g.data().len(), carleman_dimension(sys.dim(), order).unwrap());
        for k in 1..=order {
            prop_assert_eq!(g.block(k).to_vec(), kron_power(g.block(1), k).unwrap());
        }
    }

    #[test]
    fn first_block_derivative_matches_rhs((sys, order, z) in lifted_case()) {
        prop_assume!(sys.dim() <= 3 && order <= 4);
        let op = build_carleman(&sys, order).unwrap();
        let g = initial_lift(&z, order).unwrap();
        let dg = op.apply(&g).unwrap();
        // reference keeps only the degrees the lift can represent
        let kept: Vec<SparseTensor> = sys.tensors().iter().filter(|t| t.degree() <= order).cloned().collect();
        let truncated = PolySystem::from_tensors(sys.dim(), kept).unwrap();
        let f = truncated.eval_rhs(&z).unwrap();
        for (a, b) in dg.block(1).iter().zip(&f) {
            prop_assert!((a - b).norm() <= 1e-13 * (1.0 + b.norm()));
        }
    }

    #[test]
    fn operator_is_upper_block_triangular((sys, order, _z) in lifted_case()) {
        let op = build_carleman(&sys, order).unwrap();
        let dense = op.to_dense().unwrap();
        let offsets = op.offsets().to_vec();
        for i in 0..order {
            for j in 0..i {
                let block = dense.view((offsets[i], offsets[j]), (offsets[i + 1] - offsets[i], offsets[j + 1] - offsets[j]));
                prop_assert!(block.iter().all(|z| *z == ZERO));
            }
        }
    }
}

#[test]
fn dimensions() {
    assert_eq!(carleman_dimension(3, 1).unwrap(), 3);
    assert_eq!(carleman_dimension(3, 6).unwrap(), 1092);
    assert_eq!(carleman_dimension(2, 3).unwrap(), 14);
    assert!(matches!(carleman_dimension(3, 20), Err(Error::Overflow { .. })));
}

#[test]
fn linear_lift_is_block_diagonal_kronecker_sum() {
    let a = CMat::from_row_slice(2, 2, &[c(-1.0), c(0.5), c(0.2), c(-2.0)]);
    let op = build_carleman(&linear_system(&a), 2).unwrap();
    let dense = op.to_dense().unwrap();
    let id = CMat::identity(2, 2);
    let sum = koopman_lab::linalg::kron(&a, &id) + koopman_lab::linalg::kron(&id, &a);
    let mut expect = CMat::zeros(6, 6);
    expect.view_mut((0, 0), (2, 2)).copy_from(&a);
    expect.view_mut((2, 2), (4, 4)).copy_from(&sum);
    assert_eq!(dense, expect);
}

#[test]
fn scalar_logistic_lift() {
    let r = 1.0;
    let sys = PolySystem::from_tensors(
        1,
        [
            SparseTensor::from_entries(1, 1, [(0, vec![0], c(-r))]).unwrap(),
            SparseTensor::from_entries(1, 2, [(0, vec![0, 0], c(r))]).unwrap(),
        ],
    )
    .unwrap();
    let dense = build_carleman(&sys, 2).unwrap().to_dense().unwrap();
    assert_eq!(dense, CMat::from_row_slice(2, 2, &[c(-r), c(r), c(0.0), c(-2.0 * r)]));

    let z0 = 0.1;
    let op = build_carleman(&sys, 8).unwrap();
    let tr = op.evolve_first_block(&initial_lift(&[c(z0)], 8).unwrap(), &[0.0, 1.0], 1e-12).unwrap();
    let e = (-r).exp();
    let exact = z0 * e / (1.0 - z0 + z0 * e);
    assert!((tr.last()[0].re - exact).abs() < 1e-4);
}

#[test]
fn linear_dynamics_close_exactly() {
    let a = CMat::from_row_slice(
        3,
        3,
        &[c(-0.5), c(0.3), c(0.0), c(-0.3), c(-0.4), c(0.2), c(0.1), c(0.0), c(-1.0)],
    );
    let z0 = vec![c(0.4), c(-0.2), c(0.7)];
    let times: Vec<f64> = (0..=10).map(|k| k as f64 * 0.2).collect();
    let tol = 1e-10;
    let exact = linear_system(&a).integrate_reference(&z0, &times, 1e-12).unwrap();
    for order in 1..=4 {
        let op = build_carleman(&linear_system(&a), order).unwrap();
        let tr = op.evolve(&initial_lift(&z0, order).unwrap(), &times, tol).unwrap();
        let (_, eps) = truncation_error(&exact, &tr, |g| g.to_vec()).unwrap();
        assert!(eps <= 10.0 * tol, "order {order}: {eps}");
        let analytic = expm(&(&a * c(2.0))) * CVec::from_vec(z0.clone());
        let last = &tr.last()[..3];
        assert!(last.iter().zip(analytic.iter()).all(|(x, y)| (x - y).norm() <= 10.0 * tol));
    }
}

#[test]
fn zero_inputs() {
    let a = CMat::identity(2, 2) * c(-1.0);
    let op = build_carleman(&linear_system(&a), 3).unwrap();
    let zero = LiftedState::from_data(2, 3, vec![ZERO; 14]).unwrap();
    assert!(op.apply(&zero).unwrap().data().iter().all(|z| *z == ZERO));
    assert!(initial_lift(&[ZERO, ZERO], 3).unwrap().data().iter().all(|z| *z == ZERO));
    assert!(initial_lift(&[c(1.0)], 5).unwrap().data().iter().all(|z| *z == c(1.0)));
    let g = initial_lift(&[c(1.0), c(2.0)], 2).unwrap();
    assert_eq!(g.data(), &[c(1.0), c(2.0), c(1.0), c(2.0), c(2.0), c(4.0)]);
    let tr = op.evolve(&initial_lift(&[c(0.3), c(0.1)], 3).unwrap(), &[0.0], 1e-10).unwrap();
    assert_eq!(tr.states[0], initial_lift(&[c(0.3), c(0.1)], 3).unwrap().data());
}

#[test]
fn constant_term_rejected() {
    let sys = PolySystem::from_tensors(1, [SparseTensor::from_entries(1, 0, [(0, vec![], c(1.0))]).unwrap()]).unwrap();
    assert!(matches!(build_carleman(&sys, 2), Err(Error::NonzeroConstantTerm)));
}
