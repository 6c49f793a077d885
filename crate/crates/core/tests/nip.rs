use koopman_lab::nip::{
    eta_to_y_back, guaranteed_radius, in_guaranteed_ball, koopman_tensors, nip_evolve, r_number_nip,
    reference_eta, reference_y, vacancy_taylor_tensors, y_to_eta, PopulationModel,
};
use koopman_lab::polyflow::uniform_grid;
use koopman_lab::population::benchmark_model;
use koopman_lab::linalg::C64;
use proptest::prelude::*;

fn random_model() -> impl Strategy<Value = PopulationModel> {
    (
        prop::collection::vec(1.0..5.0f64, 3),
        prop::collection::vec(0.5..2.0f64, 3),
        prop::collection::vec(-0.5..0.5f64, 27),
    )
        .prop_map(|(r, x, j)| {
            let coupling: Vec<_> = (0..27).map(|n| (n / 9, (n / 3) % 3, n % 3, j[n])).collect();
            PopulationModel::new(r, x, &coupling).unwrap()
        })
}

fn delta(a: usize, b: usize) -> f64 {
    if a == b { 1.0 } else { 0.0 }
}

/// Entry `[F_n]_{i, cols}` from the closed-form Kronecker-delta expressions.
fn explicit_entry(model: &PopulationModel, i: usize, cols: &[usize]) -> f64 {
    let d = model.dim();
    let r = model.rates();
    let x = model.capacities();
    let jt = |i: usize, j: usize, k: usize| model.coupling().get(i, &[j, k]).re;
    match cols.len() {
        1 => -r[i] * delta(i, cols[0]),
        2 => r[i] * delta(i, cols[0]) * delta(i, cols[1]) + x[i] * jt(i, cols[0], cols[1]),
        n => {
            let (j, k) = (cols[0], cols[1]);
            let s = &cols[2..];
            let dl = |a: usize, b: usize| delta(a, b);
            let shape = match n {
                3 => -2.0 * dl(i, s[0]) + dl(j, s[0]) + dl(k, s[0]),
                4 => {
                    let (l, m) = (s[0], s[1]);
                    dl(k, l) * dl(k, m) + dl(j, l) * dl(k, m) + dl(j, l) * dl(j, m)
                        - 2.0 * dl(i, l) * (dl(j, m) + dl(k, m))
                        + dl(i, l) * dl(i, m)
                }
                5 => {
                    let (l, m, q) = (s[0], s[1], s[2]);
                    dl(k, l) * dl(k, m) * dl(k, q)
                        + dl(j, l) * dl(k, m) * dl(k, q)
                        + dl(j, l) * dl(j, m) * dl(k, q)
                        + dl(j, l) * dl(j, m) * dl(j, q)
                        - 2.0 * dl(i, l) * (dl(j, m) * dl(j, q) + dl(j, m) * dl(k, q) + dl(k, m) * dl(k, q))
                        + dl(i, l) * dl(i, m) * (dl(j, q) + dl(k, q))
                }
                _ => unreachable!(),
            };
            assert!(j < d && k < d);
            x[i] * jt(i, j, k) * shape
        }
    }
}

fn multi_indices(d: usize, n: usize) -> Vec<Vec<usize>> {
    (0..d.pow(n as u32))
        .map(|mut flat| {
            let mut idx = vec![0; n];
            for slot in idx.iter_mut().rev() {
                *slot = flat % d;
                flat /= d;
            }
            idx
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn vacancy_tensors_match_delta_formulas(model in random_model()) {
        let sys = vacancy_taylor_tensors(&model, 5).unwrap();
        for n in 1..=5 {
            let t = sys.tensor(n).unwrap();
            for i in 0..3 {
                for cols in multi_indices(3, n) {
                    let got = t.get(i, &cols);
                    let expect = explicit_entry(&model, i, &cols);
                    prop_assert!(got.im == 0.0);
                    prop_assert!((got.re - expect).abs() <= 1e-12 * (1.0 + expect.abs()), "F{n}[{i},{cols:?}]: {got} vs {expect}");
                }
            }
        }
    }

    #[test]
    fn coordinate_round_trip(model in random_model(), x in prop::collection::vec(0.2..3.0f64, 3)) {
        let y = model.x_to_y(&x).unwrap();
        let eta = model.x_to_eta(&x).unwrap();
        let eta_from_y = y_to_eta(&y).unwrap();
        let back = model.eta_to_x(&eta).unwrap();
        for k in 0..3 {
            prop_assert!((eta[k] - eta_from_y[k]).abs() <= 1e-14 * (1.0 + eta[k].abs()));
            prop_assert!((back[k] - x[k]).abs() <= 1e-14 * (1.0 + x[k]));
        }
        for (a, b) in model.y_to_x(&y).unwrap().iter().zip(&x) {
            prop_assert!((a - b).abs() <= 1e-14 * (1.0 + b));
        }
    }

    #[test]
    fn mode_dynamics_reproduce_population_flow(model in random_model(), x in prop::collection::vec(0.7..1.4f64, 3)) {
        let times = uniform_grid(0.5, 10);
        let y = reference_y(&model, &x, &times, 1e-12).unwrap();
        let eta = reference_eta(&model, &x, &times, 1e-12).unwrap();
        prop_assume!(!y.is_diverged() && !eta.is_diverged());
        for (ys, es) in y.states.iter().zip(&eta.states) {
            let g: Vec<f64> = es.iter().map(|z| z.re).collect();
            let back = eta_to_y_back(&g).unwrap();
            for (a, b) in ys.iter().zip(&back) {
                prop_assert!((a.re - b).abs() <= 1e-8, "{} vs {b}", a.re);
            }
        }
    }
}

#[test]
fn benchmark_model_generators() {
    let model = benchmark_model();
    let (g1, g2) = koopman_tensors(&model);
    let expect = [-95.4912, -48.8281, -30.1714];
    for i in 0..3 {
        assert_eq!(g1[(i, i)], C64::new(expect[i], 0.0));
    }
    assert_eq!(g2.get(0, &[1, 1]).re, 983.541);
    let radius = guaranteed_radius(&model);
    assert!((radius * radius / 7.5758e-4 - 1.0).abs() < 1e-3);
    let scale = r_number_nip(&model, &[1.0, 0.0, 0.0]).unwrap();
    assert!((scale / 36.3316 - 1.0).abs() < 1e-3);
}

#[test]
fn interaction_free_limits() {
    let model = PopulationModel::new(vec![2.0, 3.0, 4.0], vec![1.0, 2.0, 0.5], &[]).unwrap();
    let sys = vacancy_taylor_tensors(&model, 5).unwrap();
    for n in 3..=5 {
        assert!(sys.tensor(n).is_none_or(|t| t.is_zero()), "F{n} should vanish");
    }
    let (_, g2) = koopman_tensors(&model);
    assert!(g2.is_zero());
    assert_eq!(r_number_nip(&model, &[0.1, 0.2, 0.3]).unwrap(), 0.0);
    let tol = 1e-10;
    let times = uniform_grid(1.0, 20);
    for order in [1, 2, 4] {
        let run = nip_evolve(&model, &[0.6, 1.5, 0.9], order, &times, tol).unwrap();
        assert!(run.max_error <= 10.0 * tol, "order {order}: {}", run.max_error);
    }
}

#[test]
fn unit_capacities_copy_coupling() {
    let coupling = [(0, 1, 2, 0.7), (2, 0, 0, -0.3)];
    let model = PopulationModel::new(vec![1.0, 1.0, 1.0], vec![1.0, 1.0, 1.0], &coupling).unwrap();
    let (_, g2) = koopman_tensors(&model);
    for (i, j, k, v) in coupling {
        assert_eq!(g2.get(i, &[j, k]).re, v);
    }
}

#[test]
fn higher_order_helps_inside_guaranteed_ball() {
    let model = benchmark_model();
    let times = uniform_grid(0.1, 200);
    let points = [[1.0, 1.0 / 1.015, 1.0 / 0.99], [1.0 / 1.01, 1.0 / 1.01, 1.0 / 1.01], [1.0, 1.0, 1.0 / 1.02]];
    for x0 in points {
        assert!(in_guaranteed_ball(&model, &x0).unwrap());
        let low = nip_evolve(&model, &x0, 2, &times, 1e-10).unwrap();
        let high = nip_evolve(&model, &x0, 6, &times, 1e-10).unwrap();
        assert!(high.max_error <= low.max_error, "{x0:?}: {} > {}", high.max_error, low.max_error);
    }
}

#[test]
fn fixed_point_has_zero_error() {
    let model = benchmark_model();
    let run = nip_evolve(&model, &[1.0, 1.0, 1.0], 3, &uniform_grid(0.1, 10), 1e-10).unwrap();
    assert_eq!(run.max_error, 0.0);
}
