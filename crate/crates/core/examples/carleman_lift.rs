//! Carleman lift of a scalar logistic equation `ẋ = −x + x²`: truncation
//! error per order and the matrix-free operator against its dense form.

use koopman_lab::carleman::{build_carleman, initial_lift, truncation_error};
use koopman_lab::linalg::C64;
use koopman_lab::polyflow::{quadratic_r_number, uniform_grid, PolySystem, SparseTensor};

fn main() -> koopman_lab::Result<()> {
    let c = |v: f64| C64::new(v, 0.0);
    let f1 = SparseTensor::from_entries(1, 1, [(0, vec![0], c(-1.0))])?;
    let f2 = SparseTensor::from_entries(1, 2, [(0, vec![0, 0], c(1.0))])?;
    let sys = PolySystem::from_tensors(1, [f1, f2.clone()])?;
    let x0 = [c(0.4)];
    println!("R-number: {:.3}", quadratic_r_number(&[c(0.0)], &sys.linear_part(), &f2, &x0)?);

    let times = uniform_grid(3.0, 60);
    let reference = sys.integrate_reference(&x0, &times, 1e-12)?;
    for order in [1, 2, 4, 8] {
        let op = build_carleman(&sys, order)?;
        let lifted = op.evolve_first_block(&initial_lift(&x0, order)?, &times, 1e-12)?;
        let (_, err) = truncation_error(&reference, &lifted, |g| g.to_vec())?;
        println!("order {order:2}  lifted dim {:3}  max error {err:.3e}", op.total_dim());
    }

    let op = build_carleman(&sys, 4)?;
    let dense = op.to_dense()?;
    let g = initial_lift(&x0, 4)?;
    let applied = op.apply(&g)?;
    let via_dense = &dense * koopman_lab::linalg::CVec::from_column_slice(g.data());
    let diff = applied.data().iter().zip(via_dense.iter()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    println!("matrix-free vs dense apply: {diff:.1e}");
    Ok(())
}
