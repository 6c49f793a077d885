//! Truncation error of the vacancy Taylor-Carleman lift and of the
//! interaction-picture lift at increasing order.

use koopman_lab::nip::{r_number_nip, PopulationModel};
use koopman_lab::population::{error_curve, benchmark_model};

fn main() -> koopman_lab::Result<()> {
    let model: PopulationModel = benchmark_model();
    let x0 = [1.0, 1.4, 1.4];
    let eta0 = model.x_to_eta(&x0)?;
    println!("R_K at x0: {:.4}", r_number_nip(&model, &eta0)?);
    println!("order  eps_carleman  eps_interaction");
    for (n, c, k) in error_curve(&model, &x0, &[1, 2, 3, 4, 6], 0.1, 200, 1e-10)? {
        println!("{n:5}  {c:12.4e}  {k:15.4e}");
    }
    Ok(())
}
