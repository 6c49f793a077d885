//! Two long runs of the three-species model: one relaxes to the carrying
//! capacities, the other keeps wandering.

use koopman_lab::population::{chaos_demo, benchmark_model};

fn main() -> koopman_lab::Result<()> {
    let model = benchmark_model();
    for x0 in [[1.0, 1.4, 1.4], [0.048, 1.3, 0.025]] {
        let run = chaos_demo(&model, &x0, 200.0, 400)?;
        println!(
            "x0 = {x0:?}: distance from capacities at t = 200 is {:.3e} ({})",
            run.final_distance,
            if run.unsettled { "unsettled" } else { "settled" }
        );
    }
    Ok(())
}
