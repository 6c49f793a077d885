//! History-state linear system for a stable normal generator: Taylor
//! order against the distance to the exact flow, and the uniform family.

use koopman_lab::linalg::{CMat, C64};
use koopman_lab::spectral::{history_system, uniform_family, Mode, NormalKoopman};

fn main() -> koopman_lab::Result<()> {
    // damped rotation: eigenvalues −0.2 ± i
    let a = CMat::from_row_slice(2, 2, &[C64::new(-0.2, 0.0), C64::new(1.0, 0.0), C64::new(-1.0, 0.0), C64::new(-0.2, 0.0)]);
    let x0 = [C64::new(1.0, 0.0), C64::new(0.0, 0.0)];
    for l in [2, 4, 8, 12] {
        let (_, sol) = history_system(&a, &x0, 8, 8, l, 0.25)?;
        println!("l = {l:2}: |y_m - exact| = {:.3e}, recurrence residual {:.1e}", sol.exact_residuals[8], sol.recurrence_residual);
    }
    let family = uniform_family(2, 1, 5)?;
    let modes = NormalKoopman::new(vec![Mode::new(0.0, 1.0, C64::new(0.6, 0.0)), Mode::new(0.0, -0.4, C64::new(0.8, 0.0))])?;
    for (m, p) in family.members.iter().zip(family.post_selection_probabilities(&modes, 0.1)) {
        println!("m = {:2}, p = {:2}, d = {}: success probability {p:.6}", m.steps, m.padding, m.discard);
    }
    Ok(())
}
