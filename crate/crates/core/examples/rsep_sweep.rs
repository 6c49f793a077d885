//! R-numbers of the Riccati family before and after the projective change
//! of variables.

use koopman_lab::rsep::{haar_unitary, sweep_point, RsepParams};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> koopman_lab::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    println!("beta  gamma  delta  R_x         R_eta    residual");
    for (beta, gamma, delta) in [(2.0, 3.0, 0.5), (5.0, 10.0, 0.1), (10.0, 20.0, 0.1)] {
        let mut p = RsepParams::new(4, beta, gamma, delta)?;
        p.a = haar_unitary(4, &mut rng);
        let row = sweep_point(&p, 1.0, 20)?;
        println!(
            "{beta:4}  {gamma:5}  {delta:5}  {:10.2}  {:.5}  {:.1e}",
            row.r_x, row.r_eta, row.equiv_residual
        );
    }
    Ok(())
}
