//! Windowed frequency estimation for a normal generator with two
//! oscillatory and three decaying modes.

use koopman_lab::linalg::C64;
use koopman_lab::spectral::{
    ball_mass, emulate_spectral_qka, kaiser_window, lookup_calibration, sample_outcomes, sup_tail_mass,
    suppression_time, Mode, NormalKoopman,
};

fn main() -> koopman_lab::Result<()> {
    let cal = lookup_calibration(0.05, 1e-4).expect("table entry");
    let window = kaiser_window(cal.len, cal.sigma)?;
    println!("J = {}, sigma = {}, sup tail mass {:.2e}", cal.len, cal.sigma, sup_tail_mass(&window, 0.05, 200)?);

    let raw = [(0.0, 0.5, 0.5), (0.0, -1.2, 0.6), (1.0, 0.3, 0.3), (1.5, -0.7, 0.4), (2.0, 2.0, 0.37)];
    let norm = raw.iter().map(|m| m.2 * m.2).sum::<f64>().sqrt();
    let modes = NormalKoopman::new(raw.iter().map(|&(mu, w, a)| Mode::new(mu, w, C64::new(a / norm, 0.0))).collect())?;
    let t1 = suppression_time(modes.gap().expect("decaying modes"), 1e-3)?;
    let em = emulate_spectral_qka(&modes, &window, t1, 1.0)?;
    println!("T1 = {t1:.3}, total variation to ideal {:.2e}", em.tv_to_ideal);
    for m in modes.oscillatory() {
        let target = m.amplitude.norm_sqr() / modes.oscillatory_weight();
        println!("omega {:+.2}: ball mass {:.5} (weight {:.5})", m.omega, ball_mass(&em.p, m.omega, 0.05)?, target);
    }
    let counts = sample_outcomes(&em.p, 10_000, 1)?;
    let (best, _) = counts.iter().enumerate().max_by_key(|c| *c.1).expect("nonempty");
    println!("most frequent bin {best} with {} of 10000 shots", counts[best]);
    Ok(())
}
