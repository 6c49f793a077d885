//! Coarse convergence map of the three-species model around `x(0) = (1, 1.4, 1.4)`.

use koopman_lab::nip::{guaranteed_radius, in_guaranteed_ball};
use koopman_lab::population::{convergence_scan, benchmark_model, ScanSettings, Verdict};

fn main() -> koopman_lab::Result<()> {
    let model = benchmark_model();
    let axis: Vec<f64> = (0..8).map(|k| 0.6 + 0.2 * k as f64).collect();
    let settings = ScanSettings { x2: axis.clone(), x3: axis.clone(), ..Default::default() };
    let scan = convergence_scan(&model, &settings, 4)?;
    println!("guaranteed radius in mode coordinates: {:.4}", guaranteed_radius(&model));
    println!("rows x2, columns x3; C = Carleman converged, K = interaction picture converged");
    for (a, x2) in axis.iter().enumerate() {
        let row: Vec<String> = (0..axis.len())
            .map(|b| {
                let cell = scan.cell(a, b);
                let mark = |v: Verdict, s: &str| if v == Verdict::Converged { s.to_string() } else { ".".into() };
                format!("{}{}", mark(cell.carleman, "C"), mark(cell.nip, "K"))
            })
            .collect();
        println!("{x2:.1}  {}", row.join(" "));
    }
    println!("(1, 1, 1) inside the ball: {}", in_guaranteed_ball(&model, &[1.0, 1.0, 1.0])?);
    Ok(())
}
