//! The three-species chaotic population model, convergence scans over initial
//! conditions and trajectory comparisons between the two lifting strategies.

use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::nip::{
    carleman_evolve_against, nip_evolve_against, reference_y, LiftedRun, PopulationModel,
};
use crate::polyflow::{fmt_f64, integrate, uniform_grid, IntegratorOptions, Trajectory};

/// Tolerance of every "exact" trajectory.
pub const REFERENCE_TOL: f64 = 1e-12;

/// Errors at or below this are treated as zero when comparing orders; an
/// initial condition at the fixed point would otherwise compare `0 < 0`.
pub const NOISE_FLOOR: f64 = 1e-8;

const RATES: [f64; 3] = [95.4912, 48.8281, 30.1714];

/// Rows `i`, columns `(j, k)` in the order (1,1),(1,2),…,(3,3).
const COUPLINGS: [[f64; 9]; 3] = [
    [-0.264803, -13.6839, 0.931878, 0.0, 983.541, 69.1103, 0.0, 0.0, 1.26601],
    [0.00120019, -1.26625, -0.00141069, 0.0, 46.6796, 2.29013, 0.0, 0.0, 0.000420895],
    [-1.10445, 42.4425, 0.203853, 0.0, -477.852, 17.3411, 0.0, 0.0, 1.28499],
];

/// The chaotic three-species model with unit carrying capacities.
pub fn benchmark_model() -> PopulationModel {
    let mut j = Vec::new();
    for (i, row) in COUPLINGS.iter().enumerate() {
        for (col, &v) in row.iter().enumerate() {
            if v != 0.0 {
                j.push((i, col / 3, col % 3, v));
            }
        }
    }
    PopulationModel::new(RATES.to_vec(), vec![1.0; 3], &j).expect("constants are valid")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Converged,
    Diverged,
    PoleInvalid,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Converged => "converged",
            Verdict::Diverged => "diverged",
            Verdict::PoleInvalid => "pole-invalid",
        }
    }

    /// Converged iff the higher order is strictly better and both errors are finite.
    pub fn from_errors(low: &LiftedRun, high: &LiftedRun) -> Self {
        if low.pole_samples > 0 || high.pole_samples > 0 {
            return Verdict::PoleInvalid;
        }
        Self::classify(low.max_error, high.max_error)
    }

    pub fn classify(low: f64, high: f64) -> Self {
        if !low.is_finite() || !high.is_finite() {
            Verdict::Diverged
        } else if high < low || high <= NOISE_FLOOR {
            Verdict::Converged
        } else {
            Verdict::Diverged
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanSettings {
    pub x1: f64,
    pub x2: Vec<f64>,
    pub x3: Vec<f64>,
    pub orders: (usize, usize),
    pub t_end: f64,
    pub tol: f64,
    /// Number of sampling intervals on `[0, t_end]`.
    pub samples: usize,
}

impl Default for ScanSettings {
    fn default() -> Self {
        let axis: Vec<f64> = (0..30).map(|k| 0.5 + 0.05 * k as f64).collect();
        Self { x1: 1.0, x2: axis.clone(), x3: axis, orders: (1, 3), t_end: 0.1, tol: 1e-10, samples: 200 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanCell {
    pub x2: f64,
    pub x3: f64,
    pub carleman: Verdict,
    pub nip: Verdict,
    pub eps_c: (f64, f64),
    pub eps_k: (f64, f64),
}

/// Per-cell verdicts; `cells[a * x3.len() + b]` belongs to `(x2[a], x3[b])`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanResult {
    pub settings: ScanSettings,
    pub cells: Vec<ScanCell>,
}

impl ScanResult {
    pub fn cell(&self, a: usize, b: usize) -> &ScanCell {
        &self.cells[a * self.settings.x3.len() + b]
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "x2,x3,carleman_verdict,nip_verdict,eps_c_low,eps_c_high,eps_k_low,eps_k_high")?;
        for c in &self.cells {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{}",
                fmt_f64(c.x2),
                fmt_f64(c.x3),
                c.carleman.as_str(),
                c.nip.as_str(),
                fmt_f64(c.eps_c.0),
                fmt_f64(c.eps_c.1),
                fmt_f64(c.eps_k.0),
                fmt_f64(c.eps_k.1)
            )?;
        }
        Ok(())
    }
}

/// Evaluates one initial condition with both lifts at the low and high orders.
pub fn scan_cell(model: &PopulationModel, x0: &[f64], s: &ScanSettings) -> Result<ScanCell> {
    let times = uniform_grid(s.t_end, s.samples);
    let reference = reference_y(model, x0, &times, REFERENCE_TOL)?;
    let (lo, hi) = s.orders;
    let c_lo = carleman_evolve_against(model, x0, lo, &reference, s.tol)?;
    let c_hi = carleman_evolve_against(model, x0, hi, &reference, s.tol)?;
    let k_lo = nip_evolve_against(model, x0, lo, &reference, s.tol)?;
    let k_hi = nip_evolve_against(model, x0, hi, &reference, s.tol)?;
    Ok(ScanCell {
        x2: x0[1],
        x3: x0[2],
        carleman: Verdict::from_errors(&c_lo, &c_hi),
        nip: Verdict::from_errors(&k_lo, &k_hi),
        eps_c: (c_lo.max_error, c_hi.max_error),
        eps_k: (k_lo.max_error, k_hi.max_error),
    })
}

/// Grid scan over `x(0) = (x1, x2, x3)`, evaluated on `threads` workers.
///
/// Cells are independent and collected by index, so the result does not
/// depend on the thread count.
pub fn convergence_scan(model: &PopulationModel, s: &ScanSettings, threads: usize) -> Result<ScanResult> {
    if s.x2.is_empty() || s.x3.is_empty() {
        return Err(Error::InvalidParameter("scan axes must be nonempty".into()));
    }
    if s.orders.0 == 0 || s.orders.0 >= s.orders.1 {
        return Err(Error::InvalidParameter(format!(
            "orders must satisfy 1 <= low < high, got {:?}",
            s.orders
        )));
    }
    if !(s.t_end > 0.0) || !(s.tol > 0.0) || s.samples == 0 {
        return Err(Error::InvalidParameter("t_end, tol and samples must be positive".into()));
    }
    if model.dim() != 3 {
        return Err(Error::DimensionMismatch { expected: 3, got: model.dim() });
    }
    let points: Vec<[f64; 3]> = s
        .x2
        .iter()
        .flat_map(|&a| s.x3.iter().map(move |&b| [s.x1, a, b]))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
    let cells = pool.install(|| {
        points.par_iter().map(|x0| scan_cell(model, x0, s)).collect::<Result<Vec<_>>>()
    })?;
    Ok(ScanResult { settings: s.clone(), cells })
}

/// `(order, ε_C, ε_K)` for each requested order at one initial condition.
pub fn error_curve(
    model: &PopulationModel,
    x0: &[f64],
    orders: &[usize],
    t_end: f64,
    samples: usize,
    tol: f64,
) -> Result<Vec<(usize, f64, f64)>> {
    let times = uniform_grid(t_end, samples);
    let reference = reference_y(model, x0, &times, REFERENCE_TOL)?;
    orders
        .iter()
        .map(|&n| {
            let c = carleman_evolve_against(model, x0, n, &reference, tol)?;
            let k = nip_evolve_against(model, x0, n, &reference, tol)?;
            Ok((n, c.max_error, k.max_error))
        })
        .collect()
}

pub fn write_error_curve<W: Write>(mut w: W, curve: &[(usize, f64, f64)]) -> std::io::Result<()> {
    writeln!(w, "order,eps_c,eps_k")?;
    for (n, c, k) in curve {
        writeln!(w, "{n},{},{}", fmt_f64(*c), fmt_f64(*k))?;
    }
    Ok(())
}

/// Exact, Carleman and interaction-picture trajectories in population coordinates.
/// Lifted samples after divergence or at back-map poles are `None`.
#[derive(Debug, Clone)]
pub struct TrajectoryComparison {
    pub times: Vec<f64>,
    pub exact: Vec<Vec<f64>>,
    pub carleman: Vec<Option<Vec<f64>>>,
    pub nip: Vec<Option<Vec<f64>>>,
    pub carleman_run: LiftedRun,
    pub nip_run: LiftedRun,
}

impl TrajectoryComparison {
    /// Columns `t`, `exact_i`, `carleman_i`, `nip_i`; missing samples are `nan`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let d = self.exact.first().map_or(0, Vec::len);
        write!(w, "t")?;
        for prefix in ["exact", "carleman", "nip"] {
            for i in 0..d {
                write!(w, ",{prefix}_{i}")?;
            }
        }
        writeln!(w)?;
        for (s, t) in self.times.iter().enumerate() {
            write!(w, "{}", fmt_f64(*t))?;
            let nan = vec![f64::NAN; d];
            let rows = [
                Some(&self.exact[s]),
                self.carleman.get(s).and_then(Option::as_ref),
                self.nip.get(s).and_then(Option::as_ref),
            ];
            for row in rows {
                for v in row.unwrap_or(&nan) {
                    write!(w, ",{}", fmt_f64(*v))?;
                }
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

pub fn trajectory_compare(
    model: &PopulationModel,
    x0: &[f64],
    order: usize,
    t_end: f64,
    samples: usize,
    tol: f64,
) -> Result<TrajectoryComparison> {
    let times = uniform_grid(t_end, samples);
    let reference = reference_y(model, x0, &times, REFERENCE_TOL)?;
    let c = carleman_evolve_against(model, x0, order, &reference, tol)?;
    let k = nip_evolve_against(model, x0, order, &reference, tol)?;
    let to_x = |run: &LiftedRun| -> Vec<Option<Vec<f64>>> {
        run.y_approx
            .iter()
            .map(|y| y.as_ref().map(|y| model.y_to_x(y).expect("dimension checked")))
            .collect()
    };
    let exact = reference
        .states
        .iter()
        .map(|y| model.y_to_x(&y.iter().map(|z| z.re).collect::<Vec<_>>()))
        .collect::<Result<Vec<_>>>()?;
    Ok(TrajectoryComparison {
        times: reference.times.clone(),
        exact,
        carleman: to_x(&c),
        nip: to_x(&k),
        carleman_run: c,
        nip_run: k,
    })
}

#[derive(Debug, Clone)]
pub struct ChaosResult {
    pub trajectory: Trajectory,
    /// Euclidean distance of the final state from the carrying capacities.
    pub final_distance: f64,
    /// `final_distance > 0.1`: the orbit has not settled on the equilibrium.
    pub unsettled: bool,
}

impl ChaosResult {
    /// `t,x1,x2,x3` rows; the `(x2, x3)` columns give the attractor projection.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let d = self.trajectory.states.first().map_or(0, Vec::len);
        write!(w, "t")?;
        for i in 0..d {
            write!(w, ",x{}", i + 1)?;
        }
        writeln!(w)?;
        for (t, x) in self.trajectory.times.iter().zip(&self.trajectory.states) {
            write!(w, "{}", fmt_f64(*t))?;
            for z in x {
                write!(w, ",{}", fmt_f64(z.re))?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Long reference run of the population dynamics.
pub fn chaos_demo(model: &PopulationModel, x0: &[f64], t_end: f64, samples: usize) -> Result<ChaosResult> {
    model.x_to_eta(x0)?;
    let times = uniform_grid(t_end, samples);
    let x0c: Vec<_> = x0.iter().map(|&v| crate::linalg::C64::new(v, 0.0)).collect();
    let trajectory = integrate(
        &model.x_dynamics(),
        &x0c,
        &times,
        &IntegratorOptions { tol: REFERENCE_TOL, max_steps: 50_000_000, ..IntegratorOptions::default() },
    )?;
    let last = trajectory.last();
    let final_distance = if trajectory.is_diverged() {
        f64::INFINITY
    } else {
        last.iter()
            .zip(model.capacities())
            .map(|(x, c)| (x.re - c).powi(2))
            .sum::<f64>()
            .sqrt()
    };
    Ok(ChaosResult { trajectory, final_distance, unsettled: final_distance > 0.1 })
}
