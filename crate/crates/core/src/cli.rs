//! Command-line front end. Every subcommand reads an optional JSON config,
//! writes CSV (or JSON reports) to `--out` or stdout, and maps failures to
//! exit codes: 2 for bad input, 3 for numerical failure.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Deserialize;

use crate::carleman::{build_carleman, initial_lift, truncation_error};
use crate::error::Error;
use crate::fermion::{
    chain_example, commuting_system, decay_spectrum, energy, evolve_covariance, exact_lindblad_oracle,
    heat_per_fermion, lindblad_gap, oracle_energy, pure_state, random_orthogonal, random_system, steady_state,
    CovarianceState, FermionSystem,
};
use crate::linalg::{CMat, C64};
use crate::nip::{in_guaranteed_ball, PopulationModel};
use crate::polyflow::{fmt_f64, uniform_grid, PolySystem};
use crate::population::{
    chaos_demo, convergence_scan, error_curve, benchmark_model, trajectory_compare, ScanSettings, Verdict, REFERENCE_TOL,
};
use crate::rsep::{sweep_point, write_sweep_csv, RsepParams};
use crate::spectral::{
    emulate_spectral_qka, kaiser_window, lookup_calibration, sample_outcomes, tail_mass, write_outcomes,
    history_system, SpectralConfig, NYQUIST_MARGIN,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

/// Environment fallback for `--threads`.
pub const THREADS_ENV: &str = "KOOPMAN_LAB_THREADS";

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Numerical(_) => EXIT_NUMERICAL,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        if e.is_numerical() {
            CliError::Numerical(e.to_string())
        } else {
            CliError::Config(e.to_string())
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "koopman-lab", version, about = "Koopman/Carleman, free-fermion and spectral-estimation numerics")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// JSON input for the subcommand.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output file; stdout when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads; falls back to KOOPMAN_LAB_THREADS, then the core count.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Integrator tolerance override.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InitState {
    /// Fock vacuum.
    Vacuum,
    /// Maximally mixed state, `Γ = 0`.
    Mixed,
    /// Seeded random pure Gaussian state.
    Random,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Convergence verdict grid for the Taylor-Carleman and interaction-picture lifts.
    PopulationScan {
        #[arg(long, default_value_t = 0.1)]
        t_end: f64,
        /// Low and high truncation orders.
        #[arg(long, default_value = "1,3")]
        orders: String,
        /// Axis range for x2 and x3 as `min,max,points`.
        #[arg(long)]
        grid: Option<String>,
        #[arg(long, default_value_t = 1.0)]
        x1: f64,
        #[arg(long, default_value_t = 200)]
        samples: usize,
    },
    /// Exact, Carleman and interaction-picture trajectories in population coordinates.
    PopulationTraj {
        #[arg(long, default_value = "1,1.4,1.4")]
        x0: String,
        #[arg(long, default_value = "3")]
        orders: String,
        #[arg(long, default_value_t = 0.1)]
        t_end: f64,
        #[arg(long, default_value_t = 200)]
        samples: usize,
    },
    /// Long exact run of the population dynamics.
    PopulationChaos {
        #[arg(long, default_value = "0.048,1.3,0.025")]
        x0: String,
        #[arg(long, default_value_t = 100.0)]
        t_end: f64,
        #[arg(long, default_value_t = 2000)]
        samples: usize,
    },
    /// Taylor-Carleman truncation error per order; the config may also be a polynomial system.
    CarlemanError {
        #[arg(long, default_value = "1,1.4,1.4")]
        x0: String,
        #[arg(long, default_value = "1,3,6")]
        orders: String,
        #[arg(long, default_value_t = 0.1)]
        t_end: f64,
        #[arg(long, default_value_t = 200)]
        samples: usize,
        /// Also write the first lifted block at the highest order to this CSV.
        #[arg(long)]
        trajectory: Option<PathBuf>,
    },
    /// Interaction-picture truncation error per order.
    NipError {
        #[arg(long, default_value = "1,1.4,1.4")]
        x0: String,
        #[arg(long, default_value = "1,3,6")]
        orders: String,
        #[arg(long, default_value_t = 0.1)]
        t_end: f64,
        #[arg(long, default_value_t = 200)]
        samples: usize,
    },
    /// Covariance matrix at `t_end`.
    FermionEvolve {
        /// Chain length when no config is given.
        #[arg(long = "N", default_value_t = 4)]
        modes: usize,
        #[arg(long, value_enum, default_value_t = InitState::Vacuum)]
        init: InitState,
        #[arg(long, default_value_t = 1.0)]
        t_end: f64,
    },
    /// Energy and heat per fermion on a time grid.
    FermionHeat {
        #[arg(long = "N", default_value_t = 4)]
        modes: usize,
        #[arg(long, value_enum, default_value_t = InitState::Random)]
        init: InitState,
        #[arg(long, default_value_t = 1.0)]
        t_end: f64,
        #[arg(long, default_value_t = 10)]
        samples: usize,
    },
    /// Decay rates and weights of a commuting instance.
    FermionDecay {
        /// Mode count of the seeded default instance.
        #[arg(long = "N", default_value_t = 3)]
        modes: usize,
        #[arg(long, value_enum, default_value_t = InitState::Random)]
        init: InitState,
    },
    /// Stationary covariance matrix.
    FermionSteady {
        #[arg(long = "N", default_value_t = 4)]
        modes: usize,
    },
    /// Covariance ODE against the brute-force master equation on random instances.
    FermionOracleCheck {
        #[arg(long = "N", default_value_t = 3)]
        modes: usize,
        #[arg(long, default_value_t = 20)]
        trials: usize,
        #[arg(long, default_value_t = 2)]
        jumps: usize,
        /// Largest accepted elementwise deviation.
        #[arg(long, default_value_t = 1e-6)]
        max_deviation: f64,
    },
    /// R-numbers and coordinate-equivalence residuals over a parameter sweep.
    RsepSweep {
        #[arg(long, default_value_t = 1.0)]
        t_end: f64,
        #[arg(long, default_value_t = 20)]
        samples: usize,
        /// Use seeded Haar-random unitaries instead of the identity.
        #[arg(long)]
        haar: bool,
    },
    /// Tail mass of a window across the Nyquist-margin interval.
    SpectralWindow {
        #[arg(long = "J")]
        len: Option<usize>,
        #[arg(long)]
        sigma: Option<f64>,
        #[arg(long, default_value_t = 0.05)]
        eps_phase: f64,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
    },
    /// Exact outcome distribution against the ideal mixture.
    SpectralEmulate {
        #[arg(long, default_value_t = 0)]
        shots: usize,
    },
    /// Seeded outcome counts drawn from the emulated distribution.
    SpectralSample {
        #[arg(long, default_value_t = 100_000)]
        shots: usize,
    },
    /// Solves the history-state linear system of a Taylor-discretized linear ODE.
    OdeHistory,
}

/// Parses `argv` (including the program name), runs the subcommand and
/// returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("koopman-lab: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: &Cli) -> CliResult<()> {
    let c = &cli.common;
    match &cli.command {
        Command::PopulationScan { t_end, orders, grid, x1, samples } => {
            population_scan(c, *t_end, orders, grid.as_deref(), *x1, *samples)
        }
        Command::PopulationTraj { x0, orders, t_end, samples } => population_traj(c, x0, orders, *t_end, *samples),
        Command::PopulationChaos { x0, t_end, samples } => population_chaos(c, x0, *t_end, *samples),
        Command::CarlemanError { x0, orders, t_end, samples, trajectory } => {
            carleman_error(c, x0, orders, *t_end, *samples, trajectory.as_deref())
        }
        Command::NipError { x0, orders, t_end, samples } => nip_error(c, x0, orders, *t_end, *samples),
        Command::FermionEvolve { modes, init, t_end } => fermion_evolve(c, *modes, *init, *t_end),
        Command::FermionHeat { modes, init, t_end, samples } => fermion_heat(c, *modes, *init, *t_end, *samples),
        Command::FermionDecay { modes, init } => fermion_decay(c, *modes, *init),
        Command::FermionSteady { modes } => fermion_steady(c, *modes),
        Command::FermionOracleCheck { modes, trials, jumps, max_deviation } => {
            fermion_oracle_check(c, *modes, *trials, *jumps, *max_deviation)
        }
        Command::RsepSweep { t_end, samples, haar } => rsep_sweep(c, *t_end, *samples, *haar),
        Command::SpectralWindow { len, sigma, eps_phase, samples } => {
            spectral_window(c, *len, *sigma, *eps_phase, *samples)
        }
        Command::SpectralEmulate { shots } => spectral_run(c, *shots),
        Command::SpectralSample { shots } => spectral_run(c, *shots),
        Command::OdeHistory => ode_history(c),
    }
}

/// Generator for instance `index` of a run: one ChaCha stream per instance.
pub fn instance_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// `--threads`, then the environment, then the core count.
pub fn resolve_threads(flag: Option<usize>) -> CliResult<usize> {
    if let Some(n) = flag {
        if n == 0 {
            return Err(CliError::Config("--threads must be positive".into()));
        }
        return Ok(n);
    }
    match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(CliError::Config(format!("{THREADS_ENV} must be a positive integer, got {v:?}"))),
        },
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

fn pool(threads: usize) -> CliResult<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Numerical(format!("thread pool: {e}")))
}

fn read_config(path: &Path) -> CliResult<serde_json::Value> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn load_config(c: &Common) -> CliResult<Option<serde_json::Value>> {
    c.config.as_deref().map(read_config).transpose()
}

fn require_config(c: &Common) -> CliResult<serde_json::Value> {
    load_config(c)?.ok_or_else(|| CliError::Config("this subcommand requires --config".into()))
}

fn emit(c: &Common, bytes: &[u8]) -> CliResult<()> {
    match &c.out {
        Some(p) => std::fs::write(p, bytes).map_err(|e| CliError::Config(format!("cannot write {}: {e}", p.display()))),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(bytes).and_then(|_| out.flush()).map_err(|e| CliError::Config(format!("stdout: {e}")))
        }
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> CliResult<()> {
    std::fs::write(path, bytes).map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))
}

fn csv_buffer<F>(f: F) -> CliResult<Vec<u8>>
where
    F: FnOnce(&mut Vec<u8>) -> std::io::Result<()>,
{
    let mut buf = Vec::new();
    f(&mut buf).map_err(|e| CliError::Config(format!("formatting output: {e}")))?;
    Ok(buf)
}

fn parse_list<T: std::str::FromStr>(flag: &str, s: &str) -> CliResult<Vec<T>> {
    s.split(',')
        .map(|p| p.trim().parse::<T>().map_err(|_| CliError::Config(format!("--{flag}: cannot parse {p:?}"))))
        .collect()
}

fn positive(flag: &str, v: f64) -> CliResult<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(CliError::Config(format!("--{flag} must be positive, got {v}")))
    }
}

fn tolerance(c: &Common, default: f64) -> CliResult<f64> {
    c.tol.map_or(Ok(default), |t| positive("tol", t))
}

fn orders(s: &str) -> CliResult<Vec<usize>> {
    let v: Vec<usize> = parse_list("orders", s)?;
    if v.is_empty() || v.contains(&0) {
        return Err(CliError::Config("--orders entries must be positive".into()));
    }
    Ok(v)
}

fn population_model(c: &Common) -> CliResult<PopulationModel> {
    match load_config(c)? {
        Some(v) => Ok(PopulationModel::from_json(&v)?),
        None => Ok(benchmark_model()),
    }
}

fn population_x0(model: &PopulationModel, s: &str) -> CliResult<Vec<f64>> {
    let x0: Vec<f64> = parse_list("x0", s)?;
    if x0.len() != model.dim() {
        return Err(CliError::Config(format!("--x0 has {} entries, model has {}", x0.len(), model.dim())));
    }
    model.x_to_eta(&x0)?;
    Ok(x0)
}

fn population_scan(c: &Common, t_end: f64, orders_s: &str, grid: Option<&str>, x1: f64, samples: usize) -> CliResult<()> {
    let model = population_model(c)?;
    let o = orders(orders_s)?;
    if o.len() != 2 || o[0] >= o[1] {
        return Err(CliError::Config("--orders must be `low,high` with low < high".into()));
    }
    let mut s = ScanSettings { x1, orders: (o[0], o[1]), t_end: positive("t-end", t_end)?, samples, ..Default::default() };
    s.tol = tolerance(c, s.tol)?;
    if let Some(g) = grid {
        let parts: Vec<f64> = parse_list("grid", g)?;
        if parts.len() != 3 || parts[2] < 1.0 || parts[2].fract() != 0.0 || !(parts[1] >= parts[0]) {
            return Err(CliError::Config("--grid must be `min,max,points` with min <= max".into()));
        }
        let n = parts[2] as usize;
        let axis: Vec<f64> = (0..n)
            .map(|k| if n == 1 { parts[0] } else { parts[0] + (parts[1] - parts[0]) * k as f64 / (n - 1) as f64 })
            .collect();
        s.x2 = axis.clone();
        s.x3 = axis;
    }
    let threads = resolve_threads(c.threads)?;
    let result = convergence_scan(&model, &s, threads)?;
    emit(c, &csv_buffer(|b| result.write_csv(b))?)?;
    for cell in &result.cells {
        let x0 = [s.x1, cell.x2, cell.x3];
        if in_guaranteed_ball(&model, &x0)? && cell.nip != Verdict::Converged {
            return Err(CliError::Numerical(format!(
                "cell x2 = {}, x3 = {} lies in the guaranteed ball but the interaction-picture verdict is {}",
                cell.x2,
                cell.x3,
                cell.nip.as_str()
            )));
        }
    }
    Ok(())
}

fn population_traj(c: &Common, x0: &str, orders_s: &str, t_end: f64, samples: usize) -> CliResult<()> {
    let model = population_model(c)?;
    let x0 = population_x0(&model, x0)?;
    let o = orders(orders_s)?;
    if o.len() != 1 {
        return Err(CliError::Config("--orders must be a single order for population-traj".into()));
    }
    let cmp = trajectory_compare(&model, &x0, o[0], positive("t-end", t_end)?, samples, tolerance(c, 1e-10)?)?;
    emit(c, &csv_buffer(|b| cmp.write_csv(b))?)
}

fn population_chaos(c: &Common, x0: &str, t_end: f64, samples: usize) -> CliResult<()> {
    let model = population_model(c)?;
    let x0 = population_x0(&model, x0)?;
    let res = chaos_demo(&model, &x0, positive("t-end", t_end)?, samples)?;
    emit(c, &csv_buffer(|b| res.write_csv(b))?)?;
    eprintln!("final distance from carrying capacities: {}", fmt_f64(res.final_distance));
    Ok(())
}

fn carleman_error(c: &Common, x0: &str, orders_s: &str, t_end: f64, samples: usize, trajectory: Option<&Path>) -> CliResult<()> {
    let o = orders(orders_s)?;
    let t_end = positive("t-end", t_end)?;
    let tol = tolerance(c, 1e-10)?;
    let config = load_config(c)?;
    // A config with a `dim` key is a generic polynomial system.
    if let Some(v) = config.as_ref().filter(|v| v.get("dim").is_some()) {
        let sys = PolySystem::from_json(v)?;
        let x: Vec<f64> = parse_list("x0", x0)?;
        if x.len() != sys.dim() {
            return Err(CliError::Config(format!("--x0 has {} entries, system has dimension {}", x.len(), sys.dim())));
        }
        let z0: Vec<C64> = x.iter().map(|&v| C64::new(v, 0.0)).collect();
        let times = uniform_grid(t_end, samples);
        let reference = sys.integrate_reference(&z0, &times, REFERENCE_TOL)?;
        let mut rows = Vec::new();
        let mut last = None;
        for &n in &o {
            let op = build_carleman(&sys, n)?;
            let lifted = op.evolve_first_block(&initial_lift(&z0, n)?, &times, tol)?;
            let (_, max) = truncation_error(&reference, &lifted, |g| g.to_vec())?;
            rows.push((n, max));
            last = Some(lifted);
        }
        let buf = csv_buffer(|b| {
            writeln!(b, "order,eps_c")?;
            for (n, e) in &rows {
                writeln!(b, "{n},{}", fmt_f64(*e))?;
            }
            Ok(())
        })?;
        emit(c, &buf)?;
        if let (Some(path), Some(tr)) = (trajectory, last) {
            write_file(path, &csv_buffer(|b| tr.write_csv(b))?)?;
        }
        return Ok(());
    }
    let model = match config {
        Some(v) => PopulationModel::from_json(&v)?,
        None => benchmark_model(),
    };
    let x0 = population_x0(&model, x0)?;
    let curve = error_curve(&model, &x0, &o, t_end, samples, tol)?;
    let buf = csv_buffer(|b| {
        writeln!(b, "order,eps_c")?;
        for (n, e, _) in &curve {
            writeln!(b, "{n},{}", fmt_f64(*e))?;
        }
        Ok(())
    })?;
    emit(c, &buf)?;
    if let Some(path) = trajectory {
        let top = *o.iter().max().expect("orders nonempty");
        let cmp = trajectory_compare(&model, &x0, top, t_end, samples, tol)?;
        write_file(path, &csv_buffer(|b| cmp.write_csv(b))?)?;
    }
    Ok(())
}

fn nip_error(c: &Common, x0: &str, orders_s: &str, t_end: f64, samples: usize) -> CliResult<()> {
    let model = population_model(c)?;
    let x0 = population_x0(&model, x0)?;
    let o = orders(orders_s)?;
    let curve = error_curve(&model, &x0, &o, positive("t-end", t_end)?, samples, tolerance(c, 1e-10)?)?;
    let buf = csv_buffer(|b| {
        writeln!(b, "order,eps_k")?;
        for (n, _, k) in &curve {
            writeln!(b, "{n},{}", fmt_f64(*k))?;
        }
        Ok(())
    })?;
    emit(c, &buf)?;
    if let Some((n, _, k)) = curve.iter().find(|(_, _, k)| !k.is_finite()) {
        return Err(CliError::Numerical(format!("interaction-picture run at order {n} failed (error {k})")));
    }
    Ok(())
}

/// Config system, or a lossy chain of `modes` sites.
fn fermion_system(c: &Common, modes: usize) -> CliResult<FermionSystem> {
    match load_config(c)? {
        Some(v) => Ok(FermionSystem::from_json(&v)?),
        None => {
            let (h, jumps) = chain_example(modes, 1.0, (0.5, 0.5))?;
            Ok(FermionSystem::new(h, jumps)?)
        }
    }
}

fn initial_covariance(init: InitState, modes: usize, seed: u64) -> CovarianceState {
    match init {
        InitState::Vacuum => CovarianceState::vacuum(modes),
        InitState::Mixed => CovarianceState::zeros(modes),
        InitState::Random => CovarianceState::random_pure(modes, &mut instance_rng(seed, 0)),
    }
}

fn fermion_evolve(c: &Common, modes: usize, init: InitState, t_end: f64) -> CliResult<()> {
    let sys = fermion_system(c, modes)?;
    let g0 = initial_covariance(init, sys.modes(), c.seed);
    let t_end = if t_end == 0.0 { 0.0 } else { positive("t-end", t_end)? };
    let states = evolve_covariance(&sys, &g0, &[0.0, t_end], tolerance(c, 1e-10)?)?;
    let last = states.last().expect("at least one sample");
    emit(c, &csv_buffer(|b| last.write_csv(b))?)
}

fn fermion_heat(c: &Common, modes: usize, init: InitState, t_end: f64, samples: usize) -> CliResult<()> {
    let sys = fermion_system(c, modes)?;
    let g0 = initial_covariance(init, sys.modes(), c.seed);
    let times = uniform_grid(positive("t-end", t_end)?, samples);
    let states = evolve_covariance(&sys, &g0, &times, tolerance(c, 1e-10)?)?;
    let e0 = energy(sys.h(), g0.matrix());
    let n = sys.modes() as f64;
    let buf = csv_buffer(|b| {
        writeln!(b, "t,energy,heat_per_fermion")?;
        for (t, g) in times.iter().zip(&states) {
            let e = energy(sys.h(), g.matrix());
            writeln!(b, "{},{},{}", fmt_f64(*t), fmt_f64(e), fmt_f64((e0 - e) / n))?;
        }
        Ok(())
    })?;
    emit(c, &buf)
}

fn fermion_decay(c: &Common, modes: usize, init: InitState) -> CliResult<()> {
    let sys = match load_config(c)? {
        Some(v) => FermionSystem::from_json(&v)?,
        None => {
            if modes == 0 {
                return Err(CliError::Config("--N must be positive".into()));
            }
            let freqs: Vec<f64> = (0..modes).map(|k| 0.5 + 0.4 * k as f64).collect();
            let amps: Vec<f64> = (0..modes).map(|k| 0.3 + 0.1 * k as f64).collect();
            let q = random_orthogonal(2 * modes, &mut instance_rng(c.seed, 1));
            commuting_system(&freqs, &amps, Some(&q))?
        }
    };
    let g0 = initial_covariance(init, sys.modes(), c.seed);
    let spec = decay_spectrum(&sys, &g0)?;
    let buf = csv_buffer(|b| {
        writeln!(b, "k,l,rate,weight,amp_re,amp_im")?;
        for comp in &spec.components {
            writeln!(
                b,
                "{},{},{},{},{},{}",
                comp.pair.0,
                comp.pair.1,
                fmt_f64(comp.rate),
                fmt_f64(comp.weight),
                fmt_f64(comp.amplitude.re),
                fmt_f64(comp.amplitude.im)
            )?;
        }
        Ok(())
    })?;
    emit(c, &buf)?;
    eprintln!("gap: {}", fmt_f64(spec.gap));
    Ok(())
}

fn fermion_steady(c: &Common, modes: usize) -> CliResult<()> {
    let sys = fermion_system(c, modes)?;
    let g = steady_state(&sys)?;
    let r = sys.b() * g.matrix() + g.matrix() * sys.b().transpose() + sys.y();
    let residual = r.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    emit(c, &csv_buffer(|b| g.write_csv(b))?)?;
    eprintln!("gap: {}, stationarity residual: {}", fmt_f64(lindblad_gap(&sys)), fmt_f64(residual));
    Ok(())
}

#[derive(Debug, Clone, Copy)]
struct OracleTrial {
    gamma_deviation: f64,
    heat_deviation: f64,
}

fn oracle_trial(modes: usize, jumps: usize, seed: u64, index: u64, tol: f64) -> crate::Result<OracleTrial> {
    let mut rng = instance_rng(seed, index);
    let sys = random_system(modes, jumps, &mut rng);
    let rho0 = pure_state(modes, &mut rng);
    let times = [0.0, 0.1, 1.0];
    let oracle = exact_lindblad_oracle(&sys, &rho0, &times)?;
    let g0 = &oracle.gammas[0];
    let ode = evolve_covariance(&sys, g0, &times, tol)?;
    let mut gamma_deviation = 0.0_f64;
    for (a, b) in ode.iter().zip(&oracle.gammas) {
        gamma_deviation = gamma_deviation.max((a.matrix() - b.matrix()).iter().fold(0.0, |m, v| m.max(v.abs())));
    }
    let e0 = oracle_energy(&sys, &rho0)?;
    let mut heat_deviation = 0.0_f64;
    for (s, &t) in times.iter().enumerate().skip(1) {
        let q_oracle = (e0 - oracle.energies[s]) / modes as f64;
        let q_cov = heat_per_fermion(&sys, g0, t, tol)?;
        heat_deviation = heat_deviation.max((q_oracle - q_cov).abs());
    }
    Ok(OracleTrial { gamma_deviation, heat_deviation })
}

fn fermion_oracle_check(c: &Common, modes: usize, trials: usize, jumps: usize, max_dev: f64) -> CliResult<()> {
    if modes == 0 || modes > crate::fermion::MAX_ORACLE_MODES {
        return Err(CliError::Config(format!("--N must lie in 1..={}", crate::fermion::MAX_ORACLE_MODES)));
    }
    let tol = tolerance(c, 1e-12)?;
    let threads = resolve_threads(c.threads)?;
    let seed = c.seed;
    let results = pool(threads)?.install(|| {
        (0..trials as u64)
            .into_par_iter()
            .map(|i| oracle_trial(modes, jumps, seed, i, tol))
            .collect::<crate::Result<Vec<_>>>()
    })?;
    let worst = results
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.gamma_deviation.total_cmp(&b.1.gamma_deviation))
        .map(|(i, r)| (i, *r));
    let max_gamma = results.iter().map(|r| r.gamma_deviation).fold(0.0, f64::max);
    let max_heat = results.iter().map(|r| r.heat_deviation).fold(0.0, f64::max);
    let report = serde_json::json!({
        "N": modes,
        "trials": trials,
        "seed": seed,
        "max_gamma_deviation": max_gamma,
        "max_heat_deviation": max_heat,
        "worst_trial": worst.map(|w| w.0),
        "threshold": max_dev,
    });
    let mut text = serde_json::to_string_pretty(&report).expect("report serializes");
    text.push('\n');
    emit(c, text.as_bytes())?;
    if let Some((i, r)) = worst.filter(|w| !(w.1.gamma_deviation <= max_dev)) {
        return Err(CliError::Numerical(format!(
            "trial {i}: covariance deviation {:e} exceeds {max_dev:e}",
            r.gamma_deviation
        )));
    }
    Ok(())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RsepConfig {
    /// Rows `[beta, gamma, delta, d]`.
    points: Vec<(f64, f64, f64, usize)>,
}

/// Default sweep: `β ∈ {2, 5, 10}`, `γ ∈ {1.5β, 2β}`, `δ ∈ {0.1, 0.5}`, `d ∈ {3, 4}`.
pub fn default_rsep_points() -> Vec<(f64, f64, f64, usize)> {
    let mut out = Vec::new();
    for beta in [2.0, 5.0, 10.0] {
        for g in [1.5, 2.0] {
            for delta in [0.1, 0.5] {
                for d in [3, 4] {
                    out.push((beta, g * beta, delta, d));
                }
            }
        }
    }
    out
}

fn rsep_sweep(c: &Common, t_end: f64, samples: usize, haar: bool) -> CliResult<()> {
    let points = match load_config(c)? {
        Some(v) => {
            serde_json::from_value::<RsepConfig>(v).map_err(|e| CliError::Config(format!("rsep sweep: {e}")))?.points
        }
        None => default_rsep_points(),
    };
    let t_end = positive("t-end", t_end)?;
    let params = points
        .iter()
        .enumerate()
        .map(|(i, &(beta, gamma, delta, d))| {
            if haar {
                RsepParams::with_random_unitary(d, beta, gamma, delta, &mut instance_rng(c.seed, i as u64))
            } else {
                RsepParams::new(d, beta, gamma, delta)
            }
            .map_err(|e| CliError::Config(format!("sweep point {i}: {e}")))
        })
        .collect::<CliResult<Vec<_>>>()?;
    let threads = resolve_threads(c.threads)?;
    let rows = pool(threads)?.install(|| {
        params
            .par_iter()
            .enumerate()
            .map(|(i, p)| sweep_point(p, t_end, samples).map_err(|e| (i, e)))
            .collect::<std::result::Result<Vec<_>, _>>()
    });
    let rows = rows.map_err(|(i, e)| {
        let msg = format!("sweep point {i}: {e}");
        if e.is_numerical() {
            CliError::Numerical(msg)
        } else {
            CliError::Config(msg)
        }
    })?;
    emit(c, &csv_buffer(|b| write_sweep_csv(b, &rows))?)
}

fn spectral_window(c: &Common, len: Option<usize>, sigma: Option<f64>, eps: f64, samples: usize) -> CliResult<()> {
    let from_config = match load_config(c)? {
        Some(v) => {
            let cfg: SpectralConfig =
                serde_json::from_value(v).map_err(|e| CliError::Config(format!("spectral config: {e}")))?;
            Some((cfg.len, cfg.sigma))
        }
        None => None,
    };
    let table = lookup_calibration(0.05, 1e-4).expect("calibration table is nonempty");
    let (l0, s0) = from_config.unwrap_or((table.len, table.sigma));
    let window = kaiser_window(len.unwrap_or(l0), sigma.unwrap_or(s0))?;
    let eps = positive("eps-phase", eps)?;
    if samples < 2 {
        return Err(CliError::Config("--samples must be at least 2".into()));
    }
    let lo = -std::f64::consts::PI + NYQUIST_MARGIN;
    let mut worst = 0.0_f64;
    let mut rows = Vec::with_capacity(samples);
    for s in 0..samples {
        let theta = (lo + 2.0 * (-lo) * s as f64 / (samples - 1) as f64).clamp(lo, -lo);
        let tail = tail_mass(&window, theta, eps)?;
        worst = worst.max(tail);
        rows.push((theta, tail));
    }
    let buf = csv_buffer(|b| {
        writeln!(b, "theta,tail_mass")?;
        for (t, m) in &rows {
            writeln!(b, "{},{}", fmt_f64(*t), fmt_f64(*m))?;
        }
        Ok(())
    })?;
    emit(c, &buf)?;
    eprintln!("J = {}, sigma = {}, sup tail mass: {}", window.len, window.sigma, fmt_f64(worst));
    Ok(())
}

fn spectral_run(c: &Common, shots: usize) -> CliResult<()> {
    let cfg: SpectralConfig = serde_json::from_value(require_config(c)?)
        .map_err(|e| CliError::Config(format!("spectral config: {e}")))?;
    let modes = cfg.koopman()?;
    let window = cfg.window()?;
    let em = emulate_spectral_qka(&modes, &window, cfg.t1, cfg.dt)?;
    let counts = sample_outcomes(&em.p, shots, c.seed)?;
    let mut buf = Vec::new();
    write_outcomes(&mut buf, cfg.dt, &em.p_ideal, &em.p, &counts)?;
    emit(c, &buf)?;
    eprintln!("total variation to ideal: {}", fmt_f64(em.tv_to_ideal));
    Ok(())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct HistoryConfig {
    /// Rows of `[re, im]` pairs.
    #[serde(rename = "A")]
    a: Vec<Vec<(f64, f64)>>,
    x0: Vec<(f64, f64)>,
    m: usize,
    p: usize,
    l: usize,
    h: f64,
}

fn ode_history(c: &Common) -> CliResult<()> {
    let cfg: HistoryConfig = serde_json::from_value(require_config(c)?)
        .map_err(|e| CliError::Config(format!("history config: {e}")))?;
    let n = cfg.a.len();
    if cfg.a.iter().any(|r| r.len() != n) {
        return Err(CliError::Config("`A` must be square".into()));
    }
    let a = CMat::from_fn(n, n, |i, j| C64::new(cfg.a[i][j].0, cfg.a[i][j].1));
    let x0: Vec<C64> = cfg.x0.iter().map(|&(re, im)| C64::new(re, im)).collect();
    let (_, sol) = history_system(&a, &x0, cfg.m, cfg.p, cfg.l, cfg.h)?;
    let buf = csv_buffer(|b| {
        write!(b, "s,exact_residual")?;
        for i in 0..n {
            write!(b, ",re_{i},im_{i}")?;
        }
        writeln!(b)?;
        for (s, y) in sol.blocks.iter().enumerate() {
            write!(b, "{s},{}", fmt_f64(sol.exact_residuals[s]))?;
            for z in y.iter() {
                write!(b, ",{},{}", fmt_f64(z.re), fmt_f64(z.im))?;
            }
            writeln!(b)?;
        }
        Ok(())
    })?;
    emit(c, &buf)?;
    eprintln!(
        "taylor residual: {}, recurrence residual: {}",
        fmt_f64(sol.taylor_residual),
        fmt_f64(sol.recurrence_residual)
    );
    Ok(())
}
