//! Nonlinear interaction picture for coupled logistic populations.
//!
//! Three coordinate systems are used: populations `x`, vacancies
//! `y = 1 − x/X` and the logistic Koopman modes `η = y/(1 − y) = (X − x)/x`.
//! In `η` the dynamics is exactly quadratic, while in `y` it only becomes
//! polynomial after a Taylor expansion.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::carleman::{build_carleman, initial_lift};
use crate::error::{Error, Result};
use crate::linalg::{vec_norm, CMat, C64};
use crate::polyflow::{
    integrate, IntegratorOptions, PolySystem, SparseTensor, Trajectory, TrajectoryStatus,
    VectorField,
};

/// `|1 + g|` below this marks a back-map pole.
pub const POLE_EPS: f64 = 1e-9;

/// `ẋ_i = r_i x_i (1 − x_i/X_i) − x_i² Σ_{jk} J_{i,jk} η_j η_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationModel {
    r: Vec<f64>,
    capacity: Vec<f64>,
    coupling: SparseTensor,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelDescriptor {
    r: Vec<f64>,
    #[serde(rename = "X")]
    capacity: Vec<f64>,
    #[serde(rename = "J")]
    coupling: Vec<(usize, usize, usize, f64)>,
}

impl PopulationModel {
    /// `coupling` entries are `(i, j, k, J_{i,jk})`, 0-based.
    pub fn new(r: Vec<f64>, capacity: Vec<f64>, coupling: &[(usize, usize, usize, f64)]) -> Result<Self> {
        let d = r.len();
        if d == 0 {
            return Err(Error::InvalidParameter("model needs at least one population".into()));
        }
        if capacity.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: capacity.len() });
        }
        if let Some(v) = r.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
            return Err(Error::InvalidParameter(format!("growth rates must be positive, got {v}")));
        }
        if let Some(v) = capacity.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
            return Err(Error::InvalidParameter(format!("carrying capacities must be positive, got {v}")));
        }
        let mut j = SparseTensor::new(d, 2);
        for &(i, a, b, v) in coupling {
            j.insert(i, &[a, b], C64::new(v, 0.0))?;
        }
        Ok(Self { r, capacity, coupling: j })
    }

    pub fn dim(&self) -> usize {
        self.r.len()
    }

    pub fn rates(&self) -> &[f64] {
        &self.r
    }

    pub fn capacities(&self) -> &[f64] {
        &self.capacity
    }

    pub fn coupling(&self) -> &SparseTensor {
        &self.coupling
    }

    /// Same rates and capacities, couplings switched off.
    pub fn uncoupled(&self) -> Self {
        Self { coupling: SparseTensor::new(self.dim(), 2), ..self.clone() }
    }

    pub fn to_json(&self) -> serde_json::Value {
        let desc = ModelDescriptor {
            r: self.r.clone(),
            capacity: self.capacity.clone(),
            coupling: self.coupling.iter().map(|(i, c, v)| (i, c[0], c[1], v.re)).collect(),
        };
        serde_json::to_value(desc).expect("model serializes")
    }

    pub fn from_json(value: &serde_json::Value) -> Result<Self> {
        let desc: ModelDescriptor = serde_json::from_value(value.clone())
            .map_err(|e| Error::InvalidParameter(format!("population model: {e}")))?;
        Self::new(desc.r, desc.capacity, &desc.coupling)
    }

    fn check_len(&self, n: usize) -> Result<()> {
        if n != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: n });
        }
        Ok(())
    }

    pub fn x_to_y(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_len(x.len())?;
        Ok(x.iter().zip(&self.capacity).map(|(x, c)| 1.0 - x / c).collect())
    }

    pub fn y_to_x(&self, y: &[f64]) -> Result<Vec<f64>> {
        self.check_len(y.len())?;
        Ok(y.iter().zip(&self.capacity).map(|(y, c)| c * (1.0 - y)).collect())
    }

    /// `η_j = (X_j − x_j)/x_j`.
    pub fn x_to_eta(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_len(x.len())?;
        x.iter()
            .zip(&self.capacity)
            .enumerate()
            .map(|(index, (&x, c))| {
                if !(x > 0.0) {
                    Err(Error::NonPositivePopulation { index, value: x })
                } else {
                    Ok((c - x) / x)
                }
            })
            .collect()
    }

    pub fn eta_to_x(&self, eta: &[f64]) -> Result<Vec<f64>> {
        let y = eta_to_y_back(eta)?;
        self.y_to_x(&y)
    }

    /// Vector field of the original population dynamics.
    pub fn x_dynamics(&self) -> XDynamics<'_> {
        XDynamics { model: self }
    }
}

/// `η = y/(1 − y)`.
pub fn y_to_eta(y: &[f64]) -> Result<Vec<f64>> {
    y.iter()
        .enumerate()
        .map(|(index, &y)| {
            if (1.0 - y).abs() < POLE_EPS {
                Err(Error::NonPositivePopulation { index, value: 1.0 - y })
            } else {
                Ok(y / (1.0 - y))
            }
        })
        .collect()
}

/// Back map `ỹ = g/(1 + g)` from the first lifted block to vacancies.
pub fn eta_to_y_back(g: &[f64]) -> Result<Vec<f64>> {
    g.iter()
        .enumerate()
        .map(|(index, &g)| {
            if (1.0 + g).abs() < POLE_EPS {
                Err(Error::BackMapPole { index, value: 1.0 + g })
            } else {
                Ok(g / (1.0 + g))
            }
        })
        .collect()
}

pub struct XDynamics<'a> {
    model: &'a PopulationModel,
}

impl VectorField for XDynamics<'_> {
    fn dim(&self) -> usize {
        self.model.dim()
    }

    fn eval(&self, x: &[C64], out: &mut [C64]) {
        let m = self.model;
        let eta: Vec<C64> = x.iter().zip(&m.capacity).map(|(x, c)| (c - x) / x).collect();
        for (i, o) in out.iter_mut().enumerate() {
            *o = x[i] * m.r[i] * (1.0 - x[i] / m.capacity[i]);
        }
        for (i, cols, v) in m.coupling.iter() {
            out[i] -= x[i] * x[i] * v * eta[cols[0]] * eta[cols[1]];
        }
    }
}

/// Polynomial in noncommuting letters: word → coefficient.
/// Words longer than the cutoff are discarded on multiplication.
#[derive(Debug, Clone)]
struct WordPoly(BTreeMap<Vec<usize>, f64>);

impl WordPoly {
    fn constant(c: f64) -> Self {
        Self(BTreeMap::from([(Vec::new(), c)]))
    }

    fn letter(j: usize) -> Self {
        Self(BTreeMap::from([(vec![j], 1.0)]))
    }

    fn add_term(&mut self, word: Vec<usize>, c: f64) {
        *self.0.entry(word).or_insert(0.0) += c;
    }

    fn mul(&self, other: &Self, cutoff: usize) -> Self {
        let mut out = Self(BTreeMap::new());
        for (wa, ca) in &self.0 {
            for (wb, cb) in &other.0 {
                if wa.len() + wb.len() > cutoff {
                    continue;
                }
                let mut w = wa.clone();
                w.extend_from_slice(wb);
                out.add_term(w, ca * cb);
            }
        }
        out.0.retain(|_, c| *c != 0.0);
        out
    }

    /// `1/(1 − y_j) = Σ_{a ≥ 0} y_j^a` truncated at degree `cutoff`.
    fn geometric(j: usize, cutoff: usize) -> Self {
        let mut p = Self(BTreeMap::new());
        for a in 0..=cutoff {
            p.add_term(vec![j; a], 1.0);
        }
        p
    }
}

/// Taylor-truncated vacancy system `ẏ = Σ_{n ≤ order} F_n y^{⊗n}`.
///
/// The interaction term `X_i J_{i,jk} y_j y_k (1 − y_i)² / ((1 − y_j)(1 − y_k))`
/// is expanded as an ordered product of factors, so each monomial lands on the
/// multi-index `(j, k, i…, j…, k…)`.
pub fn vacancy_taylor_tensors(model: &PopulationModel, order: usize) -> Result<PolySystem> {
    if order == 0 {
        return Err(Error::InvalidParameter("truncation order must be at least 1".into()));
    }
    let d = model.dim();
    let mut tensors: Vec<SparseTensor> = (0..=order).map(|n| SparseTensor::new(d, n)).collect();
    for i in 0..d {
        tensors[1].insert(i, &[i], C64::new(-model.r[i], 0.0))?;
        if order >= 2 {
            tensors[2].insert(i, &[i, i], C64::new(model.r[i], 0.0))?;
        }
    }
    for (i, cols, v) in model.coupling.iter() {
        let (j, k) = (cols[0], cols[1]);
        let mut vacancy_sq = WordPoly::constant(1.0);
        vacancy_sq.add_term(vec![i], -2.0);
        vacancy_sq.add_term(vec![i, i], 1.0);
        let poly = WordPoly::letter(j)
            .mul(&WordPoly::letter(k), order)
            .mul(&vacancy_sq, order)
            .mul(&WordPoly::geometric(j, order), order)
            .mul(&WordPoly::geometric(k, order), order);
        let scale = v * model.capacity[i];
        for (word, c) in poly.0 {
            tensors[word.len()].insert(i, &word, scale * c)?;
        }
    }
    PolySystem::from_tensors(d, tensors)
}

/// `(G₁, G₂)` with `G₁ = diag(−r)` and `[G₂]_{i,(j,k)} = X_i J_{i,jk}`.
pub fn koopman_tensors(model: &PopulationModel) -> (CMat, SparseTensor) {
    let d = model.dim();
    let g1 = CMat::from_diagonal(&nalgebra::DVector::from_iterator(
        d,
        model.r.iter().map(|r| C64::new(-r, 0.0)),
    ));
    let mut g2 = SparseTensor::new(d, 2);
    for (i, cols, v) in model.coupling.iter() {
        g2.insert(i, cols, v * model.capacity[i]).expect("indices already validated");
    }
    (g1, g2)
}

/// Exact quadratic mode dynamics `η̇ = G₁η + G₂η^{⊗2}` as a polynomial system.
pub fn koopman_system(model: &PopulationModel) -> PolySystem {
    let d = model.dim();
    let (_, g2) = koopman_tensors(model);
    let mut g1 = SparseTensor::new(d, 1);
    for i in 0..d {
        g1.insert(i, &[i], C64::new(-model.r[i], 0.0)).expect("diagonal index");
    }
    PolySystem::from_tensors(d, [g1, g2]).expect("dimensions agree")
}

/// `‖G₂‖ / min_i r_i`, so that `R_K = nip_r_scale · ‖η(0)‖`.
pub fn nip_r_scale(model: &PopulationModel) -> f64 {
    let (_, g2) = koopman_tensors(model);
    let rmin = model.r.iter().cloned().fold(f64::INFINITY, f64::min);
    g2.spectral_norm() / rmin
}

/// `R_K = ‖G₂‖‖η(0)‖ / min_i r_i`.
pub fn r_number_nip(model: &PopulationModel, eta0: &[f64]) -> Result<f64> {
    model.check_len(eta0.len())?;
    let n = eta0.iter().map(|e| e * e).sum::<f64>().sqrt();
    if n == 0.0 {
        return Err(Error::ZeroInitialState);
    }
    Ok(nip_r_scale(model) * n)
}

/// Radius of the ball `‖η(0)‖ < min_i r_i / ‖G₂‖` on which `R_K < 1`.
pub fn guaranteed_radius(model: &PopulationModel) -> f64 {
    let s = nip_r_scale(model);
    if s == 0.0 {
        f64::INFINITY
    } else {
        1.0 / s
    }
}

/// Whether `x0` maps to `‖η(0)‖` strictly inside [`guaranteed_radius`].
pub fn in_guaranteed_ball(model: &PopulationModel, x0: &[f64]) -> Result<bool> {
    let eta = model.x_to_eta(x0)?;
    Ok(eta.iter().map(|e| e * e).sum::<f64>().sqrt() < guaranteed_radius(model))
}

fn to_c(v: &[f64]) -> Vec<C64> {
    v.iter().map(|&x| C64::new(x, 0.0)).collect()
}

/// Exact vacancy trajectory `y(t)` from the original population dynamics.
pub fn reference_y(model: &PopulationModel, x0: &[f64], times: &[f64], tol: f64) -> Result<Trajectory> {
    model.x_to_eta(x0)?;
    let mut tr = integrate(&model.x_dynamics(), &to_c(x0), times, &IntegratorOptions::with_tol(tol))?;
    for s in &mut tr.states {
        for (z, c) in s.iter_mut().zip(&model.capacity) {
            *z = C64::new(1.0 - z.re / c, 0.0);
        }
    }
    Ok(tr)
}

/// Exact `η(t)` from the quadratic mode system.
pub fn reference_eta(model: &PopulationModel, x0: &[f64], times: &[f64], tol: f64) -> Result<Trajectory> {
    let eta0 = model.x_to_eta(x0)?;
    koopman_system(model).integrate_reference(&to_c(&eta0), times, tol)
}

/// Outcome of a lifted evolution compared with the exact vacancies.
#[derive(Debug, Clone)]
pub struct LiftedRun {
    pub times: Vec<f64>,
    /// Approximate vacancies per sample; `None` where the back map hit a pole.
    pub y_approx: Vec<Option<Vec<f64>>>,
    /// `‖y(t_s) − ỹ(t_s)‖`, `NaN` at pole samples.
    pub profile: Vec<f64>,
    /// Maximum over valid samples, `+∞` when the lifted flow diverged.
    pub max_error: f64,
    pub status: TrajectoryStatus,
    pub pole_samples: usize,
}

impl LiftedRun {
    pub fn diverged(&self) -> bool {
        matches!(self.status, TrajectoryStatus::Diverged { .. })
    }
}

fn compare(
    reference: &Trajectory,
    lifted: &Trajectory,
    back: impl Fn(&[f64]) -> Result<Vec<f64>>,
) -> Result<LiftedRun> {
    let n = lifted.times.len();
    if n > reference.times.len() || reference.times[..n] != lifted.times[..] {
        return Err(Error::TimeGridMismatch("lifted samples do not match the reference".into()));
    }
    let mut y_approx = Vec::with_capacity(n);
    let mut profile = Vec::with_capacity(n);
    let mut poles = 0;
    let mut max: f64 = 0.0;
    for (r, g) in reference.states.iter().zip(&lifted.states) {
        let g1: Vec<f64> = g.iter().map(|z| z.re).collect();
        match back(&g1) {
            Ok(y) => {
                let diff: Vec<C64> = r.iter().zip(&y).map(|(a, b)| a - b).collect();
                let e = vec_norm(&diff);
                max = max.max(e);
                profile.push(e);
                y_approx.push(Some(y));
            }
            Err(Error::BackMapPole { .. }) => {
                poles += 1;
                profile.push(f64::NAN);
                y_approx.push(None);
            }
            Err(e) => return Err(e),
        }
    }
    let status = if reference.is_diverged() && !lifted.is_diverged() {
        reference.status
    } else {
        lifted.status
    };
    if n < reference.times.len() || matches!(status, TrajectoryStatus::Diverged { .. }) {
        max = f64::INFINITY;
    }
    Ok(LiftedRun { times: lifted.times.clone(), y_approx, profile, max_error: max, status, pole_samples: poles })
}

/// Koopman-Carleman evolution of `η(0)` at the given order, back-mapped to vacancies.
pub fn nip_evolve_against(
    model: &PopulationModel,
    x0: &[f64],
    order: usize,
    reference: &Trajectory,
    tol: f64,
) -> Result<LiftedRun> {
    let eta0 = model.x_to_eta(x0)?;
    let op = build_carleman(&koopman_system(model), order)?;
    let g0 = initial_lift(&to_c(&eta0), order)?;
    let lifted = op.evolve_first_block(&g0, &reference.times, tol)?;
    compare(reference, &lifted, eta_to_y_back)
}

/// Taylor-Carleman evolution of `y(0)` at the given order.
pub fn carleman_evolve_against(
    model: &PopulationModel,
    x0: &[f64],
    order: usize,
    reference: &Trajectory,
    tol: f64,
) -> Result<LiftedRun> {
    let y0 = model.x_to_y(x0)?;
    let op = build_carleman(&vacancy_taylor_tensors(model, order)?, order)?;
    let g0 = initial_lift(&to_c(&y0), order)?;
    let lifted = op.evolve_first_block(&g0, &reference.times, tol)?;
    compare(reference, &lifted, |g| Ok(g.to_vec()))
}

/// Runs the interaction-picture lift and measures `ε_K` against a fresh reference.
pub fn nip_evolve(
    model: &PopulationModel,
    x0: &[f64],
    order: usize,
    times: &[f64],
    tol: f64,
) -> Result<LiftedRun> {
    let reference = reference_y(model, x0, times, tol.min(1e-12))?;
    nip_evolve_against(model, x0, order, &reference, tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn small_model() -> PopulationModel {
        PopulationModel::new(
            vec![2.0, 3.0],
            vec![1.0, 2.0],
            &[(0, 0, 1, 0.3), (1, 1, 0, -0.2), (0, 1, 1, 0.1)],
        )
        .unwrap()
    }

    #[test]
    fn transforms() {
        let m = PopulationModel::new(vec![1.0], vec![1.0], &[]).unwrap();
        assert_eq!(m.x_to_eta(&[1.0]).unwrap(), vec![0.0]);
        assert_eq!(m.x_to_eta(&[0.5]).unwrap(), vec![1.0]);
        assert_eq!(m.x_to_y(&[0.5]).unwrap(), vec![0.5]);
        assert_eq!(y_to_eta(&[0.5]).unwrap(), vec![1.0]);
        assert_eq!(eta_to_y_back(&[0.0]).unwrap(), vec![0.0]);
        assert!(matches!(m.x_to_eta(&[0.0]), Err(Error::NonPositivePopulation { .. })));
        assert!(matches!(eta_to_y_back(&[-1.0]), Err(Error::BackMapPole { .. })));
    }

    #[test]
    fn low_order_vacancy_tensors() {
        let m = small_model();
        let sys = vacancy_taylor_tensors(&m, 2).unwrap();
        let f1 = sys.tensor(1).unwrap();
        assert_eq!(f1.get(0, &[0]).re, -2.0);
        assert_eq!(f1.get(1, &[1]).re, -3.0);
        let f2 = sys.tensor(2).unwrap();
        // r_0 δ + X_0 J_{0,00} (= 0) and X_1 J_{1,10}
        assert_eq!(f2.get(0, &[0, 0]).re, 2.0);
        assert_abs_diff_eq!(f2.get(1, &[1, 0]).re, -0.4, epsilon = 1e-15);
        assert_abs_diff_eq!(f2.get(0, &[0, 1]).re, 0.3, epsilon = 1e-15);
    }

    #[test]
    fn uncoupled_is_logistic() {
        let m = small_model().uncoupled();
        let sys = vacancy_taylor_tensors(&m, 5).unwrap();
        assert_eq!(sys.max_degree(), 2);
        let (_, g2) = koopman_tensors(&m);
        assert!(g2.is_zero());
        assert!(r_number_nip(&m, &[0.1, 0.0]).unwrap() == 0.0);
    }

    #[test]
    fn fixed_point_gives_zero_error() {
        let m = small_model();
        let times = [0.0, 0.05, 0.1];
        let run = nip_evolve(&m, &[1.0, 2.0], 3, &times, 1e-10).unwrap();
        assert!(run.max_error < 1e-14);
    }

    #[test]
    fn uncoupled_nip_is_exact() {
        let m = small_model().uncoupled();
        let times: Vec<f64> = (0..=10).map(|s| 0.1 * s as f64).collect();
        let run = nip_evolve(&m, &[0.7, 2.5], 1, &times, 1e-10).unwrap();
        assert!(run.max_error < 1e-9, "{}", run.max_error);
    }

    #[test]
    fn json_round_trip_and_unknown_keys() {
        let m = small_model();
        assert_eq!(PopulationModel::from_json(&m.to_json()).unwrap(), m);
        let bad = serde_json::json!({"r": [1.0], "X": [1.0], "J": [], "K": 1});
        assert!(PopulationModel::from_json(&bad).is_err());
    }
}
