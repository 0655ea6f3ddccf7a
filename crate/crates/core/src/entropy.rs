//! Specific relative entropy against Brownian motion.
//!
//! The continuous-time functional `1/2 E[int_0^1 (Sigma - log Sigma - 1) dt]`
//! is estimated by Monte Carlo along simulated paths. The grid stops at
//! `1 - epsilon_final`; the untracked piece `[t_last, 1]` is reported as a
//! bracket, and added to the point estimate only where it is known in closed
//! form.

use crate::diffusion::{
    map_brownian_paths, map_paths, DiffusionSpec, PathView, Sigma2Paths, TerminalSample, TimeGrid,
};
use crate::error::{Error, Result};
use crate::martingales::{bass_sigma2_unchecked, map_bass_paths, time_change_spec, AldousSpec, WinModel};
use crate::stats::{mean_se, pairwise_sum};
use crate::value::{pasting_delta, v_bar_upper_via_tilde};
use serde::Serialize;
use std::collections::HashMap;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntropyEstimate {
    /// Nats; grid integral plus the closed-form tail where one is known.
    pub mean: f64,
    pub std_error: f64,
    pub n_paths: usize,
    /// Bounds on the expected contribution of `[t_last, 1]`.
    pub truncation_bracket: (f64, f64),
    pub grid_id: String,
}

impl EntropyEstimate {
    pub fn is_nonnegative_within_error(&self) -> bool {
        self.mean + 3.0 * self.std_error + self.truncation_bracket.1 >= 0.0
    }
}

/// How the piece of the integral beyond the last grid node is accounted for.
#[derive(Clone, Copy)]
pub enum TailRule<'a> {
    /// The expected remaining cost from `(t, x)` is known exactly.
    Known(&'a (dyn Fn(f64, f64) -> f64 + Sync)),
    /// Unknown continuation. The estimate adds nothing (the integrand is
    /// nonnegative); the bracket's upper end is the cost of continuing with
    /// the optimal martingale, bounded through `v_tilde`.
    Pasting { delta: f64 },
}

impl TailRule<'_> {
    fn evaluate(&self, t: f64, x: f64) -> (f64, f64) {
        match *self {
            TailRule::Known(f) => {
                let v = f(t, x);
                (v, v)
            }
            TailRule::Pasting { delta } => {
                let hi = if (0.0..=1.0).contains(&x) { v_bar_upper_via_tilde(t, x, delta) } else { f64::INFINITY };
                (0.0, hi)
            }
        }
    }
}

/// Constant of the pasting estimate, computed once.
pub fn competitor_tail() -> TailRule<'static> {
    TailRule::Pasting { delta: pasting_delta() }
}

#[derive(Debug, Clone, Copy)]
struct PathCost {
    total: f64,
    tail_hi: f64,
}

/// `1/2 sum_k (Sigma_k - log Sigma_k - 1) dt_k` over unabsorbed intervals.
fn running_cost(grid: &TimeGrid, n: usize, sigma2: impl Fn(usize) -> Option<f64>) -> Result<f64> {
    let mut acc = 0.0;
    for k in 0..n {
        let Some(s) = sigma2(k) else { continue };
        if !(s > 0.0) || !s.is_finite() {
            return Err(Error::Evaluation(format!(
                "Sigma = {s} on unabsorbed interval {k} (t = {})",
                grid.nodes()[k]
            )));
        }
        acc += 0.5 * (s - s.ln() - 1.0) * grid.dt(k);
    }
    Ok(acc)
}

fn path_cost(
    grid: &TimeGrid,
    last_state: f64,
    tail: TailRule<'_>,
    sigma2: impl Fn(usize) -> Option<f64>,
) -> Result<PathCost> {
    let running = running_cost(grid, grid.n_steps(), sigma2)?;
    let (point, hi) = tail.evaluate(grid.last(), last_state);
    Ok(PathCost { total: running + point, tail_hi: hi })
}

fn summarize(costs: Vec<Result<PathCost>>, grid: &TimeGrid) -> Result<EntropyEstimate> {
    let costs: Vec<PathCost> = costs.into_iter().collect::<Result<_>>()?;
    let n = costs.len();
    let totals: Vec<f64> = costs.iter().map(|c| c.total).collect();
    let his: Vec<f64> = costs.iter().map(|c| c.tail_hi).collect();
    let m = mean_se(&totals);
    Ok(EntropyEstimate {
        mean: m.mean,
        std_error: m.std_error,
        n_paths: n,
        truncation_bracket: (0.0, pairwise_sum(&his) / n as f64),
        grid_id: grid.id(),
    })
}

/// Monte-Carlo estimate of the specific-entropy functional from per-interval
/// densities.
pub fn entropy_functional(sigma2: &Sigma2Paths, grid: &TimeGrid, tail: TailRule<'_>) -> Result<EntropyEstimate> {
    if sigma2.n_intervals != grid.n_steps() {
        return Err(Error::Parameter(format!(
            "{} intervals per path but the grid has {}",
            sigma2.n_intervals,
            grid.n_steps()
        )));
    }
    if sigma2.n_paths == 0 {
        return Err(Error::Parameter("no paths".into()));
    }
    let costs = (0..sigma2.n_paths)
        .map(|p| {
            let (row, absorbed) = sigma2.row(p);
            path_cost(grid, sigma2.last_state[p], tail, |k| (!absorbed[k]).then(|| row[k]))
        })
        .collect();
    summarize(costs, grid)
}

/// Where per-interval densities come from in the streaming estimators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SigmaSource {
    /// The model's known `sigma^2` at the interval's time and left state.
    Analytic,
    /// `(dM)^2 / dt` from the simulated increments.
    Realized,
}

impl std::str::FromStr for SigmaSource {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "analytic" => Ok(SigmaSource::Analytic),
            "realized" => Ok(SigmaSource::Realized),
            other => Err(Error::Parameter(format!("unknown sigma source `{other}`"))),
        }
    }
}

fn alive(x: f64) -> bool {
    x > 0.0 && x < 1.0
}

fn realized(grid: &TimeGrid, values: &[f64], k: usize) -> Option<f64> {
    alive(values[k]).then(|| {
        let d = values[k + 1] - values[k];
        d * d / grid.dt(k)
    })
}

/// Streaming estimate for a diffusion spec; the ensemble is never stored.
pub fn spec_entropy<S: DiffusionSpec + ?Sized>(
    spec: &S,
    grid: &TimeGrid,
    x0: f64,
    n_paths: usize,
    seed: u64,
    source: SigmaSource,
) -> Result<EntropyEstimate> {
    let known = |t: f64, x: f64| spec.tail_cost(t, x).unwrap_or(0.0);
    let tail = if spec.tail_cost(grid.last(), 0.5).is_some() { TailRule::Known(&known) } else { competitor_tail() };
    let costs = map_paths(spec, grid, x0, n_paths, seed, |v: PathView<'_>| {
        let last = v.values[grid.n_steps()];
        path_cost(grid, last, tail, |k| match source {
            SigmaSource::Analytic => alive(v.values[k]).then(|| spec.sigma2(grid.mid(k), v.values[k])),
            SigmaSource::Realized => realized(grid, v.values, k),
        })
    })?;
    summarize(costs, grid)
}

/// Streaming estimate for the Bass martingale; analytic densities are
/// evaluated along the driving Brownian path.
pub fn bass_entropy(
    grid: &TimeGrid,
    x0: f64,
    n_paths: usize,
    seed: u64,
    source: SigmaSource,
) -> Result<EntropyEstimate> {
    let tail = competitor_tail();
    let costs = map_bass_paths(grid, x0, n_paths, seed, |v| {
        let last = v.values[grid.n_steps()];
        path_cost(grid, last, tail, |k| match source {
            SigmaSource::Analytic => alive(v.values[k]).then(|| bass_sigma2_unchecked(grid.mid(k), v.brownian[k])),
            SigmaSource::Realized => realized(grid, v.values, k),
        })
    })?;
    summarize(costs, grid)
}

/// Streaming estimate for any addressable win-martingale.
pub fn model_entropy(
    model: &WinModel,
    grid: &TimeGrid,
    x0: f64,
    n_paths: usize,
    seed: u64,
    source: SigmaSource,
) -> Result<EntropyEstimate> {
    match model {
        WinModel::Aldous => spec_entropy(&AldousSpec, grid, x0, n_paths, seed, source),
        WinModel::Bass => bass_entropy(grid, x0, n_paths, seed, source),
        WinModel::AldousTimeChanged(tc) => {
            spec_entropy(&time_change_spec(AldousSpec, tc.clone()), grid, x0, n_paths, seed, source)
        }
    }
}

/// Estimate for Brownian motion with constant quadratic-variation density
/// `a`, simulated without confinement. The tail `(1 - t) (a - log a - 1) / 2`
/// is exact.
pub fn constant_vol_entropy(a: f64, grid: &TimeGrid, x0: f64, n_paths: usize, seed: u64) -> Result<EntropyEstimate> {
    if !(a > 0.0) {
        return Err(Error::Domain(format!("constant density must be positive, got {a}")));
    }
    let rate = 0.5 * (a - a.ln() - 1.0);
    let known = move |t: f64, _x: f64| rate * (1.0 - t);
    let tail = TailRule::Known(&known);
    let costs = map_brownian_paths(grid, x0, a.sqrt(), n_paths, seed, |_, b| {
        path_cost(grid, b[grid.n_steps()], tail, |_| Some(a))
    })?;
    summarize(costs, grid)
}

/// KL divergence `KL(N(0, s1) | N(0, s2))` between centered normals given by
/// their variances.
fn gaussian_kl(var_p: f64, var_q: f64) -> f64 {
    0.5 * (var_p / var_q - 1.0 - (var_p / var_q).ln())
}

/// `(1/n) H(X^n(Q) | X^n(W))` for `Q` a Brownian motion with constant
/// quadratic-variation density `a`: the `n` increments are independent
/// centered Gaussians with variances `a/n` against `1/n`.
pub fn gantert_discrete_entropy_constant_vol(a: f64, n: usize) -> Result<f64> {
    if !(a > 0.0) {
        return Err(Error::Domain(format!("a must be positive, got {a}")));
    }
    if n == 0 {
        return Err(Error::Parameter("n must be at least 1".into()));
    }
    let dt = 1.0 / n as f64;
    let total: f64 = (0..n).map(|_| gaussian_kl(a * dt, dt)).sum();
    Ok(total / n as f64)
}

/// True when the terminal sample has atoms, i.e. repeated values or mass on
/// the win outcomes `{0, 1}`. Then every time-discretized relative entropy
/// against Wiener measure is infinite.
pub fn atomic_terminal_detector<E: TerminalSample + ?Sized>(ensemble: &E) -> bool {
    let values = ensemble.terminal_values();
    let mut seen: HashMap<u64, usize> = HashMap::new();
    for v in &values {
        let c = seen.entry(v.to_bits()).or_default();
        *c += 1;
        if *c > 1 {
            return true;
        }
    }
    false
}
