//! Time grids, Euler–Maruyama simulation of `[0,1]`-valued martingale
//! diffusions, and realized quadratic-variation extraction.
//!
//! The diffusion coefficient of interval `k` is evaluated at the interval's
//! midpoint in time and at the state of its left node. Coefficients that vanish
//! at `t = 0` (time-changed competitors) stay well defined that way.

use crate::error::{Error, Result};
use crate::rng::path_stream;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;

/// Default distance of the last grid node to the singular endpoint `t = 1`.
pub const DEFAULT_EPSILON_FINAL: f64 = 1.0 / 1_048_576.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridMode {
    Uniform,
    Geometric,
}

impl std::str::FromStr for GridMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(GridMode::Uniform),
            "geometric" => Ok(GridMode::Geometric),
            other => Err(Error::Parameter(format!("unknown grid mode `{other}`"))),
        }
    }
}

/// Strictly increasing time nodes on `[start_time, 1 - epsilon_final]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    start_time: f64,
    nodes: Vec<f64>,
    mode: GridMode,
    epsilon_final: f64,
}

impl TimeGrid {
    /// Builds a grid with `n_steps` intervals.
    ///
    /// In geometric mode the remaining time `1 - t` shrinks by the same factor
    /// on every step, so `dt / (1 - t)` is constant and the endgame near `t = 1`
    /// gets as many nodes as the start of the game.
    pub fn new(start_time: f64, n_steps: usize, mode: GridMode, epsilon_final: f64) -> Result<Self> {
        if n_steps == 0 {
            return Err(Error::Parameter("n_steps must be at least 1".into()));
        }
        if !(epsilon_final > 0.0) || !(start_time >= 0.0) || !(start_time < 1.0 - epsilon_final) {
            return Err(Error::Parameter(format!(
                "need 0 <= start_time < 1 - epsilon_final, got start_time={start_time}, epsilon_final={epsilon_final}"
            )));
        }
        let end = 1.0 - epsilon_final;
        let mut nodes: Vec<f64> = match mode {
            GridMode::Uniform => {
                let h = (end - start_time) / n_steps as f64;
                (0..=n_steps).map(|k| start_time + k as f64 * h).collect()
            }
            GridMode::Geometric => {
                let remaining = 1.0 - start_time;
                let log_ratio = (epsilon_final / remaining).ln() / n_steps as f64;
                (0..=n_steps)
                    .map(|k| 1.0 - remaining * (log_ratio * k as f64).exp())
                    .collect()
            }
        };
        nodes[0] = start_time;
        nodes[n_steps] = end;
        if nodes.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Parameter(format!(
                "grid with {n_steps} steps is not strictly increasing in floating point"
            )));
        }
        Ok(Self { start_time, nodes, mode, epsilon_final })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn n_steps(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn start_time(&self) -> f64 {
        self.start_time
    }

    pub fn mode(&self) -> GridMode {
        self.mode
    }

    pub fn epsilon_final(&self) -> f64 {
        self.epsilon_final
    }

    pub fn last(&self) -> f64 {
        self.nodes[self.nodes.len() - 1]
    }

    pub fn dt(&self, k: usize) -> f64 {
        self.nodes[k + 1] - self.nodes[k]
    }

    /// Midpoint of interval `k`.
    pub fn mid(&self, k: usize) -> f64 {
        0.5 * (self.nodes[k] + self.nodes[k + 1])
    }

    /// Index of the node closest to `t`.
    pub fn nearest_index(&self, t: f64) -> usize {
        let i = self.nodes.partition_point(|&s| s < t);
        if i == 0 {
            0
        } else if i == self.nodes.len() {
            i - 1
        } else if (self.nodes[i] - t).abs() < (t - self.nodes[i - 1]).abs() {
            i
        } else {
            i - 1
        }
    }

    pub fn id(&self) -> String {
        let mode = match self.mode {
            GridMode::Uniform => "uniform",
            GridMode::Geometric => "geometric",
        };
        format!("{mode}:{}:{}:{:e}", self.start_time, self.n_steps(), self.epsilon_final)
    }
}

pub fn make_grid(start_time: f64, n_steps: usize, mode: GridMode, epsilon_final: f64) -> Result<TimeGrid> {
    TimeGrid::new(start_time, n_steps, mode, epsilon_final)
}

/// A volatility surface `sigma(t, x)` on `[0,1) x [0,1]`.
pub trait DiffusionSpec: Send + Sync {
    fn id(&self) -> String;

    fn sigma(&self, t: f64, x: f64) -> f64;

    /// Quadratic-variation density `sigma^2`.
    fn sigma2(&self, t: f64, x: f64) -> f64 {
        let s = self.sigma(t, x);
        s * s
    }

    /// Expected remaining entropy cost from `(t, x)` when known in closed form.
    fn tail_cost(&self, _t: f64, _x: f64) -> Option<f64> {
        None
    }
}

/// A spec defined by a closure, mostly for checks and experiments.
pub struct FnSpec<F> {
    id: String,
    sigma: F,
}

impl<F: Fn(f64, f64) -> f64 + Send + Sync> FnSpec<F> {
    pub fn new(id: impl Into<String>, sigma: F) -> Self {
        Self { id: id.into(), sigma }
    }
}

impl<F: Fn(f64, f64) -> f64 + Send + Sync> DiffusionSpec for FnSpec<F> {
    fn id(&self) -> String {
        self.id.clone()
    }
    fn sigma(&self, t: f64, x: f64) -> f64 {
        (self.sigma)(t, x)
    }
}

impl<S: DiffusionSpec + ?Sized> DiffusionSpec for std::sync::Arc<S> {
    fn id(&self) -> String {
        (**self).id()
    }
    fn sigma(&self, t: f64, x: f64) -> f64 {
        (**self).sigma(t, x)
    }
    fn sigma2(&self, t: f64, x: f64) -> f64 {
        (**self).sigma2(t, x)
    }
    fn tail_cost(&self, t: f64, x: f64) -> Option<f64> {
        (**self).tail_cost(t, x)
    }
}

/// One simulated path handed to a [`map_paths`] callback.
#[derive(Debug, Clone, Copy)]
pub struct PathView<'a> {
    pub index: usize,
    pub values: &'a [f64],
    pub terminal: u8,
}

fn validate_start(x0: f64, n_paths: usize) -> Result<()> {
    if !(0.0..=1.0).contains(&x0) {
        return Err(Error::Parameter(format!("x0 must lie in [0,1], got {x0}")));
    }
    if n_paths == 0 {
        return Err(Error::Parameter("n_paths must be at least 1".into()));
    }
    Ok(())
}

/// Clamped Euler–Maruyama path followed by a Bernoulli completion of the
/// terminal outcome. Returns the outcome in `{0, 1}`.
fn euler_path<S: DiffusionSpec + ?Sized, R: Rng>(
    spec: &S,
    grid: &TimeGrid,
    x0: f64,
    rng: &mut R,
    buf: &mut [f64],
) -> u8 {
    let mut m = x0;
    buf[0] = m;
    for k in 0..grid.n_steps() {
        if m > 0.0 && m < 1.0 {
            let z: f64 = rng.sample(StandardNormal);
            let step = spec.sigma(grid.mid(k), m) * grid.dt(k).sqrt() * z;
            m = (m + step).clamp(0.0, 1.0);
        }
        buf[k + 1] = m;
    }
    let u: f64 = rng.random();
    u8::from(u < m)
}

/// Simulates `n_paths` paths and maps each through `f` without keeping the
/// ensemble in memory. Results come back in path order and are identical for
/// any number of worker threads.
pub fn map_paths<S, T, F>(
    spec: &S,
    grid: &TimeGrid,
    x0: f64,
    n_paths: usize,
    seed: u64,
    f: F,
) -> Result<Vec<T>>
where
    S: DiffusionSpec + ?Sized,
    T: Send,
    F: Fn(PathView<'_>) -> T + Sync,
{
    validate_start(x0, n_paths)?;
    let n_nodes = grid.n_nodes();
    Ok((0..n_paths)
        .into_par_iter()
        .map_init(
            || vec![0.0; n_nodes],
            |buf, p| {
                let mut rng = path_stream(seed, p as u64);
                let terminal = euler_path(spec, grid, x0, &mut rng, buf);
                f(PathView { index: p, values: buf, terminal })
            },
        )
        .collect())
}

/// A stored ensemble of `[0,1]`-valued paths with completed terminal outcomes.
#[derive(Debug, Clone, PartialEq)]
pub struct PathEnsemble {
    pub grid: TimeGrid,
    pub seed: u64,
    pub spec_id: String,
    n_paths: usize,
    values: Vec<f64>,
    terminal: Vec<u8>,
}

impl PathEnsemble {
    /// Assembles an ensemble from row-major path values, checking the range
    /// and absorption invariants.
    pub fn from_parts(
        grid: TimeGrid,
        spec_id: String,
        seed: u64,
        values: Vec<f64>,
        terminal: Vec<u8>,
    ) -> Result<Self> {
        let n_nodes = grid.n_nodes();
        if !values.len().is_multiple_of(n_nodes) || values.len() / n_nodes != terminal.len() {
            return Err(Error::Parameter("ensemble shape does not match grid".into()));
        }
        let ens = Self { n_paths: terminal.len(), grid, seed, spec_id, values, terminal };
        ens.check_invariants()?;
        Ok(ens)
    }

    pub fn n_paths(&self) -> usize {
        self.n_paths
    }

    pub fn n_nodes(&self) -> usize {
        self.grid.n_nodes()
    }

    pub fn path(&self, p: usize) -> &[f64] {
        let n = self.n_nodes();
        &self.values[p * n..(p + 1) * n]
    }

    pub fn paths(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.n_nodes())
    }

    pub fn value(&self, p: usize, k: usize) -> f64 {
        self.values[p * self.n_nodes() + k]
    }

    pub fn terminal(&self) -> &[u8] {
        &self.terminal
    }

    /// Values of all paths at node `k`.
    pub fn column(&self, k: usize) -> Vec<f64> {
        self.paths().map(|p| p[k]).collect()
    }

    pub fn check_invariants(&self) -> Result<()> {
        for (p, path) in self.paths().enumerate() {
            let mut absorbed: Option<f64> = None;
            for (k, &v) in path.iter().enumerate() {
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::Evaluation(format!("path {p} leaves [0,1] at node {k}: {v}")));
                }
                if let Some(a) = absorbed {
                    if v != a {
                        return Err(Error::Evaluation(format!("path {p} leaves absorbing state {a} at node {k}")));
                    }
                } else if v == 0.0 || v == 1.0 {
                    absorbed = Some(v);
                }
            }
            if self.terminal[p] > 1 {
                return Err(Error::Evaluation(format!("path {p} has terminal outcome {}", self.terminal[p])));
            }
        }
        Ok(())
    }

    /// Writes `path,t,value` rows.
    pub fn write_paths_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "path,t,value")?;
        for (p, path) in self.paths().enumerate() {
            for (t, v) in self.grid.nodes().iter().zip(path) {
                writeln!(w, "{p},{t:e},{v:e}")?;
            }
        }
        Ok(())
    }

    /// Writes `path,terminal` rows.
    pub fn write_terminal_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "path,terminal")?;
        for (p, t) in self.terminal.iter().enumerate() {
            writeln!(w, "{p},{t}")?;
        }
        Ok(())
    }
}

/// Euler–Maruyama ensemble of `spec` started at `x0`.
pub fn simulate_paths<S: DiffusionSpec + ?Sized>(
    spec: &S,
    grid: &TimeGrid,
    x0: f64,
    n_paths: usize,
    seed: u64,
) -> Result<PathEnsemble> {
    let rows = map_paths(spec, grid, x0, n_paths, seed, |v| (v.values.to_vec(), v.terminal))?;
    let mut values = Vec::with_capacity(n_paths * grid.n_nodes());
    let mut terminal = Vec::with_capacity(n_paths);
    for (row, t) in rows {
        values.extend_from_slice(&row);
        terminal.push(t);
    }
    PathEnsemble::from_parts(grid.clone(), spec.id(), seed, values, terminal)
}

/// Unconfined Brownian ensemble `b0 + scale * W_t` sampled exactly on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct BrownianEnsemble {
    pub grid: TimeGrid,
    pub seed: u64,
    pub scale: f64,
    n_paths: usize,
    values: Vec<f64>,
}

pub(crate) fn brownian_path<R: Rng>(grid: &TimeGrid, b0: f64, scale: f64, rng: &mut R, buf: &mut [f64]) {
    let mut b = b0;
    buf[0] = b;
    for k in 0..grid.n_steps() {
        let z: f64 = rng.sample(StandardNormal);
        b += scale * grid.dt(k).sqrt() * z;
        buf[k + 1] = b;
    }
}

/// Streams Brownian paths through `f`, in path order.
pub fn map_brownian_paths<T, F>(
    grid: &TimeGrid,
    b0: f64,
    scale: f64,
    n_paths: usize,
    seed: u64,
    f: F,
) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize, &[f64]) -> T + Sync,
{
    if n_paths == 0 {
        return Err(Error::Parameter("n_paths must be at least 1".into()));
    }
    if !(scale >= 0.0) || !b0.is_finite() {
        return Err(Error::Parameter(format!("invalid Brownian parameters b0={b0}, scale={scale}")));
    }
    let n_nodes = grid.n_nodes();
    Ok((0..n_paths)
        .into_par_iter()
        .map_init(
            || vec![0.0; n_nodes],
            |buf, p| {
                let mut rng = path_stream(seed, p as u64);
                brownian_path(grid, b0, scale, &mut rng, buf);
                f(p, buf)
            },
        )
        .collect())
}

pub fn simulate_brownian(grid: &TimeGrid, b0: f64, scale: f64, n_paths: usize, seed: u64) -> Result<BrownianEnsemble> {
    let rows = map_brownian_paths(grid, b0, scale, n_paths, seed, |_, v| v.to_vec())?;
    Ok(BrownianEnsemble { grid: grid.clone(), seed, scale, n_paths, values: rows.concat() })
}

impl BrownianEnsemble {
    pub fn n_paths(&self) -> usize {
        self.n_paths
    }

    pub fn path(&self, p: usize) -> &[f64] {
        let n = self.grid.n_nodes();
        &self.values[p * n..(p + 1) * n]
    }

    pub fn paths(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.grid.n_nodes())
    }
}

/// Terminal samples of an ensemble, used to probe the terminal law.
pub trait TerminalSample {
    fn terminal_values(&self) -> Vec<f64>;
}

impl TerminalSample for PathEnsemble {
    fn terminal_values(&self) -> Vec<f64> {
        self.terminal.iter().map(|&t| f64::from(t)).collect()
    }
}

impl TerminalSample for BrownianEnsemble {
    fn terminal_values(&self) -> Vec<f64> {
        self.paths().map(|p| p[p.len() - 1]).collect()
    }
}

/// Per-path, per-interval quadratic-variation densities.
///
/// `absorbed[i]` marks intervals that start on the boundary `{0, 1}`; those
/// carry `Sigma = 0` and do not contribute to entropy integrals.
#[derive(Debug, Clone, PartialEq)]
pub struct Sigma2Paths {
    pub n_paths: usize,
    pub n_intervals: usize,
    pub values: Vec<f64>,
    pub absorbed: Vec<bool>,
    /// State at the last grid node, per path.
    pub last_state: Vec<f64>,
}

impl Sigma2Paths {
    pub fn row(&self, p: usize) -> (&[f64], &[bool]) {
        let r = p * self.n_intervals..(p + 1) * self.n_intervals;
        (&self.values[r.clone()], &self.absorbed[r])
    }
}

fn is_absorbed(x: f64) -> bool {
    x <= 0.0 || x >= 1.0
}

fn realized_rows<'a>(grid: &TimeGrid, paths: impl Iterator<Item = &'a [f64]>, confined: bool) -> Sigma2Paths {
    let n_int = grid.n_steps();
    let (mut values, mut absorbed, mut last_state) = (Vec::new(), Vec::new(), Vec::new());
    for path in paths {
        for k in 0..n_int {
            let d = path[k + 1] - path[k];
            values.push(d * d / grid.dt(k));
            absorbed.push(confined && is_absorbed(path[k]));
        }
        last_state.push(path[n_int]);
    }
    Sigma2Paths { n_paths: last_state.len(), n_intervals: n_int, values, absorbed, last_state }
}

/// Realized estimator `(dM)^2 / dt` on every interval.
pub fn realized_sigma2(ensemble: &PathEnsemble) -> Sigma2Paths {
    realized_rows(&ensemble.grid, ensemble.paths(), true)
}

impl BrownianEnsemble {
    /// Realized `(dB)^2 / dt`; Brownian paths are never absorbed.
    pub fn realized_sigma2(&self) -> Sigma2Paths {
        realized_rows(&self.grid, self.paths(), false)
    }
}

/// Known `sigma^2` evaluated along the stored paths (same time convention as
/// the simulator).
pub fn analytic_sigma2<S: DiffusionSpec + ?Sized>(spec: &S, ensemble: &PathEnsemble) -> Sigma2Paths {
    let grid = &ensemble.grid;
    let n_int = grid.n_steps();
    let mut values = Vec::with_capacity(ensemble.n_paths() * n_int);
    let mut absorbed = Vec::with_capacity(ensemble.n_paths() * n_int);
    for path in ensemble.paths() {
        for k in 0..n_int {
            let a = is_absorbed(path[k]);
            values.push(if a { 0.0 } else { spec.sigma2(grid.mid(k), path[k]) });
            absorbed.push(a);
        }
    }
    Sigma2Paths {
        n_paths: ensemble.n_paths(),
        n_intervals: n_int,
        values,
        absorbed,
        last_state: ensemble.paths().map(|p| p[p.len() - 1]).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::mean_se;

    struct Unit;
    impl DiffusionSpec for Unit {
        fn id(&self) -> String {
            "unit".into()
        }
        fn sigma(&self, _t: f64, _x: f64) -> f64 {
            1.0
        }
    }

    #[test]
    fn uniform_grid_examples() {
        let g = make_grid(0.0, 4, GridMode::Uniform, 0.2).unwrap();
        let expect = [0.0, 0.2, 0.4, 0.6, 0.8];
        for (a, b) in g.nodes().iter().zip(expect) {
            assert!((a - b).abs() < 1e-15);
        }
        let g = make_grid(0.9, 2, GridMode::Uniform, 0.05).unwrap();
        for (a, b) in g.nodes().iter().zip([0.9, 0.925, 0.95]) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn geometric_grid_ratio_is_bounded() {
        let g = make_grid(0.0, 4096, GridMode::Geometric, DEFAULT_EPSILON_FINAL).unwrap();
        assert_eq!(g.last(), 1.0 - DEFAULT_EPSILON_FINAL);
        let ratios: Vec<f64> = g.nodes().windows(2).map(|w| (1.0 - w[1]) / (1.0 - w[0])).collect();
        let lo = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = ratios.iter().cloned().fold(0.0, f64::max);
        let expected = 2f64.powf(-20.0 / 4096.0);
        assert!((lo - expected).abs() < 1e-9 && (hi - expected).abs() < 1e-9, "{lo} {hi}");
        // Most of the nodes sit in the last percent of the time interval.
        let late = g.nodes().iter().filter(|&&t| t > 0.99).count();
        assert!(late as f64 > 0.45 * g.n_nodes() as f64);
    }

    #[test]
    fn grid_rejects_bad_ranges() {
        assert!(make_grid(0.0, 0, GridMode::Uniform, 0.1).is_err());
        assert!(make_grid(0.95, 4, GridMode::Uniform, 0.1).is_err());
        assert!(make_grid(-0.1, 4, GridMode::Uniform, 0.1).is_err());
        assert!(make_grid(0.0, 4, GridMode::Geometric, 0.0).is_err());
    }

    #[test]
    fn nearest_index_picks_closest_node() {
        let g = make_grid(0.0, 4, GridMode::Uniform, 0.2).unwrap();
        assert_eq!(g.nearest_index(0.31), 2);
        assert_eq!(g.nearest_index(-1.0), 0);
        assert_eq!(g.nearest_index(0.99), 4);
    }

    #[test]
    fn boundary_start_is_absorbed() {
        let g = make_grid(0.0, 64, GridMode::Uniform, 0.01).unwrap();
        let e = simulate_paths(&Unit, &g, 0.0, 50, 3).unwrap();
        assert!(e.paths().all(|p| p.iter().all(|&v| v == 0.0)));
        assert!(e.terminal().iter().all(|&t| t == 0));
    }

    #[test]
    fn ensembles_satisfy_range_and_absorption() {
        let g = make_grid(0.0, 200, GridMode::Uniform, 0.01).unwrap();
        let e = simulate_paths(&Unit, &g, 0.5, 300, 11).unwrap();
        e.check_invariants().unwrap();
        // unit vol on [0,1] absorbs most paths well before t = 1
        assert!(e.paths().filter(|p| p[p.len() - 1] == 0.0 || p[p.len() - 1] == 1.0).count() > 100);
    }

    #[test]
    fn constant_path_has_zero_realized_vol() {
        let g = make_grid(0.0, 8, GridMode::Uniform, 0.2).unwrap();
        let zero = FnSpec::new("zero", |_, _| 0.0);
        let e = simulate_paths(&zero, &g, 0.5, 3, 1).unwrap();
        assert!(realized_sigma2(&e).values.iter().all(|&s| s == 0.0));
    }

    #[test]
    fn unit_vol_brownian_realized_mean_is_one() {
        // E[(dB)^2] = dt, so the time-average of the realized density is 1.
        let g = make_grid(0.0, 256, GridMode::Geometric, 1e-3).unwrap();
        let e = simulate_brownian(&g, 0.0, 1.0, 2000, 5).unwrap();
        let s2 = e.realized_sigma2();
        let span = g.last() - g.start_time();
        let per_path: Vec<f64> = (0..s2.n_paths)
            .map(|p| s2.row(p).0.iter().enumerate().map(|(k, s)| s * g.dt(k)).sum::<f64>() / span)
            .collect();
        let m = mean_se(&per_path);
        assert!((m.mean - 1.0).abs() < 3.0 * m.std_error, "{m:?}");
    }

    #[test]
    fn parallelism_does_not_change_output() {
        let g = make_grid(0.0, 128, GridMode::Geometric, 1e-4).unwrap();
        let spec = FnSpec::new("sin", |t: f64, x: f64| (std::f64::consts::PI * x).sin() / (std::f64::consts::PI * (1.0 - t).sqrt()));
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = one.install(|| simulate_paths(&spec, &g, 0.3, 257, 99).unwrap());
        let b = four.install(|| simulate_paths(&spec, &g, 0.3, 257, 99).unwrap());
        assert_eq!(a, b);
        let bits = |e: &PathEnsemble| e.paths().flatten().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
    }

    #[test]
    fn csv_schema() {
        let g = make_grid(0.0, 2, GridMode::Uniform, 0.5).unwrap();
        let zero = FnSpec::new("zero", |_, _| 0.0);
        let e = simulate_paths(&zero, &g, 0.25, 2, 1).unwrap();
        let mut out = Vec::new();
        e.write_paths_csv(&mut out).unwrap();
        let s = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines[0], "path,t,value");
        assert_eq!(lines.len(), 1 + 2 * 3);
        let mut out = Vec::new();
        e.write_terminal_csv(&mut out).unwrap();
        assert!(String::from_utf8(out).unwrap().starts_with("path,terminal\n0,"));
    }
}
