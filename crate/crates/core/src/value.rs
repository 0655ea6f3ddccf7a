//! Closed-form value functions of the win-martingale problem and the
//! numerical certificates built on them: HJB and log-volatility PDE
//! residuals, the scaling ODE, Feller's test and increment-orthogonality
//! martingale tests.

use crate::diffusion::{map_paths, DiffusionSpec, TimeGrid};
use crate::error::{Error, Result};
use crate::martingales::{aldous_sigma, bass_sigma2_unchecked, map_bass_paths, time_change_spec, AldousSpec, WinModel};
use crate::quadrature;
use crate::stats::mean_se;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::f64::consts::PI;

/// Cost-to-go of the optimal martingale started at `(s, x)`:
/// `(x - x^2 - 1 + s)/2 - (1-s) log(sin(pi x) / (pi sqrt(1-s)))`.
///
/// Boundary convention: `+inf` at `x in {0,1}` for `s < 1`; at `s = 1` the
/// limit `(x - x^2)/2` (zero on the boundary). `NaN` outside `[0,1]^2`.
pub fn v_bar(s: f64, x: f64) -> f64 {
    if !(0.0..=1.0).contains(&s) || !(0.0..=1.0).contains(&x) {
        return f64::NAN;
    }
    if s == 1.0 {
        return 0.5 * (x - x * x);
    }
    if x == 0.0 || x == 1.0 {
        return f64::INFINITY;
    }
    let r = 1.0 - s;
    0.5 * (x - x * x - r) - r * ((PI * x).sin() / (PI * r.sqrt())).ln()
}

/// `d/dx v_bar = (1 - 2x)/2 - pi (1-s) cot(pi x)`.
pub fn v_bar_dx(s: f64, x: f64) -> f64 {
    0.5 * (1.0 - 2.0 * x) - PI * (1.0 - s) / (PI * x).tan()
}

/// `d^2/dx^2 v_bar = pi^2 (1-s) / sin^2(pi x) - 1`.
pub fn v_bar_dxx(s: f64, x: f64) -> f64 {
    let sn = (PI * x).sin();
    PI * PI * (1.0 - s) / (sn * sn) - 1.0
}

/// Universal lower bound
/// `(x - x^2 - 1 + s)/2 - (1-s) log(sqrt(x(1-x)) / sqrt(1-s))`.
pub fn v_tilde(s: f64, x: f64) -> f64 {
    let r = 1.0 - s;
    0.5 * (x - x * x - r) - 0.5 * r * (x * (1.0 - x) / r).ln()
}

pub fn v_tilde_dx(s: f64, x: f64) -> f64 {
    let q = x * (1.0 - x);
    0.5 * (1.0 - 2.0 * x) - 0.5 * (1.0 - s) * (1.0 - 2.0 * x) / q
}

/// Minimal specific relative entropy of a win-martingale started at `x0`.
pub fn optimal_value(x0: f64) -> Result<f64> {
    if !(x0 > 0.0 && x0 < 1.0) {
        return Err(Error::Domain(format!("optimal value is +inf for x0 = {x0} outside (0,1)")));
    }
    Ok(0.5 * (x0 * (1.0 - x0) - 1.0) - ((PI * x0).sin() / PI).ln())
}

/// Pointwise minimizer `1 / (1 + d^2 v_bar / dx^2)` of the HJB Hamiltonian.
pub fn sigma_star(t: f64, x: f64) -> f64 {
    1.0 / (1.0 + v_bar_dxx(t, x))
}

/// Objective `Sigma * d2v + Sigma - log Sigma` minimized pointwise in the HJB.
pub fn hamiltonian_objective(sigma2: f64, d2v: f64) -> f64 {
    sigma2 * d2v + sigma2 - sigma2.ln()
}

/// `inf_{Sigma >= 0} {Sigma d2v + Sigma - log Sigma - 1} = log(1 + d2v)`,
/// or `-inf` when `1 + d2v <= 0`.
pub fn hamiltonian_inf(d2v: f64) -> f64 {
    if 1.0 + d2v > 0.0 {
        (1.0 + d2v).ln()
    } else {
        f64::NEG_INFINITY
    }
}

/// A candidate value function with a closed-form space derivative.
pub trait ValueFunction {
    fn value(&self, s: f64, x: f64) -> f64;
    fn dx(&self, s: f64, x: f64) -> f64;
}

/// The optimal cost-to-go `v_bar`.
#[derive(Debug, Clone, Copy, Default)]
pub struct VBar;

/// The Jensen lower bound `v_tilde`.
#[derive(Debug, Clone, Copy, Default)]
pub struct VTilde;

impl ValueFunction for VBar {
    fn value(&self, s: f64, x: f64) -> f64 {
        v_bar(s, x)
    }
    fn dx(&self, s: f64, x: f64) -> f64 {
        v_bar_dx(s, x)
    }
}

impl ValueFunction for VTilde {
    fn value(&self, s: f64, x: f64) -> f64 {
        v_tilde(s, x)
    }
    fn dx(&self, s: f64, x: f64) -> f64 {
        v_tilde_dx(s, x)
    }
}

/// HJB residual `d_t v + (1/2) inf_Sigma {...}` with a central difference in
/// time and a central difference of the closed-form `d_x v` in space.
pub fn hjb_residual_for<V: ValueFunction + ?Sized>(v: &V, t: f64, x: f64, h_fd: f64) -> f64 {
    let dt = (v.value(t + h_fd, x) - v.value(t - h_fd, x)) / (2.0 * h_fd);
    let dxx = (v.dx(t, x + h_fd) - v.dx(t, x - h_fd)) / (2.0 * h_fd);
    dt + 0.5 * hamiltonian_inf(dxx)
}

pub fn hjb_residual(t: f64, x: f64, h_fd: f64) -> f64 {
    hjb_residual_for(&VBar, t, x, h_fd)
}

/// A cost `c(Sigma)` on quadratic-variation densities.
pub trait VolatilityCost {
    fn cost(&self, sigma2: f64) -> f64;
    fn derivative(&self, sigma2: f64) -> f64;
}

/// `c(Sigma) = (Sigma - log Sigma - 1) / 2`.
#[derive(Debug, Clone, Copy, Default)]
pub struct SpecificEntropyCost;

impl VolatilityCost for SpecificEntropyCost {
    fn cost(&self, s: f64) -> f64 {
        0.5 * (s - s.ln() - 1.0)
    }
    fn derivative(&self, s: f64) -> f64 {
        0.5 * (1.0 - 1.0 / s)
    }
}

/// First-order process `L = Sigma c'(Sigma) - c(Sigma)`; must be a martingale
/// along an optimizer.
pub fn foc_process<C: VolatilityCost + ?Sized>(cost: &C, sigma2: f64) -> Result<f64> {
    if !(sigma2 > 0.0) {
        return Err(Error::Domain(format!("Sigma must be positive, got {sigma2}")));
    }
    Ok(sigma2 * cost.derivative(sigma2) - cost.cost(sigma2))
}

/// A one-variable volatility profile `sigma(x)` for the scaling ODE.
pub trait Profile {
    fn value(&self, x: f64) -> f64;
    /// Exact `(sigma', sigma'')` when available.
    fn derivatives(&self, _x: f64) -> Option<(f64, f64)> {
        None
    }
}

/// `sin(alpha x + beta) / alpha`, the general solution of the scaling ODE.
#[derive(Debug, Clone, Copy)]
pub struct SineProfile {
    pub alpha: f64,
    pub beta: f64,
}

impl SineProfile {
    pub const ALDOUS: SineProfile = SineProfile { alpha: PI, beta: 0.0 };
}

impl Profile for SineProfile {
    fn value(&self, x: f64) -> f64 {
        (self.alpha * x + self.beta).sin() / self.alpha
    }
    fn derivatives(&self, x: f64) -> Option<(f64, f64)> {
        let u = self.alpha * x + self.beta;
        Some((u.cos(), -self.alpha * u.sin()))
    }
}

/// Profile given only by its values; derivatives come from finite differences.
pub struct FnProfile<F>(pub F);

impl<F: Fn(f64) -> f64> Profile for FnProfile<F> {
    fn value(&self, x: f64) -> f64 {
        (self.0)(x)
    }
}

const ODE_FD_STEP: f64 = 1e-3;

/// `sigma'' sigma - (sigma')^2 + 1`, zero for solutions of the scaling ODE.
/// Falls back to fourth-order central differences when exact derivatives are
/// not available.
pub fn ode_residual<P: Profile + ?Sized>(profile: &P, x: f64) -> f64 {
    let s = profile.value(x);
    let (d1, d2) = profile.derivatives(x).unwrap_or_else(|| {
        let h = ODE_FD_STEP;
        let f = |k: f64| profile.value(x + k * h);
        let (fm2, fm1, f1, f2) = (f(-2.0), f(-1.0), f(1.0), f(2.0));
        let d1 = (fm2 - 8.0 * fm1 + 8.0 * f1 - f2) / (12.0 * h);
        let d2 = (-fm2 + 16.0 * fm1 - 30.0 * s + 16.0 * f1 - f2) / (12.0 * h * h);
        (d1, d2)
    });
    d2 * s - d1 * d1 + 1.0
}

/// `(d_t + sigma^2/2 d_xx) log sigma` by central differences.
pub fn pde_log_sigma_residual<S: DiffusionSpec + ?Sized>(spec: &S, t: f64, x: f64, h_fd: f64) -> f64 {
    let f = |t: f64, x: f64| spec.sigma(t, x).ln();
    let dt = (f(t + h_fd, x) - f(t - h_fd, x)) / (2.0 * h_fd);
    let dxx = (f(t, x + h_fd) - 2.0 * f(t, x) + f(t, x - h_fd)) / (h_fd * h_fd);
    dt + 0.5 * spec.sigma2(t, x) * dxx
}

/// Feller's function `V(y) = int_{1/2}^y (y - z) / sin^2(pi z) dz` by adaptive
/// quadrature. Diverges (logarithmically) as `y -> 0+` or `y -> 1-`.
pub fn feller_v(y: f64, quad_tol: f64) -> Result<f64> {
    if !(y > 0.0 && y < 1.0) {
        return Err(Error::Domain(format!("Feller V needs y in (0,1), got {y}")));
    }
    let integrand = |z: f64| {
        let s = (PI * z).sin();
        (y - z) / (s * s)
    };
    Ok(quadrature::integrate(integrand, 0.5, y, quad_tol, 0.0, 4000)?.value)
}

/// `V` along a sequence of points approaching a boundary.
pub fn feller_divergence_sequence(ys: &[f64], quad_tol: f64) -> Result<Vec<f64>> {
    ys.iter().map(|&y| feller_v(y, quad_tol)).collect()
}

/// `sup` and `inf` of `pi x (1-x) / sin(pi x)` over `(0,1)`, by a dense scan
/// (both endpoint limits equal 1).
pub fn pasting_ratio_range() -> (f64, f64) {
    const N: usize = 200_000;
    let (mut lo, mut hi) = (1.0f64, 1.0f64);
    for i in 1..N {
        let x = i as f64 / N as f64;
        let g = PI * x * (1.0 - x) / (PI * x).sin();
        lo = lo.min(g);
        hi = hi.max(g);
    }
    (lo, hi)
}

/// Constant `delta` of the pasting estimate
/// `|2 v_tilde - v_bar| <= |x - x^2 - 1 + s + (1-s) log(1-s)|/2 + delta (1-s)`.
pub fn pasting_delta() -> f64 {
    let (lo, hi) = pasting_ratio_range();
    lo.ln().abs().max(hi.ln().abs())
}

/// Right-hand side of the pasting estimate at `(s, x)`.
pub fn pasting_bound(s: f64, x: f64, delta: f64) -> f64 {
    let r = 1.0 - s;
    let log_term = if r > 0.0 { r * r.ln() } else { 0.0 };
    0.5 * (x - x * x - r + log_term).abs() + delta * r
}

/// Upper bound on `v_bar(s, x)` derived from `v_tilde` and the pasting estimate.
pub fn v_bar_upper_via_tilde(s: f64, x: f64, delta: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        return if s >= 1.0 { 0.0 } else { f64::INFINITY };
    }
    2.0 * v_tilde(s, x) + pasting_bound(s, x, delta)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DriftSign {
    Positive,
    Negative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case", tag = "verdict", content = "sign")]
pub enum Verdict {
    MartingaleConsistent,
    DriftDetected(DriftSign),
}

/// Test functions `g` in the orthogonality conditions `E[(L_t' - L_t) g(M_t)] = 0`.
pub const TEST_FUNCTION_NAMES: [&str; 4] = ["1", "x", "x^2", "sin(pi x)"];

fn test_functions(x: f64) -> [f64; 4] {
    [1.0, x, x * x, (PI * x).sin()]
}

/// Threshold, in standard errors, above which a statistic counts as drift.
pub const DRIFT_THRESHOLD: f64 = 3.0;

#[derive(Debug, Clone, Serialize)]
pub struct PairStatistics {
    pub t: f64,
    pub t_next: f64,
    /// Normalized statistic `mean / std_error` per test function.
    pub statistics: [f64; 4],
}

#[derive(Debug, Clone, Serialize)]
pub struct MartingaleTestReport {
    pub process_id: String,
    pub n_paths: usize,
    pub pairs: Vec<PairStatistics>,
    pub verdict: Verdict,
}

impl MartingaleTestReport {
    pub fn max_abs_statistic(&self) -> f64 {
        self.pairs
            .iter()
            .flat_map(|p| p.statistics.iter())
            .fold(0.0, |m, s| m.max(s.abs()))
    }
}

/// Minimum ensemble size accepted by [`martingale_increment_test`].
pub const MIN_TEST_PATHS: usize = 1000;

/// Orthogonality test of the increments of `process` against functions of
/// `state`, for each `(i, j)` index pair into the common time axis `times`.
pub fn martingale_increment_test(
    process_id: &str,
    times: &[f64],
    process: &[Vec<f64>],
    state: &[Vec<f64>],
    time_pairs: &[(usize, usize)],
) -> Result<MartingaleTestReport> {
    let n = process.len();
    if n < MIN_TEST_PATHS {
        return Err(Error::InsufficientData(format!(
            "martingale test needs at least {MIN_TEST_PATHS} paths, got {n}"
        )));
    }
    if state.len() != n || process.iter().chain(state).any(|r| r.len() != times.len()) {
        return Err(Error::Parameter("process, state and times are not aligned".into()));
    }
    let mut pairs = Vec::with_capacity(time_pairs.len());
    for &(i, j) in time_pairs {
        if i >= j || j >= times.len() {
            return Err(Error::Parameter(format!("invalid time pair ({i}, {j})")));
        }
        let mut statistics = [0.0; 4];
        for (g, stat) in statistics.iter_mut().enumerate() {
            let samples: Vec<f64> = (0..n)
                .map(|p| (process[p][j] - process[p][i]) * test_functions(state[p][i])[g])
                .collect();
            if samples.iter().any(|v| !v.is_finite()) {
                return Err(Error::Evaluation(format!(
                    "non-finite increment of {process_id} between t={} and t={}",
                    times[i], times[j]
                )));
            }
            let m = mean_se(&samples);
            *stat = if m.std_error > 0.0 {
                m.mean / m.std_error
            } else if m.mean == 0.0 {
                0.0
            } else {
                m.mean.signum() * f64::INFINITY
            };
        }
        pairs.push(PairStatistics { t: times[i], t_next: times[j], statistics });
    }
    let extreme = pairs
        .iter()
        .flat_map(|p| p.statistics.iter().copied())
        .fold(0.0f64, |m, s| if s.abs() > m.abs() { s } else { m });
    let verdict = if extreme.abs() > DRIFT_THRESHOLD {
        Verdict::DriftDetected(if extreme > 0.0 { DriftSign::Positive } else { DriftSign::Negative })
    } else {
        Verdict::MartingaleConsistent
    };
    Ok(MartingaleTestReport { process_id: process_id.to_string(), n_paths: n, pairs, verdict })
}

/// Per-path samples, at checkpoint times, of the processes examined by
/// [`martingale_increment_test`].
#[derive(Debug, Clone)]
pub struct TestProcesses {
    pub model_id: String,
    pub times: Vec<f64>,
    /// `M_t`.
    pub state: Vec<Vec<f64>>,
    /// `log Sigma_t` from the analytic density at the node time.
    pub log_sigma2: Vec<Vec<f64>>,
    /// `R_t = v_bar(t, M_t) + (1/2) int_0^t (Sigma - log Sigma - 1) ds`.
    pub r_process: Vec<Vec<f64>>,
}

impl TestProcesses {
    /// Consecutive checkpoint pairs.
    pub fn consecutive_pairs(&self) -> Vec<(usize, usize)> {
        (1..self.times.len()).map(|j| (j - 1, j)).collect()
    }
}

struct ProcessRow {
    state: Vec<f64>,
    log_sigma2: Vec<f64>,
    r: Vec<f64>,
}

fn process_row(
    grid: &TimeGrid,
    values: &[f64],
    idx: &[usize],
    node_sigma2: impl Fn(usize) -> f64,
    interval_sigma2: impl Fn(usize) -> f64,
) -> ProcessRow {
    let nodes = grid.nodes();
    let mut row = ProcessRow { state: vec![], log_sigma2: vec![], r: vec![] };
    let (mut k, mut integral) = (0, 0.0);
    for &c in idx {
        while k < c {
            let x = values[k];
            if x > 0.0 && x < 1.0 {
                let s = interval_sigma2(k);
                integral += 0.5 * (s - s.ln() - 1.0) * grid.dt(k);
            }
            k += 1;
        }
        row.state.push(values[c]);
        row.log_sigma2.push(node_sigma2(c).ln());
        row.r.push(v_bar(nodes[c], values[c]) + integral);
    }
    row
}

/// Simulates `model` and records `M`, `log Sigma` and `R` at the grid nodes
/// nearest to `checkpoints` (which must lie in `(0, 1)`).
pub fn sample_test_processes(
    model: &WinModel,
    grid: &TimeGrid,
    x0: f64,
    n_paths: usize,
    seed: u64,
    checkpoints: &[f64],
) -> Result<TestProcesses> {
    if checkpoints.iter().any(|&t| !(t > grid.start_time() && t < 1.0)) {
        return Err(Error::Parameter("checkpoints must lie strictly inside the simulated horizon".into()));
    }
    let mut idx: Vec<usize> = checkpoints.iter().map(|&t| grid.nearest_index(t)).collect();
    idx.dedup();
    let nodes = grid.nodes();
    let rows: Vec<ProcessRow> = match model {
        WinModel::Aldous => map_paths(&AldousSpec, grid, x0, n_paths, seed, |v| {
            process_row(grid, v.values, &idx, |k| AldousSpec.sigma2(nodes[k], v.values[k]), |k| {
                AldousSpec.sigma2(grid.mid(k), v.values[k])
            })
        })?,
        WinModel::AldousTimeChanged(tc) => {
            let spec = time_change_spec(AldousSpec, tc.clone());
            map_paths(&spec, grid, x0, n_paths, seed, |v| {
                process_row(grid, v.values, &idx, |k| spec.sigma2(nodes[k], v.values[k]), |k| {
                    spec.sigma2(grid.mid(k), v.values[k])
                })
            })?
        }
        WinModel::Bass => map_bass_paths(grid, x0, n_paths, seed, |v| {
            process_row(grid, v.values, &idx, |k| bass_sigma2_unchecked(nodes[k], v.brownian[k]), |k| {
                bass_sigma2_unchecked(grid.mid(k), v.brownian[k])
            })
        })?,
    };
    let mut out = TestProcesses {
        model_id: model.id(),
        times: idx.iter().map(|&k| nodes[k]).collect(),
        state: Vec::with_capacity(n_paths),
        log_sigma2: Vec::with_capacity(n_paths),
        r_process: Vec::with_capacity(n_paths),
    };
    for r in rows {
        out.state.push(r.state);
        out.log_sigma2.push(r.log_sigma2);
        out.r_process.push(r.r);
    }
    Ok(out)
}

/// Outcome of one deterministic certificate.
#[derive(Debug, Clone, Serialize)]
pub struct Certificate {
    pub name: String,
    pub passed: bool,
    /// Worst observed value of the certified quantity.
    pub observed: f64,
    pub threshold: f64,
    pub detail: String,
}

/// Groups of certificates selectable from the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CertificateSuite {
    Pde,
    Ode,
    Sigma,
    Feller,
    All,
}

impl std::str::FromStr for CertificateSuite {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pde" => Ok(Self::Pde),
            "ode" => Ok(Self::Ode),
            "sigma" => Ok(Self::Sigma),
            "feller" => Ok(Self::Feller),
            "all" => Ok(Self::All),
            _ => Err(Error::Parameter(format!("unknown certificate suite `{s}`"))),
        }
    }
}

/// Step used for the residual certificates.
pub const CERT_FD_STEP: f64 = 1e-4;
/// Bound on the HJB and log-sigma PDE residuals.
pub const CERT_RESIDUAL_TOL: f64 = 1e-5;

fn random_interior_points(n: usize, seed: u64) -> Vec<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| (rng.random_range(0.05..0.9), rng.random_range(0.05..0.95))).collect()
}

fn residual_certificates(name: &str, points: &[(f64, f64)], r: impl Fn(f64, f64, f64) -> f64) -> [Certificate; 2] {
    let worst = points.iter().map(|&(t, x)| r(t, x, CERT_FD_STEP).abs()).fold(0.0, f64::max);
    // Aggregate Richardson order between h and h/2 at a step where truncation
    // error dominates rounding.
    let (h, h2) = (1e-2, 5e-3);
    let coarse: f64 = points.iter().map(|&(t, x)| r(t, x, h).abs()).sum();
    let fine: f64 = points.iter().map(|&(t, x)| r(t, x, h2).abs()).sum();
    let order = (coarse / fine).log2();
    [
        Certificate {
            name: format!("{name}_residual"),
            passed: worst < CERT_RESIDUAL_TOL,
            observed: worst,
            threshold: CERT_RESIDUAL_TOL,
            detail: format!("max |residual| over {} points, h = {CERT_FD_STEP:e}", points.len()),
        },
        Certificate {
            name: format!("{name}_richardson_order"),
            passed: (order - 2.0).abs() < 0.25,
            observed: order,
            threshold: 2.0,
            detail: format!("log2 of summed residual ratio between h = {h:e} and h = {h2:e}"),
        },
    ]
}

/// Runs the deterministic certificates of `suite` at `n_points` seeded
/// interior points.
pub fn run_certificates(suite: CertificateSuite, n_points: usize, seed: u64) -> Result<Vec<Certificate>> {
    let points = random_interior_points(n_points, seed);
    let want = |s: CertificateSuite| suite == s || suite == CertificateSuite::All;
    let mut out = Vec::new();
    if want(CertificateSuite::Pde) {
        out.extend(residual_certificates("hjb", &points, hjb_residual));
        out.extend(residual_certificates("pde_log_sigma", &points, |t, x, h| {
            pde_log_sigma_residual(&AldousSpec, t, x, h)
        }));
    }
    if want(CertificateSuite::Ode) {
        let worst = points.iter().map(|&(_, x)| ode_residual(&SineProfile::ALDOUS, x).abs()).fold(0.0, f64::max);
        out.push(Certificate {
            name: "ode_residual".into(),
            passed: worst <= 1e-12,
            observed: worst,
            threshold: 1e-12,
            detail: "sin(pi x)/pi with exact derivatives".into(),
        });
    }
    if want(CertificateSuite::Sigma) {
        let mut worst: f64 = 0.0;
        for &(t, x) in &points {
            let a = aldous_sigma(t, x)?.powi(2);
            worst = worst.max((sigma_star(t, x) - a).abs() / a);
        }
        out.push(Certificate {
            name: "sigma_star_equals_aldous".into(),
            passed: worst <= 1e-12,
            observed: worst,
            threshold: 1e-12,
            detail: "max relative difference of sigma_star and aldous_sigma^2".into(),
        });
    }
    if want(CertificateSuite::Feller) {
        let v = feller_divergence_sequence(&[1e-1, 1e-2, 1e-3], 1e-12)?;
        let ratio = v[2] / v[0];
        out.push(Certificate {
            name: "feller_divergence".into(),
            passed: v[0] < v[1] && v[1] < v[2] && ratio > 2.0,
            observed: ratio,
            threshold: 2.0,
            detail: format!(
                "V(1e-1) = {:.6}, V(1e-2) = {:.6}, V(1e-3) = {:.6}; consecutive ratios {:.4}, {:.4}",
                v[0],
                v[1],
                v[2],
                v[1] / v[0],
                v[2] / v[1]
            ),
        });
    }
    Ok(out)
}
