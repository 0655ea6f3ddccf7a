//! Entropic martingale transport on a finite grid against a Gaussian random walk.
//!
//! Path laws are Markov chains on a uniform grid. The reference walk has
//! transition weights `φ_σ(y − x)·Δx`, so discrete sums approximate the
//! continuous relative entropy and every `Δx` correction cancels between the
//! two sides of the entropy identity.

use std::f64::consts::PI;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on the conditional mean of a projected kernel row.
pub const MEAN_TOL: f64 = 1e-10;
const SUM_TOL: f64 = 1e-12;
const MEAN_MATCH_TOL: f64 = 1e-9;
const SPACING_TOL: f64 = 1e-9;
const MAX_ROOT_ITERS: usize = 200;

/// Marginal-constrained martingale transport problem relative to `γ_T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteMartingaleProblem {
    pub states: Vec<f64>,
    #[serde(rename = "T")]
    pub n_steps: usize,
    pub mu: Vec<f64>,
    pub nu: Vec<f64>,
    pub ref_var: f64,
    /// Initial reference density evaluated on `states`; uniform when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f0: Option<Vec<f64>>,
}

/// Evenly spaced grid of `n` states on `[lo, hi]`.
pub fn uniform_states(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    if n < 2 || !(lo < hi) {
        return Err(Error::Parameter(format!("grid needs n >= 2 and lo < hi, got n={n}, [{lo}, {hi}]")));
    }
    let dx = (hi - lo) / (n - 1) as f64;
    Ok((0..n).map(|i| lo + dx * i as f64).collect())
}

/// Default grid: 201 states on `[-0.5, 1.5]`.
pub fn default_states() -> Vec<f64> {
    uniform_states(-0.5, 1.5, 201).expect("static grid")
}

fn weighted_mean(states: &[f64], w: &[f64]) -> f64 {
    states.iter().zip(w).map(|(x, p)| x * p).sum()
}

fn call_price(states: &[f64], w: &[f64], k: f64) -> f64 {
    states.iter().zip(w).map(|(x, p)| p * (x - k).max(0.0)).sum()
}

fn check_weights(name: &str, w: &[f64], n: usize) -> Result<()> {
    if w.len() != n {
        return Err(Error::Parameter(format!("{name} has {} entries, grid has {n}", w.len())));
    }
    if w.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return Err(Error::Parameter(format!("{name} must be finite and nonnegative")));
    }
    let s: f64 = w.iter().sum();
    if (s - 1.0).abs() > SUM_TOL {
        return Err(Error::Parameter(format!("{name} sums to {s}, not 1")));
    }
    Ok(())
}

/// Grid spacing, after checking the states are strictly increasing and evenly spaced.
pub fn grid_spacing(states: &[f64]) -> Result<f64> {
    if states.len() < 2 {
        return Err(Error::Parameter("grid needs at least two states".into()));
    }
    let dx = (states[states.len() - 1] - states[0]) / (states.len() - 1) as f64;
    if !(dx > 0.0) || !dx.is_finite() {
        return Err(Error::Parameter("states must be strictly increasing".into()));
    }
    for w in states.windows(2) {
        if ((w[1] - w[0]) - dx).abs() > SPACING_TOL * dx.max(1.0) {
            return Err(Error::Parameter("states must be evenly spaced".into()));
        }
    }
    Ok(dx)
}

impl DiscreteMartingaleProblem {
    pub fn from_json_str(s: &str) -> Result<Self> {
        let p: Self = serde_json::from_str(s)?;
        p.validate()?;
        Ok(p)
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn n_states(&self) -> usize {
        self.states.len()
    }

    pub fn dx(&self) -> f64 {
        (self.states[self.states.len() - 1] - self.states[0]) / (self.states.len() - 1) as f64
    }

    /// Initial reference density on the grid.
    pub fn f0_density(&self) -> Vec<f64> {
        match &self.f0 {
            Some(f) => f.clone(),
            None => vec![1.0 / (self.n_states() as f64 * self.dx()); self.n_states()],
        }
    }

    /// Checks shape, weights and the convex order `μ ≤ ν` on the grid.
    pub fn validate(&self) -> Result<()> {
        grid_spacing(&self.states)?;
        let n = self.n_states();
        if self.n_steps == 0 {
            return Err(Error::Parameter("T must be at least 1".into()));
        }
        if !(self.ref_var > 0.0) || !self.ref_var.is_finite() {
            return Err(Error::Parameter(format!("ref_var must be positive, got {}", self.ref_var)));
        }
        check_weights("mu", &self.mu, n)?;
        check_weights("nu", &self.nu, n)?;
        if let Some(f) = &self.f0 {
            if f.len() != n || f.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(Error::Parameter("f0 must hold one nonnegative density value per state".into()));
            }
        }
        self.check_convex_order()
    }

    /// Equal means and dominated call prices at every grid strike.
    pub fn check_convex_order(&self) -> Result<()> {
        let (m_mu, m_nu) = (weighted_mean(&self.states, &self.mu), weighted_mean(&self.states, &self.nu));
        if (m_mu - m_nu).abs() > MEAN_MATCH_TOL {
            return Err(Error::Infeasible(format!("mean(mu) = {m_mu} differs from mean(nu) = {m_nu}")));
        }
        for &k in &self.states {
            let (cm, cn) = (call_price(&self.states, &self.mu, k), call_price(&self.states, &self.nu, k));
            if cm > cn + SUM_TOL {
                return Err(Error::Infeasible(format!("convex order fails at strike {k}: {cm} > {cn}")));
            }
        }
        Ok(())
    }

    /// Mollified win problem: `μ = δ_{x0}`, `ν` = Bernoulli(x0) convolved with
    /// `N(0, width²)`, reference variance `1/T`.
    ///
    /// `x0` must be a grid state. `ν` is truncated where it underflows relative
    /// to its peak and exponentially tilted so its mean equals `x0` exactly.
    pub fn win(states: Vec<f64>, n_steps: usize, x0: f64, width: f64) -> Result<Self> {
        grid_spacing(&states)?;
        if !(x0 > 0.0 && x0 < 1.0) {
            return Err(Error::Parameter(format!("x0 must lie in (0,1), got {x0}")));
        }
        if !(width > 0.0) {
            return Err(Error::Parameter(format!("width must be positive, got {width}")));
        }
        if n_steps == 0 {
            return Err(Error::Parameter("T must be at least 1".into()));
        }
        let dx = grid_spacing(&states)?;
        let i0 = states
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - x0).abs().total_cmp(&(b.1 - x0).abs()))
            .map(|(i, _)| i)
            .unwrap();
        if (states[i0] - x0).abs() > 1e-9 * dx.max(1.0) {
            return Err(Error::Parameter(format!("x0 = {x0} is not a grid state")));
        }
        let x0 = states[i0];
        let mut mu = vec![0.0; states.len()];
        mu[i0] = 1.0;
        let dens: Vec<f64> = states
            .iter()
            .map(|y| {
                let g = |c: f64| (-(y - c) * (y - c) / (2.0 * width * width)).exp();
                x0 * g(1.0) + (1.0 - x0) * g(0.0)
            })
            .collect();
        let peak = dens.iter().cloned().fold(0.0, f64::max);
        let log_w: Vec<f64> = dens
            .iter()
            .map(|&d| if d > 1e-30 * peak { d.ln() } else { f64::NEG_INFINITY })
            .collect();
        let row = TiltRow::new(&states, &log_w, x0);
        let lam = row.solve(0.0).map_err(|e| Error::Infeasible(format!("cannot centre nu at x0: {e}")))?;
        let nu = row.probabilities(lam, states.len());
        Ok(Self { states, n_steps, mu, nu, ref_var: 1.0 / n_steps as f64, f0: None })
    }

    /// Reflection `x ↦ a + b − x` of both marginals on a grid symmetric about its centre.
    pub fn reflected(&self) -> Self {
        let mut p = self.clone();
        p.mu.reverse();
        p.nu.reverse();
        if let Some(f) = p.f0.as_mut() {
            f.reverse();
        }
        p
    }
}

/// Log reference transition weight `log(φ_σ(d·Δx)·Δx)` indexed by `d + N − 1`.
fn log_reference_kernel(n: usize, dx: f64, var: f64) -> Vec<f64> {
    let c = -0.5 * (2.0 * PI * var).ln() + dx.ln();
    (0..2 * n - 1)
        .map(|k| {
            let d = (k as f64 - (n - 1) as f64) * dx;
            c - d * d / (2.0 * var)
        })
        .collect()
}

/// One kernel row restricted to its support, tilted by `exp(λ (y − x))`.
struct TiltRow {
    idx: Vec<usize>,
    a: Vec<f64>,
    d: Vec<f64>,
}

struct TiltMoments {
    log_z: f64,
    mean: f64,
    var: f64,
}

impl TiltRow {
    fn new(states: &[f64], log_w: &[f64], x: f64) -> Self {
        let mut row = TiltRow { idx: Vec::new(), a: Vec::new(), d: Vec::new() };
        for (j, (&y, &a)) in states.iter().zip(log_w).enumerate() {
            if a > f64::NEG_INFINITY {
                row.idx.push(j);
                row.a.push(a);
                row.d.push(y - x);
            }
        }
        row
    }

    fn moments(&self, lam: f64) -> TiltMoments {
        let max = self.a.iter().zip(&self.d).map(|(a, d)| a + lam * d).fold(f64::NEG_INFINITY, f64::max);
        let (mut s0, mut s1, mut s2) = (0.0, 0.0, 0.0);
        for (a, d) in self.a.iter().zip(&self.d) {
            let w = (a + lam * d - max).exp();
            s0 += w;
            s1 += w * d;
            s2 += w * d * d;
        }
        let mean = s1 / s0;
        TiltMoments { log_z: max + s0.ln(), mean, var: (s2 / s0 - mean * mean).max(0.0) }
    }

    /// Safeguarded Newton on `λ ↦ E_λ[y − x] = 0`, bisecting once a bracket exists.
    fn solve(&self, warm: f64) -> Result<f64> {
        let mut lam = if warm.is_finite() { warm } else { 0.0 };
        let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
        let mut span = 1.0;
        let mut last = f64::NAN;
        for _ in 0..MAX_ROOT_ITERS {
            let m = self.moments(lam);
            last = m.mean;
            if m.mean.abs() <= MEAN_TOL {
                return Ok(lam);
            }
            if m.mean < 0.0 {
                lo = lam;
            } else {
                hi = lam;
            }
            let newton = lam - m.mean / m.var;
            lam = if newton.is_finite() && newton > lo && newton < hi {
                newton
            } else if lo.is_finite() && hi.is_finite() {
                0.5 * (lo + hi)
            } else {
                span *= 2.0;
                if lo.is_finite() {
                    lo + span
                } else {
                    hi - span
                }
            };
            if lo.is_finite() && hi.is_finite() && hi - lo <= 4.0 * f64::EPSILON * lam.abs().max(1.0) {
                break;
            }
        }
        Err(Error::Numerical(format!("tilt root-find stalled at lambda = {lam}, conditional mean error {last:e}")))
    }

    fn probabilities(&self, lam: f64, n: usize) -> Vec<f64> {
        let log_z = self.moments(lam).log_z;
        let mut p = vec![0.0; n];
        for ((&j, a), d) in self.idx.iter().zip(&self.a).zip(&self.d) {
            p[j] = (a + lam * d - log_z).exp();
        }
        p
    }
}

/// Markov path law on a grid: initial weights and `T` row-stochastic kernels.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovPathLaw {
    pub states: Vec<f64>,
    pub initial: Vec<f64>,
    /// Row-major `N × N` transition matrices.
    pub kernels: Vec<Vec<f64>>,
}

impl MarkovPathLaw {
    pub fn n_steps(&self) -> usize {
        self.kernels.len()
    }

    /// Gaussian random walk with step variance `step_var`, rows renormalized on the grid.
    pub fn gaussian_walk(states: &[f64], initial: &[f64], n_steps: usize, step_var: f64) -> Result<Self> {
        let dx = grid_spacing(states)?;
        if !(step_var > 0.0) {
            return Err(Error::Parameter(format!("step variance must be positive, got {step_var}")));
        }
        let n = states.len();
        let lg = log_reference_kernel(n, dx, step_var);
        let mut k = vec![0.0; n * n];
        for i in 0..n {
            let row = &mut k[i * n..(i + 1) * n];
            for (j, r) in row.iter_mut().enumerate() {
                *r = lg[j + n - 1 - i].exp();
            }
            let s: f64 = row.iter().sum();
            row.iter_mut().for_each(|r| *r /= s);
        }
        Ok(Self { states: states.to_vec(), initial: initial.to_vec(), kernels: vec![k; n_steps] })
    }

    /// Marginal weights at times `0..=T`.
    pub fn marginals(&self) -> Vec<Vec<f64>> {
        let n = self.states.len();
        let mut out = vec![self.initial.clone()];
        for k in &self.kernels {
            let prev = out.last().unwrap();
            let mut next = vec![0.0; n];
            for (i, &p) in prev.iter().enumerate() {
                if p == 0.0 {
                    continue;
                }
                for (nj, kij) in next.iter_mut().zip(&k[i * n..(i + 1) * n]) {
                    *nj += p * kij;
                }
            }
            out.push(next);
        }
        out
    }

    /// Largest `|Σ_y y k(x,y) − x|` over states charged by the marginal at each step.
    pub fn martingale_residual(&self) -> f64 {
        let n = self.states.len();
        let marg = self.marginals();
        let mut worst: f64 = 0.0;
        for (t, k) in self.kernels.iter().enumerate() {
            for i in 0..n {
                if marg[t][i] > 0.0 {
                    let row = &k[i * n..(i + 1) * n];
                    worst = worst.max((weighted_mean(&self.states, row) - self.states[i]).abs());
                }
            }
        }
        worst
    }
}

/// Both sides of the entropy identity for a path law against `γ_T`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IdentityCheck {
    /// Chain-rule relative entropy `H(Q|γ_T)`.
    pub lhs: f64,
    /// `−H(Q) + (T/2) log(2πσ²) − E log f0(X_0) + (E X_T² − E X_0²)/(2σ²)`.
    pub rhs: f64,
    /// False when `Q` charges an initial state where `f0 = 0`; both sides are then `+∞`.
    pub absolutely_continuous: bool,
}

fn xlogy_ratio(p: f64, q: f64) -> f64 {
    if p == 0.0 {
        0.0
    } else {
        p * (p / q).ln()
    }
}

/// Evaluates both sides of the identity with `Δx` corrections applied consistently.
///
/// The right side uses the marginals of `q`, not the problem's `μ` and `ν`.
pub fn entropy_identity_check(problem: &DiscreteMartingaleProblem, q: &MarkovPathLaw) -> Result<IdentityCheck> {
    let dx = grid_spacing(&problem.states)?;
    let n = problem.n_states();
    if q.states.len() != n || q.n_steps() != problem.n_steps || q.kernels.iter().any(|k| k.len() != n * n) {
        return Err(Error::Parameter("path law does not match the problem grid or horizon".into()));
    }
    let f0 = problem.f0_density();
    let var = problem.ref_var;
    if q.initial.iter().zip(&f0).any(|(p, f)| *p > 0.0 && *f <= 0.0) {
        return Ok(IdentityCheck { lhs: f64::INFINITY, rhs: f64::INFINITY, absolutely_continuous: false });
    }
    let marg = q.marginals();
    let t_steps = problem.n_steps as f64;
    let lg = log_reference_kernel(n, dx, var);

    let mut lhs: f64 = q.initial.iter().zip(&f0).map(|(p, f)| xlogy_ratio(*p, f * dx)).sum();
    // Discrete Shannon entropy of the path weights, via the chain rule.
    let mut shannon: f64 = -q.initial.iter().map(|p| xlogy_ratio(*p, 1.0)).sum::<f64>();
    for (t, k) in q.kernels.iter().enumerate() {
        for i in 0..n {
            let m = marg[t][i];
            if m == 0.0 {
                continue;
            }
            let row = &k[i * n..(i + 1) * n];
            let (mut kl, mut h) = (0.0, 0.0);
            for (j, &p) in row.iter().enumerate() {
                if p > 0.0 {
                    kl += p * (p.ln() - lg[j + n - 1 - i]);
                    h -= p * p.ln();
                }
            }
            lhs += m * kl;
            shannon += m * h;
        }
    }
    let differential = shannon + (t_steps + 1.0) * dx.ln();
    let second = |w: &[f64]| -> f64 { problem.states.iter().zip(w).map(|(x, p)| x * x * p).sum() };
    let log_f0: f64 = q.initial.iter().zip(&f0).filter(|(p, _)| **p > 0.0).map(|(p, f)| p * f.ln()).sum();
    let rhs = -differential + 0.5 * t_steps * (2.0 * PI * var).ln() - log_f0
        + (second(&marg[problem.n_steps]) - second(&marg[0])) / (2.0 * var);
    Ok(IdentityCheck { lhs, rhs, absolutely_continuous: true })
}

/// Solver output: the optimal Markov coupling and its convergence record.
#[derive(Debug, Clone, Serialize)]
pub struct MartingaleCoupling {
    pub states: Vec<f64>,
    pub n_steps: usize,
    pub initial: Vec<f64>,
    /// Row-major `N × N` transition matrices.
    #[serde(skip)]
    pub kernels: Vec<Vec<f64>>,
    /// Martingale duals `λ_t(x)`; `±∞` on delta rows, NaN on unreachable rows.
    #[serde(skip)]
    pub multipliers: Vec<Vec<f64>>,
    #[serde(skip)]
    pub terminal_potential: Vec<f64>,
    /// `KL(Q_n | γ_T)` of the martingale-projected iterate after each sweep.
    pub objective_trace: Vec<f64>,
    /// Dual objective after each sweep; a lower bound on the optimum, non-decreasing.
    pub dual_trace: Vec<f64>,
    pub kl: f64,
    pub transition_kl: f64,
    pub terminal_tv: f64,
    pub martingale_residual: f64,
    pub iterations: usize,
}

impl MartingaleCoupling {
    /// Transition relative entropy per step; the specific-entropy analogue when `ref_var = 1/T`.
    pub fn normalized_kl(&self) -> f64 {
        self.transition_kl / self.n_steps as f64
    }

    pub fn prob(&self, step: usize, from: usize, to: usize) -> f64 {
        let n = self.states.len();
        self.kernels[step][from * n + to]
    }

    pub fn path_law(&self) -> MarkovPathLaw {
        MarkovPathLaw { states: self.states.clone(), initial: self.initial.clone(), kernels: self.kernels.clone() }
    }

    /// Nonzero kernel entries as `step,from,to,prob` with `from`/`to` as state values.
    pub fn write_kernels_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        writeln!(w, "step,from,to,prob")?;
        let n = self.states.len();
        for (t, k) in self.kernels.iter().enumerate() {
            for i in 0..n {
                for j in 0..n {
                    let p = k[i * n + j];
                    if p > 0.0 {
                        writeln!(w, "{t},{},{},{p:e}", self.states[i], self.states[j])?;
                    }
                }
            }
        }
        w.flush()?;
        Ok(())
    }
}

struct BackwardPass {
    kernels: Vec<Vec<f64>>,
    multipliers: Vec<Vec<f64>>,
    log_beta0: Vec<f64>,
}

enum RowResult {
    Unreachable,
    Delta(usize, f64, f64),
    Tilted(Vec<f64>, f64, f64),
}

fn project_row(states: &[f64], lg: &[f64], log_beta: &[f64], i: usize, warm: f64) -> Result<RowResult> {
    let n = states.len();
    let log_w: Vec<f64> = (0..n).map(|j| lg[j + n - 1 - i] + log_beta[j]).collect();
    let row = TiltRow::new(states, &log_w, states[i]);
    let (Some(&first), Some(&last)) = (row.idx.first(), row.idx.last()) else {
        return Ok(RowResult::Unreachable);
    };
    if i < first || i > last {
        return Ok(RowResult::Unreachable);
    }
    if first == last || i == first || i == last {
        let lam = if first == last { 0.0 } else if i == first { f64::NEG_INFINITY } else { f64::INFINITY };
        return Ok(RowResult::Delta(i, log_w[i], lam));
    }
    let lam = row
        .solve(warm)
        .map_err(|e| Error::Numerical(format!("{e} (row at state {})", states[i])))?;
    let log_z = row.moments(lam).log_z;
    Ok(RowResult::Tilted(row.probabilities(lam, n), lam, log_z))
}

fn backward_pass(
    states: &[f64],
    lg: &[f64],
    psi: &[f64],
    n_steps: usize,
    warm: &[Vec<f64>],
) -> Result<BackwardPass> {
    let n = states.len();
    let mut kernels = vec![Vec::new(); n_steps];
    let mut multipliers = vec![Vec::new(); n_steps];
    let mut log_beta = psi.to_vec();
    for t in (0..n_steps).rev() {
        let rows: Vec<RowResult> = (0..n)
            .into_par_iter()
            .map(|i| project_row(states, lg, &log_beta, i, warm.get(t).map_or(0.0, |w| w[i])))
            .collect::<Result<_>>()
            .map_err(|e| match e {
                Error::Numerical(m) => Error::Numerical(format!("{m} at step {t}")),
                other => other,
            })?;
        let mut k = vec![0.0; n * n];
        let mut lam = vec![f64::NAN; n];
        let mut next_beta = vec![f64::NEG_INFINITY; n];
        for (i, r) in rows.into_iter().enumerate() {
            match r {
                RowResult::Unreachable => {}
                RowResult::Delta(j, lb, l) => {
                    k[i * n + j] = 1.0;
                    lam[i] = l;
                    next_beta[i] = lb;
                }
                RowResult::Tilted(p, l, lb) => {
                    k[i * n..(i + 1) * n].copy_from_slice(&p);
                    lam[i] = l;
                    next_beta[i] = lb;
                }
            }
        }
        kernels[t] = k;
        multipliers[t] = lam;
        log_beta = next_beta;
    }
    Ok(BackwardPass { kernels, multipliers, log_beta0: log_beta })
}

/// Iterative Bregman projections for `min KL(Q | γ_T)` over martingale laws
/// with marginals `μ`, `ν`.
///
/// Each sweep projects every kernel row onto the martingale constraint
/// (backward in time, one scalar tilt per row) and then rescales the terminal
/// potential towards `ν`. The dual objective must not decrease between sweeps.
pub fn solve_entropic_mot(problem: &DiscreteMartingaleProblem, max_iters: usize, tol: f64) -> Result<MartingaleCoupling> {
    problem.validate()?;
    if !(tol > 0.0) {
        return Err(Error::Parameter(format!("tol must be positive, got {tol}")));
    }
    let n = problem.n_states();
    let dx = problem.dx();
    let states = &problem.states;
    let lg = log_reference_kernel(n, dx, problem.ref_var);
    let f0 = problem.f0_density();
    let mut initial_kl = 0.0;
    for (p, f) in problem.mu.iter().zip(&f0) {
        if *p > 0.0 && *f <= 0.0 {
            return Err(Error::Infeasible("mu charges a state where f0 vanishes".into()));
        }
        initial_kl += xlogy_ratio(*p, f * dx);
    }

    let mut psi: Vec<f64> = problem.nu.iter().map(|&p| if p > 0.0 { 0.0 } else { f64::NEG_INFINITY }).collect();
    let mut warm: Vec<Vec<f64>> = Vec::new();
    let mut objective_trace = Vec::new();
    let mut dual_trace: Vec<f64> = Vec::new();

    for iter in 1..=max_iters.max(1) {
        let pass = backward_pass(states, &lg, &psi, problem.n_steps, &warm)?;
        let mut dual = initial_kl;
        for (i, &p) in problem.mu.iter().enumerate() {
            if p > 0.0 {
                if pass.log_beta0[i] == f64::NEG_INFINITY {
                    return Err(Error::Infeasible(format!("no martingale path from {} reaches supp(nu)", states[i])));
                }
                dual -= p * pass.log_beta0[i];
            }
        }
        dual += problem.nu.iter().zip(&psi).filter(|(p, _)| **p > 0.0).map(|(p, s)| p * s).sum::<f64>();
        if let Some(&prev) = dual_trace.last() {
            if dual < prev - 1e-9 * prev.abs().max(1.0) {
                return Err(Error::Numerical(format!("dual objective decreased from {prev} to {dual} at sweep {iter}")));
            }
        }
        dual_trace.push(dual);

        let law = MarkovPathLaw { states: states.clone(), initial: problem.mu.clone(), kernels: pass.kernels };
        let marg = law.marginals();
        let terminal = &marg[problem.n_steps];
        let transition_kl = transition_kl(&law, &marg, &lg);
        objective_trace.push(initial_kl + transition_kl);
        let tv = 0.5 * terminal.iter().zip(&problem.nu).map(|(a, b)| (a - b).abs()).sum::<f64>();
        let residual = law.martingale_residual();

        if tv <= tol && residual <= tol {
            return Ok(MartingaleCoupling {
                states: states.clone(),
                n_steps: problem.n_steps,
                initial: problem.mu.clone(),
                kernels: law.kernels,
                multipliers: pass.multipliers,
                terminal_potential: psi,
                objective_trace,
                dual_trace,
                kl: initial_kl + transition_kl,
                transition_kl,
                terminal_tv: tv,
                martingale_residual: residual,
                iterations: iter,
            });
        }
        if iter == max_iters.max(1) {
            return Err(Error::Numerical(format!(
                "no convergence after {iter} sweeps: terminal TV {tv:e}, martingale residual {residual:e}"
            )));
        }
        for ((s, &target), &m) in psi.iter_mut().zip(&problem.nu).zip(terminal) {
            if target > 0.0 {
                if m <= 0.0 {
                    return Err(Error::Infeasible("a state charged by nu is unreachable".into()));
                }
                *s += (target / m).ln();
            }
        }
        warm = pass.multipliers;
    }
    unreachable!()
}

fn transition_kl(law: &MarkovPathLaw, marg: &[Vec<f64>], lg: &[f64]) -> f64 {
    let n = law.states.len();
    let mut total = 0.0;
    for (t, k) in law.kernels.iter().enumerate() {
        for i in 0..n {
            let m = marg[t][i];
            if m == 0.0 {
                continue;
            }
            let kl: f64 = k[i * n..(i + 1) * n]
                .iter()
                .enumerate()
                .filter(|(_, p)| **p > 0.0)
                .map(|(j, p)| p * (p.ln() - lg[j + n - 1 - i]))
                .sum();
            total += m * kl;
        }
    }
    total
}

/// Conditional variance of every kernel row divided by `Δt = 1/T`; NaN on rows with no mass.
pub fn extract_local_vol(coupling: &MartingaleCoupling) -> Vec<Vec<f64>> {
    let n = coupling.states.len();
    let dt = 1.0 / coupling.n_steps as f64;
    coupling
        .kernels
        .iter()
        .map(|k| {
            (0..n)
                .map(|i| {
                    let row = &k[i * n..(i + 1) * n];
                    let s: f64 = row.iter().sum();
                    if s <= 0.0 {
                        return f64::NAN;
                    }
                    let mean = weighted_mean(&coupling.states, row) / s;
                    let var: f64 =
                        coupling.states.iter().zip(row).map(|(y, p)| p * (y - mean) * (y - mean)).sum::<f64>() / s;
                    var / dt
                })
                .collect()
        })
        .collect()
}
