//! Concrete win-martingales: the entropy-optimal (Aldous) martingale, the
//! Bass martingale `Phi(B_t / sqrt(1-t))`, and deterministic time changes of
//! a base diffusion.

use crate::diffusion::{
    brownian_path, map_paths, simulate_paths, BrownianEnsemble, DiffusionSpec, PathEnsemble, TimeGrid,
};
use crate::error::{Error, Result};
use crate::rng::path_stream;
use crate::value::v_bar;
use rand::Rng;
use rayon::prelude::*;
use statrs::function::erf::{erfc, erfc_inv};
use std::f64::consts::{FRAC_1_SQRT_2, PI, SQRT_2};

/// `sin(pi x) / (pi sqrt(1 - t))`.
pub fn aldous_sigma(t: f64, x: f64) -> Result<f64> {
    if !(t < 1.0) {
        return Err(Error::Domain(format!("aldous_sigma needs t < 1, got {t}")));
    }
    Ok(aldous_sigma_unchecked(t, x))
}

#[inline]
fn aldous_sigma_unchecked(t: f64, x: f64) -> f64 {
    (PI * x).sin() / (PI * (1.0 - t).sqrt())
}

/// `aldous_sigma(t, x) * sqrt(1 - t)`; independent of `t`.
pub fn scaling_check(t: f64, x: f64) -> f64 {
    aldous_sigma_unchecked(t, x) * (1.0 - t).sqrt()
}

/// The entropy-optimal win-martingale `dM = sin(pi M) / (pi sqrt(1-t)) dB`.
#[derive(Debug, Clone, Copy, Default)]
pub struct AldousSpec;

impl DiffusionSpec for AldousSpec {
    fn id(&self) -> String {
        "aldous".into()
    }
    fn sigma(&self, t: f64, x: f64) -> f64 {
        aldous_sigma_unchecked(t, x)
    }
    fn sigma2(&self, t: f64, x: f64) -> f64 {
        let s = (PI * x).sin();
        s * s / (PI * PI * (1.0 - t))
    }
    fn tail_cost(&self, t: f64, x: f64) -> Option<f64> {
        Some(if x <= 0.0 || x >= 1.0 { 0.0 } else { v_bar(t, x) })
    }
}

pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z * FRAC_1_SQRT_2)
}

pub fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

pub fn normal_quantile(p: f64) -> f64 {
    -SQRT_2 * erfc_inv(2.0 * p)
}

/// Quadratic-variation density of the Bass martingale in terms of the driving
/// Brownian value: `phi(b / sqrt(1-t))^2 / (1-t)`.
pub fn bass_sigma2(t: f64, b: f64) -> Result<f64> {
    if !(t < 1.0) {
        return Err(Error::Domain(format!("bass_sigma2 needs t < 1, got {t}")));
    }
    Ok(bass_sigma2_unchecked(t, b))
}

#[inline]
pub(crate) fn bass_sigma2_unchecked(t: f64, b: f64) -> f64 {
    let r = 1.0 - t;
    let p = normal_pdf(b / r.sqrt());
    p * p / r
}

/// Seed offset of the stream used to complete Bass terminal outcomes.
const BASS_COMPLETION_SALT: u64 = 0xB455_B455_0000_0001;

/// Brownian starting value that puts the Bass martingale at `x0` at time `t0`.
pub fn bass_brownian_start(t0: f64, x0: f64) -> f64 {
    normal_quantile(x0) * (1.0 - t0).sqrt()
}

/// Beyond this `|B / sqrt(1-t)|` the squared density underflows while
/// `Phi` is still within 1e-148 of the boundary; the path is absorbed there.
const BASS_SATURATION_Z: f64 = 26.0;

fn bass_values(grid: &TimeGrid, brownian: &[f64], out: &mut [f64]) {
    let mut absorbed: Option<f64> = None;
    for ((o, &b), &t) in out.iter_mut().zip(brownian).zip(grid.nodes()) {
        *o = match absorbed {
            Some(a) => a,
            None => {
                let z = b / (1.0 - t).sqrt();
                let v = if z.abs() > BASS_SATURATION_Z { f64::from(u8::from(z > 0.0)) } else { normal_cdf(z) };
                // Floating-point saturation at the boundary is treated as absorption.
                if v <= 0.0 || v >= 1.0 {
                    absorbed = Some(v.clamp(0.0, 1.0));
                }
                v.clamp(0.0, 1.0)
            }
        };
    }
}

fn complete(seed: u64, p: usize, last: f64) -> u8 {
    let u: f64 = path_stream(seed ^ BASS_COMPLETION_SALT, p as u64).random();
    u8::from(u < last)
}

/// Pointwise transform `X_t = Phi(B_t / sqrt(1-t))` of a Brownian ensemble.
pub fn bass_transform(brownian: &BrownianEnsemble) -> Result<PathEnsemble> {
    let grid = &brownian.grid;
    let n = grid.n_nodes();
    let mut values = vec![0.0; brownian.n_paths() * n];
    let mut terminal = Vec::with_capacity(brownian.n_paths());
    for (p, (path, out)) in brownian.paths().zip(values.chunks_exact_mut(n)).enumerate() {
        bass_values(grid, path, out);
        terminal.push(complete(brownian.seed, p, out[n - 1]));
    }
    PathEnsemble::from_parts(grid.clone(), "bass".into(), brownian.seed, values, terminal)
}

/// One Bass path: the driving Brownian values and the martingale values.
#[derive(Debug, Clone, Copy)]
pub struct BassPathView<'a> {
    pub index: usize,
    pub brownian: &'a [f64],
    pub values: &'a [f64],
    pub terminal: u8,
}

/// Streams Bass paths started at `x0`. Path `p` coincides with path `p` of
/// `bass_transform(simulate_brownian(grid, bass_brownian_start(..), 1, n, seed))`.
pub fn map_bass_paths<T, F>(grid: &TimeGrid, x0: f64, n_paths: usize, seed: u64, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(BassPathView<'_>) -> T + Sync,
{
    if !(x0 > 0.0 && x0 < 1.0) {
        return Err(Error::Parameter(format!("Bass martingale needs x0 in (0,1), got {x0}")));
    }
    if n_paths == 0 {
        return Err(Error::Parameter("n_paths must be at least 1".into()));
    }
    let b0 = bass_brownian_start(grid.start_time(), x0);
    let n = grid.n_nodes();
    Ok((0..n_paths)
        .into_par_iter()
        .map_init(
            || (vec![0.0; n], vec![0.0; n]),
            |(bbuf, xbuf), p| {
                let mut rng = path_stream(seed, p as u64);
                brownian_path(grid, b0, 1.0, &mut rng, bbuf);
                bass_values(grid, bbuf, xbuf);
                let terminal = complete(seed, p, xbuf[n - 1]);
                f(BassPathView { index: p, brownian: bbuf, values: xbuf, terminal })
            },
        )
        .collect())
}

pub fn simulate_bass(grid: &TimeGrid, x0: f64, n_paths: usize, seed: u64) -> Result<PathEnsemble> {
    let rows = map_bass_paths(grid, x0, n_paths, seed, |v| (v.values.to_vec(), v.terminal))?;
    let (values, terminal): (Vec<Vec<f64>>, Vec<u8>) = rows.into_iter().unzip();
    PathEnsemble::from_parts(grid.clone(), "bass".into(), seed, values.concat(), terminal)
}

/// A deterministic time change `tau` of `[0,1]` onto itself.
#[derive(Debug, Clone, PartialEq)]
pub enum TimeChange {
    Identity,
    /// `tau(t) = t^p`, `p > 0`.
    Power(f64),
    /// `tau(t) = 3t^2 - 2t^3`.
    Smoothstep,
}

impl TimeChange {
    pub fn tau(&self, t: f64) -> f64 {
        match *self {
            TimeChange::Identity => t,
            TimeChange::Power(p) => t.powf(p),
            TimeChange::Smoothstep => t * t * (3.0 - 2.0 * t),
        }
    }

    pub fn tau_prime(&self, t: f64) -> f64 {
        match *self {
            TimeChange::Identity => 1.0,
            TimeChange::Power(p) => p * t.powf(p - 1.0),
            TimeChange::Smoothstep => 6.0 * t * (1.0 - t),
        }
    }

    pub fn name(&self) -> String {
        match *self {
            TimeChange::Identity => "identity".into(),
            TimeChange::Power(2.0) => "square".into(),
            TimeChange::Power(p) => format!("power:{p}"),
            TimeChange::Smoothstep => "smoothstep".into(),
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "identity" => Ok(TimeChange::Identity),
            "square" => Ok(TimeChange::Power(2.0)),
            "smoothstep" => Ok(TimeChange::Smoothstep),
            _ => {
                let p: f64 = name
                    .strip_prefix("power:")
                    .and_then(|p| p.parse().ok())
                    .ok_or_else(|| Error::UnknownSpec(format!("aldous-tc:{name}")))?;
                if !(p > 0.0 && p.is_finite()) {
                    return Err(Error::Parameter(format!("time-change power must be positive, got {p}")));
                }
                Ok(TimeChange::Power(p))
            }
        }
    }
}

/// `base` run on the clock `tau`: its quadratic-variation density at time `t`
/// is `Sigma_base(tau(t), x) * tau'(t)`. Start and terminal laws are unchanged.
#[derive(Debug, Clone)]
pub struct TimeChangedSpec<S> {
    pub base: S,
    pub time_change: TimeChange,
}

pub fn time_change_spec<S: DiffusionSpec>(base: S, tc: TimeChange) -> TimeChangedSpec<S> {
    TimeChangedSpec { base, time_change: tc }
}

impl<S: DiffusionSpec> DiffusionSpec for TimeChangedSpec<S> {
    fn id(&self) -> String {
        format!("{}-tc:{}", self.base.id(), self.time_change.name())
    }
    fn sigma(&self, t: f64, x: f64) -> f64 {
        self.sigma2(t, x).sqrt()
    }
    fn sigma2(&self, t: f64, x: f64) -> f64 {
        self.base.sigma2(self.time_change.tau(t), x) * self.time_change.tau_prime(t)
    }
    fn tail_cost(&self, t: f64, x: f64) -> Option<f64> {
        match self.time_change {
            TimeChange::Identity => self.base.tail_cost(t, x),
            _ => None,
        }
    }
}

/// Win-martingales addressable by string id: `aldous`, `bass`,
/// `aldous-tc:<name>`.
#[derive(Debug, Clone, PartialEq)]
pub enum WinModel {
    Aldous,
    Bass,
    AldousTimeChanged(TimeChange),
}

impl WinModel {
    pub fn parse(id: &str) -> Result<Self> {
        match id {
            "aldous" => Ok(WinModel::Aldous),
            "bass" => Ok(WinModel::Bass),
            _ => match id.strip_prefix("aldous-tc:") {
                Some(name) => Ok(WinModel::AldousTimeChanged(TimeChange::parse(name)?)),
                None => Err(Error::UnknownSpec(id.to_string())),
            },
        }
    }

    pub fn id(&self) -> String {
        match self {
            WinModel::Aldous => "aldous".into(),
            WinModel::Bass => "bass".into(),
            WinModel::AldousTimeChanged(tc) => format!("aldous-tc:{}", tc.name()),
        }
    }

    pub fn simulate(&self, grid: &TimeGrid, x0: f64, n_paths: usize, seed: u64) -> Result<PathEnsemble> {
        match self {
            WinModel::Aldous => simulate_paths(&AldousSpec, grid, x0, n_paths, seed),
            WinModel::Bass => simulate_bass(grid, x0, n_paths, seed),
            WinModel::AldousTimeChanged(tc) => {
                let mut e = simulate_paths(&time_change_spec(AldousSpec, tc.clone()), grid, x0, n_paths, seed)?;
                e.spec_id = self.id();
                Ok(e)
            }
        }
    }

    /// Maps `f(values, terminal)` over freshly simulated paths.
    pub fn map_paths<T, F>(&self, grid: &TimeGrid, x0: f64, n_paths: usize, seed: u64, f: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(&[f64], u8) -> T + Sync,
    {
        match self {
            WinModel::Aldous => map_paths(&AldousSpec, grid, x0, n_paths, seed, |v| f(v.values, v.terminal)),
            WinModel::Bass => map_bass_paths(grid, x0, n_paths, seed, |v| f(v.values, v.terminal)),
            WinModel::AldousTimeChanged(tc) => {
                let spec = time_change_spec(AldousSpec, tc.clone());
                map_paths(&spec, grid, x0, n_paths, seed, |v| f(v.values, v.terminal))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffusion::{make_grid, simulate_brownian, GridMode, DEFAULT_EPSILON_FINAL};
    use crate::stats::mean_se;
    use approx::assert_relative_eq;

    #[test]
    #[allow(clippy::approx_constant)]
    fn aldous_sigma_examples() {
        assert_relative_eq!(aldous_sigma(0.0, 0.5).unwrap(), 1.0 / PI, epsilon = 1e-15);
        assert_relative_eq!(aldous_sigma(0.0, 0.5).unwrap(), 0.318_309_9, epsilon = 1e-7);
        assert_eq!(aldous_sigma(0.4, 0.0).unwrap(), 0.0);
        assert!(aldous_sigma(0.4, 1.0).unwrap().abs() < 1e-15);
        assert_relative_eq!(aldous_sigma(0.75, 0.5).unwrap(), 2.0 / PI, epsilon = 1e-15);
        assert!(aldous_sigma(1.0, 0.5).is_err());
    }

    #[test]
    fn scaling_check_is_constant_in_time() {
        assert_relative_eq!(scaling_check(0.3, 0.5), 1.0 / PI, epsilon = 1e-12);
        assert_relative_eq!(scaling_check(0.9, 0.5), 1.0 / PI, epsilon = 1e-12);
        for i in 0..100 {
            let t = i as f64 / 101.0;
            assert_relative_eq!(scaling_check(t, 0.25), (PI / 4.0).sin() / PI, epsilon = 1e-12);
            assert_relative_eq!(scaling_check(t, 0.25), 0.225_079_1, epsilon = 1e-7);
        }
    }

    #[test]
    #[allow(clippy::approx_constant)]
    fn bass_sigma2_examples() {
        assert_relative_eq!(bass_sigma2(0.0, 0.0).unwrap(), 1.0 / (2.0 * PI), epsilon = 1e-15);
        assert_relative_eq!(bass_sigma2(0.75, 0.0).unwrap(), 0.636_619_8, epsilon = 1e-7);
        assert!(bass_sigma2(0.5, 40.0).unwrap() < 1e-300);
        assert!(bass_sigma2(1.0, 0.0).is_err());
    }

    #[test]
    fn bass_sigma2_is_ito_derivative_of_transform() {
        // d/db Phi(b / sqrt(1-t)) squared is the QV density.
        for &(t, b) in &[(0.0, 0.3), (0.5, -0.4), (0.9, 0.1)] {
            let h = 1e-6;
            let r: f64 = 1.0 - t;
            let d = (normal_cdf((b + h) / r.sqrt()) - normal_cdf((b - h) / r.sqrt())) / (2.0 * h);
            assert_relative_eq!(bass_sigma2(t, b).unwrap(), d * d, max_relative = 1e-7);
        }
    }

    #[test]
    fn normal_helpers_roundtrip() {
        for &p in &[0.01, 0.25, 0.5, 0.75, 0.99] {
            assert_relative_eq!(normal_cdf(normal_quantile(p)), p, epsilon = 1e-12);
        }
        assert_eq!(normal_cdf(0.0), 0.5);
    }

    #[test]
    fn zero_brownian_path_maps_to_half() {
        let g = make_grid(0.0, 16, GridMode::Geometric, 1e-3).unwrap();
        let b = simulate_brownian(&g, 0.0, 0.0, 3, 1).unwrap();
        let e = bass_transform(&b).unwrap();
        assert!(e.paths().all(|p| p.iter().all(|&v| v == 0.5)));
    }

    #[test]
    fn streamed_bass_matches_transform() {
        let g = make_grid(0.0, 64, GridMode::Geometric, 1e-4).unwrap();
        let b = simulate_brownian(&g, bass_brownian_start(0.0, 0.3), 1.0, 40, 21).unwrap();
        let a = bass_transform(&b).unwrap();
        let s = simulate_bass(&g, 0.3, 40, 21).unwrap();
        assert_eq!(a, s);
    }

    #[test]
    fn bass_is_a_win_martingale() {
        let g = make_grid(0.0, 256, GridMode::Geometric, DEFAULT_EPSILON_FINAL).unwrap();
        let n = 20_000;
        let e = simulate_bass(&g, 0.5, n, 8).unwrap();
        e.check_invariants().unwrap();
        for k in [0, 64, 128, 255] {
            let m = mean_se(&e.column(k));
            assert!((m.mean - 0.5).abs() <= 3.0 * m.std_error.max(1e-12), "node {k}: {m:?}");
        }
        let ones = e.terminal().iter().filter(|&&t| t == 1).count() as f64 / n as f64;
        assert!((ones - 0.5).abs() < 3.0 * (0.25 / n as f64).sqrt());
    }

    #[test]
    fn extreme_brownian_values_absorb_the_bass_path() {
        let g = make_grid(0.0, 4, GridMode::Uniform, 0.01).unwrap();
        let mut out = vec![0.0; 5];
        bass_values(&g, &[0.0, 0.1, 30.0, -1.0, 0.0], &mut out);
        assert_eq!(&out[2..], &[1.0, 1.0, 1.0]);
        bass_values(&g, &[0.0, -27.0, 0.0, 0.0, 0.0], &mut out);
        assert_eq!(&out[1..], &[0.0; 4]);
        assert!(bass_sigma2_unchecked(0.5, 25.0 * 0.5f64.sqrt()) > 0.0);
    }

    #[test]
    fn time_change_identity_is_noop() {
        let tc = time_change_spec(AldousSpec, TimeChange::Identity);
        for &(t, x) in &[(0.0, 0.5), (0.3, 0.1), (0.99, 0.7)] {
            assert_eq!(tc.sigma2(t, x), AldousSpec.sigma2(t, x));
            assert_eq!(tc.tail_cost(t, x), AldousSpec.tail_cost(t, x));
        }
    }

    #[test]
    fn square_time_change_adds_log_drift() {
        // log Sigma~(t, x) = log Sigma(t^2, x) + log(2t)
        let tc = time_change_spec(AldousSpec, TimeChange::Power(2.0));
        for &(t, x) in &[(0.2, 0.5), (0.5, 0.3), (0.9, 0.8)] {
            let lhs = tc.sigma2(t, x).ln();
            let rhs = AldousSpec.sigma2(t * t, x).ln() + (2.0 * t).ln();
            assert_relative_eq!(lhs, rhs, epsilon = 1e-12);
        }
        assert_eq!(tc.tail_cost(0.5, 0.5), None);
        assert_eq!(tc.id(), "aldous-tc:square");
    }

    #[test]
    fn time_change_parsing() {
        assert_eq!(TimeChange::parse("square").unwrap(), TimeChange::Power(2.0));
        assert_eq!(TimeChange::parse("power:1.5").unwrap(), TimeChange::Power(1.5));
        assert!(TimeChange::parse("power:-1").is_err());
        assert!(TimeChange::parse("wobble").is_err());
        for id in ["aldous", "bass", "aldous-tc:square", "aldous-tc:smoothstep", "aldous-tc:power:3"] {
            assert_eq!(WinModel::parse(id).unwrap().id(), id);
        }
        assert!(matches!(WinModel::parse("heston"), Err(Error::UnknownSpec(_))));
    }

    #[test]
    fn time_changes_are_onto() {
        for tc in [TimeChange::Identity, TimeChange::Power(2.0), TimeChange::Power(0.5), TimeChange::Smoothstep] {
            assert_eq!(tc.tau(0.0), 0.0);
            assert_eq!(tc.tau(1.0), 1.0);
            for i in 1..100 {
                let t = i as f64 / 100.0;
                assert!(tc.tau_prime(t) > 0.0 && tc.tau_prime(t).is_finite());
                assert!(tc.tau(t) > tc.tau(t - 0.01));
            }
        }
    }
}
