//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

use std::time::Instant;

use win_martingale::diffusion::{make_grid, GridMode, TimeGrid, DEFAULT_EPSILON_FINAL};
use win_martingale::discrete_mot::{
    default_states, entropy_identity_check, grid_spacing, solve_entropic_mot, DiscreteMartingaleProblem,
    MarkovPathLaw,
};
use win_martingale::entropy::{
    atomic_terminal_detector, constant_vol_entropy, gantert_discrete_entropy_constant_vol, model_entropy,
    EntropyEstimate, SigmaSource,
};
use win_martingale::martingales::WinModel;
use win_martingale::value::{
    martingale_increment_test, optimal_value, run_certificates, sample_test_processes, v_tilde, CertificateSuite,
    DriftSign, Verdict,
};

const SEED: u64 = 20_240_601;
const HEADLINE_PATHS: usize = 100_000;
const COMPETITOR_PATHS: usize = 20_000;

struct Outcome {
    passed: bool,
    detail: String,
}

fn report(id: usize, name: &str, started: Instant, result: Result<Outcome, String>) -> bool {
    let secs = started.elapsed().as_secs_f64();
    let (passed, detail) = match result {
        Ok(o) => (o.passed, o.detail),
        Err(e) => (false, format!("error: {e}")),
    };
    println!("{} [{id:>2}] {name}: {detail} ({secs:.1} s)", if passed { "PASS" } else { "FAIL" });
    passed
}

fn headline_grid() -> TimeGrid {
    make_grid(0.0, 4096, GridMode::Geometric, DEFAULT_EPSILON_FINAL).unwrap()
}

fn optimal_value_reproduction(x0: f64, feasible: &mut Vec<(String, f64, EntropyEstimate)>) -> Result<Outcome, String> {
    let est = model_entropy(&WinModel::Aldous, &headline_grid(), x0, HEADLINE_PATHS, SEED, SigmaSource::Analytic)
        .map_err(|e| e.to_string())?;
    let target = optimal_value(x0).map_err(|e| e.to_string())?;
    let tol = (3.0 * est.std_error).max(0.01 * target);
    let err = (est.mean - target).abs();
    let detail = format!(
        "estimate {:.5} +/- {:.5} vs {target:.5}, |error| {err:.5} <= tol {tol:.5}, tail bracket [0, {:.2e}]",
        est.mean, est.std_error, est.truncation_bracket.1
    );
    feasible.push((format!("aldous x0={x0}"), x0, est.clone()));
    Ok(Outcome { passed: err <= tol, detail })
}

fn suboptimality_gap(feasible: &mut Vec<(String, f64, EntropyEstimate)>) -> Result<Outcome, String> {
    let grid = headline_grid();
    let aldous = feasible
        .iter()
        .find(|(n, _, _)| n == "aldous x0=0.5")
        .map(|(_, _, e)| e.clone())
        .ok_or("aldous estimate missing")?;
    let mut passed = true;
    let mut parts = Vec::new();
    for id in ["bass", "aldous-tc:square"] {
        let model = WinModel::parse(id).map_err(|e| e.to_string())?;
        let est = model_entropy(&model, &grid, 0.5, COMPETITOR_PATHS, SEED + 1, SigmaSource::Analytic)
            .map_err(|e| e.to_string())?;
        let gap = est.mean - aldous.mean;
        let se = (est.std_error.powi(2) + aldous.std_error.powi(2)).sqrt();
        passed &= gap > 3.0 * se;
        parts.push(format!("{id} {:.4} (gap {gap:.4} = {:.1} SE)", est.mean, gap / se));
        feasible.push((id.to_string(), 0.5, est));
    }
    Ok(Outcome { passed, detail: format!("aldous {:.4}; {}", aldous.mean, parts.join("; ")) })
}

fn terminal_law() -> Result<Outcome, String> {
    let grid = make_grid(0.0, 1024, GridMode::Geometric, DEFAULT_EPSILON_FINAL).unwrap();
    let n = 20_000;
    let mut passed = true;
    let mut parts = Vec::new();
    for id in ["aldous", "bass", "aldous-tc:square"] {
        let model = WinModel::parse(id).map_err(|e| e.to_string())?;
        for x0 in [0.25, 0.5, 0.75] {
            let wins = model
                .map_paths(&grid, x0, n, SEED + 2, |_, terminal| terminal as usize)
                .map_err(|e| e.to_string())?
                .into_iter()
                .sum::<usize>();
            let frac = wins as f64 / n as f64;
            let band = 3.0 * (x0 * (1.0 - x0) / n as f64).sqrt();
            passed &= (frac - x0).abs() <= band;
            parts.push(format!("{id}@{x0}: {frac:.4}"));
        }
    }
    Ok(Outcome { passed, detail: format!("{} (n = {n} each, band 3 sqrt(x0(1-x0)/n))", parts.join(", ")) })
}

fn certificate_suite() -> Result<Outcome, String> {
    let certs = run_certificates(CertificateSuite::All, 50, SEED).map_err(|e| e.to_string())?;
    let passed = certs.iter().all(|c| c.passed);
    let detail = certs
        .iter()
        .map(|c| format!("{}={:.3e}{}", c.name, c.observed, if c.passed { "" } else { "(fail)" }))
        .collect::<Vec<_>>()
        .join(", ");
    let feller = certs.iter().find(|c| c.name == "feller_divergence").map(|c| c.detail.clone()).unwrap_or_default();
    Ok(Outcome { passed, detail: format!("{detail}; {feller}") })
}

fn martingale_tests() -> Result<Outcome, String> {
    let grid = make_grid(0.0, 1024, GridMode::Geometric, DEFAULT_EPSILON_FINAL).unwrap();
    let checkpoints = [0.1, 0.3, 0.5, 0.7];
    let n = 10_000;
    let sample = |id: &str| {
        sample_test_processes(&WinModel::parse(id).unwrap(), &grid, 0.5, n, SEED + 3, &checkpoints)
            .map_err(|e| e.to_string())
    };
    let aldous = sample("aldous")?;
    let tc = sample("aldous-tc:square")?;
    let bass = sample("bass")?;
    let pairs = aldous.consecutive_pairs();
    let test = |name: &str, p: &win_martingale::value::TestProcesses, use_r: bool| {
        let process = if use_r { &p.r_process } else { &p.log_sigma2 };
        martingale_increment_test(name, &p.times, process, &p.state, &pairs).map_err(|e| e.to_string())
    };
    let cases = [
        ("log sigma on aldous", test("log_sigma", &aldous, false)?, Verdict::MartingaleConsistent),
        ("R on aldous", test("R", &aldous, true)?, Verdict::MartingaleConsistent),
        ("log Sigma on aldous-tc:square", test("log_sigma", &tc, false)?, Verdict::DriftDetected(DriftSign::Positive)),
        ("R on bass", test("R", &bass, true)?, Verdict::DriftDetected(DriftSign::Positive)),
    ];
    let passed = cases.iter().all(|(_, r, want)| r.verdict == *want);
    let detail = cases
        .iter()
        .map(|(name, r, _)| format!("{name}: {:?} (max |stat| {:.1})", r.verdict, r.max_abs_statistic()))
        .collect::<Vec<_>>()
        .join("; ");
    Ok(Outcome { passed, detail })
}

fn gantert_consistency() -> Result<Outcome, String> {
    let mut passed = true;
    let mut parts = Vec::new();
    let grid = headline_grid();
    let mut worst_rel: f64 = 0.0;
    let mut worst_mc: f64 = 0.0;
    for a in [0.5, 2.0, 4.0] {
        let exact = 0.5 * (a - f64::ln(a) - 1.0);
        for n in [1, 4, 16, 1000] {
            let g = gantert_discrete_entropy_constant_vol(a, n).map_err(|e| e.to_string())?;
            worst_rel = worst_rel.max((g - exact).abs() / exact);
        }
        let mc = constant_vol_entropy(a, &grid, 0.5, 2_000, SEED + 4).map_err(|e| e.to_string())?;
        let tol = (3.0 * mc.std_error).max(1e-12 * exact.max(1.0));
        passed &= (mc.mean - exact).abs() <= tol;
        worst_mc = worst_mc.max((mc.mean - exact).abs() / exact);
        parts.push(format!("a={a}: exact {exact:.6}, functional {:.6}", mc.mean));
    }
    passed &= worst_rel <= 1e-12;
    parts.push(format!("closed form worst relative deviation over n in {{1, 4, 16, 1000}}: {worst_rel:.1e}"));
    parts.push(format!("functional worst relative deviation {worst_mc:.1e}"));
    let small = make_grid(0.0, 256, GridMode::Geometric, DEFAULT_EPSILON_FINAL).unwrap();
    for id in ["aldous", "bass", "aldous-tc:square"] {
        let ens = WinModel::parse(id).unwrap().simulate(&small, 0.5, 200, SEED + 5).map_err(|e| e.to_string())?;
        let atomic = atomic_terminal_detector(&ens);
        passed &= atomic;
        parts.push(format!("{id} atomic={atomic}"));
    }
    Ok(Outcome { passed, detail: parts.join(", ") })
}

fn discrete_identity() -> Result<Outcome, String> {
    let states = default_states();
    let dx = grid_spacing(&states).map_err(|e| e.to_string())?;
    let raw: Vec<f64> = states.iter().map(|x| (-(x - 0.5) * (x - 0.5) / (2.0 * 0.01)).exp()).collect();
    let total: f64 = raw.iter().sum();
    let mu: Vec<f64> = raw.iter().map(|v| v / total).collect();
    let var = 0.0025;
    let problem = DiscreteMartingaleProblem {
        states: states.clone(),
        n_steps: 4,
        mu: mu.clone(),
        nu: mu.clone(),
        ref_var: var,
        f0: Some(mu.iter().map(|p| p / dx).collect()),
    };
    let mut passed = true;
    let mut parts = Vec::new();
    for (name, a) in [("gamma_T", 1.0), ("variance-2 walk", 2.0)] {
        let q = MarkovPathLaw::gaussian_walk(&states, &mu, 4, a * var).map_err(|e| e.to_string())?;
        let c = entropy_identity_check(&problem, &q).map_err(|e| e.to_string())?;
        let diff = (c.lhs - c.rhs).abs();
        passed &= diff <= 1e-3;
        parts.push(format!("{name}: lhs {:.6}, rhs {:.6}, |diff| {diff:.2e}", c.lhs, c.rhs));
    }
    Ok(Outcome { passed, detail: parts.join("; ") })
}

fn discrete_solver() -> Result<Outcome, String> {
    let target = optimal_value(0.5).unwrap();
    let mut passed = true;
    let mut values = Vec::new();
    let mut parts = Vec::new();
    for t in [4usize, 8, 16] {
        let width = 0.1 / (t as f64).sqrt();
        let problem = DiscreteMartingaleProblem::win(default_states(), t, 0.5, width).map_err(|e| e.to_string())?;
        let c = solve_entropic_mot(&problem, 100_000, 1e-7).map_err(|e| e.to_string())?;
        let monotone = c.dual_trace.windows(2).all(|w| w[1] >= w[0]);
        let feasible = c.terminal_tv < 1e-6 && c.martingale_residual < 1e-6;
        passed &= monotone && feasible;
        values.push(c.normalized_kl());
        parts.push(format!(
            "T={t} w={width:.4}: {:.5} ({} sweeps, tv {:.1e}, mart {:.1e}, monotone {monotone})",
            c.normalized_kl(),
            c.iterations,
            c.terminal_tv,
            c.martingale_residual
        ));
    }
    let decreasing = values.windows(2).all(|w| w[1] < w[0]);
    let approaching = values.windows(2).all(|w| (w[1] - target).abs() < (w[0] - target).abs());
    passed &= decreasing && approaching;
    Ok(Outcome {
        passed,
        detail: format!("{}; decreasing {decreasing}, approaching {target:.4} {approaching}", parts.join("; ")),
    })
}

fn lower_bound(feasible: &[(String, f64, EntropyEstimate)]) -> Result<Outcome, String> {
    if feasible.is_empty() {
        return Err("no ensemble estimates available".into());
    }
    let mut passed = true;
    let mut parts = Vec::new();
    for (name, x0, est) in feasible {
        let bound = v_tilde(0.0, *x0);
        passed &= est.mean >= bound - 3.0 * est.std_error;
        parts.push(format!("{name}: {:.4} >= {bound:.4}", est.mean));
    }
    Ok(Outcome { passed, detail: parts.join(", ") })
}

fn main() {
    let mut ok = true;
    let mut feasible = Vec::new();
    let t = Instant::now();
    ok &= report(1, "optimal value at x0 = 0.5", t, optimal_value_reproduction(0.5, &mut feasible));
    let t = Instant::now();
    ok &= report(2, "optimal value at x0 = 0.25", t, optimal_value_reproduction(0.25, &mut feasible));
    let t = Instant::now();
    ok &= report(3, "suboptimality gap", t, suboptimality_gap(&mut feasible));
    let t = Instant::now();
    ok &= report(4, "terminal law", t, terminal_law());
    let t = Instant::now();
    ok &= report(5, "certificate suite", t, certificate_suite());
    let t = Instant::now();
    ok &= report(6, "martingale tests", t, martingale_tests());
    let t = Instant::now();
    ok &= report(7, "Gantert consistency", t, gantert_consistency());
    let t = Instant::now();
    ok &= report(8, "discrete identity", t, discrete_identity());
    let t = Instant::now();
    ok &= report(9, "discrete solver trend", t, discrete_solver());
    let t = Instant::now();
    ok &= report(10, "lower-bound property", t, lower_bound(&feasible));
    if !ok {
        std::process::exit(1);
    }
}
