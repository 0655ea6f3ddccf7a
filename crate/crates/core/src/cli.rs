//! The `winmart` command-line front end.
//!
//! Exit codes: 0 on success, 2 for invalid arguments or parameters, 1 for
//! numerical failures and failed certificates. Failures print a diagnostic
//! JSON document on stdout.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

use crate::diffusion::{make_grid, GridMode, PathEnsemble, TimeGrid, DEFAULT_EPSILON_FINAL};
use crate::discrete_mot::{default_states, solve_entropic_mot, DiscreteMartingaleProblem};
use crate::entropy::{model_entropy, SigmaSource};
use crate::error::{Error, Result};
use crate::martingales::WinModel;
use crate::value::{optimal_value, run_certificates, v_bar, v_tilde, CertificateSuite};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Environment variable selecting the worker thread count; never changes results.
pub const THREADS_ENV: &str = "WINMART_THREADS";

#[derive(Debug, Clone, Parser, Serialize)]
#[command(name = "winmart", version, about = "Maximal-entropy win-martingale toolkit")]
#[serde(transparent)]
pub struct RunConfig {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand, Serialize)]
#[serde(tag = "command", rename_all = "snake_case")]
pub enum Command {
    /// Simulate a win-martingale ensemble and export its paths.
    Simulate(SimulateArgs),
    /// Monte-Carlo specific relative entropy of a win-martingale.
    Entropy(EntropyArgs),
    /// Closed-form optimal value.
    Value(ValueArgs),
    /// Deterministic residual certificates.
    Check(CheckArgs),
    /// Entropic martingale transport on a grid.
    Discrete(DiscreteArgs),
    /// Export optimal and Bass sample paths side by side.
    Compare(CompareArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GridArgs {
    /// Number of time steps.
    #[arg(long = "steps", default_value_t = 4096)]
    pub n_steps: usize,
    /// Remaining time `1 - t` at the last node.
    #[arg(long, default_value_t = DEFAULT_EPSILON_FINAL)]
    pub epsilon_final: f64,
    #[arg(long, default_value = "geometric", value_parser = ["geometric", "uniform"])]
    pub grid: String,
}

impl GridArgs {
    fn build(&self) -> Result<TimeGrid> {
        make_grid(0.0, self.n_steps, self.grid.parse::<GridMode>()?, self.epsilon_final)
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SimulateArgs {
    /// `aldous`, `bass` or `aldous-tc:<square|smoothstep|power:p>`.
    #[arg(long = "spec", default_value = "aldous")]
    pub spec_id: String,
    #[arg(long, default_value_t = 0.5)]
    pub x0: f64,
    #[arg(long = "paths", default_value_t = 10)]
    pub n_paths: usize,
    #[command(flatten)]
    pub grid: GridArgs,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value = "csv", value_parser = ["csv", "json"])]
    pub format: String,
    /// Output file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EntropyArgs {
    #[arg(long = "spec", default_value = "aldous")]
    pub spec_id: String,
    #[arg(long, default_value_t = 0.5)]
    pub x0: f64,
    #[arg(long = "paths", default_value_t = 100_000)]
    pub n_paths: usize,
    #[command(flatten)]
    pub grid: GridArgs,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value = "analytic", value_parser = ["analytic", "realized"])]
    pub sigma: String,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ValueArgs {
    #[arg(long, default_value_t = 0.5)]
    pub x0: f64,
    /// Evaluate the cost-to-go at time `t` instead of 0.
    #[arg(long, default_value_t = 0.0)]
    pub t: f64,
    /// Print the lower bound `v_tilde` instead of the optimal value.
    #[arg(long)]
    pub lower: bool,
    #[arg(long, default_value = "text", value_parser = ["text", "json"])]
    pub format: String,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CheckArgs {
    #[arg(long, default_value = "all", value_parser = ["pde", "ode", "sigma", "feller", "all"])]
    pub suite: String,
    /// Number of random interior points.
    #[arg(long, default_value_t = 50)]
    pub points: usize,
    /// Seed of the interior points; the check itself is deterministic.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DiscreteArgs {
    /// JSON problem `{states, T, mu, nu, ref_var}`; the mollified win problem when absent.
    #[arg(long)]
    pub problem: Option<PathBuf>,
    #[arg(long, default_value_t = 0.5)]
    pub x0: f64,
    #[arg(long = "T", default_value_t = 8)]
    pub n_steps: usize,
    /// Mollification width of the win marginal; `0.1 / sqrt(T)` when absent.
    #[arg(long)]
    pub width: Option<f64>,
    #[arg(long, default_value_t = 100_000)]
    pub max_iters: usize,
    #[arg(long, default_value_t = 1e-7)]
    pub tol: f64,
    /// CSV kernel dump `step,from,to,prob`.
    #[arg(long)]
    pub kernels_out: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CompareArgs {
    #[arg(long, default_value_t = 0.5)]
    pub x0: f64,
    #[arg(long = "paths", default_value_t = 2)]
    pub n_paths: usize,
    #[command(flatten)]
    pub grid: GridArgs,
    #[arg(long)]
    pub seed: u64,
    /// Directory receiving `aldous_paths.csv`, `bass_paths.csv` and their sidecars.
    #[arg(long)]
    pub out_dir: PathBuf,
}

fn check_x0(x0: f64) -> Result<()> {
    if x0 > 0.0 && x0 < 1.0 {
        Ok(())
    } else {
        Err(Error::Parameter(format!("x0 must lie in (0,1), got {x0}")))
    }
}

fn check_paths(n: usize) -> Result<()> {
    if n >= 1 {
        Ok(())
    } else {
        Err(Error::Parameter("--paths must be at least 1".into()))
    }
}

fn report(config: &RunConfig, results: Value) -> Value {
    json!({ "version": VERSION, "config": config, "results": results })
}

fn emit(doc: &Value, out: Option<&Path>, stdout: &mut dyn Write) -> Result<()> {
    let text = serde_json::to_string_pretty(doc)?;
    match out {
        Some(p) => std::fs::write(p, text + "\n")?,
        None => writeln!(stdout, "{text}")?,
    }
    Ok(())
}

fn sidecar(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

/// Writes the paths CSV plus `<out>.terminal.csv` and `<out>.meta.json`.
fn write_ensemble_files(ens: &PathEnsemble, out: &Path, meta: &Value) -> Result<()> {
    let mut w = BufWriter::new(File::create(out)?);
    ens.write_paths_csv(&mut w)?;
    w.flush()?;
    let mut w = BufWriter::new(File::create(sidecar(out, ".terminal.csv"))?);
    ens.write_terminal_csv(&mut w)?;
    w.flush()?;
    std::fs::write(sidecar(out, ".meta.json"), serde_json::to_string_pretty(meta)? + "\n")?;
    Ok(())
}

fn ensemble_json(ens: &PathEnsemble) -> Value {
    json!({
        "spec_id": ens.spec_id,
        "grid_id": ens.grid.id(),
        "seed": ens.seed,
        "times": ens.grid.nodes(),
        "paths": ens.paths().collect::<Vec<_>>(),
        "terminal": ens.terminal(),
    })
}

fn simulate(config: &RunConfig, a: &SimulateArgs, stdout: &mut dyn Write) -> Result<bool> {
    check_x0(a.x0)?;
    check_paths(a.n_paths)?;
    let model = WinModel::parse(&a.spec_id)?;
    let ens = model.simulate(&a.grid.build()?, a.x0, a.n_paths, a.seed)?;
    let meta = report(config, json!({ "spec_id": ens.spec_id, "grid_id": ens.grid.id(), "seed": a.seed }));
    match (a.format.as_str(), &a.out) {
        ("json", out) => {
            let doc = report(config, ensemble_json(&ens));
            emit(&doc, out.as_deref(), stdout)?;
        }
        (_, Some(out)) => write_ensemble_files(&ens, out, &meta)?,
        (_, None) => {
            writeln!(stdout, "# {}", serde_json::to_string(&meta)?)?;
            ens.write_paths_csv(&mut *stdout)?;
        }
    }
    Ok(true)
}

fn entropy(config: &RunConfig, a: &EntropyArgs, stdout: &mut dyn Write) -> Result<bool> {
    check_x0(a.x0)?;
    check_paths(a.n_paths)?;
    let model = WinModel::parse(&a.spec_id)?;
    let grid = a.grid.build()?;
    let est = model_entropy(&model, &grid, a.x0, a.n_paths, a.seed, a.sigma.parse::<SigmaSource>()?)?;
    let results = json!({
        "spec_id": model.id(),
        "estimate": est,
        "optimal_value": optimal_value(a.x0)?,
        "lower_bound": v_tilde(0.0, a.x0),
    });
    emit(&report(config, results), a.out.as_deref(), stdout)?;
    Ok(true)
}

fn value(config: &RunConfig, a: &ValueArgs, stdout: &mut dyn Write) -> Result<bool> {
    check_x0(a.x0)?;
    if !(a.t >= 0.0 && a.t < 1.0) {
        return Err(Error::Parameter(format!("t must lie in [0,1), got {}", a.t)));
    }
    let v = if a.lower { v_tilde(a.t, a.x0) } else { v_bar(a.t, a.x0) };
    if a.format == "json" {
        emit(&report(config, json!({ "value": v })), None, stdout)?;
    } else {
        writeln!(stdout, "{v:.7}")?;
    }
    Ok(true)
}

fn check(config: &RunConfig, a: &CheckArgs, stdout: &mut dyn Write) -> Result<bool> {
    if a.points == 0 {
        return Err(Error::Parameter("--points must be at least 1".into()));
    }
    let certs = run_certificates(a.suite.parse::<CertificateSuite>()?, a.points, a.seed)?;
    let passed = certs.iter().all(|c| c.passed);
    emit(&report(config, json!({ "passed": passed, "certificates": certs })), a.out.as_deref(), stdout)?;
    Ok(passed)
}

fn discrete(config: &RunConfig, a: &DiscreteArgs, stdout: &mut dyn Write) -> Result<bool> {
    let problem = match &a.problem {
        Some(p) => DiscreteMartingaleProblem::from_json_file(p)?,
        None => {
            check_x0(a.x0)?;
            if a.n_steps == 0 {
                return Err(Error::Parameter("--T must be at least 1".into()));
            }
            let width = a.width.unwrap_or(0.1 / (a.n_steps as f64).sqrt());
            DiscreteMartingaleProblem::win(default_states(), a.n_steps, a.x0, width)?
        }
    };
    let coupling = solve_entropic_mot(&problem, a.max_iters, a.tol)?;
    if let Some(p) = &a.kernels_out {
        coupling.write_kernels_csv(p)?;
    }
    let results = json!({
        "n_states": problem.n_states(),
        "T": problem.n_steps,
        "ref_var": problem.ref_var,
        "normalized_kl": coupling.normalized_kl(),
        "coupling": coupling,
    });
    emit(&report(config, results), a.out.as_deref(), stdout)?;
    Ok(true)
}

fn compare(config: &RunConfig, a: &CompareArgs, stdout: &mut dyn Write) -> Result<bool> {
    check_x0(a.x0)?;
    check_paths(a.n_paths)?;
    let grid = a.grid.build()?;
    std::fs::create_dir_all(&a.out_dir)?;
    let mut files = Vec::new();
    for model in [WinModel::Aldous, WinModel::Bass] {
        let ens = model.simulate(&grid, a.x0, a.n_paths, a.seed)?;
        let out = a.out_dir.join(format!("{}_paths.csv", model.id()));
        let meta = report(config, json!({ "spec_id": ens.spec_id, "grid_id": grid.id(), "seed": a.seed }));
        write_ensemble_files(&ens, &out, &meta)?;
        files.push(json!({ "spec_id": model.id(), "paths": out, "terminal": ens.terminal() }));
    }
    emit(&report(config, json!({ "files": files })), None, stdout)?;
    Ok(true)
}

/// Executes one command. `Ok(false)` means the command ran but a certificate failed.
pub fn run(config: &RunConfig, stdout: &mut dyn Write) -> Result<bool> {
    match &config.command {
        Command::Simulate(a) => simulate(config, a, stdout),
        Command::Entropy(a) => entropy(config, a, stdout),
        Command::Value(a) => value(config, a, stdout),
        Command::Check(a) => check(config, a, stdout),
        Command::Discrete(a) => discrete(config, a, stdout),
        Command::Compare(a) => compare(config, a, stdout),
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let config = match RunConfig::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = if e.use_stderr() {
                write!(stderr, "{}", e.render())
            } else {
                write!(stdout, "{}", e.render())
            };
            return code;
        }
    };
    match run(&config, stdout) {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e) => {
            let doc = json!({
                "version": VERSION,
                "config": config,
                "error": { "kind": e.kind(), "message": e.to_string() },
            });
            let _ = writeln!(stdout, "{}", serde_json::to_string_pretty(&doc).unwrap_or_default());
            let _ = writeln!(stderr, "winmart: {e}");
            if e.is_usage() {
                2
            } else {
                1
            }
        }
    }
}

/// Applies the thread-count variable to the global pool.
pub fn configure_threads() -> Result<()> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => {
            let n: usize = v
                .parse()
                .ok()
                .filter(|n| *n > 0)
                .ok_or_else(|| Error::Parameter(format!("{THREADS_ENV} must be a positive integer, got `{v}`")))?;
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .map_err(|e| Error::Parameter(e.to_string()))
        }
        Err(_) => Ok(()),
    }
}
