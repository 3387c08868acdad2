//! Command-line front end.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical failure or
//! non-convergence, 4 I/O error.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use thiserror::Error;

use crate::baselines::{aoi_np_solve, zero_wait, BaselineResult};
use crate::config::{table1_scenarios, ConfigError, ConfigSet, ScenarioConfig, SimSection};
use crate::distributions::ServiceDistribution;
use crate::report::fmt_sig;
use crate::simulator::{
    compare, simulate, simulate_with_trajectory, CompareError, ComparisonRow, SimConfig, SimError,
    SimPolicy, ThresholdPolicy, COMPARISON_CSV_HEADER, SIM_CSV_HEADER,
};
use crate::solver::{self, IterationRecord, SolvedPolicy, SolverError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_IO: i32 = 4;

/// Environment variable capping the worker thread count.
pub const THREADS_ENV: &str = "TAILOR_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "tailor",
    version,
    about = "Age-optimal sampling and preemption under general service times"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve one scenario; writes summary.json and policy.csv
    Solve(SolveArgs),
    /// Solve, evaluate baselines and simulate every scenario of a config set;
    /// writes comparison.csv
    Compare(RunArgs),
    /// Solve one scenario and simulate it against the baselines; writes
    /// simulation.csv (and trajectory.csv with --emit-trajectory)
    Simulate(SimulateArgs),
    /// Solve with the empirical distribution of a delay trace
    Trace(TraceArgs),
    /// Built-in four-scenario comparison (kappa_s = 1)
    Table1(Table1Args),
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SimOverrides {
    /// RNG seed for the simulator
    #[arg(long)]
    pub seed: Option<u64>,
    /// measured delivery cycles per simulation
    #[arg(long)]
    pub cycles: Option<u64>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub sim: SimOverrides,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub sim: SimOverrides,
    /// also dump every event epoch of the solved policy's run
    #[arg(long)]
    pub emit_trajectory: bool,
}

#[derive(Debug, Args)]
pub struct TraceArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// newline-separated service times (`#` comments allowed)
    #[arg(long)]
    pub trace: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct Table1Args {
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub sim: SimOverrides,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Solver(#[from] SolverError),
    #[error("{0}")]
    Sim(#[from] SimError),
    #[error(transparent)]
    Compare(#[from] CompareError),
    #[error("policy iteration did not converge in {iterations} iterations (rho = {rho}); results written to {out}")]
    NotConverged {
        iterations: usize,
        rho: f64,
        out: PathBuf,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(e) if e.is_io() => EXIT_IO,
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Solver(SolverError::Grid(_))
            | CliError::Solver(SolverError::InvalidCost { .. }) => EXIT_CONFIG,
            CliError::Sim(SimError::InvalidConfig(_)) => EXIT_CONFIG,
            CliError::Compare(CompareError::Solver {
                source: SolverError::Grid(_),
                ..
            }) => EXIT_CONFIG,
            CliError::Compare(CompareError::Sim {
                source: SimError::InvalidConfig(_),
                ..
            }) => EXIT_CONFIG,
            CliError::Solver(_) | CliError::Sim(_) | CliError::Compare(_) => EXIT_NUMERICAL,
            CliError::NotConverged { .. } => EXIT_NUMERICAL,
            CliError::Io { .. } => EXIT_IO,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn create_out(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(io_err(dir))
}

fn write_file<F>(path: &Path, body: F) -> Result<(), CliError>
where
    F: FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
{
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    body(&mut w).and_then(|_| w.flush()).map_err(io_err(path))
}

/// Quotes a CSV field when it contains a delimiter, quote or line break.
pub fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GridSummary {
    pub dt: f64,
    pub y_cut: f64,
    pub state_nodes: usize,
    pub theta_fine: f64,
    pub theta_max: f64,
    pub n_log: usize,
    pub candidates: usize,
    pub far_field_slope: f64,
    pub quadrature_nodes: usize,
    pub tail_at_theta_max: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveSummary {
    pub scenario: String,
    pub distribution: String,
    pub mean: f64,
    pub second_moment: f64,
    pub kappa_s: f64,
    pub kappa_p: f64,
    pub rho: f64,
    pub iterations: usize,
    pub converged: bool,
    pub residuals: Vec<IterationRecord>,
    pub wall_time: f64,
    pub grid: GridSummary,
    pub aoi_np: Option<BaselineResult>,
    pub zero_wait: BaselineResult,
}

fn summarize(
    cfg: &ScenarioConfig,
    dist: &ServiceDistribution,
    solved: &SolvedPolicy,
    wall: f64,
) -> SolveSummary {
    let g = &solved.grids;
    let moments = dist.moments();
    SolveSummary {
        scenario: cfg.name.clone(),
        distribution: dist.label(),
        mean: moments.mean,
        second_moment: moments.second,
        kappa_s: cfg.kappa_s,
        kappa_p: cfg.kappa_p,
        rho: solved.rho,
        iterations: solved.iterations,
        converged: solved.converged,
        residuals: solved.residuals.clone(),
        wall_time: wall,
        grid: GridSummary {
            dt: g.dt(),
            y_cut: g.y_cut(),
            state_nodes: g.m() + 1,
            theta_fine: g.theta_fine,
            theta_max: g.theta_max,
            n_log: g.n_log,
            candidates: g.candidates.len(),
            far_field_slope: g.slope,
            quadrature_nodes: g.horizon + 1,
            tail_at_theta_max: g.tail_at_max,
        },
        aoi_np: aoi_np_solve(dist, cfg.kappa_s).ok(),
        zero_wait: zero_wait(dist, cfg.kappa_s),
    }
}

/// Outcome of a solve-type command.
#[derive(Debug, Clone)]
pub struct SolveReport {
    pub summary: SolveSummary,
    pub solved: SolvedPolicy,
}

fn solve_config(cfg: &ScenarioConfig, out: &Path) -> Result<SolveReport, CliError> {
    let scenario = cfg.scenario()?;
    create_out(out)?;
    let start = Instant::now();
    let solved = solver::solve(&scenario.dist, &scenario.grid, &scenario.solver)?;
    let wall = start.elapsed().as_secs_f64();
    let summary = summarize(cfg, &scenario.dist, &solved, wall);

    let summary_path = out.join("summary.json");
    write_file(&summary_path, |w| {
        serde_json::to_writer_pretty(&mut *w, &summary).map_err(std::io::Error::other)?;
        writeln!(w)
    })?;
    let policy_path = out.join("policy.csv");
    write_file(&policy_path, |w| solved.write_csv(w))?;
    if !solved.converged {
        return Err(CliError::NotConverged {
            iterations: solved.iterations,
            rho: solved.rho,
            out: out.to_path_buf(),
        });
    }
    Ok(SolveReport { summary, solved })
}

/// Solves the scenario in `config`; writes `summary.json` and `policy.csv`.
pub fn run_solve(config: &Path, out: &Path) -> Result<SolveReport, CliError> {
    let cfg = ScenarioConfig::load(config)?;
    solve_config(&cfg, out)
}

/// As [`run_solve`], with the service distribution taken from a trace file.
pub fn run_trace(config: &Path, trace: &Path, out: &Path) -> Result<SolveReport, CliError> {
    let mut cfg = ScenarioConfig::load(config)?;
    cfg.distribution = crate::config::DistributionConfig {
        family: Some("samples".into()),
        path: Some(trace.to_path_buf()),
        ..Default::default()
    };
    solve_config(&cfg, out)
}

fn with_overrides(base: SimConfig, o: &SimOverrides) -> SimConfig {
    let mut c = match o.cycles {
        Some(n) => SimConfig {
            seed: base.seed,
            batches: base.batches,
            max_preemptions_per_chain: base.max_preemptions_per_chain,
            ..SimConfig::with_cycles(n)
        },
        None => base,
    };
    if let Some(s) = o.seed {
        c.seed = s;
    }
    c
}

fn write_comparison(rows: &[ComparisonRow], out: &Path) -> Result<(), CliError> {
    create_out(out)?;
    let path = out.join("comparison.csv");
    write_file(&path, |w| {
        writeln!(w, "{COMPARISON_CSV_HEADER}")?;
        for r in rows {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{}",
                csv_field(&r.scenario),
                fmt_sig(r.tailor_rho, 12),
                fmt_sig(r.tailor_sim, 12),
                fmt_sig(r.tailor_stderr, 12),
                fmt_sig(r.aoinp_rho, 12),
                fmt_sig(r.aoinp_sim, 12),
                fmt_sig(r.zw_rho, 12),
                fmt_sig(r.zw_sim, 12),
                fmt_sig(r.ratio_aoinp, 3),
                fmt_sig(r.ratio_zw, 3),
            )?;
        }
        Ok(())
    })?;
    let json = out.join("comparison.json");
    write_file(&json, |w| {
        serde_json::to_writer_pretty(&mut *w, rows).map_err(std::io::Error::other)?;
        writeln!(w)
    })
}

fn compare_configs(
    scenarios: &[ScenarioConfig],
    sim: &SimSection,
    overrides: &SimOverrides,
    out: &Path,
) -> Result<Vec<ComparisonRow>, CliError> {
    let list = scenarios
        .iter()
        .map(|s| s.scenario())
        .collect::<Result<Vec<_>, _>>()?;
    let cfg = with_overrides(sim.apply(SimConfig::default()), overrides);
    cfg.validate()?;
    let rows = compare(&list, &cfg)?;
    write_comparison(&rows, out)?;
    Ok(rows)
}

/// Runs every scenario of a config set; writes `comparison.csv`.
pub fn run_compare(
    config: &Path,
    out: &Path,
    overrides: &SimOverrides,
) -> Result<Vec<ComparisonRow>, CliError> {
    let set = ConfigSet::load(config)?;
    compare_configs(&set.scenarios, &set.sim, overrides, out)
}

/// The built-in four-scenario comparison.
pub fn run_table1(out: &Path, overrides: &SimOverrides) -> Result<Vec<ComparisonRow>, CliError> {
    compare_configs(&table1_scenarios(), &SimSection::default(), overrides, out)
}

/// Solves one scenario and simulates it with both baselines; writes
/// `simulation.csv` and, on request, `trajectory.csv` for the solved policy.
pub fn run_simulate(
    config: &Path,
    out: &Path,
    overrides: &SimOverrides,
    emit_trajectory: bool,
) -> Result<(), CliError> {
    let cfg = ScenarioConfig::load(config)?;
    let scenario = cfg.scenario()?;
    let sim_cfg = with_overrides(cfg.sim_config(), overrides);
    sim_cfg.validate()?;
    create_out(out)?;
    let solved = solver::solve(&scenario.dist, &scenario.grid, &scenario.solver)?;
    let aoinp = aoi_np_solve(&scenario.dist, cfg.kappa_s).map_err(|e| {
        CliError::Compare(CompareError::Baseline {
            scenario: cfg.name.clone(),
            source: e,
        })
    })?;
    let policies: [(&str, &dyn SimPolicy); 3] = [
        ("TAILOR", &solved.policy),
        ("AoI-NP", &ThresholdPolicy { beta: aoinp.beta }),
        ("ZW-NP", &ThresholdPolicy { beta: 0.0 }),
    ];
    let mut lines = Vec::new();
    for (name, p) in policies {
        let r = if emit_trajectory && name == "TAILOR" {
            let path = out.join("trajectory.csv");
            let file = File::create(&path).map_err(io_err(&path))?;
            let mut w = BufWriter::new(file);
            let mut failed: Option<std::io::Error> = None;
            writeln!(w, "t,aoi,mode,event").map_err(io_err(&path))?;
            let r = simulate_with_trajectory(
                p,
                &scenario.dist,
                cfg.kappa_s,
                cfg.kappa_p,
                &sim_cfg,
                &mut |pt| {
                    if failed.is_none() {
                        if let Err(e) = writeln!(
                            w,
                            "{},{},{},{}",
                            fmt_sig(pt.t, 12),
                            fmt_sig(pt.aoi, 12),
                            pt.mode.as_str(),
                            pt.event.as_str()
                        ) {
                            failed = Some(e);
                        }
                    }
                },
            )?;
            if let Some(e) = failed {
                return Err(io_err(&path)(e));
            }
            w.flush().map_err(io_err(&path))?;
            r
        } else {
            simulate(p, &scenario.dist, cfg.kappa_s, cfg.kappa_p, &sim_cfg)?
        };
        lines.push(format!(
            "{},{},{},{},{},{},{},{}",
            csv_field(&cfg.name),
            name,
            fmt_sig(r.avg_cost, 12),
            fmt_sig(r.stderr, 12),
            r.n_samples,
            r.n_preemptions,
            r.n_deliveries,
            fmt_sig(r.elapsed_sim_time, 12)
        ));
    }
    let path = out.join("simulation.csv");
    write_file(&path, |w| {
        writeln!(w, "{SIM_CSV_HEADER}")?;
        for l in &lines {
            writeln!(w, "{l}")?;
        }
        Ok(())
    })?;
    if !solved.converged {
        return Err(CliError::NotConverged {
            iterations: solved.iterations,
            rho: solved.rho,
            out: out.to_path_buf(),
        });
    }
    Ok(())
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Solve(a) => run_solve(&a.config, &a.out).map(|_| ()),
        Command::Trace(a) => run_trace(&a.config, &a.trace, &a.out).map(|_| ()),
        Command::Compare(a) => run_compare(&a.config, &a.out, &a.sim).map(|_| ()),
        Command::Table1(a) => run_table1(&a.out, &a.sim).map(|_| ()),
        Command::Simulate(a) => run_simulate(&a.config, &a.out, &a.sim, a.emit_trajectory),
    }
}

/// Applies `TAILOR_THREADS` to the global worker pool, if set.
pub fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw.trim().parse().ok().filter(|n| *n > 0).ok_or_else(|| {
        CliError::Config(ConfigError::Invalid {
            field: THREADS_ENV.into(),
            message: format!("must be a positive integer, got `{raw}`"),
        })
    })?;
    // a pool that is already initialised keeps its size
    let _ = rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global();
    Ok(())
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match configure_threads().and_then(|_| run(&cli)) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
