#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use robustbf::conic::ClarabelBackend;
use robustbf::experiments::{
    benchmark_runtime, run_sweep, solve_method, summarize, trial_channels, write_csv, PeEstimator, ResultRow,
    RowStatus,
};
use robustbf::rng::derive_seed;
use robustbf::Error;

use config::{ConfigError, RunConfig};

#[derive(Parser)]
#[command(name = "robustbf", version, about = "Robust multicell downlink beamforming experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one channel draw with the configured method and print the result row.
    Solve(Common),
    /// Run the configured parameter sweep and write one row per (value, trial, method).
    Sweep(Common),
    /// Estimate PE for the configured methods at the configured radius.
    Pe(Common),
    /// Time full bisections per method and antenna count.
    Bench(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long = "pe-samples")]
    pe_samples: Option<usize>,
}

enum Failure {
    Validation(String),
    Solver(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Validation(e.to_string())
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Solver(_) | Error::Experiment(_) => Failure::Solver(e.to_string()),
            _ => Failure::Validation(e.to_string()),
        }
    }
}

fn io_failure(e: io::Error, what: &str) -> Failure {
    Failure::Solver(format!("cli: {what}: {e}"))
}

fn load(c: &Common) -> Result<RunConfig, Failure> {
    let mut cfg = config::load(&c.config)?;
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(n) = c.pe_samples {
        cfg.solve.pe_samples = n;
        cfg.sweep.pe_samples = n;
        cfg.pe.samples = n;
    }
    if c.out.is_some() {
        cfg.output = c.out.clone();
    }
    Ok(cfg)
}

fn emit(rows: &[ResultRow], out: Option<&PathBuf>) -> Result<(), Failure> {
    match out {
        Some(p) => {
            let f = File::create(p).map_err(|e| io_failure(e, &format!("cannot create {}", p.display())))?;
            write_csv(BufWriter::new(f), rows)?;
        }
        None => write_csv(io::stdout().lock(), rows)?,
    }
    Ok(())
}

fn solve(c: &Common) -> Result<(), Failure> {
    let cfg = load(c)?;
    let scenario = cfg.scenario()?;
    let method = cfg.method()?;
    let backend = ClarabelBackend::default();
    let channels = trial_channels(&scenario, cfg.seed, cfg.solve.trial)?;
    let o = solve_method(method, &channels, &scenario, None, &backend)?;
    let pe = match (&o.beams, cfg.solve.pe_samples) {
        (Some(b), n) if n > 0 => {
            let net = scenario.network()?;
            let set = scenario.uncertainty()?;
            let est = PeEstimator::new(n, derive_seed(cfg.seed, &[cfg.solve.trial as u64]));
            Some(est.estimate(b, o.t_star, &set, &channels, &net)?)
        }
        _ => None,
    };
    let row = ResultRow {
        method,
        norm: scenario.norm,
        rho: scenario.rho,
        rho_prime: scenario.rho_prime(method),
        power_db: scenario.power_db,
        num_cells: scenario.num_cells,
        num_users: scenario.num_cells * scenario.users_per_cell,
        antennas: scenario.antennas,
        trial: cfg.solve.trial,
        t_star: Some(o.t_star),
        pe,
        runtime_ms: cfg.solve.timings.then_some(o.wall_time.as_secs_f64() * 1e3),
        iterations: Some(o.iterations),
        status: o.status.clone(),
        seed: cfg.seed,
    };
    emit(std::slice::from_ref(&row), None)?;
    if let Some(p) = &cfg.output {
        emit(std::slice::from_ref(&row), Some(p))?;
    }
    if o.status == RowStatus::Unknown {
        return Err(Failure::Solver(format!(
            "conic: {method} solve ended without a certified feasible point"
        )));
    }
    Ok(())
}

fn sweep(c: &Common, pe_only: bool) -> Result<(), Failure> {
    let cfg = load(c)?;
    let scenario = cfg.scenario()?;
    let spec = if pe_only { cfg.pe_spec()? } else { cfg.sweep_spec()? };
    let rows = run_sweep(&spec, &scenario, &ClarabelBackend::default())?;
    emit(&rows, cfg.output.as_ref())?;
    let mut err = io::stderr().lock();
    for s in summarize(&spec, &rows) {
        let pe = s.mean_pe.map(|p| format!("{p:.4}")).unwrap_or_else(|| "-".into());
        let _ = writeln!(
            err,
            "{}={} {}: mean t* {:.4}, mean PE {pe}, {}/{} solved",
            spec.parameter.name(),
            s.value,
            s.method,
            s.mean_t_star,
            s.solved,
            s.trials
        );
    }
    Ok(())
}

fn bench(c: &Common) -> Result<(), Failure> {
    let cfg = load(c)?;
    let scenario = cfg.scenario()?;
    let spec = cfg.bench_spec()?;
    let report = benchmark_runtime(&spec, &scenario, &ClarabelBackend::default())?;
    emit(&report.rows, cfg.output.as_ref())?;
    let mut err = io::stderr().lock();
    for s in &report.summary {
        let _ = writeln!(
            err,
            "T={} {}: mean {:.4} s over {} runs ({})",
            s.antennas, s.method, s.mean_seconds, s.runs, s.status
        );
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Solve(c) => solve(c),
        Command::Sweep(c) => sweep(c, false),
        Command::Pe(c) => sweep(c, true),
        Command::Bench(c) => bench(c),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(m)) => {
            eprintln!("robustbf: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Solver(m)) => {
            eprintln!("robustbf: {m}");
            ExitCode::from(2)
        }
    }
}
