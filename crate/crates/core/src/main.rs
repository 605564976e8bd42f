//! Command-line front end: `run`, `reference`, `sweep` and `check`.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use photonic_eig::driver::{
    compute_reference, emit_csv, emit_sweep_csv, k_sweep, run_schedule, write_sweep, write_trace, RunConfig,
};
use photonic_eig::{Error, Result};

#[derive(Parser)]
#[command(name = "photonic-eig", version, about = "Band-structure eigensolvers for a 2D photonic crystal cell")]
struct Cli {
    /// Worker threads for sparse factorizations (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured refinement schedule and write its trace.
    Run(Common),
    /// Compute and print the reference eigenvalue.
    Reference(Common),
    /// Smallest eigenvalue along a path of wave vectors.
    Sweep(Common),
    /// Run the invariant suite.
    Check,
}

#[derive(Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// CSV output path (default: the config's `output`, else stdout).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Override the number of steps per mesh level.
    #[arg(long)]
    steps_per_mesh: Option<usize>,
    /// Iterate on the finest level only.
    #[arg(long)]
    fine_only: bool,
    /// Skip the reference computation.
    #[arg(long)]
    no_reference: bool,
}

impl Common {
    fn load(&self) -> Result<RunConfig> {
        let mut cfg = RunConfig::from_file(&self.config)?;
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(s) = self.steps_per_mesh {
            cfg.schedule.steps_per_mesh = s;
        }
        if self.fine_only {
            cfg.schedule.fine_only = true;
        }
        if self.no_reference {
            cfg.reference.enabled = false;
        }
        if self.out.is_some() {
            cfg.output.clone_from(&self.out);
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Outcome classes mapped to exit codes.
enum Failure {
    Solver(String),
    Usage(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_solver_failure() {
            Failure::Solver(e.to_string())
        } else {
            Failure::Usage(e.to_string())
        }
    }
}

fn write_out(path: Option<&Path>, file: impl FnOnce(&Path) -> Result<()>, stdout: impl FnOnce(&mut dyn Write) -> std::io::Result<()>) -> Result<()> {
    match path {
        Some(p) => file(p),
        None => stdout(&mut std::io::stdout().lock()).map_err(|e| Error::io("<stdout>", e)),
    }
}

fn run(c: &Common) -> std::result::Result<(), Failure> {
    let cfg = c.load()?;
    let reference = if cfg.reference.enabled {
        let r = compute_reference(&cfg)?;
        eprintln!(
            "reference: level {} mu {:.16e} lambda {:.16e} residual {:.3e}",
            r.level, r.mu_ref, r.lambda_ref, r.residual
        );
        Some(r)
    } else {
        None
    };
    let mut out = run_schedule(&cfg)?;
    if let Some(r) = reference {
        out.trace.set_reference(r.mu_ref);
    }
    write_out(cfg.output.as_deref(), |p| emit_csv(&out.trace, p), |w| write_trace(w, &out.trace))?;
    if let Some(last) = out.trace.last() {
        eprintln!(
            "{} steps, level {}, lambda {:.16e}, residual {:.3e}, {:.3} s",
            out.trace.len(),
            out.final_level,
            last.lambda,
            last.residual_dual,
            out.trace.total_seconds()
        );
    }
    match out.error {
        Some(e) => Err(e.into()),
        None if !out.converged => Err(Failure::Solver(format!(
            "tolerance {:e} not reached within {} steps",
            cfg.tol, cfg.schedule.max_steps
        ))),
        None => Ok(()),
    }
}

fn reference(c: &Common) -> std::result::Result<(), Failure> {
    let cfg = c.load()?;
    let r = compute_reference(&cfg)?;
    println!("level,mu_ref,lambda_ref,residual_dual,steps");
    println!("{},{:.16e},{:.16e},{:.16e},{}", r.level, r.mu_ref, r.lambda_ref, r.residual, r.steps);
    if r.residual > cfg.reference.tol {
        return Err(Failure::Solver(format!(
            "reference residual {:.3e} above {:e}",
            r.residual, cfg.reference.tol
        )));
    }
    Ok(())
}

fn sweep(c: &Common) -> std::result::Result<(), Failure> {
    let cfg = c.load()?;
    let rows = k_sweep(&cfg, &cfg.sweep_points()?)?;
    write_out(cfg.output.as_deref(), |p| emit_sweep_csv(&rows, p), |w| write_sweep(w, &rows))?;
    let failed = rows.iter().filter(|r| r.lambda1.is_none()).count();
    if failed > 0 {
        return Err(Failure::Solver(format!("{failed} of {} sweep points failed", rows.len())));
    }
    Ok(())
}

fn check() -> std::result::Result<(), Failure> {
    let results = photonic_eig::driver::checks::run_checks();
    for r in &results {
        println!("{} {}: {}", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail);
    }
    let failed = results.iter().filter(|r| !r.passed).count();
    if failed > 0 {
        return Err(Failure::Solver(format!("{failed} invariant(s) failed")));
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    if let Some(n) = cli.threads {
        let par = if n <= 1 {
            faer::Par::Seq
        } else {
            faer::Par::rayon(n)
        };
        faer::set_global_parallelism(par);
    }
    let res = match &cli.cmd {
        Command::Run(c) => run(c),
        Command::Reference(c) => reference(c),
        Command::Sweep(c) => sweep(c),
        Command::Check => check(),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Solver(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}
