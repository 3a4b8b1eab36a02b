use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use mgb_core::diagnostics::{bench, self_check, write_bench_csv};
use mgb_core::{build_problem, run, RunConfig, RunStatus};

/// Multigrid barrier path following for p-Laplacian problems.
#[derive(Parser)]
#[command(name = "mgb", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one problem described by a TOML config.
    Solve {
        #[arg(long)]
        config: PathBuf,
        /// Write the finest mesh as plain text.
        #[arg(long)]
        dump_mesh: Option<PathBuf>,
        /// Write the final iterate (u at Lagrange nodes, s per element).
        #[arg(long)]
        dump_solution: Option<PathBuf>,
        /// Write the per-step trace as CSV.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Record wall-clock times in the trace (otherwise 0, so traces
        /// are reproducible byte for byte).
        #[arg(long)]
        timing: bool,
    },
    /// Run the `[bench]` matrix of a config and write one CSV row per cell.
    Bench {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the built-in invariant and diagnostic suite.
    Check,
}

fn create(path: &PathBuf) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

fn solve(
    config: &PathBuf,
    dump_mesh: Option<PathBuf>,
    dump_solution: Option<PathBuf>,
    trace_out: Option<PathBuf>,
    timing: bool,
) -> Result<ExitCode> {
    let cfg = RunConfig::load(config)?;
    let prob = build_problem(&cfg.problem_spec()?)?;
    let trace = run(&prob, &cfg.path_config()?);
    let level = trace.level - 1;
    if let Some(path) = trace_out {
        trace.write_csv(create(&path)?, timing)?;
    }
    if let Some(path) = dump_mesh {
        prob.hierarchy.meshes().level(level).write_text(create(&path)?)?;
    }
    if let Some(path) = dump_solution {
        prob.hierarchy.space(level).write_solution(&trace.z, create(&path)?)?;
    }
    println!(
        "{} p={} alpha={} h={} status={:?} t={:.6e} newton={} t_steps={} max_step={} min_rho={:.4}",
        trace.algorithm,
        prob.spec.p,
        prob.spec.alpha,
        prob.h(level),
        trace.status,
        trace.t,
        trace.total_newton,
        trace.t_steps().count(),
        trace.max_step_newton(),
        trace.min_rho(),
    );
    Ok(match trace.status {
        RunStatus::Converged => ExitCode::SUCCESS,
        RunStatus::SolverFailure(_) => ExitCode::from(2),
        RunStatus::BudgetExhausted => ExitCode::from(3),
    })
}

fn main() -> Result<ExitCode> {
    match Cli::parse().command {
        Command::Solve {
            config,
            dump_mesh,
            dump_solution,
            trace,
            timing,
        } => solve(&config, dump_mesh, dump_solution, trace, timing),
        Command::Bench { config, out } => {
            let cfg = RunConfig::load(&config)?;
            let rows = bench(&cfg)?;
            write_bench_csv(&rows, create(&out)?)?;
            for r in &rows {
                println!(
                    "{} p={} alpha={} h={} {} newton={} {}",
                    r.algorithm, r.p, r.alpha, r.h, r.status, r.total_newton, r.reason
                );
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Check => {
            let checks = self_check();
            let mut ok = true;
            for c in &checks {
                println!("{} {}  {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
                ok &= c.passed;
            }
            Ok(if ok { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
    }
}
