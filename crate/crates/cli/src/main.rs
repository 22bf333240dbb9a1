use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use bmq_core::io::{configure_threads, run, AnalysisCheck, Initial, Mode, RunConfig};
use clap::{Args, Parser, Subcommand, ValueEnum};

/// Ball-Majumdar potential, analytic certificates and Q-tensor flow solver.
#[derive(Parser, Debug)]
#[command(name = "bmq", version)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// TOML configuration; omitted keys take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Use the conductivity with the θ^{-2} term.
    #[arg(long, global = true)]
    singular_flux: bool,
    /// Worker threads for parallel sections.
    #[arg(long, global = true, env = "BMQ_THREADS")]
    threads: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Tabulate or verify the potential.
    Potential {
        #[command(subcommand)]
        action: PotentialAction,
    },
    /// Run analytic certificates; all of them when none is named.
    Analysis { checks: Vec<CheckArg> },
    /// Evolve the coupled system and audit its balances.
    Simulate(SimArgs),
}

#[derive(Subcommand, Debug)]
enum PotentialAction {
    /// Write f, its gradient and Hessian over the barycentric grid as CSV.
    Eval,
    /// Duality, derivative and rotation checks plus the boundary blow-up fit.
    Verify,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum CheckArg {
    Ftest1,
    Concavity,
    Laplace,
    Case2,
}

impl From<CheckArg> for AnalysisCheck {
    fn from(c: CheckArg) -> Self {
        match c {
            CheckArg::Ftest1 => AnalysisCheck::Ftest1,
            CheckArg::Concavity => AnalysisCheck::Concavity,
            CheckArg::Laplace => AnalysisCheck::Laplace,
            CheckArg::Case2 => AnalysisCheck::Case2,
        }
    }
}

#[derive(Args, Debug)]
struct SimArgs {
    #[arg(long)]
    grid_size: Option<usize>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    t_end: Option<f64>,
    /// Start from the uniform equilibrium instead of random data.
    #[arg(long)]
    equilibrium: bool,
}

fn build_config(cli: &Cli) -> Result<RunConfig> {
    let c = &cli.common;
    let text = match &c.config {
        Some(p) => std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?,
        None => String::new(),
    };
    let mut cfg = RunConfig::from_toml_str(&text)?;
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(o) = &c.out {
        cfg.out_dir = o.clone();
    }
    cfg.singular_flux |= c.singular_flux;
    match &cli.command {
        Command::Potential { action } => {
            cfg.mode = match action {
                PotentialAction::Eval => Mode::PotentialEval,
                PotentialAction::Verify => Mode::PotentialVerify,
            };
        }
        Command::Analysis { checks } => {
            cfg.mode = Mode::Analysis;
            if !checks.is_empty() {
                cfg.analysis.checks = checks.iter().map(|&c| c.into()).collect();
            }
        }
        Command::Simulate(a) => {
            cfg.mode = Mode::Simulate;
            let s = &mut cfg.simulation;
            if let Some(n) = a.grid_size {
                s.grid_size = n;
            }
            if let Some(dt) = a.dt {
                s.dt = dt;
            }
            if let Some(t) = a.t_end {
                s.t_end = t;
            }
            if a.equilibrium {
                s.initial = Initial::Equilibrium;
            }
        }
    }
    cfg.finalize()?;
    Ok(cfg)
}

fn main() -> Result<ExitCode> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    configure_threads(cli.common.threads)?;
    let cfg = build_config(&cli)?;
    let summary = run(&cfg).with_context(|| format!("{:?} run failed", cfg.mode))?;
    for c in &summary.checks {
        println!(
            "{:<5} {:<24} worst = {:.6e} (tolerance {:.3e}, {} samples)",
            if c.passed { "PASS" } else { "FAIL" },
            c.check_name,
            c.worst_value,
            c.tolerance,
            c.samples
        );
    }
    println!("results in {}", cfg.out_dir.display());
    Ok(if summary.passed { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}
