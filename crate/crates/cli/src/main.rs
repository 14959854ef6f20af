use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rwrs_cli::{emit_csv, load_csv, refit, run_with_threads, write_csv, ExperimentConfig, ExperimentKind, Outcome};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "rwrs", version, about = "Monte Carlo and quadrature checks for random walks in random scenery")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Empirical vs closed-form scenery characteristic functions.
    SampleCheck(Common),
    /// ψ(t) against its small-t equivalent (or derivative).
    Psi(Common),
    /// Regime constants and oscillatory integrals.
    Constants(Common),
    /// Potential kernel estimates and their renewal fit.
    Kernel(Common),
    /// Refit the rows of an existing kernel CSV.
    Fit {
        #[command(flatten)]
        common: Common,
        /// Kernel CSV to refit (overrides `input`).
        #[arg(long)]
        input: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; 0 uses all cores.
    #[arg(long, env = "RWRS_THREADS")]
    threads: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn load(&self, allowed: &[ExperimentKind]) -> Result<(ExperimentConfig, usize)> {
        let mut cfg = ExperimentConfig::from_path(&self.config)?;
        if !allowed.contains(&cfg.kind) {
            bail!("config kind `{}` does not belong to this subcommand", cfg.kind.name());
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if self.out.is_some() {
            cfg.out = self.out.clone();
        }
        let threads = self.threads.or(cfg.threads).unwrap_or(0);
        Ok((cfg, threads))
    }
}

fn finish(cfg: &ExperimentConfig, outcome: Outcome) -> Result<ExitCode> {
    match &cfg.out {
        Some(path) => emit_csv(&outcome.rows, path)?,
        None => write_csv(&outcome.rows, std::io::stdout().lock())?,
    }
    for note in &outcome.verdict.notes {
        eprintln!("{note}");
    }
    let pass = outcome.verdict.pass;
    eprintln!("verdict: {}", if pass { "PASS" } else { "FAIL" });
    Ok(if pass { ExitCode::SUCCESS } else { ExitCode::from(2) })
}

fn run(cli: Cli) -> Result<ExitCode> {
    use ExperimentKind::*;
    let (common, allowed): (&Common, &[ExperimentKind]) = match &cli.command {
        Command::SampleCheck(c) => (c, &[SamplerCheck]),
        Command::Psi(c) => (c, &[PsiRatio]),
        Command::Constants(c) => (c, &[Constants]),
        Command::Kernel(c) => (c, &[KernelRecurrent, KernelTransient]),
        Command::Fit { common, .. } => (common, &[KernelRecurrent, KernelTransient]),
    };
    let (cfg, threads) = common.load(allowed)?;
    let outcome = match &cli.command {
        Command::Fit { input, .. } => {
            let path = input.clone().or_else(|| cfg.input.clone()).context("fit needs --input or an `input` key")?;
            refit(&cfg, &load_csv(&path)?)?
        }
        _ => run_with_threads(&cfg, threads)?,
    };
    finish(&cfg, outcome)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
