//! `bsr`: command-line driver for the two-channel spectral engine.
//!
//! Exit codes: 0 success, 1 a hard verification check failed, 2 only fit
//! thresholds were missed, 3 the command itself failed, 64 bad usage.

mod commands;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use bsr_core::config::RunConfig;
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use crate::commands::Ctx;
use crate::run::RunDir;

#[derive(Parser)]
#[command(name = "bsr", version, about = "Resonances and reductions of a two-channel Born-Oppenheimer operator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// JSON run configuration; omitted fields take their defaults.
    #[arg(long)]
    config: PathBuf,
    /// Output root; each run writes to `<out>/<run id>/`.
    #[arg(long, env = "BSR_OUT")]
    out: Option<PathBuf>,
    /// Recompute even when a finished record with the same arguments exists.
    #[arg(long)]
    force: bool,
    /// Size of the worker pool for independent solves.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Tabulate both channels (plain and filled) and report the critical points.
    Potential {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 2000)]
        samples: usize,
    },
    /// Dirichlet spectra in the window, with an n, 2n, 4n refinement ladder.
    Eigs {
        #[command(flatten)]
        common: Common,
        /// Values of h (default: the configured ladder).
        #[arg(long = "h", value_delimiter = ',')]
        hs: Vec<f64>,
        #[arg(long, default_value_t = 3)]
        refine: usize,
    },
    /// Filtered resonances of the scaled operator, with a refinement ladder.
    Resonances {
        #[command(flatten)]
        common: Common,
        /// Values of h (default: the largest h of the ladder).
        #[arg(long = "h", value_delimiter = ',')]
        hs: Vec<f64>,
        #[arg(long, default_value_t = 3)]
        refine: usize,
    },
    /// Coupled filled-well and Dirichlet spectra and their pairing.
    Twochannel {
        #[command(flatten)]
        common: Common,
        #[arg(long = "h", value_delimiter = ',')]
        hs: Vec<f64>,
    },
    /// Fixed-point and Grushin reductions, Q(lambda) norms, avoided crossings.
    Reduce {
        #[command(flatten)]
        common: Common,
    },
    /// The full h-ladder with scaling fits.
    Scan {
        #[command(flatten)]
        common: Common,
    },
    /// The verification suite; the exit code follows its verdict.
    Verify {
        #[command(flatten)]
        common: Common,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Potential { .. } => "potential",
            Command::Eigs { .. } => "eigs",
            Command::Resonances { .. } => "resonances",
            Command::Twochannel { .. } => "twochannel",
            Command::Reduce { .. } => "reduce",
            Command::Scan { .. } => "scan",
            Command::Verify { .. } => "verify",
        }
    }

    fn common(&self) -> &Common {
        match self {
            Command::Potential { common, .. }
            | Command::Eigs { common, .. }
            | Command::Resonances { common, .. }
            | Command::Twochannel { common, .. }
            | Command::Reduce { common }
            | Command::Scan { common }
            | Command::Verify { common } => common,
        }
    }

    /// The arguments that change the outputs, resolved against the configuration.
    fn resolved_args(&self, cfg: &RunConfig) -> Value {
        let ladder = &cfg.scan.ladder;
        let or = |hs: &Vec<f64>, d: &[f64]| if hs.is_empty() { d.to_vec() } else { hs.clone() };
        match self {
            Command::Potential { samples, .. } => json!({ "samples": samples }),
            Command::Eigs { hs, refine, .. } => json!({ "h": or(hs, ladder), "refine": refine }),
            Command::Resonances { hs, refine, .. } => json!({ "h": or(hs, &ladder[..1]), "refine": refine }),
            Command::Twochannel { hs, .. } => json!({ "h": or(hs, ladder) }),
            _ => json!({}),
        }
    }
}

fn h_list(args: &Value) -> Result<Vec<f64>> {
    let hs: Vec<f64> = serde_json::from_value(args["h"].clone())?;
    for &h in &hs {
        anyhow::ensure!(h > 0.0 && h <= 0.5, "h = {h} must lie in (0, 0.5]");
    }
    Ok(hs)
}

fn execute(cmd: &Command, ctx: &mut Ctx<'_>, args: &Value) -> Result<i32> {
    let refine = || args["refine"].as_u64().unwrap_or(1) as usize;
    match cmd {
        Command::Potential { samples, .. } => commands::potential(ctx, *samples),
        Command::Eigs { .. } => commands::eigs(ctx, &h_list(args)?, refine()),
        Command::Resonances { .. } => commands::resonances(ctx, &h_list(args)?, refine()),
        Command::Twochannel { .. } => commands::twochannel(ctx, &h_list(args)?),
        Command::Reduce { .. } => commands::reduce(ctx),
        Command::Scan { .. } => commands::scan(ctx),
        Command::Verify { .. } => commands::verify(ctx),
    }
}

fn run(cli: Cli) -> Result<i32> {
    let cmd = &cli.command;
    let common = cmd.common();
    if let Some(n) = common.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("configuring the thread pool")?;
    }
    bsr_core::eigensolve::use_sequential_kernels();

    let cfg = RunConfig::load(&common.config).with_context(|| format!("reading {}", common.config.display()))?;
    let problem = cfg.problem().context("setting up the problem")?;
    let effective = cfg.effective(&problem);
    let out = common.out.clone().or_else(|| cfg.output.dir.clone()).unwrap_or_else(|| PathBuf::from("bsr-out"));
    let dir = RunDir::open(&out, &effective)?;
    let args = cmd.resolved_args(&cfg);
    eprintln!("[bsr] run {} in {}", dir.run_id, dir.root.display());

    if !common.force {
        if let Some(rec) = dir.cached(cmd.name(), &args) {
            eprintln!("[bsr] {} is cached for this configuration (use --force to recompute)", cmd.name());
            if matches!(cmd, Command::Verify { .. }) {
                commands::print_cached_verify(&dir)?;
            }
            return Ok(rec.exit_code);
        }
    }

    let started = RunDir::started();
    let mut ctx = Ctx { cfg: &effective, problem: &problem, dir };
    let outcome = execute(cmd, &mut ctx, &args).with_context(|| format!("command {}", cmd.name()));
    let rec = ctx.dir.finish(cmd.name(), args, started, &outcome)?;
    outcome.map(|_| rec.exit_code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 64 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(3)
        }
    }
}
