use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::cmd;
use crate::config::{Method, RunConfig};
use crate::error::{CliError, Result};

/// Visibility-domain RFI mitigation: simulate, train, mitigate, evaluate, render.
#[derive(Debug, Parser)]
#[command(name = "vfdm", version, about)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Default, Args)]
pub struct Common {
    /// JSON run configuration; omitted sections take their defaults
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed for the command's random stream (dataset, training or sampling)
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Sampler stochasticity, 0 deterministic to 1 ancestral
    #[arg(long, global = true)]
    pub eta: Option<f64>,
    /// Total training steps
    #[arg(long, global = true)]
    pub steps: Option<u64>,
    /// Overwrite an existing dataset
    #[arg(long, global = true)]
    pub force: bool,
    /// Output directory (output file for render)
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate the paired clean/dirty dataset
    Gen,
    /// Train the noise-prediction network, resuming when checkpoints exist
    Train {
        /// Dataset directory (default: paths.data)
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Write RFI-free estimates for dataset pairs or a single visibility file
    Mitigate {
        /// Dataset directory or visibility JSON file
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Pair ids (default: the test split)
        #[arg(long, value_delimiter = ',')]
        ids: Option<Vec<u64>>,
        #[arg(long, value_enum, default_value = "vfdm")]
        method: Method,
    },
    /// Score methods on the test split and write CSV reports
    Eval {
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Methods to score (default: eval.methods)
        #[arg(long, value_enum, value_delimiter = ',')]
        methods: Option<Vec<Method>>,
        /// Score only the first N test pairs
        #[arg(long)]
        limit: Option<usize>,
    },
    /// Render a brightness or visibility JSON file to an 8-bit PGM/PNG
    Render {
        #[arg(long)]
        input: PathBuf,
        /// Display range as LO,HI in Kelvin (default: data min/max)
        #[arg(long, value_delimiter = ',')]
        range: Option<Vec<f64>>,
    },
}

/// Config file plus flag overrides for `command`.
pub fn resolve(common: &Common, command: &Command) -> Result<RunConfig> {
    let mut cfg = RunConfig::load(common.config.as_deref())?;
    if let Some(seed) = common.seed {
        match command {
            Command::Gen => cfg.dataset.seed = seed,
            Command::Train { .. } => cfg.train.seed = seed,
            _ => cfg.eval.seed = seed,
        }
    }
    if let Some(eta) = common.eta {
        cfg.diffusion.eta = eta;
    }
    if let Some(steps) = common.steps {
        cfg.train.steps = steps;
    }
    match command {
        Command::Gen => {
            if let Some(out) = &common.out {
                cfg.paths.data = out.clone();
            }
        }
        Command::Train { data } => {
            if let Some(d) = data {
                cfg.paths.data = d.clone();
            }
            if let Some(out) = &common.out {
                cfg.paths.run = out.clone();
            }
        }
        Command::Eval { data, methods, limit, .. } => {
            if let Some(d) = data {
                cfg.paths.data = d.clone();
            }
            if let Some(m) = methods {
                cfg.eval.methods = m.clone();
            }
            if limit.is_some() {
                cfg.eval.limit = *limit;
            }
        }
        Command::Mitigate { .. } | Command::Render { .. } => {}
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn execute(cli: &Cli) -> Result<()> {
    let cfg = resolve(&cli.common, &cli.command)?;
    let mut log = |s: &str| eprintln!("{s}");
    match &cli.command {
        Command::Gen => {
            let m = cmd::gen::run(&cfg, &cfg.paths.data, cli.common.force)?;
            println!("{}", cmd::gen::summary(&m));
        }
        Command::Train { .. } => {
            let o = cmd::train::run(&cfg, &cfg.paths.data, &cfg.paths.run, &mut log)?;
            println!(
                "trained to step {}; checkpoint {}{}",
                o.steps,
                o.checkpoint.display(),
                o.last_loss.map(|l| format!(", last loss {l:.5}")).unwrap_or_default()
            );
        }
        Command::Mitigate {
            input,
            checkpoint,
            ids,
            method,
        } => {
            let out = cli.common.out.clone().unwrap_or_else(|| cfg.paths.run.join("mitigate"));
            let s = cmd::mitigate::run(
                &cfg,
                cmd::mitigate::MitigateArgs {
                    input,
                    ids: ids.clone(),
                    checkpoint: checkpoint.as_deref(),
                    method: *method,
                    out: &out,
                },
            )?;
            println!("{} estimates written to {}", s.ids.len(), out.display());
        }
        Command::Eval { checkpoint, .. } => {
            let out = cli.common.out.clone().unwrap_or_else(|| cfg.paths.run.join("eval"));
            let o = cmd::eval::run(&cfg, &cfg.paths.data, checkpoint.as_deref(), &out, &mut log)?;
            println!("{:<8} {:<12} {:>5} {:>12} {:>8} {:>12}", "method", "mode", "count", "rmse_K", "ssim", "tre_K");
            for r in &o.aggregate {
                println!(
                    "{:<8} {:<12} {:>5} {:>12.4} {:>8.4} {:>12}",
                    r.method,
                    r.mode.to_string(),
                    r.count,
                    r.rmse_k,
                    r.ssim,
                    r.tre_k.map(|v| format!("{v:.4}")).unwrap_or_else(|| "-".into())
                );
            }
        }
        Command::Render { input, range } => {
            let out = cli
                .common
                .out
                .clone()
                .ok_or_else(|| CliError::Config("render needs --out <file.pgm|file.png>".into()))?;
            let range = match range.as_deref() {
                None => None,
                Some([lo, hi]) => Some((*lo, *hi)),
                Some(_) => return Err(CliError::Config("--range takes LO,HI".into())),
            };
            let r = cmd::render::run(input, &out, range, &cfg.pattern)?;
            println!("{} [{}, {}] K", out.display(), r.lo, r.hi);
        }
    }
    Ok(())
}

/// Applies `VFDM_THREADS` to the worker pool.
pub fn init_threads() -> Result<()> {
    let Ok(v) = std::env::var("VFDM_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Config(format!("VFDM_THREADS must be a positive integer, got '{v}'")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Runtime(e.to_string()))
}
