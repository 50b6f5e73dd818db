//! `skinn`: simulate panels, train SKINNs, evaluate, hedge, infer and allocate.
//!
//! Every command reads an optional `key = value` config (unknown keys are
//! errors) and writes its reports under the output directory. Failures print
//! one JSON line `{"error": kind, "message": text}` to stderr and exit with
//! status 1.

mod analyze;
mod error;
mod evaluate;
mod files;
mod settings;
mod simulate;
mod train;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use error::CliError;
use simulate::SimKind;

#[derive(Parser)]
#[command(name = "skinn", version, about = "Structured-knowledge-informed neural networks for option pricing")]
struct Cli {
    /// Worker threads; all cores when omitted.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Key-value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Root seed, overriding the config's `seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (default: `out_dir` key, then $SKINN_OUT_DIR, then `.`).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic dataset.
    Simulate {
        #[arg(value_enum)]
        kind: SimKind,
        #[command(flatten)]
        common: Common,
    },
    /// Fit a SKINN to a panel, or a surrogate/autoencoder to simulated data (`kind` key).
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        panel: Option<PathBuf>,
        /// Simulated dataset for surrogate and autoencoder training.
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Pricing and hedging reports with pairwise tests.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        panel: PathBuf,
        /// Directory of rolling runs, one sub-directory per model.
        #[arg(long, conflicts_with = "model")]
        models: Option<PathBuf>,
        /// Model file evaluated on the whole panel; repeatable.
        #[arg(long)]
        model: Vec<PathBuf>,
    },
    /// Next-day Delta-hedging error of a model.
    Hedge {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        panel: PathBuf,
        #[arg(long)]
        model: PathBuf,
        /// Also hedge with Black-Scholes deltas at this volatility.
        #[arg(long)]
        bsm_sigma: Option<f64>,
    },
    /// Sandwich confidence intervals for the latent parameters.
    Infer {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        panel: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
    },
    /// Decile backtest and optional mean-variance weights from predicted returns.
    Alloc {
        #[command(flatten)]
        common: Common,
        /// CSV with columns date,asset,predicted,realized.
        #[arg(long)]
        returns: PathBuf,
    },
}

fn prepare(common: &Common) -> Result<(skinn::config::KvConfig, PathBuf), CliError> {
    let mut kv = files::read_config(common.config.as_deref())?;
    let out = settings::out_dir(common.out.as_deref(), &mut kv)?;
    Ok((kv, out))
}

fn no_seed(common: &Common, cmd: &str) -> Result<(), CliError> {
    match common.seed {
        Some(_) => Err(CliError::Usage(format!("{cmd} does not use --seed"))),
        None => Ok(()),
    }
}

fn run(cli: Cli) -> Result<Vec<PathBuf>, CliError> {
    if let Some(n) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    match cli.command {
        Command::Simulate { kind, common } => {
            let (kv, out) = prepare(&common)?;
            simulate::run(kind, kv, common.seed, &out)
        }
        Command::Train { common, panel, data } => {
            let (kv, out) = prepare(&common)?;
            train::run(
                kv,
                train::TrainArgs {
                    seed: common.seed,
                    panel: panel.as_deref(),
                    data: data.as_deref(),
                    out: &out,
                },
            )
        }
        Command::Evaluate {
            common,
            panel,
            models,
            model,
        } => {
            no_seed(&common, "evaluate")?;
            let (kv, out) = prepare(&common)?;
            kv.finish()?;
            match (models, model.is_empty()) {
                (Some(dir), _) => evaluate::run_rolling(&dir, &panel, &out),
                (None, false) => evaluate::run_static(&model, &panel, &out),
                (None, true) => Err(CliError::Usage("evaluate needs --models DIR or at least one --model FILE".into())),
            }
        }
        Command::Hedge {
            common,
            panel,
            model,
            bsm_sigma,
        } => {
            no_seed(&common, "hedge")?;
            let (kv, out) = prepare(&common)?;
            kv.finish()?;
            evaluate::run_hedge(&model, &panel, bsm_sigma, &out)
        }
        Command::Infer {
            common,
            panel,
            model,
            alpha,
        } => {
            no_seed(&common, "infer")?;
            let (kv, out) = prepare(&common)?;
            analyze::run_infer(kv, &model, &panel, alpha, &out)
        }
        Command::Alloc { common, returns } => {
            no_seed(&common, "alloc")?;
            let (kv, out) = prepare(&common)?;
            analyze::run_alloc(kv, &returns, &out)
        }
    }
}

fn report(paths: &[PathBuf]) {
    for p in paths {
        println!("wrote {}", Path::new(p).display());
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(paths) => {
            report(&paths);
            ExitCode::SUCCESS
        }
        Err(e) => {
            let msg = serde_json::json!({ "error": e.kind(), "message": e.to_string() });
            eprintln!("{msg}");
            ExitCode::FAILURE
        }
    }
}
