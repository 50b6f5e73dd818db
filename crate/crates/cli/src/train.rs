use std::path::{Path, PathBuf};

use rayon::prelude::*;
use skinn::config::KvConfig;
use skinn::eval::build_schedule;
use skinn::nn::{Activation, MlpConfig};
use skinn::panel::OptionPanel;
use skinn::surrogate::{
    train_autoencoder, train_surrogate, write_autoencoder, write_surrogate, AeConfig, SurfaceGrid, SurrogateDataset,
    SurrogateTrainConfig,
};
use skinn::trainer::{train_skinn, write_model, write_trace_csv, FittedModel, TrainConfig};

use crate::error::{io_at, CliError};
use crate::files::{open, read_panel, write_file};
use crate::settings::ReprOptions;
use crate::simulate::{bounds_for, read_surfaces};

pub struct TrainArgs<'a> {
    pub seed: Option<u64>,
    pub panel: Option<&'a Path>,
    pub data: Option<&'a Path>,
    pub out: &'a Path,
}

fn require<'a>(p: Option<&'a Path>, flag: &str, kind: &str) -> Result<&'a Path, CliError> {
    p.ok_or_else(|| CliError::Usage(format!("training a {kind} needs --{flag}")))
}

fn activation(kv: &mut KvConfig, default: Activation) -> Result<Activation, CliError> {
    match kv.take::<String>("activation")? {
        None => Ok(default),
        Some(a) => Activation::parse(&a).ok_or_else(|| CliError::Usage(format!("unknown activation {a:?}"))),
    }
}

fn seed_of(kv: &mut KvConfig, flag: Option<u64>) -> Result<u64, CliError> {
    let from_config = kv.take_or("seed", 0u64)?;
    Ok(flag.unwrap_or(from_config))
}

/// Display name of a configured model.
pub fn model_name(cfg: &TrainConfig) -> String {
    match (cfg.lambda_sk > 0.0, cfg.boundary) {
        (false, false) => "NN".into(),
        (false, true) => "NN+Bnd".into(),
        (true, _) => format!("SKINN+{}", cfg.repr.name()),
    }
}

pub fn save_model(m: &FittedModel, model_path: &Path, trace_path: &Path) -> Result<Vec<PathBuf>, CliError> {
    Ok(vec![
        write_file(model_path, |w| Ok(write_model(m, w)?))?,
        write_file(trace_path, |w| write_trace_csv(&m.trace, w).map_err(|e| CliError::Report(e.to_string())))?,
    ])
}

pub fn run(mut kv: KvConfig, args: TrainArgs<'_>) -> Result<Vec<PathBuf>, CliError> {
    let kind = kv.take_or("kind", "skinn".to_string())?;
    match kind.as_str() {
        "skinn" => train_skinn_cmd(kv, args),
        "surrogate" => train_surrogate_cmd(kv, args),
        "autoencoder" => train_autoencoder_cmd(kv, args),
        other => Err(CliError::Usage(format!("unknown training kind {other:?}"))),
    }
}

fn train_skinn_cmd(mut kv: KvConfig, args: TrainArgs<'_>) -> Result<Vec<PathBuf>, CliError> {
    let mut cfg = TrainConfig::from_kv(&mut kv)?;
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    let opts = ReprOptions::from_kv(&mut kv)?;
    let rolling = kv.take_or("rolling", false)?;
    let name = kv.take_or("name", model_name(&cfg))?;
    kv.finish()?;
    let repr = opts.build(cfg.repr)?;
    let panel_path = require(args.panel, "panel", "SKINN")?;
    let panel = read_panel(panel_path)?;
    if !rolling {
        let m = train_skinn(&cfg, &repr, &panel)?;
        println!("{name}: l_data={} l_sk={} phi={:?}", m.l_data, m.l_sk, &m.phi[..m.phi.len().min(9)]);
        return save_model(&m, &args.out.join("model.skinn"), &args.out.join("trace.csv"));
    }
    let periods = build_schedule(&panel.dates())?;
    let dir = args.out.join(&name);
    let written = periods
        .par_iter()
        .map(|p| {
            let train: OptionPanel = p.train.select(&panel);
            let m = train_skinn(&cfg, &repr, &train)?;
            save_model(
                &m,
                &dir.join(format!("period_{:04}.skinn", p.index)),
                &dir.join(format!("trace_{:04}.csv", p.index)),
            )
        })
        .collect::<Result<Vec<_>, _>>()?;
    println!("{name}: trained {} rolling periods", periods.len());
    Ok(written.into_iter().flatten().collect())
}

fn train_surrogate_cmd(mut kv: KvConfig, args: TrainArgs<'_>) -> Result<Vec<PathBuf>, CliError> {
    let model = match kv.take_or("model", "hsv".to_string())?.to_ascii_lowercase().as_str() {
        "hsv" | "heston" => skinn::surrogate::SdeModel::Hsv,
        "nasv" => skinn::surrogate::SdeModel::Nasv,
        other => return Err(CliError::Usage(format!("unknown surrogate model {other:?}"))),
    };
    let bounds = bounds_for(model);
    let seed = seed_of(&mut kv, args.seed)?;
    let mlp = MlpConfig::new(bounds.len(), kv.take_or("hidden_layers", 4)?, kv.take_or("hidden_width", 64)?)
        .with_activation(activation(&mut kv, Activation::Silu)?)
        .with_seed(seed);
    let mut cfg = SurrogateTrainConfig::new(mlp);
    cfg.epochs = kv.take_or("epochs", cfg.epochs)?;
    cfg.lr = kv.take_or("lr", cfg.lr)?;
    cfg.batch_size = kv.take_or("batch_size", cfg.batch_size)?;
    cfg.lr_final_frac = kv.take_or("lr_final_frac", cfg.lr_final_frac)?;
    kv.finish()?;
    let path = require(args.data, "data", "surrogate")?;
    let data = SurrogateDataset::read_csv(open(path)?, &bounds).map_err(|e| CliError::from(e).at(path))?;
    let net = train_surrogate(&data, &cfg)?;
    Ok(vec![write_file(&args.out.join("surrogate.bin"), |w| Ok(write_surrogate(&net, w)?))?])
}

fn train_autoencoder_cmd(mut kv: KvConfig, args: TrainArgs<'_>) -> Result<Vec<PathBuf>, CliError> {
    let d = AeConfig::default();
    let cfg = AeConfig {
        latent_dim: kv.take_or("latent_dim", d.latent_dim)?,
        hidden_layers: kv.take_or("hidden_layers", d.hidden_layers)?,
        hidden_width: kv.take_or("hidden_width", d.hidden_width)?,
        activation: activation(&mut kv, d.activation)?,
        epochs: kv.take_or("epochs", d.epochs)?,
        lr: kv.take_or("lr", d.lr)?,
        batch_size: kv.take_or("batch_size", d.batch_size)?,
        lr_final_frac: kv.take_or("lr_final_frac", d.lr_final_frac)?,
        seed: seed_of(&mut kv, args.seed)?,
    };
    kv.finish()?;
    let path = require(args.data, "data", "autoencoder")?;
    let grid = SurfaceGrid::default();
    let text = std::fs::read_to_string(path).map_err(io_at(path))?;
    let surfaces = read_surfaces(&text, &grid).map_err(|e| e.at(path))?;
    let ae = train_autoencoder(&surfaces, &grid, &cfg)?;
    println!("autoencoder: reconstruction rmse={}", ae.final_rmse);
    Ok(vec![write_file(&args.out.join("autoencoder.bin"), |w| Ok(write_autoencoder(&ae, w)?))?])
}
