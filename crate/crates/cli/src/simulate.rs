use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use clap::ValueEnum;
use skinn::config::KvConfig;
use skinn::surrogate::{bsm_surfaces, build_surrogate_dataset, Bounds, DatasetOptions, SdeModel, SurfaceGrid};
use skinn::synth::{bsm_panel, heston_panel, HestonWorld, PanelSpec};

use crate::error::CliError;
use crate::files::{line, write_file};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SimKind {
    BsmPanel,
    HestonPanel,
    Surfaces,
    SurrogateData,
}

fn panel_spec(kv: &mut KvConfig, seed: u64) -> Result<PanelSpec, CliError> {
    let d = PanelSpec::default();
    let start = match kv.take::<String>("start")? {
        None => d.start,
        Some(s) => NaiveDate::parse_from_str(&s, "%Y-%m-%d").map_err(|_| CliError::Usage(format!("start {s:?} is not YYYY-MM-DD")))?,
    };
    Ok(PanelSpec {
        start,
        days: kv.take_or("days", d.days)?,
        contracts: kv.take_or("contracts", d.contracts)?,
        s0: kv.take_or("s0", d.s0)?,
        r: kv.take_or("r", d.r)?,
        mu: kv.take_or("mu", d.mu)?,
        m_range: kv.take_range("m_range")?.unwrap_or(d.m_range),
        tau_range: kv.take_range("tau_range")?.unwrap_or(d.tau_range),
        noise: kv.take_or("noise", d.noise)?,
        seed,
    })
}

fn sde_model(kv: &mut KvConfig) -> Result<SdeModel, CliError> {
    match kv.take_or("model", "hsv".to_string())?.to_ascii_lowercase().as_str() {
        "hsv" | "heston" => Ok(SdeModel::Hsv),
        "nasv" => Ok(SdeModel::Nasv),
        other => Err(CliError::Usage(format!("unknown simulation model {other:?}"))),
    }
}

pub fn bounds_for(model: SdeModel) -> Bounds {
    match model {
        SdeModel::Hsv => Bounds::heston(),
        SdeModel::Nasv => Bounds::nasv(),
    }
}

pub fn run(kind: SimKind, mut kv: KvConfig, seed: Option<u64>, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    let seed = match seed {
        Some(s) => {
            kv.take::<u64>("seed")?;
            s
        }
        None => kv.take_or("seed", 0u64)?,
    };
    match kind {
        SimKind::BsmPanel => {
            let sigma = kv.take_or("sigma", 0.2)?;
            let spec = panel_spec(&mut kv, seed)?;
            kv.finish()?;
            let panel = bsm_panel(&spec, sigma)?;
            Ok(vec![write_file(&out.join("panel.csv"), |w| Ok(panel.write_csv(w)?))?])
        }
        SimKind::HestonPanel => {
            let world = HestonWorld {
                v_theta: kv.take_or("v_theta", 0.04)?,
                v0: kv.take_or("v0", 0.04)?,
                sigma_v: kv.take_or("sigma_v", 0.5)?,
                rho: kv.take_or("rho", -0.7)?,
                kappa: kv.take_or("kappa", 2.0)?,
            };
            let paths = kv.take_or("paths", 10_000usize)?;
            let spec = panel_spec(&mut kv, seed)?;
            kv.finish()?;
            let panel = heston_panel(&spec, &world, paths)?;
            Ok(vec![write_file(&out.join("panel.csv"), |w| Ok(panel.write_csv(w)?))?])
        }
        SimKind::Surfaces => {
            let (lo, hi) = kv.take_range("sigma_range")?.unwrap_or((0.1, 0.6));
            let count = kv.take_or("count", 50usize)?;
            let r = kv.take_or("r", 0.0)?;
            kv.finish()?;
            if count < 2 || !(0.0 < lo && lo < hi) {
                return Err(CliError::Usage(format!("need count >= 2 and 0 < lo < hi, got {count} surfaces on ({lo}, {hi})")));
            }
            let sigmas: Vec<f64> = (0..count).map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64).collect();
            let grid = SurfaceGrid::default();
            let surfaces = bsm_surfaces(&sigmas, r, &grid)?;
            Ok(vec![write_file(&out.join("surfaces.csv"), |w| {
                write_surfaces(w, &grid, &sigmas, &surfaces);
                Ok(())
            })?])
        }
        SimKind::SurrogateData => {
            let model = sde_model(&mut kv)?;
            let n = kv.take_or("n", 2000usize)?;
            let d = DatasetOptions::default();
            let opts = DatasetOptions {
                paths: kv.take_or("paths", d.paths)?,
                steps_per_year: kv.take_or("steps_per_year", d.steps_per_year)?,
                seed,
            };
            kv.finish()?;
            let data = build_surrogate_dataset(model, n, &bounds_for(model), &opts)?;
            Ok(vec![write_file(&out.join("surrogate_data.csv"), |w| Ok(data.write_csv(w)?))?])
        }
    }
}

/// One row per surface: its volatility, then prices τ-major on the default grid.
fn write_surfaces(w: &mut Vec<u8>, grid: &SurfaceGrid, sigmas: &[f64], surfaces: &[Vec<f64>]) {
    let mut header = vec!["sigma".to_string()];
    for t in &grid.tau {
        for m in &grid.m {
            header.push(format!("m{m:.4}_t{t:.2}"));
        }
    }
    line(w, format_args!("{}", header.join(",")));
    for (s, surface) in sigmas.iter().zip(surfaces) {
        let row: Vec<String> = std::iter::once(s.to_string()).chain(surface.iter().map(f64::to_string)).collect();
        line(w, format_args!("{}", row.join(",")));
    }
}

/// Reads back the surfaces written by `simulate surfaces`.
pub fn read_surfaces(text: &str, grid: &SurfaceGrid) -> Result<Vec<Vec<f64>>, CliError> {
    let mut out = Vec::new();
    for (i, row) in text.lines().enumerate().skip(1) {
        if row.trim().is_empty() {
            continue;
        }
        let vals = row
            .split(',')
            .skip(1)
            .map(|v| v.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|_| CliError::Usage(format!("surfaces line {}: not a number", i + 1)))?;
        if vals.len() != grid.len() {
            return Err(CliError::Usage(format!("surfaces line {}: {} prices, grid has {}", i + 1, vals.len(), grid.len())));
        }
        out.push(vals);
    }
    Ok(out)
}
