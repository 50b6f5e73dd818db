use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use crate::common::{BoxError, Outcome};

const PANEL_CFG: &str = "days = 8\ncontracts = 40\nnoise = 0.01\nsigma = 0.25\n";
const TRAIN_CFG: &str = "repr = bsm\nlambda = 1\nepochs = 60\nn_colloc = 128\nhidden_width = 16\n";
const ALLOC_CFG: &str = "meanvar = true\neta = 5\nepochs = 100\n";

fn skinn(dir: &Path, jobs: usize, args: &[&str]) -> Result<(), BoxError> {
    let out = Command::new(env!("CARGO_BIN_EXE_skinn"))
        .current_dir(dir)
        .arg("--jobs")
        .arg(jobs.to_string())
        .args(args)
        .output()?;
    if !out.status.success() {
        return Err(format!("skinn {}: {}", args.join(" "), String::from_utf8_lossy(&out.stderr)).into());
    }
    Ok(())
}

fn returns_csv() -> String {
    let mut s = String::from("date,asset,predicted,realized\n");
    for d in 0..3 {
        for a in 0..12 {
            let x = (d * 12 + a) as f64;
            s.push_str(&format!("2021-02-0{},x{a:02},{},{}\n", d + 1, (0.37 * x).sin() / 100.0, (0.91 * x).cos() / 100.0));
        }
    }
    s
}

/// Runs every command once into `dir`; returns the report files sorted by path.
fn run_pipeline(dir: &Path, jobs: usize) -> Result<Vec<(PathBuf, Vec<u8>)>, BoxError> {
    fs::write(dir.join("panel.cfg"), PANEL_CFG)?;
    fs::write(dir.join("train.cfg"), TRAIN_CFG)?;
    fs::write(dir.join("alloc.cfg"), ALLOC_CFG)?;
    fs::write(dir.join("returns.csv"), returns_csv())?;
    let out = |s: &str| -> Result<String, BoxError> {
        let p = dir.join(s);
        fs::create_dir_all(&p)?;
        Ok(p.to_string_lossy().into_owned())
    };
    let (sim, train, eval, hedge, infer, alloc) = (out("sim")?, out("train")?, out("eval")?, out("hedge")?, out("infer")?, out("alloc")?);
    skinn(dir, jobs, &["simulate", "bsm-panel", "--config", "panel.cfg", "--seed", "42", "--out", &sim])?;
    let panel = format!("{sim}/panel.csv");
    let model = format!("{train}/model.skinn");
    skinn(dir, jobs, &["train", "--config", "train.cfg", "--seed", "42", "--panel", &panel, "--out", &train])?;
    skinn(dir, jobs, &["evaluate", "--panel", &panel, "--model", &model, "--out", &eval])?;
    skinn(dir, jobs, &["hedge", "--panel", &panel, "--model", &model, "--bsm-sigma", "0.25", "--out", &hedge])?;
    skinn(dir, jobs, &["infer", "--panel", &panel, "--model", &model, "--out", &infer])?;
    skinn(dir, jobs, &["alloc", "--config", "alloc.cfg", "--returns", "returns.csv", "--out", &alloc])?;
    let mut files = Vec::new();
    for sub in ["sim", "train", "eval", "hedge", "infer", "alloc"] {
        for entry in fs::read_dir(dir.join(sub))? {
            let p = entry?.path();
            files.push((p.strip_prefix(dir)?.to_path_buf(), fs::read(&p)?));
        }
    }
    files.sort();
    Ok(files)
}

pub fn determinism() -> Result<Outcome, BoxError> {
    let (a, b) = (tempfile::tempdir()?, tempfile::tempdir()?);
    let first = run_pipeline(a.path(), 1)?;
    let second = run_pipeline(b.path(), 4)?;
    let names: Vec<String> = first.iter().map(|(p, _)| p.display().to_string()).collect();
    let differing: Vec<String> = first
        .iter()
        .zip(&second)
        .filter(|(x, y)| x != y)
        .map(|(x, _)| x.0.display().to_string())
        .collect();
    let pass = first.len() == second.len() && differing.is_empty() && first.len() >= 8;
    Ok(Outcome::new(
        pass,
        if differing.is_empty() {
            format!("{} report files identical across runs: {}", first.len(), names.join(" "))
        } else {
            format!("differ: {}", differing.join(" "))
        },
    ))
}
