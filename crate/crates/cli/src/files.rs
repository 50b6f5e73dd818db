use std::fs::{self, File};
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use skinn::config::KvConfig;
use skinn::panel::OptionPanel;
use skinn::trainer::{read_model, FittedModel};

use crate::error::{io_at, CliError};

pub fn open(path: &Path) -> Result<BufReader<File>, CliError> {
    File::open(path).map(BufReader::new).map_err(io_at(path))
}

pub fn read_config(path: Option<&Path>) -> Result<KvConfig, CliError> {
    match path {
        None => Ok(KvConfig::default()),
        Some(p) => {
            let text = fs::read_to_string(p).map_err(io_at(p))?;
            KvConfig::parse(&text).map_err(|e| CliError::from(e).at(p))
        }
    }
}

pub fn read_panel(path: &Path) -> Result<OptionPanel, CliError> {
    let (panel, log) = OptionPanel::read_csv(open(path)?).map_err(|e| CliError::from(e).at(path))?;
    eprintln!("ingest {}: {log}", path.display());
    Ok(panel)
}

pub fn read_fitted(path: &Path) -> Result<FittedModel, CliError> {
    read_model(open(path)?).map_err(|e| CliError::from(e).at(path))
}

/// Renders the whole file in memory, then writes it in one call.
pub fn write_file<F>(path: &Path, render: F) -> Result<PathBuf, CliError>
where
    F: FnOnce(&mut Vec<u8>) -> Result<(), CliError>,
{
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io_at(dir))?;
    }
    let mut buf = Vec::new();
    render(&mut buf)?;
    let mut f = File::create(path).map_err(io_at(path))?;
    f.write_all(&buf).map_err(io_at(path))?;
    Ok(path.to_path_buf())
}

/// `write!` into a buffer that cannot fail.
pub fn line(buf: &mut Vec<u8>, s: std::fmt::Arguments<'_>) {
    buf.write_fmt(s).expect("writing to memory");
    buf.push(b'\n');
}
