use std::path::{Path, PathBuf};

use skinn::config::ConfigError;
use skinn::eval::EvalError;
use skinn::inference::InferenceError;
use skinn::panel::PanelError;
use skinn::skr::SkrError;
use skinn::surrogate::SurrogateError;
use skinn::synth::SynthError;
use skinn::trainer::TrainError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("writing report: {0}")]
    Report(String),
    #[error("{path}: {source}")]
    Input { path: PathBuf, source: Box<CliError> },
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Panel(#[from] PanelError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Inference(#[from] InferenceError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Surrogate(#[from] SurrogateError),
    #[error(transparent)]
    Skr(#[from] SkrError),
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Io { .. } => "io",
            CliError::Report(_) => "io",
            CliError::Input { source, .. } => source.kind(),
            CliError::Config(_) => "config",
            CliError::Panel(_) => "panel",
            CliError::Train(_) => "train",
            CliError::Eval(_) => "eval",
            CliError::Inference(_) => "inference",
            CliError::Synth(_) => "simulate",
            CliError::Surrogate(_) => "surrogate",
            CliError::Skr(_) => "representation",
        }
    }

    /// Attaches the path of the file being read.
    pub fn at(self, path: &Path) -> CliError {
        match self {
            e @ (CliError::Io { .. } | CliError::Input { .. }) => e,
            e => CliError::Input {
                path: path.to_path_buf(),
                source: Box::new(e),
            },
        }
    }
}

pub fn io_at(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}
