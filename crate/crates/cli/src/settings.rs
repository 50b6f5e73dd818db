use std::path::{Path, PathBuf};
use std::sync::Arc;

use skinn::config::KvConfig;
use skinn::skr::{CosConfig, ReprId, Representation};
use skinn::surrogate::{read_autoencoder, read_surrogate, AeRepr, DsnnRepr};

use crate::error::CliError;
use crate::files::open;

pub const OUT_ENV: &str = "SKINN_OUT_DIR";

/// Output directory: the flag, then the `out_dir` key, then the environment,
/// then the working directory.
pub fn out_dir(flag: Option<&Path>, kv: &mut KvConfig) -> Result<PathBuf, CliError> {
    let from_config: Option<String> = kv.take("out_dir")?;
    Ok(flag
        .map(Path::to_path_buf)
        .or_else(|| from_config.map(PathBuf::from))
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(".")))
}

/// Keys that select how a representation is built.
#[derive(Debug, Clone, Default)]
pub struct ReprOptions {
    pub surrogate: Option<PathBuf>,
    pub cos: CosConfig,
}

impl ReprOptions {
    pub fn from_kv(kv: &mut KvConfig) -> Result<ReprOptions, CliError> {
        let mut cos = CosConfig::default();
        cos.n = kv.take_or("cos_n", cos.n)?;
        cos.l = kv.take_or("cos_l", cos.l)?;
        cos.validate()?;
        Ok(ReprOptions {
            surrogate: kv.take::<String>("surrogate")?.map(PathBuf::from),
            cos,
        })
    }

    pub fn build(&self, id: ReprId) -> Result<Representation, CliError> {
        let need = || {
            self.surrogate
                .as_deref()
                .ok_or_else(|| CliError::Usage(format!("{id} needs a `surrogate` key naming the trained network file")))
        };
        Ok(match id {
            ReprId::Hsv => Representation::Hsv(self.cos),
            ReprId::Hsvj => Representation::Hsvj(self.cos),
            ReprId::DsnnHsv | ReprId::DsnnNasv => {
                let path = need()?;
                let net = read_surrogate(open(path)?).map_err(|e| CliError::from(e).at(path))?;
                Representation::Dsnn(Arc::new(DsnnRepr::new(id, net)?))
            }
            ReprId::AeBsm => {
                let path = need()?;
                let ae = read_autoencoder(open(path)?).map_err(|e| CliError::from(e).at(path))?;
                Representation::Autoencoder(Arc::new(AeRepr::new(ae)))
            }
            other => Representation::from_id(other)?,
        })
    }
}
