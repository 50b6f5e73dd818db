use std::io::{Read, Write};

use super::{Activation, MlpConfig, MlpParams, NnError};

const MAGIC: &str = "skinn-mlp v1";

/// Writes `params` as a text header followed by little-endian `f64`s in
/// layer order.
pub fn write_params<W: Write>(params: &MlpParams, mut w: W) -> Result<(), NnError> {
    let c = params.config();
    writeln!(w, "{MAGIC}")?;
    writeln!(w, "input_dim={}", c.input_dim)?;
    writeln!(w, "hidden_layers={}", c.hidden_layers)?;
    writeln!(w, "hidden_width={}", c.hidden_width)?;
    writeln!(w, "output_dim={}", c.output_dim)?;
    writeln!(w, "activation={}", c.activation.name())?;
    writeln!(w, "seed={}", c.seed)?;
    writeln!(w, "count={}", params.len())?;
    writeln!(w, "end")?;
    let mut buf = Vec::with_capacity(8 * params.len());
    for v in params.flat() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub(crate) fn read_line<R: Read>(r: &mut R) -> Result<String, NnError> {
    let mut out = Vec::new();
    let mut b = [0u8; 1];
    loop {
        if r.read(&mut b)? == 0 {
            return Err(NnError::Format("unexpected end of header".into()));
        }
        if b[0] == b'\n' {
            break;
        }
        out.push(b[0]);
        if out.len() > 256 {
            return Err(NnError::Format("header line too long".into()));
        }
    }
    String::from_utf8(out).map_err(|_| NnError::Format("header is not UTF-8".into()))
}

/// Inverse of [`write_params`]. Reads exactly the bytes it wrote.
pub fn read_params<R: Read>(mut r: R) -> Result<MlpParams, NnError> {
    let magic = read_line(&mut r)?;
    if magic != MAGIC {
        return Err(NnError::Format(format!("bad magic {magic:?}")));
    }
    let mut config = MlpConfig::default();
    let mut count = None;
    loop {
        let line = read_line(&mut r)?;
        if line == "end" {
            break;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| NnError::Format(format!("malformed header line {line:?}")))?;
        let num = || v.parse::<u64>().map_err(|_| NnError::Format(format!("bad value for {k}: {v:?}")));
        match k {
            "input_dim" => config.input_dim = num()? as usize,
            "hidden_layers" => config.hidden_layers = num()? as usize,
            "hidden_width" => config.hidden_width = num()? as usize,
            "output_dim" => config.output_dim = num()? as usize,
            "seed" => config.seed = num()?,
            "count" => count = Some(num()? as usize),
            "activation" => {
                config.activation =
                    Activation::parse(v).ok_or_else(|| NnError::Format(format!("unknown activation {v:?}")))?
            }
            _ => return Err(NnError::Format(format!("unknown header key {k:?}"))),
        }
    }
    let count = count.ok_or_else(|| NnError::Format("missing count".into()))?;
    if count != config.param_count() {
        return Err(NnError::Dimension {
            expected: config.param_count(),
            got: count,
        });
    }
    let mut bytes = vec![0u8; 8 * count];
    r.read_exact(&mut bytes)?;
    let flat = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    MlpParams::from_flat(&config, flat)
}
