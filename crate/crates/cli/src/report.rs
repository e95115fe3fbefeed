//! Versioned JSON envelope wrapped around every report.

use std::path::Path;

use ggn::estimation::{FitResult, ModelTag};
use ggn::gof::GofReport;
use ggn::StreamSpec;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::read_bytes;
use crate::error::{CliError, CliResult};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Envelope<T> {
    pub schema_version: u32,
    pub tool_version: String,
    /// Arguments after the program name.
    pub command: Vec<String>,
    pub stream: Option<StreamSpec>,
    pub rng: Option<String>,
    /// SHA-256 over the inputs, see [`digest`].
    pub inputs_digest: String,
    pub payload: T,
}

impl<T: Serialize> Envelope<T> {
    pub fn new(
        command: &[String],
        stream: Option<StreamSpec>,
        inputs_digest: String,
        payload: T,
    ) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_vec(),
            stream,
            rng: stream.map(|_| ggn::sampling::RNG_NAME.to_string()),
            inputs_digest,
            payload,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

/// Hex SHA-256 of the named inputs, each fed as its length, name and bytes.
pub fn digest(inputs: &[(&str, &[u8])]) -> String {
    let mut h = Sha256::new();
    for (name, bytes) in inputs {
        h.update((name.len() as u64).to_le_bytes());
        h.update(name.as_bytes());
        h.update((bytes.len() as u64).to_le_bytes());
        h.update(bytes);
    }
    hex::encode(h.finalize())
}

/// One row of the model comparison table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Comparison {
    pub model_tag: ModelTag,
    pub gof: GofReport,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitPayload {
    pub fits: Vec<FitResult>,
    /// Present with `--gof`, ordered by increasing AIC.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub comparison: Option<Vec<Comparison>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GofPayload {
    /// `ECDF` for the self-comparison, else the fitted model tag.
    pub model: String,
    pub report: GofReport,
}

/// Reads a `fit` report and picks the fit for `model`, or the only fit.
pub fn load_fit(path: &Path, model: Option<ModelTag>) -> CliResult<(FitResult, Vec<u8>)> {
    let bytes = read_bytes(path)?;
    let env: Envelope<FitPayload> = serde_json::from_slice(&bytes).map_err(|e| CliError::Json {
        path: path.to_path_buf(),
        msg: e.to_string(),
    })?;
    let fits = env.payload.fits;
    let fit = match model {
        Some(tag) => fits
            .into_iter()
            .find(|f| f.model_tag == tag)
            .ok_or_else(|| {
                CliError::Domain(format!("{}: no {tag:?} fit in report", path.display()))
            })?,
        None if fits.len() == 1 => fits.into_iter().next().unwrap(),
        None => {
            return Err(CliError::Domain(format!(
                "{}: report holds {} fits; choose one with --model",
                path.display(),
                fits.len()
            )))
        }
    };
    Ok((fit, bytes))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_separates_inputs() {
        let a = digest(&[("x", b"ab"), ("y", b"c")]);
        let b = digest(&[("x", b"a"), ("y", b"bc")]);
        assert_ne!(a, b);
        assert_eq!(a, digest(&[("x", b"ab"), ("y", b"c")]));
        assert_eq!(a.len(), 64);
    }
}
