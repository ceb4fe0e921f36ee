//! Model files: a JSON bundle holding the schema, the fitted normalizer and
//! either a plain model or a Phase II model with its config.
//!
//! Floats are written with shortest round-trip formatting, so a reloaded
//! model predicts exactly what the in-memory one did.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assl::{AsslConfig, AsslError, AsslModel};
use crate::data::{DataError, Dataset, DatasetSchema, Normalizer};
use crate::nn::Matrix;
use crate::prm::{PlainModel, PrmError};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum PersistError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error("unsupported model format version {found} (expected {FORMAT_VERSION})")]
    Version { found: u32 },
    #[error("schema fingerprint mismatch: model {model}, data {data}")]
    SchemaMismatch { model: String, data: String },
    #[error("model is inconsistent: {0}")]
    Inconsistent(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Prm(#[from] PrmError),
    #[error(transparent)]
    Assl(#[from] AsslError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BundledModel {
    Plain { model: PlainModel },
    Assl { model: AsslModel, config: AsslConfig },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelBundle {
    pub format_version: u32,
    pub schema_fingerprint: String,
    pub schema: DatasetSchema,
    pub normalizer: Normalizer,
    pub model: BundledModel,
}

impl ModelBundle {
    pub fn new(schema: DatasetSchema, normalizer: Normalizer, model: BundledModel) -> Result<Self, PersistError> {
        let b = Self {
            format_version: FORMAT_VERSION,
            schema_fingerprint: schema.fingerprint(),
            schema,
            normalizer,
            model,
        };
        b.check()?;
        Ok(b)
    }

    fn check(&self) -> Result<(), PersistError> {
        if self.format_version != FORMAT_VERSION {
            return Err(PersistError::Version {
                found: self.format_version,
            });
        }
        let fp = self.schema.fingerprint();
        if fp != self.schema_fingerprint {
            return Err(PersistError::SchemaMismatch {
                model: self.schema_fingerprint.clone(),
                data: fp,
            });
        }
        let (f, m) = (self.schema.num_features(), self.schema.num_classes());
        let (mf, mm) = match &self.model {
            BundledModel::Plain { model } => (model.num_features(), model.num_classes()),
            BundledModel::Assl { model, .. } => (model.input_dim(), model.num_classes()),
        };
        if (mf, mm) != (f, m) || self.normalizer.mean.len() != f || self.normalizer.std.len() != f {
            return Err(PersistError::Inconsistent(format!(
                "schema has {f} features and {m} classes, model {mf} and {mm}, normalizer {}",
                self.normalizer.mean.len()
            )));
        }
        Ok(())
    }

    /// Class probabilities for raw (un-normalized) rows of `ds`.
    pub fn predict_proba(&self, ds: &Dataset) -> Result<Matrix, PersistError> {
        let fp = ds.schema().fingerprint();
        if fp != self.schema_fingerprint {
            return Err(PersistError::SchemaMismatch {
                model: self.schema_fingerprint.clone(),
                data: fp,
            });
        }
        let z = self.normalizer.apply(ds)?;
        Ok(match &self.model {
            BundledModel::Plain { model } => model.predict_proba_batch(z.rows())?,
            BundledModel::Assl { model, config } => model.predict_proba(z.rows(), config.inference_head)?,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("bundle serializes")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), PersistError> {
        let path = path.as_ref();
        fs::write(path, self.to_json()).map_err(|source| PersistError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, PersistError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| PersistError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let b: Self = serde_json::from_str(&text).map_err(|source| PersistError::Json {
            path: path.to_path_buf(),
            source,
        })?;
        b.check()?;
        Ok(b)
    }
}
