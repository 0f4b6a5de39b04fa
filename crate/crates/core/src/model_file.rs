//! On-disk model: parameters plus everything needed to score new resumes.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::NormalizationStats;
use crate::model::{AggregationMode, ModelParams, INPUT_DIM};
use crate::scalar::Scalar;
use crate::trainer::TrainConfig;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    pub embedding: usize,
    pub hidden: usize,
    pub input: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ModelFile<T> {
    pub format_version: u32,
    pub aggregation: AggregationMode,
    pub dims: Dims,
    pub params: ModelParams<T>,
    pub normalization: NormalizationStats<T>,
    pub train_config: TrainConfig,
}

impl<T: Scalar> ModelFile<T> {
    pub fn new(params: ModelParams<T>, normalization: NormalizationStats<T>, train_config: TrainConfig) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            aggregation: params.mode,
            dims: Dims {
                embedding: params.embedding_dim,
                hidden: params.hidden_dim,
                input: INPUT_DIM,
            },
            params,
            normalization,
            train_config,
        }
    }

    /// JSON text; floats are written in shortest round-trip form so a
    /// reload reproduces every parameter bit for bit.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string(self).expect("model serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: Self = serde_json::from_str(text).map_err(|e| Error::Parse {
            path: "<model>".into(),
            line: e.line(),
            message: e.to_string(),
        })?;
        if m.format_version != FORMAT_VERSION {
            return Err(Error::Validation(format!(
                "unsupported model format version {}",
                m.format_version
            )));
        }
        if m.aggregation != m.params.mode
            || m.dims.embedding != m.params.embedding_dim
            || m.dims.hidden != m.params.hidden_dim
            || m.dims.input != INPUT_DIM
        {
            return Err(Error::Validation("model header disagrees with parameters".into()));
        }
        m.params.validate()?;
        Ok(m)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Parse { line, message, .. } => Error::Parse {
                path: path.to_path_buf(),
                line,
                message,
            },
            other => other,
        })
    }
}
