//! JSON model files.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::boosting::BoostedModel;
use crate::data::Preprocessor;
use crate::error::{Error, Result};

pub const FORMAT: &str = "rfrboost-model";
pub const VERSION: u32 = 1;

/// A trained model and the preprocessing fitted alongside it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub format: String,
    pub version: u32,
    pub preprocessor: Option<Preprocessor>,
    pub model: BoostedModel,
}

impl ModelFile {
    pub fn new(model: BoostedModel, preprocessor: Option<Preprocessor>) -> Self {
        Self {
            format: FORMAT.to_string(),
            version: VERSION,
            preprocessor,
            model,
        }
    }

    /// Floats are written in shortest round-trip form, so the output is
    /// byte-stable and reloads exactly.
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
        if file.format != FORMAT {
            return Err(Error::Format(format!("expected format {FORMAT:?}, found {:?}", file.format)));
        }
        if file.version != VERSION {
            return Err(Error::Format(format!("unsupported version {}", file.version)));
        }
        Ok(file)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
