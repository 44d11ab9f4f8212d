//! The session file format.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use powerforge_core::{ConfoundSpec, DependentVariableMeta, HistoryTree, IndependentVariable, MeanTree};

use crate::canonical;
use crate::error::{AppError, Result};
use crate::session::{DesignControls, Session, Settings};

pub const FORMAT_VERSION: &str = "1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionDocument {
    pub version: String,
    pub dv_meta: DependentVariableMeta,
    pub ivs: Vec<IndependentVariable>,
    pub design: DesignControls,
    pub mean_tree: MeanTree,
    pub confounds: ConfoundSpec,
    pub history: HistoryTree,
    pub settings: Settings,
    /// Top-level fields this version does not know, kept verbatim.
    #[serde(flatten)]
    pub extra: BTreeMap<String, Value>,
}

impl SessionDocument {
    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| AppError::Document(e.to_string()))
    }

    pub fn to_canonical(&self) -> Result<String> {
        Ok(canonical::to_string(self)?)
    }
}

impl Session {
    pub fn from_json(text: &str) -> Result<Self> {
        Session::from_document(SessionDocument::parse(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        self.to_document().to_canonical()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|source| AppError::Input {
            path: path.display().to_string(),
            source,
        })?;
        Session::from_json(&text)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }
}
