//! Trained graphs on disk: one self-describing JSON document.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiment::ExperimentConfig;
use crate::graph::RelationGraph;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format_version: u32,
    /// Recipe that produced the graph, when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<ExperimentConfig>,
    pub graph: RelationGraph,
}

#[derive(Deserialize)]
struct VersionProbe {
    format_version: Option<u32>,
}

impl ModelFile {
    pub fn new(graph: RelationGraph, config: Option<ExperimentConfig>) -> Self {
        ModelFile { format_version: FORMAT_VERSION, config, graph }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    /// Parse a model, checking the format version before anything else.
    pub fn from_json(text: &str) -> Result<Self> {
        let probe: VersionProbe = serde_json::from_str(text)?;
        match probe.format_version {
            Some(FORMAT_VERSION) => {}
            Some(v) => {
                return Err(Error::Format(format!(
                    "model format version {v} is not supported (expected {FORMAT_VERSION})"
                )))
            }
            None => return Err(Error::Format("model file has no format_version".into())),
        }
        let model: ModelFile = serde_json::from_str(text)?;
        model.graph.validate()?;
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        ModelFile::from_json(&std::fs::read_to_string(path)?)
    }
}
