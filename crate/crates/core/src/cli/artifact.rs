use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::SolveConfig;
use crate::error::{Error, Result};
use crate::ot::{ConvexPotential, TargetCloud, TransportDiagnostics};

pub const ARTIFACT_VERSION: &str = "kahler-run/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtifactStep {
    pub k: f64,
    pub regularization: f64,
    pub radius: f64,
    pub cloud: TargetCloud,
    pub dual_weights: Vec<f64>,
    pub offset: f64,
    pub diagnostics: TransportDiagnostics,
    pub sup_difference: Option<f64>,
    pub lipschitz: f64,
}

impl ArtifactStep {
    pub fn potential(&self) -> ConvexPotential {
        ConvexPotential {
            rank: self.cloud.rank,
            points: self.cloud.coords.clone(),
            dual_weights: self.dual_weights.clone(),
            offset: self.offset,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunArtifact {
    pub version: String,
    pub config: SolveConfig,
    pub steps: Vec<ArtifactStep>,
}

impl RunArtifact {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let art: RunArtifact = serde_json::from_str(&text)?;
        if art.version != ARTIFACT_VERSION {
            return Err(Error::Config(format!(
                "artifact version `{}` is not `{ARTIFACT_VERSION}`",
                art.version
            )));
        }
        art.config.validate()?;
        Ok(art)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }
}

/// Write `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}
