//! Run configuration: one JSON document describing everything a training run
//! needs. The canonical form (compact JSON, declaration-order keys) defines
//! the run's hash, so two configs agree iff their hashes do.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::DatasetSpec;
use crate::error::{Error, Result};
use crate::model::{sha256_hex, InitScheme, ModelSpec};
use crate::optim::SwitchSchedule;

pub const DEFAULT_BATCH_SIZE: usize = 128;

fn default_batch_size() -> usize {
    DEFAULT_BATCH_SIZE
}

fn default_eval_cadence() -> usize {
    1
}

/// Full experiment description: model, data, init, optimizer schedule, and
/// seeds. All randomness in a run flows from `master_seed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub model: ModelSpec,
    pub dataset: DatasetSpec,
    pub init: InitScheme,
    pub schedule: SwitchSchedule,
    pub total_epochs: usize,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    pub master_seed: u64,
    /// Epoch interval for test-set evaluation; 0 disables.
    #[serde(default = "default_eval_cadence")]
    pub eval_cadence: usize,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.init.validate()?;
        self.schedule.validate(self.total_epochs)?;
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be positive".into()));
        }
        let data_dim = self.dataset.input_dim()?;
        if data_dim != self.model.input_dim() {
            return Err(Error::Config(format!(
                "dataset provides {data_dim}-wide inputs but the model expects {}",
                self.model.input_dim()
            )));
        }
        Ok(())
    }

    /// Compact serialization with a stable key order.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("run config serializes")
    }

    /// Digest of the canonical form.
    pub fn config_hash(&self) -> String {
        sha256_hex(self.canonical_json().as_bytes())
    }

    pub fn from_json(text: &str) -> Result<RunConfig> {
        let cfg: RunConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("parse failure: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let pretty = serde_json::to_string_pretty(self).expect("run config serializes");
        fs::write(path, pretty + "\n")?;
        Ok(())
    }
}
