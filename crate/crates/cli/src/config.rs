//! JSON run configuration. Every field is optional and defaults to the
//! standard experiment: ω = 1, μ = 0.1, γ = 0.01, T = 5 with M = 10
//! intervals, 1000 starts.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use qlandscape_core::{
    GateId, ObjectiveKind, ObjectiveSpec, OptimizerConfig, StateSetKind, SurveyConfig,
    SystemParams, TimeGrid,
};

use crate::error::{CliError, Result};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub schema_version: u32,
    pub system: SystemParams,
    pub grid: GridConfig,
    pub gate: GateId,
    pub objective: ObjectiveKind,
    pub optimizer: OptimizerConfig,
    pub survey: SurveySection,
    pub output: OutputConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            system: SystemParams::default(),
            grid: GridConfig::default(),
            gate: GateId::Hadamard,
            objective: ObjectiveKind::States(StateSetKind::Set3Grk),
            optimizer: OptimizerConfig::default(),
            survey: SurveySection::default(),
            output: OutputConfig::default(),
        }
    }
}

/// Regular grid of `M` intervals on `[0, T]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    #[serde(rename = "T")]
    pub horizon: f64,
    #[serde(rename = "M")]
    pub intervals: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            horizon: 5.0,
            intervals: 10,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SurveySection {
    #[serde(rename = "L")]
    pub runs: usize,
    pub master_seed: u64,
    pub u_range: [f64; 2],
    pub n_range: [f64; 2],
    pub bins: usize,
    pub parallelism: usize,
}

impl Default for SurveySection {
    fn default() -> Self {
        let s = SurveyConfig::default();
        Self {
            runs: s.runs,
            master_seed: s.master_seed,
            u_range: s.u_range,
            n_range: s.n_range,
            bins: s.histogram_bins,
            parallelism: s.parallelism,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub directory: PathBuf,
    pub formats: Vec<Format>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            directory: PathBuf::from("out"),
            formats: vec![Format::Json, Format::Csv],
        }
    }
}

impl OutputConfig {
    pub fn wants(&self, f: Format) -> bool {
        self.formats.contains(&f)
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_owned(),
            source,
        })?;
        let cfg: Self = serde_json::from_str(&text).map_err(|source| CliError::Json {
            path: path.to_owned(),
            source,
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(CliError::Usage(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        self.system.validate()?;
        self.time_grid()?;
        self.optimizer.validate()?;
        Ok(())
    }

    pub fn time_grid(&self) -> Result<TimeGrid> {
        Ok(TimeGrid::regular(self.grid.horizon, self.grid.intervals)?)
    }

    pub fn spec(&self) -> ObjectiveSpec {
        ObjectiveSpec::new(self.gate, self.objective)
    }

    pub fn survey_config(&self) -> Result<SurveyConfig> {
        let cfg = SurveyConfig {
            params: self.system,
            grid: self.time_grid()?,
            objective: self.spec(),
            optimizer: self.optimizer,
            runs: self.survey.runs,
            master_seed: self.survey.master_seed,
            u_range: self.survey.u_range,
            n_range: self.survey.n_range,
            histogram_bins: self.survey.bins,
            parallelism: self.survey.parallelism,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}
