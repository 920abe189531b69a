//! Run configuration: one TOML document with a section per component.
//! Every key has a default and unknown keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::baselines::SensorConfig;
use crate::datagen::DatasetConfig;
use crate::dynamics::VehicleSpec;
use crate::expert::ExpertConfig;
use crate::grid::MapSpec;
use crate::sim::{AgentKind, AgentSettings, DisturbanceModel, Execution, SuiteConfig};
use crate::tracking::LqrWeights;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatagenSection {
    pub episodes_per_map: usize,
    pub seed: u64,
    pub min_goal_distance: f64,
    pub min_forward_clearance: f64,
}

impl Default for DatagenSection {
    fn default() -> Self {
        Self {
            episodes_per_map: 10,
            seed: 1,
            min_goal_distance: 2.0,
            min_forward_clearance: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub vehicle: VehicleSpec,
    pub expert: ExpertConfig,
    pub lqr: LqrWeights,
    pub sensor: SensorConfig,
    pub maps: Vec<MapSpec>,
    pub suite: SuiteConfig,
    pub agents: Vec<AgentKind>,
    /// Whether mapping agents track their plans with LQR.
    pub mapping_lqr: bool,
    pub disturbance: DisturbanceModel,
    pub datagen: DatagenSection,
    /// Worker threads; 0 uses every available core.
    pub jobs: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            vehicle: VehicleSpec::default(),
            expert: ExpertConfig::default(),
            lqr: LqrWeights::default(),
            sensor: SensorConfig::default(),
            maps: vec![MapSpec::default()],
            suite: SuiteConfig::default(),
            agents: vec![AgentKind::Expert],
            mapping_lqr: false,
            disturbance: DisturbanceModel::None,
            datagen: DatagenSection::default(),
            jobs: 0,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{0}")]
    Parse(String),
    #[error("{0}")]
    Invalid(String),
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text).map_err(|e| match e {
            ConfigError::Parse(msg) => ConfigError::Parse(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = ConfigError::Invalid;
        self.vehicle.validate().map_err(invalid)?;
        self.expert.validate(&self.vehicle).map_err(invalid)?;
        self.lqr
            .validate()
            .map_err(|e| invalid(format!("lqr: {e}")))?;
        self.sensor.validate().map_err(invalid)?;
        for (k, m) in self.maps.iter().enumerate() {
            m.validate()
                .map_err(|e| invalid(format!("maps[{k}]: {e}")))?;
        }
        if let DisturbanceModel::GaussianControl {
            sigma_v,
            sigma_omega,
            ..
        } = self.disturbance
        {
            if !(sigma_v >= 0.0
                && sigma_v.is_finite()
                && sigma_omega >= 0.0
                && sigma_omega.is_finite())
            {
                return Err(invalid(
                    "disturbance.sigma_v and disturbance.sigma_omega must be finite and >= 0"
                        .into(),
                ));
            }
        }
        Ok(())
    }

    /// Configuration with every optional default made explicit.
    pub fn resolved(&self) -> Self {
        Self {
            expert: self.expert.resolved(&self.vehicle),
            ..self.clone()
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn agent_settings(&self) -> AgentSettings {
        AgentSettings {
            lqr: self.lqr.clone(),
            sensor: self.sensor,
            mapping_execution: if self.mapping_lqr {
                Execution::Lqr(self.lqr.clone())
            } else {
                Execution::OpenLoop
            },
        }
    }

    pub fn dataset_config(&self) -> DatasetConfig {
        DatasetConfig {
            maps: self.maps.clone(),
            episodes_per_map: self.datagen.episodes_per_map,
            seed: self.datagen.seed,
            min_goal_distance: self.datagen.min_goal_distance,
            min_forward_clearance: self.datagen.min_forward_clearance,
            episodes: Vec::new(),
            vehicle: self.vehicle,
            expert: self.expert.clone(),
            sensor: self.sensor,
        }
    }
}
