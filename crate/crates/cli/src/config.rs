//! Resolved run configuration. A JSON config file supplies defaults and
//! command-line flags override individual values.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use flowknot::expr::CustomField;
use flowknot::ode::IntegratorConfig;
use flowknot::SystemParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum SystemName {
    NoseHoover,
    MooreSpiegel,
    Hopf,
    Custom,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum OutputFormat {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum MethodName {
    FiniteDifference,
    Variational,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ArcName {
    L1,
    L2,
}

/// Options that only some subcommands read. Unset values are filled with
/// the command's defaults before the config is embedded in a report.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CommandOptions {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub init: Option<[f64; 3]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_end: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub backward: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub point: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub guess: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_return: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub method: Option<MethodName>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub center: Option<[f64; 3]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub subdivision: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub direction: Option<[f64; 3]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target_norm: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub arc: Option<ArcName>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s_values: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_seeds: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mutate_index_sign: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub system: SystemName,
    pub q: f64,
    pub t: f64,
    pub r: f64,
    pub mu: f64,
    pub omega: f64,
    pub field_file: Option<PathBuf>,
    pub field_params: BTreeMap<String, f64>,
    pub integrator: IntegratorConfig,
    pub out: Option<PathBuf>,
    pub format: OutputFormat,
    pub seed: u64,
    pub options: CommandOptions,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            system: SystemName::NoseHoover,
            q: 1.0,
            t: 27.0,
            r: 100.0,
            mu: 1.0,
            omega: 1.0,
            field_file: None,
            field_params: BTreeMap::new(),
            integrator: IntegratorConfig::default(),
            out: None,
            format: OutputFormat::Json,
            seed: 0,
            options: CommandOptions::default(),
        }
    }
}

/// Problems with the configuration itself, reported as usage errors.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| ConfigError(format!("invalid config {}: {e}", path.display())))
    }

    /// The system selected by this config, reading the field file for
    /// custom systems.
    pub fn params(&self) -> Result<SystemParams, ConfigError> {
        let p = match self.system {
            SystemName::NoseHoover => SystemParams::NoseHoover { q: self.q },
            SystemName::MooreSpiegel => SystemParams::MooreSpiegel { t: self.t, r: self.r },
            SystemName::Hopf => SystemParams::ValidationHopf {
                mu: self.mu,
                omega: self.omega,
            },
            SystemName::Custom => {
                let path = self
                    .field_file
                    .as_ref()
                    .ok_or_else(|| ConfigError("--system custom requires --field-file".into()))?;
                SystemParams::Custom {
                    field: load_field(path, &self.field_params)?,
                }
            }
            SystemName::Both => {
                return Err(ConfigError(
                    "--system both is only accepted by verify-claims".into(),
                ))
            }
        };
        p.validate().map_err(|e| ConfigError(e.to_string()))?;
        self.integrator
            .validate()
            .map_err(|e| ConfigError(e.to_string()))?;
        Ok(p)
    }
}

pub fn load_field(path: &Path, overrides: &BTreeMap<String, f64>) -> Result<CustomField, ConfigError> {
    let text = fs::read_to_string(path)
        .map_err(|e| ConfigError(format!("cannot read field file {}: {e}", path.display())))?;
    CustomField::parse_with(&text, overrides)
        .map_err(|e| ConfigError(format!("{}:{e}", path.display())))
}
