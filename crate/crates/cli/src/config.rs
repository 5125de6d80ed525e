//! Run configuration file schema.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use tfqkd::model::{ChannelParams, IntensitySet, ProtocolConfig};
use tfqkd::strategy::{LossSplit, ScanConditions, Strategy};
use tfqkd::Objective;

use crate::CliError;

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArmLosses {
    pub a: f64,
    pub b: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelBlock {
    #[serde(default)]
    pub loss_db: Option<ArmLosses>,
    #[serde(default)]
    pub eta_a: Option<f64>,
    #[serde(default)]
    pub eta_b: Option<f64>,
    pub p_dark: f64,
    pub visibility: f64,
}

impl ChannelBlock {
    pub fn resolve(&self) -> Result<ChannelParams, CliError> {
        let channel = match (self.loss_db, self.eta_a, self.eta_b) {
            (Some(l), None, None) => ChannelParams::from_losses_db(l.a, l.b, self.p_dark, self.visibility),
            (None, Some(a), Some(b)) => ChannelParams::new(a, b, self.p_dark, self.visibility),
            (None, None, None) => {
                return Err(CliError::Config(
                    "channel: give either loss_db or eta_a and eta_b".into(),
                ))
            }
            (Some(_), _, _) => {
                return Err(CliError::Config(
                    "channel: loss_db and eta_a/eta_b are mutually exclusive".into(),
                ))
            }
            _ => return Err(CliError::Config("channel: eta_a and eta_b must be given together".into())),
        };
        channel.map_err(|e| CliError::Config(format!("channel: {e}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Directive {
    Optimize,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(untagged)]
pub enum IntensitySpec {
    Directive(Directive),
    Explicit(IntensitySet),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    pub dir: PathBuf,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanBlock {
    pub losses_db: Vec<f64>,
    #[serde(default = "all_strategies")]
    pub strategies: Vec<Strategy>,
    #[serde(default = "default_split")]
    pub split_difference_db: f64,
}

fn all_strategies() -> Vec<Strategy> {
    vec![
        Strategy::AsymmetricIntensities,
        Strategy::AddLoss { added_db: 10.0 },
        Strategy::NoCompensation,
    ]
}

fn default_split() -> f64 {
    LossSplit::default().difference_db
}

fn default_strategy() -> Strategy {
    Strategy::AsymmetricIntensities
}

fn default_objective() -> Objective {
    Objective::Finite
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub channel: ChannelBlock,
    #[serde(default)]
    pub intensities: Option<IntensitySpec>,
    #[serde(default)]
    pub protocol: ProtocolConfig,
    #[serde(default = "default_strategy")]
    pub strategy: Strategy,
    /// Regime maximized when intensities are optimized.
    #[serde(default = "default_objective")]
    pub objective: Objective,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: Option<OutputBlock>,
    #[serde(default)]
    pub scan: Option<ScanBlock>,
}

impl RunConfig {
    pub fn intensities(&self) -> Result<IntensitySpec, CliError> {
        self.intensities
            .ok_or_else(|| CliError::Config("intensities: missing (give a set or \"optimize\")".into()))
    }

    pub fn scan_conditions(&self, block: &ScanBlock) -> ScanConditions {
        ScanConditions {
            p_dark: self.channel.p_dark,
            visibility: self.channel.visibility,
            split: LossSplit {
                difference_db: block.split_difference_db,
            },
            objective: self.objective,
        }
    }
}

/// Reads and parses a JSON file, reporting the failing field path.
pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let at = e.path().to_string();
        let inner = e.into_inner();
        if at == "." {
            CliError::Config(format!("{}: {inner}", path.display()))
        } else {
            CliError::Config(format!("{}: at `{at}`: {inner}", path.display()))
        }
    })
}
