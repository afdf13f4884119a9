//! Experiment configuration (JSON, schema version 1).

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use smallcell_core::cela::ThresholdMode;
use smallcell_core::{scenario, ChannelParams, DistortionKind, GmmSpec, Region, SolverConfig, ThresholdPolicy};

use crate::error::HarnessError;

pub const SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_KAPPA: f64 = 5e8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ScenarioSpec {
    /// `gmm1` or `gmm2`.
    Preset(String),
    Mixture(GmmSpec),
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        ScenarioSpec::Preset("gmm1".into())
    }
}

impl ScenarioSpec {
    pub fn resolve(&self) -> Result<GmmSpec, HarnessError> {
        let spec = match self {
            ScenarioSpec::Preset(name) => scenario::preset(name)?,
            ScenarioSpec::Mixture(spec) => spec.clone(),
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// Which distortion the partition step of CELA (and association) uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistortionName {
    #[default]
    Mse,
    Interference,
    InterAp,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdSpec {
    #[serde(default = "nearest_mode")]
    pub mode: ThresholdMode,
    /// Required for `comm_radius` and `min_of_both`.
    #[serde(default)]
    pub comm_radius_km: Option<f64>,
}

fn nearest_mode() -> ThresholdMode {
    ThresholdMode::NearestApDistance
}

impl Default for ThresholdSpec {
    fn default() -> Self {
        ThresholdSpec { mode: ThresholdMode::NearestApDistance, comm_radius_km: None }
    }
}

impl ThresholdSpec {
    pub fn policy(&self, alpha: f64) -> Result<ThresholdPolicy, HarnessError> {
        let radius = || {
            self.comm_radius_km
                .ok_or_else(|| HarnessError::Schema(format!("threshold mode {:?} needs comm_radius_km", self.mode)))
        };
        let policy = match self.mode {
            ThresholdMode::NearestApDistance => ThresholdPolicy::nearest_ap(alpha),
            ThresholdMode::CommRadius => ThresholdPolicy::comm_radius(radius()?, alpha),
            ThresholdMode::MinOfBoth => ThresholdPolicy::min_of_both(radius()?, alpha),
        };
        policy.validate()?;
        Ok(policy)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AlgorithmSpec {
    Lloyd {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        name: Option<String>,
    },
    Interference {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        name: Option<String>,
        #[serde(default = "default_kappa")]
        kappa: f64,
        /// Overrides the solver step size δ.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        step_size: Option<f64>,
        #[serde(default = "metre_frame")]
        unit_per_km: f64,
    },
    InterAp {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        name: Option<String>,
        #[serde(default = "default_kappa")]
        kappa: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        step_size: Option<f64>,
        #[serde(default = "metre_frame")]
        unit_per_km: f64,
    },
    Cela {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        name: Option<String>,
        alpha: f64,
        #[serde(default)]
        threshold: ThresholdSpec,
        #[serde(default)]
        distortion: DistortionName,
        #[serde(default = "default_kappa")]
        kappa: f64,
    },
}

fn default_kappa() -> f64 {
    DEFAULT_KAPPA
}

fn metre_frame() -> f64 {
    DistortionKind::METRE_FRAME
}

impl AlgorithmSpec {
    pub fn lloyd() -> Self {
        AlgorithmSpec::Lloyd { name: None }
    }

    pub fn interference(kappa: f64) -> Self {
        AlgorithmSpec::Interference { name: None, kappa, step_size: None, unit_per_km: metre_frame() }
    }

    pub fn inter_ap(kappa: f64) -> Self {
        AlgorithmSpec::InterAp { name: None, kappa, step_size: None, unit_per_km: metre_frame() }
    }

    pub fn cela(alpha: f64) -> Self {
        AlgorithmSpec::Cela {
            name: None,
            alpha,
            threshold: ThresholdSpec::default(),
            distortion: DistortionName::Mse,
            kappa: DEFAULT_KAPPA,
        }
    }

    /// File-name-safe label, unique within a config.
    pub fn label(&self) -> String {
        match self {
            AlgorithmSpec::Lloyd { name: Some(n) }
            | AlgorithmSpec::Interference { name: Some(n), .. }
            | AlgorithmSpec::InterAp { name: Some(n), .. }
            | AlgorithmSpec::Cela { name: Some(n), .. } => n.clone(),
            AlgorithmSpec::Lloyd { .. } => "lloyd".into(),
            AlgorithmSpec::Interference { .. } => "interference".into(),
            AlgorithmSpec::InterAp { .. } => "inter_ap".into(),
            AlgorithmSpec::Cela { alpha, .. } => format!("cela_{alpha}"),
        }
    }

    pub fn is_baseline(&self) -> bool {
        matches!(self, AlgorithmSpec::Lloyd { .. })
    }
}

pub fn distortion_for(name: DistortionName, kappa: f64) -> DistortionKind {
    match name {
        DistortionName::Mse => DistortionKind::mse(),
        DistortionName::Interference => DistortionKind::interference(kappa),
        DistortionName::InterAp => DistortionKind::inter_ap(kappa),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricName {
    Rate,
    AccessRate,
    AccessFraction,
}

impl MetricName {
    pub const ALL: [MetricName; 3] = [MetricName::Rate, MetricName::AccessRate, MetricName::AccessFraction];

    pub fn as_str(self) -> &'static str {
        match self {
            MetricName::Rate => "rate",
            MetricName::AccessRate => "access_rate",
            MetricName::AccessFraction => "access_fraction",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "schema_version")]
    pub schema_version: u32,
    #[serde(default)]
    pub scenario: ScenarioSpec,
    #[serde(default = "reference_region")]
    pub region: Region,
    /// K.
    #[serde(default = "default_users")]
    pub users: usize,
    /// M.
    #[serde(default = "default_aps")]
    pub aps: usize,
    #[serde(default = "reference_channel")]
    pub channel: ChannelParams,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default = "default_algorithms")]
    pub algorithms: Vec<AlgorithmSpec>,
    /// Metrics listed in `improvements.csv`.
    #[serde(default = "all_metrics")]
    pub improvement_metrics: Vec<MetricName>,
    #[serde(default = "default_trials")]
    pub trials: u64,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_interferers: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

fn schema_version() -> u32 {
    SCHEMA_VERSION
}
fn reference_region() -> Region {
    Region::REFERENCE
}
fn default_users() -> usize {
    2000
}
fn default_aps() -> usize {
    8
}
fn reference_channel() -> ChannelParams {
    ChannelParams::REFERENCE
}
fn default_algorithms() -> Vec<AlgorithmSpec> {
    vec![AlgorithmSpec::lloyd()]
}
fn all_metrics() -> Vec<MetricName> {
    MetricName::ALL.to_vec()
}
fn default_trials() -> u64 {
    10_000
}
fn default_seed() -> u64 {
    1
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            schema_version: SCHEMA_VERSION,
            scenario: ScenarioSpec::default(),
            region: Region::REFERENCE,
            users: default_users(),
            aps: default_aps(),
            channel: ChannelParams::REFERENCE,
            solver: SolverConfig::default(),
            algorithms: default_algorithms(),
            improvement_metrics: all_metrics(),
            trials: default_trials(),
            seed: default_seed(),
            max_interferers: None,
            output_dir: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        let config: ExperimentConfig = serde_json::from_str(text).map_err(|e| HarnessError::Schema(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(HarnessError::Schema(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        self.scenario.resolve()?;
        self.channel.validate()?;
        self.solver.validate()?;
        if self.aps == 0 || self.aps > self.users {
            return Err(HarnessError::Schema(format!("need 1 <= aps <= users, got {} and {}", self.aps, self.users)));
        }
        if self.trials == 0 {
            return Err(HarnessError::Schema("trials must be positive".into()));
        }
        if self.users < 20 {
            return Err(HarnessError::Schema("95%-likely statistics need at least 20 users".into()));
        }
        if self.algorithms.is_empty() {
            return Err(HarnessError::Schema("no algorithms configured".into()));
        }
        let mut labels: Vec<String> = self.algorithms.iter().map(AlgorithmSpec::label).collect();
        for label in &labels {
            if label.is_empty() || !label.chars().all(|c| c.is_ascii_alphanumeric() || "._-".contains(c)) {
                return Err(HarnessError::Schema(format!("algorithm name {label:?} is not file-name safe")));
            }
        }
        labels.sort();
        labels.dedup();
        if labels.len() != self.algorithms.len() {
            return Err(HarnessError::Schema("algorithm names must be unique".into()));
        }
        for alg in &self.algorithms {
            match alg {
                AlgorithmSpec::Lloyd { .. } => {}
                AlgorithmSpec::Interference { kappa, step_size, unit_per_km, .. }
                | AlgorithmSpec::InterAp { kappa, step_size, unit_per_km, .. } => {
                    DistortionKind::interference(*kappa).with_unit_per_km(*unit_per_km).validate()?;
                    if step_size.is_some_and(|s| !(s > 0.0)) {
                        return Err(HarnessError::Schema("step_size must be positive".into()));
                    }
                }
                AlgorithmSpec::Cela { alpha, threshold, distortion, kappa, .. } => {
                    threshold.policy(*alpha)?;
                    distortion_for(*distortion, *kappa).validate()?;
                    if threshold.mode == ThresholdMode::NearestApDistance && self.aps < 2 && *alpha > 0.0 {
                        return Err(HarnessError::Schema("nearest-AP thresholds need at least two APs".into()));
                    }
                }
            }
        }
        Ok(())
    }

    /// Interference-aware placement on the far-apart three-cluster mixture.
    pub fn reproduce_gmm1(seed: u64) -> Self {
        ExperimentConfig {
            scenario: ScenarioSpec::Preset("gmm1".into()),
            algorithms: vec![
                AlgorithmSpec::lloyd(),
                AlgorithmSpec::interference(DEFAULT_KAPPA),
                AlgorithmSpec::inter_ap(DEFAULT_KAPPA),
            ],
            improvement_metrics: vec![MetricName::Rate, MetricName::AccessRate],
            seed,
            ..ExperimentConfig::default()
        }
    }

    /// Load balancing on the close three-cluster mixture.
    pub fn reproduce_gmm2(seed: u64) -> Self {
        ExperimentConfig {
            scenario: ScenarioSpec::Preset("gmm2".into()),
            algorithms: vec![
                AlgorithmSpec::lloyd(),
                AlgorithmSpec::cela(0.9),
                AlgorithmSpec::cela(1.0),
                AlgorithmSpec::cela(1.75),
            ],
            seed,
            ..ExperimentConfig::default()
        }
    }
}
