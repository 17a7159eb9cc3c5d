//! Scenario configuration: everything a run needs, loadable from TOML.
//! Every field has a default; unknown keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::Channel;
use crate::dqn::{Architecture, DynamicRange, LayerSpec, TrainConfig};
use crate::jammer::{DetectionModel, QJammerConfig};
use crate::policy::{AfhConfig, PolicyKind, RewardParams};
use crate::spectrum::{ChannelPlan, EmitterRole, EmitterSpec, LinkGains, NoiseModel, RadioModel};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed config: {0}")]
    Parse(String),
    #[error("invalid `{field}`: {reason}")]
    Invalid { field: String, reason: String },
}

fn invalid(field: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { field: field.to_string(), reason: reason.into() }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BandConfig {
    pub f_start_hz: f64,
    pub f_end_hz: f64,
    pub channels: usize,
    pub resolution_hz: f64,
}

impl Default for BandConfig {
    fn default() -> Self {
        Self { f_start_hz: 2.400e9, f_end_hz: 2.410e9, channels: 10, resolution_hz: 1e3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FhssConfig {
    pub period: usize,
    /// Seed of the hop set. Fixed per deployment, independent of the run seed.
    pub pattern_seed: u64,
    /// Explicit hop set; overrides `period` and `pattern_seed`.
    pub pattern: Option<Vec<usize>>,
}

impl Default for FhssConfig {
    fn default() -> Self {
        Self { period: 10, pattern_seed: 1, pattern: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DqnUserConfig {
    /// Spectrum frames stacked into one state (`T`).
    pub history_frames: usize,
    pub dynamic_range: DynamicRange,
    pub train: TrainConfig,
    /// Layer stack; defaults to the two-convolution waterfall network.
    pub layers: Option<Vec<LayerSpec>>,
}

impl Default for DqnUserConfig {
    fn default() -> Self {
        Self {
            history_frames: 100,
            dynamic_range: DynamicRange::default(),
            train: TrainConfig::default(),
            layers: None,
        }
    }
}

impl DqnUserConfig {
    pub fn architecture(&self, channels: usize) -> Architecture {
        match &self.layers {
            Some(layers) => Architecture { input: (self.history_frames, channels), layers: layers.clone() },
            None => Architecture::waterfall(self.history_frames, channels),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UserConfig {
    pub policy: PolicyKind,
    pub power_dbm: f64,
    pub rolloff: f64,
    pub start_channel: usize,
    pub fhss: FhssConfig,
    pub afh: AfhConfig,
    pub reward: RewardParams,
    pub dqn: DqnUserConfig,
}

impl Default for UserConfig {
    fn default() -> Self {
        Self {
            policy: PolicyKind::Adrlh,
            power_dbm: 30.0,
            rolloff: 0.5,
            start_channel: 1,
            fhss: FhssConfig::default(),
            afh: AfhConfig::default(),
            reward: RewardParams::default(),
            dqn: DqnUserConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JammerKind {
    None,
    Follower,
    #[serde(alias = "q-learning", alias = "q")]
    Qlearning,
}

impl JammerKind {
    pub fn name(self) -> &'static str {
        match self {
            JammerKind::None => "none",
            JammerKind::Follower => "follower",
            JammerKind::Qlearning => "qlearning",
        }
    }
}

impl std::fmt::Display for JammerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for JammerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "none" => Ok(JammerKind::None),
            "follower" => Ok(JammerKind::Follower),
            "qlearning" | "q-learning" | "q" => Ok(JammerKind::Qlearning),
            _ => Err(format!("unknown jammer `{s}` (expected none, follower or qlearning)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct JammerConfig {
    pub kind: JammerKind,
    pub power_dbm: f64,
    pub rolloff: f64,
    pub self_jamming: bool,
    pub detection: DetectionModel,
    pub qlearning: QJammerConfig,
}

impl Default for JammerConfig {
    fn default() -> Self {
        Self {
            kind: JammerKind::Follower,
            power_dbm: 40.0,
            rolloff: 0.5,
            self_jamming: false,
            detection: DetectionModel::default(),
            qlearning: QJammerConfig::default(),
        }
    }
}

/// A high-power station near the jammer, static unless `hop_interval` is set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvConfig {
    pub channel: usize,
    pub power_dbm: f64,
    pub rolloff: f64,
    /// Re-draw the channel uniformly every this many decision slots.
    pub hop_interval: Option<u64>,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self { channel: 6, power_dbm: 10.0, rolloff: 0.5, hop_interval: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub seed: u64,
    pub decision_slots: u64,
    pub sub_slots: u32,
    pub band: BandConfig,
    pub gains: LinkGains,
    pub noise: NoiseModel,
    pub user: UserConfig,
    pub jammer: JammerConfig,
    pub environment: Vec<EnvConfig>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            name: "default".into(),
            seed: 1,
            decision_slots: 10_000,
            sub_slots: 10,
            band: BandConfig::default(),
            gains: LinkGains::default(),
            noise: NoiseModel::default(),
            user: UserConfig::default(),
            jammer: JammerConfig::default(),
            environment: vec![EnvConfig::default()],
        }
    }
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenario config serializes")
    }

    pub fn plan(&self) -> Result<ChannelPlan, ConfigError> {
        let b = &self.band;
        ChannelPlan::new(b.f_start_hz, b.f_end_hz, b.channels, b.resolution_hz)
            .map_err(|e| invalid("band", e.to_string()))
    }

    pub fn radio(&self) -> Result<RadioModel, ConfigError> {
        Ok(RadioModel::new(self.plan()?, self.gains, self.noise))
    }

    fn channel(&self, field: &str, number: usize) -> Result<Channel, ConfigError> {
        Channel::new(number, self.band.channels)
            .ok_or_else(|| invalid(field, format!("channel {number} outside 1..={}", self.band.channels)))
    }

    fn emitter(&self, role: EmitterRole, prefix: &str, power_dbm: f64, rolloff: f64) -> Result<EmitterSpec, ConfigError> {
        if !power_dbm.is_finite() {
            return Err(invalid(&format!("{prefix}.power_dbm"), "must be finite"));
        }
        if !(0.0..=1.0).contains(&rolloff) {
            return Err(invalid(&format!("{prefix}.rolloff"), "must lie in [0, 1]"));
        }
        EmitterSpec::new(role, power_dbm, rolloff, &self.plan()?).map_err(|e| invalid(prefix, e.to_string()))
    }

    pub fn user_emitter(&self) -> Result<EmitterSpec, ConfigError> {
        self.emitter(EmitterRole::User, "user", self.user.power_dbm, self.user.rolloff)
    }

    pub fn jammer_emitter(&self) -> Result<EmitterSpec, ConfigError> {
        self.emitter(EmitterRole::Jammer, "jammer", self.jammer.power_dbm, self.jammer.rolloff)
    }

    pub fn env_emitter(&self, i: usize) -> Result<EmitterSpec, ConfigError> {
        let e = &self.environment[i];
        self.emitter(EmitterRole::Environment, &format!("environment[{i}]"), e.power_dbm, e.rolloff)
    }

    pub fn start_channel(&self) -> Result<Channel, ConfigError> {
        self.channel("user.start_channel", self.user.start_channel)
    }

    pub fn env_channels(&self) -> Result<Vec<Channel>, ConfigError> {
        self.environment
            .iter()
            .enumerate()
            .map(|(i, e)| self.channel(&format!("environment[{i}].channel"), e.channel))
            .collect()
    }

    pub fn fhss_pattern(&self) -> Result<Option<Vec<Channel>>, ConfigError> {
        match &self.user.fhss.pattern {
            None => Ok(None),
            Some(p) if p.is_empty() => Err(invalid("user.fhss.pattern", "empty")),
            Some(p) => p.iter().map(|&n| self.channel("user.fhss.pattern", n)).collect::<Result<_, _>>().map(Some),
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.decision_slots == 0 {
            return Err(invalid("decision_slots", "must be positive"));
        }
        if self.sub_slots == 0 {
            return Err(invalid("sub_slots", "must be at least 1"));
        }
        if !self.gains.is_finite() {
            return Err(invalid("gains", "all gains must be finite"));
        }
        if !self.noise.psd_dbm_per_hz.is_finite() {
            return Err(invalid("noise.psd_dbm_per_hz", "must be finite"));
        }
        self.plan()?;
        self.user_emitter()?;
        self.jammer_emitter()?;
        for i in 0..self.environment.len() {
            self.env_emitter(i)?;
            if self.environment[i].hop_interval == Some(0) {
                return Err(invalid(&format!("environment[{i}].hop_interval"), "must be positive"));
            }
        }
        self.start_channel()?;
        self.env_channels()?;
        self.fhss_pattern()?;
        if self.user.fhss.period == 0 {
            return Err(invalid("user.fhss.period", "must be positive"));
        }
        if !(self.user.afh.margin_db.is_finite()) {
            return Err(invalid("user.afh.margin_db", "must be finite"));
        }
        self.user.reward.validate().map_err(|e| invalid("user.reward", e.to_string()))?;
        let dqn = &self.user.dqn;
        if dqn.history_frames == 0 {
            return Err(invalid("user.dqn.history_frames", "must be positive"));
        }
        if !dqn.dynamic_range.is_valid() {
            return Err(invalid("user.dqn.dynamic_range", "ceil_db must exceed floor_db"));
        }
        dqn.train.validate().map_err(|e| invalid("user.dqn.train", e.to_string()))?;
        dqn.architecture(self.band.channels)
            .num_params()
            .map_err(|e| invalid("user.dqn.layers", e.to_string()))?;
        if !self.jammer.detection.threshold_db.is_finite() && self.jammer.detection.threshold_db != f64::NEG_INFINITY {
            return Err(invalid("jammer.detection.threshold_db", "must be finite"));
        }
        self.jammer.qlearning.validate().map_err(|e| invalid("jammer.qlearning", e))?;
        Ok(())
    }
}
