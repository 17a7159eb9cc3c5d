//! The four user strategies: a fixed hop pattern, adaptive hopping that
//! flees detected jamming, and two Q-network users whose rewards differ in
//! whether they pay for being correlated with the jammer.
//!
//! Users only see what their receiver sees. The jammer's channel is
//! inferred from the received spectrum after removing the user's own,
//! known, contribution.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{argmax, Channel};
use crate::dqn::{Architecture, DqnError, DqnLearner, Experience, StateMatrix, TrainConfig};
use crate::hiding::{CorrelationTracker, LagRange, MetricError, Slot, Window};
use crate::spectrum::{dbm_to_watts, watts_to_dbm, SpectrumFrame};

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error("hop pattern: {0}")]
    Pattern(String),
    #[error("reward parameters: {0}")]
    Reward(String),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Dqn(#[from] DqnError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PolicyKind {
    #[serde(rename = "FHSS", alias = "fhss")]
    Fhss,
    #[serde(rename = "AFH", alias = "afh")]
    Afh,
    #[serde(rename = "ADRLA", alias = "adrla")]
    Adrla,
    #[serde(rename = "ADRLH", alias = "adrlh")]
    Adrlh,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 4] = [PolicyKind::Fhss, PolicyKind::Afh, PolicyKind::Adrla, PolicyKind::Adrlh];

    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::Fhss => "FHSS",
            PolicyKind::Afh => "AFH",
            PolicyKind::Adrla => "ADRLA",
            PolicyKind::Adrlh => "ADRLH",
        }
    }

    pub fn is_learning(self) -> bool {
        matches!(self, PolicyKind::Adrla | PolicyKind::Adrlh)
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PolicyKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PolicyKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown policy `{s}` (expected FHSS, AFH, ADRLA or ADRLH)"))
    }
}

/// Periodic hop pattern.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FhssState {
    pattern: Vec<Channel>,
    position: usize,
}

impl FhssState {
    pub fn new(pattern: Vec<Channel>) -> Result<Self, PolicyError> {
        if pattern.is_empty() {
            return Err(PolicyError::Pattern("empty pattern".into()));
        }
        Ok(Self { pattern, position: 0 })
    }

    /// `period` hops drawn independently and uniformly from the band by a
    /// generator seeded with `seed`.
    pub fn generate(num_channels: usize, period: usize, seed: u64) -> Result<Self, PolicyError> {
        if num_channels == 0 || period == 0 {
            return Err(PolicyError::Pattern("period and channel count must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::new((0..period).map(|_| Channel::from_index(rng.gen_range(0..num_channels))).collect())
    }

    pub fn pattern(&self) -> &[Channel] {
        &self.pattern
    }

    pub fn decide(&mut self) -> Channel {
        let c = self.pattern[self.position];
        self.position = (self.position + 1) % self.pattern.len();
        c
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AfhConfig {
    /// Own-channel interference above the band median that counts as jamming.
    pub margin_db: f64,
    /// Decision slots a fled channel stays blacklisted.
    pub cooldown: u32,
}

impl Default for AfhConfig {
    fn default() -> Self {
        Self { margin_db: 6.0, cooldown: 20 }
    }
}

/// Channels whose interference is within this many dB of the quietest one
/// are treated as equally quiet, so ties resolve to the lowest index.
const QUIET_TOLERANCE_DB: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct AfhState {
    current: Channel,
    cooldown: Vec<u32>,
    config: AfhConfig,
}

impl AfhState {
    pub fn new(start: Channel, num_channels: usize, config: AfhConfig) -> Self {
        Self { current: start, cooldown: vec![0; num_channels], config }
    }

    pub fn current(&self) -> Channel {
        self.current
    }

    pub fn cooldowns(&self) -> &[u32] {
        &self.cooldown
    }

    /// `interference_dbm` is the last slot's spectrum with the user's own
    /// signal removed.
    pub fn decide(&mut self, interference_dbm: Option<&[f64]>) -> Channel {
        for c in &mut self.cooldown {
            *c = c.saturating_sub(1);
        }
        let Some(level) = interference_dbm else { return self.current };
        let cur = self.current.index();
        if level[cur] <= median(level) + self.config.margin_db {
            return self.current;
        }
        self.cooldown[cur] = self.config.cooldown;
        let open: Vec<usize> = (0..level.len()).filter(|&i| self.cooldown[i] == 0).collect();
        let candidates = if open.is_empty() { (0..level.len()).collect() } else { open };
        self.current = Channel::from_index(quietest(level, &candidates));
        self.current
    }
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

fn quietest(level: &[f64], candidates: &[usize]) -> usize {
    let min = candidates.iter().map(|&i| level[i]).fold(f64::INFINITY, f64::min);
    *candidates
        .iter()
        .find(|&&i| level[i] <= min + QUIET_TOLERANCE_DB)
        .expect("candidates non-empty")
}

/// Per-channel received power (dBm) with the user's own known contribution
/// (watts) removed, averaged linearly over `frames`. Floors at `floor_dbm`.
pub fn interference_dbm(frames: &[SpectrumFrame], own_watts: &[f64], floor_dbm: f64) -> Vec<f64> {
    let n = own_watts.len();
    let mut acc = vec![0.0; n];
    for f in frames {
        for (a, &s) in acc.iter_mut().zip(&f.samples_dbm) {
            *a += dbm_to_watts(s);
        }
    }
    let k = frames.len().max(1) as f64;
    let floor = dbm_to_watts(floor_dbm);
    acc.iter()
        .zip(own_watts)
        .map(|(&total, &own)| watts_to_dbm((total / k - own).max(floor)))
        .collect()
}

/// The channel the jammer appears to occupy: the interference peak, if it
/// rises `margin_db` above the per-channel noise floor.
pub fn estimate_jammer_channel(interference_dbm: &[f64], noise_dbm: f64, margin_db: f64) -> Slot {
    let i = argmax(interference_dbm)?;
    (interference_dbm[i] >= noise_dbm + margin_db).then(|| Channel::from_index(i))
}

pub fn reward_adrla(sinr: f64) -> f64 {
    (1.0 + sinr).log2()
}

pub fn reward_adrlh(sinr: f64, correlation: f64, params: &RewardParams) -> f64 {
    reward_adrla(sinr) + params.alpha * (1.0 - correlation)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardParams {
    /// Weight of the hiding term.
    pub alpha: f64,
    /// Comparison window length `L` in decision slots.
    pub window: usize,
    pub min_lag: i64,
    pub max_lag: i64,
    /// Interference this far above noise counts as a visible jammer.
    pub jammer_margin_db: f64,
}

impl Default for RewardParams {
    fn default() -> Self {
        Self { alpha: 2.0, window: 10, min_lag: 0, max_lag: 5, jammer_margin_db: 6.0 }
    }
}

impl RewardParams {
    pub fn validate(&self) -> Result<(), PolicyError> {
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(PolicyError::Reward(format!("alpha {} must be finite and non-negative", self.alpha)));
        }
        self.lag_range()?;
        Ok(())
    }

    pub fn lag_range(&self) -> Result<LagRange, MetricError> {
        LagRange::new(self.min_lag, self.max_lag, self.window)
    }

    /// The margin covers the largest forward lag.
    pub fn correlation_window(&self) -> Result<Window, MetricError> {
        Window::new(self.window, self.max_lag.max(0) as usize)
    }

    pub fn tracker(&self) -> Result<CorrelationTracker, MetricError> {
        Ok(CorrelationTracker::new(self.correlation_window()?, self.lag_range()?))
    }
}

/// A Q-network user. ADRLA is rewarded for throughput only; ADRLH also
/// for keeping its actions uncorrelated with the jammer's.
#[derive(Debug, Clone)]
pub struct DrlAgent {
    kind: PolicyKind,
    learner: DqnLearner,
    reward: RewardParams,
    pending: Option<(Arc<StateMatrix>, Channel)>,
}

impl DrlAgent {
    pub fn new<R: Rng + ?Sized>(
        kind: PolicyKind,
        arch: Architecture,
        train: TrainConfig,
        reward: RewardParams,
        rng: &mut R,
    ) -> Result<Self, PolicyError> {
        assert!(kind.is_learning(), "{kind} is not a learning policy");
        reward.validate()?;
        Ok(Self { kind, learner: DqnLearner::new(arch, train, rng)?, reward, pending: None })
    }

    pub fn kind(&self) -> PolicyKind {
        self.kind
    }

    pub fn learner(&self) -> &DqnLearner {
        &self.learner
    }

    pub fn reward(&self, sinr: f64, correlation: f64) -> f64 {
        match self.kind {
            PolicyKind::Adrlh => reward_adrlh(sinr, correlation, &self.reward),
            _ => reward_adrla(sinr),
        }
    }

    pub fn act<R: Rng + ?Sized>(&mut self, state: Arc<StateMatrix>, rng: &mut R) -> Result<Channel, PolicyError> {
        let a = self.learner.act(&state, rng)?;
        self.pending = Some((state, a));
        Ok(a)
    }

    /// Closes the slot opened by [`act`](Self::act): computes the reward,
    /// stores the experience and trains. Returns `(reward, loss)`.
    pub fn finish<R: Rng + ?Sized>(
        &mut self,
        sinr: f64,
        correlation: f64,
        next_state: Arc<StateMatrix>,
        rng: &mut R,
    ) -> Result<(f64, Option<f64>), PolicyError> {
        let reward = self.reward(sinr, correlation);
        let Some((state, action)) = self.pending.take() else {
            return Ok((reward, None));
        };
        let loss = self.learner.learn(Experience { state, action, reward, next_state }, rng)?;
        Ok((reward, loss))
    }
}
