//! The jammer's sense -> learn -> act loop: threshold detection of the user's
//! channel from sensed SINRs, a follower (reactive) jammer and a tabular
//! Q-learning jammer.
//!
//! Both jammers work in decision slots. After sensing slot `t` they are told
//! their detection for that slot and return the channel to jam in slot
//! `t + 1`, so the reaction delay is exactly one slot.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{argmax, Channel};
use crate::explore::{epsilon_greedy, EpsilonSchedule};
use crate::spectrum::linear_to_db;

/// Minimum sensed SINR (dB) at which the jammer declares the user present.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectionModel {
    pub threshold_db: f64,
}

impl Default for DetectionModel {
    fn default() -> Self {
        Self { threshold_db: 0.0 }
    }
}

/// Strongest sensed channel if it clears the threshold. An all-zero input
/// never yields a detection, whatever the threshold.
pub fn detect_user_channel(sensed: &[f64], model: &DetectionModel) -> Option<Channel> {
    let best = argmax(sensed)?;
    let peak = sensed[best];
    if peak > 0.0 && linear_to_db(peak) >= model.threshold_db {
        Some(Channel::from_index(best))
    } else {
        None
    }
}

/// Common interface the arena drives.
pub trait Jammer: Send {
    /// Channel for the very first slot, before anything was sensed.
    fn first_action(&mut self, rng: &mut dyn rand::RngCore) -> Channel;

    /// Ingests the detection made while jamming the slot that just ended
    /// and returns the channel for the next slot.
    fn react(&mut self, detection: Option<Channel>, rng: &mut dyn rand::RngCore) -> Channel;
}

/// Reactive jammer: jams wherever it last saw the user, or a uniformly
/// random channel when it saw nothing.
#[derive(Debug, Clone, PartialEq)]
pub struct FollowerState {
    pub last_detection: Option<Channel>,
    num_channels: usize,
}

impl FollowerState {
    pub fn new(num_channels: usize) -> Self {
        Self { last_detection: None, num_channels }
    }

    fn target<R: Rng + ?Sized>(&self, rng: &mut R) -> Channel {
        self.last_detection
            .unwrap_or_else(|| Channel::from_index(rng.gen_range(0..self.num_channels)))
    }

    /// Stream form: given the detection for the current slot, returns the
    /// channel jammed in that slot (decided from the previous detection) and
    /// remembers the new one.
    pub fn decide<R: Rng + ?Sized>(&mut self, detection: Option<Channel>, rng: &mut R) -> Channel {
        let jam = self.target(rng);
        self.last_detection = detection;
        jam
    }
}

impl Jammer for FollowerState {
    fn first_action(&mut self, rng: &mut dyn rand::RngCore) -> Channel {
        self.target(rng)
    }

    fn react(&mut self, detection: Option<Channel>, rng: &mut dyn rand::RngCore) -> Channel {
        self.last_detection = detection;
        self.target(rng)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QJammerConfig {
    pub learning_rate: f64,
    pub discount: f64,
    pub epsilon: EpsilonSchedule,
}

impl Default for QJammerConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            discount: 0.8,
            epsilon: EpsilonSchedule { start: 0.3, end: 0.02, decay_slots: 2000 },
        }
    }
}

impl QJammerConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(format!("learning_rate {} outside (0, 1]", self.learning_rate));
        }
        if !(0.0..1.0).contains(&self.discount) {
            return Err(format!("discount {} outside [0, 1)", self.discount));
        }
        if !self.epsilon.is_valid() {
            return Err("epsilon values must lie in [0, 1]".into());
        }
        Ok(())
    }
}

/// Tabular Q-learning jammer. The state is the previous detection (or
/// none), the action is the channel to jam. Reward is 1 when the user is
/// detected on the jammed channel during the jammed slot.
#[derive(Debug, Clone, PartialEq)]
pub struct QJammerState {
    table: Vec<f64>,
    num_channels: usize,
    config: QJammerConfig,
    steps: u64,
    pending: Option<(Option<Channel>, Channel)>,
}

impl QJammerState {
    pub fn new(num_channels: usize, config: QJammerConfig) -> Self {
        Self {
            table: vec![0.0; (num_channels + 1) * num_channels],
            num_channels,
            config,
            steps: 0,
            pending: None,
        }
    }

    fn row(key: Option<Channel>) -> usize {
        key.map_or(0, |c| c.number())
    }

    pub fn values(&self, key: Option<Channel>) -> &[f64] {
        let r = Self::row(key) * self.num_channels;
        &self.table[r..r + self.num_channels]
    }

    pub fn q(&self, key: Option<Channel>, action: Channel) -> f64 {
        self.values(key)[action.index()]
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    pub fn epsilon(&self) -> f64 {
        self.config.epsilon.at(self.steps)
    }

    /// One-step Q update for `(prev_key, prev_action)` followed by an
    /// epsilon-greedy choice for `new_key`.
    pub fn step<R: Rng + ?Sized>(
        &mut self,
        prev_key: Option<Channel>,
        prev_action: Channel,
        reward: f64,
        new_key: Option<Channel>,
        rng: &mut R,
    ) -> Channel {
        let best_next = self.values(new_key).iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let idx = Self::row(prev_key) * self.num_channels + prev_action.index();
        let q = self.table[idx];
        self.table[idx] = q + self.config.learning_rate * (reward + self.config.discount * best_next - q);
        self.steps += 1;
        self.select(new_key, rng)
    }

    fn select<R: Rng + ?Sized>(&self, key: Option<Channel>, rng: &mut R) -> Channel {
        epsilon_greedy(self.values(key), self.epsilon(), rng)
    }
}

impl Jammer for QJammerState {
    fn first_action(&mut self, rng: &mut dyn rand::RngCore) -> Channel {
        let a = self.select(None, rng);
        self.pending = Some((None, a));
        a
    }

    fn react(&mut self, detection: Option<Channel>, rng: &mut dyn rand::RngCore) -> Channel {
        let (key, action) = self.pending.unwrap_or((None, Channel::from_index(0)));
        let reward = if detection == Some(action) { 1.0 } else { 0.0 };
        let next = self.step(key, action, reward, detection, rng);
        self.pending = Some((detection, next));
        next
    }
}
