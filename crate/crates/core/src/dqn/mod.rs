//! Deep Q-learning: state matrices, the Q network, experience replay,
//! TD targets, SGD training and the loss-based stop rule.

mod checkpoint;
mod network;

use std::collections::VecDeque;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::Channel;
pub use crate::explore::{epsilon_greedy as select_action, EpsilonSchedule};

pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use network::{Architecture, LayerSpec, QNetworkParams, Shape, Workspace};

#[derive(Debug, Error)]
pub enum DqnError {
    #[error("invalid architecture: {0}")]
    Architecture(String),
    #[error("state shape {found:?} does not match network input {expected:?}")]
    Shape { expected: (usize, usize), found: (usize, usize) },
    #[error("expected {expected} weights, found {found}")]
    WeightCount { expected: usize, found: usize },
    #[error("non-finite weight")]
    NonFinite,
    #[error("replay buffer holds {size} experiences, training starts at {required}")]
    NotReady { size: usize, required: usize },
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A `rows x cols` matrix of normalized spectrum samples: one row per
/// time slot (oldest first), one column per channel.
#[derive(Debug, Clone, PartialEq)]
pub struct StateMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl StateMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, DqnError> {
        if data.len() != rows * cols {
            return Err(DqnError::Shape { expected: (rows, cols), found: (data.len() / cols.max(1), cols) });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }
}

/// Affine map of dB samples from `[floor_db, ceil_db]` onto `[0, 1]`, clipped.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicRange {
    pub floor_db: f64,
    pub ceil_db: f64,
}

impl Default for DynamicRange {
    fn default() -> Self {
        Self { floor_db: -90.0, ceil_db: -10.0 }
    }
}

impl DynamicRange {
    pub fn normalize(&self, db: f64) -> f64 {
        ((db - self.floor_db) / (self.ceil_db - self.floor_db)).clamp(0.0, 1.0)
    }

    pub fn is_valid(&self) -> bool {
        self.floor_db.is_finite() && self.ceil_db.is_finite() && self.ceil_db > self.floor_db
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Experience {
    pub state: Arc<StateMatrix>,
    pub action: Channel,
    pub reward: f64,
    pub next_state: Arc<StateMatrix>,
}

/// Bounded FIFO of experiences; the oldest is evicted when full.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    items: VecDeque<Experience>,
    capacity: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self { items: VecDeque::with_capacity(capacity), capacity }
    }

    pub fn push(&mut self, e: Experience) {
        debug_assert_eq!(
            (e.state.rows(), e.state.cols()),
            (e.next_state.rows(), e.next_state.cols())
        );
        debug_assert!(e.reward.is_finite());
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(e);
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn get(&self, i: usize) -> Option<&Experience> {
        self.items.get(i)
    }

    /// Index drawn uniformly from the current contents.
    pub fn sample_index<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        rng.gen_range(0..self.items.len())
    }

    /// `batch` experiences drawn uniformly with replacement.
    pub fn sample<'a, R: Rng + ?Sized>(&'a self, batch: usize, rng: &mut R) -> Vec<&'a Experience> {
        (0..batch).map(|_| &self.items[self.sample_index(rng)]).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub gamma: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub replay_capacity: usize,
    pub train_start_size: usize,
    pub loss_threshold: f64,
    pub loss_window: usize,
    /// Train steps between target snapshots; 1 means the target is the
    /// parameter vector from just before each update.
    pub target_sync_interval: u64,
    /// Rescale any gradient whose L2 norm exceeds this.
    pub max_grad_norm: Option<f64>,
    pub epsilon: EpsilonSchedule,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            gamma: 0.8,
            learning_rate: 1e-3,
            batch_size: 32,
            replay_capacity: 2000,
            train_start_size: 200,
            loss_threshold: 0.05,
            loss_window: 50,
            target_sync_interval: 1,
            max_grad_norm: Some(100.0),
            epsilon: EpsilonSchedule { start: 1.0, end: 0.05, decay_slots: 2000 },
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), DqnError> {
        let bad = |m: &str| Err(DqnError::Config(m.to_string()));
        if !(0.0..1.0).contains(&self.gamma) {
            return bad("gamma must lie in [0, 1)");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if self.batch_size == 0 || self.replay_capacity == 0 || self.train_start_size == 0 {
            return bad("batch_size, replay_capacity and train_start_size must be positive");
        }
        if self.train_start_size > self.replay_capacity {
            return bad("train_start_size exceeds replay_capacity");
        }
        if !(self.loss_threshold >= 0.0) || self.loss_window == 0 {
            return bad("loss_threshold must be non-negative and loss_window positive");
        }
        if self.target_sync_interval == 0 {
            return bad("target_sync_interval must be positive");
        }
        if self.max_grad_norm.is_some_and(|m| !(m > 0.0)) {
            return bad("max_grad_norm must be positive");
        }
        if !self.epsilon.is_valid() {
            return bad("epsilon values must lie in [0, 1]");
        }
        Ok(())
    }
}

pub fn q_forward(params: &QNetworkParams, state: &StateMatrix) -> Result<Vec<f64>, DqnError> {
    params.forward(state, &mut Workspace::default())
}

/// `r + gamma * max_a Q(next_state, a; params_prev)`
pub fn td_target(
    reward: f64,
    next_state: &StateMatrix,
    params_prev: &QNetworkParams,
    gamma: f64,
) -> Result<f64, DqnError> {
    let q = q_forward(params_prev, next_state)?;
    Ok(reward + gamma * q.iter().copied().fold(f64::NEG_INFINITY, f64::max))
}

/// Scratch buffers for repeated training steps on one network.
#[derive(Debug, Default, Clone)]
pub struct Trainer {
    ws: Workspace,
    target_ws: Workspace,
    inputs: Vec<f64>,
    next_inputs: Vec<f64>,
    d_out: Vec<f64>,
    grad: Vec<f64>,
}

impl Trainer {
    pub fn new() -> Self {
        Self::default()
    }

    /// Mean squared TD error over `batch` and its gradient with respect to
    /// `params`. Targets come from `target`, held fixed.
    pub fn loss_and_gradient(
        &mut self,
        params: &QNetworkParams,
        target: &QNetworkParams,
        batch: &[&Experience],
        gamma: f64,
    ) -> Result<(f64, &[f64]), DqnError> {
        let b = batch.len();
        let n = params.num_actions();
        self.inputs.clear();
        self.next_inputs.clear();
        for e in batch {
            params.check_state(&e.state)?;
            target.check_state(&e.next_state)?;
            self.inputs.extend_from_slice(e.state.as_slice());
            self.next_inputs.extend_from_slice(e.next_state.as_slice());
        }
        let next_q = target.forward_batch(&self.next_inputs, b, &mut self.target_ws);
        let etas: Vec<f64> = batch
            .iter()
            .zip(next_q.chunks_exact(n))
            .map(|(e, q)| e.reward + gamma * q.iter().copied().fold(f64::NEG_INFINITY, f64::max))
            .collect();
        let q = params.forward_batch(&self.inputs, b, &mut self.ws);
        self.d_out.clear();
        self.d_out.resize(b * n, 0.0);
        let mut loss = 0.0;
        for (i, (e, eta)) in batch.iter().zip(&etas).enumerate() {
            let a = e.action.index();
            let diff = q[i * n + a] - eta;
            loss += diff * diff;
            self.d_out[i * n + a] = 2.0 * diff / b as f64;
        }
        loss /= b as f64;
        self.grad.clear();
        self.grad.resize(params.weights().len(), 0.0);
        params.backward_batch(&mut self.ws, &self.d_out, &mut self.grad);
        Ok((loss, &self.grad))
    }

    /// One SGD step on a uniformly sampled batch. The loss reported is the
    /// pre-update batch loss.
    pub fn train_step<R: Rng + ?Sized>(
        &mut self,
        params: &mut QNetworkParams,
        target: Option<&QNetworkParams>,
        buffer: &ReplayBuffer,
        config: &TrainConfig,
        rng: &mut R,
    ) -> Result<f64, DqnError> {
        if buffer.len() < config.train_start_size || buffer.is_empty() {
            return Err(DqnError::NotReady { size: buffer.len(), required: config.train_start_size });
        }
        let batch = buffer.sample(config.batch_size, rng);
        let snapshot;
        let target = match target {
            Some(t) => t,
            None => {
                snapshot = params.clone();
                &snapshot
            }
        };
        let (loss, _) = self.loss_and_gradient(params, target, &batch, config.gamma)?;
        if let Some(max) = config.max_grad_norm {
            let norm = self.grad.iter().map(|g| g * g).sum::<f64>().sqrt();
            if norm > max {
                let k = max / norm;
                self.grad.iter_mut().for_each(|g| *g *= k);
            }
        }
        params.sgd_update(&self.grad, config.learning_rate);
        Ok(loss)
    }
}

/// Moving-average stop rule; once inactive it stays inactive.
#[derive(Debug, Clone)]
pub struct TrainingMonitor {
    threshold: f64,
    window: usize,
    losses: VecDeque<f64>,
    active: bool,
}

impl TrainingMonitor {
    pub fn new(threshold: f64, window: usize) -> Self {
        assert!(window > 0);
        Self { threshold, window, losses: VecDeque::with_capacity(window), active: true }
    }

    /// Records a loss and returns whether training should continue.
    pub fn update(&mut self, loss: f64) -> bool {
        if !self.active {
            return false;
        }
        self.losses.push_back(loss);
        if self.losses.len() > self.window {
            self.losses.pop_front();
        }
        if self.moving_average().is_some_and(|avg| avg < self.threshold) {
            self.active = false;
        }
        self.active
    }

    pub fn active(&self) -> bool {
        self.active
    }

    pub fn moving_average(&self) -> Option<f64> {
        (self.losses.len() == self.window).then(|| self.losses.iter().sum::<f64>() / self.window as f64)
    }
}

/// A Q-network agent: ε-greedy acting, replay, training and the stop rule.
#[derive(Debug, Clone)]
pub struct DqnLearner {
    params: QNetworkParams,
    target: Option<QNetworkParams>,
    buffer: ReplayBuffer,
    trainer: Trainer,
    monitor: TrainingMonitor,
    config: TrainConfig,
    ws: Workspace,
    decisions: u64,
    train_steps: u64,
    last_loss: Option<f64>,
}

impl DqnLearner {
    pub fn new<R: Rng + ?Sized>(arch: Architecture, config: TrainConfig, rng: &mut R) -> Result<Self, DqnError> {
        config.validate()?;
        let params = QNetworkParams::glorot(arch, rng)?;
        Ok(Self::with_params(params, config))
    }

    pub fn with_params(params: QNetworkParams, config: TrainConfig) -> Self {
        Self {
            params,
            target: None,
            buffer: ReplayBuffer::new(config.replay_capacity),
            trainer: Trainer::new(),
            monitor: TrainingMonitor::new(config.loss_threshold, config.loss_window),
            ws: Workspace::default(),
            decisions: 0,
            train_steps: 0,
            last_loss: None,
            config,
        }
    }

    pub fn params(&self) -> &QNetworkParams {
        &self.params
    }

    pub fn training(&self) -> bool {
        self.monitor.active()
    }

    pub fn last_loss(&self) -> Option<f64> {
        self.last_loss
    }

    pub fn train_steps(&self) -> u64 {
        self.train_steps
    }

    pub fn buffer(&self) -> &ReplayBuffer {
        &self.buffer
    }

    pub fn epsilon(&self) -> f64 {
        if self.training() {
            self.config.epsilon.at(self.decisions)
        } else {
            0.0
        }
    }

    pub fn q_values(&mut self, state: &StateMatrix) -> Result<Vec<f64>, DqnError> {
        self.params.forward(state, &mut self.ws)
    }

    /// ε-greedy while training, greedy once frozen.
    pub fn act<R: Rng + ?Sized>(&mut self, state: &StateMatrix, rng: &mut R) -> Result<Channel, DqnError> {
        let eps = self.epsilon();
        self.decisions += 1;
        // Skip the forward pass when the action is certainly random.
        if eps >= 1.0 {
            return Ok(select_action(&vec![0.0; self.params.num_actions()], 1.0, rng));
        }
        let q = self.q_values(state)?;
        Ok(select_action(&q, eps, rng))
    }

    /// Stores the experience and, while training, runs one update.
    /// Returns the batch loss when an update happened.
    pub fn learn<R: Rng + ?Sized>(&mut self, experience: Experience, rng: &mut R) -> Result<Option<f64>, DqnError> {
        if !self.training() {
            return Ok(None);
        }
        self.buffer.push(experience);
        if self.buffer.len() < self.config.train_start_size {
            return Ok(None);
        }
        let interval = self.config.target_sync_interval;
        if interval > 1 && (self.target.is_none() || self.train_steps % interval == 0) {
            self.target = Some(self.params.clone());
        }
        let loss = self.trainer.train_step(&mut self.params, self.target.as_ref(), &self.buffer, &self.config, rng)?;
        self.train_steps += 1;
        self.last_loss = Some(loss);
        self.monitor.update(loss);
        Ok(Some(loss))
    }
}
