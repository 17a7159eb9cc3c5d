//! The slotted game between user and jammer.
//!
//! Each decision slot: the user commits a channel from what it has seen so
//! far; the jammer transmits on the channel it chose at the end of the
//! previous slot; both sense `sub_slots` frames; the jammer fuses its
//! sensing (mean linear SINR) into a detection and picks next slot's
//! channel; the user scores the slot and learns.

use std::collections::VecDeque;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::channel::Channel;
use crate::dqn::{DynamicRange, StateMatrix};
use crate::hiding::CorrelationTracker;
use crate::jammer::{detect_user_channel, FollowerState, Jammer, QJammerState};
use crate::policy::{
    estimate_jammer_channel, interference_dbm, reward_adrla, AfhState, DrlAgent, FhssState, PolicyError,
    PolicyKind,
};
use crate::scenario::{ConfigError, JammerKind, ScenarioConfig};
use crate::spectrum::{watts_to_dbm, EmitterSpec, RadioModel, SpectrumError, SpectrumFrame, Transmission};

#[derive(Debug, Error)]
pub enum ArenaError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Spectrum(#[from] SpectrumError),
}

/// Everything observable about one decision slot.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotLog {
    pub slot: u64,
    pub user: Channel,
    /// `None` when the scenario has no jammer.
    pub jammer: Option<Channel>,
    pub detection: Option<Channel>,
    /// Linear SINR at the user's receiver.
    pub sinr: f64,
    pub reward: f64,
    /// Lag correlation between the user's actions and the jammer actions it
    /// inferred from its received spectrum.
    pub correlation: f64,
    pub jammed: bool,
    pub training: bool,
    pub loss: Option<f64>,
}

/// Stacks the newest `rows` frames oldest-first into a normalized state;
/// missing history is zero rows at the top.
pub fn assemble_state<'a, I>(frames: I, rows: usize, cols: usize, range: &DynamicRange) -> StateMatrix
where
    I: IntoIterator<Item = &'a SpectrumFrame>,
    I::IntoIter: ExactSizeIterator + DoubleEndedIterator,
{
    let frames = frames.into_iter();
    let have = frames.len();
    let skip = have.saturating_sub(rows);
    let pad = rows.saturating_sub(have);
    let mut data = vec![0.0; rows * cols];
    for (r, f) in frames.skip(skip).enumerate() {
        let row = &mut data[(pad + r) * cols..(pad + r + 1) * cols];
        for (d, &s) in row.iter_mut().zip(&f.samples_dbm) {
            *d = range.normalize(s);
        }
    }
    StateMatrix::from_vec(rows, cols, data).expect("shape by construction")
}

enum UserPolicy {
    Fhss(FhssState),
    Afh(AfhState),
    Drl(Box<DrlAgent>),
}

/// A run in progress. The user side sees only frames, its SINR and its
/// own actions; the jammer side only its sensed SINRs.
pub struct Arena {
    config: ScenarioConfig,
    radio: RadioModel,
    user_emitter: EmitterSpec,
    jammer_emitter: EmitterSpec,
    env_emitters: Vec<EmitterSpec>,
    env_channels: Vec<Channel>,
    policy: UserPolicy,
    observer: CorrelationTracker,
    frames: VecDeque<SpectrumFrame>,
    state: Option<Arc<StateMatrix>>,
    last_interference: Option<Vec<f64>>,
    jammer: Option<Box<dyn Jammer>>,
    next_jam: Option<Channel>,
    rng: ChaCha8Rng,
    slot: u64,
}

impl std::fmt::Debug for Arena {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Arena").field("scenario", &self.config.name).field("slot", &self.slot).finish()
    }
}

/// Floor for interference estimates, far below any thermal noise.
const INTERFERENCE_FLOOR_DBM: f64 = -300.0;

impl Arena {
    pub fn new(config: ScenarioConfig) -> Result<Self, ArenaError> {
        config.validate()?;
        let radio = config.radio()?;
        let n = config.band.channels;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let policy = match config.user.policy {
            PolicyKind::Fhss => UserPolicy::Fhss(match config.fhss_pattern()? {
                Some(p) => FhssState::new(p)?,
                None => FhssState::generate(n, config.user.fhss.period, config.user.fhss.pattern_seed)?,
            }),
            PolicyKind::Afh => UserPolicy::Afh(AfhState::new(config.start_channel()?, n, config.user.afh)),
            kind => UserPolicy::Drl(Box::new(DrlAgent::new(
                kind,
                config.user.dqn.architecture(n),
                config.user.dqn.train.clone(),
                config.user.reward,
                &mut rng,
            )?)),
        };
        let mut jammer: Option<Box<dyn Jammer>> = match config.jammer.kind {
            JammerKind::None => None,
            JammerKind::Follower => Some(Box::new(FollowerState::new(n))),
            JammerKind::Qlearning => Some(Box::new(QJammerState::new(n, config.jammer.qlearning))),
        };
        let next_jam = jammer.as_mut().map(|j| j.first_action(&mut rng));
        let env_emitters = (0..config.environment.len()).map(|i| config.env_emitter(i)).collect::<Result<_, _>>()?;
        Ok(Self {
            radio,
            user_emitter: config.user_emitter()?,
            jammer_emitter: config.jammer_emitter()?,
            env_emitters,
            env_channels: config.env_channels()?,
            policy,
            observer: config.user.reward.tracker().map_err(PolicyError::from)?,
            frames: VecDeque::with_capacity(config.user.dqn.history_frames),
            state: None,
            last_interference: None,
            jammer,
            next_jam,
            rng,
            slot: 0,
            config,
        })
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.config
    }

    pub fn slot(&self) -> u64 {
        self.slot
    }

    pub fn is_finished(&self) -> bool {
        self.slot >= self.config.decision_slots
    }

    /// Channels the environment currently occupies.
    pub fn env_channels(&self) -> &[Channel] {
        &self.env_channels
    }

    /// Jam-free, interference-free SINR on the best channel.
    pub fn best_sinr(&self) -> f64 {
        best_sinr(&self.radio, &self.user_emitter)
    }

    fn hop_environment(&mut self) {
        let n = self.config.band.channels;
        for (i, e) in self.config.environment.iter().enumerate() {
            if let Some(k) = e.hop_interval {
                if self.slot > 0 && self.slot % k == 0 {
                    self.env_channels[i] = Channel::from_index(self.rng.gen_range(0..n));
                }
            }
        }
    }

    fn current_state(&mut self) -> Arc<StateMatrix> {
        if let Some(s) = &self.state {
            return s.clone();
        }
        let s = Arc::new(self.assemble());
        self.state = Some(s.clone());
        s
    }

    fn assemble(&self) -> StateMatrix {
        let d = &self.config.user.dqn;
        assemble_state(self.frames.iter(), d.history_frames, self.config.band.channels, &d.dynamic_range)
    }

    pub fn step(&mut self) -> Result<SlotLog, ArenaError> {
        self.hop_environment();
        let t = self.slot;
        let user_ch = match &mut self.policy {
            UserPolicy::Fhss(f) => f.decide(),
            UserPolicy::Afh(a) => a.decide(self.last_interference.as_deref()),
            UserPolicy::Drl(_) => {
                let s = self.current_state();
                let UserPolicy::Drl(agent) = &mut self.policy else { unreachable!() };
                agent.act(s, &mut self.rng)?
            }
        };
        let jam_ch = self.next_jam;
        let user_tx = Transmission::new(user_ch, self.user_emitter);
        let jam_tx = jam_ch.map(|c| Transmission::new(c, self.jammer_emitter));
        let env: Vec<Transmission> = self
            .env_channels
            .iter()
            .zip(&self.env_emitters)
            .map(|(&c, &e)| Transmission::new(c, e))
            .collect();

        let n = self.config.band.channels;
        let k = self.config.sub_slots as usize;
        let mut slot_frames = Vec::with_capacity(k);
        let mut sensed = vec![0.0; n];
        for s in 0..k {
            let frame = self.radio.receiver_spectrum_frame(Some(&user_tx), jam_tx.as_ref(), &env, t * k as u64 + s as u64)?;
            slot_frames.push(frame);
            if self.jammer.is_some() {
                let v = self.radio.jammer_sensed_sinr(Some(&user_tx), &env, self.config.jammer.self_jamming, jam_tx.as_ref())?;
                for (a, b) in sensed.iter_mut().zip(v) {
                    *a += b / k as f64;
                }
            }
        }
        let detection = match self.jammer {
            Some(_) => detect_user_channel(&sensed, &self.config.jammer.detection),
            None => None,
        };
        let sinr = self.radio.user_sinr(&user_tx, jam_tx.as_ref(), &env)?;
        if let Some(j) = self.jammer.as_mut() {
            self.next_jam = Some(j.react(detection, &mut self.rng));
        }

        let own = self.radio.own_contribution(&user_tx);
        let interference = interference_dbm(&slot_frames, &own, INTERFERENCE_FLOOR_DBM);
        let noise_dbm = watts_to_dbm(self.radio.noise_per_channel());
        let seen_jammer = estimate_jammer_channel(&interference, noise_dbm, self.config.user.reward.jammer_margin_db);
        self.observer.record(Some(user_ch), seen_jammer);
        let correlation = self.observer.correlation();

        let cap = self.config.user.dqn.history_frames;
        for f in slot_frames {
            if self.frames.len() == cap {
                self.frames.pop_front();
            }
            self.frames.push_back(f);
        }
        self.state = None;
        self.last_interference = Some(interference);

        let (reward, loss, training) = match &mut self.policy {
            UserPolicy::Drl(_) => {
                let next = self.current_state();
                let UserPolicy::Drl(agent) = &mut self.policy else { unreachable!() };
                let (r, loss) = agent.finish(sinr, correlation, next, &mut self.rng)?;
                (r, loss, agent.learner().training())
            }
            _ => (reward_adrla(sinr), None, false),
        };

        self.slot += 1;
        Ok(SlotLog {
            slot: t,
            user: user_ch,
            jammer: jam_ch,
            detection,
            sinr,
            reward,
            correlation,
            jammed: jam_ch == Some(user_ch),
            training,
            loss,
        })
    }

    /// Runs the remaining slots.
    pub fn run_to_end(&mut self) -> Result<Vec<SlotLog>, ArenaError> {
        let remaining = self.config.decision_slots.saturating_sub(self.slot) as usize;
        let mut logs = Vec::with_capacity(remaining);
        while !self.is_finished() {
            logs.push(self.step()?);
        }
        Ok(logs)
    }
}

pub fn best_sinr(radio: &RadioModel, user: &EmitterSpec) -> f64 {
    radio
        .plan
        .channels()
        .filter_map(|c| radio.user_sinr(&Transmission::new(c, *user), None, &[]).ok())
        .fold(0.0, f64::max)
}

/// Runs a whole scenario.
pub fn run(config: ScenarioConfig) -> Result<Vec<SlotLog>, ArenaError> {
    Arena::new(config)?.run_to_end()
}
