//! Lag correlation between two channel-action sequences.
//!
//! For a lag `m`, every user action is paired with the jammer action `m`
//! decision slots later. The differences of the pairs are tallied; their
//! most frequent value is the distance bias `K`, and `rho(m)` is the fraction
//! of the window whose difference equals `K`. A jammer that copies the user
//! with a fixed delay (and possibly a fixed channel offset) scores 1 at that
//! delay. `R` is the maximum of `rho` over a lag range.
//!
//! Sequences are passed newest-first. A [`Window`] of length `L` with margin
//! `M` pairs `x[M + n]` with `y[M + n - m]` for `n in 0..L`, so lags up to
//! `M` can look forward in time without running off the recorded history.
//! Any pair that lands outside the data or on an empty slot is a mismatch.

use std::collections::{BTreeMap, VecDeque};

use thiserror::Error;

use crate::channel::Channel;

/// One decision slot of an action sequence; `None` is "no action known".
pub type Slot = Option<Channel>;

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("empty lag range [{min}, {max}]")]
    EmptyRange { min: i64, max: i64 },
    #[error("lag {lag} outside +/-{limit} for a window of length {len}")]
    LagTooLarge { lag: i64, limit: i64, len: usize },
    #[error("window length must be positive")]
    EmptyWindow,
}

/// Alignment of the comparison window inside newest-first histories.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Window {
    pub len: usize,
    pub margin: usize,
}

impl Window {
    pub fn new(len: usize, margin: usize) -> Result<Self, MetricError> {
        if len == 0 {
            return Err(MetricError::EmptyWindow);
        }
        Ok(Self { len, margin })
    }

    /// No margin: `x[n]` against `y[n - m]`.
    pub fn plain(len: usize) -> Self {
        Self { len: len.max(1), margin: 0 }
    }

    /// History length needed so that every lag in `range` resolves.
    pub fn required_history(&self, range: &LagRange) -> usize {
        self.margin + self.len + range.min.min(0).unsigned_abs() as usize
    }
}

/// Inclusive range of lags over which `R` is maximised.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LagRange {
    min: i64,
    max: i64,
}

impl LagRange {
    pub fn new(min: i64, max: i64, window_len: usize) -> Result<Self, MetricError> {
        if min > max {
            return Err(MetricError::EmptyRange { min, max });
        }
        let limit = window_len as i64 - 1;
        for lag in [min, max] {
            if lag.abs() > limit {
                return Err(MetricError::LagTooLarge { lag, limit, len: window_len });
            }
        }
        Ok(Self { min, max })
    }

    pub fn min(&self) -> i64 {
        self.min
    }

    pub fn max(&self) -> i64 {
        self.max
    }

    pub fn lags(&self) -> impl Iterator<Item = i64> {
        self.min..=self.max
    }
}

fn at(seq: &[Slot], idx: i64) -> Slot {
    if idx < 0 {
        None
    } else {
        seq.get(idx as usize).copied().flatten()
    }
}

/// The per-pair differences `x - y` at lag `lag`; `None` where either side is missing.
fn differences<'a>(
    x: &'a [Slot],
    y: &'a [Slot],
    lag: i64,
    window: Window,
) -> impl Iterator<Item = Option<i64>> + 'a {
    let base = window.margin as i64;
    (0..window.len as i64).map(move |n| {
        let xi = at(x, base + n)?;
        let yi = at(y, base + n - lag)?;
        Some(xi.offset_from(yi))
    })
}

/// The most frequent difference at lag `lag`. Ties go to the smallest
/// `|K|`, then the smallest signed `K`. `None` when no pair is complete.
pub fn distance_bias(x: &[Slot], y: &[Slot], lag: i64, window: Window) -> Option<i64> {
    let mut counts: BTreeMap<i64, usize> = BTreeMap::new();
    for z in differences(x, y, lag, window).flatten() {
        *counts.entry(z).or_default() += 1;
    }
    counts
        .into_iter()
        .max_by(|(ka, ca), (kb, cb)| {
            ca.cmp(cb)
                .then_with(|| kb.abs().cmp(&ka.abs()))
                .then_with(|| kb.cmp(ka))
        })
        .map(|(k, _)| k)
}

/// Fraction of the window whose difference equals the distance bias.
pub fn rho(x: &[Slot], y: &[Slot], lag: i64, window: Window) -> f64 {
    let Some(k) = distance_bias(x, y, lag, window) else {
        return 0.0;
    };
    let hits = differences(x, y, lag, window).filter(|z| *z == Some(k)).count();
    hits as f64 / window.len as f64
}

/// `R`: the largest `rho` over the lag range.
pub fn max_correlation(x: &[Slot], y: &[Slot], range: &LagRange, window: Window) -> f64 {
    range
        .lags()
        .map(|m| rho(x, y, m, window))
        .fold(0.0, f64::max)
}

/// Bounded history of one actor's channel choices, newest first.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionHistory {
    entries: VecDeque<Slot>,
    capacity: usize,
}

impl ActionHistory {
    pub fn new(capacity: usize) -> Self {
        Self { entries: VecDeque::with_capacity(capacity), capacity: capacity.max(1) }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn push(&mut self, slot: Slot) {
        if self.entries.len() == self.capacity {
            self.entries.pop_back();
        }
        self.entries.push_front(slot);
    }

    /// Entry `age` slots ago (0 = most recent); `None` if never recorded.
    pub fn get(&self, age: usize) -> Slot {
        self.entries.get(age).copied().flatten()
    }

    /// Full contents, newest first, padded with `None` to capacity.
    pub fn to_vec(&self) -> Vec<Slot> {
        let mut v: Vec<Slot> = self.entries.iter().copied().collect();
        v.resize(self.capacity, None);
        v
    }
}

/// Paired user/jammer histories plus the metric parameters, updated once per
/// decision slot.
#[derive(Debug, Clone)]
pub struct CorrelationTracker {
    user: ActionHistory,
    jammer: ActionHistory,
    window: Window,
    range: LagRange,
}

impl CorrelationTracker {
    pub fn new(window: Window, range: LagRange) -> Self {
        let cap = window.required_history(&range);
        Self { user: ActionHistory::new(cap), jammer: ActionHistory::new(cap), window, range }
    }

    pub fn record(&mut self, user: Slot, jammer: Slot) {
        self.user.push(user);
        self.jammer.push(jammer);
    }

    pub fn user_history(&self) -> &ActionHistory {
        &self.user
    }

    pub fn jammer_history(&self) -> &ActionHistory {
        &self.jammer
    }

    pub fn window(&self) -> Window {
        self.window
    }

    pub fn range(&self) -> &LagRange {
        &self.range
    }

    /// Current `R` over the recorded histories.
    pub fn correlation(&self) -> f64 {
        max_correlation(&self.user.to_vec(), &self.jammer.to_vec(), &self.range, self.window)
    }

    /// Same as [`correlation`](Self::correlation) with the jammer history
    /// replaced, e.g. by a permuted copy.
    pub fn correlation_against(&self, jammer: &ActionHistory) -> f64 {
        max_correlation(&self.user.to_vec(), &jammer.to_vec(), &self.range, self.window)
    }
}
