//! Per-window and per-run metrics over slot logs.

use crate::arena::SlotLog;
use crate::policy::reward_adrla;

/// Fraction of slots in which the jammer detected the user's true channel.
pub fn sensing_probability(logs: &[SlotLog]) -> f64 {
    fraction(logs, |l| l.detection == Some(l.user))
}

/// Mean of `log2(1 + sinr) / log2(1 + best_sinr)`, each term clipped to [0, 1].
pub fn normalized_throughput(logs: &[SlotLog], best_sinr: f64) -> f64 {
    let top = reward_adrla(best_sinr);
    mean(logs, |l| {
        if top > 0.0 {
            (reward_adrla(l.sinr) / top).clamp(0.0, 1.0)
        } else {
            0.0
        }
    })
}

/// Fraction of jammed slots.
pub fn jammed_fraction(logs: &[SlotLog]) -> f64 {
    fraction(logs, |l| l.jammed)
}

/// Share of the run, taken from the end, treated as converged.
pub const CONVERGED_SHARE: f64 = 0.2;

/// Jammed fraction over the final fifth of a run.
pub fn jammed_probability(logs: &[SlotLog]) -> f64 {
    jammed_fraction(converged_tail(logs))
}

pub fn converged_tail(logs: &[SlotLog]) -> &[SlotLog] {
    let n = logs.len();
    let keep = ((n as f64 * CONVERGED_SHARE).round() as usize).clamp(n.min(1), n);
    &logs[n - keep..]
}

pub fn mean_correlation(logs: &[SlotLog]) -> f64 {
    mean(logs, |l| l.correlation)
}

fn fraction(logs: &[SlotLog], pred: impl Fn(&SlotLog) -> bool) -> f64 {
    mean(logs, |l| if pred(l) { 1.0 } else { 0.0 })
}

fn mean(logs: &[SlotLog], f: impl Fn(&SlotLog) -> f64) -> f64 {
    if logs.is_empty() {
        return 0.0;
    }
    logs.iter().map(f).sum::<f64>() / logs.len() as f64
}

/// The four windowed metrics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsRow {
    pub window: usize,
    pub sensing_prob: f64,
    pub mean_r: f64,
    pub norm_throughput: f64,
    pub jammed_prob: f64,
}

impl MetricsRow {
    pub fn values(&self) -> [f64; 4] {
        [self.sensing_prob, self.mean_r, self.norm_throughput, self.jammed_prob]
    }
}

/// Consecutive windows of `size` slots; a trailing partial window is kept.
pub fn windowed(logs: &[SlotLog], size: usize, best_sinr: f64) -> Vec<MetricsRow> {
    assert!(size > 0, "window size must be positive");
    logs.chunks(size)
        .enumerate()
        .map(|(i, w)| MetricsRow {
            window: i,
            sensing_prob: sensing_probability(w),
            mean_r: mean_correlation(w),
            norm_throughput: normalized_throughput(w, best_sinr),
            jammed_prob: jammed_fraction(w),
        })
        .collect()
}
