//! Exploration helpers shared by the learning user and the learning jammer.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{argmax, Channel};

/// Linear decay from `start` to `end` over `decay_slots`, then constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpsilonSchedule {
    pub start: f64,
    pub end: f64,
    pub decay_slots: u64,
}

impl EpsilonSchedule {
    pub fn constant(eps: f64) -> Self {
        Self { start: eps, end: eps, decay_slots: 0 }
    }

    pub fn at(&self, slot: u64) -> f64 {
        if slot >= self.decay_slots {
            self.end
        } else {
            let frac = slot as f64 / self.decay_slots as f64;
            self.start + (self.end - self.start) * frac
        }
    }

    pub fn is_valid(&self) -> bool {
        (0.0..=1.0).contains(&self.start) && (0.0..=1.0).contains(&self.end)
    }
}

/// With probability `epsilon` a uniform channel, otherwise the argmax
/// (lowest index on ties).
pub fn epsilon_greedy<R: Rng + ?Sized>(values: &[f64], epsilon: f64, rng: &mut R) -> Channel {
    assert!(!values.is_empty(), "no actions to choose from");
    if epsilon > 0.0 && rng.gen::<f64>() < epsilon {
        Channel::from_index(rng.gen_range(0..values.len()))
    } else {
        Channel::from_index(argmax(values).unwrap_or(0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn linear_schedule() {
        let s = EpsilonSchedule { start: 1.0, end: 0.05, decay_slots: 2000 };
        assert_eq!(s.at(0), 1.0);
        assert!((s.at(1000) - 0.525).abs() < 1e-12);
        assert_eq!(s.at(2000), 0.05);
        assert_eq!(s.at(50_000), 0.05);
        assert_eq!(EpsilonSchedule::constant(0.2).at(0), 0.2);
    }

    #[test]
    fn greedy_when_epsilon_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(epsilon_greedy(&[0.1, 0.9, 0.3], 0.0, &mut rng).number(), 2);
        assert_eq!(epsilon_greedy(&[0.5, 0.1, 0.2, 0.5], 0.0, &mut rng).number(), 1);
    }
}
