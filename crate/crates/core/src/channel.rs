use std::fmt;

use serde::{Deserialize, Serialize};

/// A 1-based channel number within a band of `N` channels.
///
/// Absent observations (no detection, unfilled history) are modelled as
/// `Option<Channel>::None` rather than a magic value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Channel(u16);

impl Channel {
    /// Builds a channel from its 1-based number, checking it against the band size.
    pub fn new(number: usize, num_channels: usize) -> Option<Self> {
        (1..=num_channels).contains(&number).then(|| Channel(number as u16))
    }

    /// Builds a channel from a 0-based array index.
    pub fn from_index(index: usize) -> Self {
        Channel((index + 1) as u16)
    }

    /// 1-based channel number.
    pub fn number(self) -> usize {
        self.0 as usize
    }

    /// 0-based index, for addressing per-channel vectors.
    pub fn index(self) -> usize {
        self.0 as usize - 1
    }

    /// Signed difference `self - other` in channel numbers.
    pub fn offset_from(self, other: Channel) -> i64 {
        self.0 as i64 - other.0 as i64
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Index of the largest value, lowest index on ties. `None` for an empty slice.
pub(crate) fn argmax(values: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &v) in values.iter().enumerate() {
        match best {
            Some((_, b)) if v <= b => {}
            _ => best = Some((i, v)),
        }
    }
    best.map(|(i, _)| i)
}
