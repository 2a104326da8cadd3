//! Subframe timing of one HARQ transmission: grant, data and feedback.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::{Direction, Tti};

/// Longest repetition any channel may use.
pub const MAX_REPETITIONS: u32 = 256;

/// PUSCH starts this many TTIs after the last MPDCCH subframe.
pub const UL_GRANT_TO_DATA: u64 = 4;
/// PDSCH starts this many TTIs after the last MPDCCH subframe.
pub const DL_GRANT_TO_DATA: u64 = 2;
/// HARQ-ACK on PUCCH starts this many TTIs after the last PDSCH subframe.
pub const DATA_TO_ACK: u64 = 4;
/// A new grant for the same process may start this many TTIs after the last
/// subframe of the previous feedback (PUSCH for UL, PUCCH for DL).
pub const FEEDBACK_TO_REGRANT: u64 = 4;

/// Half-open TTI range `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Span {
    pub start: Tti,
    pub end: Tti,
}

impl Span {
    pub fn new(start: Tti, len: u64) -> Self {
        Self { start, end: start + len }
    }

    pub fn len(&self) -> u64 {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    /// Last TTI covered. Panics on an empty span.
    pub fn last(&self) -> Tti {
        assert!(!self.is_empty(), "empty span has no last TTI");
        self.end - 1
    }

    pub fn contains(&self, t: Tti) -> bool {
        self.start <= t && t < self.end
    }

    pub fn iter(&self) -> std::ops::Range<Tti> {
        self.start..self.end
    }
}

/// Repetition lengths of the three channels involved in one HARQ round trip.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RepetitionConfig {
    pub mpdcch: u32,
    pub data: u32,
    /// PUCCH HARQ-ACK repetitions; unused for uplink.
    pub ack: u32,
}

impl RepetitionConfig {
    pub fn new(mpdcch: u32, data: u32, ack: u32) -> Self {
        Self { mpdcch, data, ack }
    }

    pub fn validate(&self, direction: Direction) -> Result<()> {
        let on_ladder = |r: u32| r.is_power_of_two() && r <= MAX_REPETITIONS;
        if !on_ladder(self.mpdcch) || !on_ladder(self.data) || (direction == Direction::Dl && !on_ladder(self.ack)) {
            return Err(Error::config(
                "repetitions",
                format!("repetition lengths must be powers of two in 1..={MAX_REPETITIONS}, got {self:?}"),
            ));
        }
        Ok(())
    }
}

/// Subframe occupancy of one grant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Timeline {
    pub direction: Direction,
    pub mpdcch: Span,
    /// PUSCH or PDSCH.
    pub data: Span,
    /// PUCCH HARQ-ACK, downlink only.
    pub ack: Option<Span>,
    /// Earliest TTI at which the same HARQ process may be granted again.
    pub next_grant: Tti,
}

impl Timeline {
    /// UE-side direction of every channel: `(span, ue_transmits)`.
    pub fn ue_bookings(&self) -> Vec<(Span, bool)> {
        let mut v = vec![(self.mpdcch, false)];
        match self.direction {
            Direction::Ul => v.push((self.data, true)),
            Direction::Dl => {
                v.push((self.data, false));
                if let Some(a) = self.ack {
                    v.push((a, true));
                }
            }
        }
        v
    }

    /// Latency from the grant start to the end of the data channel, in TTIs.
    pub fn data_latency(&self) -> u64 {
        self.data.end - self.mpdcch.start
    }

    /// Round-trip length until the process can be re-granted.
    pub fn cycle(&self) -> u64 {
        self.next_grant - self.mpdcch.start
    }
}

/// Lays out one HARQ transmission starting its MPDCCH at `start`.
pub fn derive_timeline(direction: Direction, reps: RepetitionConfig, start: Tti) -> Result<Timeline> {
    reps.validate(direction)?;
    let mpdcch = Span::new(start, u64::from(reps.mpdcch));
    Ok(match direction {
        Direction::Ul => {
            let data = Span::new(mpdcch.last() + UL_GRANT_TO_DATA, u64::from(reps.data));
            Timeline {
                direction,
                mpdcch,
                data,
                ack: None,
                next_grant: data.last() + FEEDBACK_TO_REGRANT,
            }
        }
        Direction::Dl => {
            let data = Span::new(mpdcch.last() + DL_GRANT_TO_DATA, u64::from(reps.data));
            let ack = Span::new(data.last() + DATA_TO_ACK, u64::from(reps.ack));
            Timeline {
                direction,
                mpdcch,
                data,
                ack: Some(ack),
                next_grant: ack.last() + FEEDBACK_TO_REGRANT,
            }
        }
    })
}

/// Length of one HARQ round trip in TTIs.
pub fn harq_cycle_ms(direction: Direction, reps: RepetitionConfig) -> Result<u64> {
    Ok(derive_timeline(direction, reps, 0)?.cycle())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uplink_single_repetition() {
        let t = derive_timeline(Direction::Ul, RepetitionConfig::new(1, 1, 1), 0).unwrap();
        assert_eq!(t.mpdcch, Span { start: 0, end: 1 });
        assert_eq!(t.data, Span { start: 4, end: 5 });
        assert_eq!(t.next_grant, 8);
        assert_eq!(t.cycle(), 8);
        assert!(t.ack.is_none());
    }

    #[test]
    fn downlink_pdsch_after_mpdcch() {
        let t = derive_timeline(Direction::Dl, RepetitionConfig::new(4, 8, 8), 100).unwrap();
        assert_eq!(t.mpdcch, Span { start: 100, end: 104 });
        // last MPDCCH subframe is 103; PDSCH starts 2 later and lasts 8
        assert_eq!(t.data, Span { start: 105, end: 113 });
        assert_eq!(t.ack, Some(Span { start: 116, end: 124 }));
        assert_eq!(t.next_grant, 127);
        assert_eq!(t.data_latency(), 13);
    }

    #[test]
    fn zero_repetition_rejected() {
        assert!(derive_timeline(Direction::Ul, RepetitionConfig::new(0, 1, 1), 0).is_err());
        assert!(derive_timeline(Direction::Ul, RepetitionConfig::new(1, 0, 1), 0).is_err());
        assert!(derive_timeline(Direction::Dl, RepetitionConfig::new(1, 1, 0), 0).is_err());
        // ack is irrelevant for uplink
        assert!(derive_timeline(Direction::Ul, RepetitionConfig::new(1, 1, 0), 0).is_ok());
    }

    #[test]
    fn cycle_formulas() {
        for (m, d, a) in [(1, 1, 1), (4, 8, 8), (2, 32, 4)] {
            let r = RepetitionConfig::new(m, d, a);
            assert_eq!(harq_cycle_ms(Direction::Ul, r).unwrap(), u64::from(m + d + 6));
            assert_eq!(harq_cycle_ms(Direction::Dl, r).unwrap(), u64::from(m + d + a + 7));
        }
    }

    #[test]
    fn ue_direction_switches_leave_a_gap() {
        for dir in [Direction::Ul, Direction::Dl] {
            let t = derive_timeline(dir, RepetitionConfig::new(2, 4, 2), 10).unwrap();
            let b = t.ue_bookings();
            for w in b.windows(2) {
                if w[0].1 != w[1].1 {
                    assert!(w[1].0.start >= w[0].0.end + 1);
                }
            }
        }
    }
}
