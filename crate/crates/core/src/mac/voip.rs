//! VoIP packet aggregation and segmentation.
//!
//! A longer repetition stretches the HARQ round trip, so packets arriving
//! every 20 ms have to be bundled `k` at a time to keep up. When the bundle
//! outgrows the largest transport block it is cut into equal segments,
//! each sent as its own block.

use serde::{Deserialize, Serialize};

use super::{derive_timeline, RepetitionConfig};
use crate::error::{Error, Result};
use crate::{Direction, Tti};

/// Voice frame spacing during a talk spurt.
pub const VOICE_PERIOD_MS: u64 = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VoipPacket {
    pub id: usize,
    pub arrival: Tti,
    pub bits: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VoipBuild {
    /// Aggregation factor for this repetition setup.
    pub k: u32,
    /// Packets bundled into this transmission, oldest first.
    pub packets: Vec<usize>,
    /// Block sizes; more than one means the bundle was segmented.
    pub segments: Vec<u32>,
    /// Packets that cannot make the budget and should be dropped.
    pub violated: Vec<usize>,
}

impl VoipBuild {
    pub fn is_empty(&self) -> bool {
        self.packets.is_empty()
    }
}

/// Packets per HARQ transmission: `max(1, ceil(cycle / 20))`.
pub fn aggregation_factor(harq_cycle_ms: u64) -> u32 {
    harq_cycle_ms.div_ceil(VOICE_PERIOD_MS).max(1) as u32
}

/// Equal-size segments for `total` bits with no block above `max_tbs`.
pub fn segment_sizes(total: u32, max_tbs: u32) -> Vec<u32> {
    if total == 0 {
        return Vec::new();
    }
    let m = total.div_ceil(max_tbs);
    let base = total / m;
    let extra = total % m;
    (0..m).map(|i| base + u32::from(i < extra)).collect()
}

/// Decides what to send from `queue` (oldest first) at `now`.
///
/// Nothing is sent while fewer than `k` packets are waiting, unless the
/// oldest has already waited `(k - 1) * 20` ms. Completion is predicted
/// assuming the segments go out back to back on one process; a packet whose
/// age plus that completion exceeds `budget_ms` is reported as violated.
pub fn voip_build(
    queue: &[VoipPacket],
    now: Tti,
    direction: Direction,
    reps: RepetitionConfig,
    budget_ms: u64,
    max_tbs: u32,
) -> Result<VoipBuild> {
    if queue.is_empty() {
        return Err(Error::input("voip_build needs a non-empty queue"));
    }
    if max_tbs == 0 {
        return Err(Error::input("max_tbs must be > 0"));
    }
    let tl = derive_timeline(direction, reps, now)?;
    let k = aggregation_factor(tl.cycle());
    let mut out = VoipBuild { k, packets: Vec::new(), segments: Vec::new(), violated: Vec::new() };

    let mut live: Vec<&VoipPacket> = Vec::new();
    for p in queue {
        // even a lone single-block send would be late
        if now - p.arrival + tl.data_latency() > budget_ms {
            out.violated.push(p.id);
        } else {
            live.push(p);
        }
    }
    let Some(oldest) = live.first() else { return Ok(out) };
    let waited = now - oldest.arrival;
    if (live.len() as u32) < k && waited < u64::from(k - 1) * VOICE_PERIOD_MS {
        return Ok(out);
    }
    let take = live.len().min(k as usize);
    let mut chosen: Vec<&VoipPacket> = live[..take].to_vec();
    loop {
        let total: u32 = chosen.iter().map(|p| p.bits).sum();
        let segs = segment_sizes(total, max_tbs);
        let completion = tl.data_latency() + (segs.len() as u64 - 1) * tl.cycle();
        match chosen.iter().position(|p| now - p.arrival + completion > budget_ms) {
            None => {
                out.packets = chosen.iter().map(|p| p.id).collect();
                out.segments = segs;
                return Ok(out);
            }
            // shrink the bundle from the newest end; fewer segments finish sooner
            Some(_) if chosen.len() > 1 => {
                chosen.pop();
            }
            Some(_) => {
                out.violated.push(chosen[0].id);
                return Ok(out);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pk(id: usize, arrival: Tti, bits: u32) -> VoipPacket {
        VoipPacket { id, arrival, bits }
    }

    #[test]
    fn factor_from_cycle() {
        assert_eq!(aggregation_factor(40), 2);
        assert_eq!(aggregation_factor(20), 1);
        assert_eq!(aggregation_factor(8), 1);
        assert_eq!(aggregation_factor(41), 3);
        assert_eq!(aggregation_factor(0), 1);
    }

    #[test]
    fn segments_are_equal_and_bounded() {
        assert_eq!(segment_sizes(2160, 1000), vec![720, 720, 720]);
        assert_eq!(segment_sizes(1000, 1000), vec![1000]);
        assert_eq!(segment_sizes(1001, 1000), vec![501, 500]);
        assert!(segment_sizes(0, 1000).is_empty());
    }

    #[test]
    fn waits_for_k_packets() {
        // UL cycle with mpdcch 8, pusch 16: 8 + 16 + 6 = 30 ms -> k = 2
        let reps = RepetitionConfig::new(8, 16, 1);
        let q = [pk(0, 100, 320)];
        let b = voip_build(&q, 105, Direction::Ul, reps, 200, 1000).unwrap();
        assert_eq!(b.k, 2);
        assert!(b.is_empty());
        let q = [pk(0, 100, 320), pk(1, 120, 320)];
        let b = voip_build(&q, 120, Direction::Ul, reps, 200, 1000).unwrap();
        assert_eq!(b.packets, vec![0, 1]);
        assert_eq!(b.segments, vec![640]);
        // a lone packet goes once it has waited (k-1) periods
        let q = [pk(0, 100, 320)];
        let b = voip_build(&q, 120, Direction::Ul, reps, 200, 1000).unwrap();
        assert_eq!(b.packets, vec![0]);
    }

    #[test]
    fn sid_makes_a_bigger_bundle_and_segmentation() {
        let reps = RepetitionConfig::new(8, 32, 1);
        // cycle 46 -> k = 3
        let q = [pk(0, 0, 320), pk(1, 20, 320), pk(2, 40, 1520)];
        let b = voip_build(&q, 40, Direction::Ul, reps, 400, 1000).unwrap();
        assert_eq!(b.k, 3);
        assert_eq!(b.segments, vec![720, 720, 720]);
    }

    #[test]
    fn stale_packets_are_flagged() {
        let reps = RepetitionConfig::new(8, 32, 1);
        // data latency 8 + 3 + 32 = 43; 190 + 43 > 200. Two live packets
        // with k = 3 go once the oldest has waited 40 ms.
        let q = [pk(0, 0, 320), pk(1, 150, 320), pk(2, 170, 320)];
        let b = voip_build(&q, 190, Direction::Ul, reps, 200, 1000).unwrap();
        assert_eq!(b.violated, vec![0]);
        assert_eq!(b.packets, vec![1, 2]);
    }

    #[test]
    fn empty_queue_rejected() {
        assert!(voip_build(&[], 0, Direction::Ul, RepetitionConfig::new(1, 1, 1), 200, 1000).is_err());
    }
}
