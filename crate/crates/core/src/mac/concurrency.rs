//! How many HARQ processes a single UE can keep in flight.
//!
//! Each process repeats its timeline every `max(period, cycle)` TTIs. The
//! schedule is cyclic, so process starts are offsets modulo that length and
//! the first one can be pinned to 0. A depth-first search tries offsets in
//! increasing order and keeps the largest conflict-free set.

use serde::{Deserialize, Serialize};

use super::{derive_timeline, RepetitionConfig};
use crate::error::{Error, Result};
use crate::Direction;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Duplex {
    /// No simultaneous TX and RX, one idle TTI at every switch.
    Half,
    /// TX and RX may share a TTI; still one receive and one transmit chain.
    Full,
}

/// TTIs a process occupies, relative to its start: `(offset, transmit)`.
pub fn process_footprint(direction: Direction, reps: RepetitionConfig) -> Result<Vec<(u64, bool)>> {
    let tl = derive_timeline(direction, reps, 0)?;
    Ok(tl
        .ue_bookings()
        .into_iter()
        .flat_map(|(span, tx)| span.iter().map(move |t| (t, tx)))
        .collect())
}

#[derive(Clone)]
struct Bits(Vec<u64>);

impl Bits {
    fn new(n: usize) -> Self {
        Bits(vec![0; n.div_ceil(64)])
    }
    fn set(&mut self, i: usize) {
        self.0[i / 64] |= 1 << (i % 64);
    }
    fn intersects(&self, o: &Bits) -> bool {
        self.0.iter().zip(&o.0).any(|(a, b)| a & b != 0)
    }
    fn or(&mut self, o: &Bits) {
        for (a, b) in self.0.iter_mut().zip(&o.0) {
            *a |= b;
        }
    }
}

/// One process placed at some offset: its RX and TX TTIs and the TTIs where
/// the opposite direction would violate a guard.
#[derive(Clone)]
struct Placed {
    rx: Bits,
    tx: Bits,
    no_tx: Bits,
    no_rx: Bits,
}

fn place(footprint: &[(u64, bool)], offset: u64, len: u64) -> Placed {
    let n = len as usize;
    let mut p = Placed { rx: Bits::new(n), tx: Bits::new(n), no_tx: Bits::new(n), no_rx: Bits::new(n) };
    for &(t, tx) in footprint {
        let i = ((t + offset) % len) as usize;
        let before = (i + n - 1) % n;
        let after = (i + 1) % n;
        if tx {
            p.tx.set(i);
            p.no_rx.set(before);
            p.no_rx.set(after);
        } else {
            p.rx.set(i);
            p.no_tx.set(before);
            p.no_tx.set(after);
        }
    }
    p
}

impl Placed {
    fn self_consistent(&self, duplex: Duplex) -> bool {
        duplex == Duplex::Full
            || !(self.rx.intersects(&self.tx) || self.rx.intersects(&self.no_rx) || self.tx.intersects(&self.no_tx))
    }

    fn fits(&self, acc: &Placed, duplex: Duplex) -> bool {
        if self.rx.intersects(&acc.rx) || self.tx.intersects(&acc.tx) {
            return false;
        }
        duplex == Duplex::Full
            || !(self.rx.intersects(&acc.tx)
                || self.tx.intersects(&acc.rx)
                || self.rx.intersects(&acc.no_rx)
                || self.tx.intersects(&acc.no_tx)
                || acc.rx.intersects(&self.no_rx)
                || acc.tx.intersects(&self.no_tx))
    }

    fn merge(&mut self, o: &Placed) {
        self.rx.or(&o.rx);
        self.tx.or(&o.tx);
        self.no_tx.or(&o.no_tx);
        self.no_rx.or(&o.no_rx);
    }
}

/// Length of the cyclic schedule: the requested period, stretched to the
/// process round trip when that is longer.
pub fn schedule_length(direction: Direction, reps: RepetitionConfig, period_ms: u64) -> Result<u64> {
    let cycle = derive_timeline(direction, reps, 0)?.cycle();
    Ok(period_ms.max(cycle))
}

/// Largest number of HARQ processes that can run concurrently, each
/// repeating every `max(period_ms, cycle)` TTIs.
pub fn max_concurrent_harq(
    rl_mpdcch: u32,
    rl_data: u32,
    rl_ack: u32,
    direction: Direction,
    period_ms: u64,
    duplex: Duplex,
) -> Result<u32> {
    if period_ms == 0 {
        return Err(Error::input("period_ms must be >= 1"));
    }
    let reps = RepetitionConfig::new(rl_mpdcch, rl_data, rl_ack);
    let footprint = process_footprint(direction, reps)?;
    let len = schedule_length(direction, reps, period_ms)?;
    let candidates: Vec<Placed> = (0..len).map(|o| place(&footprint, o, len)).collect();
    if !candidates[0].self_consistent(duplex) {
        return Ok(0);
    }
    let per_process = footprint.len() as u64;
    // one receive and one transmit chain: each direction's TTIs are disjoint
    let rx_load = footprint.iter().filter(|f| !f.1).count() as u64;
    let tx_load = per_process - rx_load;
    let bound = [rx_load, tx_load]
        .into_iter()
        .filter(|&l| l > 0)
        .map(|l| len / l)
        .min()
        .unwrap_or(len) as u32;

    let mut best = 1;
    let mut acc = candidates[0].clone();
    dfs(&candidates, 1, 1, &mut acc, duplex, bound, &mut best);
    Ok(best)
}

fn dfs(c: &[Placed], from: usize, depth: u32, acc: &mut Placed, duplex: Duplex, bound: u32, best: &mut u32) {
    *best = (*best).max(depth);
    if *best >= bound {
        return;
    }
    for i in from..c.len() {
        // not enough offsets left to beat the current best
        if depth + (c.len() - i) as u32 <= *best {
            return;
        }
        if c[i].fits(acc, duplex) {
            let saved = acc.clone();
            acc.merge(&c[i]);
            dfs(c, i + 1, depth + 1, acc, duplex, bound, best);
            *acc = saved;
            if *best >= bound {
                return;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const RLS: [u32; 6] = [1, 2, 4, 8, 16, 32];

    #[derive(Clone, Copy, PartialEq)]
    enum Use {
        Rx,
        Tx,
    }

    /// Tries every subset of offsets of a given size, largest first,
    /// checking occupancy TTI by TTI.
    fn oracle(rm: u32, rd: u32, ra: u32, dir: Direction, period: u64, duplex: Duplex) -> u32 {
        let tl = derive_timeline(dir, RepetitionConfig::new(rm, rd, ra), 0).unwrap();
        let mut uses = Vec::new();
        for t in tl.mpdcch.iter() {
            uses.push((t, Use::Rx));
        }
        for t in tl.data.iter() {
            uses.push((t, if dir == Direction::Ul { Use::Tx } else { Use::Rx }));
        }
        if let Some(a) = tl.ack {
            for t in a.iter() {
                uses.push((t, Use::Tx));
            }
        }
        let len = period.max(tl.next_grant) as usize;
        let ok = |offsets: &[usize]| -> bool {
            let mut rx = vec![0u32; len];
            let mut tx = vec![0u32; len];
            for &o in offsets {
                for &(t, u) in &uses {
                    let i = (t as usize + o) % len;
                    match u {
                        Use::Rx => rx[i] += 1,
                        Use::Tx => tx[i] += 1,
                    }
                }
            }
            for i in 0..len {
                if rx[i] > 1 || tx[i] > 1 {
                    return false;
                }
                if duplex == Duplex::Half {
                    if rx[i] > 0 && tx[i] > 0 {
                        return false;
                    }
                    let next = (i + 1) % len;
                    if (rx[i] > 0 && tx[next] > 0) || (tx[i] > 0 && rx[next] > 0) {
                        return false;
                    }
                }
            }
            true
        };
        // pigeonhole: one receive and one transmit chain
        let rx_n = uses.iter().filter(|u| u.1 == Use::Rx).count();
        let tx_n = uses.len() - rx_n;
        let max_k = [rx_n, tx_n].into_iter().filter(|&n| n > 0).map(|n| len / n).min().unwrap();
        for k in (1..=max_k).rev() {
            if any_subset(len, k, &mut Vec::new(), 0, &ok) {
                return k as u32;
            }
        }
        0
    }

    fn any_subset(len: usize, k: usize, chosen: &mut Vec<usize>, from: usize, ok: &dyn Fn(&[usize]) -> bool) -> bool {
        if chosen.len() == k {
            return ok(chosen);
        }
        for o in from..len {
            chosen.push(o);
            let found = any_subset(len, k, chosen, o + 1, ok);
            chosen.pop();
            if found {
                return true;
            }
        }
        false
    }

    #[test]
    fn three_uplink_processes_every_eight_ms() {
        assert_eq!(max_concurrent_harq(1, 1, 1, Direction::Ul, 8, Duplex::Half).unwrap(), 3);
        assert_eq!(max_concurrent_harq(1, 1, 1, Direction::Ul, 8, Duplex::Full).unwrap(), 8);
    }

    #[test]
    fn data_filling_the_period_leaves_one() {
        for rd in [8, 16, 32] {
            assert_eq!(max_concurrent_harq(1, rd, 1, Direction::Ul, 8, Duplex::Half).unwrap(), 1);
            assert_eq!(max_concurrent_harq(1, rd, 1, Direction::Dl, 8, Duplex::Half).unwrap(), 1);
        }
    }

    #[test]
    fn bad_inputs() {
        assert!(max_concurrent_harq(3, 1, 1, Direction::Ul, 8, Duplex::Half).is_err());
        assert!(max_concurrent_harq(1, 1, 1, Direction::Ul, 0, Duplex::Half).is_err());
    }

    #[test]
    fn oracle_agrees_on_small_cases() {
        assert_eq!(oracle(1, 1, 1, Direction::Ul, 8, Duplex::Half), 3);
        assert_eq!(oracle(1, 1, 1, Direction::Ul, 8, Duplex::Full), 8);
    }

    #[test]
    fn matches_oracle_for_every_ladder_combination() {
        for dir in Direction::BOTH {
            for duplex in [Duplex::Half, Duplex::Full] {
                for rm in RLS {
                    for rd in RLS {
                        let acks: &[u32] = if dir == Direction::Dl { &RLS } else { &[1] };
                        for &ra in acks {
                            let got = max_concurrent_harq(rm, rd, ra, dir, 8, duplex).unwrap();
                            let want = oracle(rm, rd, ra, dir, 8, duplex);
                            assert_eq!(got, want, "{dir} {duplex:?} rm={rm} rd={rd} ra={ra}");
                        }
                    }
                }
            }
        }
    }
}
