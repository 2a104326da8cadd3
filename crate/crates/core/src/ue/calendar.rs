//! Half-duplex occupancy calendar.
//!
//! A UE cannot transmit and receive in the same TTI, and needs one idle TTI
//! to retune when switching direction. Only `Tx` and `Rx` are stored; a
//! free TTI wedged between opposite directions is reported as `Guard`.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mac::Span;
use crate::Tti;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Slot {
    Free,
    Tx,
    Rx,
    Guard,
}

/// Direction of a UE-side booking.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activity {
    Tx,
    Rx,
}

impl Activity {
    fn slot(self) -> Slot {
        match self {
            Activity::Tx => Slot::Tx,
            Activity::Rx => Slot::Rx,
        }
    }

    fn opposite(self) -> Slot {
        match self {
            Activity::Tx => Slot::Rx,
            Activity::Rx => Slot::Tx,
        }
    }
}

/// First TTI that blocks a booking and what is there. `Guard` means the
/// TTI itself is free but touches an opposite-direction booking.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Conflict {
    pub tti: Tti,
    pub blocking: Slot,
}

#[derive(Debug, Clone, Default)]
pub struct HalfDuplexCalendar {
    base: Tti,
    slots: VecDeque<Slot>,
}

impl HalfDuplexCalendar {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn base(&self) -> Tti {
        self.base
    }

    fn raw(&self, t: Tti) -> Slot {
        if t < self.base {
            return Slot::Free;
        }
        self.slots.get((t - self.base) as usize).copied().unwrap_or(Slot::Free)
    }

    /// What the UE does at `t`.
    pub fn slot(&self, t: Tti) -> Slot {
        match self.raw(t) {
            Slot::Free => {
                let before = if t == 0 { Slot::Free } else { self.raw(t - 1) };
                let after = self.raw(t + 1);
                match (before, after) {
                    (Slot::Tx, Slot::Rx) | (Slot::Rx, Slot::Tx) => Slot::Guard,
                    _ => Slot::Free,
                }
            }
            s => s,
        }
    }

    /// Whether `span` could be booked for `act` right now.
    pub fn check(&self, span: Span, act: Activity) -> std::result::Result<(), Conflict> {
        for t in span.iter() {
            let here = self.raw(t);
            if here != Slot::Free {
                return Err(Conflict { tti: t, blocking: here });
            }
            let prev_clash = t > 0 && !span.contains(t - 1) && self.raw(t - 1) == act.opposite();
            let next_clash = !span.contains(t + 1) && self.raw(t + 1) == act.opposite();
            if prev_clash || next_clash {
                return Err(Conflict { tti: t, blocking: Slot::Guard });
            }
        }
        Ok(())
    }

    fn set(&mut self, span: Span, s: Slot) {
        for t in span.iter() {
            let i = (t - self.base) as usize;
            if i >= self.slots.len() {
                self.slots.resize(i + 1, Slot::Free);
            }
            self.slots[i] = s;
        }
    }

    fn validate(&self, span: Span) -> Result<()> {
        if span.is_empty() {
            return Err(Error::input("half-duplex booking needs a non-empty span"));
        }
        if span.start < self.base {
            return Err(Error::input(format!(
                "cannot book tti {} before calendar base {}",
                span.start, self.base
            )));
        }
        Ok(())
    }

    /// Books `span` for `act` if every TTI is free and no guard is violated.
    pub fn book(&mut self, span: Span, act: Activity) -> Result<std::result::Result<(), Conflict>> {
        self.validate(span)?;
        Ok(self.check(span, act).map(|()| self.set(span, act.slot())))
    }

    /// Books several spans together, or none of them.
    pub fn book_all(
        &mut self,
        reqs: &[(Span, Activity)],
    ) -> Result<std::result::Result<(), Conflict>> {
        for &(span, _) in reqs {
            self.validate(span)?;
        }
        for (i, &(span, act)) in reqs.iter().enumerate() {
            if let Err(c) = self.check(span, act) {
                for &(done, _) in &reqs[..i] {
                    self.set(done, Slot::Free);
                }
                return Ok(Err(c));
            }
            self.set(span, act.slot());
        }
        Ok(Ok(()))
    }

    /// Frees `span` (TTIs before the base are ignored).
    pub fn release(&mut self, span: Span) {
        let from = span.start.max(self.base);
        if from < span.end {
            self.set(Span { start: from, end: span.end }, Slot::Free);
        }
    }

    /// Forgets TTIs before `t`, reporting any TX/RX clash seen on the way.
    pub fn retire_before(&mut self, t: Tti) -> Option<Conflict> {
        let mut bad = None;
        while self.base < t {
            let s = self.slots.pop_front().unwrap_or(Slot::Free);
            let next = self.slots.front().copied().unwrap_or(Slot::Free);
            if bad.is_none() && adjacent_clash(s, next) {
                bad = Some(Conflict { tti: self.base + 1, blocking: s });
            }
            self.base += 1;
        }
        bad
    }

    /// Scans the tracked window for a TX directly next to an RX.
    pub fn audit(&self) -> Option<Conflict> {
        self.slots
            .iter()
            .zip(self.slots.iter().skip(1))
            .position(|(&a, &b)| adjacent_clash(a, b))
            .map(|i| Conflict { tti: self.base + i as u64 + 1, blocking: self.slots[i] })
    }

    /// True if no TTI in `span` is booked.
    pub fn is_free(&self, span: Span) -> bool {
        span.iter().all(|t| self.raw(t) == Slot::Free)
    }
}

fn adjacent_clash(a: Slot, b: Slot) -> bool {
    matches!((a, b), (Slot::Tx, Slot::Rx) | (Slot::Rx, Slot::Tx))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sp(start: Tti, len: u64) -> Span {
        Span::new(start, len)
    }

    #[test]
    fn pucch_blocks_downlink() {
        let mut c = HalfDuplexCalendar::new();
        let n = 100;
        c.book(sp(n, 8), Activity::Tx).unwrap().unwrap();
        let err = c.book(sp(n + 3, 1), Activity::Rx).unwrap().unwrap_err();
        assert_eq!(err, Conflict { tti: n + 3, blocking: Slot::Tx });
    }

    #[test]
    fn empty_calendar_accepts_anything() {
        let mut c = HalfDuplexCalendar::new();
        assert!(c.book(sp(5, 1), Activity::Rx).unwrap().is_ok());
        assert!(c.book(sp(9, 1), Activity::Tx).unwrap().is_ok());
        assert!(c.book(sp(0, 0), Activity::Tx).is_err());
    }

    #[test]
    fn switch_needs_one_guard() {
        let mut c = HalfDuplexCalendar::new();
        let n = 10;
        c.book(sp(n, 1), Activity::Tx).unwrap().unwrap();
        let err = c.book(sp(n + 1, 1), Activity::Rx).unwrap().unwrap_err();
        assert_eq!(err, Conflict { tti: n + 1, blocking: Slot::Guard });
        c.book(sp(n + 2, 1), Activity::Rx).unwrap().unwrap();
        assert_eq!(c.slot(n + 1), Slot::Guard);
        // same direction back to back is fine
        c.book(sp(n - 1, 1), Activity::Tx).unwrap().unwrap();
        assert_eq!(c.audit(), None);
    }

    #[test]
    fn batch_is_atomic() {
        let mut c = HalfDuplexCalendar::new();
        c.book(sp(20, 2), Activity::Tx).unwrap().unwrap();
        let r = c.book_all(&[(sp(10, 2), Activity::Rx), (sp(19, 1), Activity::Rx)]).unwrap();
        assert!(r.is_err());
        assert!(c.is_free(sp(10, 2)));
        // members of one batch must also respect each other
        let r = c.book_all(&[(sp(30, 1), Activity::Rx), (sp(31, 1), Activity::Tx)]).unwrap();
        assert_eq!(r, Err(Conflict { tti: 31, blocking: Slot::Guard }));
        assert!(c.is_free(sp(30, 1)));
    }

    #[test]
    fn retire_keeps_later_bookings() {
        let mut c = HalfDuplexCalendar::new();
        c.book(sp(3, 2), Activity::Rx).unwrap().unwrap();
        c.book(sp(8, 2), Activity::Tx).unwrap().unwrap();
        assert_eq!(c.retire_before(6), None);
        assert_eq!(c.slot(8), Slot::Tx);
        assert!(c.book(sp(4, 1), Activity::Tx).is_err());
    }

    proptest! {
        /// Random booking attempts never leave TX next to RX.
        #[test]
        fn never_tx_beside_rx(ops in prop::collection::vec((0u64..200, 1u64..12, any::<bool>()), 1..120)) {
            let mut c = HalfDuplexCalendar::new();
            let mut booked: Vec<(Span, Activity)> = Vec::new();
            for (start, len, tx) in ops {
                let act = if tx { Activity::Tx } else { Activity::Rx };
                if c.book(sp(start, len), act).unwrap().is_ok() {
                    booked.push((sp(start, len), act));
                }
            }
            prop_assert_eq!(c.audit(), None);
            // independent check from the accepted list
            for (i, (a, da)) in booked.iter().enumerate() {
                for (b, db) in &booked[i + 1..] {
                    prop_assert!(a.end <= b.start || b.end <= a.start, "overlap");
                    if da != db {
                        prop_assert!(a.end < b.start || b.end < a.start, "no guard");
                    }
                }
            }
        }

        #[test]
        fn release_round_trip(start in 0u64..50, len in 1u64..10) {
            let mut c = HalfDuplexCalendar::new();
            c.book(sp(100, 3), Activity::Rx).unwrap().unwrap();
            let before: Vec<Slot> = (0..120).map(|t| c.slot(t)).collect();
            c.book(sp(start, len), Activity::Tx).unwrap().unwrap();
            c.release(sp(start, len));
            let after: Vec<Slot> = (0..120).map(|t| c.slot(t)).collect();
            prop_assert_eq!(before, after);
        }
    }
}
