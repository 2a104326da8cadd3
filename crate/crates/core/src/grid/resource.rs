//! Per-TTI occupancy of one cell's narrowband.
//!
//! Each TTI tracks a 6-bit PRB mask per direction and the number of MPDCCH
//! aggregation units in use. Bookings cover a span of TTIs and are atomic:
//! either every TTI accepts the request or nothing changes.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::NARROWBAND_PRBS;
use crate::error::{Error, Result};
use crate::mac::Span;
use crate::{Direction, Tti};

/// MPDCCH aggregation units per TTI per narrowband.
pub const MPDCCH_UNITS: u8 = 24;

const FULL_MASK: u8 = (1 << NARROWBAND_PRBS) - 1;

/// Occupancy of one TTI.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TtiUsage {
    pub ul_prbs: u8,
    pub dl_prbs: u8,
    pub mpdcch_units: u8,
}

impl TtiUsage {
    pub fn prb_mask(&self, d: Direction) -> u8 {
        match d {
            Direction::Ul => self.ul_prbs,
            Direction::Dl => self.dl_prbs,
        }
    }

    fn prb_mask_mut(&mut self, d: Direction) -> &mut u8 {
        match d {
            Direction::Ul => &mut self.ul_prbs,
            Direction::Dl => &mut self.dl_prbs,
        }
    }

    pub fn prb_count(&self, d: Direction) -> u32 {
        self.prb_mask(d).count_ones()
    }
}

/// What a booking asks for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Request {
    /// `count` contiguous PRBs, the same ones in every TTI of the span.
    Prbs { direction: Direction, count: u8 },
    MpdcchUnits(u8),
}

/// Who holds a booking.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Owner {
    pub ue: u32,
    pub process: Option<u8>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Booked {
    Prbs { direction: Direction, mask: u8 },
    MpdcchUnits(u8),
}

/// A committed booking. Hand it back to [`ResourceGrid::release`] to undo.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reservation {
    pub span: Span,
    pub booked: Booked,
    pub owner: Owner,
}

/// The constraint that refused a booking.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Binding {
    Prbs,
    Mpdcch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rejection {
    pub binding: Binding,
    pub tti: Tti,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Booking {
    Accepted(Reservation),
    Rejected(Rejection),
}

/// Occupancy window for one cell, from `base` onwards.
#[derive(Debug, Clone, Default)]
pub struct ResourceGrid {
    base: Tti,
    slots: VecDeque<TtiUsage>,
}

impl ResourceGrid {
    pub fn new() -> Self {
        Self::default()
    }

    /// First TTI still tracked.
    pub fn base(&self) -> Tti {
        self.base
    }

    pub fn usage(&self, t: Tti) -> TtiUsage {
        if t < self.base {
            return TtiUsage::default();
        }
        self.slots.get((t - self.base) as usize).copied().unwrap_or_default()
    }

    fn slot_mut(&mut self, t: Tti) -> &mut TtiUsage {
        let i = (t - self.base) as usize;
        if i >= self.slots.len() {
            self.slots.resize(i + 1, TtiUsage::default());
        }
        &mut self.slots[i]
    }

    fn check_request(&self, span: Span, req: Request) -> Result<()> {
        if span.is_empty() {
            return Err(Error::input("reservation span must be non-empty"));
        }
        if span.start < self.base {
            return Err(Error::input(format!(
                "cannot book tti {} before the grid window starting at {}",
                span.start, self.base
            )));
        }
        match req {
            Request::Prbs { count, .. } if count == 0 || u16::from(count) > NARROWBAND_PRBS => {
                Err(Error::input(format!("PRB request must be 1..=6, got {count}")))
            }
            Request::MpdcchUnits(0) => Err(Error::input("MPDCCH request must be > 0 units")),
            _ => Ok(()),
        }
    }

    /// Finds room for `req` over `span` without mutating anything.
    fn find(&self, span: Span, req: Request) -> std::result::Result<Booked, Rejection> {
        match req {
            Request::MpdcchUnits(units) => {
                for t in span.iter() {
                    if self.usage(t).mpdcch_units + units > MPDCCH_UNITS {
                        return Err(Rejection { binding: Binding::Mpdcch, tti: t });
                    }
                }
                Ok(Booked::MpdcchUnits(units))
            }
            Request::Prbs { direction, count } => {
                let used = span.iter().fold(0u8, |m, t| m | self.usage(t).prb_mask(direction));
                let block = (1u8 << count) - 1;
                for shift in 0..=(NARROWBAND_PRBS as u8 - count) {
                    let mask = block << shift;
                    if used & mask == 0 {
                        return Ok(Booked::Prbs { direction, mask });
                    }
                }
                let tti = span
                    .iter()
                    .find(|&t| self.usage(t).prb_mask(direction) != 0)
                    .unwrap_or(span.start);
                Err(Rejection { binding: Binding::Prbs, tti })
            }
        }
    }

    fn apply(&mut self, span: Span, booked: Booked) {
        for t in span.iter() {
            let s = self.slot_mut(t);
            match booked {
                Booked::MpdcchUnits(u) => s.mpdcch_units += u,
                Booked::Prbs { direction, mask } => *s.prb_mask_mut(direction) |= mask,
            }
        }
    }

    /// Books `req` in every TTI of `span`, or nothing.
    pub fn reserve(&mut self, span: Span, req: Request, owner: Owner) -> Result<Booking> {
        self.check_request(span, req)?;
        Ok(match self.find(span, req) {
            Ok(booked) => {
                self.apply(span, booked);
                Booking::Accepted(Reservation { span, booked, owner })
            }
            Err(r) => Booking::Rejected(r),
        })
    }

    /// Books several requests atomically: on any rejection every earlier
    /// booking of the batch is rolled back.
    pub fn reserve_all(
        &mut self,
        reqs: &[(Span, Request)],
        owner: Owner,
    ) -> Result<std::result::Result<Vec<Reservation>, Rejection>> {
        for &(span, req) in reqs {
            self.check_request(span, req)?;
        }
        let mut done = Vec::with_capacity(reqs.len());
        for &(span, req) in reqs {
            match self.find(span, req) {
                Ok(booked) => {
                    self.apply(span, booked);
                    done.push(Reservation { span, booked, owner });
                }
                Err(rej) => {
                    for r in done.iter().rev() {
                        self.release(r);
                    }
                    return Ok(Err(rej));
                }
            }
        }
        Ok(Ok(done))
    }

    /// Undoes a reservation. TTIs already retired are skipped.
    pub fn release(&mut self, r: &Reservation) {
        let from = r.span.start.max(self.base);
        for t in from..r.span.end {
            let s = self.slot_mut(t);
            match r.booked {
                Booked::MpdcchUnits(u) => {
                    debug_assert!(s.mpdcch_units >= u);
                    s.mpdcch_units -= u;
                }
                Booked::Prbs { direction, mask } => {
                    debug_assert_eq!(*s.prb_mask_mut(direction) & mask, mask);
                    *s.prb_mask_mut(direction) &= !mask;
                }
            }
        }
    }

    /// Drops every TTI before `t`, returning their usage in order.
    pub fn retire_before(&mut self, t: Tti) -> Vec<TtiUsage> {
        let mut out = Vec::new();
        while self.base < t {
            out.push(self.slots.pop_front().unwrap_or_default());
            self.base += 1;
        }
        out
    }

    /// True when no TTI exceeds PRB or MPDCCH capacity.
    pub fn within_capacity(u: &TtiUsage) -> bool {
        u.mpdcch_units <= MPDCCH_UNITS && u.ul_prbs & !FULL_MASK == 0 && u.dl_prbs & !FULL_MASK == 0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const OWNER: Owner = Owner { ue: 1, process: None };

    #[test]
    fn full_aggregation_exhausts_pool() {
        let mut g = ResourceGrid::new();
        let s = Span::new(10, 1);
        let b = g.reserve(s, Request::MpdcchUnits(24), OWNER).unwrap();
        assert!(matches!(b, Booking::Accepted(_)));
        assert_eq!(g.usage(10).mpdcch_units, 24);
        let b2 = g.reserve(s, Request::MpdcchUnits(24), OWNER).unwrap();
        assert_eq!(b2, Booking::Rejected(Rejection { binding: Binding::Mpdcch, tti: 10 }));
        let b3 = g.reserve(s, Request::MpdcchUnits(2), OWNER).unwrap();
        assert!(matches!(b3, Booking::Rejected(_)));
    }

    #[test]
    fn mixed_aggregation_levels_fit() {
        let mut g = ResourceGrid::new();
        let s = Span::new(0, 1);
        for u in [8, 8, 4] {
            assert!(matches!(g.reserve(s, Request::MpdcchUnits(u), OWNER).unwrap(), Booking::Accepted(_)));
        }
        assert_eq!(g.usage(0).mpdcch_units, 20);
    }

    #[test]
    fn zero_request_is_input_error() {
        let mut g = ResourceGrid::new();
        assert!(g.reserve(Span::new(0, 1), Request::MpdcchUnits(0), OWNER).is_err());
        let zero_prbs = Request::Prbs { direction: Direction::Ul, count: 0 };
        assert!(g.reserve(Span::new(0, 1), zero_prbs, OWNER).is_err());
        assert!(g.reserve(Span::new(0, 0), Request::MpdcchUnits(1), OWNER).is_err());
    }

    #[test]
    fn repeated_mpdcch_consumes_every_tti() {
        let mut g = ResourceGrid::new();
        let span = Span::new(5, 4);
        g.reserve(span, Request::MpdcchUnits(16), OWNER).unwrap();
        for t in 5..9 {
            assert_eq!(g.usage(t).mpdcch_units, 16);
        }
        assert_eq!(g.usage(9).mpdcch_units, 0);
        // a request overlapping only the last TTI is still blocked
        let r = g.reserve(Span::new(8, 2), Request::MpdcchUnits(16), OWNER).unwrap();
        assert_eq!(r, Booking::Rejected(Rejection { binding: Binding::Mpdcch, tti: 8 }));
    }

    #[test]
    fn prb_blocks_are_contiguous_and_stable_over_span() {
        let mut g = ResourceGrid::new();
        let ul = |count| Request::Prbs { direction: Direction::Ul, count };
        g.reserve(Span::new(0, 1), ul(2), OWNER).unwrap();
        let Booking::Accepted(r) = g.reserve(Span::new(0, 3), ul(3), OWNER).unwrap() else {
            panic!()
        };
        assert_eq!(r.booked, Booked::Prbs { direction: Direction::Ul, mask: 0b011100 });
        let rej = g.reserve(Span::new(1, 1), ul(4), OWNER).unwrap();
        assert!(matches!(rej, Booking::Rejected(Rejection { binding: Binding::Prbs, .. })));
        // downlink is an independent carrier
        let dl = Request::Prbs { direction: Direction::Dl, count: 6 };
        assert!(matches!(g.reserve(Span::new(0, 3), dl, OWNER).unwrap(), Booking::Accepted(_)));
    }

    #[test]
    fn batch_rolls_back_on_rejection() {
        let mut g = ResourceGrid::new();
        g.reserve(Span::new(3, 1), Request::MpdcchUnits(20), OWNER).unwrap();
        let before: Vec<_> = (0..6).map(|t| g.usage(t)).collect();
        let out = g
            .reserve_all(
                &[
                    (Span::new(0, 2), Request::Prbs { direction: Direction::Dl, count: 6 }),
                    (Span::new(2, 2), Request::MpdcchUnits(8)),
                ],
                OWNER,
            )
            .unwrap();
        assert_eq!(out, Err(Rejection { binding: Binding::Mpdcch, tti: 3 }));
        let after: Vec<_> = (0..6).map(|t| g.usage(t)).collect();
        assert_eq!(before, after);
    }

    #[test]
    fn retire_drops_history() {
        let mut g = ResourceGrid::new();
        g.reserve(Span::new(0, 3), Request::MpdcchUnits(4), OWNER).unwrap();
        let gone = g.retire_before(2);
        assert_eq!(gone.len(), 2);
        assert_eq!(g.base(), 2);
        assert_eq!(g.usage(1), TtiUsage::default());
        assert_eq!(g.usage(2).mpdcch_units, 4);
        assert!(g.reserve(Span::new(1, 1), Request::MpdcchUnits(1), OWNER).is_err());
    }

    fn arb_request() -> impl Strategy<Value = (u64, u64, Request)> {
        let req = prop_oneof![
            (1u8..=24).prop_map(Request::MpdcchUnits),
            (1u8..=6, any::<bool>()).prop_map(|(count, ul)| Request::Prbs {
                direction: if ul { Direction::Ul } else { Direction::Dl },
                count,
            }),
        ];
        (0u64..20, 1u64..6, req)
    }

    proptest! {
        #[test]
        fn reserve_release_round_trip(
            pre in proptest::collection::vec(arb_request(), 0..12),
            probe in arb_request(),
        ) {
            let mut g = ResourceGrid::new();
            for (s, l, r) in pre {
                g.reserve(Span::new(s, l), r, OWNER).unwrap();
            }
            let before: Vec<_> = (0..30).map(|t| g.usage(t)).collect();
            let (s, l, r) = probe;
            if let Booking::Accepted(res) = g.reserve(Span::new(s, l), r, OWNER).unwrap() {
                g.release(&res);
            }
            let after: Vec<_> = (0..30).map(|t| g.usage(t)).collect();
            prop_assert_eq!(before, after);
        }

        #[test]
        fn never_over_capacity(reqs in proptest::collection::vec(arb_request(), 0..40)) {
            let mut g = ResourceGrid::new();
            for (s, l, r) in reqs {
                g.reserve(Span::new(s, l), r, OWNER).unwrap();
            }
            for t in 0..30 {
                prop_assert!(ResourceGrid::within_capacity(&g.usage(t)));
            }
        }
    }
}
