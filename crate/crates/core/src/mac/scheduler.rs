//! Per-TTI grant commitment.
//!
//! The engine proposes at most one grant per UE and direction; this module
//! orders the proposals by priority class and commits each one atomically
//! against the cell's resource grid and the UE's half-duplex calendar.
//! A proposal that does not fit is skipped for this TTI.

use std::collections::HashMap;

use super::{Grant, GrantPurpose};
use crate::error::Result;
use crate::grid::{Booked, Request, Reservation, ResourceGrid};
use crate::mac::Span;
use crate::ue::{Activity, HalfDuplexCalendar};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrantRequest {
    pub grant: Grant,
    /// Order inside the priority class; smaller goes first. For VoIP this
    /// is the budget slack, for bursty traffic the round-robin position.
    pub rank: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Committed {
    pub grant: Grant,
    pub reservations: Vec<Reservation>,
}

/// Where the scheduler finds each UE's calendar.
pub trait Calendars {
    fn calendar(&mut self, ue_id: u32) -> &mut HalfDuplexCalendar;
}

impl Calendars for HashMap<u32, HalfDuplexCalendar> {
    fn calendar(&mut self, ue_id: u32) -> &mut HalfDuplexCalendar {
        self.entry(ue_id).or_default()
    }
}

impl Calendars for Vec<HalfDuplexCalendar> {
    fn calendar(&mut self, ue_id: u32) -> &mut HalfDuplexCalendar {
        &mut self[ue_id as usize]
    }
}

/// Grid bookings a grant needs: MPDCCH units across its control span and
/// PRBs across its data span.
pub fn grid_requests(g: &Grant) -> Vec<(Span, Request)> {
    vec![
        (g.timeline.mpdcch, Request::MpdcchUnits(g.agl)),
        (g.timeline.data, Request::Prbs { direction: g.direction, count: g.n_prbs }),
    ]
}

/// UE-side bookings of a grant.
pub fn calendar_requests(g: &Grant) -> Vec<(Span, Activity)> {
    g.timeline
        .ue_bookings()
        .into_iter()
        .map(|(s, tx)| (s, if tx { Activity::Tx } else { Activity::Rx }))
        .collect()
}

/// Books a grant in the grid and the UE calendar, or nothing. On success the
/// chosen PRB mask is written back into the grant.
pub fn commit_grant(
    grid: &mut ResourceGrid,
    cal: &mut HalfDuplexCalendar,
    grant: &mut Grant,
) -> Result<Option<Vec<Reservation>>> {
    let owner = crate::grid::Owner { ue: grant.ue_id, process: Some(grant.process_id) };
    let Ok(res) = grid.reserve_all(&grid_requests(grant), owner)? else {
        return Ok(None);
    };
    if cal.book_all(&calendar_requests(grant))?.is_err() {
        for r in res.iter().rev() {
            grid.release(r);
        }
        return Ok(None);
    }
    for r in &res {
        if let Booked::Prbs { mask, .. } = r.booked {
            grant.prb_mask = mask;
        }
    }
    Ok(Some(res))
}

/// Commits proposals in order: retransmissions, then random access
/// responses and scheduling requests, then VoIP by slack, then bursty
/// traffic in round-robin order.
pub fn schedule_tti(
    grid: &mut ResourceGrid,
    calendars: &mut impl Calendars,
    mut requests: Vec<GrantRequest>,
) -> Result<Vec<Committed>> {
    requests.sort_by_key(|r| (class(r.grant.purpose), r.rank, r.grant.ue_id, r.grant.direction));
    let mut out = Vec::new();
    for mut r in requests {
        let cal = calendars.calendar(r.grant.ue_id);
        if let Some(reservations) = commit_grant(grid, cal, &mut r.grant)? {
            out.push(Committed { grant: r.grant, reservations });
        }
    }
    Ok(out)
}

fn class(p: GrantPurpose) -> u8 {
    match p {
        GrantPurpose::Retransmission => 0,
        GrantPurpose::RachResponse | GrantPurpose::SchedulingRequest => 1,
        GrantPurpose::Voip => 2,
        GrantPurpose::Bursty => 3,
    }
}
