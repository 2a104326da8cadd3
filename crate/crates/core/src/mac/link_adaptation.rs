//! Outer-loop link adaptation and transport format selection.

use serde::{Deserialize, Serialize};

use super::TbsTable;
use crate::error::{Error, Result};
use crate::radio::BlerModel;

/// Bound on the outer-loop offset magnitude, dB.
pub const OLLA_OFFSET_LIMIT_DB: f64 = 10.0;

/// Outer-loop state for one UE and direction.
///
/// The offset is added to the SINR estimate before format selection. An ACK
/// on a first transmission raises it by `step_up_db`; a NACK lowers it by
/// `step_down_db = step_up_db * (1 - target) / target`, which makes the
/// long-run first-transmission NACK rate converge to `ibler_target`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkAdaptationState {
    pub ibler_target: f64,
    pub olla_offset_db: f64,
    pub step_up_db: f64,
    pub step_down_db: f64,
    pub initial_mcs: u8,
}

impl LinkAdaptationState {
    pub fn new(ibler_target: f64, step_up_db: f64, initial_mcs: u8) -> Result<Self> {
        if !(ibler_target > 0.0 && ibler_target < 1.0) {
            return Err(Error::config("link_adaptation.ibler_target", "must lie in (0, 1)"));
        }
        if !(step_up_db.is_finite() && step_up_db > 0.0) {
            return Err(Error::config("link_adaptation.step_up_db", "must be > 0"));
        }
        Ok(Self {
            ibler_target,
            olla_offset_db: 0.0,
            step_up_db,
            step_down_db: step_up_db * (1.0 - ibler_target) / ibler_target,
            initial_mcs,
        })
    }

    /// Forgets everything learned on this connection.
    pub fn reset(&mut self) {
        self.olla_offset_db = 0.0;
    }
}

/// Applies first-transmission feedback to the outer loop.
pub fn outer_loop_update(la: &mut LinkAdaptationState, ack: bool) -> f64 {
    let next = if ack {
        la.olla_offset_db + la.step_up_db
    } else {
        la.olla_offset_db - la.step_down_db
    };
    la.olla_offset_db = next.clamp(-OLLA_OFFSET_LIMIT_DB, OLLA_OFFSET_LIMIT_DB);
    la.olla_offset_db
}

/// A chosen transport format.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TxFormat {
    pub mcs: u8,
    pub n_prbs: u8,
    pub tbs_bits: u32,
    pub rl_data: u32,
    /// Predicted first-attempt BLER at the adjusted SINR.
    pub predicted_bler: f64,
    /// No format met the target even at the largest repetition offered.
    pub coverage_limited: bool,
}

/// Everything format selection needs besides the outer-loop state.
pub struct SelectionContext<'a> {
    pub bler: &'a BlerModel,
    pub tbs: &'a TbsTable,
    /// Repetition lengths the scheduler may pick from, ascending.
    pub rl_options: &'a [u32],
    pub max_tbs: u32,
}

/// Ordering key: fewest data TTIs to drain the queue, then fewer
/// repetitions, then more PRBs, then lower MCS. Smaller is cheaper.
pub fn format_cost(queue_bits: u32, rl: u32, mcs: u8, n_prbs: u8, tbs: u32) -> (u64, u32, i16, u8) {
    let blocks = u64::from(queue_bits.div_ceil(tbs));
    (blocks * u64::from(rl), rl, -i16::from(n_prbs), mcs)
}

/// Picks the cheapest `(rl, mcs, n_prbs)` whose predicted first-attempt BLER
/// at `sinr_for(n_prbs) + olla_offset` is within the iBLER target.
///
/// `sinr_for(n)` is the predicted per-PRB SINR when `n` PRBs are allocated;
/// it captures power splitting on a power-limited uplink.
pub fn select_transmission(
    sinr_for: impl Fn(u8) -> f64,
    la: &LinkAdaptationState,
    queue_bits: u32,
    ctx: &SelectionContext<'_>,
) -> Result<TxFormat> {
    if queue_bits == 0 {
        return Err(Error::input("queue_bits must be > 0"));
    }
    if ctx.rl_options.is_empty() {
        return Err(Error::input("no repetition lengths to choose from"));
    }
    let mcs_count = ctx.bler.mcs_count().min(ctx.tbs.mcs_count());
    let mut best: Option<((u64, u32, i16, u8), TxFormat)> = None;
    let mut fallback: Option<TxFormat> = None;
    let rl_max = *ctx.rl_options.iter().max().expect("non-empty");

    for n in 1..=ctx.tbs.max_prbs() {
        let s = sinr_for(n) + la.olla_offset_db;
        for &rl in ctx.rl_options {
            let eff = ctx.bler.combine(s, rl);
            for mcs in 0..mcs_count as u8 {
                let tbs = ctx.tbs.tbs(mcs, n, ctx.max_tbs)?;
                let p = ctx.bler.bler(eff, mcs, tbs)?;
                let fmt = TxFormat {
                    mcs,
                    n_prbs: n,
                    tbs_bits: tbs,
                    rl_data: rl,
                    predicted_bler: p,
                    coverage_limited: false,
                };
                if p <= la.ibler_target {
                    let key = format_cost(queue_bits, rl, mcs, n, tbs);
                    if best.as_ref().is_none_or(|(k, _)| key < *k) {
                        best = Some((key, fmt));
                    }
                } else if rl == rl_max
                    && fallback.as_ref().is_none_or(|f| {
                        p < f.predicted_bler || (p == f.predicted_bler && tbs > f.tbs_bits)
                    })
                {
                    fallback = Some(TxFormat { coverage_limited: true, ..fmt });
                }
            }
        }
    }
    Ok(match best {
        Some((_, f)) => f,
        None => fallback.expect("at least one format evaluated"),
    })
}
