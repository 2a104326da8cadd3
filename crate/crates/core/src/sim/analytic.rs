//! Coverage studies that need no event loop: the VoIP repetition table and
//! the uplink coverage per initial MCS.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::mac::{aggregation_factor, derive_timeline, RepetitionConfig, TbsTable, VOICE_PERIOD_MS};
use crate::radio::{mcl_search, BlerModel, Coverage, CoverageQuery, RepetitionLadder};
use crate::Direction;

/// One row of the VoIP coverage table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VoipCoverageRow {
    pub rl_pusch: u32,
    pub aggregation: u32,
    pub tbs_bits: u32,
    pub attempts: u32,
    /// Best MCS for coverage, or `None` if no MCS meets the target.
    pub mcs: Option<u8>,
    pub mcl_db: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VoipCoverageSetup {
    pub rl_mpdcch: u32,
    pub voice_bits: u32,
    pub budget_ms: u64,
    pub tx_power_dbm: f64,
    /// Attempts per transport block; the budget may allow fewer.
    pub max_attempts: u32,
}

impl Default for VoipCoverageSetup {
    fn default() -> Self {
        Self { rl_mpdcch: 8, voice_bits: 320, budget_ms: 200, tx_power_dbm: 20.0, max_attempts: 4 }
    }
}

/// Uplink VoIP coverage for one PUSCH repetition length.
///
/// `k` voice frames are bundled per transport block, where `k` follows from
/// the HARQ round trip. The oldest frame in a bundle has already waited
/// `(k - 1) * 20` ms when the grant goes out, so only the rest of the budget
/// is available for HARQ attempts. The coverage is the best over MCS.
pub fn voip_coverage(
    rl_pusch: u32,
    setup: &VoipCoverageSetup,
    model: &BlerModel,
    tbs: &TbsTable,
    ladder: &RepetitionLadder,
) -> Result<VoipCoverageRow> {
    let reps = RepetitionConfig::new(setup.rl_mpdcch, rl_pusch, 1);
    let tl = derive_timeline(Direction::Ul, reps, 0)?;
    let k = aggregation_factor(tl.cycle());
    let tbs_bits = k * setup.voice_bits;
    let budget = setup.budget_ms.saturating_sub(u64::from(k - 1) * VOICE_PERIOD_MS);
    let mut best: Option<(u8, f64, u32)> = None;
    for mcs in 0..model.mcs_count().min(tbs.mcs_count()) as u8 {
        let q = CoverageQuery {
            direction: Direction::Ul,
            reps,
            tbs_bits,
            mcs,
            tx_power_dbm: setup.tx_power_dbm,
            max_tx_power_dbm: setup.tx_power_dbm,
            delay_budget_ms: Some(budget),
            max_attempts: setup.max_attempts,
        };
        if let Coverage::Mcl { mcl_db, attempts, .. } = mcl_search(&q, model, tbs, ladder)? {
            if best.is_none_or(|b| mcl_db > b.1) {
                best = Some((mcs, mcl_db, attempts));
            }
        }
    }
    Ok(VoipCoverageRow {
        rl_pusch,
        aggregation: k,
        tbs_bits,
        attempts: best.map_or(0, |b| b.2),
        mcs: best.map(|b| b.0),
        mcl_db: best.map(|b| b.1),
    })
}

/// Uplink coverage of a fixed-size packet sent at one MCS with the given
/// data repetition, at full power with the default attempt count.
pub fn coverage_for_mcs(
    mcs: u8,
    packet_bits: u32,
    rl_data: u32,
    max_attempts: u32,
    tx_power_dbm: f64,
    model: &BlerModel,
    tbs: &TbsTable,
    ladder: &RepetitionLadder,
) -> Result<Coverage> {
    let q = CoverageQuery {
        direction: Direction::Ul,
        reps: RepetitionConfig::new(1, rl_data, 1),
        tbs_bits: packet_bits,
        mcs,
        tx_power_dbm,
        max_tx_power_dbm: tx_power_dbm,
        delay_budget_ms: None,
        max_attempts,
    };
    mcl_search(&q, model, tbs, ladder)
}
