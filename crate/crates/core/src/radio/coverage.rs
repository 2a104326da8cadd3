//! Maximum coupling loss search.
//!
//! Coverage is the largest coupling loss at which the residual BLER after
//! every HARQ attempt that fits the delay budget stays at or below 2%.
//! Attempt `j` soft-combines all `j * rl_data` repetitions received so far;
//! attempts are treated as independently faded, so the residual is the
//! product of the per-attempt error probabilities.

use serde::{Deserialize, Serialize};

use super::{noise_per_prb_dbm, BlerModel, RepetitionLadder, ENB_NOISE_FIGURE_DB, UE_NOISE_FIGURE_DB};
use crate::error::{Error, Result};
use crate::mac::{derive_timeline, RepetitionConfig, TbsTable};
use crate::Direction;

/// Residual BLER ceiling that defines coverage.
pub const RESIDUAL_BLER_TARGET: f64 = 0.02;

const SEARCH_LO_DB: f64 = 0.0;
const SEARCH_HI_DB: f64 = 250.0;
const SEARCH_TOL_DB: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverageQuery {
    pub direction: Direction,
    pub reps: RepetitionConfig,
    pub tbs_bits: u32,
    pub mcs: u8,
    /// Total transmit power over the allocated PRBs.
    pub tx_power_dbm: f64,
    /// Cap on the transmit power, checked against `tx_power_dbm`.
    pub max_tx_power_dbm: f64,
    pub delay_budget_ms: Option<u64>,
    pub max_attempts: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Coverage {
    /// Maximum coupling loss in dB.
    Mcl { mcl_db: f64, n_prbs: u8, attempts: u32 },
    /// The residual target cannot be met even at zero coupling loss, the TBS
    /// does not fit six PRBs at this MCS, or no attempt fits the budget.
    Infeasible,
}

impl Coverage {
    pub fn mcl_db(&self) -> Option<f64> {
        match self {
            Coverage::Mcl { mcl_db, .. } => Some(*mcl_db),
            Coverage::Infeasible => None,
        }
    }
}

/// Number of HARQ attempts whose data completes within `budget_ms` of the
/// first grant, capped at `max_attempts`.
pub fn harq_attempts_within(
    direction: Direction,
    reps: RepetitionConfig,
    budget_ms: Option<u64>,
    max_attempts: u32,
) -> Result<u32> {
    let tl = derive_timeline(direction, reps, 0)?;
    let Some(budget) = budget_ms else {
        return Ok(max_attempts);
    };
    let first = tl.data_latency();
    if first > budget {
        return Ok(0);
    }
    let extra = (budget - first) / tl.cycle();
    Ok(u32::try_from(extra + 1).unwrap_or(u32::MAX).min(max_attempts))
}

/// Residual block error after `attempts` HARQ attempts at per-transmission
/// SINR `sinr_db`.
pub fn residual_bler(
    model: &BlerModel,
    sinr_db: f64,
    rl_data: u32,
    attempts: u32,
    mcs: u8,
    tbs_bits: u32,
) -> Result<f64> {
    let mut p = 1.0;
    for j in 1..=attempts {
        p *= model.bler(model.combine(sinr_db, j * rl_data), mcs, tbs_bits)?;
    }
    Ok(p)
}

/// Bisects for the maximum coupling loss meeting the 2% residual target.
pub fn mcl_search(
    q: &CoverageQuery,
    model: &BlerModel,
    tbs_table: &TbsTable,
    ladder: &RepetitionLadder,
) -> Result<Coverage> {
    if q.tbs_bits == 0 {
        return Err(Error::input("tbs_bits must be > 0"));
    }
    if q.max_attempts == 0 {
        return Err(Error::input("max_attempts must be >= 1"));
    }
    if !q.tx_power_dbm.is_finite() || q.tx_power_dbm > q.max_tx_power_dbm {
        return Err(Error::input(format!(
            "tx power {} dBm exceeds maximum {} dBm",
            q.tx_power_dbm, q.max_tx_power_dbm
        )));
    }
    q.reps.validate(q.direction)?;
    ladder.check(q.reps.mpdcch)?;
    ladder.check(q.reps.data)?;
    if q.direction == Direction::Dl {
        ladder.check(q.reps.ack)?;
    }
    model.curve(q.mcs)?;

    let Some(n_prbs) = tbs_table.prbs_for(q.mcs, q.tbs_bits)? else {
        return Ok(Coverage::Infeasible);
    };
    let attempts = harq_attempts_within(q.direction, q.reps, q.delay_budget_ms, q.max_attempts)?;
    if attempts == 0 {
        return Ok(Coverage::Infeasible);
    }
    let nf = match q.direction {
        Direction::Ul => ENB_NOISE_FIGURE_DB,
        Direction::Dl => UE_NOISE_FIGURE_DB,
    };
    let per_prb_dbm = q.tx_power_dbm - 10.0 * f64::from(n_prbs).log10();
    let noise = noise_per_prb_dbm(nf);
    let residual = |cl: f64| {
        residual_bler(model, per_prb_dbm - cl - noise, q.reps.data, attempts, q.mcs, q.tbs_bits)
    };

    if residual(SEARCH_LO_DB)? > RESIDUAL_BLER_TARGET {
        return Ok(Coverage::Infeasible);
    }
    let (mut lo, mut hi) = (SEARCH_LO_DB, SEARCH_HI_DB);
    if residual(hi)? <= RESIDUAL_BLER_TARGET {
        return Ok(Coverage::Mcl { mcl_db: hi, n_prbs, attempts });
    }
    while hi - lo > SEARCH_TOL_DB {
        let mid = 0.5 * (lo + hi);
        if residual(mid)? <= RESIDUAL_BLER_TARGET {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Coverage::Mcl { mcl_db: lo, n_prbs, attempts })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(rl: u32, tbs: u32, mcs: u8) -> CoverageQuery {
        CoverageQuery {
            direction: Direction::Ul,
            reps: RepetitionConfig::new(8, rl, 1),
            tbs_bits: tbs,
            mcs,
            tx_power_dbm: 20.0,
            max_tx_power_dbm: 20.0,
            delay_budget_ms: Some(200),
            max_attempts: 4,
        }
    }

    #[test]
    fn attempts_fit_budget() {
        let r = RepetitionConfig::new(8, 32, 1);
        // first data ends at 8+3+32 = 43, cycle 46
        assert_eq!(harq_attempts_within(Direction::Ul, r, Some(43), 4).unwrap(), 1);
        assert_eq!(harq_attempts_within(Direction::Ul, r, Some(42), 4).unwrap(), 0);
        assert_eq!(harq_attempts_within(Direction::Ul, r, Some(43 + 46 * 2), 9).unwrap(), 3);
        assert_eq!(harq_attempts_within(Direction::Ul, r, None, 4).unwrap(), 4);
        assert_eq!(harq_attempts_within(Direction::Ul, r, Some(10_000), 4).unwrap(), 4);
    }

    #[test]
    fn residual_is_product() {
        let m = BlerModel::default();
        let p1 = m.bler(m.combine(0.0, 4), 3, 200).unwrap();
        let p2 = m.bler(m.combine(0.0, 8), 3, 200).unwrap();
        let r = residual_bler(&m, 0.0, 4, 2, 3, 200).unwrap();
        assert!((r - p1 * p2).abs() < 1e-15);
    }

    #[test]
    fn search_lands_on_target() {
        let m = BlerModel::default();
        let t = TbsTable::default();
        let l = RepetitionLadder::default();
        let c = mcl_search(&q(8, 320, 5), &m, &t, &l).unwrap();
        let Coverage::Mcl { mcl_db, n_prbs, attempts } = c else { panic!("infeasible") };
        let noise = noise_per_prb_dbm(ENB_NOISE_FIGURE_DB);
        let s = 20.0 - 10.0 * f64::from(n_prbs).log10() - mcl_db - noise;
        let r = residual_bler(&m, s, 8, attempts, 5, 320).unwrap();
        assert!((r - RESIDUAL_BLER_TARGET).abs() < 1e-6, "{r}");
    }

    #[test]
    fn zero_tbs_is_input_error() {
        let m = BlerModel::default();
        let t = TbsTable::default();
        let l = RepetitionLadder::default();
        assert!(matches!(mcl_search(&q(8, 0, 5), &m, &t, &l), Err(Error::Input(_))));
    }

    #[test]
    fn oversize_or_overpowered_queries() {
        let m = BlerModel::default();
        let t = TbsTable::default();
        let l = RepetitionLadder::default();
        // 5000 bits never fit six PRBs
        assert_eq!(mcl_search(&q(8, 5000, 5), &m, &t, &l).unwrap(), Coverage::Infeasible);
        let mut hot = q(8, 320, 5);
        hot.tx_power_dbm = 23.0;
        assert!(mcl_search(&hot, &m, &t, &l).is_err());
        let mut off = q(8, 320, 5);
        off.reps.data = 3;
        assert!(mcl_search(&off, &m, &t, &l).is_err());
    }

    #[test]
    fn tiny_budget_is_infeasible() {
        let m = BlerModel::default();
        let t = TbsTable::default();
        let l = RepetitionLadder::default();
        let mut tight = q(32, 320, 5);
        tight.delay_budget_ms = Some(10);
        assert_eq!(mcl_search(&tight, &m, &t, &l).unwrap(), Coverage::Infeasible);
    }
}
