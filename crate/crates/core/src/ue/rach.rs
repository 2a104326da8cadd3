//! Contention-based random access, reduced to latency and overhead.
//!
//! Preambles go out on periodic PRACH occasions and are repeated according
//! to the UE's coverage tier. Detection probability is a logistic function
//! of the combined preamble SNR. A detected preamble needs a random access
//! response on MPDCCH+PDSCH; message 3 and contention resolution then take a
//! fixed delay before the UE is connected.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::radio::{ENB_NOISE_FIGURE_DB, THERMAL_NOISE_DBM_PER_HZ};
use crate::Tti;

/// PRBs occupied by one preamble repetition.
pub const PRACH_PRBS: u64 = 6;

const PRACH_BANDWIDTH_HZ: f64 = 1.08e6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RachConfig {
    pub occasion_period_ms: u64,
    /// Combined preamble SNR at which detection succeeds half the time.
    pub detection_threshold_db: f64,
    pub detection_slope_db: f64,
    /// Time after the last preamble repetition within which the response
    /// must be delivered.
    pub response_window_ms: u64,
    pub backoff_max_ms: u64,
    /// Message 3 plus contention resolution.
    pub setup_delay_ms: u64,
    pub response_tbs_bits: u32,
}

impl Default for RachConfig {
    fn default() -> Self {
        Self {
            occasion_period_ms: 10,
            detection_threshold_db: -12.0,
            detection_slope_db: 1.0,
            response_window_ms: 80,
            backoff_max_ms: 40,
            setup_delay_ms: 20,
            response_tbs_bits: 56,
        }
    }
}

impl RachConfig {
    pub fn validate(&self) -> Result<()> {
        if self.occasion_period_ms == 0 {
            return Err(Error::config("rach.occasion_period_ms", "must be >= 1"));
        }
        if !(self.detection_slope_db > 0.0 && self.detection_threshold_db.is_finite()) {
            return Err(Error::config("rach.detection_slope_db", "must be > 0"));
        }
        if self.response_window_ms == 0 {
            return Err(Error::config("rach.response_window_ms", "must be >= 1"));
        }
        if self.response_tbs_bits == 0 {
            return Err(Error::config("rach.response_tbs_bits", "must be > 0"));
        }
        Ok(())
    }

    /// Next PRACH occasion at or after `t`.
    pub fn next_occasion(&self, t: Tti) -> Tti {
        t.div_ceil(self.occasion_period_ms) * self.occasion_period_ms
    }

    /// Preamble detection probability.
    pub fn detection_probability(&self, tx_power_dbm: f64, coupling_loss_db: f64, reps: u32) -> f64 {
        let noise = THERMAL_NOISE_DBM_PER_HZ + 10.0 * PRACH_BANDWIDTH_HZ.log10() + ENB_NOISE_FIGURE_DB;
        let snr = tx_power_dbm - coupling_loss_db - noise + 10.0 * f64::from(reps.max(1)).log10();
        1.0 / (1.0 + (-(snr - self.detection_threshold_db) / self.detection_slope_db).exp())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RachOutcome {
    Success,
    Retry,
}

/// One preamble transmission and what came of it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RachAttempt {
    pub start_tti: Tti,
    pub preamble_repetitions: u32,
    pub outcome: RachOutcome,
    /// From the start of the access procedure to connection (success) or
    /// to the retry decision.
    pub latency_ms: u64,
    pub overhead_prb_ttis: u64,
}

impl RachAttempt {
    pub fn overhead_for(reps: u32) -> u64 {
        PRACH_PRBS * u64::from(reps)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn occasions_are_periodic() {
        let c = RachConfig::default();
        assert_eq!(c.next_occasion(0), 0);
        assert_eq!(c.next_occasion(1), 10);
        assert_eq!(c.next_occasion(10), 10);
        assert_eq!(c.next_occasion(11), 20);
    }

    #[test]
    fn repetitions_help_detection() {
        let c = RachConfig::default();
        let mut prev = 0.0;
        for reps in [1, 2, 4, 8, 16, 32, 64, 128] {
            let p = c.detection_probability(20.0, 150.0, reps);
            assert!(p > prev && p < 1.0);
            prev = p;
        }
        assert!(c.detection_probability(20.0, 100.0, 1) > 0.999);
    }

    #[test]
    fn overhead_linear_in_repetitions() {
        for r in [1u32, 2, 4, 8, 16, 32, 64, 128] {
            assert_eq!(RachAttempt::overhead_for(r), 6 * u64::from(r));
            assert_eq!(RachAttempt::overhead_for(2 * r), 2 * RachAttempt::overhead_for(r));
        }
    }
}
