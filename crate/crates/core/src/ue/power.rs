//! Uplink power control.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PowerMode {
    Olpc,
    Clpc,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerControlState {
    pub p_max_dbm: f64,
    pub p0_dbm: f64,
    pub alpha: f64,
    pub tpc_accum_db: f64,
    pub mode: PowerMode,
}

impl Default for PowerControlState {
    fn default() -> Self {
        Self { p_max_dbm: 20.0, p0_dbm: -105.0, alpha: 1.0, tpc_accum_db: 0.0, mode: PowerMode::Olpc }
    }
}

impl PowerControlState {
    pub fn validate(&self) -> Result<()> {
        if !(self.p_max_dbm.is_finite() && self.p0_dbm.is_finite()) {
            return Err(Error::config("power_control", "powers must be finite"));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::config("power_control.alpha", "must lie in [0, 1]"));
        }
        Ok(())
    }

    /// Adds a TPC step. Ignored in open loop.
    pub fn apply_tpc(&mut self, step_db: f64, limit_db: f64) {
        if self.mode == PowerMode::Clpc {
            self.tpc_accum_db = (self.tpc_accum_db + step_db).clamp(-limit_db, limit_db);
        }
    }

    /// Connection release drops the closed-loop correction.
    pub fn reset(&mut self) {
        self.tpc_accum_db = 0.0;
    }
}

/// PUSCH transmit power in dBm for `n_prbs` PRBs at `coupling_loss_db`.
pub fn tx_power(pc: &PowerControlState, coupling_loss_db: f64, n_prbs: u8) -> Result<f64> {
    if !(1..=6).contains(&n_prbs) {
        return Err(Error::config("n_prbs", format!("Cat-M allocations are 1..=6 PRBs, got {n_prbs}")));
    }
    let accum = match pc.mode {
        PowerMode::Olpc => 0.0,
        PowerMode::Clpc => pc.tpc_accum_db,
    };
    let p = pc.p0_dbm + 10.0 * f64::from(n_prbs).log10() + pc.alpha * coupling_loss_db + accum;
    Ok(p.min(pc.p_max_dbm))
}

/// eNB-side closed-loop controller: filters PUSCH SINR measurements and
/// issues ±step commands once enough of them have been collected on the
/// current connection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TpcConfig {
    pub target_sinr_db: f64,
    pub step_db: f64,
    pub hysteresis_db: f64,
    pub min_measurements: u32,
    pub accum_limit_db: f64,
    /// Weight of the newest sample in the exponential filter.
    pub filter_weight: f64,
}

impl Default for TpcConfig {
    fn default() -> Self {
        Self {
            target_sinr_db: 3.0,
            step_db: 1.0,
            hysteresis_db: 1.0,
            min_measurements: 10,
            accum_limit_db: 10.0,
            filter_weight: 0.2,
        }
    }
}

impl TpcConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_db > 0.0 && self.hysteresis_db >= 0.0 && self.accum_limit_db >= 0.0) {
            return Err(Error::config("tpc", "steps and limits must be non-negative"));
        }
        if !(self.filter_weight > 0.0 && self.filter_weight <= 1.0) {
            return Err(Error::config("tpc.filter_weight", "must lie in (0, 1]"));
        }
        if self.min_measurements == 0 {
            return Err(Error::config("tpc.min_measurements", "must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct TpcController {
    pub measurements: u32,
    pub filtered_sinr_db: f64,
}

impl TpcController {
    /// Feeds one measurement; returns the command to send, if any.
    pub fn observe(&mut self, cfg: &TpcConfig, sinr_db: f64) -> Option<f64> {
        self.filtered_sinr_db = if self.measurements == 0 {
            sinr_db
        } else {
            (1.0 - cfg.filter_weight) * self.filtered_sinr_db + cfg.filter_weight * sinr_db
        };
        self.measurements += 1;
        if self.measurements < cfg.min_measurements {
            return None;
        }
        let err = cfg.target_sinr_db - self.filtered_sinr_db;
        if err > cfg.hysteresis_db {
            Some(cfg.step_db)
        } else if err < -cfg.hysteresis_db {
            Some(-cfg.step_db)
        } else {
            None
        }
    }

    pub fn reset(&mut self) {
        *self = Self::default();
    }
}
