//! Connected-mode DRX.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Tti;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DrxConfig {
    pub cycle_ms: u64,
    pub on_duration_ms: u64,
    /// Extra awake time after each received grant.
    #[serde(default)]
    pub inactivity_ms: u64,
    #[serde(default)]
    pub offset_ms: u64,
}

impl DrxConfig {
    pub fn validate(&self) -> Result<()> {
        if self.cycle_ms == 0 || self.on_duration_ms == 0 || self.on_duration_ms > self.cycle_ms {
            return Err(Error::config("drx", "need 0 < on_duration_ms <= cycle_ms"));
        }
        Ok(())
    }

    pub fn in_on_duration(&self, t: Tti) -> bool {
        (t + self.cycle_ms - self.offset_ms % self.cycle_ms) % self.cycle_ms < self.on_duration_ms
    }

    /// Whether the UE monitors MPDCCH at `t`. `awake_until` is the end of
    /// the inactivity timer started by the last grant.
    pub fn monitoring(&self, t: Tti, awake_until: Tti) -> bool {
        t < awake_until || self.in_on_duration(t)
    }

    /// First TTI at or after `t` when the UE monitors MPDCCH.
    pub fn next_monitoring(&self, t: Tti, awake_until: Tti) -> Tti {
        if self.monitoring(t, awake_until) {
            return t;
        }
        let phase = (t + self.cycle_ms - self.offset_ms % self.cycle_ms) % self.cycle_ms;
        t + (self.cycle_ms - phase)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grant_in_off_period_waits_for_next_on_duration() {
        let d = DrxConfig { cycle_ms: 1280, on_duration_ms: 10, inactivity_ms: 0, offset_ms: 0 };
        for t in 0..10 {
            assert!(d.monitoring(t, 0));
        }
        assert!(!d.monitoring(10, 0));
        assert!(!d.monitoring(700, 0));
        assert_eq!(d.next_monitoring(700, 0), 1280);
        assert_eq!(d.next_monitoring(1285, 0), 1285);
        assert_eq!(d.next_monitoring(1290, 0), 2560);
    }

    #[test]
    fn inactivity_extends_awake_time() {
        let d = DrxConfig { cycle_ms: 320, on_duration_ms: 10, inactivity_ms: 100, offset_ms: 0 };
        // grant received at t = 5 keeps the UE awake until 105
        assert!(d.monitoring(104, 5 + d.inactivity_ms));
        assert!(!d.monitoring(105, 5 + d.inactivity_ms));
    }

    #[test]
    fn offset_shifts_the_window() {
        let d = DrxConfig { cycle_ms: 40, on_duration_ms: 4, inactivity_ms: 0, offset_ms: 10 };
        let on: Vec<Tti> = (0..80).filter(|&t| d.in_on_duration(t)).collect();
        assert_eq!(on, vec![10, 11, 12, 13, 50, 51, 52, 53]);
        assert_eq!(d.next_monitoring(14, 0), 50);
    }

    #[test]
    fn bad_config() {
        let d = DrxConfig { cycle_ms: 10, on_duration_ms: 20, inactivity_ms: 0, offset_ms: 0 };
        assert!(d.validate().is_err());
    }
}
