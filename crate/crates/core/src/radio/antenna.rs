//! Sectorised eNB antenna pattern.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Parabolic vertical and horizontal cuts, each capped at its own floor.
///
/// The vertical cut is centred on the downtilt; `elevation_deg` passed to
/// [`antenna_gain`] is the depression angle from the horizon towards the UE.
/// Setting `omni` drops the horizontal term entirely (single-sector studies).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AntennaPattern {
    pub max_gain_db: f64,
    pub vertical_beamwidth_deg: f64,
    pub sla_db: f64,
    pub downtilt_deg: f64,
    pub horizontal_beamwidth_deg: f64,
    pub horizontal_am_db: f64,
    pub omni: bool,
}

impl Default for AntennaPattern {
    fn default() -> Self {
        Self {
            max_gain_db: 17.0,
            vertical_beamwidth_deg: 10.0,
            sla_db: 20.0,
            downtilt_deg: 15.0,
            horizontal_beamwidth_deg: 65.0,
            horizontal_am_db: 25.0,
            omni: false,
        }
    }
}

impl AntennaPattern {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("max_gain_db", self.max_gain_db),
            ("vertical_beamwidth_deg", self.vertical_beamwidth_deg),
            ("sla_db", self.sla_db),
            ("downtilt_deg", self.downtilt_deg),
            ("horizontal_beamwidth_deg", self.horizontal_beamwidth_deg),
            ("horizontal_am_db", self.horizontal_am_db),
        ];
        for (name, v) in fields {
            if !v.is_finite() {
                return Err(Error::config(format!("antenna.{name}"), "must be finite"));
            }
        }
        if self.vertical_beamwidth_deg <= 0.0 {
            return Err(Error::config("antenna.vertical_beamwidth_deg", "must be > 0"));
        }
        if self.horizontal_beamwidth_deg <= 0.0 {
            return Err(Error::config("antenna.horizontal_beamwidth_deg", "must be > 0"));
        }
        if self.sla_db < 0.0 || self.horizontal_am_db < 0.0 {
            return Err(Error::config("antenna", "attenuation floors must be >= 0"));
        }
        Ok(())
    }

    pub fn vertical_attenuation_db(&self, elevation_deg: f64) -> f64 {
        let off = wrap_deg(elevation_deg - self.downtilt_deg);
        (12.0 * (off / self.vertical_beamwidth_deg).powi(2)).min(self.sla_db)
    }

    pub fn horizontal_attenuation_db(&self, azimuth_deg: f64) -> f64 {
        if self.omni {
            return 0.0;
        }
        let off = wrap_deg(azimuth_deg);
        (12.0 * (off / self.horizontal_beamwidth_deg).powi(2)).min(self.horizontal_am_db)
    }
}

/// Antenna gain in dBi towards a UE at `azimuth_deg` off boresight and
/// `elevation_deg` below the horizon.
pub fn antenna_gain(azimuth_deg: f64, elevation_deg: f64, pattern: &AntennaPattern) -> f64 {
    pattern.max_gain_db
        - pattern.vertical_attenuation_db(elevation_deg)
        - pattern.horizontal_attenuation_db(azimuth_deg)
}

/// Wraps an angle into `[-180, 180)`.
pub(crate) fn wrap_deg(a: f64) -> f64 {
    (a + 180.0).rem_euclid(360.0) - 180.0
}
