//! Distance-dependent macro path loss.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Macro urban path loss, `128.1 + 37.6 log10(d_km)` at 2 GHz.
///
/// Distances below `min_distance_m` are clamped up to it. Carriers other than
/// 2 GHz shift the curve by the free-space frequency term `20 log10(f / 2 GHz)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathLossModel {
    pub carrier_ghz: f64,
    pub min_distance_m: f64,
}

impl Default for PathLossModel {
    fn default() -> Self {
        Self {
            carrier_ghz: 2.0,
            min_distance_m: 35.0,
        }
    }
}

impl PathLossModel {
    pub fn loss_db(&self, distance_m: f64) -> Result<f64> {
        path_loss_clamped(distance_m, self.carrier_ghz, self.min_distance_m)
    }
}

/// Path loss in dB with the default 35 m minimum distance.
pub fn path_loss(distance_m: f64, carrier_ghz: f64) -> Result<f64> {
    path_loss_clamped(distance_m, carrier_ghz, PathLossModel::default().min_distance_m)
}

fn path_loss_clamped(distance_m: f64, carrier_ghz: f64, min_distance_m: f64) -> Result<f64> {
    if !distance_m.is_finite() || distance_m <= 0.0 {
        return Err(Error::input(format!(
            "distance must be finite and positive, got {distance_m}"
        )));
    }
    if !carrier_ghz.is_finite() || carrier_ghz <= 0.0 {
        return Err(Error::input(format!(
            "carrier must be finite and positive, got {carrier_ghz} GHz"
        )));
    }
    let d_km = distance_m.max(min_distance_m) / 1000.0;
    Ok(128.1 + 37.6 * d_km.log10() + 20.0 * (carrier_ghz / 2.0).log10())
}
