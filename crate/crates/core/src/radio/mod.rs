//! Abstracted physical layer: propagation, antenna gain, repetition
//! combining, block error rate and the coverage search built on top of them.

mod antenna;
mod bler;
mod coverage;
mod link;
mod propagation;

pub use antenna::{antenna_gain, AntennaPattern};
pub(crate) use antenna::wrap_deg;
pub use bler::{
    bler, effective_sinr, BlerModel, McsCurve, RepetitionLadder, MAX_COMBINING_PENALTY_DB,
};
pub use coverage::{harq_attempts_within, mcl_search, residual_bler, Coverage, CoverageQuery};
pub use link::LinkState;
pub use propagation::{path_loss, PathLossModel};

/// Thermal noise density, dBm/Hz.
pub const THERMAL_NOISE_DBM_PER_HZ: f64 = -174.0;
/// Bandwidth of one PRB, Hz.
pub const PRB_BANDWIDTH_HZ: f64 = 180e3;
pub const UE_NOISE_FIGURE_DB: f64 = 9.0;
pub const ENB_NOISE_FIGURE_DB: f64 = 5.0;

/// Thermal noise power in one PRB for a receiver with noise figure `nf_db`.
pub fn noise_per_prb_dbm(nf_db: f64) -> f64 {
    THERMAL_NOISE_DBM_PER_HZ + 10.0 * PRB_BANDWIDTH_HZ.log10() + nf_db
}

pub fn dbm_to_mw(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

pub fn mw_to_dbm(mw: f64) -> f64 {
    10.0 * mw.log10()
}

/// Watts to dBm.
pub fn watts_to_dbm(w: f64) -> f64 {
    10.0 * (w * 1000.0).log10()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn noise_floor() {
        assert_abs_diff_eq!(noise_per_prb_dbm(0.0), -121.447, epsilon = 1e-3);
        assert_abs_diff_eq!(noise_per_prb_dbm(ENB_NOISE_FIGURE_DB), -116.447, epsilon = 1e-3);
        assert_abs_diff_eq!(watts_to_dbm(40.0), 46.0206, epsilon = 1e-4);
    }
}
