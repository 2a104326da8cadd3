//! Abstracted link-level performance: repetition combining and per-MCS
//! block error waterfalls.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const DEFAULT_TABLE: &str = include_str!("../../data/bler_table.toml");

/// Upper bound on the combining penalty that keeps effective SINR
/// non-decreasing in the repetition count.
pub const MAX_COMBINING_PENALTY_DB: f64 = 3.010_299_956_639_812;

/// Allowed repetition lengths, ascending.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<u32>", into = "Vec<u32>")]
pub struct RepetitionLadder(Vec<u32>);

impl Default for RepetitionLadder {
    /// `1, 2, 4, ..., 256`.
    fn default() -> Self {
        Self((0..=8).map(|k| 1u32 << k).collect())
    }
}

impl TryFrom<Vec<u32>> for RepetitionLadder {
    type Error = Error;

    fn try_from(v: Vec<u32>) -> Result<Self> {
        if v.is_empty() {
            return Err(Error::config("repetition_ladder", "must not be empty"));
        }
        if v[0] == 0 {
            return Err(Error::config("repetition_ladder", "entries must be >= 1"));
        }
        if v.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::config("repetition_ladder", "must be strictly ascending"));
        }
        Ok(Self(v))
    }
}

impl From<RepetitionLadder> for Vec<u32> {
    fn from(l: RepetitionLadder) -> Self {
        l.0
    }
}

impl RepetitionLadder {
    pub fn contains(&self, reps: u32) -> bool {
        self.0.binary_search(&reps).is_ok()
    }

    pub fn check(&self, reps: u32) -> Result<u32> {
        if self.contains(reps) {
            Ok(reps)
        } else {
            Err(Error::config(
                "repetition",
                format!("{reps} is not on the repetition ladder {:?}", self.0),
            ))
        }
    }

    pub fn steps(&self) -> &[u32] {
        &self.0
    }

    pub fn max(&self) -> u32 {
        *self.0.last().expect("ladder is non-empty")
    }
}

/// One MCS waterfall.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McsCurve {
    pub index: u8,
    pub threshold_db: f64,
    pub slope_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BlerFile {
    version: u32,
    reference_tbs_bits: u32,
    combining_penalty_db_per_doubling: f64,
    tbs_sensitivity_db_per_doubling: f64,
    calibration_offset_db: f64,
    mcs: Vec<McsCurve>,
}

/// Logistic waterfall per MCS with a TBS-size correction and a repetition
/// combining penalty. See `data/bler_table.toml` for the file schema.
#[derive(Debug, Clone, PartialEq)]
pub struct BlerModel {
    curves: Vec<McsCurve>,
    pub reference_tbs_bits: u32,
    pub combining_penalty_db_per_doubling: f64,
    pub tbs_sensitivity_db_per_doubling: f64,
    pub calibration_offset_db: f64,
}

impl Default for BlerModel {
    fn default() -> Self {
        Self::from_toml_str(DEFAULT_TABLE).expect("bundled BLER table is valid")
    }
}

impl BlerModel {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let file: BlerFile =
            toml::from_str(s).map_err(|e| Error::config("bler_table", e.to_string()))?;
        if file.version != 1 {
            return Err(Error::config(
                "bler_table.version",
                format!("unsupported version {}", file.version),
            ));
        }
        Self::new(
            file.mcs,
            file.reference_tbs_bits,
            file.combining_penalty_db_per_doubling,
            file.tbs_sensitivity_db_per_doubling,
            file.calibration_offset_db,
        )
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let s = std::fs::read_to_string(path)
            .map_err(|e| Error::config(path.display().to_string(), e.to_string()))?;
        Self::from_toml_str(&s)
    }

    pub fn new(
        curves: Vec<McsCurve>,
        reference_tbs_bits: u32,
        combining_penalty_db_per_doubling: f64,
        tbs_sensitivity_db_per_doubling: f64,
        calibration_offset_db: f64,
    ) -> Result<Self> {
        if curves.is_empty() {
            return Err(Error::config("bler_table.mcs", "at least one curve required"));
        }
        for (i, c) in curves.iter().enumerate() {
            if usize::from(c.index) != i {
                return Err(Error::config(
                    format!("bler_table.mcs[{i}].index"),
                    "indices must be contiguous from 0",
                ));
            }
            if !c.threshold_db.is_finite() {
                return Err(Error::config(
                    format!("bler_table.mcs[{i}].threshold_db"),
                    "must be finite",
                ));
            }
            if !(c.slope_db.is_finite() && c.slope_db > 0.0) {
                return Err(Error::config(
                    format!("bler_table.mcs[{i}].slope_db"),
                    "must be finite and > 0",
                ));
            }
        }
        if reference_tbs_bits == 0 {
            return Err(Error::config("bler_table.reference_tbs_bits", "must be > 0"));
        }
        if !(0.0..MAX_COMBINING_PENALTY_DB).contains(&combining_penalty_db_per_doubling) {
            return Err(Error::config(
                "bler_table.combining_penalty_db_per_doubling",
                "must lie in [0, 3.0103)",
            ));
        }
        if !(tbs_sensitivity_db_per_doubling.is_finite() && tbs_sensitivity_db_per_doubling >= 0.0)
        {
            return Err(Error::config(
                "bler_table.tbs_sensitivity_db_per_doubling",
                "must be finite and >= 0",
            ));
        }
        if !calibration_offset_db.is_finite() {
            return Err(Error::config("bler_table.calibration_offset_db", "must be finite"));
        }
        Ok(Self {
            curves,
            reference_tbs_bits,
            combining_penalty_db_per_doubling,
            tbs_sensitivity_db_per_doubling,
            calibration_offset_db,
        })
    }

    pub fn mcs_count(&self) -> usize {
        self.curves.len()
    }

    pub fn curve(&self, mcs: u8) -> Result<&McsCurve> {
        self.curves
            .get(usize::from(mcs))
            .ok_or_else(|| Error::config("mcs", format!("unknown MCS index {mcs}")))
    }

    /// Effective SINR after combining `reps` repetitions, without checking the
    /// ladder. HARQ soft combining across attempts uses this with the total
    /// number of received repetitions.
    pub fn combine(&self, sinr_per_tx_db: f64, reps: u32) -> f64 {
        debug_assert!(reps >= 1);
        let r = f64::from(reps.max(1));
        sinr_per_tx_db + 10.0 * r.log10() - self.combining_penalty_db_per_doubling * r.log2()
    }

    /// Effective SINR for one transmission repeated `reps` times.
    pub fn effective_sinr(
        &self,
        sinr_per_tx_db: f64,
        reps: u32,
        ladder: &RepetitionLadder,
    ) -> Result<f64> {
        ladder.check(reps)?;
        Ok(self.combine(sinr_per_tx_db, reps))
    }

    /// 50% BLER point for `mcs` carrying `tbs_bits`.
    pub fn threshold_db(&self, mcs: u8, tbs_bits: u32) -> Result<f64> {
        if tbs_bits == 0 {
            return Err(Error::input("tbs_bits must be > 0"));
        }
        let c = self.curve(mcs)?;
        let doublings = (f64::from(tbs_bits) / f64::from(self.reference_tbs_bits)).log2();
        Ok(c.threshold_db
            + self.calibration_offset_db
            + self.tbs_sensitivity_db_per_doubling * doublings)
    }

    /// Block error probability at effective SINR `eff_sinr_db`.
    pub fn bler(&self, eff_sinr_db: f64, mcs: u8, tbs_bits: u32) -> Result<f64> {
        let t = self.threshold_db(mcs, tbs_bits)?;
        let slope = self.curves[usize::from(mcs)].slope_db;
        Ok(logistic_tail((eff_sinr_db - t) / slope))
    }
}

/// `1 / (1 + e^x)`, evaluated without overflow on either side.
fn logistic_tail(x: f64) -> f64 {
    if x > 0.0 {
        let e = (-x).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + x.exp())
    }
}

/// Free-function form of [`BlerModel::bler`].
pub fn bler(eff_sinr_db: f64, mcs: u8, tbs_bits: u32, model: &BlerModel) -> Result<f64> {
    model.bler(eff_sinr_db, mcs, tbs_bits)
}

/// Free-function form of [`BlerModel::effective_sinr`].
pub fn effective_sinr(
    sinr_per_tx_db: f64,
    reps: u32,
    model: &BlerModel,
    ladder: &RepetitionLadder,
) -> Result<f64> {
    model.effective_sinr(sinr_per_tx_db, reps, ladder)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn identity_at_single_repetition() {
        let m = BlerModel::default();
        let l = RepetitionLadder::default();
        assert_eq!(m.effective_sinr(-3.25, 1, &l).unwrap(), -3.25);
    }

    #[test]
    fn four_repetitions_with_half_db_penalty() {
        let m = BlerModel::default();
        assert_eq!(m.combining_penalty_db_per_doubling, 0.5);
        let l = RepetitionLadder::default();
        // 10*log10(4) - 2 * 0.5
        assert_abs_diff_eq!(m.effective_sinr(0.0, 4, &l).unwrap(), 5.0206, epsilon = 1e-4);
    }

    #[test]
    fn top_of_ladder_beats_next_rung() {
        let m = BlerModel::default();
        let l = RepetitionLadder::default();
        assert!(m.effective_sinr(0.0, 256, &l).unwrap() > m.effective_sinr(0.0, 128, &l).unwrap());
    }

    #[test]
    fn off_ladder_rejected() {
        let m = BlerModel::default();
        let l = RepetitionLadder::default();
        assert!(matches!(m.effective_sinr(0.0, 3, &l), Err(Error::Config { .. })));
        assert!(m.effective_sinr(0.0, 512, &l).is_err());
    }

    #[test]
    fn midpoint_at_threshold() {
        let m = BlerModel::default();
        let t = m.threshold_db(7, m.reference_tbs_bits).unwrap();
        assert_abs_diff_eq!(m.bler(t, 7, m.reference_tbs_bits).unwrap(), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn high_sinr_limit() {
        let m = BlerModel::default();
        assert!(m.bler(1e6, 0, 100).unwrap() < 1e-300);
        assert_eq!(m.bler(f64::INFINITY, 0, 100).unwrap(), 0.0);
    }

    #[test]
    fn larger_tbs_is_harder() {
        let m = BlerModel::default();
        let small = m.bler(2.0, 8, 400).unwrap();
        let big = m.bler(2.0, 8, 800).unwrap();
        assert!(big > small, "{big} <= {small}");
    }

    #[test]
    fn zero_tbs_and_unknown_mcs_rejected() {
        let m = BlerModel::default();
        assert!(matches!(m.bler(0.0, 3, 0), Err(Error::Input(_))));
        assert!(matches!(m.bler(0.0, 99, 100), Err(Error::Config { .. })));
    }

    #[test]
    fn bundled_table_shape() {
        let m = BlerModel::default();
        assert_eq!(m.mcs_count(), 16);
        for w in m.curves.windows(2) {
            assert!(w[0].threshold_db < w[1].threshold_db);
        }
    }

    #[test]
    fn ladder_validation() {
        assert!(RepetitionLadder::try_from(vec![]).is_err());
        assert!(RepetitionLadder::try_from(vec![0, 1]).is_err());
        assert!(RepetitionLadder::try_from(vec![2, 2]).is_err());
        assert_eq!(RepetitionLadder::default().max(), 256);
    }

    #[test]
    fn penalty_bound_enforced() {
        let m = BlerModel::default();
        let bad = BlerModel::new(m.curves.clone(), 328, 3.1, 0.5, 0.0);
        assert!(bad.is_err());
    }

    proptest! {
        // Within a representable range the waterfall is strictly decreasing
        // for every MCS and TBS.
        #[test]
        fn strictly_decreasing_in_sinr(
            mcs in 0u8..16,
            tbs in 16u32..2000,
            a in -25.0f64..35.0,
            delta in 1e-3f64..20.0,
        ) {
            let m = BlerModel::default();
            let lo = m.bler(a, mcs, tbs).unwrap();
            let hi = m.bler(a + delta, mcs, tbs).unwrap();
            prop_assert!(hi < lo);
            prop_assert!(lo > 0.0 && lo < 1.0);
            prop_assert!(hi > 0.0 && hi < 1.0);
        }

        #[test]
        fn non_decreasing_in_tbs(mcs in 0u8..16, tbs in 16u32..2000, s in -20.0f64..30.0) {
            let m = BlerModel::default();
            prop_assert!(m.bler(s, mcs, tbs + 1).unwrap() >= m.bler(s, mcs, tbs).unwrap());
        }

        #[test]
        fn combining_monotone(s in -30.0f64..30.0, k in 0u32..8) {
            let m = BlerModel::default();
            let l = RepetitionLadder::default();
            let a = m.effective_sinr(s, 1 << k, &l).unwrap();
            let b = m.effective_sinr(s, 1 << (k + 1), &l).unwrap();
            prop_assert!(b >= a);
        }
    }
}
