use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// PRBs per narrowband.
pub const NARROWBAND_PRBS: u16 = 6;

const DEFAULT_TABLE: &str = include_str!("../../data/bandwidths.toml");

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct BandwidthFile {
    version: u32,
    profile: Vec<BandwidthProfile>,
}

/// Carrier layout: PRB count, legacy RBG size and narrowband positions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BandwidthProfile {
    pub name: String,
    pub total_prbs: u16,
    pub rbg_size: u16,
    pub narrowband_starts: Vec<u16>,
}

impl BandwidthProfile {
    /// Profiles shipped in `data/bandwidths.toml`.
    pub fn table() -> Vec<BandwidthProfile> {
        Self::parse_table(DEFAULT_TABLE).expect("bundled bandwidth table is valid")
    }

    pub fn parse_table(s: &str) -> Result<Vec<BandwidthProfile>> {
        let f: BandwidthFile =
            toml::from_str(s).map_err(|e| Error::config("bandwidths", e.to_string()))?;
        if f.version != 1 {
            return Err(Error::config("bandwidths.version", "unsupported version"));
        }
        for p in &f.profile {
            p.validate()?;
        }
        Ok(f.profile)
    }

    /// Looks a profile up by name (`"10MHz"`) in the bundled table.
    pub fn lookup(name: &str) -> Result<BandwidthProfile> {
        Self::table()
            .into_iter()
            .find(|p| p.name == name)
            .ok_or_else(|| Error::config("bandwidth", format!("unknown bandwidth profile `{name}`")))
    }

    /// A profile with the standard narrowband placement for `total_prbs`.
    pub fn standard(total_prbs: u16, rbg_size: u16) -> Result<BandwidthProfile> {
        let p = BandwidthProfile {
            name: format!("{total_prbs}prb"),
            total_prbs,
            rbg_size,
            narrowband_starts: standard_narrowband_starts(total_prbs),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let at = |f: &str| format!("bandwidth[{}].{f}", self.name);
        if self.total_prbs < NARROWBAND_PRBS {
            return Err(Error::config(at("total_prbs"), "must be at least 6 PRBs"));
        }
        if self.rbg_size == 0 {
            return Err(Error::config(at("rbg_size"), "must be >= 1"));
        }
        if self.narrowband_starts.is_empty() {
            return Err(Error::config(at("narrowband_starts"), "must not be empty"));
        }
        let mut prev_end = 0;
        for &s in &self.narrowband_starts {
            if s < prev_end {
                return Err(Error::config(at("narrowband_starts"), "narrowbands overlap or are unsorted"));
            }
            prev_end = s + NARROWBAND_PRBS;
        }
        if prev_end > self.total_prbs {
            return Err(Error::config(at("narrowband_starts"), "narrowband exceeds the carrier"));
        }
        Ok(())
    }

    /// RBG index → PRB range. The last RBG may be short.
    pub fn rbg_layout(&self) -> Vec<Range<u16>> {
        (0..self.total_prbs)
            .step_by(usize::from(self.rbg_size))
            .map(|s| s..(s + self.rbg_size).min(self.total_prbs))
            .collect()
    }
}

/// First PRB of each narrowband for a carrier of `total_prbs`: the leftover
/// `total_prbs mod 6` PRBs are split around the band edges, and on odd
/// carriers the centre PRB is skipped.
pub fn standard_narrowband_starts(total_prbs: u16) -> Vec<u16> {
    let n = total_prbs / NARROWBAND_PRBS;
    let offset = (total_prbs % NARROWBAND_PRBS) / 2;
    (0..n)
        .map(|i| {
            let s = offset + NARROWBAND_PRBS * i;
            if total_prbs % 2 == 1 && i >= n / 2 {
                s + 1
            } else {
                s
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ten_mhz_layout() {
        let p = BandwidthProfile::lookup("10MHz").unwrap();
        let rbgs = p.rbg_layout();
        assert_eq!(rbgs.len(), 17);
        assert!(rbgs[..16].iter().all(|r| r.len() == 3));
        assert_eq!(rbgs[16], 48..50);
    }

    #[test]
    fn table_matches_standard_placement() {
        for p in BandwidthProfile::table() {
            assert_eq!(p.narrowband_starts, standard_narrowband_starts(p.total_prbs), "{}", p.name);
        }
    }

    #[test]
    fn rbgs_partition_the_carrier() {
        for total in 6..=110u16 {
            for rbg in 1..=4 {
                let p = BandwidthProfile::standard(total, rbg).unwrap();
                let mut next = 0;
                for r in p.rbg_layout() {
                    assert_eq!(r.start, next);
                    assert!(!r.is_empty() && r.len() <= usize::from(rbg));
                    next = r.end;
                }
                assert_eq!(next, total);
            }
        }
    }

    #[test]
    fn too_narrow_or_bad_name() {
        assert!(BandwidthProfile::standard(5, 1).is_err());
        assert!(BandwidthProfile::lookup("7MHz").is_err());
    }
}
