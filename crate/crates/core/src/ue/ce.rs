//! Coverage-enhancement tiers: coupling loss decides the MPDCCH aggregation
//! level and the repetition lengths of every channel.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mac::AGL_LEVELS;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CeConfig {
    pub agl: u8,
    pub mpdcch_rl: u32,
    pub pucch_rl: u32,
    pub prach_reps: u32,
    /// Data repetition for first transmissions before any link estimate.
    pub data_rl: u32,
}

impl CeConfig {
    pub fn validate(&self, at: &str) -> Result<()> {
        if !AGL_LEVELS.contains(&self.agl) {
            return Err(Error::config(format!("{at}.agl"), format!("{} is not one of {AGL_LEVELS:?}", self.agl)));
        }
        for (name, v) in [
            ("mpdcch_rl", self.mpdcch_rl),
            ("pucch_rl", self.pucch_rl),
            ("prach_reps", self.prach_reps),
            ("data_rl", self.data_rl),
        ] {
            if !v.is_power_of_two() || v > 256 {
                return Err(Error::config(format!("{at}.{name}"), format!("{v} is not a power of two up to 256")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CeTier {
    /// Upper coupling-loss bound (exclusive); the last tier has none.
    #[serde(default)]
    pub below_db: Option<f64>,
    #[serde(flatten)]
    pub config: CeConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<CeTier>", into = "Vec<CeTier>")]
pub struct CeTierTable(Vec<CeTier>);

impl Default for CeTierTable {
    fn default() -> Self {
        let t = |below_db, agl, mpdcch_rl, pucch_rl, prach_reps, data_rl| CeTier {
            below_db,
            config: CeConfig { agl, mpdcch_rl, pucch_rl, prach_reps, data_rl },
        };
        Self(vec![
            t(Some(130.0), 4, 1, 1, 1, 1),
            t(Some(140.0), 8, 2, 2, 2, 2),
            t(Some(150.0), 16, 4, 4, 8, 8),
            t(None, 24, 8, 8, 32, 32),
        ])
    }
}

impl TryFrom<Vec<CeTier>> for CeTierTable {
    type Error = Error;

    fn try_from(v: Vec<CeTier>) -> Result<Self> {
        if v.is_empty() {
            return Err(Error::config("ce_tiers", "need at least one tier"));
        }
        let mut prev = f64::NEG_INFINITY;
        for (i, tier) in v.iter().enumerate() {
            let at = format!("ce_tiers[{i}]");
            tier.config.validate(&at)?;
            let last = i + 1 == v.len();
            match (tier.below_db, last) {
                (None, true) => {}
                (Some(b), false) if b.is_finite() && b > prev => prev = b,
                (None, false) => return Err(Error::config(at, "only the last tier may omit below_db")),
                (Some(_), true) => return Err(Error::config(at, "the last tier must not set below_db")),
                (Some(_), false) => return Err(Error::config(at, "below_db must increase")),
            }
        }
        Ok(Self(v))
    }
}

impl From<CeTierTable> for Vec<CeTier> {
    fn from(t: CeTierTable) -> Self {
        t.0
    }
}

impl CeTierTable {
    pub fn tiers(&self) -> &[CeTier] {
        &self.0
    }

    pub fn lookup(&self, coupling_loss_db: f64) -> CeConfig {
        self.0
            .iter()
            .find(|t| t.below_db.is_none_or(|b| coupling_loss_db < b))
            .expect("last tier is unbounded")
            .config
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_aggregation_levels() {
        let t = CeTierTable::default();
        assert_eq!(t.lookup(100.0).agl, 4);
        assert_eq!(t.lookup(129.99).agl, 4);
        assert_eq!(t.lookup(130.0).agl, 8);
        assert_eq!(t.lookup(145.0).agl, 16);
        assert_eq!(t.lookup(150.0).agl, 24);
        assert_eq!(t.lookup(170.0).agl, 24);
    }

    #[test]
    fn table_validation() {
        let mut v: Vec<CeTier> = CeTierTable::default().into();
        v[1].below_db = Some(120.0);
        assert!(CeTierTable::try_from(v.clone()).is_err());
        v[1].below_db = Some(135.0);
        v[1].config.agl = 5;
        assert!(CeTierTable::try_from(v.clone()).is_err());
        v[1].config.agl = 8;
        v[3].below_db = Some(200.0);
        assert!(CeTierTable::try_from(v).is_err());
    }
}
