use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};

const DEFAULT_TABLE: &str = include_str!("../../data/tbs_table.toml");

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TbsFile {
    version: u32,
    max_prbs: u8,
    row: Vec<TbsRow>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TbsRow {
    mcs: u8,
    bits: Vec<u32>,
}

/// Transport block size by `(mcs, n_prbs)`, capped at `max_tbs` on lookup.
#[derive(Debug, Clone, PartialEq)]
pub struct TbsTable {
    rows: Vec<Vec<u32>>,
    max_prbs: u8,
}

impl Default for TbsTable {
    fn default() -> Self {
        Self::from_toml_str(DEFAULT_TABLE).expect("bundled TBS table is valid")
    }
}

impl TbsTable {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let f: TbsFile = toml::from_str(s).map_err(|e| Error::config("tbs_table", e.to_string()))?;
        if f.version != 1 {
            return Err(Error::config("tbs_table.version", "unsupported version"));
        }
        if f.max_prbs == 0 {
            return Err(Error::config("tbs_table.max_prbs", "must be >= 1"));
        }
        if f.row.is_empty() {
            return Err(Error::config("tbs_table.row", "at least one row required"));
        }
        let mut rows: Vec<Vec<u32>> = Vec::with_capacity(f.row.len());
        for (i, r) in f.row.into_iter().enumerate() {
            let at = format!("tbs_table.row[{i}]");
            if usize::from(r.mcs) != i {
                return Err(Error::config(at, "mcs indices must be contiguous from 0"));
            }
            if r.bits.len() != usize::from(f.max_prbs) {
                return Err(Error::config(at, "row length must equal max_prbs"));
            }
            if r.bits[0] == 0 || r.bits.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::config(at, "bits must be positive and strictly increasing"));
            }
            if let Some(prev) = rows.last() {
                if prev.iter().zip(&r.bits).any(|(a, b)| a >= b) {
                    return Err(Error::config(at, "columns must increase with mcs"));
                }
            }
            rows.push(r.bits);
        }
        Ok(Self { rows, max_prbs: f.max_prbs })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let s = std::fs::read_to_string(path)
            .map_err(|e| Error::config(path.display().to_string(), e.to_string()))?;
        Self::from_toml_str(&s)
    }

    pub fn mcs_count(&self) -> usize {
        self.rows.len()
    }

    pub fn max_prbs(&self) -> u8 {
        self.max_prbs
    }

    /// Raw table entry.
    pub fn bits(&self, mcs: u8, n_prbs: u8) -> Result<u32> {
        if n_prbs == 0 || n_prbs > self.max_prbs {
            return Err(Error::config(
                "n_prbs",
                format!("{n_prbs} outside 1..={}", self.max_prbs),
            ));
        }
        self.rows
            .get(usize::from(mcs))
            .map(|r| r[usize::from(n_prbs - 1)])
            .ok_or_else(|| Error::config("mcs", format!("unknown MCS index {mcs}")))
    }

    /// Table entry capped at `max_tbs`.
    pub fn tbs(&self, mcs: u8, n_prbs: u8, max_tbs: u32) -> Result<u32> {
        Ok(self.bits(mcs, n_prbs)?.min(max_tbs))
    }

    /// Fewest PRBs whose raw TBS at `mcs` carries `tbs_bits`.
    pub fn prbs_for(&self, mcs: u8, tbs_bits: u32) -> Result<Option<u8>> {
        for n in 1..=self.max_prbs {
            if self.bits(mcs, n)? >= tbs_bits {
                return Ok(Some(n));
            }
        }
        Ok(None)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lookups() {
        let t = TbsTable::default();
        assert_eq!(t.mcs_count(), 16);
        assert_eq!(t.bits(0, 1).unwrap(), 16);
        assert_eq!(t.bits(15, 6).unwrap(), 1800);
        assert_eq!(t.tbs(15, 6, 1000).unwrap(), 1000);
        assert_eq!(t.tbs(10, 2, 1000).unwrap(), 328);
        assert!(t.bits(0, 0).is_err());
        assert!(t.bits(0, 7).is_err());
        assert!(t.bits(16, 1).is_err());
    }

    #[test]
    fn prbs_for_smallest_fit() {
        let t = TbsTable::default();
        assert_eq!(t.prbs_for(10, 320).unwrap(), Some(2));
        assert_eq!(t.prbs_for(10, 329).unwrap(), Some(3));
        assert_eq!(t.prbs_for(0, 153).unwrap(), None);
    }

    #[test]
    fn rejects_non_monotone_rows() {
        let bad = "version = 1\nmax_prbs = 2\n[[row]]\nmcs = 0\nbits = [10, 5]\n";
        assert!(TbsTable::from_toml_str(bad).is_err());
        let unknown = "version = 1\nmax_prbs = 1\nextra = 3\n[[row]]\nmcs = 0\nbits = [10]\n";
        assert!(TbsTable::from_toml_str(unknown).is_err());
    }
}
