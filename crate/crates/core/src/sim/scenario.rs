//! Scenario files.
//!
//! A scenario is TOML. Every table rejects unknown keys, and every field
//! except `duration_ms` and `ue_groups` has a default. The resolved value,
//! defaults included, is echoed into each run's summary.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{choose_narrowband, enumerate_narrowbands, BandwidthProfile, NarrowbandPlan};
use crate::mac::{LinkAdaptationState, TbsTable, MAX_REPETITIONS};
use crate::radio::{AntennaPattern, BlerModel, PathLossModel, RepetitionLadder};
use crate::traffic::TrafficConfig;
use crate::ue::{CeTierTable, DrxConfig, PowerControlState, PowerMode, RachConfig, TpcConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub name: String,
    #[serde(default = "default_seed")]
    pub seed: u64,
    pub duration_ms: u64,
    #[serde(default)]
    pub layout: LayoutConfig,
    #[serde(default)]
    pub radio: RadioConfig,
    #[serde(default)]
    pub scheduler: SchedulerConfig,
    #[serde(default)]
    pub power: PowerConfig,
    #[serde(default)]
    pub rach: RachConfig,
    #[serde(default)]
    pub ce_tiers: CeTierTable,
    pub ue_groups: Vec<UeGroup>,
}

fn default_seed() -> u64 {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KpiScope {
    /// Only UEs served by the centre site's cells.
    Center,
    All,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LayoutConfig {
    pub rings: u32,
    pub isd_m: f64,
    /// 1 (omni) or 3.
    pub sectors: u32,
    pub wraparound: bool,
    pub bs_height_m: f64,
    pub ue_height_m: f64,
    pub shadowing_std_db: f64,
    /// Total eNB power over the whole carrier.
    pub enb_power_dbm: f64,
    pub ue_antenna_gain_db: f64,
    pub body_loss_db: f64,
    pub path_loss: PathLossModel,
    pub antenna: AntennaPattern,
    pub kpi_scope: KpiScope,
}

impl Default for LayoutConfig {
    fn default() -> Self {
        Self {
            rings: 1,
            isd_m: 500.0,
            sectors: 3,
            wraparound: false,
            bs_height_m: 32.0,
            ue_height_m: 1.5,
            shadowing_std_db: 8.0,
            // 2 x 20 W
            enb_power_dbm: 46.0,
            ue_antenna_gain_db: -3.0,
            body_loss_db: 1.0,
            path_loss: PathLossModel::default(),
            antenna: AntennaPattern::default(),
            kpi_scope: KpiScope::Center,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InterferenceMode {
    /// The narrowband is kept free of legacy traffic.
    Reserved,
    /// Legacy UEs load the narrowband in every cell.
    Shared,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", untagged)]
pub enum NarrowbandChoice {
    Index(usize),
    Auto(AutoTag),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AutoTag {
    Auto,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RadioConfig {
    /// Name of a profile in the bandwidth table, e.g. "10MHz".
    pub bandwidth: String,
    /// `"auto"` picks the least wasteful narrowband; an integer pins one.
    pub narrowband: NarrowbandChoice,
    pub interference: InterferenceMode,
    /// Fraction of legacy PRBs busy in shared mode.
    pub legacy_load: f64,
    /// Uplink interference-over-thermal from legacy UEs at full load.
    pub legacy_ul_iot_db: f64,
    pub bler_table: Option<PathBuf>,
    pub tbs_table: Option<PathBuf>,
    pub repetition_ladder: RepetitionLadder,
}

impl Default for RadioConfig {
    fn default() -> Self {
        Self {
            bandwidth: "10MHz".into(),
            narrowband: NarrowbandChoice::Auto(AutoTag::Auto),
            interference: InterferenceMode::Reserved,
            legacy_load: 0.5,
            legacy_ul_iot_db: 6.0,
            bler_table: None,
            tbs_table: None,
            repetition_ladder: RepetitionLadder::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SchedulerConfig {
    pub ibler_target: f64,
    pub step_up_db: f64,
    pub initial_mcs: u8,
    pub max_tbs_bits: u32,
    pub max_attempts: u32,
    pub harq_processes: u8,
    /// Largest data repetition link adaptation may choose.
    pub max_data_rl: u32,
    pub voip_aggregation: bool,
    /// Periodic CQI on PUCCH; `None` disables it.
    pub cqi_period_ms: Option<u64>,
    /// Every PUSCH also carries a CQI report.
    pub aperiodic_cqi: bool,
    pub sr_period_ms: u64,
}

impl Default for SchedulerConfig {
    fn default() -> Self {
        Self {
            ibler_target: 0.1,
            step_up_db: 0.05,
            initial_mcs: 4,
            max_tbs_bits: 1000,
            max_attempts: 4,
            harq_processes: 4,
            max_data_rl: MAX_REPETITIONS,
            voip_aggregation: true,
            cqi_period_ms: Some(80),
            aperiodic_cqi: true,
            sr_period_ms: 20,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PowerConfig {
    pub p_max_dbm: f64,
    pub p0_dbm: f64,
    pub alpha: f64,
    pub mode: PowerMode,
    pub tpc: TpcConfig,
}

impl Default for PowerConfig {
    fn default() -> Self {
        let pc = PowerControlState::default();
        Self { p_max_dbm: pc.p_max_dbm, p0_dbm: pc.p0_dbm, alpha: pc.alpha, mode: pc.mode, tpc: TpcConfig::default() }
    }
}

impl PowerConfig {
    pub fn state(&self) -> PowerControlState {
        PowerControlState {
            p_max_dbm: self.p_max_dbm,
            p0_dbm: self.p0_dbm,
            alpha: self.alpha,
            tpc_accum_db: 0.0,
            mode: self.mode,
        }
    }
}

/// Per-channel repetition overrides for a UE group. Unset fields follow
/// the coverage tier (and, for data, link adaptation).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RepetitionOverride {
    pub mpdcch: Option<u32>,
    pub data: Option<u32>,
    pub pucch: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UeGroup {
    pub count: u32,
    pub traffic: TrafficConfig,
    /// Pins the coupling loss to the serving cell and removes other cells
    /// from this UE's view. For single-link studies.
    #[serde(default)]
    pub fixed_coupling_loss_db: Option<f64>,
    /// Begin connected instead of idle.
    #[serde(default)]
    pub start_connected: bool,
    #[serde(default = "default_dormancy")]
    pub dormancy_timer_ms: u64,
    #[serde(default)]
    pub drx: Option<DrxConfig>,
    #[serde(default)]
    pub repetitions: RepetitionOverride,
}

fn default_dormancy() -> u64 {
    2000
}

/// Tables a scenario refers to, loaded once.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub bler: BlerModel,
    pub tbs: TbsTable,
    pub profile: BandwidthProfile,
    pub narrowband: NarrowbandPlan,
}

impl Scenario {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let sc: Scenario = toml::from_str(s).map_err(|e| {
            let msg = e.message().to_string();
            let path = e.span().map(|r| format!("{}..{}", r.start, r.end)).unwrap_or_default();
            Error::config(if path.is_empty() { "scenario".into() } else { format!("scenario@{path}") }, msg)
        })?;
        sc.validate()?;
        Ok(sc)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let s = std::fs::read_to_string(path).map_err(|e| Error::config(path.display().to_string(), e.to_string()))?;
        Self::from_toml_str(&s)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serialises")
    }

    pub fn validate(&self) -> Result<()> {
        let l = &self.layout;
        if !(l.isd_m.is_finite() && l.isd_m > 0.0) {
            return Err(Error::config("layout.isd_m", "must be > 0"));
        }
        if l.sectors != 1 && l.sectors != 3 {
            return Err(Error::config("layout.sectors", "must be 1 or 3"));
        }
        if !(l.shadowing_std_db.is_finite() && l.shadowing_std_db >= 0.0) {
            return Err(Error::config("layout.shadowing_std_db", "must be >= 0"));
        }
        if !(l.bs_height_m > l.ue_height_m && l.ue_height_m >= 0.0) {
            return Err(Error::config("layout.bs_height_m", "must exceed ue_height_m"));
        }
        for (k, v) in [
            ("layout.enb_power_dbm", l.enb_power_dbm),
            ("layout.ue_antenna_gain_db", l.ue_antenna_gain_db),
            ("layout.body_loss_db", l.body_loss_db),
        ] {
            if !v.is_finite() {
                return Err(Error::config(k, "must be finite"));
            }
        }
        l.antenna.validate()?;
        l.path_loss.loss_db(100.0).map_err(|e| Error::config("layout.path_loss", e.to_string()))?;

        let r = &self.radio;
        if !(0.0..=1.0).contains(&r.legacy_load) {
            return Err(Error::config("radio.legacy_load", "must lie in [0, 1]"));
        }
        if !(r.legacy_ul_iot_db.is_finite() && r.legacy_ul_iot_db >= 0.0) {
            return Err(Error::config("radio.legacy_ul_iot_db", "must be >= 0"));
        }

        let s = &self.scheduler;
        LinkAdaptationState::new(s.ibler_target, s.step_up_db, s.initial_mcs)
            .map_err(|e| relabel(e, "scheduler"))?;
        if s.max_attempts == 0 {
            return Err(Error::config("scheduler.max_attempts", "must be >= 1"));
        }
        if s.harq_processes == 0 {
            return Err(Error::config("scheduler.harq_processes", "must be >= 1"));
        }
        if s.max_tbs_bits == 0 {
            return Err(Error::config("scheduler.max_tbs_bits", "must be > 0"));
        }
        if !r.repetition_ladder.contains(s.max_data_rl) {
            return Err(Error::config("scheduler.max_data_rl", "must be on the repetition ladder"));
        }
        if s.cqi_period_ms == Some(0) {
            return Err(Error::config("scheduler.cqi_period_ms", "must be > 0 (omit to disable)"));
        }
        if s.sr_period_ms == 0 {
            return Err(Error::config("scheduler.sr_period_ms", "must be > 0"));
        }
        self.power.state().validate()?;
        self.power.tpc.validate()?;
        self.rach.validate()?;

        if self.ue_groups.is_empty() || self.ue_groups.iter().all(|g| g.count == 0) {
            return Err(Error::config("ue_groups", "need at least one UE"));
        }
        for (i, g) in self.ue_groups.iter().enumerate() {
            let at = format!("ue_groups[{i}]");
            g.traffic.validate(&format!("{at}.traffic"))?;
            if let Some(cl) = g.fixed_coupling_loss_db {
                if !cl.is_finite() {
                    return Err(Error::config(format!("{at}.fixed_coupling_loss_db"), "must be finite"));
                }
            }
            if let Some(d) = &g.drx {
                d.validate().map_err(|e| relabel(e, &format!("{at}.drx")))?;
            }
            for (name, v) in [
                ("mpdcch", g.repetitions.mpdcch),
                ("data", g.repetitions.data),
                ("pucch", g.repetitions.pucch),
            ] {
                if let Some(v) = v {
                    if !v.is_power_of_two() || v > MAX_REPETITIONS || !r.repetition_ladder.contains(v) {
                        return Err(Error::config(
                            format!("{at}.repetitions.{name}"),
                            "must be a power of two on the repetition ladder",
                        ));
                    }
                }
            }
        }
        if self.ue_groups.iter().any(|g| matches!(g.traffic, TrafficConfig::Voip(v) if v.voice_period_ms != 20)) {
            return Err(Error::config("ue_groups.traffic.voice_period_ms", "the VoIP scheduler assumes 20 ms frames"));
        }
        self.resolve().map(|_| ())
    }

    /// Loads the tables the scenario refers to.
    pub fn resolve(&self) -> Result<Resolved> {
        let bler = match &self.radio.bler_table {
            Some(p) => BlerModel::load(p)?,
            None => BlerModel::default(),
        };
        let tbs = match &self.radio.tbs_table {
            Some(p) => TbsTable::load(p)?,
            None => TbsTable::default(),
        };
        if self.scheduler.initial_mcs as usize >= bler.mcs_count().min(tbs.mcs_count()) {
            return Err(Error::config("scheduler.initial_mcs", "beyond the MCS tables"));
        }
        let profile = BandwidthProfile::lookup(&self.radio.bandwidth).map_err(|e| relabel(e, "radio.bandwidth"))?;
        let narrowband = match self.radio.narrowband {
            NarrowbandChoice::Auto(_) => choose_narrowband(&profile)?,
            NarrowbandChoice::Index(i) => enumerate_narrowbands(&profile)?
                .into_iter()
                .nth(i)
                .ok_or_else(|| Error::config("radio.narrowband", format!("no narrowband {i} in this bandwidth")))?,
        };
        Ok(Resolved { bler, tbs, profile, narrowband })
    }
}

fn relabel(e: Error, prefix: &str) -> Error {
    match e {
        Error::Config { path, message } => Error::config(format!("{prefix}.{path}"), message),
        Error::Input(m) => Error::config(prefix, m),
        e => e,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
        duration_ms = 1000
        [[ue_groups]]
        count = 3
        traffic = { kind = "bursty" }
    "#;

    #[test]
    fn minimal_scenario_takes_defaults() {
        let s = Scenario::from_toml_str(MINIMAL).unwrap();
        assert_eq!(s.seed, 1);
        assert_eq!(s.layout.rings, 1);
        assert_eq!(s.scheduler.ibler_target, 0.1);
        assert_eq!(s.ue_groups[0].dormancy_timer_ms, 2000);
        let r = s.resolve().unwrap();
        assert_eq!(r.narrowband.nb_index, 7);
    }

    #[test]
    fn unknown_keys_are_errors() {
        let bad = format!("{MINIMAL}\n[layout]\nringz = 2\n");
        let e = Scenario::from_toml_str(&bad).unwrap_err();
        assert!(e.is_config());
        assert!(e.to_string().contains("ringz"), "{e}");
        let bad = MINIMAL.replace("kind = \"bursty\"", "kind = \"bursty\", sizee = 3");
        assert!(Scenario::from_toml_str(&bad).is_err());
    }

    #[test]
    fn validation_names_the_field() {
        let bad = format!("{MINIMAL}\n[scheduler]\nibler_target = 1.5\n");
        let e = Scenario::from_toml_str(&bad).unwrap_err();
        assert!(e.to_string().contains("scheduler.link_adaptation.ibler_target"), "{e}");
        let bad = MINIMAL.replace("count = 3", "count = 0");
        assert!(Scenario::from_toml_str(&bad).unwrap_err().to_string().contains("ue_groups"));
        let bad = format!("{MINIMAL}\n[radio]\nnarrowband = 12\n");
        assert!(Scenario::from_toml_str(&bad).unwrap_err().to_string().contains("radio.narrowband"));
    }

    #[test]
    fn round_trips_through_toml() {
        let s = Scenario::from_toml_str(MINIMAL).unwrap();
        let again = Scenario::from_toml_str(&s.to_toml()).unwrap();
        assert_eq!(s, again);
    }
}
