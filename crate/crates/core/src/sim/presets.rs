//! Canned studies: the scenarios behind each figure and table, the sweeps
//! over them and the CSV they produce.
//!
//! Cell and UE counts are desk-scale choices; the studies they reproduce
//! do not state theirs.

use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::kpi::f6;
use super::{coverage_for_mcs, run, voip_coverage, KpiReport, RunOutput, Scenario, VoipCoverageSetup};
use crate::error::{Error, Result};
use crate::mac::TbsTable;
use crate::radio::{BlerModel, RepetitionLadder};
use crate::ue::PowerMode;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Preset {
    Fig3,
    Fig4a,
    Fig4b,
    Fig4c,
    Fig4d,
    Table2,
    Voip,
}

impl Preset {
    pub const ALL: [Preset; 7] =
        [Preset::Fig3, Preset::Fig4a, Preset::Fig4b, Preset::Fig4c, Preset::Fig4d, Preset::Table2, Preset::Voip];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Fig3 => "fig3",
            Preset::Fig4a => "fig4a",
            Preset::Fig4b => "fig4b",
            Preset::Fig4c => "fig4c",
            Preset::Fig4d => "fig4d",
            Preset::Table2 => "table2",
            Preset::Voip => "voip",
        }
    }

    /// Simulated time per run when not overridden.
    pub fn default_duration_ms(self) -> u64 {
        match self {
            Preset::Fig3 => 200_000,
            Preset::Fig4a | Preset::Fig4b | Preset::Fig4c => 60_000,
            Preset::Voip => 20_000,
            Preset::Fig4d | Preset::Table2 => 0,
        }
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL.into_iter().find(|p| p.name() == s).ok_or_else(|| {
            let names: Vec<_> = Preset::ALL.iter().map(|p| p.name()).collect();
            Error::config("preset", format!("unknown preset `{s}`, expected one of {}", names.join(", ")))
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PresetOptions {
    pub seed: u64,
    pub duration_ms: Option<u64>,
    /// Seeds per point for the stochastic sweeps.
    pub seeds: u32,
}

impl Default for PresetOptions {
    fn default() -> Self {
        Self { seed: 1, duration_ms: None, seeds: 5 }
    }
}

/// One output file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Artifact {
    pub name: String,
    pub contents: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PresetOutput {
    pub artifacts: Vec<Artifact>,
    pub summary: String,
}

fn scenario(toml: &str) -> Scenario {
    Scenario::from_toml_str(toml).expect("preset scenarios are valid")
}

/// A single UE at a fixed coupling loss receiving bursty downlink data,
/// with MPDCCH and PUCCH repetitions pinned to 4 and 8.
pub fn fig3_scenario(coupling_loss_db: f64, rl_data: u32, seed: u64, duration_ms: u64) -> Scenario {
    scenario(&format!(
        r#"
        name = "fig3"
        seed = {seed}
        duration_ms = {duration_ms}
        [layout]
        rings = 0
        sectors = 1
        [[ue_groups]]
        count = 1
        fixed_coupling_loss_db = {coupling_loss_db:?}
        traffic = {{ kind = "bursty", direction = "dl" }}
        repetitions = {{ mpdcch = 4, pucch = 8, data = {rl_data} }}
        "#
    ))
}

/// Uplink bursty readings of 1000 bits in a 7-site, 21-cell layout.
pub fn bursty_ul_scenario(seed: u64, duration_ms: u64) -> Scenario {
    scenario(&format!(
        r#"
        name = "bursty-ul"
        seed = {seed}
        duration_ms = {duration_ms}
        [layout]
        kpi_scope = "all"
        [[ue_groups]]
        count = 63
        traffic = {{ kind = "bursty", direction = "ul", size_bits = 1000 }}
        "#
    ))
}

/// Bursty and VoIP UEs together in a 7-site layout.
pub fn mixed_scenario(seed: u64, duration_ms: u64) -> Scenario {
    scenario(&format!(
        r#"
        name = "mixed"
        seed = {seed}
        duration_ms = {duration_ms}
        [layout]
        kpi_scope = "all"
        [[ue_groups]]
        count = 25
        traffic = {{ kind = "bursty", direction = "ul" }}
        [[ue_groups]]
        count = 25
        traffic = {{ kind = "voip" }}
        "#
    ))
}

/// VoIP UEs at fixed coupling losses in one omni cell.
pub fn voip_scenario(coupling_loss_db: f64, aggregation: bool, seed: u64, duration_ms: u64) -> Scenario {
    scenario(&format!(
        r#"
        name = "voip"
        seed = {seed}
        duration_ms = {duration_ms}
        [layout]
        rings = 0
        sectors = 1
        [scheduler]
        voip_aggregation = {aggregation}
        [[ue_groups]]
        count = 4
        fixed_coupling_loss_db = {coupling_loss_db:?}
        start_connected = true
        traffic = {{ kind = "voip" }}
        "#
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fig3Point {
    pub coupling_loss_db: f64,
    pub rl_data: u32,
    pub seed: u64,
    pub offered_packets: u64,
    pub delivered_packets: u64,
    pub user_throughput_bps: Option<f64>,
    pub latency_mean_ms: Option<f64>,
    pub residual_bler: Option<f64>,
}

/// Runs every (coupling loss, repetition, seed) combination.
pub fn fig3_sweep(cls: &[f64], rls: &[u32], seeds: &[u64], duration_ms: u64) -> Result<Vec<Fig3Point>> {
    let mut jobs = Vec::new();
    for &cl in cls {
        for &rl in rls {
            for &s in seeds {
                jobs.push((cl, rl, s));
            }
        }
    }
    jobs.par_iter()
        .map(|&(cl, rl, s)| {
            let r = run(&fig3_scenario(cl, rl, s, duration_ms), false)?.report;
            let a = &r.aggregate;
            Ok(Fig3Point {
                coupling_loss_db: cl,
                rl_data: rl,
                seed: s,
                offered_packets: a.offered_packets,
                delivered_packets: a.delivered_packets,
                user_throughput_bps: a.user_throughput_bps,
                latency_mean_ms: a.latency_mean_ms,
                residual_bler: a.residual_bler,
            })
        })
        .collect()
}

/// Outer-loop settings compared in the link adaptation study.
pub const FIG4A_TARGETS: [f64; 3] = [0.05, 0.10, 0.20];
/// Step-up sizes, dB: fast and slow.
pub const FIG4A_STEPS: [(&str, f64); 2] = [("fast", 0.5), ("slow", 0.05)];

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub label: String,
    pub report: KpiReport,
}

fn sweep(scenarios: Vec<(String, Scenario)>) -> Result<Vec<SweepPoint>> {
    scenarios
        .into_par_iter()
        .map(|(label, sc)| Ok(SweepPoint { label, report: run(&sc, false)?.report }))
        .collect()
}

pub fn fig4a_sweep(seed: u64, duration_ms: u64) -> Result<Vec<SweepPoint>> {
    let mut v = Vec::new();
    for t in FIG4A_TARGETS {
        for (name, step) in FIG4A_STEPS {
            let mut sc = bursty_ul_scenario(seed, duration_ms);
            sc.name = format!("fig4a-ibler{t}-{name}");
            sc.scheduler.ibler_target = t;
            sc.scheduler.step_up_db = step;
            v.push((format!("{t},{name}"), sc));
        }
    }
    sweep(v)
}

/// Open- and closed-loop runs of the same world, with per-TTI traces.
pub fn fig4b_pair(seed: u64, duration_ms: u64) -> Result<(RunOutput, RunOutput)> {
    let mk = |mode| {
        let mut sc = bursty_ul_scenario(seed, duration_ms);
        sc.name = format!("fig4b-{mode:?}").to_lowercase();
        sc.power.mode = mode;
        sc.ue_groups[0].dormancy_timer_ms = 2000;
        sc
    };
    let runs: Vec<Result<RunOutput>> =
        [PowerMode::Olpc, PowerMode::Clpc].into_par_iter().map(|m| run(&mk(m), true)).collect();
    let mut it = runs.into_iter();
    let olpc = it.next().expect("two runs")?;
    let clpc = it.next().expect("two runs")?;
    Ok((olpc, clpc))
}

pub const FIG4C_P0_DBM: [f64; 5] = [-115.0, -110.0, -105.0, -100.0, -95.0];

pub fn fig4c_sweep(seed: u64, duration_ms: u64) -> Result<Vec<SweepPoint>> {
    let v = FIG4C_P0_DBM
        .iter()
        .map(|&p0| {
            let mut sc = bursty_ul_scenario(seed, duration_ms);
            sc.name = format!("fig4c-p0{p0}");
            sc.power.p0_dbm = p0;
            (format!("{p0}"), sc)
        })
        .collect();
    sweep(v)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fig4dRow {
    pub mcs: u8,
    pub rl_data: u32,
    pub mcl_db: Option<f64>,
}

/// Uplink coverage of a 1000-bit packet per initial MCS and repetition.
pub fn fig4d_table(packet_bits: u32) -> Result<Vec<Fig4dRow>> {
    let (m, t, l) = (BlerModel::default(), TbsTable::default(), RepetitionLadder::default());
    let mut out = Vec::new();
    for rl in [1, 4, 16, 32] {
        for mcs in 0..m.mcs_count().min(t.mcs_count()) as u8 {
            let c = coverage_for_mcs(mcs, packet_bits, rl, 4, 20.0, &m, &t, &l)?;
            out.push(Fig4dRow { mcs, rl_data: rl, mcl_db: c.mcl_db() });
        }
    }
    Ok(out)
}

fn csv_string(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv is utf-8"))
}

fn opt(x: Option<f64>) -> String {
    x.map(f6).unwrap_or_default()
}

fn kpi_rows(points: &[SweepPoint], label: &str) -> Result<String> {
    let header = [
        label,
        "offered_packets",
        "delivered_packets",
        "user_throughput_bps",
        "latency_mean_ms",
        "latency_p95_ms",
        "first_tx_bler",
        "residual_bler",
        "mean_ul_power_dbm",
        "mean_ul_sinr_db",
    ];
    csv_string(
        &header,
        points.iter().map(|p| {
            let a = &p.report.aggregate;
            vec![
                p.label.clone(),
                a.offered_packets.to_string(),
                a.delivered_packets.to_string(),
                opt(a.user_throughput_bps),
                opt(a.latency_mean_ms),
                opt(a.latency_p95_ms),
                opt(a.first_tx_bler),
                opt(a.residual_bler),
                opt(a.mean_ul_power_dbm),
                opt(a.mean_ul_sinr_db),
            ]
        }),
    )
}

/// Coupling losses of the repetition sweep, dB.
pub const FIG3_CL_DB: [f64; 8] = [100.0, 110.0, 120.0, 130.0, 140.0, 145.0, 150.0, 155.0];
pub const FIG3_RL: [u32; 6] = [1, 2, 4, 8, 16, 32];

/// Relative spread `(max - min) / mean`.
pub fn relative_spread(v: &[f64]) -> f64 {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = v.iter().copied().fold(f64::INFINITY, f64::min);
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    (max - min) / mean
}

pub fn run_preset(p: Preset, o: &PresetOptions) -> Result<PresetOutput> {
    let dur = o.duration_ms.unwrap_or(p.default_duration_ms());
    let seeds: Vec<u64> = (0..u64::from(o.seeds.max(1))).map(|i| o.seed + i).collect();
    let art = |name: &str, contents: String| Artifact { name: name.to_string(), contents };
    Ok(match p {
        Preset::Fig3 => {
            let pts = fig3_sweep(&FIG3_CL_DB, &FIG3_RL, &seeds, dur)?;
            let csv = csv_string(
                &[
                    "coupling_loss_db",
                    "rl_data",
                    "seed",
                    "offered_packets",
                    "delivered_packets",
                    "user_throughput_bps",
                    "latency_mean_ms",
                    "residual_bler",
                ],
                pts.iter().map(|x| {
                    vec![
                        f6(x.coupling_loss_db),
                        x.rl_data.to_string(),
                        x.seed.to_string(),
                        x.offered_packets.to_string(),
                        x.delivered_packets.to_string(),
                        opt(x.user_throughput_bps),
                        opt(x.latency_mean_ms),
                        opt(x.residual_bler),
                    ]
                }),
            )?;
            let mut summary = String::from("coupling_loss_db rl mean_user_throughput_bps\n");
            for cl in FIG3_CL_DB {
                for rl in FIG3_RL {
                    let v: Vec<f64> = pts
                        .iter()
                        .filter(|x| x.coupling_loss_db == cl && x.rl_data == rl)
                        .map(|x| x.user_throughput_bps.unwrap_or(0.0))
                        .collect();
                    summary += &format!("{cl:.0} {rl} {:.1}\n", v.iter().sum::<f64>() / v.len() as f64);
                }
            }
            PresetOutput { artifacts: vec![art("fig3.csv", csv)], summary }
        }
        Preset::Fig4a => {
            let pts = fig4a_sweep(o.seed, dur)?;
            let tput: Vec<f64> = pts.iter().map(|p| p.report.aggregate.user_throughput_bps.unwrap_or(0.0)).collect();
            let summary = format!("user throughput relative spread {:.4}\n", relative_spread(&tput));
            let csv = kpi_rows(&pts, "ibler_target_step")?;
            PresetOutput { artifacts: vec![art("fig4a.csv", csv)], summary }
        }
        Preset::Fig4b => {
            let (ol, cl) = fig4b_pair(o.seed, dur)?;
            let same = ol.trace == cl.trace;
            let mut trace = Vec::new();
            super::write_trace_csv(ol.trace.as_deref().unwrap_or_default(), &mut trace)?;
            let pts = vec![
                SweepPoint { label: "olpc".into(), report: ol.report },
                SweepPoint { label: "clpc".into(), report: cl.report },
            ];
            let csv = kpi_rows(&pts, "power_control")?;
            PresetOutput {
                artifacts: vec![
                    art("fig4b.csv", csv),
                    art("fig4b_trace_olpc.csv", String::from_utf8(trace).expect("utf-8")),
                ],
                summary: format!("per-TTI power traces identical: {same}\n"),
            }
        }
        Preset::Fig4c => {
            let pts = fig4c_sweep(o.seed, dur)?;
            PresetOutput { artifacts: vec![art("fig4c.csv", kpi_rows(&pts, "p0_dbm")?)], summary: String::new() }
        }
        Preset::Fig4d => {
            let rows = fig4d_table(1000)?;
            let csv = csv_string(
                &["mcs", "rl_data", "mcl_db"],
                rows.iter().map(|r| vec![r.mcs.to_string(), r.rl_data.to_string(), opt(r.mcl_db)]),
            )?;
            PresetOutput { artifacts: vec![art("fig4d.csv", csv)], summary: String::new() }
        }
        Preset::Table2 => {
            let (m, t, l) = (BlerModel::default(), TbsTable::default(), RepetitionLadder::default());
            let setup = VoipCoverageSetup::default();
            let rows: Vec<_> = [8, 16, 32].iter().map(|&rl| voip_coverage(rl, &setup, &m, &t, &l)).collect::<Result<_>>()?;
            let mut summary = String::new();
            for r in &rows {
                summary += &format!(
                    "RL {:>2}: bundle {} x 20 ms, TBS {} bits, {} attempts, MCL {}\n",
                    r.rl_pusch,
                    r.aggregation,
                    r.tbs_bits,
                    r.attempts,
                    r.mcl_db.map_or("-".into(), |x| format!("{x:.1} dB"))
                );
            }
            let csv = csv_string(
                &["rl_pusch", "aggregation", "tbs_bits", "attempts", "mcs", "mcl_db"],
                rows.iter().map(|r| {
                    vec![
                        r.rl_pusch.to_string(),
                        r.aggregation.to_string(),
                        r.tbs_bits.to_string(),
                        r.attempts.to_string(),
                        r.mcs.map(|m| m.to_string()).unwrap_or_default(),
                        opt(r.mcl_db),
                    ]
                }),
            )?;
            PresetOutput { artifacts: vec![art("table2.csv", csv)], summary }
        }
        Preset::Voip => {
            let mut v = Vec::new();
            for cl in [120.0, 135.0, 145.0] {
                for agg in [true, false] {
                    v.push((format!("{cl},{agg}"), voip_scenario(cl, agg, o.seed, dur)));
                }
            }
            let pts = sweep(v)?;
            let csv = csv_string(
                &[
                    "coupling_loss_db",
                    "aggregation",
                    "offered_packets",
                    "delivered_packets",
                    "budget_violations",
                    "dropped_residual",
                    "budget_violation_rate",
                    "latency_p50_ms",
                    "latency_p95_ms",
                    "latency_p99_ms",
                ],
                pts.iter().map(|p| {
                    let a = &p.report.aggregate;
                    let mut r: Vec<String> = p.label.split(',').map(str::to_string).collect();
                    r.extend([
                        a.offered_packets.to_string(),
                        a.delivered_packets.to_string(),
                        a.budget_violations.to_string(),
                        a.dropped_residual.to_string(),
                        opt(a.budget_violation_rate),
                        opt(a.latency_p50_ms),
                        opt(a.latency_p95_ms),
                        opt(a.latency_p99_ms),
                    ]);
                    r
                }),
            )?;
            PresetOutput { artifacts: vec![art("voip.csv", csv)], summary: String::new() }
        }
    })
}
