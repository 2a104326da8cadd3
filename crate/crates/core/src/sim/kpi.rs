//! KPI records and their CSV / JSON forms.
//!
//! Floats are written with six decimals so that two runs of the same
//! scenario produce byte-identical files. Missing values (a percentile with
//! no samples) are written as empty fields.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::Scenario;
use crate::error::Result;
use crate::Tti;

/// Per-UE statistics gathered during a run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct UeStats {
    pub offered_packets: u64,
    pub offered_bits: u64,
    pub delivered_packets: u64,
    pub delivered_bits: u64,
    pub dropped_residual: u64,
    pub budget_violations: u64,
    /// Latency of each delivered packet, ms.
    pub latencies: Vec<u64>,
    /// Packet size over latency for every finished packet; 0 when lost.
    pub packet_rates_bps: Vec<f64>,
    pub first_tx: u64,
    pub first_tx_nack: u64,
    pub blocks_done: u64,
    pub blocks_lost: u64,
    pub sinr_db_sum: [f64; 2],
    pub sinr_samples: [u64; 2],
    pub ul_power_dbm_sum: f64,
    pub ul_power_samples: u64,
    pub grants: u64,
    pub coverage_limited_grants: u64,
}

/// One row of the KPI table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UeKpi {
    /// UE id, or `all` for the aggregate row.
    pub ue: String,
    pub cell: Option<usize>,
    pub in_scope: bool,
    pub coupling_loss_db: Option<f64>,
    pub offered_packets: u64,
    pub delivered_packets: u64,
    pub dropped_residual: u64,
    pub budget_violations: u64,
    pub in_flight_packets: u64,
    pub queued_packets: u64,
    pub offered_bits: u64,
    pub delivered_bits: u64,
    pub served_throughput_bps: f64,
    pub user_throughput_bps: Option<f64>,
    pub latency_mean_ms: Option<f64>,
    pub latency_p50_ms: Option<f64>,
    pub latency_p95_ms: Option<f64>,
    pub latency_p99_ms: Option<f64>,
    pub residual_bler: Option<f64>,
    pub first_tx_bler: Option<f64>,
    pub budget_violation_rate: Option<f64>,
    pub mean_ul_sinr_db: Option<f64>,
    pub mean_dl_sinr_db: Option<f64>,
    pub mean_ul_power_dbm: Option<f64>,
    pub rach_attempts: u64,
    pub rach_overhead_prb_ttis: u64,
    pub grants: u64,
    pub coverage_limited_grants: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellKpi {
    pub cell: usize,
    pub prb_utilization: f64,
    pub mpdcch_utilization: f64,
}

/// Audit counters. A run that breaches an invariant stops with an error, so
/// in a finished report the violation counts are always zero; they are kept
/// to make that visible in the output.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Audits {
    pub ttis_audited: u64,
    pub conservation_checks: u64,
    pub half_duplex_violations: u64,
    pub capacity_violations: u64,
    pub conservation_violations: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KpiReport {
    pub scenario: Scenario,
    pub duration_ms: u64,
    pub narrowband: usize,
    pub ues: Vec<UeKpi>,
    pub aggregate: UeKpi,
    pub cells: Vec<CellKpi>,
    pub audits: Audits,
}

/// One data TTI on air.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub tti: Tti,
    pub ue: u32,
    pub cell: usize,
    pub direction: &'static str,
    pub purpose: &'static str,
    pub attempt: u32,
    pub mcs: u8,
    pub n_prbs: u8,
    pub rl_data: u32,
    pub tx_power_dbm: Option<f64>,
    pub sinr_db: f64,
}

/// Nearest-rank percentile of sorted samples.
pub fn percentile(sorted: &[u64], p: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let rank = ((p / 100.0) * sorted.len() as f64).ceil().max(1.0) as usize;
    Some(sorted[rank.min(sorted.len()) - 1] as f64)
}

fn mean(v: impl IntoIterator<Item = f64>) -> Option<f64> {
    let (mut s, mut n) = (0.0, 0u64);
    for x in v {
        s += x;
        n += 1;
    }
    (n > 0).then(|| s / n as f64)
}

fn ratio(a: u64, b: u64) -> Option<f64> {
    (b > 0).then(|| a as f64 / b as f64)
}

/// Everything needed to turn one UE's stats into a row.
pub(crate) struct RowInput<'a> {
    pub ue: String,
    pub cell: Option<usize>,
    pub in_scope: bool,
    pub coupling_loss_db: Option<f64>,
    pub stats: Vec<&'a UeStats>,
    pub in_flight: u64,
    pub queued: u64,
    pub rach_attempts: u64,
    pub rach_overhead: u64,
    pub duration_ms: u64,
    pub voip: bool,
}

pub(crate) fn build_row(r: RowInput<'_>) -> UeKpi {
    let sum = |f: fn(&UeStats) -> u64| r.stats.iter().map(|s| f(s)).sum::<u64>();
    let mut lat: Vec<u64> = r.stats.iter().flat_map(|s| s.latencies.iter().copied()).collect();
    lat.sort_unstable();
    let delivered_bits = sum(|s| s.delivered_bits);
    let secs = r.duration_ms as f64 / 1000.0;
    let served = if secs > 0.0 {
        // mean per UE, so the aggregate row is comparable to a single UE
        delivered_bits as f64 / secs / r.stats.len().max(1) as f64
    } else {
        0.0
    };
    let sinr = |d: usize| {
        let n: u64 = r.stats.iter().map(|s| s.sinr_samples[d]).sum();
        let s: f64 = r.stats.iter().map(|s| s.sinr_db_sum[d]).sum();
        (n > 0).then(|| s / n as f64)
    };
    let power_n: u64 = sum(|s| s.ul_power_samples);
    let power_s: f64 = r.stats.iter().map(|s| s.ul_power_dbm_sum).sum();
    let finished = sum(|s| s.delivered_packets + s.dropped_residual + s.budget_violations);
    UeKpi {
        ue: r.ue,
        cell: r.cell,
        in_scope: r.in_scope,
        coupling_loss_db: r.coupling_loss_db,
        offered_packets: sum(|s| s.offered_packets),
        delivered_packets: sum(|s| s.delivered_packets),
        dropped_residual: sum(|s| s.dropped_residual),
        budget_violations: sum(|s| s.budget_violations),
        in_flight_packets: r.in_flight,
        queued_packets: r.queued,
        offered_bits: sum(|s| s.offered_bits),
        delivered_bits,
        served_throughput_bps: served,
        user_throughput_bps: mean(r.stats.iter().flat_map(|s| s.packet_rates_bps.iter().copied())),
        latency_mean_ms: mean(lat.iter().map(|&x| x as f64)),
        latency_p50_ms: percentile(&lat, 50.0),
        latency_p95_ms: percentile(&lat, 95.0),
        latency_p99_ms: percentile(&lat, 99.0),
        residual_bler: ratio(sum(|s| s.blocks_lost), sum(|s| s.blocks_done)),
        first_tx_bler: ratio(sum(|s| s.first_tx_nack), sum(|s| s.first_tx)),
        budget_violation_rate: if r.voip { ratio(sum(|s| s.budget_violations), finished) } else { None },
        mean_ul_sinr_db: sinr(0),
        mean_dl_sinr_db: sinr(1),
        mean_ul_power_dbm: (power_n > 0).then(|| power_s / power_n as f64),
        rach_attempts: r.rach_attempts,
        rach_overhead_prb_ttis: r.rach_overhead,
        grants: sum(|s| s.grants),
        coverage_limited_grants: sum(|s| s.coverage_limited_grants),
    }
}

/// Column names of the KPI CSV, in order.
pub const KPI_COLUMNS: [&str; 29] = [
    "ue",
    "cell",
    "in_scope",
    "coupling_loss_db",
    "offered_packets",
    "delivered_packets",
    "dropped_residual",
    "budget_violations",
    "in_flight_packets",
    "queued_packets",
    "offered_bits",
    "delivered_bits",
    "served_throughput_bps",
    "user_throughput_bps",
    "latency_mean_ms",
    "latency_p50_ms",
    "latency_p95_ms",
    "latency_p99_ms",
    "residual_bler",
    "first_tx_bler",
    "budget_violation_rate",
    "mean_ul_sinr_db",
    "mean_dl_sinr_db",
    "mean_ul_power_dbm",
    "rach_attempts",
    "rach_overhead_prb_ttis",
    "grants",
    "coverage_limited_grants",
    "scope",
];

pub(crate) fn f6(x: f64) -> String {
    format!("{x:.6}")
}

fn opt(x: Option<f64>) -> String {
    x.map(f6).unwrap_or_default()
}

impl UeKpi {
    fn record(&self, scope: &str) -> Vec<String> {
        vec![
            self.ue.clone(),
            self.cell.map(|c| c.to_string()).unwrap_or_default(),
            self.in_scope.to_string(),
            opt(self.coupling_loss_db),
            self.offered_packets.to_string(),
            self.delivered_packets.to_string(),
            self.dropped_residual.to_string(),
            self.budget_violations.to_string(),
            self.in_flight_packets.to_string(),
            self.queued_packets.to_string(),
            self.offered_bits.to_string(),
            self.delivered_bits.to_string(),
            f6(self.served_throughput_bps),
            opt(self.user_throughput_bps),
            opt(self.latency_mean_ms),
            opt(self.latency_p50_ms),
            opt(self.latency_p95_ms),
            opt(self.latency_p99_ms),
            opt(self.residual_bler),
            opt(self.first_tx_bler),
            opt(self.budget_violation_rate),
            opt(self.mean_ul_sinr_db),
            opt(self.mean_dl_sinr_db),
            opt(self.mean_ul_power_dbm),
            self.rach_attempts.to_string(),
            self.rach_overhead_prb_ttis.to_string(),
            self.grants.to_string(),
            self.coverage_limited_grants.to_string(),
            scope.to_string(),
        ]
    }

    /// Packets accounted for: delivered, lost, in flight or queued.
    pub fn accounted_packets(&self) -> u64 {
        self.delivered_packets
            + self.dropped_residual
            + self.budget_violations
            + self.in_flight_packets
            + self.queued_packets
    }
}

impl KpiReport {
    /// Per-UE rows followed by the aggregate row.
    pub fn write_kpi_csv(&self, w: impl Write) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(KPI_COLUMNS)?;
        for u in &self.ues {
            out.write_record(u.record("ue"))?;
        }
        let scope = match self.scenario.layout.kpi_scope {
            super::KpiScope::Center => "center",
            super::KpiScope::All => "all",
        };
        out.write_record(self.aggregate.record(scope))?;
        out.flush()?;
        Ok(())
    }

    pub fn kpi_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_kpi_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is utf-8")
    }

    pub fn write_cells_csv(&self, w: impl Write) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["cell", "prb_utilization", "mpdcch_utilization"])?;
        for c in &self.cells {
            out.write_record([c.cell.to_string(), f6(c.prb_utilization), f6(c.mpdcch_utilization)])?;
        }
        out.flush()?;
        Ok(())
    }

    /// Machine-readable summary including the full resolved scenario.
    pub fn summary_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }

    /// A few lines for people.
    pub fn summary_text(&self) -> String {
        let a = &self.aggregate;
        let o = |x: Option<f64>| x.map_or("-".to_string(), |v| format!("{v:.1}"));
        format!(
            "scenario {} seed {} duration {} ms, narrowband {}\n\
             packets offered {} delivered {} lost {} late {}\n\
             served throughput {:.1} bit/s per UE, user throughput {} bit/s\n\
             latency ms mean {} p50 {} p95 {} p99 {}\n\
             residual bler {}, first-tx bler {}\n",
            self.scenario.name,
            self.scenario.seed,
            self.duration_ms,
            self.narrowband,
            a.offered_packets,
            a.delivered_packets,
            a.dropped_residual,
            a.budget_violations,
            a.served_throughput_bps,
            o(a.user_throughput_bps),
            o(a.latency_mean_ms),
            o(a.latency_p50_ms),
            o(a.latency_p95_ms),
            o(a.latency_p99_ms),
            a.residual_bler.map_or("-".into(), |v| format!("{v:.4}")),
            a.first_tx_bler.map_or("-".into(), |v| format!("{v:.4}")),
        )
    }
}

pub fn write_trace_csv(rows: &[TraceRow], w: impl Write) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "tti", "ue", "cell", "direction", "purpose", "attempt", "mcs", "n_prbs", "rl_data", "tx_power_dbm", "sinr_db",
    ])?;
    for r in rows {
        out.write_record([
            r.tti.to_string(),
            r.ue.to_string(),
            r.cell.to_string(),
            r.direction.to_string(),
            r.purpose.to_string(),
            r.attempt.to_string(),
            r.mcs.to_string(),
            r.n_prbs.to_string(),
            r.rl_data.to_string(),
            opt(r.tx_power_dbm),
            f6(r.sinr_db),
        ])?;
    }
    out.flush()?;
    Ok(())
}
