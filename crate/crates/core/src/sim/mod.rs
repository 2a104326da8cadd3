//! Scenario files, layout, the TTI engine, KPIs and presets.

mod analytic;
mod engine;
mod kpi;
mod layout;
mod presets;
mod scenario;

pub use analytic::{coverage_for_mcs, voip_coverage, VoipCoverageRow, VoipCoverageSetup};
pub use engine::{run, run_many, Engine, PacketState, RunOutput};
pub use kpi::{percentile, write_trace_csv, Audits, CellKpi, KpiReport, TraceRow, UeKpi, UeStats, KPI_COLUMNS};
pub use layout::{build_layout, hex_sites, wrap_offsets, Cell, Layout, Site, UeDrop};
pub use presets::{
    bursty_ul_scenario, fig3_scenario, fig3_sweep, fig4a_sweep, fig4b_pair, fig4c_sweep, fig4d_table, mixed_scenario,
    relative_spread, run_preset, voip_scenario, Artifact, Fig3Point, Fig4dRow, Preset, PresetOptions, PresetOutput,
    SweepPoint, FIG3_CL_DB, FIG3_RL, FIG4A_STEPS, FIG4A_TARGETS, FIG4C_P0_DBM,
};
pub use scenario::{
    AutoTag, InterferenceMode, KpiScope, LayoutConfig, NarrowbandChoice, PowerConfig, RadioConfig,
    RepetitionOverride, Resolved, Scenario, SchedulerConfig, UeGroup,
};
