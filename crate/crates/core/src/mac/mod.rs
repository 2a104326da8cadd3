//! eNB MAC: HARQ timing, process concurrency, link adaptation, VoIP
//! aggregation and the per-TTI scheduler.

mod concurrency;
mod harq;
mod link_adaptation;
mod scheduler;
mod tbs;
mod timeline;
mod voip;

pub use concurrency::{max_concurrent_harq, process_footprint, schedule_length, Duplex};
pub use harq::{
    FeedbackResult, Grant, GrantPurpose, HarqProcess, HarqState, Segment, TransportBlock, AGL_LEVELS,
};
pub use link_adaptation::{
    format_cost, outer_loop_update, select_transmission, LinkAdaptationState, SelectionContext, TxFormat,
    OLLA_OFFSET_LIMIT_DB,
};
pub use tbs::TbsTable;
pub use timeline::{
    derive_timeline, harq_cycle_ms, RepetitionConfig, Span, Timeline, DATA_TO_ACK,
    DL_GRANT_TO_DATA, FEEDBACK_TO_REGRANT, MAX_REPETITIONS, UL_GRANT_TO_DATA,
};
pub use scheduler::{
    calendar_requests, commit_grant, grid_requests, schedule_tti, Calendars, Committed, GrantRequest,
};
pub use voip::{aggregation_factor, segment_sizes, voip_build, VoipBuild, VoipPacket, VOICE_PERIOD_MS};
