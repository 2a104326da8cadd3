//! Per-device protocol state: RRC and random access, DRX, the half-duplex
//! calendar, coverage tiers and uplink power control.

mod calendar;
mod ce;
mod context;
mod drx;
mod power;
mod rach;

pub use calendar::{Activity, Conflict, HalfDuplexCalendar, Slot};
pub use ce::{CeConfig, CeTier, CeTierTable};
pub use context::{
    step_rrc, AccessPhase, LinkEstimates, RrcEvents, RrcState, RrcTransition, UeContext, UeSettings,
};
pub use drx::DrxConfig;
pub use power::{tx_power, PowerControlState, PowerMode, TpcConfig, TpcController};
pub use rach::{RachAttempt, RachConfig, RachOutcome, PRACH_PRBS};
