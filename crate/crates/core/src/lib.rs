//! System-level simulator for LTE Cat-M (eMTC) devices at TTI resolution.
//!
//! The crate is organised bottom-up:
//!
//! - [`radio`]: abstracted PHY (path loss, antenna, repetition combining,
//!   BLER waterfalls, coverage search).
//! - [`grid`]: carrier bandwidth, narrowband placement and the per-TTI
//!   resource grid with its MPDCCH aggregation-unit pool.
//! - [`ue`]: per-device state machines (RRC, dormancy, DRX, RACH,
//!   half-duplex calendar, uplink power control).
//! - [`mac`]: HARQ timing, process concurrency, link adaptation, VoIP
//!   aggregation and the per-TTI scheduler.
//! - [`traffic`]: bursty, VoIP and full-buffer sources.
//! - [`sim`]: scenario files, layout, the TTI engine, KPIs and presets.
//!
//! The guide under `book/` walks through each of these with runnable
//! snippets; those snippets are compiled and run as doctests of this crate.

pub mod error;
pub mod grid;
pub mod mac;
pub mod radio;
pub mod sim;
pub mod traffic;
pub mod ue;

pub use error::{Error, Result};

use serde::{Deserialize, Serialize};

/// Simulation clock tick: one 1 ms subframe.
pub type Tti = u64;

/// Link direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Ul,
    Dl,
}

impl Direction {
    pub const BOTH: [Direction; 2] = [Direction::Ul, Direction::Dl];

    pub fn index(self) -> usize {
        match self {
            Direction::Ul => 0,
            Direction::Dl => 1,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Ul => "ul",
            Direction::Dl => "dl",
        }
    }
}

impl std::fmt::Display for Direction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/intro.md")]
    mod intro {}
    #[doc = include_str!("../../../book/src/scenarios.md")]
    mod scenarios {}
    #[doc = include_str!("../../../book/src/radio.md")]
    mod radio {}
    #[doc = include_str!("../../../book/src/grid.md")]
    mod grid {}
    #[doc = include_str!("../../../book/src/mac.md")]
    mod mac {}
    #[doc = include_str!("../../../book/src/traffic.md")]
    mod traffic {}
    #[doc = include_str!("../../../book/src/studies.md")]
    mod studies {}
    #[doc = include_str!("../../../book/src/outputs.md")]
    mod outputs {}
}
