//! Carrier bandwidth structure, narrowband placement and per-TTI resource
//! bookkeeping.

mod bandwidth;
mod narrowband;
mod resource;

pub use bandwidth::{standard_narrowband_starts, BandwidthProfile, NARROWBAND_PRBS};
pub use narrowband::{choose_narrowband, enumerate_narrowbands, NarrowbandPlan};
pub use resource::{
    Binding, Booked, Booking, Owner, Rejection, Request, Reservation, ResourceGrid, TtiUsage,
    MPDCCH_UNITS,
};
