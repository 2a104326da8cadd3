//! Grants, transport blocks and HARQ processes.

use serde::{Deserialize, Serialize};

use super::{Span, Timeline};
use crate::error::{Error, Result};
use crate::{Direction, Tti};

/// Aggregation levels a grant may use.
pub const AGL_LEVELS: [u8; 5] = [2, 4, 8, 16, 24];

/// Why a grant was issued; also its scheduling priority class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GrantPurpose {
    Retransmission,
    RachResponse,
    SchedulingRequest,
    Voip,
    Bursty,
}

impl GrantPurpose {
    pub fn as_str(self) -> &'static str {
        match self {
            GrantPurpose::Retransmission => "retx",
            GrantPurpose::RachResponse => "rar",
            GrantPurpose::SchedulingRequest => "sr",
            GrantPurpose::Voip => "voip",
            GrantPurpose::Bursty => "bursty",
        }
    }
}

/// An MPDCCH allocation with everything it implies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grant {
    pub ue_id: u32,
    pub direction: Direction,
    pub purpose: GrantPurpose,
    pub process_id: u8,
    /// 1 for a first transmission.
    pub attempt: u32,
    pub mcs: u8,
    pub tbs_bits: u32,
    pub n_prbs: u8,
    pub prb_mask: u8,
    pub agl: u8,
    pub rl_mpdcch: u32,
    pub rl_data: u32,
    pub rl_ack: u32,
    pub timeline: Timeline,
    /// PUSCH power, uplink only.
    pub tx_power_dbm: Option<f64>,
}

/// Bits of one packet carried in a transport block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub packet: usize,
    pub bits: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportBlock {
    pub direction: Direction,
    pub purpose: GrantPurpose,
    pub tbs_bits: u32,
    pub payload: Vec<Segment>,
    pub mcs: u8,
    pub n_prbs: u8,
    /// Fixed when the block is first sent.
    pub rl_data: u32,
    pub coverage_limited: bool,
    /// Sum of linear per-repetition SINR over every attempt so far.
    pub combined_sinr_lin: f64,
    pub combined_reps: u32,
}

impl TransportBlock {
    pub fn payload_bits(&self) -> u32 {
        self.payload.iter().map(|s| s.bits).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HarqState {
    Empty,
    /// Holding a block that needs a (re)transmission grant.
    WaitingTx,
    /// Granted; MPDCCH or data still on air.
    InFlight,
    /// Data done, waiting for the decode result to be fed back.
    AwaitingFeedback,
}

/// What feedback did to the process.
#[derive(Debug, Clone, PartialEq)]
pub enum FeedbackResult {
    Delivered(TransportBlock),
    Retry,
    /// NACK on the last allowed attempt.
    Exhausted(TransportBlock),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarqProcess {
    pub process_id: u8,
    pub state: HarqState,
    pub tb: Option<TransportBlock>,
    pub attempt_count: u32,
    pub max_attempts: u32,
    pub first_arrival_tti: Tti,
    /// Earliest TTI for the next grant on this process.
    pub next_eligible: Tti,
    pub timeline: Option<Timeline>,
}

impl HarqProcess {
    pub fn new(process_id: u8, max_attempts: u32) -> Self {
        Self {
            process_id,
            state: HarqState::Empty,
            tb: None,
            attempt_count: 0,
            max_attempts,
            first_arrival_tti: 0,
            next_eligible: 0,
            timeline: None,
        }
    }

    pub fn is_idle(&self, t: Tti) -> bool {
        self.state == HarqState::Empty && t >= self.next_eligible
    }

    pub fn needs_retx(&self, t: Tti) -> bool {
        self.state == HarqState::WaitingTx && self.attempt_count > 0 && t >= self.next_eligible
    }

    fn bug(&self, what: &str, t: Tti) -> Error {
        Error::invariant(t, format!("harq process {}: {what} in state {:?}", self.process_id, self.state))
    }

    /// Starts an attempt: the first loads `tb`, later ones reuse the held
    /// block and must keep its repetition length.
    pub fn start_attempt(
        &mut self,
        t: Tti,
        timeline: Timeline,
        rl_data: u32,
        tb: Option<TransportBlock>,
        first_arrival: Tti,
    ) -> Result<()> {
        match (self.state, tb) {
            (HarqState::Empty, Some(tb)) => {
                if tb.rl_data != rl_data {
                    return Err(self.bug("block repetition disagrees with grant", t));
                }
                self.tb = Some(tb);
                self.attempt_count = 0;
                self.first_arrival_tti = first_arrival;
            }
            (HarqState::WaitingTx, None) => {
                let held = self.tb.as_ref().ok_or_else(|| self.bug("retransmission without block", t))?;
                if held.rl_data != rl_data {
                    return Err(self.bug("repetition length changed between attempts", t));
                }
            }
            _ => return Err(self.bug("unexpected grant", t)),
        }
        if self.attempt_count >= self.max_attempts {
            return Err(self.bug("attempt beyond max_attempts", t));
        }
        self.attempt_count += 1;
        self.state = HarqState::InFlight;
        self.timeline = Some(timeline);
        self.next_eligible = timeline.next_grant;
        Ok(())
    }

    /// Records one attempt's data reception quality.
    pub fn data_done(&mut self, t: Tti, sinr_lin_sum: f64, reps: u32) -> Result<()> {
        if self.state != HarqState::InFlight {
            return Err(self.bug("data completion", t));
        }
        let tb = self.tb.as_mut().ok_or_else(|| Error::invariant(t, "in-flight process without block"))?;
        tb.combined_sinr_lin += sinr_lin_sum;
        tb.combined_reps += reps;
        self.state = HarqState::AwaitingFeedback;
        Ok(())
    }

    pub fn feedback(&mut self, t: Tti, ack: bool) -> Result<FeedbackResult> {
        if self.state != HarqState::AwaitingFeedback {
            return Err(self.bug("feedback", t));
        }
        if !ack && self.attempt_count < self.max_attempts {
            self.state = HarqState::WaitingTx;
            return Ok(FeedbackResult::Retry);
        }
        let tb = self.tb.take().ok_or_else(|| Error::invariant(t, "feedback without block"))?;
        self.state = HarqState::Empty;
        self.attempt_count = 0;
        self.timeline = None;
        Ok(if ack { FeedbackResult::Delivered(tb) } else { FeedbackResult::Exhausted(tb) })
    }

    /// Span of the data channel of the current attempt, if any.
    pub fn data_span(&self) -> Option<Span> {
        self.timeline.map(|tl| tl.data)
    }
}
