//! Per-device state and the RRC / random-access state machine.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{
    Activity, CeConfig, DrxConfig, HalfDuplexCalendar, PowerControlState, RachAttempt, RachConfig,
    RachOutcome, TpcConfig, TpcController,
};
use crate::error::{Error, Result};
use crate::mac::{HarqProcess, HarqState, LinkAdaptationState, Span};
use crate::{Direction, Tti};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RrcState {
    Idle,
    /// Random access in progress.
    Accessing,
    Connected,
}

/// Where a random access procedure stands.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AccessPhase {
    WaitOccasion { not_before: Tti },
    Preamble { span: Span },
    /// Preamble detected; the eNB owes a response by `deadline`.
    AwaitResponse { deadline: Tti },
    Setup { until: Tti },
}

/// What the eNB has learned about the link on this connection.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LinkEstimates {
    /// Coupling loss plus noise-and-interference seen on the last PUSCH,
    /// in dB: per-PRB received SINR = per-PRB power − this.
    pub ul_loss_plus_ni_db: Option<f64>,
    /// Last reported downlink per-PRB SINR.
    pub dl_sinr_db: Option<f64>,
}

/// Static per-UE settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UeSettings {
    pub dormancy_timer_ms: u64,
    pub drx: Option<DrxConfig>,
    pub ce: CeConfig,
    pub pc: PowerControlState,
    pub tpc: TpcConfig,
    pub la: [LinkAdaptationState; 2],
    pub harq_processes: u8,
    pub max_attempts: u32,
}

/// Inputs to one RRC step.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RrcEvents {
    /// Data is waiting in either direction.
    pub data_pending: bool,
    /// Some HARQ process is not empty.
    pub harq_busy: bool,
    /// Data was scheduled or delivered this TTI.
    pub activity: bool,
    /// The random access response was delivered this TTI.
    pub response_delivered: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RrcTransition {
    AccessStarted,
    PreambleSent { reps: u32 },
    PreambleMissed,
    ResponseTimeout,
    Connected { access_latency_ms: u64 },
    Released,
}

#[derive(Debug, Clone)]
pub struct UeContext {
    pub ue_id: u32,
    pub settings: UeSettings,
    pub rrc_state: RrcState,
    pub access: Option<AccessPhase>,
    pub access_started: Tti,
    /// First TTI of the latest preamble.
    pub preamble_start: Tti,
    pub calendar: HalfDuplexCalendar,
    pub pc: PowerControlState,
    pub tpc: TpcController,
    pub la: [LinkAdaptationState; 2],
    pub harq: [Vec<HarqProcess>; 2],
    pub estimates: LinkEstimates,
    pub last_activity: Tti,
    /// End of the DRX inactivity timer.
    pub awake_until: Tti,
    pub connected_since: Tti,
    pub rach_log: Vec<RachAttempt>,
}

impl UeContext {
    pub fn new(ue_id: u32, settings: UeSettings) -> Result<Self> {
        settings.pc.validate()?;
        settings.tpc.validate()?;
        settings.ce.validate("ce")?;
        if let Some(d) = &settings.drx {
            d.validate()?;
        }
        if settings.harq_processes == 0 || settings.max_attempts == 0 {
            return Err(Error::config("harq", "need at least one process and one attempt"));
        }
        let procs = |m| (0..settings.harq_processes).map(|i| HarqProcess::new(i, m)).collect::<Vec<_>>();
        Ok(Self {
            ue_id,
            rrc_state: RrcState::Idle,
            access: None,
            access_started: 0,
            preamble_start: 0,
            calendar: HalfDuplexCalendar::new(),
            pc: settings.pc,
            tpc: TpcController::default(),
            la: settings.la,
            harq: [procs(settings.max_attempts), procs(settings.max_attempts)],
            estimates: LinkEstimates::default(),
            last_activity: 0,
            awake_until: 0,
            connected_since: 0,
            rach_log: Vec::new(),
            settings,
        })
    }

    pub fn is_connected(&self) -> bool {
        self.rrc_state == RrcState::Connected
    }

    /// Whether the UE decodes MPDCCH starting at `t`.
    pub fn monitors_mpdcch(&self, t: Tti) -> bool {
        self.is_connected() && self.settings.drx.as_ref().is_none_or(|d| d.monitoring(t, self.awake_until))
    }

    /// A grant addressed to the UE was sent at `t`.
    pub fn note_grant(&mut self, t: Tti) {
        self.last_activity = t;
        if let Some(d) = &self.settings.drx {
            self.awake_until = self.awake_until.max(t + d.inactivity_ms + 1);
        }
    }

    pub fn harq_busy(&self) -> bool {
        self.harq.iter().flatten().any(|p| p.state != HarqState::Empty)
    }

    pub fn harq_for(&self, d: Direction) -> &[HarqProcess] {
        &self.harq[d.index()]
    }

    /// Drops everything learned on the connection.
    pub fn release(&mut self) {
        self.rrc_state = RrcState::Idle;
        self.access = None;
        self.pc = self.settings.pc;
        self.pc.reset();
        self.tpc.reset();
        self.la = self.settings.la;
        self.estimates = LinkEstimates::default();
        self.awake_until = 0;
    }

    /// Sum of preamble repetitions over every attempt so far.
    pub fn preamble_repetitions(&self) -> u64 {
        self.rach_log.iter().map(|a| u64::from(a.preamble_repetitions)).sum()
    }

    pub fn rach_overhead_prb_ttis(&self) -> u64 {
        self.rach_log.iter().map(|a| a.overhead_prb_ttis).sum()
    }
}

/// Advances the RRC and random-access state machine by one TTI.
///
/// `coupling_loss_db` is the true loss to the serving cell; the draw for
/// preamble detection comes from `rng`.
pub fn step_rrc<R: Rng>(
    ue: &mut UeContext,
    tti: Tti,
    ev: RrcEvents,
    rach: &RachConfig,
    coupling_loss_db: f64,
    rng: &mut R,
) -> Result<Vec<RrcTransition>> {
    let mut out = Vec::new();
    if ev.response_delivered && !matches!(ue.access, Some(AccessPhase::AwaitResponse { .. })) {
        return Err(Error::invariant(tti, format!("ue {}: response delivered outside the window", ue.ue_id)));
    }
    if ev.activity {
        ue.last_activity = tti;
    }
    match ue.rrc_state {
        RrcState::Idle => {
            if ev.harq_busy {
                return Err(Error::invariant(tti, format!("ue {}: HARQ activity while idle", ue.ue_id)));
            }
            if ev.data_pending {
                ue.rrc_state = RrcState::Accessing;
                ue.access_started = tti;
                ue.access = Some(AccessPhase::WaitOccasion { not_before: tti });
                out.push(RrcTransition::AccessStarted);
                step_access(ue, tti, ev, rach, coupling_loss_db, rng, &mut out)?;
            }
        }
        RrcState::Accessing => step_access(ue, tti, ev, rach, coupling_loss_db, rng, &mut out)?,
        RrcState::Connected => {
            let idle_for = tti.saturating_sub(ue.last_activity);
            if !ev.data_pending && !ev.harq_busy && idle_for >= ue.settings.dormancy_timer_ms {
                ue.release();
                out.push(RrcTransition::Released);
            }
        }
    }
    Ok(out)
}

fn step_access<R: Rng>(
    ue: &mut UeContext,
    tti: Tti,
    ev: RrcEvents,
    rach: &RachConfig,
    cl: f64,
    rng: &mut R,
    out: &mut Vec<RrcTransition>,
) -> Result<()> {
    let reps = ue.settings.ce.prach_reps;
    let phase = ue.access.ok_or_else(|| Error::invariant(tti, "accessing without a phase"))?;
    let retry = |ue: &mut UeContext, rng: &mut R| {
        let backoff = if rach.backoff_max_ms == 0 { 0 } else { rng.random_range(0..=rach.backoff_max_ms) };
        ue.rach_log.push(RachAttempt {
            start_tti: ue.preamble_start,
            preamble_repetitions: reps,
            outcome: RachOutcome::Retry,
            latency_ms: tti - ue.access_started,
            overhead_prb_ttis: RachAttempt::overhead_for(reps),
        });
        ue.access = Some(AccessPhase::WaitOccasion { not_before: tti + 1 + backoff });
    };
    match phase {
        AccessPhase::WaitOccasion { not_before } => {
            if tti >= not_before && rach.next_occasion(tti) == tti {
                let span = Span::new(tti, u64::from(reps));
                if ue.calendar.book(span, Activity::Tx)?.is_ok() {
                    ue.access = Some(AccessPhase::Preamble { span });
                    ue.preamble_start = tti;
                    out.push(RrcTransition::PreambleSent { reps });
                }
            }
        }
        AccessPhase::Preamble { span } => {
            if tti >= span.last() {
                let p = rach.detection_probability(ue.pc.p_max_dbm, cl, reps);
                if rng.random::<f64>() < p {
                    ue.access = Some(AccessPhase::AwaitResponse { deadline: tti + rach.response_window_ms });
                } else {
                    retry(ue, rng);
                    out.push(RrcTransition::PreambleMissed);
                }
            }
        }
        AccessPhase::AwaitResponse { deadline } => {
            if ev.response_delivered {
                ue.access = Some(AccessPhase::Setup { until: tti + rach.setup_delay_ms });
            } else if tti >= deadline {
                retry(ue, rng);
                out.push(RrcTransition::ResponseTimeout);
            }
        }
        AccessPhase::Setup { until } => {
            if tti >= until {
                let latency = tti - ue.access_started;
                ue.rach_log.push(RachAttempt {
                    start_tti: ue.preamble_start,
                    preamble_repetitions: reps,
                    outcome: RachOutcome::Success,
                    latency_ms: latency,
                    overhead_prb_ttis: RachAttempt::overhead_for(reps),
                });
                ue.rrc_state = RrcState::Connected;
                ue.access = None;
                ue.connected_since = tti;
                ue.last_activity = tti;
                out.push(RrcTransition::Connected { access_latency_ms: latency });
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ue::PowerMode;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn settings() -> UeSettings {
        let la = LinkAdaptationState::new(0.1, 0.1, 4).unwrap();
        UeSettings {
            dormancy_timer_ms: 2000,
            drx: None,
            ce: CeConfig { agl: 8, mpdcch_rl: 1, pucch_rl: 1, prach_reps: 2, data_rl: 1 },
            pc: PowerControlState { mode: PowerMode::Clpc, ..Default::default() },
            tpc: TpcConfig::default(),
            la: [la, la],
            harq_processes: 2,
            max_attempts: 4,
        }
    }

    fn connect(ue: &mut UeContext, rng: &mut ChaCha8Rng) -> Tti {
        let rach = RachConfig::default();
        let pending = RrcEvents { data_pending: true, ..Default::default() };
        for t in 0..1000 {
            let mut ev = pending;
            if matches!(ue.access, Some(AccessPhase::AwaitResponse { .. })) {
                ev.response_delivered = true;
            }
            let tr = step_rrc(ue, t, ev, &rach, 100.0, rng).unwrap();
            if tr.iter().any(|x| matches!(x, RrcTransition::Connected { .. })) {
                return t;
            }
        }
        panic!("never connected");
    }

    #[test]
    fn idle_arrival_starts_access_on_next_occasion() {
        let mut ue = UeContext::new(0, settings()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let rach = RachConfig::default();
        let ev = RrcEvents { data_pending: true, ..Default::default() };
        let tr = step_rrc(&mut ue, 3, ev, &rach, 100.0, &mut rng).unwrap();
        assert_eq!(tr, vec![RrcTransition::AccessStarted]);
        for t in 4..10 {
            assert!(step_rrc(&mut ue, t, ev, &rach, 100.0, &mut rng).unwrap().is_empty());
        }
        let tr = step_rrc(&mut ue, 10, ev, &rach, 100.0, &mut rng).unwrap();
        assert_eq!(tr, vec![RrcTransition::PreambleSent { reps: 2 }]);
        assert!(!ue.calendar.is_free(Span::new(10, 2)));
    }

    #[test]
    fn dormancy_releases_after_two_seconds() {
        let mut ue = UeContext::new(0, settings()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let rach = RachConfig::default();
        let t0 = connect(&mut ue, &mut rng);
        ue.pc.apply_tpc(3.0, 10.0);
        ue.la[0].olla_offset_db = 2.5;
        ue.estimates.dl_sinr_db = Some(4.0);
        let quiet = RrcEvents::default();
        for t in t0 + 1..t0 + 2000 {
            assert!(step_rrc(&mut ue, t, quiet, &rach, 100.0, &mut rng).unwrap().is_empty(), "t={t}");
        }
        let tr = step_rrc(&mut ue, t0 + 2000, quiet, &rach, 100.0, &mut rng).unwrap();
        assert_eq!(tr, vec![RrcTransition::Released]);
        assert_eq!(ue.rrc_state, RrcState::Idle);
        assert_eq!(ue.pc, ue.settings.pc);
        assert_eq!(ue.la, ue.settings.la);
        assert_eq!(ue.tpc, TpcController::default());
        assert_eq!(ue.estimates, LinkEstimates::default());
    }

    #[test]
    fn activity_defers_release() {
        let mut ue = UeContext::new(0, settings()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rach = RachConfig::default();
        let t0 = connect(&mut ue, &mut rng);
        let busy = RrcEvents { activity: true, ..Default::default() };
        step_rrc(&mut ue, t0 + 1500, busy, &rach, 100.0, &mut rng).unwrap();
        for t in t0 + 1501..t0 + 3500 {
            assert!(step_rrc(&mut ue, t, RrcEvents::default(), &rach, 100.0, &mut rng).unwrap().is_empty());
        }
        assert!(ue.is_connected());
    }

    #[test]
    fn drx_gates_monitoring() {
        let mut s = settings();
        s.drx = Some(DrxConfig { cycle_ms: 1280, on_duration_ms: 10, inactivity_ms: 0, offset_ms: 0 });
        let mut ue = UeContext::new(0, s).unwrap();
        ue.rrc_state = RrcState::Connected;
        assert!(ue.monitors_mpdcch(5));
        assert!(!ue.monitors_mpdcch(500));
        assert!(ue.monitors_mpdcch(1280));
    }

    #[test]
    fn stray_response_is_a_bug() {
        let mut ue = UeContext::new(0, settings()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let ev = RrcEvents { response_delivered: true, ..Default::default() };
        let err = step_rrc(&mut ue, 0, ev, &RachConfig::default(), 100.0, &mut rng).unwrap_err();
        assert!(err.is_invariant());
    }

    #[test]
    fn deep_coverage_retries_and_counts_overhead() {
        let mut s = settings();
        s.ce.prach_reps = 4;
        let mut ue = UeContext::new(0, s).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let rach = RachConfig::default();
        let ev = RrcEvents { data_pending: true, ..Default::default() };
        for t in 0..20_000 {
            let mut e = ev;
            e.response_delivered = matches!(ue.access, Some(AccessPhase::AwaitResponse { .. }));
            step_rrc(&mut ue, t, e, &rach, 162.0, &mut rng).unwrap();
            if ue.is_connected() {
                break;
            }
        }
        let attempts = ue.rach_log.len() as u64;
        assert!(attempts > 1, "expected retries at 162 dB");
        assert_eq!(ue.preamble_repetitions(), 4 * attempts);
        assert_eq!(ue.rach_overhead_prb_ttis(), 6 * 4 * attempts);
    }

    #[test]
    fn deterministic_given_seed() {
        let run = || {
            let mut ue = UeContext::new(0, settings()).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(9);
            let mut log = Vec::new();
            for t in 0..3000 {
                let ev = RrcEvents {
                    data_pending: t % 700 < 3,
                    response_delivered: matches!(ue.access, Some(AccessPhase::AwaitResponse { .. })) && t % 3 == 0,
                    ..Default::default()
                };
                log.push(step_rrc(&mut ue, t, ev, &RachConfig::default(), 155.0, &mut rng).unwrap());
            }
            log
        };
        assert_eq!(run(), run());
    }
}
