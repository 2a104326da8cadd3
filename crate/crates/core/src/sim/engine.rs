//! The TTI engine.
//!
//! Each call to [`Engine::step`] advances the world by one subframe in a
//! fixed order: traffic arrivals, RRC / random access / PUCCH, per-cell
//! scheduling, on-air outcomes, HARQ feedback, then KPI accounting and
//! audits. Interference at TTI `t` is computed from what was on air at
//! `t - 1`, so the cells never look at each other's current decisions.

use std::collections::VecDeque;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::kpi::{build_row, Audits, CellKpi, KpiReport, RowInput, TraceRow, UeStats};
use super::{build_layout, InterferenceMode, KpiScope, Layout, Resolved, Scenario};
use crate::error::{Error, Result};
use crate::grid::{ResourceGrid, MPDCCH_UNITS, NARROWBAND_PRBS};
use crate::mac::{
    derive_timeline, outer_loop_update, schedule_tti, voip_build, Calendars, FeedbackResult, Grant, GrantPurpose,
    GrantRequest, HarqState, LinkAdaptationState, RepetitionConfig, SelectionContext, Segment, Span, TransportBlock,
    TxFormat, VoipPacket,
};
use crate::radio::{dbm_to_mw, mw_to_dbm, noise_per_prb_dbm, ENB_NOISE_FIGURE_DB, UE_NOISE_FIGURE_DB};
use crate::traffic::{stream_rng, Arrival, PacketKind, Pending, TrafficConfig, TrafficSource};
use crate::ue::{
    step_rrc, tx_power, AccessPhase, Activity, CeConfig, HalfDuplexCalendar, RrcEvents, RrcState, RrcTransition,
    UeContext, UeSettings,
};
use crate::{Direction, Tti};

/// Process id used for random access responses, outside the HARQ range.
const RESPONSE_PROCESS: u8 = u8::MAX;
const TRACE_RING: usize = 64;
const CONSERVATION_PERIOD: Tti = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PacketState {
    Queued,
    InFlight,
    Delivered,
    DroppedResidual,
    DroppedBudget,
}

impl PacketState {
    fn is_final(self) -> bool {
        matches!(self, PacketState::Delivered | PacketState::DroppedResidual | PacketState::DroppedBudget)
    }
}

#[derive(Debug, Clone)]
struct Packet {
    ue: usize,
    arrival: Tti,
    bits: u32,
    /// Not yet placed in any transport block.
    unsent: u32,
    /// Inside blocks awaiting their outcome.
    in_flight: u32,
    delivered: u32,
    state: PacketState,
    budget_ms: Option<u64>,
}

/// One HARQ attempt on air.
#[derive(Debug, Clone, Copy)]
struct Flight {
    grant: Grant,
    sinr_lin_sum: f64,
    reps: u32,
    decoded: Option<bool>,
    feedback_at: Tti,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum PucchUse {
    Sr,
    Cqi,
}

enum Plan {
    Retx(usize),
    New { process: usize, payload: Vec<Segment> },
    Response,
}

/// Format choice is pure in these inputs, so it is cached per direction.
type FormatKey = (u32, u64, u64, u64);

struct UeSim {
    ctx: UeContext,
    cell: usize,
    ce: CeConfig,
    mpdcch_rl: u32,
    pucch_rl: u32,
    /// Data repetitions link adaptation may choose from.
    rl_options: Vec<u32>,
    /// Data repetition before any link estimate.
    initial_rl: u32,
    traffic: TrafficConfig,
    sources: Vec<Pending>,
    replies: VecDeque<Arrival>,
    queue: [VecDeque<usize>; 2],
    /// Uplink packets that arrived at or before this TTI are known to the eNB.
    ul_reported_until: Option<Tti>,
    sr_pending: bool,
    /// The SR occasion was blocked by the half-duplex calendar; try again
    /// at the next free TTI.
    sr_deferred: bool,
    pucch: Option<(Span, PucchUse)>,
    response: Option<Flight>,
    response_delivered: bool,
    activity: bool,
    last_served: [Tti; 2],
    flights: [Vec<Option<Flight>>; 2],
    format_cache: [Option<(FormatKey, TxFormat)>; 2],
    rng_rrc: ChaCha8Rng,
    rng_decode: [ChaCha8Rng; 2],
    rng_response: ChaCha8Rng,
    in_scope: bool,
    stats: UeStats,
}

struct UeCalendars<'a>(&'a mut [UeSim]);

impl Calendars for UeCalendars<'_> {
    fn calendar(&mut self, ue_id: u32) -> &mut HalfDuplexCalendar {
        &mut self.0[ue_id as usize].ctx.calendar
    }
}

#[derive(Debug, Clone, Copy)]
struct UlTx {
    ue: usize,
    cell: usize,
    mask: u8,
    prb_mw: f64,
}

/// What was on air in one TTI.
#[derive(Debug, Clone, Default)]
struct Snapshot {
    dl_masks: Vec<u8>,
    ul: Vec<UlTx>,
}

/// A simulated world.
pub struct Engine {
    sc: Scenario,
    res: Resolved,
    layout: Layout,
    /// Coupling loss per UE per cell.
    cl: Vec<Vec<f64>>,
    ues: Vec<UeSim>,
    cell_ues: Vec<Vec<usize>>,
    grids: Vec<ResourceGrid>,
    packets: Vec<Packet>,
    prev: Snapshot,
    cur: Snapshot,
    tti: Tti,
    dl_prb_mw: f64,
    ue_noise_mw: f64,
    enb_noise_mw: f64,
    /// Legacy uplink interference per PRB in shared mode.
    legacy_ul_mw: f64,
    prb_used: Vec<u64>,
    mpdcch_used: Vec<u64>,
    audits: Audits,
    ring: VecDeque<String>,
    trace: Option<Vec<TraceRow>>,
}

/// Result of a complete run.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: KpiReport,
    pub trace: Option<Vec<TraceRow>>,
}

/// Validates and runs a scenario to its end.
pub fn run(sc: &Scenario, trace: bool) -> Result<RunOutput> {
    let mut e = Engine::new(sc.clone())?;
    if trace {
        e.enable_trace();
    }
    e.run_to_end()?;
    Ok(RunOutput { report: e.report()?, trace: e.take_trace() })
}

/// Runs one scenario per seed on the rayon pool. Results come back in the
/// order of `seeds`, identical to running them one by one.
pub fn run_many(sc: &Scenario, seeds: &[u64], trace: bool) -> Vec<Result<RunOutput>> {
    use rayon::prelude::*;
    seeds
        .par_iter()
        .map(|&s| {
            let mut one = sc.clone();
            one.seed = s;
            run(&one, trace)
        })
        .collect()
}

impl Engine {
    pub fn new(sc: Scenario) -> Result<Self> {
        sc.validate()?;
        let res = sc.resolve()?;
        let layout = build_layout(&sc)?;
        let n_cells = layout.cells.len();
        let mut ues = Vec::with_capacity(layout.ues.len());
        let mut cell_ues = vec![Vec::new(); n_cells];
        let cl: Vec<Vec<f64>> = layout.ues.iter().map(|u| u.coupling_loss_db.clone()).collect();
        let s = &sc.scheduler;
        let la = LinkAdaptationState::new(s.ibler_target, s.step_up_db, s.initial_mcs)?;
        let ladder: Vec<u32> =
            sc.radio.repetition_ladder.steps().iter().copied().filter(|&r| r <= s.max_data_rl).collect();

        for d in &layout.ues {
            let g = &sc.ue_groups[d.group];
            let ce = sc.ce_tiers.lookup(d.coupling_loss_db[d.serving_cell]);
            let settings = UeSettings {
                dormancy_timer_ms: g.dormancy_timer_ms,
                drx: g.drx,
                ce,
                pc: sc.power.state(),
                tpc: sc.power.tpc,
                la: [la, la],
                harq_processes: s.harq_processes,
                max_attempts: s.max_attempts,
            };
            let id = d.ue_id as usize;
            let stream = u64::from(d.ue_id) * 16;
            let mut ctx = UeContext::new(d.ue_id, settings)?;
            if g.start_connected {
                ctx.rrc_state = RrcState::Connected;
            }
            let sources = TrafficSource::for_ue(&g.traffic, sc.seed, stream)?.into_iter().map(Pending::new).collect();
            let in_scope = match sc.layout.kpi_scope {
                KpiScope::All => true,
                KpiScope::Center => layout.cells[d.serving_cell].site == 0,
            };
            let flights = [vec![None; s.harq_processes as usize], vec![None; s.harq_processes as usize]];
            ues.push(UeSim {
                ctx,
                cell: d.serving_cell,
                ce,
                mpdcch_rl: g.repetitions.mpdcch.unwrap_or(ce.mpdcch_rl),
                pucch_rl: g.repetitions.pucch.unwrap_or(ce.pucch_rl),
                rl_options: g.repetitions.data.map_or_else(|| ladder.clone(), |r| vec![r]),
                initial_rl: g.repetitions.data.unwrap_or(ce.data_rl),
                traffic: g.traffic,
                sources,
                replies: VecDeque::new(),
                queue: [VecDeque::new(), VecDeque::new()],
                ul_reported_until: g.start_connected.then_some(0),
                sr_pending: false,
                sr_deferred: false,
                pucch: None,
                response: None,
                response_delivered: false,
                activity: false,
                last_served: [0, 0],
                flights,
                format_cache: [None, None],
                rng_rrc: stream_rng(sc.seed, stream + 1),
                rng_decode: [stream_rng(sc.seed, stream + 2), stream_rng(sc.seed, stream + 3)],
                rng_response: stream_rng(sc.seed, stream + 4),
                in_scope,
                stats: UeStats::default(),
            });
            cell_ues[d.serving_cell].push(id);
        }

        let total_prbs = f64::from(res.profile.total_prbs);
        let enb_noise_mw = dbm_to_mw(noise_per_prb_dbm(ENB_NOISE_FIGURE_DB));
        let legacy_ul_mw = match sc.radio.interference {
            InterferenceMode::Reserved => 0.0,
            InterferenceMode::Shared => {
                enb_noise_mw * (10f64.powf(sc.radio.legacy_ul_iot_db / 10.0) - 1.0) * sc.radio.legacy_load
            }
        };
        let mut e = Self {
            dl_prb_mw: dbm_to_mw(sc.layout.enb_power_dbm - 10.0 * total_prbs.log10()),
            ue_noise_mw: dbm_to_mw(noise_per_prb_dbm(UE_NOISE_FIGURE_DB)),
            enb_noise_mw,
            legacy_ul_mw,
            prb_used: vec![0; n_cells],
            mpdcch_used: vec![0; n_cells],
            grids: vec![ResourceGrid::new(); n_cells],
            prev: Snapshot { dl_masks: vec![0; n_cells], ul: Vec::new() },
            cur: Snapshot { dl_masks: vec![0; n_cells], ul: Vec::new() },
            sc,
            res,
            layout,
            cl,
            ues,
            cell_ues,
            packets: Vec::new(),
            tti: 0,
            audits: Audits::default(),
            ring: VecDeque::with_capacity(TRACE_RING),
            trace: None,
        };
        for u in 0..e.ues.len() {
            if e.ues[u].ctx.is_connected() {
                e.initial_estimates(u);
            }
        }
        Ok(e)
    }

    pub fn enable_trace(&mut self) {
        self.trace.get_or_insert_with(Vec::new);
    }

    pub fn take_trace(&mut self) -> Option<Vec<TraceRow>> {
        self.trace.take()
    }

    /// Next TTI to be simulated.
    pub fn tti(&self) -> Tti {
        self.tti
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn scenario(&self) -> &Scenario {
        &self.sc
    }

    pub fn rrc_state(&self, ue: usize) -> RrcState {
        self.ues[ue].ctx.rrc_state
    }

    pub fn run_to_end(&mut self) -> Result<()> {
        while self.tti < self.sc.duration_ms {
            self.step()?;
        }
        self.check_conservation()
    }

    /// Adds a packet by hand, bypassing the traffic sources.
    pub fn inject(&mut self, ue: usize, direction: Direction, bits: u32) -> Result<()> {
        if ue >= self.ues.len() || bits == 0 {
            return Err(Error::input("inject needs a known UE and a non-empty packet"));
        }
        let a = Arrival { tti: self.tti, bits, direction, kind: PacketKind::Data };
        self.add_packet(ue, a);
        Ok(())
    }

    /// Latencies of delivered packets for one UE, in delivery order.
    pub fn latencies(&self, ue: usize) -> &[u64] {
        &self.ues[ue].stats.latencies
    }

    /// Advances one TTI.
    pub fn step(&mut self) -> Result<()> {
        let t = self.tti;
        self.step_inner(t).map_err(|e| e.with_trace(self.ring.iter().cloned().collect()))?;
        self.tti += 1;
        Ok(())
    }

    fn note(&mut self, line: String) {
        if self.ring.len() == TRACE_RING {
            self.ring.pop_front();
        }
        self.ring.push_back(line);
    }

    fn step_inner(&mut self, t: Tti) -> Result<()> {
        self.arrivals(t);
        self.rrc(t)?;
        for c in 0..self.grids.len() {
            self.schedule_cell(c, t)?;
        }
        self.cur = Snapshot { dl_masks: vec![0; self.grids.len()], ul: Vec::new() };
        for (c, g) in self.grids.iter().enumerate() {
            self.cur.dl_masks[c] = g.usage(t).dl_prbs;
        }
        self.on_air(t)?;
        self.feedback(t)?;
        self.account(t)?;
        self.prev = std::mem::take(&mut self.cur);
        Ok(())
    }

    // (1) arrivals

    fn add_packet(&mut self, ue: usize, a: Arrival) {
        let budget_ms = match self.ues[ue].traffic {
            TrafficConfig::Voip(v) => Some(v.budget_ms),
            _ => None,
        };
        let id = self.packets.len();
        self.packets.push(Packet {
            ue,
            arrival: a.tti,
            bits: a.bits,
            unsent: a.bits,
            in_flight: 0,
            delivered: 0,
            state: PacketState::Queued,
            budget_ms,
        });
        let u = &mut self.ues[ue];
        u.queue[a.direction.index()].push_back(id);
        u.stats.offered_packets += 1;
        u.stats.offered_bits += u64::from(a.bits);
    }

    fn arrivals(&mut self, t: Tti) {
        let max_tbs = self.sc.scheduler.max_tbs_bits;
        for ue in 0..self.ues.len() {
            let mut due = Vec::new();
            for src in &mut self.ues[ue].sources {
                due.extend(src.due(t));
            }
            while self.ues[ue].replies.front().is_some_and(|a| a.tti <= t) {
                due.extend(self.ues[ue].replies.pop_front());
            }
            due.sort_by_key(|a| (a.tti, a.direction));
            for a in due {
                self.add_packet(ue, Arrival { tti: t.max(a.tti), ..a });
            }
            if let TrafficConfig::FullBuffer(f) = self.ues[ue].traffic {
                let d = f.direction.index();
                let backlog: u64 = self.ues[ue].queue[d].iter().map(|&p| u64::from(self.packets[p].unsent)).sum();
                if backlog < 2 * u64::from(max_tbs) {
                    self.add_packet(ue, Arrival { tti: t, bits: max_tbs, direction: f.direction, kind: PacketKind::Data });
                }
            }
            if let TrafficConfig::Voip(v) = self.ues[ue].traffic {
                // frames that can no longer make the budget, even if sent now;
                // anything with bits on the air is judged when it lands
                let expired: Vec<usize> = self.ues[ue]
                    .queue
                    .iter()
                    .flatten()
                    .copied()
                    .filter(|&p| self.packets[p].in_flight == 0 && t + 1 - self.packets[p].arrival > v.budget_ms)
                    .collect();
                for p in expired {
                    self.finish_packet(p, PacketState::DroppedBudget);
                }
            }
        }
    }

    // (2) RRC, random access, PUCCH

    fn visible(&self, ue: usize, d: Direction, p: usize) -> bool {
        let pk = &self.packets[p];
        pk.unsent > 0
            && match d {
                Direction::Dl => true,
                Direction::Ul => self.ues[ue].ul_reported_until.is_some_and(|r| pk.arrival <= r),
            }
    }

    fn rrc(&mut self, t: Tti) -> Result<()> {
        let rach = self.sc.rach;
        let sr_period = self.sc.scheduler.sr_period_ms;
        let cqi_period = self.sc.scheduler.cqi_period_ms;
        for ue in 0..self.ues.len() {
            let cl = self.cl[ue][self.ues[ue].cell];
            let u = &mut self.ues[ue];
            let ev = RrcEvents {
                data_pending: u.queue.iter().any(|q| !q.is_empty()),
                harq_busy: u.ctx.harq_busy(),
                activity: std::mem::take(&mut u.activity),
                response_delivered: std::mem::take(&mut u.response_delivered),
            };
            let transitions = step_rrc(&mut u.ctx, t, ev, &rach, cl, &mut u.rng_rrc)?;
            for tr in transitions {
                match tr {
                    RrcTransition::Connected { access_latency_ms } => {
                        self.ues[ue].ul_reported_until = Some(t);
                        self.ues[ue].sr_pending = false;
                        self.initial_estimates(ue);
                        self.note(format!("t{t} ue{ue} connected after {access_latency_ms} ms"));
                    }
                    RrcTransition::Released => {
                        let u = &mut self.ues[ue];
                        u.sr_pending = false;
                        u.ul_reported_until = None;
                        u.format_cache = [None, None];
                        self.note(format!("t{t} ue{ue} released"));
                    }
                    other => self.note(format!("t{t} ue{ue} {other:?}")),
                }
            }

            let u = &self.ues[ue];
            if !u.ctx.is_connected() || u.pucch.is_some() {
                continue;
            }
            let ul_busy = u.ctx.harq[0].iter().any(|p| p.state != HarqState::Empty);
            let unreported = u.queue[0].iter().any(|&p| {
                let pk = &self.packets[p];
                pk.unsent > 0 && u.ul_reported_until.is_none_or(|r| pk.arrival > r)
            });
            let id = u64::from(u.ctx.ue_id);
            let wants_sr = unreported && !u.sr_pending && !ul_busy;
            let sr_due = wants_sr && (u.sr_deferred || t % sr_period == id % sr_period);
            let use_ = if sr_due {
                Some(PucchUse::Sr)
            } else {
                cqi_period.filter(|&p| t % p == (id * 7) % p).map(|_| PucchUse::Cqi)
            };
            let u = &mut self.ues[ue];
            u.sr_deferred = sr_due;
            if let Some(kind) = use_ {
                let span = Span::new(t, u64::from(u.pucch_rl));
                if u.ctx.calendar.book(span, Activity::Tx)?.is_ok() {
                    u.pucch = Some((span, kind));
                    u.sr_deferred = false;
                }
            }
        }
        Ok(())
    }

    /// What the eNB knows right after connection setup: uplink from the
    /// message 3 reception, downlink from a wideband report.
    fn initial_estimates(&mut self, ue: usize) {
        let cl = self.cl[ue][self.ues[ue].cell];
        let ni_ul = self.enb_noise_mw + self.legacy_ul_mw + self.ul_interference_wideband(ue);
        let dl = self.dl_sinr_lin(ue, 0x3f);
        let u = &mut self.ues[ue];
        u.ctx.estimates.ul_loss_plus_ni_db = Some(cl + mw_to_dbm(ni_ul));
        u.ctx.estimates.dl_sinr_db = Some(10.0 * dl.log10());
        u.format_cache = [None, None];
    }

    // (3) scheduling

    fn schedule_cell(&mut self, c: usize, t: Tti) -> Result<()> {
        let mut requests = Vec::new();
        let mut plans: Vec<(usize, Direction, Plan)> = Vec::new();
        for i in 0..self.cell_ues[c].len() {
            let ue = self.cell_ues[c][i];
            if let Some((req, plan)) = self.propose_response(ue, t)? {
                requests.push(req);
                plans.push((ue, Direction::Dl, plan));
                continue;
            }
            if !self.ues[ue].ctx.monitors_mpdcch(t) {
                continue;
            }
            let probe = Span::new(t, u64::from(self.ues[ue].mpdcch_rl));
            if self.ues[ue].ctx.calendar.check(probe, Activity::Rx).is_err() {
                continue;
            }
            for d in Direction::BOTH {
                if let Some((req, plan)) = self.propose(ue, d, t)? {
                    requests.push(req);
                    plans.push((ue, d, plan));
                }
            }
        }
        if requests.is_empty() {
            return Ok(());
        }
        let committed = schedule_tti(&mut self.grids[c], &mut UeCalendars(&mut self.ues), requests)?;
        for cm in committed {
            let g = cm.grant;
            let idx = plans
                .iter()
                .position(|(u, d, _)| *u == g.ue_id as usize && *d == g.direction)
                .ok_or_else(|| Error::invariant(t, "committed grant without a plan"))?;
            let (ue, _, plan) = plans.swap_remove(idx);
            self.apply(ue, g, plan, t)?;
        }
        Ok(())
    }

    fn reps(&self, ue: usize, rl_data: u32) -> RepetitionConfig {
        let u = &self.ues[ue];
        RepetitionConfig::new(u.mpdcch_rl, rl_data, u.pucch_rl)
    }

    fn base_grant(&self, ue: usize, d: Direction, purpose: GrantPurpose, t: Tti, fmt: TxFormat) -> Result<Grant> {
        let u = &self.ues[ue];
        let reps = self.reps(ue, fmt.rl_data);
        let tx_power_dbm = match d {
            Direction::Ul => Some(tx_power(&u.ctx.pc, self.cl[ue][u.cell], fmt.n_prbs)?),
            Direction::Dl => None,
        };
        Ok(Grant {
            ue_id: u.ctx.ue_id,
            direction: d,
            purpose,
            process_id: 0,
            attempt: 1,
            mcs: fmt.mcs,
            tbs_bits: fmt.tbs_bits,
            n_prbs: fmt.n_prbs,
            prb_mask: 0,
            agl: u.ce.agl,
            rl_mpdcch: reps.mpdcch,
            rl_data: reps.data,
            rl_ack: reps.ack,
            timeline: derive_timeline(d, reps, t)?,
            tx_power_dbm,
        })
    }

    fn propose_response(&mut self, ue: usize, t: Tti) -> Result<Option<(GrantRequest, Plan)>> {
        let u = &self.ues[ue];
        let Some(AccessPhase::AwaitResponse { deadline }) = u.ctx.access else { return Ok(None) };
        if u.response.is_some() {
            return Ok(None);
        }
        let bits = self.sc.rach.response_tbs_bits;
        let Some(n) = self.res.tbs.prbs_for(0, bits)? else {
            return Err(Error::config("rach.response_tbs_bits", "does not fit six PRBs at MCS 0"));
        };
        let fmt = TxFormat {
            mcs: 0,
            n_prbs: n,
            tbs_bits: bits,
            rl_data: u.ce.data_rl,
            predicted_bler: 0.0,
            coverage_limited: false,
        };
        let mut g = self.base_grant(ue, Direction::Dl, GrantPurpose::RachResponse, t, fmt)?;
        if g.timeline.data.last() + 1 > deadline {
            return Ok(None);
        }
        g.process_id = RESPONSE_PROCESS;
        Ok(Some((GrantRequest { grant: g, rank: t - u.ctx.preamble_start }, Plan::Response)))
    }

    fn propose(&mut self, ue: usize, d: Direction, t: Tti) -> Result<Option<(GrantRequest, Plan)>> {
        let di = d.index();
        let u = &self.ues[ue];
        if let Some(p) = u.ctx.harq[di].iter().position(|p| p.needs_retx(t)) {
            let prev = u.flights[di][p].ok_or_else(|| Error::invariant(t, "retransmission without a record"))?.grant;
            let attempt = u.ctx.harq[di][p].attempt_count + 1;
            let fmt = TxFormat {
                mcs: prev.mcs,
                n_prbs: prev.n_prbs,
                tbs_bits: prev.tbs_bits,
                rl_data: prev.rl_data,
                predicted_bler: 0.0,
                coverage_limited: false,
            };
            let mut g = self.base_grant(ue, d, GrantPurpose::Retransmission, t, fmt)?;
            g.process_id = p as u8;
            g.attempt = attempt;
            return Ok(Some((GrantRequest { grant: g, rank: t - prev.timeline.mpdcch.start }, Plan::Retx(p))));
        }
        let Some(process) = u.ctx.harq[di].iter().position(|p| p.is_idle(t)) else { return Ok(None) };
        if u.flights[di][process].is_some() {
            return Ok(None);
        }
        let visible: Vec<usize> = u.queue[di].iter().copied().filter(|&p| self.visible(ue, d, p)).collect();
        if visible.is_empty() {
            return Ok(None);
        }
        let queue_bits = visible.iter().map(|&p| u64::from(self.packets[p].unsent)).sum::<u64>().min(u64::from(u32::MAX)) as u32;
        let fmt = self.format(ue, d, queue_bits)?;
        let sr = d == Direction::Ul && self.ues[ue].sr_pending;

        let (purpose, rank, payload) = if let TrafficConfig::Voip(v) = self.ues[ue].traffic {
            let reps = self.reps(ue, fmt.rl_data);
            let (chosen, violated) = if self.sc.scheduler.voip_aggregation {
                let list: Vec<VoipPacket> = visible
                    .iter()
                    .map(|&p| VoipPacket { id: p, arrival: self.packets[p].arrival, bits: self.packets[p].unsent })
                    .collect();
                let b = voip_build(&list, t, d, reps, v.budget_ms, fmt.tbs_bits)?;
                (b.packets, b.violated)
            } else {
                let lat = derive_timeline(d, reps, t)?.data_latency();
                visible.iter().partition(|&&p| t - self.packets[p].arrival + lat <= v.budget_ms)
            };
            for &p in &violated {
                self.finish_packet(p, PacketState::DroppedBudget);
            }
            if chosen.is_empty() {
                return Ok(None);
            }
            let oldest = chosen.iter().map(|&p| self.packets[p].arrival).min().unwrap_or(t);
            let slack = v.budget_ms.saturating_sub(t - oldest);
            let purpose = if sr { GrantPurpose::SchedulingRequest } else { GrantPurpose::Voip };
            (purpose, slack, self.fill(&chosen, fmt.tbs_bits))
        } else {
            let purpose = if sr { GrantPurpose::SchedulingRequest } else { GrantPurpose::Bursty };
            (purpose, self.ues[ue].last_served[di], self.fill(&visible, fmt.tbs_bits))
        };
        if payload.is_empty() {
            return Ok(None);
        }
        let mut g = self.base_grant(ue, d, purpose, t, fmt)?;
        g.process_id = process as u8;
        let plan = Plan::New { process, payload };
        Ok(Some((GrantRequest { grant: g, rank }, plan)))
    }

    /// Takes bits oldest first until the block is full.
    fn fill(&self, packets: &[usize], tbs_bits: u32) -> Vec<Segment> {
        let mut room = tbs_bits;
        let mut out = Vec::new();
        for &p in packets {
            if room == 0 {
                break;
            }
            let bits = self.packets[p].unsent.min(room);
            if bits > 0 {
                out.push(Segment { packet: p, bits });
                room -= bits;
            }
        }
        out
    }

    fn format(&mut self, ue: usize, d: Direction, queue_bits: u32) -> Result<TxFormat> {
        let di = d.index();
        let u = &self.ues[ue];
        let cl = self.cl[ue][u.cell];
        let la = u.ctx.la[di];
        let est = match d {
            Direction::Ul => u.ctx.estimates.ul_loss_plus_ni_db,
            Direction::Dl => u.ctx.estimates.dl_sinr_db,
        };
        let key = (
            queue_bits,
            est.map_or(u64::MAX, f64::to_bits),
            la.olla_offset_db.to_bits(),
            u.ctx.pc.tpc_accum_db.to_bits(),
        );
        if let Some((k, f)) = u.format_cache[di] {
            if k == key {
                return Ok(f);
            }
        }
        let max_tbs = self.sc.scheduler.max_tbs_bits;
        let fmt = match est {
            Some(e) => {
                let ctx = SelectionContext {
                    bler: &self.res.bler,
                    tbs: &self.res.tbs,
                    rl_options: &u.rl_options,
                    max_tbs,
                };
                let pc = u.ctx.pc;
                match d {
                    Direction::Ul => crate::mac::select_transmission(
                        |n| {
                            let p = tx_power(&pc, cl, n).unwrap_or(pc.p_max_dbm);
                            p - 10.0 * f64::from(n).log10() - e
                        },
                        &la,
                        queue_bits,
                        &ctx,
                    )?,
                    Direction::Dl => crate::mac::select_transmission(|_| e, &la, queue_bits, &ctx)?,
                }
            }
            None => self.initial_format(ue, d, queue_bits)?,
        };
        self.ues[ue].format_cache[di] = Some((key, fmt));
        Ok(fmt)
    }

    /// Format before any link estimate: the initial MCS at the tier's data
    /// repetition. Uplink takes as many PRBs as the power allows, downlink
    /// the fewest that carry the queue.
    fn initial_format(&self, ue: usize, d: Direction, queue_bits: u32) -> Result<TxFormat> {
        let u = &self.ues[ue];
        let mcs = u.ctx.la[d.index()].initial_mcs;
        let max_tbs = self.sc.scheduler.max_tbs_bits;
        let max_n = self.res.tbs.max_prbs();
        let n = match d {
            Direction::Ul => {
                let pc = u.ctx.pc;
                let cl = self.cl[ue][u.cell];
                (1..=max_n)
                    .rev()
                    .find(|&n| pc.p0_dbm + 10.0 * f64::from(n).log10() + pc.alpha * cl <= pc.p_max_dbm)
                    .unwrap_or(1)
            }
            Direction::Dl => (1..=max_n)
                .find(|&n| self.res.tbs.tbs(mcs, n, max_tbs).is_ok_and(|b| b >= queue_bits))
                .unwrap_or(max_n),
        };
        Ok(TxFormat {
            mcs,
            n_prbs: n,
            tbs_bits: self.res.tbs.tbs(mcs, n, max_tbs)?,
            rl_data: u.initial_rl,
            predicted_bler: f64::NAN,
            coverage_limited: false,
        })
    }

    fn apply(&mut self, ue: usize, g: Grant, plan: Plan, t: Tti) -> Result<()> {
        let di = g.direction.index();
        let flight = Flight { grant: g, sinr_lin_sum: 0.0, reps: 0, decoded: None, feedback_at: 0 };
        self.note(format!(
            "t{t} ue{ue} grant {} {} p{} a{} mcs{} n{} mask{:06b} rl{}/{}/{} data {}..{}",
            g.direction,
            g.purpose.as_str(),
            g.process_id,
            g.attempt,
            g.mcs,
            g.n_prbs,
            g.prb_mask,
            g.rl_mpdcch,
            g.rl_data,
            g.rl_ack,
            g.timeline.data.start,
            g.timeline.data.end
        ));
        match plan {
            Plan::Response => {
                self.ues[ue].response = Some(flight);
                return Ok(());
            }
            Plan::Retx(p) => {
                let u = &mut self.ues[ue];
                let first = u.ctx.harq[di][p].first_arrival_tti;
                u.ctx.harq[di][p].start_attempt(t, g.timeline, g.rl_data, None, first)?;
                u.flights[di][p] = Some(flight);
            }
            Plan::New { process, payload } => {
                let mut first = t;
                for s in &payload {
                    let pk = &mut self.packets[s.packet];
                    pk.unsent -= s.bits;
                    pk.in_flight += s.bits;
                    if pk.state == PacketState::Queued {
                        pk.state = PacketState::InFlight;
                    }
                    first = first.min(pk.arrival);
                }
                let coverage_limited = self.ues[ue].format_cache[di].is_some_and(|(_, f)| f.coverage_limited);
                let tb = TransportBlock {
                    direction: g.direction,
                    purpose: g.purpose,
                    tbs_bits: g.tbs_bits,
                    payload,
                    mcs: g.mcs,
                    n_prbs: g.n_prbs,
                    rl_data: g.rl_data,
                    coverage_limited,
                    combined_sinr_lin: 0.0,
                    combined_reps: 0,
                };
                let packets = &self.packets;
                let u = &mut self.ues[ue];
                u.queue[di].retain(|&p| packets[p].unsent > 0 && !packets[p].state.is_final());
                u.ctx.harq[di][process].start_attempt(t, g.timeline, g.rl_data, Some(tb), first)?;
                u.flights[di][process] = Some(flight);
                u.last_served[di] = t;
                u.stats.coverage_limited_grants += u64::from(coverage_limited);
                if g.purpose == GrantPurpose::SchedulingRequest {
                    u.sr_pending = false;
                }
            }
        }
        let u = &mut self.ues[ue];
        u.stats.grants += 1;
        u.ctx.note_grant(t);
        Ok(())
    }

    // (4) on-air outcomes

    /// Mean linear downlink SINR over the PRBs in `mask`, with interference
    /// from the previous TTI.
    fn dl_sinr_lin(&self, ue: usize, mask: u8) -> f64 {
        let s = self.ues[ue].cell;
        let cl = &self.cl[ue];
        let rx = self.dl_prb_mw / dbm_to_mw(cl[s]);
        let shared = self.sc.radio.interference == InterferenceMode::Shared;
        let load = self.sc.radio.legacy_load;
        let (mut sum, mut n) = (0.0, 0);
        for prb in 0..NARROWBAND_PRBS as u8 {
            if mask & (1 << prb) == 0 {
                continue;
            }
            let mut i = 0.0;
            for (c, &l) in cl.iter().enumerate() {
                if c == s || !l.is_finite() {
                    continue;
                }
                let busy = self.prev.dl_masks[c] & (1 << prb) != 0;
                let a = if busy {
                    1.0
                } else if shared {
                    load
                } else {
                    0.0
                };
                i += a * self.dl_prb_mw / dbm_to_mw(l);
            }
            sum += rx / (self.ue_noise_mw + i);
            n += 1;
        }
        if n == 0 {
            0.0
        } else {
            sum / f64::from(n)
        }
    }

    /// Co-channel uplink interference per PRB at the UE's serving cell,
    /// averaged over the narrowband.
    fn ul_interference_wideband(&self, ue: usize) -> f64 {
        (0..NARROWBAND_PRBS as u8).map(|p| self.ul_interference(ue, p)).sum::<f64>() / f64::from(NARROWBAND_PRBS)
    }

    fn ul_interference(&self, ue: usize, prb: u8) -> f64 {
        let s = self.ues[ue].cell;
        self.prev
            .ul
            .iter()
            .filter(|x| x.cell != s && x.ue != ue && x.mask & (1 << prb) != 0)
            .map(|x| {
                let l = self.cl[x.ue][s];
                if l.is_finite() {
                    x.prb_mw / dbm_to_mw(l)
                } else {
                    0.0
                }
            })
            .sum()
    }

    fn ul_sinr_lin(&self, ue: usize, mask: u8, prb_mw: f64) -> f64 {
        let rx = prb_mw / dbm_to_mw(self.cl[ue][self.ues[ue].cell]);
        let (mut sum, mut n) = (0.0, 0);
        for prb in 0..NARROWBAND_PRBS as u8 {
            if mask & (1 << prb) != 0 {
                sum += rx / (self.enb_noise_mw + self.legacy_ul_mw + self.ul_interference(ue, prb));
                n += 1;
            }
        }
        if n == 0 {
            0.0
        } else {
            sum / f64::from(n)
        }
    }

    fn on_air(&mut self, t: Tti) -> Result<()> {
        for ue in 0..self.ues.len() {
            // random access response
            if let Some(mut f) = self.ues[ue].response {
                if f.grant.timeline.data.contains(t) {
                    f.sinr_lin_sum += self.dl_sinr_lin(ue, f.grant.prb_mask);
                    f.reps += 1;
                    if t == f.grant.timeline.data.last() {
                        let eff = self.res.bler.combine(10.0 * (f.sinr_lin_sum / f64::from(f.reps)).log10(), f.reps);
                        let p = self.res.bler.bler(eff, f.grant.mcs, f.grant.tbs_bits)?;
                        let u = &mut self.ues[ue];
                        let ok = u.rng_response.random::<f64>() >= p;
                        u.response = None;
                        u.response_delivered = ok;
                        self.note(format!("t{t} ue{ue} response {}", if ok { "ok" } else { "lost" }));
                    } else {
                        self.ues[ue].response = Some(f);
                    }
                }
            }

            for d in Direction::BOTH {
                let di = d.index();
                for p in 0..self.ues[ue].flights[di].len() {
                    let Some(mut f) = self.ues[ue].flights[di][p] else { continue };
                    if f.decoded.is_some() || !f.grant.timeline.data.contains(t) {
                        continue;
                    }
                    let g = f.grant;
                    let sinr = match d {
                        Direction::Dl => self.dl_sinr_lin(ue, g.prb_mask),
                        Direction::Ul => {
                            let p_dbm = g.tx_power_dbm.unwrap_or(self.sc.power.p_max_dbm);
                            let prb_mw = dbm_to_mw(p_dbm - 10.0 * f64::from(g.n_prbs).log10());
                            self.cur.ul.push(UlTx { ue, cell: self.ues[ue].cell, mask: g.prb_mask, prb_mw });
                            self.ul_sinr_lin(ue, g.prb_mask, prb_mw)
                        }
                    };
                    let sinr_db = 10.0 * sinr.log10();
                    f.sinr_lin_sum += sinr;
                    f.reps += 1;
                    {
                        let st = &mut self.ues[ue].stats;
                        st.sinr_db_sum[di] += sinr_db;
                        st.sinr_samples[di] += 1;
                        if let Some(pw) = g.tx_power_dbm {
                            st.ul_power_dbm_sum += pw;
                            st.ul_power_samples += 1;
                        }
                    }
                    if let Some(tr) = &mut self.trace {
                        tr.push(TraceRow {
                            tti: t,
                            ue: g.ue_id,
                            cell: self.ues[ue].cell,
                            direction: d.as_str(),
                            purpose: g.purpose.as_str(),
                            attempt: g.attempt,
                            mcs: g.mcs,
                            n_prbs: g.n_prbs,
                            rl_data: g.rl_data,
                            tx_power_dbm: g.tx_power_dbm,
                            sinr_db,
                        });
                    }
                    if t == g.timeline.data.last() {
                        self.data_done(ue, d, p, &mut f, t)?;
                    }
                    self.ues[ue].flights[di][p] = Some(f);
                }
            }

            // PUCCH reports
            if let Some((span, kind)) = self.ues[ue].pucch {
                if t >= span.last() {
                    self.ues[ue].pucch = None;
                    if self.ues[ue].ctx.is_connected() {
                        match kind {
                            PucchUse::Sr => {
                                let u = &mut self.ues[ue];
                                u.sr_pending = true;
                                u.ul_reported_until = Some(u.ul_reported_until.map_or(span.start, |r| r.max(span.start)));
                            }
                            PucchUse::Cqi => {
                                let s = 10.0 * self.dl_sinr_lin(ue, 0x3f).log10();
                                self.ues[ue].ctx.estimates.dl_sinr_db = Some(s);
                            }
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Last data repetition received: decide the block and update what the
    /// eNB learns from it.
    fn data_done(&mut self, ue: usize, d: Direction, p: usize, f: &mut Flight, t: Tti) -> Result<()> {
        let di = d.index();
        let g = f.grant;
        let (prior_lin, prior_reps) = self.ues[ue].ctx.harq[di][p]
            .tb
            .as_ref()
            .map(|tb| (tb.combined_sinr_lin, tb.combined_reps))
            .ok_or_else(|| Error::invariant(t, "data on air without a block"))?;
        let total = prior_lin + f.sinr_lin_sum;
        let reps = prior_reps + f.reps;
        let eff = self.res.bler.combine(10.0 * (total / f64::from(reps)).log10(), reps);
        let pb = self.res.bler.bler(eff, g.mcs, g.tbs_bits)?;
        let measured_db = 10.0 * (f.sinr_lin_sum / f64::from(f.reps)).log10();
        let dl_now = (d == Direction::Ul && self.sc.scheduler.aperiodic_cqi).then(|| self.dl_sinr_lin(ue, 0x3f));
        let tpc_cfg = self.sc.power.tpc;
        let u = &mut self.ues[ue];
        let ok = u.rng_decode[di].random::<f64>() >= pb;
        u.ctx.harq[di][p].data_done(t, f.sinr_lin_sum, f.reps)?;
        f.decoded = Some(ok);
        f.feedback_at = match d {
            Direction::Ul => t,
            Direction::Dl => g.timeline.ack.map_or(t, |a| a.last()),
        };
        if d == Direction::Ul {
            let prb_dbm = g.tx_power_dbm.unwrap_or(u.ctx.pc.p_max_dbm) - 10.0 * f64::from(g.n_prbs).log10();
            u.ctx.estimates.ul_loss_plus_ni_db = Some(prb_dbm - measured_db);
            if let Some(step) = u.ctx.tpc.observe(&tpc_cfg, measured_db) {
                u.ctx.pc.apply_tpc(step, tpc_cfg.accum_limit_db);
            }
            // buffer status rides on the PUSCH
            let r = g.timeline.data.start;
            u.ul_reported_until = Some(u.ul_reported_until.map_or(r, |x| x.max(r)));
            if let Some(s) = dl_now {
                u.ctx.estimates.dl_sinr_db = Some(10.0 * s.log10());
            }
        }
        Ok(())
    }

    // (5) HARQ feedback

    fn feedback(&mut self, t: Tti) -> Result<()> {
        for ue in 0..self.ues.len() {
            for d in Direction::BOTH {
                let di = d.index();
                for p in 0..self.ues[ue].flights[di].len() {
                    let Some(f) = self.ues[ue].flights[di][p] else { continue };
                    let Some(ok) = f.decoded else { continue };
                    if f.feedback_at != t {
                        continue;
                    }
                    let u = &mut self.ues[ue];
                    u.activity = true;
                    if f.grant.attempt == 1 {
                        outer_loop_update(&mut u.ctx.la[di], ok);
                        u.stats.first_tx += 1;
                        u.stats.first_tx_nack += u64::from(!ok);
                    }
                    let data_last = f.grant.timeline.data.last();
                    let res = u.ctx.harq[di][p].feedback(t, ok)?;
                    self.note(format!("t{t} ue{ue} {d} p{p} a{} {}", f.grant.attempt, if ok { "ack" } else { "nack" }));
                    match res {
                        FeedbackResult::Retry => {
                            if let Some(fl) = &mut self.ues[ue].flights[di][p] {
                                fl.decoded = None;
                                fl.sinr_lin_sum = 0.0;
                                fl.reps = 0;
                            }
                        }
                        FeedbackResult::Delivered(tb) => {
                            self.ues[ue].flights[di][p] = None;
                            self.ues[ue].stats.blocks_done += 1;
                            for s in tb.payload {
                                self.segment_delivered(s, data_last);
                            }
                        }
                        FeedbackResult::Exhausted(tb) => {
                            self.ues[ue].flights[di][p] = None;
                            self.ues[ue].stats.blocks_done += 1;
                            self.ues[ue].stats.blocks_lost += 1;
                            for s in tb.payload {
                                self.packets[s.packet].in_flight -= s.bits;
                                self.finish_packet(s.packet, PacketState::DroppedResidual);
                            }
                        }
                    }
                }
            }
        }
        Ok(())
    }

    fn segment_delivered(&mut self, s: Segment, data_last: Tti) {
        let pk = &mut self.packets[s.packet];
        pk.in_flight -= s.bits;
        if pk.state.is_final() {
            return;
        }
        pk.delivered += s.bits;
        if pk.delivered < pk.bits {
            return;
        }
        let latency = data_last + 1 - pk.arrival;
        let late = pk.budget_ms.is_some_and(|b| latency > b);
        if late {
            self.finish_packet(s.packet, PacketState::DroppedBudget);
            return;
        }
        let (ue, bits) = (pk.ue, pk.bits);
        pk.state = PacketState::Delivered;
        let u = &mut self.ues[ue];
        u.stats.delivered_packets += 1;
        u.stats.delivered_bits += u64::from(bits);
        u.stats.latencies.push(latency);
        u.stats.packet_rates_bps.push(f64::from(bits) * 1000.0 / latency as f64);
        if let TrafficConfig::Bursty(b) = u.traffic {
            if let (Some(reply), Direction::Ul) = (b.response_bits, b.direction) {
                u.replies.push_back(Arrival {
                    tti: data_last + 1,
                    bits: reply,
                    direction: Direction::Dl,
                    kind: PacketKind::Data,
                });
            }
        }
    }

    /// Moves a packet to a lost state and takes it off its queue.
    fn finish_packet(&mut self, p: usize, state: PacketState) {
        let pk = &mut self.packets[p];
        if pk.state.is_final() {
            return;
        }
        let pk = &mut self.packets[p];
        pk.state = state;
        pk.unsent = 0;
        let ue = pk.ue;
        let u = &mut self.ues[ue];
        match state {
            PacketState::DroppedResidual => u.stats.dropped_residual += 1,
            PacketState::DroppedBudget => u.stats.budget_violations += 1,
            _ => {}
        }
        u.stats.packet_rates_bps.push(0.0);
        for q in &mut u.queue {
            q.retain(|&x| x != p);
        }
    }

    // (6) accounting and audits

    fn account(&mut self, t: Tti) -> Result<()> {
        for (c, g) in self.grids.iter_mut().enumerate() {
            for u in g.retire_before(t + 1) {
                if !ResourceGrid::within_capacity(&u) {
                    self.audits.capacity_violations += 1;
                    return Err(Error::invariant(t, format!("cell {c} over capacity: {u:?}")));
                }
                self.prb_used[c] += u64::from(u.ul_prbs.count_ones() + u.dl_prbs.count_ones());
                self.mpdcch_used[c] += u64::from(u.mpdcch_units);
            }
        }
        for u in &mut self.ues {
            if let Some(c) = u.ctx.calendar.retire_before(t + 1) {
                self.audits.half_duplex_violations += 1;
                return Err(Error::invariant(t, format!("ue {} half-duplex conflict {c:?}", u.ctx.ue_id)));
            }
        }
        self.audits.ttis_audited += 1;
        if (t + 1) % CONSERVATION_PERIOD == 0 {
            for u in &self.ues {
                if let Some(c) = u.ctx.calendar.audit() {
                    self.audits.half_duplex_violations += 1;
                    return Err(Error::invariant(t, format!("ue {} half-duplex conflict {c:?}", u.ctx.ue_id)));
                }
            }
            self.check_conservation()?;
        }
        Ok(())
    }

    fn packet_counts(&self) -> Vec<[u64; 5]> {
        let mut v = vec![[0u64; 5]; self.ues.len()];
        for pk in &self.packets {
            let i = match pk.state {
                PacketState::Delivered => 0,
                PacketState::DroppedResidual => 1,
                PacketState::DroppedBudget => 2,
                PacketState::InFlight => 3,
                PacketState::Queued => 4,
            };
            v[pk.ue][i] += 1;
        }
        v
    }

    /// Every offered packet is delivered, lost, in flight or queued, and the
    /// bits of each unfinished packet add up.
    pub fn check_conservation(&mut self) -> Result<()> {
        let t = self.tti;
        self.audits.conservation_checks += 1;
        let fail = |audits: &mut Audits, msg: String| {
            audits.conservation_violations += 1;
            Err(Error::invariant(t, msg))
        };
        for pk in &self.packets {
            if !pk.state.is_final() && pk.unsent + pk.in_flight + pk.delivered != pk.bits {
                return fail(&mut self.audits, format!("packet bits do not add up: {pk:?}"));
            }
        }
        for (ue, c) in self.packet_counts().iter().enumerate() {
            let st = &self.ues[ue].stats;
            let total: u64 = c.iter().sum();
            if total != st.offered_packets
                || c[0] != st.delivered_packets
                || c[1] != st.dropped_residual
                || c[2] != st.budget_violations
                || st.delivered_bits > st.offered_bits
            {
                return fail(&mut self.audits, format!("ue {ue}: packet counts {c:?} disagree with {st:?}"));
            }
        }
        Ok(())
    }

    pub fn report(&self) -> Result<KpiReport> {
        let counts = self.packet_counts();
        let dur = self.tti;
        let voip = |u: &UeSim| matches!(u.traffic, TrafficConfig::Voip(_));
        let rach = |u: &UeSim| u.ctx.rach_log.len() as u64;
        let ues: Vec<_> = self
            .ues
            .iter()
            .enumerate()
            .map(|(i, u)| {
                build_row(RowInput {
                    ue: i.to_string(),
                    cell: Some(u.cell),
                    in_scope: u.in_scope,
                    coupling_loss_db: Some(self.cl[i][u.cell]),
                    stats: vec![&u.stats],
                    in_flight: counts[i][3],
                    queued: counts[i][4],
                    rach_attempts: rach(u),
                    rach_overhead: u.ctx.rach_overhead_prb_ttis(),
                    duration_ms: dur,
                    voip: voip(u),
                })
            })
            .collect();
        let scope: Vec<usize> = (0..self.ues.len()).filter(|&i| self.ues[i].in_scope).collect();
        let aggregate = build_row(RowInput {
            ue: "all".into(),
            cell: None,
            in_scope: true,
            coupling_loss_db: None,
            stats: scope.iter().map(|&i| &self.ues[i].stats).collect(),
            in_flight: scope.iter().map(|&i| counts[i][3]).sum(),
            queued: scope.iter().map(|&i| counts[i][4]).sum(),
            rach_attempts: scope.iter().map(|&i| rach(&self.ues[i])).sum(),
            rach_overhead: scope.iter().map(|&i| self.ues[i].ctx.rach_overhead_prb_ttis()).sum(),
            duration_ms: dur,
            voip: scope.iter().any(|&i| voip(&self.ues[i])),
        });
        let cells = (0..self.grids.len())
            .map(|c| CellKpi {
                cell: c,
                prb_utilization: if dur == 0 {
                    0.0
                } else {
                    self.prb_used[c] as f64 / (2.0 * f64::from(NARROWBAND_PRBS) * dur as f64)
                },
                mpdcch_utilization: if dur == 0 {
                    0.0
                } else {
                    self.mpdcch_used[c] as f64 / (f64::from(MPDCCH_UNITS) * dur as f64)
                },
            })
            .collect();
        Ok(KpiReport {
            scenario: self.sc.clone(),
            duration_ms: dur,
            narrowband: self.res.narrowband.nb_index,
            ues,
            aggregate,
            cells,
            audits: self.audits.clone(),
        })
    }
}
