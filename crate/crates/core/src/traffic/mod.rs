//! Traffic sources.
//!
//! Every source owns its random stream, derived from the run seed and a
//! per-source stream id, so the order in which the engine polls sources can
//! never change what they draw.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::{Direction, Tti};

/// Seeded ChaCha8 generator on its own stream.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    use rand::SeedableRng;
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

/// Periodic meter readings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BurstyConfig {
    pub min_interval_ms: f64,
    pub mean_interval_ms: f64,
    pub size_bits: u32,
    pub header_bits: u32,
    pub direction: Direction,
    /// If set, every delivered reading triggers a reply of this size in the
    /// opposite direction.
    pub response_bits: Option<u32>,
}

impl Default for BurstyConfig {
    fn default() -> Self {
        Self {
            min_interval_ms: 2500.0,
            mean_interval_ms: 10_000.0,
            size_bits: 1000,
            header_bits: 0,
            direction: Direction::Ul,
            response_bits: None,
        }
    }
}

impl BurstyConfig {
    pub fn validate(&self, path: &str) -> Result<()> {
        if !(self.min_interval_ms.is_finite() && self.min_interval_ms >= 1.0) {
            return Err(Error::config(format!("{path}.min_interval_ms"), "must be >= 1"));
        }
        if !(self.mean_interval_ms.is_finite() && self.mean_interval_ms > self.min_interval_ms) {
            return Err(Error::config(format!("{path}.mean_interval_ms"), "must exceed min_interval_ms"));
        }
        if self.size_bits == 0 {
            return Err(Error::config(format!("{path}.size_bits"), "must be > 0"));
        }
        if self.response_bits == Some(0) {
            return Err(Error::config(format!("{path}.response_bits"), "must be > 0 when set"));
        }
        Ok(())
    }

    /// Draws one reading interval in ms: `min + Exp(mean - min)`.
    pub fn sample_interval_ms<R: Rng>(&self, rng: &mut R) -> f64 {
        let exp = Exp::new(1.0 / (self.mean_interval_ms - self.min_interval_ms)).expect("validated rate");
        self.min_interval_ms + exp.sample(rng)
    }
}

/// A voice call with talk spurts and silence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VoipConfig {
    pub voice_bits: u32,
    pub sid_bits: u32,
    pub header_bits: u32,
    pub voice_period_ms: u64,
    pub sid_period_ms: u64,
    pub mean_talk_ms: f64,
    pub mean_silence_ms: f64,
    pub budget_ms: u64,
}

impl Default for VoipConfig {
    fn default() -> Self {
        Self {
            voice_bits: 320,
            sid_bits: 120,
            header_bits: 0,
            voice_period_ms: 20,
            sid_period_ms: 160,
            mean_talk_ms: 2000.0,
            mean_silence_ms: 2000.0,
            budget_ms: 200,
        }
    }
}

impl VoipConfig {
    pub fn validate(&self, path: &str) -> Result<()> {
        if self.voice_bits == 0 || self.sid_bits == 0 {
            return Err(Error::config(format!("{path}.voice_bits"), "packet sizes must be > 0"));
        }
        if self.voice_period_ms == 0 || self.sid_period_ms == 0 {
            return Err(Error::config(format!("{path}.voice_period_ms"), "periods must be > 0"));
        }
        for (name, v) in [("mean_talk_ms", self.mean_talk_ms), ("mean_silence_ms", self.mean_silence_ms)] {
            if !(v.is_finite() && v >= 1.0) {
                return Err(Error::config(format!("{path}.{name}"), "must be >= 1"));
            }
        }
        if self.budget_ms == 0 {
            return Err(Error::config(format!("{path}.budget_ms"), "must be > 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FullBufferConfig {
    pub direction: Direction,
}

/// Traffic profile of one UE group.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TrafficConfig {
    Bursty(BurstyConfig),
    Voip(VoipConfig),
    FullBuffer(FullBufferConfig),
}

impl TrafficConfig {
    pub fn validate(&self, path: &str) -> Result<()> {
        match self {
            TrafficConfig::Bursty(b) => b.validate(path),
            TrafficConfig::Voip(v) => v.validate(path),
            TrafficConfig::FullBuffer(_) => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PacketKind {
    Data,
    Voice,
    Sid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Arrival {
    pub tti: Tti,
    pub bits: u32,
    pub direction: Direction,
    pub kind: PacketKind,
}

#[derive(Debug, Clone)]
pub struct BurstySource {
    cfg: BurstyConfig,
    rng: ChaCha8Rng,
    /// Exact arrival time in ms; rounded up to a TTI when emitted.
    next_ms: f64,
}

impl BurstySource {
    /// The first reading lands uniformly within one mean interval.
    pub fn new(cfg: BurstyConfig, mut rng: ChaCha8Rng) -> Result<Self> {
        cfg.validate("traffic")?;
        let next_ms = rng.random::<f64>() * cfg.mean_interval_ms;
        Ok(Self { cfg, rng, next_ms })
    }

    pub fn next_event(&mut self) -> Arrival {
        let a = Arrival {
            tti: self.next_ms.ceil() as Tti,
            bits: self.cfg.size_bits + self.cfg.header_bits,
            direction: self.cfg.direction,
            kind: PacketKind::Data,
        };
        self.next_ms += self.cfg.sample_interval_ms(&mut self.rng);
        a
    }
}

/// One direction of a voice call. Both directions of a call are built from
/// the same phase stream; the downlink talks while the uplink is silent.
#[derive(Debug, Clone)]
pub struct VoipSource {
    cfg: VoipConfig,
    direction: Direction,
    rng: ChaCha8Rng,
    /// The uplink talks during this phase.
    ul_talking: bool,
    phase_start: Tti,
    phase_len: u64,
    /// Index of the next packet inside the phase.
    j: u64,
}

impl VoipSource {
    pub fn new(cfg: VoipConfig, direction: Direction, mut rng: ChaCha8Rng) -> Result<Self> {
        cfg.validate("traffic")?;
        let ul_talking = rng.random::<bool>();
        let mut s = Self { cfg, direction, rng, ul_talking, phase_start: 0, phase_len: 0, j: 0 };
        s.phase_len = s.draw_phase();
        Ok(s)
    }

    fn draw_phase(&mut self) -> u64 {
        let mean = if self.ul_talking { self.cfg.mean_talk_ms } else { self.cfg.mean_silence_ms };
        let len = Exp::new(1.0 / mean).expect("validated rate").sample(&mut self.rng);
        (len.round() as u64).max(1)
    }

    fn talking(&self) -> bool {
        self.ul_talking == (self.direction == Direction::Ul)
    }

    /// Current phase of this direction as `(talking, start, length)`.
    pub fn phase(&self) -> (bool, Tti, u64) {
        (self.talking(), self.phase_start, self.phase_len)
    }

    pub fn next_event(&mut self) -> Arrival {
        loop {
            let end = self.phase_start + self.phase_len;
            let (t, bits, kind) = if self.talking() {
                // voice frames at start, start + 20, ... up to and including the end
                (self.phase_start + self.j * self.cfg.voice_period_ms, self.cfg.voice_bits, PacketKind::Voice)
            } else {
                // SID frames one period into silence, strictly before it ends
                (self.phase_start + (self.j + 1) * self.cfg.sid_period_ms, self.cfg.sid_bits, PacketKind::Sid)
            };
            let inside = if self.talking() { t <= end } else { t < end };
            if inside {
                self.j += 1;
                return Arrival { tti: t, bits: bits + self.cfg.header_bits, direction: self.direction, kind };
            }
            self.phase_start = end;
            self.ul_talking = !self.ul_talking;
            self.phase_len = self.draw_phase();
            self.j = 0;
            // the first voice frame of a spurt would repeat the last frame of
            // the previous spurt only if a silence had zero length; phases are
            // at least 1 ms, so arrivals stay strictly increasing
        }
    }
}

/// A source of arrivals for one UE and direction.
#[derive(Debug, Clone)]
pub enum TrafficSource {
    Bursty(BurstySource),
    Voip(VoipSource),
    /// Always backlogged; the engine tops the queue up every TTI.
    FullBuffer(Direction),
}

impl TrafficSource {
    /// Sources for one UE: one per active direction. Streams are split by
    /// `stream`, which the caller derives from the UE id.
    pub fn for_ue(cfg: &TrafficConfig, seed: u64, stream: u64) -> Result<Vec<TrafficSource>> {
        Ok(match cfg {
            TrafficConfig::Bursty(b) => vec![TrafficSource::Bursty(BurstySource::new(*b, stream_rng(seed, stream))?)],
            TrafficConfig::Voip(v) => Direction::BOTH
                .iter()
                .map(|&d| VoipSource::new(*v, d, stream_rng(seed, stream)).map(TrafficSource::Voip))
                .collect::<Result<_>>()?,
            TrafficConfig::FullBuffer(f) => vec![TrafficSource::FullBuffer(f.direction)],
        })
    }

    /// Next arrival, or `None` for a full-buffer source.
    pub fn next_event(&mut self) -> Option<Arrival> {
        match self {
            TrafficSource::Bursty(s) => Some(s.next_event()),
            TrafficSource::Voip(s) => Some(s.next_event()),
            TrafficSource::FullBuffer(_) => None,
        }
    }
}

/// A source with one arrival of lookahead, so the engine can ask for
/// everything due at a TTI.
#[derive(Debug, Clone)]
pub struct Pending {
    source: TrafficSource,
    next: Option<Arrival>,
}

impl Pending {
    pub fn new(mut source: TrafficSource) -> Self {
        let next = source.next_event();
        Self { source, next }
    }

    pub fn source(&self) -> &TrafficSource {
        &self.source
    }

    /// Arrivals with `tti <= now`, in order.
    pub fn due(&mut self, now: Tti) -> Vec<Arrival> {
        let mut out = Vec::new();
        while let Some(a) = self.next {
            if a.tti > now {
                break;
            }
            out.push(a);
            self.next = self.source.next_event();
        }
        out
    }
}
