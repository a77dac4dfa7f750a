//! Reference policies.

mod associator;

pub use associator::{AssociationStore, Associator, AssociatorParams};

use crate::body::{column_offset, HEAD_STEP};
use crate::drives::DriveState;
use crate::error::{Error, Result};
use crate::instincts::{ReflexParams, ReflexSet};
use crate::observation::{ActionCommand, ObservationFrame, Vocal};
use crate::rng::SessionRng;
use crate::sdr::{CodecParams, SdrFrame};

pub trait Agent {
    fn name(&self) -> &str;
    fn act(&mut self, obs: &ObservationFrame) -> ActionCommand;
    /// Called at the start of every episode. Learned state survives.
    fn reset(&mut self) {}
}

impl<A: Agent + ?Sized> Agent for Box<A> {
    fn name(&self) -> &str {
        (**self).name()
    }
    fn act(&mut self, obs: &ObservationFrame) -> ActionCommand {
        (**self).act(obs)
    }
    fn reset(&mut self) {
        (**self).reset()
    }
}

/// Drive relief between two observations, computed agent-side.
pub fn intrinsic_signal(prev: &DriveState, cur: &DriveState) -> f64 {
    -(cur.thirst - prev.thirst) - (cur.hunger - prev.hunger)
}

/// Head command that brings retina column position `col` (fractional) to
/// the centre.
pub fn head_turn_toward_column(col: f64) -> f64 {
    let lo = col.floor().clamp(0.0, 15.0) as usize;
    let hi = col.ceil().clamp(0.0, 15.0) as usize;
    let frac = col - lo as f64;
    let offset = column_offset(lo) * (1.0 - frac) + column_offset(hi) * frac;
    (offset / HEAD_STEP).clamp(-1.0, 1.0)
}

/// Mean column at which `kind` is visible.
pub fn kind_column(obs: &ObservationFrame, kind: u8) -> Option<f64> {
    let cols = obs.retina.columns_with(kind);
    if cols.is_empty() {
        return None;
    }
    Some(cols.iter().sum::<usize>() as f64 / cols.len() as f64)
}

/// Does nothing at all; no reflexes either.
#[derive(Debug, Default, Clone)]
pub struct NullAgent;

impl Agent for NullAgent {
    fn name(&self) -> &str {
        "null"
    }
    fn act(&mut self, _: &ObservationFrame) -> ActionCommand {
        ActionCommand::null()
    }
}

/// Reflexes over a null policy.
#[derive(Debug, Clone)]
pub struct ReflexAgent {
    reflexes: ReflexSet,
}

impl ReflexAgent {
    pub fn new(params: ReflexParams) -> Self {
        Self {
            reflexes: ReflexSet::new(params),
        }
    }
}

impl Default for ReflexAgent {
    fn default() -> Self {
        Self::new(ReflexParams::default())
    }
}

impl Agent for ReflexAgent {
    fn name(&self) -> &str {
        "reflex"
    }
    fn act(&mut self, obs: &ObservationFrame) -> ActionCommand {
        self.reflexes.evaluate(obs).into_action()
    }
}

/// Reflexes plus occasional bursts of random speech frames.
#[derive(Debug, Clone)]
pub struct Babbler {
    reflexes: ReflexSet,
    codec: CodecParams,
    seed: u64,
    rng: SessionRng,
    queue: Vec<SdrFrame>,
    pub rate: f64,
}

impl Babbler {
    pub fn new(seed: u64, codec: CodecParams, reflexes: ReflexParams) -> Self {
        Self {
            reflexes: ReflexSet::new(reflexes),
            codec,
            seed,
            rng: SessionRng::seed_from_u64(seed),
            queue: Vec::new(),
            rate: 0.02,
        }
    }

    fn random_frame(&mut self) -> SdrFrame {
        let bits = self
            .rng
            .sample_distinct(self.codec.dimension, self.codec.cardinality);
        SdrFrame::from_indices(bits.into_iter().map(|b| b as u32))
    }
}

impl Agent for Babbler {
    fn name(&self) -> &str {
        "babbler"
    }

    fn act(&mut self, obs: &ObservationFrame) -> ActionCommand {
        if self.queue.is_empty() && self.rng.unit() < self.rate {
            let letters = 1 + self.rng.below(5) as usize;
            for _ in 0..letters {
                let f = self.random_frame();
                for _ in 0..self.codec.frames_per_symbol {
                    self.queue.push(f.clone());
                }
            }
            self.queue.reverse();
        }
        let mut action = ActionCommand::null();
        if let Some(f) = self.queue.pop() {
            action.vocal = Vocal::Speech { frame: f };
        }
        self.reflexes.evaluate(obs).overwrite(&mut action);
        action
    }

    fn reset(&mut self) {
        self.rng = SessionRng::seed_from_u64(self.seed);
        self.queue.clear();
    }
}

/// Turns the head at random every step.
#[derive(Debug, Clone)]
pub struct RandomGaze {
    seed: u64,
    rng: SessionRng,
}

impl RandomGaze {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            rng: SessionRng::seed_from_u64(seed),
        }
    }

    pub fn reseed(&mut self, seed: u64) {
        self.seed = seed;
        self.rng = SessionRng::seed_from_u64(seed);
    }
}

impl Agent for RandomGaze {
    fn name(&self) -> &str {
        "random_gaze"
    }
    fn act(&mut self, _: &ObservationFrame) -> ActionCommand {
        let mut a = ActionCommand::null();
        a.muscles.head_turn = self.rng.uniform(-1.0, 1.0);
        a
    }
    fn reset(&mut self) {
        self.rng = SessionRng::seed_from_u64(self.seed);
    }
}

/// Scripted to keep a given kind centred; sweeps when it is out of view.
#[derive(Debug, Clone)]
pub struct OracleLooker {
    pub kind: u8,
}

impl Agent for OracleLooker {
    fn name(&self) -> &str {
        "oracle"
    }
    fn act(&mut self, obs: &ObservationFrame) -> ActionCommand {
        let mut a = ActionCommand::null();
        a.muscles.head_turn = match kind_column(obs, self.kind) {
            Some(col) => head_turn_toward_column(col),
            None => 1.0,
        };
        a
    }
}

pub const AGENT_NAMES: [&str; 5] = ["null", "reflex", "babbler", "random_gaze", "associator"];

/// Builds a named agent with default settings.
pub fn make_agent(name: &str, seed: u64, codec: &CodecParams) -> Result<Box<dyn Agent>> {
    Ok(match name {
        "null" | "mute" => Box::new(NullAgent),
        "reflex" => Box::new(ReflexAgent::default()),
        "babbler" => Box::new(Babbler::new(seed, codec.clone(), ReflexParams::default())),
        "random_gaze" => Box::new(RandomGaze::new(seed)),
        "associator" => Box::new(Associator::new(AssociatorParams::default(), codec.clone())),
        other => {
            return Err(Error::InvalidParameter(format!(
                "unknown agent {other:?}; expected one of {}",
                AGENT_NAMES.join(", ")
            )))
        }
    })
}
