//! Reset/step lifecycle around the world, the caregiver and the curriculum.

mod config;
pub mod protocol;
pub mod record;

pub use config::{config_schema, SessionConfig};
pub use record::{replay, Divergence, Recorder, ReplayReport};

use crate::body::{render_retina, sample_touch, ingest_if_sucking};
use crate::caregiver::{caregiver_step, CaregiverContext, CaregiverState};
use crate::curriculum::{gate_action, gate_audio, gate_retina, ActionChannel, GatingMask, Stage, StageSchedule};
use crate::drives::{ingest, tick, DriveState};
use crate::error::{Error, Result};
use crate::instincts::{apply_reflexes, ReflexSet};
use crate::observation::{ActionCommand, AudioObs, Event, ObservationFrame, Proprio, Vocal};
use crate::rng::SessionRng;
use crate::sdr::{SdrCodebook, SdrFrame};
use crate::world::{wrap_angle, ReceivedSound, SoundEvent, SoundKind, WorldState, ID_AGENT, ID_CAREGIVER};

/// One live episode.
pub struct Session {
    config: SessionConfig,
    schedule: StageSchedule,
    stage: Stage,
    world: WorldState,
    codebook: SdrCodebook,
    caregiver: CaregiverState,
    drives: DriveState,
    server_reflexes: Option<ReflexSet>,
    t: u64,
    last: ObservationFrame,
    recorder: Option<Recorder>,
}

impl std::fmt::Debug for Session {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Session")
            .field("seed", &self.config.seed)
            .field("t", &self.t)
            .field("stage", &self.stage.index)
            .finish_non_exhaustive()
    }
}

impl Session {
    /// Builds the world and returns the session positioned at t = 0. Opens
    /// the episode log when the config names one.
    pub fn new(config: SessionConfig) -> Result<Self> {
        let recorder = match &config.record {
            Some(path) => Some(Recorder::create(path)?),
            None => None,
        };
        Self::with_recorder(config, recorder)
    }

    pub fn with_recorder(config: SessionConfig, recorder: Option<Recorder>) -> Result<Self> {
        config.validate()?;
        let schedule = StageSchedule::new(&config.schedule)
            .map_err(|(path, message)| Error::Config { path, message })?;
        let codec = &config.codec;
        // Draw order: codebook, then placement, then everything per step.
        let mut rng = SessionRng::seed_from_u64(config.seed);
        let codebook = SdrCodebook::build_from(&mut rng, config.seed, codec.dimension, codec.cardinality)?;
        let mut world = WorldState::new(rng, codec.dimension);
        let stage = schedule.stage_at(config.start_step);
        let mask = schedule.mask(&stage);
        world.set_presence(mask.bottles_present(), mask.toy_count);
        let mut s = Self {
            caregiver: CaregiverState::new(config.schedule.intro_interval),
            drives: config.initial_drives.clamped(),
            server_reflexes: config
                .server_reflexes
                .then(|| ReflexSet::new(config.reflexes.clone())),
            schedule,
            stage,
            world,
            codebook,
            t: 0,
            last: ObservationFrame::blank(0),
            recorder,
            config,
        };
        s.last = s.sense(Vec::new());
        if let Some(rec) = s.recorder.as_mut() {
            rec.header(&s.config)?;
            rec.step(0, None, &s.last, s.world.hash())?;
        }
        Ok(s)
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }
    pub fn t(&self) -> u64 {
        self.t
    }
    pub fn stage(&self) -> &Stage {
        &self.stage
    }
    pub fn mask(&self) -> &GatingMask {
        self.schedule.mask(&self.stage)
    }
    pub fn schedule(&self) -> &StageSchedule {
        &self.schedule
    }
    pub fn world(&self) -> &WorldState {
        &self.world
    }
    /// Direct access for probes and tests that stage a scene.
    pub fn world_mut(&mut self) -> &mut WorldState {
        &mut self.world
    }
    pub fn codebook(&self) -> &SdrCodebook {
        &self.codebook
    }
    pub fn caregiver(&self) -> &CaregiverState {
        &self.caregiver
    }
    pub fn caregiver_mut(&mut self) -> &mut CaregiverState {
        &mut self.caregiver
    }
    pub fn drives(&self) -> DriveState {
        self.drives
    }
    pub fn set_drives(&mut self, drives: DriveState) {
        self.drives = drives.clamped();
        self.last.intero = self.drives;
    }
    /// The most recent observation.
    pub fn observation(&self) -> &ObservationFrame {
        &self.last
    }

    /// Re-renders the current observation without advancing, e.g. after a
    /// probe rearranged the room. Events of the last step are kept.
    pub fn refresh_observation(&mut self) -> &ObservationFrame {
        let events = std::mem::take(&mut self.last.events);
        let saved = self.world.rng.clone();
        self.last = self.sense(events);
        self.world.rng = saved;
        &self.last
    }

    /// Clamps out-of-range values, rejects what cannot be interpreted.
    fn sanitize(&self, action: &ActionCommand, events: &mut Vec<Event>) -> Result<ActionCommand> {
        let (muscles, mut clamped) = action.muscles.clamped();
        let vocal = match &action.vocal {
            Vocal::None => Vocal::None,
            Vocal::Cry { loudness } => {
                if !loudness.is_finite() {
                    return Err(Error::ActionDecode(format!("cry loudness {loudness} is not finite")));
                }
                let l = loudness.clamp(0.0, 1.0);
                clamped |= l != *loudness;
                Vocal::Cry { loudness: l }
            }
            Vocal::Speech { frame } => {
                if !frame.is_valid_for(self.config.codec.dimension) {
                    return Err(Error::ActionDecode(format!(
                        "speech frame indices must be distinct and below {}",
                        self.config.codec.dimension
                    )));
                }
                Vocal::Speech { frame: frame.clone() }
            }
        };
        if clamped {
            events.push(Event::ActionClamped);
        }
        Ok(ActionCommand { muscles, vocal })
    }

    /// Decodes a JSON action, then steps.
    pub fn step_json(&mut self, value: serde_json::Value) -> Result<ObservationFrame> {
        let action: ActionCommand =
            serde_json::from_value(value).map_err(|e| Error::ActionDecode(e.to_string()))?;
        self.step(&action)
    }

    pub fn step(&mut self, action: &ActionCommand) -> Result<ObservationFrame> {
        let mut events = Vec::new();
        let mut act = self.sanitize(action, &mut events)?;
        let mask = self.schedule.mask(&self.stage).clone();
        let gated = gate_action(&mask, &mut act);
        if !gated.is_empty() {
            events.push(Event::ActionGated { channels: gated });
        }
        if let Some(reflexes) = &self.server_reflexes {
            if apply_reflexes(reflexes, &self.last, &mut act) {
                events.push(Event::SpeechDropped);
            }
            // Reflexes never unlock a channel the stage keeps closed.
            gate_action(&mask, &mut act);
        }

        let kind = match &act.vocal {
            Vocal::None => None,
            Vocal::Cry { loudness } => Some(SoundKind::Cry { loudness: *loudness }),
            Vocal::Speech { frame } => Some(SoundKind::Speech { frame: frame.clone() }),
        };
        if let Some(kind) = kind {
            self.world.emit(SoundEvent {
                source_id: ID_AGENT,
                source: self.world.body.position,
                kind,
                emitted_step: self.world.step,
            });
        }

        let heard: Vec<ReceivedSound> = self.world.heard_by(ID_CAREGIVER).cloned().collect();
        let ctx = CaregiverContext {
            params: &self.config.caregiver,
            mask: &mask,
            codebook: &self.codebook,
            codec: &self.config.codec,
            intro_interval: self.config.schedule.intro_interval,
        };
        let out = caregiver_step(&self.world, &mut self.caregiver, &heard, &ctx);
        events.extend(out.events);
        let grasp = mask.enabled(ActionChannel::Grasp);
        for err in self.world.step_world(&out.commands, Some(&act.muscles), grasp) {
            if let Error::StaleCommand(id) = err {
                events.push(Event::StaleCommand { entity: id });
            }
        }

        self.drives = tick(self.drives, &self.config.drives);
        if let Some((substance, amount)) = ingest_if_sucking(&mut self.world, act.muscles.suck) {
            self.drives = ingest(self.drives, substance, amount);
        }

        self.t += 1;
        let stage = self.schedule.stage_at(self.config.start_step + self.t);
        if stage.index != self.stage.index {
            log::info!("t={}: stage {} ({})", self.t, stage.index, stage.name);
            let m = self.schedule.mask(&stage);
            self.world.set_presence(m.bottles_present(), m.toy_count);
            events.push(Event::StageChanged { stage: stage.index });
            self.stage = stage;
        }

        self.last = self.sense(events);
        if let Some(rec) = self.recorder.as_mut() {
            rec.step(self.t, Some(&act), &self.last, self.world.hash())?;
        }
        Ok(self.last.clone())
    }

    fn sense(&mut self, events: Vec<Event>) -> ObservationFrame {
        let mask = self.schedule.mask(&self.stage);
        let body = &self.world.body;
        let retina = gate_retina(mask.vision, &render_retina(&self.world, body));
        let touch = sample_touch(&self.world, body);
        let proprio = Proprio {
            gaze: body.gaze,
            arm: [body.arm_extension, body.arm_angle],
            grasp: body.grasp,
        };

        let mut audio = AudioObs::default();
        let loudest = self
            .world
            .heard_by(ID_AGENT)
            .max_by(|a, b| a.intensity.total_cmp(&b.intensity))
            .map(|s| (s.intensity, s.bearing));
        let speech: Option<SdrFrame> = self
            .world
            .heard_by(ID_AGENT)
            .filter(|s| s.frame.is_some())
            .max_by(|a, b| a.intensity.total_cmp(&b.intensity))
            .and_then(|s| s.frame.clone());
        if let Some((intensity, bearing)) = loudest {
            audio.intensity = intensity;
            audio.bearing = wrap_angle(bearing - body.gaze);
        }
        if let Some(frame) = speech {
            audio.frame = gate_audio(mask, &frame, self.world.dimension, &mut self.world.rng);
        }

        ObservationFrame {
            t: self.t,
            stage: self.stage.index,
            retina,
            audio,
            touch,
            proprio,
            intero: self.drives,
            events,
        }
    }

    /// Flushes the episode log, if any.
    pub fn finish(&mut self) -> Result<()> {
        if let Some(rec) = self.recorder.as_mut() {
            rec.flush()?;
        }
        Ok(())
    }
}

/// Holds at most one session; the shape the wire server drives.
#[derive(Debug, Default)]
pub struct Environment {
    session: Option<Session>,
}

impl Environment {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn reset(&mut self, config: SessionConfig) -> Result<ObservationFrame> {
        if let Some(mut old) = self.session.take() {
            old.finish()?;
        }
        let s = Session::new(config)?;
        let obs = s.observation().clone();
        self.session = Some(s);
        Ok(obs)
    }

    pub fn step(&mut self, action: &ActionCommand) -> Result<ObservationFrame> {
        self.session.as_mut().ok_or(Error::NoSession)?.step(action)
    }

    pub fn step_json(&mut self, value: serde_json::Value) -> Result<ObservationFrame> {
        self.session.as_mut().ok_or(Error::NoSession)?.step_json(value)
    }

    pub fn session(&self) -> Option<&Session> {
        self.session.as_ref()
    }

    pub fn close(&mut self) -> Result<()> {
        match self.session.take() {
            Some(mut s) => s.finish(),
            None => Ok(()),
        }
    }
}
