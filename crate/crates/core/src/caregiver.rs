//! The scripted caregiver. It answers cries with a bottle, names what it
//! brings, shows toys on a schedule and, late on, answers spoken requests.

use std::collections::VecDeque;

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::curriculum::{CaregiverSkill, GatingMask};
use crate::drives::Substance;
use crate::observation::Event;
use crate::sdr::{CodecParams, SdrCodebook, SdrFrame, SdrStream};
use crate::world::{
    Attachment, EntityKind, Holder, ReceivedSound, SoundEvent, SoundKind, Vec2, WorldCommand,
    WorldState, CARRY_OFFSET, ID_AGENT, ID_CAREGIVER, IDLE_POST,
};

/// How close the caregiver must be to pick something up or put it down.
pub const REACH: f64 = 0.45;
/// Speech buffers longer than this are decoded even without a pause.
const MAX_BUFFER: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct CaregiverParams {
    pub walk_speed: f64,
    pub cry_intensity_threshold: f64,
    pub narration_repeats: usize,
    pub feeding_timeout: u64,
    /// Feeding ends after this many steps without a cry.
    pub cry_absence_steps: u64,
    pub word_overlap_threshold: f64,
    pub deliver_distance: f64,
    pub intro_dwell: u64,
    /// Distance from the infant at which toys are shown.
    pub intro_distance: f64,
}

impl Default for CaregiverParams {
    fn default() -> Self {
        Self {
            walk_speed: 0.1,
            cry_intensity_threshold: 0.2,
            narration_repeats: 2,
            feeding_timeout: 300,
            cry_absence_steps: 100,
            word_overlap_threshold: 6.0,
            deliver_distance: 0.5,
            intro_dwell: 200,
            intro_distance: 1.0,
        }
    }
}

impl CaregiverParams {
    pub fn validate(&self) -> std::result::Result<(), (&'static str, String)> {
        let positive = [
            ("walk_speed", self.walk_speed),
            ("cry_intensity_threshold", self.cry_intensity_threshold),
            ("word_overlap_threshold", self.word_overlap_threshold),
            ("deliver_distance", self.deliver_distance),
            ("intro_distance", self.intro_distance),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err((name, "must be positive".into()));
            }
        }
        if self.narration_repeats == 0 {
            return Err(("narration_repeats", "must be positive".into()));
        }
        if self.feeding_timeout == 0 {
            return Err(("feeding_timeout", "must be positive".into()));
        }
        if self.cry_absence_steps == 0 {
            return Err(("cry_absence_steps", "must be positive".into()));
        }
        if self.intro_dwell == 0 {
            return Err(("intro_dwell", "must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "phase", rename_all = "snake_case")]
pub enum IntroPhase {
    Fetch,
    Carry { spot: Vec2 },
    Present { until: u64 },
    Restore,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Mode {
    Idle,
    Approach { substance: Substance },
    Deliver { substance: Substance },
    Feeding { substance: Substance, since: u64, last_cry: u64 },
    Return,
    PlayIntro { object: u32, phase: IntroPhase },
}

impl Mode {
    pub fn name(&self) -> &'static str {
        match self {
            Mode::Idle => "idle",
            Mode::Approach { .. } => "approach",
            Mode::Deliver { .. } => "deliver",
            Mode::Feeding { .. } => "feeding",
            Mode::Return => "return",
            Mode::PlayIntro { .. } => "play_intro",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaregiverState {
    pub mode: Mode,
    pub last_delivery: Option<Substance>,
    pub speech_buffer: Vec<SdrFrame>,
    /// Frames still to be spoken, one per step.
    pub narration: VecDeque<SdrFrame>,
    pub next_intro_at: u64,
    pub intros: u64,
}

impl CaregiverState {
    pub fn new(intro_interval: u64) -> Self {
        Self {
            mode: Mode::Idle,
            last_delivery: None,
            speech_buffer: Vec::new(),
            narration: VecDeque::new(),
            next_intro_at: intro_interval,
            intros: 0,
        }
    }

    pub fn narrating(&self) -> bool {
        !self.narration.is_empty()
    }
}

/// What the caregiver picked up from one step of listening.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Stimulus {
    pub crying: bool,
    pub request: Option<Substance>,
    pub intro_object: Option<u32>,
}

/// Water unless water was the last thing brought.
pub fn choose_substance(last: Option<Substance>) -> Substance {
    if last != Some(Substance::Water) {
        Substance::Water
    } else {
        Substance::Milk
    }
}

/// Transitions driven by what was heard. Progress transitions (arriving,
/// finishing a feed) happen while acting.
pub fn react(mode: &Mode, s: &Stimulus, last: Option<Substance>, can_feed: bool) -> Mode {
    let interruptible = matches!(
        mode,
        Mode::Idle | Mode::Return | Mode::PlayIntro { .. } | Mode::Approach { .. }
    );
    if let (true, Some(substance)) = (interruptible, s.request) {
        return Mode::Approach { substance };
    }
    let idle_like = matches!(mode, Mode::Idle | Mode::Return | Mode::PlayIntro { .. });
    if idle_like && s.crying && can_feed {
        return Mode::Approach {
            substance: choose_substance(last),
        };
    }
    if let (Mode::Idle, Some(object)) = (mode, s.intro_object) {
        return Mode::PlayIntro {
            object,
            phase: IntroPhase::Fetch,
        };
    }
    *mode
}

pub struct CaregiverContext<'a> {
    pub params: &'a CaregiverParams,
    pub mask: &'a GatingMask,
    pub codebook: &'a SdrCodebook,
    pub codec: &'a CodecParams,
    pub intro_interval: u64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CaregiverOutput {
    pub commands: Vec<WorldCommand>,
    pub events: Vec<Event>,
}

/// Buffers the infant's speech; at a pause, decodes it and returns a
/// request when a drink word was said clearly enough.
pub fn hear_agent_speech(
    state: &mut CaregiverState,
    heard: &[ReceivedSound],
    ctx: &CaregiverContext,
    events: &mut Vec<Event>,
) -> Option<Substance> {
    let frame = heard
        .iter()
        .filter(|s| s.source_id == ID_AGENT && !s.is_cry)
        .filter_map(|s| s.frame.as_ref())
        .find(|f| !f.is_silence());
    if let Some(f) = frame {
        state.speech_buffer.push(f.clone());
        if state.speech_buffer.len() < MAX_BUFFER {
            return None;
        }
    }
    if state.speech_buffer.is_empty() {
        return None;
    }
    let stream = SdrStream::from_frames(
        std::mem::take(&mut state.speech_buffer),
        ctx.codec.frames_per_symbol,
    );
    let decoded = ctx.codebook.decode_stream(&stream, ctx.codec.min_overlap);
    let mut request = None;
    for (word, overlap) in decoded.word_overlaps() {
        events.push(Event::WordHeard {
            word: word.clone(),
            overlap,
        });
        if let Some(s) = Substance::from_word(&word) {
            if overlap >= ctx.params.word_overlap_threshold && request.is_none() {
                events.push(Event::WordService { word, overlap });
                request = Some(s);
            }
        }
    }
    request
}

fn walk(target: Vec2, speed: f64) -> WorldCommand {
    WorldCommand::MoveToward {
        id: ID_CAREGIVER,
        target,
        max_distance: speed,
    }
}

fn carry(item: u32) -> WorldCommand {
    WorldCommand::Attach {
        item,
        holder: Holder {
            id: ID_CAREGIVER,
            at: Attachment::Carry,
        },
    }
}

fn start_narration(
    state: &mut CaregiverState,
    word: &str,
    ctx: &CaregiverContext,
    events: &mut Vec<Event>,
) {
    if !ctx.mask.allows(CaregiverSkill::Narrate) {
        return;
    }
    let text = vec![word; ctx.params.narration_repeats].join(" ");
    match ctx.codec.encode(ctx.codebook, &text) {
        Ok(stream) => {
            state.narration = stream.frames.into();
            events.push(Event::NarrationStarted {
                word: word.to_string(),
            });
        }
        Err(e) => log::warn!("cannot narrate {word:?}: {e}"),
    }
}

/// One caregiver step: listen, react, act, speak.
pub fn caregiver_step(
    world: &WorldState,
    state: &mut CaregiverState,
    heard: &[ReceivedSound],
    ctx: &CaregiverContext,
) -> CaregiverOutput {
    let mut out = CaregiverOutput::default();
    let Some(me) = world.entity(ID_CAREGIVER) else {
        return out;
    };
    let now = world.step;
    let p = ctx.params;

    let crying = heard
        .iter()
        .filter(|s| s.is_cry && s.source_id == ID_AGENT)
        .any(|s| s.intensity >= p.cry_intensity_threshold);
    let request = if ctx.mask.allows(CaregiverSkill::WordService) {
        hear_agent_speech(state, heard, ctx, &mut out.events)
    } else {
        state.speech_buffer.clear();
        None
    };
    let intro_object = (ctx.mask.allows(CaregiverSkill::PlayIntro)
        && ctx.intro_interval > 0
        && now >= state.next_intro_at)
        .then(|| pick_toy(world, state, ctx.mask))
        .flatten();
    let stim = Stimulus {
        crying,
        request,
        intro_object,
    };
    let before = state.mode;
    let after = react(
        &before,
        &stim,
        state.last_delivery,
        ctx.mask.allows(CaregiverSkill::Feed),
    );
    if after != before {
        set_mode(state, after, &mut out.events);
        if let Mode::PlayIntro { object, .. } = after {
            state.next_intro_at = now + ctx.intro_interval;
            state.intros += 1;
            let name = world.entity(object).map(|e| e.name.clone()).unwrap_or_default();
            out.events.push(Event::IntroStarted { object: name });
        }
    }
    if let Mode::Feeding { last_cry, .. } = &mut state.mode {
        if crying {
            *last_cry = now;
        }
    }

    act(world, me.pos, state, ctx, &mut out);

    if let Some(frame) = state.narration.pop_front() {
        if !frame.is_silence() {
            out.commands.push(WorldCommand::Emit(SoundEvent {
                source_id: ID_CAREGIVER,
                source: me.pos,
                kind: SoundKind::Speech { frame },
                emitted_step: now,
            }));
        }
    }
    out
}

fn set_mode(state: &mut CaregiverState, to: Mode, events: &mut Vec<Event>) {
    if state.mode.name() != to.name() {
        events.push(Event::CaregiverMode {
            from: state.mode.name().into(),
            to: to.name().into(),
        });
    }
    state.mode = to;
}

/// Next toy to show, in rotation over the toys present.
fn pick_toy(world: &WorldState, state: &CaregiverState, mask: &GatingMask) -> Option<u32> {
    let toys: Vec<u32> = world
        .toys()
        .filter(|t| t.present)
        .map(|t| t.id)
        .take(mask.toy_count)
        .collect();
    if toys.is_empty() {
        return None;
    }
    Some(toys[(state.intros % toys.len() as u64) as usize])
}

fn act(
    world: &WorldState,
    pos: Vec2,
    state: &mut CaregiverState,
    ctx: &CaregiverContext,
    out: &mut CaregiverOutput,
) {
    let p = ctx.params;
    let now = world.step;
    let agent = world.agent_pos();
    let carried: Vec<(u32, EntityKind, Vec2, f64)> = world
        .held_by(ID_CAREGIVER)
        .map(|e| (e.id, e.kind, e.home, e.contents))
        .collect();

    match state.mode {
        Mode::Idle => {}
        Mode::Approach { substance } => {
            let bottle = world.bottle_for(substance);
            if let Some(&(id, kind, home, _)) = carried.iter().find(|c| c.0 != bottle) {
                // Put down whatever else is in hand first.
                if kind == EntityKind::Toy {
                    out.commands.push(WorldCommand::Release { item: id, at: pos });
                } else if pos.distance(home) <= REACH {
                    out.commands.push(WorldCommand::Release { item: id, at: home });
                    out.commands.push(WorldCommand::Refill { item: id });
                } else {
                    out.commands.push(walk(home, p.walk_speed));
                }
                return;
            }
            let Some(b) = world.entity(bottle) else {
                set_mode(state, Mode::Return, &mut out.events);
                return;
            };
            let holding = carried.iter().any(|c| c.0 == bottle);
            if !holding {
                if b.held_by.is_some_and(|h| h.id == ID_AGENT) || pos.distance(b.pos) <= REACH {
                    out.commands.push(carry(bottle));
                } else {
                    out.commands.push(walk(b.pos, p.walk_speed));
                }
                return;
            }
            if b.contents <= 1e-9 {
                if pos.distance(b.home) <= REACH {
                    out.commands.push(WorldCommand::Refill { item: bottle });
                } else {
                    out.commands.push(walk(b.home, p.walk_speed));
                }
                return;
            }
            let d = pos.distance(agent);
            if d <= p.deliver_distance {
                set_mode(state, Mode::Deliver { substance }, &mut out.events);
            } else {
                let step = p.walk_speed.min(d - 0.8 * p.deliver_distance);
                out.commands.push(walk(agent, step));
            }
        }
        Mode::Deliver { substance } => {
            let bottle = world.bottle_for(substance);
            if !carried.iter().any(|c| c.0 == bottle) {
                set_mode(state, Mode::Approach { substance }, &mut out.events);
                return;
            }
            out.commands.push(WorldCommand::Attach {
                item: bottle,
                holder: Holder {
                    id: ID_AGENT,
                    at: Attachment::Mouth,
                },
            });
            out.commands.push(WorldCommand::SetContact(true));
            out.events.push(Event::Delivery { substance });
            state.last_delivery = Some(substance);
            start_narration(state, substance.word(), ctx, &mut out.events);
            set_mode(
                state,
                Mode::Feeding {
                    substance,
                    since: now,
                    last_cry: now,
                },
                &mut out.events,
            );
        }
        Mode::Feeding {
            substance,
            since,
            last_cry,
        } => {
            let bottle = world.bottle_for(substance);
            let b = world.entity(bottle);
            let at_mouth = b.is_some_and(|b| {
                b.held_by
                    .is_some_and(|h| h.id == ID_AGENT && h.at == Attachment::Mouth)
            });
            let empty = b.map_or(true, |b| b.contents <= 1e-9);
            let timeout = now - since >= p.feeding_timeout;
            let quiet = now - last_cry >= p.cry_absence_steps;
            if empty || timeout || quiet || !at_mouth {
                if at_mouth {
                    out.commands.push(carry(bottle));
                }
                out.commands.push(WorldCommand::SetContact(false));
                out.events.push(Event::FeedingEnded { timeout });
                set_mode(state, Mode::Return, &mut out.events);
            }
        }
        Mode::Return => {
            if let Some(&(id, kind, home, _)) = carried.first() {
                if pos.distance(home) <= REACH {
                    out.commands.push(WorldCommand::Release { item: id, at: home });
                    if kind.substance().is_some() {
                        out.commands.push(WorldCommand::Refill { item: id });
                    }
                } else {
                    out.commands.push(walk(home, p.walk_speed));
                }
            } else if pos.distance(IDLE_POST) > 0.0 {
                out.commands.push(walk(IDLE_POST, p.walk_speed));
            } else {
                set_mode(state, Mode::Idle, &mut out.events);
            }
        }
        Mode::PlayIntro { object, phase } => {
            let Some(toy) = world.entity(object) else {
                set_mode(state, Mode::Return, &mut out.events);
                return;
            };
            let holding = carried.iter().any(|c| c.0 == object);
            let next = match phase {
                IntroPhase::Fetch => {
                    if toy.held_by.is_some_and(|h| h.id == ID_AGENT) {
                        set_mode(state, Mode::Return, &mut out.events);
                        return;
                    }
                    if holding || pos.distance(toy.pos) <= REACH {
                        if !holding {
                            out.commands.push(carry(object));
                        }
                        let gaze = world.body.gaze;
                        let spot = agent.add(
                            Vec2::from_angle(gaze).scale(p.intro_distance + CARRY_OFFSET),
                        );
                        IntroPhase::Carry {
                            spot: spot.clamp_to_room(),
                        }
                    } else {
                        out.commands.push(walk(toy.pos, p.walk_speed));
                        IntroPhase::Fetch
                    }
                }
                IntroPhase::Carry { spot } => {
                    if pos.distance(spot) > 0.0 {
                        out.commands.push(walk(spot, p.walk_speed));
                        IntroPhase::Carry { spot }
                    } else {
                        out.commands.push(WorldCommand::Face {
                            id: ID_CAREGIVER,
                            angle: pos.bearing_to(agent),
                        });
                        let name = toy.name.clone();
                        start_narration(state, &name, ctx, &mut out.events);
                        IntroPhase::Present {
                            until: now + p.intro_dwell,
                        }
                    }
                }
                IntroPhase::Present { until } => {
                    if now >= until {
                        IntroPhase::Restore
                    } else {
                        IntroPhase::Present { until }
                    }
                }
                IntroPhase::Restore => {
                    if !holding {
                        set_mode(state, Mode::Return, &mut out.events);
                        return;
                    }
                    if pos.distance(toy.home) <= REACH {
                        out.commands.push(WorldCommand::Release {
                            item: object,
                            at: toy.home,
                        });
                        set_mode(state, Mode::Return, &mut out.events);
                        return;
                    }
                    out.commands.push(walk(toy.home, p.walk_speed));
                    IntroPhase::Restore
                }
            };
            state.mode = Mode::PlayIntro {
                object,
                phase: next,
            };
        }
    }
}
