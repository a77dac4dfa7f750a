//! Developmental stages and what each one lets through.

use std::collections::BTreeSet;

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::body::{Retina, RetinaCell, RETINA_SIZE};
use crate::instincts::Channel;
use crate::observation::{ActionCommand, Event, ObservationFrame, Vocal};
use crate::rng::SessionRng;
use crate::sdr::{apply_noise, SdrFrame};
use crate::world::EntityKind;

pub const STAGE_COUNT: usize = 5;
pub const STAGE_NAMES: [&str; STAGE_COUNT] = ["Fetus", "M0_3", "M3_6", "M6_9", "M9_12"];
pub const DEFAULT_DURATIONS: [u64; STAGE_COUNT] = [500, 5000, 5000, 5000, 5000];
pub const DEFAULT_INTRO_INTERVAL: u64 = 600;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Stage {
    pub index: u8,
    pub name: &'static str,
    pub start_step: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Vision {
    Off,
    Blur4x4,
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaregiverSkill {
    Idle,
    Feed,
    Narrate,
    PlayIntro,
    WordService,
}

/// Action channels as the curriculum sees them; the vocal channel is split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionChannel {
    HeadTurn,
    ArmTurn,
    ArmExtend,
    Grasp,
    Suck,
    Cry,
    Speech,
}

impl ActionChannel {
    pub fn as_str(self) -> &'static str {
        match self {
            ActionChannel::HeadTurn => "head_turn",
            ActionChannel::ArmTurn => "arm_turn",
            ActionChannel::ArmExtend => "arm_extend",
            ActionChannel::Grasp => "grasp",
            ActionChannel::Suck => "suck",
            ActionChannel::Cry => "cry",
            ActionChannel::Speech => "speech",
        }
    }

    pub fn muscle(self) -> Option<Channel> {
        match self {
            ActionChannel::HeadTurn => Some(Channel::HeadTurn),
            ActionChannel::ArmTurn => Some(Channel::ArmTurn),
            ActionChannel::ArmExtend => Some(Channel::ArmExtend),
            ActionChannel::Grasp => Some(Channel::Grasp),
            ActionChannel::Suck => Some(Channel::Suck),
            ActionChannel::Cry | ActionChannel::Speech => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GatingMask {
    pub vision: Vision,
    pub audio_extra_flips: usize,
    pub actions_enabled: BTreeSet<ActionChannel>,
    pub entity_kinds_present: BTreeSet<EntityKind>,
    /// Toys in the room; they appear in a fixed order.
    pub toy_count: usize,
    pub caregiver_repertoire: BTreeSet<CaregiverSkill>,
}

impl GatingMask {
    pub fn allows(&self, skill: CaregiverSkill) -> bool {
        self.caregiver_repertoire.contains(&skill)
    }

    pub fn enabled(&self, channel: ActionChannel) -> bool {
        self.actions_enabled.contains(&channel)
    }

    pub fn bottles_present(&self) -> bool {
        self.entity_kinds_present.contains(&EntityKind::BottleWater)
    }
}

/// The stage table. Each row adds to the one before it.
pub fn stage_masks() -> [GatingMask; STAGE_COUNT] {
    use ActionChannel::*;
    use CaregiverSkill::*;
    let base_actions: BTreeSet<_> = [HeadTurn, ArmTurn, ArmExtend, Suck, Cry].into();
    let base_kinds: BTreeSet<_> = [
        EntityKind::Agent,
        EntityKind::Caregiver,
        EntityKind::Crib,
        EntityKind::Wall,
    ]
    .into();
    let mut feed_kinds = base_kinds.clone();
    feed_kinds.extend([EntityKind::BottleWater, EntityKind::BottleMilk]);
    let mut toy_kinds = feed_kinds.clone();
    toy_kinds.insert(EntityKind::Toy);
    let mut grasp_actions = base_actions.clone();
    grasp_actions.insert(Grasp);
    let mut speech_actions = grasp_actions.clone();
    speech_actions.insert(Speech);

    let s0 = GatingMask {
        vision: Vision::Off,
        audio_extra_flips: 2,
        actions_enabled: base_actions.clone(),
        entity_kinds_present: base_kinds,
        toy_count: 0,
        caregiver_repertoire: [Idle].into(),
    };
    let s1 = GatingMask {
        vision: Vision::Blur4x4,
        audio_extra_flips: 1,
        actions_enabled: base_actions.clone(),
        entity_kinds_present: feed_kinds,
        toy_count: 0,
        caregiver_repertoire: [Idle, Feed, Narrate].into(),
    };
    let s2 = GatingMask {
        vision: Vision::Full,
        audio_extra_flips: 0,
        actions_enabled: base_actions,
        entity_kinds_present: toy_kinds.clone(),
        toy_count: 2,
        caregiver_repertoire: [Idle, Feed, Narrate, PlayIntro].into(),
    };
    let s3 = GatingMask {
        actions_enabled: grasp_actions,
        toy_count: 4,
        ..s2.clone()
    };
    let s4 = GatingMask {
        actions_enabled: speech_actions,
        caregiver_repertoire: [Idle, Feed, Narrate, PlayIntro, WordService].into(),
        ..s3.clone()
    };
    [s0, s1, s2, s3, s4]
}

/// Schedule overrides accepted from the session config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleConfig {
    /// Steps spent in each stage; the last stage extends indefinitely.
    pub durations: [u64; STAGE_COUNT],
    /// Steps between object introductions once PlayIntro is enabled; 0 disables them.
    pub intro_interval: u64,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        Self {
            durations: DEFAULT_DURATIONS,
            intro_interval: DEFAULT_INTRO_INTERVAL,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageSchedule {
    starts: [u64; STAGE_COUNT],
    masks: [GatingMask; STAGE_COUNT],
    pub intro_interval: u64,
}

impl Default for StageSchedule {
    fn default() -> Self {
        Self::new(&ScheduleConfig::default()).expect("default schedule is valid")
    }
}

impl StageSchedule {
    /// Fails with the offending field when start steps would not strictly increase.
    pub fn new(cfg: &ScheduleConfig) -> std::result::Result<Self, (String, String)> {
        let mut starts = [0u64; STAGE_COUNT];
        for i in 1..STAGE_COUNT {
            let d = cfg.durations[i - 1];
            if d == 0 {
                return Err((
                    format!("durations/{}", i - 1),
                    "stage durations must be positive (start steps strictly increasing)".into(),
                ));
            }
            starts[i] = starts[i - 1].checked_add(d).ok_or_else(|| {
                (
                    format!("durations/{}", i - 1),
                    "stage start overflows".to_string(),
                )
            })?;
        }
        Ok(Self {
            starts,
            masks: stage_masks(),
            intro_interval: cfg.intro_interval,
        })
    }

    pub fn stage_at(&self, step: u64) -> Stage {
        let index = self.starts.iter().rposition(|&s| s <= step).unwrap_or(0);
        self.stage(index)
    }

    pub fn stage(&self, index: usize) -> Stage {
        Stage {
            index: index as u8,
            name: STAGE_NAMES[index],
            start_step: self.starts[index],
        }
    }

    pub fn start_of(&self, index: usize) -> u64 {
        self.starts[index]
    }

    pub fn mask(&self, stage: &Stage) -> &GatingMask {
        &self.masks[stage.index as usize]
    }

    pub fn masks(&self) -> &[GatingMask; STAGE_COUNT] {
        &self.masks
    }
}

/// Pairwise sum; exact for any run of equal values of power-of-two length.
fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        n => pairwise_sum(&xs[..n / 2]) + pairwise_sum(&xs[n / 2..]),
    }
}

/// Each 4x4 block becomes its most common kind (lowest code on ties) at the
/// block's mean depth.
pub fn blur4x4(retina: &Retina) -> Retina {
    let mut out = retina.clone();
    for br in (0..RETINA_SIZE).step_by(4) {
        for bc in (0..RETINA_SIZE).step_by(4) {
            let mut counts = [0usize; 256];
            let mut depths = Vec::with_capacity(16);
            for r in br..br + 4 {
                for c in bc..bc + 4 {
                    let cell = retina.cell(r, c);
                    counts[cell.kind as usize] += 1;
                    depths.push(cell.depth);
                }
            }
            let mut kind = 0u8;
            for (k, &n) in counts.iter().enumerate() {
                if n > counts[kind as usize] {
                    kind = k as u8;
                }
            }
            let depth = pairwise_sum(&depths) / 16.0;
            for r in br..br + 4 {
                for c in bc..bc + 4 {
                    out.cells[r * RETINA_SIZE + c] = RetinaCell { kind, depth };
                }
            }
        }
    }
    out
}

pub fn gate_retina(vision: Vision, retina: &Retina) -> Retina {
    match vision {
        Vision::Off => Retina::zeros(),
        Vision::Blur4x4 => blur4x4(retina),
        Vision::Full => retina.clone(),
    }
}

/// Zeroes disabled channels. Returns the names of channels that carried a
/// non-zero command and were gated.
pub fn gate_action(mask: &GatingMask, action: &mut ActionCommand) -> Vec<String> {
    let mut gated = Vec::new();
    let m = &mut action.muscles;
    let slots: [(ActionChannel, &mut f64); 5] = [
        (ActionChannel::HeadTurn, &mut m.head_turn),
        (ActionChannel::ArmTurn, &mut m.arm_turn),
        (ActionChannel::ArmExtend, &mut m.arm_extend),
        (ActionChannel::Grasp, &mut m.grasp),
        (ActionChannel::Suck, &mut m.suck),
    ];
    for (ch, v) in slots {
        if !mask.enabled(ch) && *v != 0.0 {
            *v = 0.0;
            gated.push(ch.as_str().to_string());
        }
    }
    let vocal_channel = match action.vocal {
        Vocal::None => None,
        Vocal::Cry { .. } => Some(ActionChannel::Cry),
        Vocal::Speech { .. } => Some(ActionChannel::Speech),
    };
    if let Some(ch) = vocal_channel {
        if !mask.enabled(ch) {
            action.vocal = Vocal::None;
            gated.push(ch.as_str().to_string());
        }
    }
    gated
}

/// Gates the observation's retina and the action's disabled channels.
/// Applying it twice changes nothing further.
pub fn apply_gating(
    mask: &GatingMask,
    obs: &ObservationFrame,
    action: &ActionCommand,
) -> (ObservationFrame, ActionCommand, Vec<Event>) {
    let mut obs = obs.clone();
    obs.retina = gate_retina(mask.vision, &obs.retina);
    let mut action = action.clone();
    let gated = gate_action(mask, &mut action);
    let events = if gated.is_empty() {
        Vec::new()
    } else {
        vec![Event::ActionGated { channels: gated }]
    };
    (obs, action, events)
}

/// Extra hearing noise for immature stages; applied once per heard frame.
pub fn gate_audio(mask: &GatingMask, frame: &SdrFrame, dimension: usize, rng: &mut SessionRng) -> SdrFrame {
    if mask.audio_extra_flips == 0 || frame.is_silence() {
        return frame.clone();
    }
    apply_noise(frame, mask.audio_extra_flips, dimension, rng)
}
