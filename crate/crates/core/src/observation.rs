//! Observation and action schema shared by in-process agents, the episode
//! log and the wire protocol. Observations carry sensor readings and events
//! only; there is deliberately no reward-like field anywhere in them.

use serde::{Deserialize, Serialize};

use crate::body::{MuscleCommand, Retina, TouchGrid};
use crate::drives::{DriveState, Substance};
use crate::sdr::SdrFrame;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Vocal {
    #[default]
    None,
    Cry {
        loudness: f64,
    },
    Speech {
        frame: SdrFrame,
    },
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ActionCommand {
    pub muscles: MuscleCommand,
    pub vocal: Vocal,
}

impl ActionCommand {
    pub fn null() -> Self {
        Self::default()
    }

    pub fn cry(loudness: f64) -> Self {
        Self {
            vocal: Vocal::Cry { loudness },
            ..Self::default()
        }
    }

    pub fn speech(frame: SdrFrame) -> Self {
        Self {
            vocal: Vocal::Speech { frame },
            ..Self::default()
        }
    }

    pub fn is_cry(&self) -> bool {
        matches!(self.vocal, Vocal::Cry { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AudioObs {
    /// Loudest speech frame heard this step; empty when silent.
    pub frame: SdrFrame,
    pub intensity: f64,
    /// Bearing of the loudest sound relative to the gaze, left positive.
    pub bearing: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Proprio {
    pub gaze: f64,
    /// (extension, angle)
    pub arm: [f64; 2],
    pub grasp: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Event {
    StageChanged { stage: u8 },
    CaregiverMode { from: String, to: String },
    Delivery { substance: Substance },
    NarrationStarted { word: String },
    WordService { word: String, overlap: f64 },
    WordHeard { word: String, overlap: f64 },
    IntroStarted { object: String },
    FeedingEnded { timeout: bool },
    ActionGated { channels: Vec<String> },
    ActionClamped,
    SpeechDropped,
    StaleCommand { entity: u32 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationFrame {
    pub t: u64,
    pub stage: u8,
    pub retina: Retina,
    pub audio: AudioObs,
    pub touch: TouchGrid,
    pub proprio: Proprio,
    pub intero: DriveState,
    pub events: Vec<Event>,
}

impl ObservationFrame {
    /// All-quiet frame: no vision, no sound, no touch, drives at zero.
    pub fn blank(t: u64) -> Self {
        Self {
            t,
            stage: 0,
            retina: Retina::zeros(),
            audio: AudioObs::default(),
            touch: TouchGrid::zeros(),
            proprio: Proprio {
                gaze: 0.0,
                arm: [0.0, 0.0],
                grasp: 0.0,
            },
            intero: DriveState::default(),
            events: Vec::new(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("observation serializes")
    }

    pub fn heard_speech(&self) -> bool {
        !self.audio.frame.is_silence()
    }

    pub fn deliveries(&self) -> impl Iterator<Item = Substance> + '_ {
        self.events.iter().filter_map(|e| match e {
            Event::Delivery { substance } => Some(*substance),
            _ => None,
        })
    }
}

/// Every object key in a JSON value, recursively.
pub fn json_keys(value: &serde_json::Value) -> Vec<String> {
    let mut keys = Vec::new();
    fn walk(v: &serde_json::Value, out: &mut Vec<String>) {
        match v {
            serde_json::Value::Object(map) => {
                for (k, v) in map {
                    out.push(k.clone());
                    walk(v, out);
                }
            }
            serde_json::Value::Array(items) => items.iter().for_each(|i| walk(i, out)),
            _ => {}
        }
    }
    walk(value, &mut keys);
    keys
}

/// Names that would smuggle an environment-side reward into observations.
pub const FORBIDDEN_KEYS: [&str; 3] = ["reward", "return", "score"];

/// Keys (and event tags) containing a forbidden name.
pub fn reward_like_keys(value: &serde_json::Value) -> Vec<String> {
    let mut names = json_keys(value);
    fn tags(v: &serde_json::Value, out: &mut Vec<String>) {
        match v {
            serde_json::Value::Object(map) => {
                if let Some(serde_json::Value::String(t)) = map.get("type") {
                    out.push(t.clone());
                }
                map.values().for_each(|v| tags(v, out));
            }
            serde_json::Value::Array(items) => items.iter().for_each(|i| tags(i, out)),
            _ => {}
        }
    }
    tags(value, &mut names);
    names
        .into_iter()
        .filter(|k| {
            let k = k.to_ascii_lowercase();
            FORBIDDEN_KEYS.iter().any(|f| k.contains(f))
        })
        .collect()
}
