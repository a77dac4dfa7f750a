//! Measurements borrowed from infant studies, run against any agent.
//!
//! Every trial runs in a fresh session with a fresh agent from the caller's
//! factory, so a probe never changes the agent it measures.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::agents::Agent;
use crate::caregiver::Mode;
use crate::curriculum::STAGE_COUNT;
use crate::drives::{DriveState, Substance};
use crate::error::{Error, Result};
use crate::observation::Event;
use crate::rng::SessionRng;
use crate::session::{Session, SessionConfig};
use crate::world::{fnv1a64, wrap_angle, EntityKind, Vec2, ID_CAREGIVER, ID_FIRST_TOY, ID_MILK, ID_WATER, TOY_NAMES};

/// Builds the agent for one trial from the trial's seed.
pub type AgentFactory<'a> = dyn FnMut(u64) -> Box<dyn Agent> + 'a;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeSettings {
    pub seed: u64,
    pub trials: usize,
    /// Steps scored after the word has been heard.
    pub window: u64,
    pub tolerance_deg: f64,
    pub offset_deg: f64,
    pub distance: f64,
    /// Step budget for the service probe.
    pub timeout: u64,
    pub thirst: f64,
    /// Base session; the probes move it to the last stage.
    pub session: SessionConfig,
}

impl Default for ProbeSettings {
    fn default() -> Self {
        Self {
            seed: 0,
            trials: 50,
            window: 100,
            tolerance_deg: 15.0,
            offset_deg: 30.0,
            distance: 2.0,
            timeout: 2000,
            thirst: 0.65,
            session: SessionConfig::default(),
        }
    }
}

impl ProbeSettings {
    pub fn fingerprint(&self) -> String {
        let text = serde_json::to_string(self).expect("settings serialize");
        format!("{:016x}", fnv1a64(text.as_bytes()))
    }

    /// Session config for the probes: last stage, no play introductions.
    /// Every trial shares the seed, hence the codebook the agent grew up
    /// with; trials differ in layout and in the agent's own seed.
    fn trial_config(&self) -> SessionConfig {
        let mut cfg = self.session.clone();
        cfg.seed = self.seed;
        cfg.record = None;
        cfg.schedule.intro_interval = 0;
        let durations = cfg.schedule.durations;
        cfg.start_step = durations[..STAGE_COUNT - 1].iter().sum();
        cfg
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialMetrics {
    pub seed: u64,
    pub metrics: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub probe: String,
    pub trials: Vec<TrialMetrics>,
    /// `None` when there were no trials.
    pub aggregate: Option<f64>,
    pub fingerprint: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub details: BTreeMap<String, serde_json::Value>,
}

impl ProbeReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Plain-text table for the terminal.
    pub fn table(&self) -> String {
        let mut out = format!("probe {}  fingerprint {}\n", self.probe, self.fingerprint);
        for (i, t) in self.trials.iter().enumerate() {
            let cols: Vec<String> = t.metrics.iter().map(|(k, v)| format!("{k}={v:.4}")).collect();
            out.push_str(&format!("  trial {i:>3} seed {:>6}  {}\n", t.seed, cols.join("  ")));
        }
        for (k, v) in &self.details {
            out.push_str(&format!("  {k}: {v}\n"));
        }
        match self.aggregate {
            Some(a) => out.push_str(&format!("aggregate {a:.4}\n")),
            None => out.push_str("aggregate -\n"),
        }
        out
    }
}

/// Entity id for a probe object name.
pub fn object_id(name: &str) -> Result<u32> {
    match name {
        "WATER" => Ok(ID_WATER),
        "MILK" => Ok(ID_MILK),
        _ => TOY_NAMES
            .iter()
            .position(|t| *t == name)
            .map(|i| ID_FIRST_TOY + i as u32)
            .ok_or_else(|| Error::ProbeConfig(format!("unknown object {name:?}"))),
    }
}

fn is_probe_object(kind: EntityKind) -> bool {
    matches!(kind, EntityKind::Toy | EntityKind::BottleWater | EntityKind::BottleMilk)
}

/// Lays out one looking trial. Returns the target's side (+1 left, -1 right).
fn stage_scene(session: &mut Session, target: u32, distractor: u32, settings: &ProbeSettings, rng: &mut SessionRng) -> f64 {
    let side = if rng.below(2) == 0 { 1.0 } else { -1.0 };
    let offset = settings.offset_deg.to_radians();
    let world = session.world_mut();
    let origin = world.body.position;
    let gaze = world.body.gaze;
    for e in world.entities.iter_mut().filter(|e| is_probe_object(e.kind)) {
        e.held_by = None;
        e.present = e.id == target || e.id == distractor;
    }
    let place = |angle: f64| origin.add(Vec2::from_angle(gaze + angle).scale(settings.distance));
    world.entity_mut(target).expect("target exists").pos = place(side * offset);
    world.entity_mut(distractor).expect("distractor exists").pos = place(-side * offset);
    let c = world.entity_mut(ID_CAREGIVER).expect("caregiver exists");
    c.pos = origin.add(Vec2::from_angle(gaze));
    c.facing = gaze + std::f64::consts::PI;
    side
}

fn looking_at(session: &Session, id: u32, tolerance: f64) -> bool {
    let w = session.world();
    let Some(e) = w.entity(id) else { return false };
    let bearing = w.body.position.bearing_to(e.pos);
    wrap_angle(bearing - w.body.gaze).abs() <= tolerance
}

/// Names the target and distractor, utters `word` from straight ahead, and
/// scores target looking against distractor looking afterwards. A trial
/// where neither is looked at scores 0.5.
pub fn preferential_looking(
    make_agent: &mut AgentFactory,
    word: &str,
    target: &str,
    distractor: &str,
    settings: &ProbeSettings,
) -> Result<ProbeReport> {
    let target_id = object_id(target)?;
    let distractor_id = object_id(distractor)?;
    if target_id == distractor_id {
        return Err(Error::ProbeConfig(format!("target and distractor are both {target}")));
    }
    if word.is_empty() {
        return Err(Error::ProbeConfig("empty word".into()));
    }
    let tolerance = settings.tolerance_deg.to_radians();
    let mut trial_rng = SessionRng::seed_from_u64(settings.seed);
    let mut trials = Vec::with_capacity(settings.trials);
    for i in 0..settings.trials {
        let cfg = settings.trial_config();
        let seed = settings.seed.wrapping_add(i as u64);
        let mut session = Session::new(cfg)?;
        session.set_drives(DriveState::default());
        let side = stage_scene(&mut session, target_id, distractor_id, settings, &mut trial_rng);
        let frames = session
            .config()
            .codec
            .encode(session.codebook(), word)
            .map_err(|e| Error::ProbeConfig(format!("cannot encode {word:?}: {e}")))?
            .frames;
        let lead = frames.len() as u64 + 1;
        {
            let cg = session.caregiver_mut();
            cg.mode = Mode::Idle;
            cg.narration = frames.into();
        }
        let mut agent = make_agent(seed);
        agent.reset();
        let mut obs = session.refresh_observation().clone();
        let (mut on_target, mut on_distractor) = (0u64, 0u64);
        for step in 0..lead + settings.window {
            let action = agent.act(&obs);
            obs = session.step(&action)?;
            if step >= lead {
                on_target += looking_at(&session, target_id, tolerance) as u64;
                on_distractor += looking_at(&session, distractor_id, tolerance) as u64;
            }
        }
        let score = if on_target + on_distractor == 0 {
            0.5
        } else {
            on_target as f64 / (on_target + on_distractor) as f64
        };
        let metrics = BTreeMap::from([
            ("score".to_string(), score),
            ("target_steps".to_string(), on_target as f64),
            ("distractor_steps".to_string(), on_distractor as f64),
            ("target_left".to_string(), if side > 0.0 { 1.0 } else { 0.0 }),
        ]);
        trials.push(TrialMetrics { seed, metrics });
    }
    let aggregate = mean(trials.iter().map(|t| t.metrics["score"]));
    let details = BTreeMap::from([
        ("word".to_string(), word.into()),
        ("target".to_string(), target.into()),
        ("distractor".to_string(), distractor.into()),
    ]);
    Ok(ProbeReport {
        probe: "preferential_looking".into(),
        trials,
        aggregate,
        fingerprint: settings.fingerprint(),
        details,
    })
}

fn mean(xs: impl Iterator<Item = f64>) -> Option<f64> {
    let mut v: Vec<f64> = xs.collect();
    if v.is_empty() {
        return None;
    }
    // Sorted so the sum does not depend on trial order.
    v.sort_by(f64::total_cmp);
    Some(v.iter().sum::<f64>() / v.len() as f64)
}

/// Outcome of one service episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServiceOutcome {
    /// Step of the first matching delivery; `None` on timeout.
    pub latency: Option<u64>,
    pub cried: bool,
    /// Words the caregiver serviced during the episode.
    pub serviced: Vec<String>,
}

/// Starts thirsty in the last stage and counts steps until the caregiver
/// delivers what `word` names. `primed` pretends that substance was the
/// last one delivered, which steers the cry path to the other one.
pub fn service_word_latency(
    agent: &mut dyn Agent,
    word: &str,
    primed: Option<Substance>,
    seed: u64,
    settings: &ProbeSettings,
) -> Result<ServiceOutcome> {
    let substance = Substance::from_word(word)
        .ok_or_else(|| Error::ProbeConfig(format!("{word:?} names nothing the caregiver serves")))?;
    let mut cfg = settings.trial_config();
    cfg.seed = seed;
    cfg.initial_drives = DriveState {
        thirst: settings.thirst,
        hunger: 0.0,
    };
    let mut session = Session::new(cfg)?;
    session.caregiver_mut().last_delivery = primed;
    agent.reset();
    let mut obs = session.observation().clone();
    let mut out = ServiceOutcome {
        latency: None,
        cried: false,
        serviced: Vec::new(),
    };
    while session.t() < settings.timeout {
        let action = agent.act(&obs);
        out.cried |= action.is_cry();
        obs = session.step(&action)?;
        for e in &obs.events {
            match e {
                Event::WordService { word, .. } => out.serviced.push(word.clone()),
                Event::Delivery { substance: s } if *s == substance => {
                    out.latency = Some(obs.t);
                }
                _ => {}
            }
        }
        if out.latency.is_some() {
            break;
        }
    }
    Ok(out)
}

/// First words and comprehension of taught words. An empty word list
/// gives an empty, valid report.
pub fn milestone_report(
    make_agent: &mut AgentFactory,
    taught: &[&str],
    settings: &ProbeSettings,
) -> Result<ProbeReport> {
    let mut details = BTreeMap::new();
    let mut trials = Vec::new();
    let mut produced: Vec<String> = Vec::new();
    for (i, word) in taught.iter().enumerate() {
        if Substance::from_word(word).is_some() {
            let mut agent = make_agent(settings.seed.wrapping_add(i as u64));
            let outcome = service_word_latency(agent.as_mut(), word, None, settings.seed, settings)?;
            for w in outcome.serviced {
                if !produced.contains(&w) {
                    produced.push(w);
                }
            }
        }
        let distractor = if *word == "BALL" { "DUCK" } else { "BALL" };
        let report = preferential_looking(make_agent, word, word, distractor, settings)?;
        let score = report.aggregate.unwrap_or(0.5);
        trials.push(TrialMetrics {
            seed: settings.seed,
            metrics: BTreeMap::from([(format!("looking_{word}"), score)]),
        });
    }
    produced.sort();
    details.insert("first_word_produced".into(), (!produced.is_empty()).into());
    details.insert("produced_words".into(), produced.into());
    let aggregate = mean(trials.iter().flat_map(|t| t.metrics.values().copied()));
    Ok(ProbeReport {
        probe: "milestones".into(),
        trials,
        aggregate,
        fingerprint: settings.fingerprint(),
        details,
    })
}
