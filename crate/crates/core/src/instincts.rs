//! Fixed reflexes that sit underneath any policy and overwrite the channels
//! they claim.

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::agents::Agent;
use crate::body::HEAD_STEP;
use crate::observation::{ActionCommand, ObservationFrame, Vocal};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    HeadTurn,
    ArmTurn,
    ArmExtend,
    Grasp,
    Suck,
    Vocal,
}

/// An action with only some channels set.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PartialAction {
    pub head_turn: Option<f64>,
    pub arm_turn: Option<f64>,
    pub arm_extend: Option<f64>,
    pub grasp: Option<f64>,
    pub suck: Option<f64>,
    pub vocal: Option<Vocal>,
}

impl PartialAction {
    pub fn is_empty(&self) -> bool {
        self.claimed().is_empty()
    }

    pub fn claimed(&self) -> Vec<Channel> {
        let mut out = Vec::new();
        if self.head_turn.is_some() {
            out.push(Channel::HeadTurn);
        }
        if self.arm_turn.is_some() {
            out.push(Channel::ArmTurn);
        }
        if self.arm_extend.is_some() {
            out.push(Channel::ArmExtend);
        }
        if self.grasp.is_some() {
            out.push(Channel::Grasp);
        }
        if self.suck.is_some() {
            out.push(Channel::Suck);
        }
        if self.vocal.is_some() {
            out.push(Channel::Vocal);
        }
        out
    }

    /// Fills channels that are still unset from `other`.
    fn fill_from(&mut self, other: PartialAction) {
        self.head_turn = self.head_turn.or(other.head_turn);
        self.arm_turn = self.arm_turn.or(other.arm_turn);
        self.arm_extend = self.arm_extend.or(other.arm_extend);
        self.grasp = self.grasp.or(other.grasp);
        self.suck = self.suck.or(other.suck);
        if self.vocal.is_none() {
            self.vocal = other.vocal;
        }
    }

    /// Overwrites the claimed channels of `action`. Returns true when a
    /// speech frame was replaced.
    pub fn overwrite(&self, action: &mut ActionCommand) -> bool {
        let m = &mut action.muscles;
        if let Some(v) = self.head_turn {
            m.head_turn = v;
        }
        if let Some(v) = self.arm_turn {
            m.arm_turn = v;
        }
        if let Some(v) = self.arm_extend {
            m.arm_extend = v;
        }
        if let Some(v) = self.grasp {
            m.grasp = v;
        }
        if let Some(v) = self.suck {
            m.suck = v;
        }
        let mut dropped = false;
        if let Some(v) = &self.vocal {
            dropped = matches!(action.vocal, Vocal::Speech { .. }) && !matches!(v, Vocal::Speech { .. });
            action.vocal = v.clone();
        }
        dropped
    }

    pub fn into_action(self) -> ActionCommand {
        let mut a = ActionCommand::null();
        self.overwrite(&mut a);
        a
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReflexId {
    Suck,
    Cry,
    Orient,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReflexRule {
    pub id: ReflexId,
    pub priority: i32,
    pub channels: &'static [Channel],
}

impl ReflexRule {
    fn fire(&self, params: &ReflexParams, obs: &ObservationFrame) -> Option<PartialAction> {
        match self.id {
            ReflexId::Suck => (obs.touch.mouth > 0.0).then(|| PartialAction {
                suck: Some(1.0),
                vocal: Some(Vocal::None),
                ..Default::default()
            }),
            ReflexId::Cry => (obs.intero.thirst > params.cry_threshold).then(|| PartialAction {
                vocal: Some(Vocal::Cry {
                    loudness: obs.intero.thirst.min(1.0),
                }),
                ..Default::default()
            }),
            ReflexId::Orient => (obs.audio.intensity > params.orient_min_intensity).then(|| {
                PartialAction {
                    head_turn: Some((obs.audio.bearing / HEAD_STEP).clamp(-1.0, 1.0)),
                    ..Default::default()
                }
            }),
        }
    }
}

/// Which reflexes are on and their thresholds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct ReflexParams {
    pub suck: bool,
    pub cry: bool,
    pub orient: bool,
    pub cry_threshold: f64,
    /// Sounds at or below this intensity don't trigger orienting.
    pub orient_min_intensity: f64,
}

impl Default for ReflexParams {
    fn default() -> Self {
        Self {
            suck: true,
            cry: true,
            orient: true,
            cry_threshold: 0.6,
            orient_min_intensity: 0.0,
        }
    }
}

impl ReflexParams {
    pub fn none() -> Self {
        Self {
            suck: false,
            cry: false,
            orient: false,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> std::result::Result<(), (&'static str, String)> {
        if !(self.cry_threshold > 0.0 && self.cry_threshold < 1.0) {
            return Err(("cry_threshold", "must lie in (0, 1)".into()));
        }
        if !(self.orient_min_intensity >= 0.0 && self.orient_min_intensity <= 1.0) {
            return Err(("orient_min_intensity", "must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReflexSet {
    pub rules: Vec<ReflexRule>,
    pub params: ReflexParams,
}

impl Default for ReflexSet {
    fn default() -> Self {
        Self::new(ReflexParams::default())
    }
}

impl ReflexSet {
    pub fn new(params: ReflexParams) -> Self {
        let mut rules = Vec::new();
        if params.suck {
            rules.push(ReflexRule {
                id: ReflexId::Suck,
                priority: 3,
                channels: &[Channel::Suck, Channel::Vocal],
            });
        }
        if params.cry {
            rules.push(ReflexRule {
                id: ReflexId::Cry,
                priority: 2,
                channels: &[Channel::Vocal],
            });
        }
        if params.orient {
            rules.push(ReflexRule {
                id: ReflexId::Orient,
                priority: 1,
                channels: &[Channel::HeadTurn],
            });
        }
        rules.sort_by_key(|r| std::cmp::Reverse(r.priority));
        Self { rules, params }
    }

    /// Merge of all triggered rules, highest priority first per channel.
    pub fn evaluate(&self, obs: &ObservationFrame) -> PartialAction {
        let mut out = PartialAction::default();
        for rule in &self.rules {
            if let Some(p) = rule.fire(&self.params, obs) {
                debug_assert!(p.claimed().iter().all(|c| rule.channels.contains(c)));
                out.fill_from(p);
            }
        }
        out
    }

    pub fn triggered(&self, obs: &ObservationFrame) -> Vec<ReflexId> {
        self.rules
            .iter()
            .filter(|r| r.fire(&self.params, obs).is_some())
            .map(|r| r.id)
            .collect()
    }
}

/// Applies reflexes on top of an inner policy.
pub struct Reflexive<A> {
    pub inner: A,
    pub reflexes: ReflexSet,
    dropped_speech: bool,
}

impl<A: Agent> Reflexive<A> {
    pub fn wrap(inner: A, reflexes: ReflexSet) -> Self {
        Self {
            inner,
            reflexes,
            dropped_speech: false,
        }
    }

    /// Whether the last action had a speech frame replaced by a reflex.
    pub fn dropped_speech(&self) -> bool {
        self.dropped_speech
    }
}

/// Runs `reflexes` over an already computed action.
pub fn apply_reflexes(
    reflexes: &ReflexSet,
    obs: &ObservationFrame,
    action: &mut ActionCommand,
) -> bool {
    let dropped = reflexes.evaluate(obs).overwrite(action);
    if dropped {
        log::debug!("t={}: speech dropped by reflex", obs.t);
    }
    dropped
}

impl<A: Agent> Agent for Reflexive<A> {
    fn name(&self) -> &str {
        self.inner.name()
    }

    fn act(&mut self, obs: &ObservationFrame) -> ActionCommand {
        let mut action = self.inner.act(obs);
        self.dropped_speech = apply_reflexes(&self.reflexes, obs, &mut action);
        action
    }
}
