//! Counting learner that links heard speech to drink relief and to what is
//! in view, then uses those counts to ask for water and to look at named
//! things.

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};

use super::{head_turn_toward_column, intrinsic_signal, kind_column, Agent};
use crate::drives::DriveState;
use crate::error::{Error, Result};
use crate::instincts::{ReflexParams, ReflexSet};
use crate::observation::{ActionCommand, ObservationFrame, Vocal};
use crate::sdr::{CodecParams, SdrFrame};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AssociatorParams {
    /// Steps within which a heard frame and a relief event are paired.
    pub window: u64,
    pub min_count: u64,
    /// Smallest one-step thirst drop that counts as relief.
    pub relief_drop: f64,
    /// Frames with fewer active bits are treated as silence.
    pub min_bits: usize,
    pub cry_threshold: f64,
    /// First stage in which the agent tries to speak.
    pub speech_stage: u8,
    /// Steps to wait for service after an utterance, not crying.
    pub patience: u64,
    pub max_attempts: u32,
    /// Steps to keep looking at the referent of a heard word.
    pub look_steps: u64,
    /// Frames a kind must have been seen with before it can be a referent.
    pub min_kind_frames: u64,
    pub reflexes: ReflexParams,
}

impl Default for AssociatorParams {
    fn default() -> Self {
        Self {
            window: 20,
            min_count: 5,
            relief_drop: 0.02,
            min_bits: 4,
            cry_threshold: 0.6,
            speech_stage: 4,
            patience: 150,
            max_attempts: 2,
            look_steps: 100,
            min_kind_frames: 10,
            reflexes: ReflexParams::default(),
        }
    }
}

/// Co-occurrence counts. Keys are plain integers so the JSON dump is easy to
/// recompute from an episode log.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AssociationStore {
    /// slot -> bit -> relief units paired with that bit at that slot.
    pub relief: BTreeMap<usize, BTreeMap<u32, u64>>,
    /// bit -> frames heard while thirsty.
    pub thirst_high: BTreeMap<u32, u64>,
    /// kind code -> bit -> frames heard with that kind in the fovea.
    pub fovea: BTreeMap<u8, BTreeMap<u32, u64>>,
    /// kind code -> frames heard with that kind in the fovea.
    pub fovea_frames: BTreeMap<u8, u64>,
    pub relief_events: u64,
}

impl AssociationStore {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("store serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidParameter(format!("store: {e}")))
    }

    /// The `k` strongest relief bits of a slot, if the k-th reaches `min_count`.
    pub fn top_bits(&self, slot: usize, k: usize, min_count: u64) -> Option<Vec<u32>> {
        let counts = self.relief.get(&slot)?;
        let mut ranked: Vec<(u32, u64)> = counts.iter().map(|(&b, &c)| (b, c)).collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        if ranked.len() < k || ranked[k - 1].1 < min_count {
            return None;
        }
        let mut bits: Vec<u32> = ranked[..k].iter().map(|x| x.0).collect();
        bits.sort_unstable();
        Some(bits)
    }

    /// Frames the agent would say: one per slot, from slot 0 while slots
    /// stay confident.
    pub fn production(&self, k: usize, min_count: u64) -> Vec<SdrFrame> {
        (0..)
            .map_while(|slot| self.top_bits(slot, k, min_count))
            .map(SdrFrame::from_indices)
            .collect()
    }

    /// How strongly the heard frames point at `kind`.
    pub fn kind_score(&self, kind: u8, heard: &[SdrFrame], min_frames: u64) -> Option<f64> {
        let n = *self.fovea_frames.get(&kind)?;
        if n < min_frames || heard.is_empty() {
            return None;
        }
        let counts = self.fovea.get(&kind)?;
        let total: f64 = heard
            .iter()
            .map(|f| {
                f.active()
                    .iter()
                    .map(|b| *counts.get(b).unwrap_or(&0) as f64)
                    .sum::<f64>()
                    / n as f64
            })
            .sum();
        Some(total / heard.len() as f64)
    }
}

#[derive(Debug, Clone)]
pub struct Associator {
    pub params: AssociatorParams,
    pub codec: CodecParams,
    pub store: AssociationStore,
    reflexes: ReflexSet,
    prev: Option<DriveState>,
    slot: usize,
    /// (t, slot, frame) for frames heard within the window.
    recent_frames: VecDeque<(u64, usize, SdrFrame)>,
    /// (t, units) for relief events within the window.
    recent_relief: VecDeque<(u64, u64)>,
    utterance: Vec<SdrFrame>,
    speaking: VecDeque<SdrFrame>,
    waiting_until: u64,
    attempts: u32,
    look: Option<(u8, u64)>,
    pub last_signal: f64,
    pub utterances: u64,
}

impl Associator {
    pub fn new(params: AssociatorParams, codec: CodecParams) -> Self {
        Self {
            reflexes: ReflexSet::new(params.reflexes.clone()),
            params,
            codec,
            store: AssociationStore::default(),
            prev: None,
            slot: 0,
            recent_frames: VecDeque::new(),
            recent_relief: VecDeque::new(),
            utterance: Vec::new(),
            speaking: VecDeque::new(),
            waiting_until: 0,
            attempts: 0,
            look: None,
            last_signal: 0.0,
            utterances: 0,
        }
    }

    pub fn with_store(mut self, store: AssociationStore) -> Self {
        self.store = store;
        self
    }

    /// Currently looking at this kind, if any.
    pub fn looking_at(&self) -> Option<u8> {
        self.look.map(|l| l.0)
    }

    fn is_speech(&self, f: &SdrFrame) -> bool {
        f.len() >= self.params.min_bits
    }

    /// Updates counts from one observation.
    pub fn observe(&mut self, obs: &ObservationFrame) {
        let t = obs.t;
        let w = self.params.window;
        while self.recent_frames.front().is_some_and(|f| f.0 + w < t) {
            self.recent_frames.pop_front();
        }
        while self.recent_relief.front().is_some_and(|r| r.0 + w < t) {
            self.recent_relief.pop_front();
        }

        let frame = &obs.audio.frame;
        if self.is_speech(frame) {
            let slot = self.slot;
            self.slot += 1;
            // pair with earlier relief in the window
            let units: u64 = self.recent_relief.iter().map(|r| r.1).sum();
            if units > 0 {
                let counts = self.store.relief.entry(slot).or_default();
                for &b in frame.active() {
                    *counts.entry(b).or_default() += units;
                }
            }
            if obs.intero.thirst > self.params.cry_threshold {
                for &b in frame.active() {
                    *self.store.thirst_high.entry(b).or_default() += 1;
                }
            }
            if let Some(k) = obs.retina.fovea_kind() {
                let counts = self.store.fovea.entry(k).or_default();
                for &b in frame.active() {
                    *counts.entry(b).or_default() += 1;
                }
                *self.store.fovea_frames.entry(k).or_default() += 1;
            }
            self.recent_frames.push_back((t, slot, frame.clone()));
            self.utterance.push(frame.clone());
        } else {
            self.slot = 0;
            if !self.utterance.is_empty() {
                let heard = std::mem::take(&mut self.utterance);
                self.comprehend(obs, &heard);
            }
        }

        if let Some(prev) = self.prev {
            self.last_signal = intrinsic_signal(&prev, &obs.intero);
            let drop = prev.thirst - obs.intero.thirst;
            if drop >= self.params.relief_drop {
                let units = (drop / self.params.relief_drop + 1e-9).floor() as u64;
                self.store.relief_events += 1;
                for (_, slot, f) in &self.recent_frames {
                    let counts = self.store.relief.entry(*slot).or_default();
                    for &b in f.active() {
                        *counts.entry(b).or_default() += units;
                    }
                }
                self.recent_relief.push_back((t, units));
            }
        }
        self.prev = Some(obs.intero);
    }

    /// Picks the visible kind the heard frames point at most strongly.
    fn comprehend(&mut self, obs: &ObservationFrame, heard: &[SdrFrame]) {
        let mut visible: Vec<u8> = obs.retina.cells.iter().map(|c| c.kind).collect();
        visible.sort_unstable();
        visible.dedup();
        let best = visible
            .into_iter()
            .filter(|&k| k != 0)
            .filter_map(|k| {
                self.store
                    .kind_score(k, heard, self.params.min_kind_frames)
                    .map(|s| (k, s))
            })
            .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)));
        self.look = best.map(|(k, _)| (k, obs.t + self.params.look_steps));
    }

    fn wants_to_speak(&self, obs: &ObservationFrame) -> bool {
        obs.stage >= self.params.speech_stage
            && obs.intero.thirst > self.params.cry_threshold
            && obs.touch.mouth == 0.0
            && obs.t >= self.waiting_until
            && self.attempts < self.params.max_attempts
    }

    /// Whether the cry reflex is held back this step.
    fn holding_cry(&self, t: u64) -> bool {
        !self.speaking.is_empty() || t < self.waiting_until
    }
}

impl Agent for Associator {
    fn name(&self) -> &str {
        "associator"
    }

    fn act(&mut self, obs: &ObservationFrame) -> ActionCommand {
        self.observe(obs);
        let t = obs.t;
        if obs.touch.mouth > 0.0 || obs.intero.thirst <= self.params.cry_threshold {
            self.attempts = 0;
            self.waiting_until = 0;
        }

        let mut action = ActionCommand::null();
        if self.speaking.is_empty() && self.wants_to_speak(obs) {
            let words = self
                .store
                .production(self.codec.cardinality, self.params.min_count);
            if !words.is_empty() {
                self.speaking = words.into();
                self.attempts += 1;
                self.utterances += 1;
            }
        }
        if let Some(f) = self.speaking.pop_front() {
            action.vocal = Vocal::Speech { frame: f };
            if self.speaking.is_empty() {
                self.waiting_until = t + 1 + self.params.patience;
            }
        }

        if let Some((kind, until)) = self.look {
            if t >= until {
                self.look = None;
            } else if let Some(col) = kind_column(obs, kind) {
                action.muscles.head_turn = head_turn_toward_column(col);
            }
        }

        let mut reflex = self.reflexes.evaluate(obs);
        if self.holding_cry(t) && matches!(reflex.vocal, Some(Vocal::Cry { .. })) {
            reflex.vocal = None;
        }
        if self.look.is_some() && !obs.heard_speech() {
            reflex.head_turn = None;
        }
        reflex.overwrite(&mut action);
        action
    }

    fn reset(&mut self) {
        self.prev = None;
        self.slot = 0;
        self.recent_frames.clear();
        self.recent_relief.clear();
        self.utterance.clear();
        self.speaking.clear();
        self.waiting_until = 0;
        self.attempts = 0;
        self.look = None;
        self.last_signal = 0.0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sdr::SdrCodebook;

    fn heard(t: u64, frame: SdrFrame, thirst: f64) -> ObservationFrame {
        let mut o = ObservationFrame::blank(t);
        o.audio.frame = frame;
        o.audio.intensity = if o.audio.frame.is_silence() { 0.0 } else { 0.9 };
        o.intero.thirst = thirst;
        o
    }

    fn water_frames() -> (SdrCodebook, Vec<SdrFrame>) {
        let cb = SdrCodebook::build(4, 512, 10).unwrap();
        let frames = CodecParams::default().encode(&cb, "WATER").unwrap().frames;
        (cb, frames)
    }

    /// A narration, then drinking that starts right after it.
    fn exposure(a: &mut Associator, start: u64, frames: &[SdrFrame], drink: bool) -> u64 {
        let mut t = start;
        let mut thirst = 0.65;
        for f in frames {
            a.observe(&heard(t, f.clone(), thirst));
            t += 1;
        }
        for _ in 0..5 {
            if drink {
                thirst -= 0.049;
            }
            a.observe(&heard(t, SdrFrame::silence(), thirst));
            t += 1;
        }
        t + 200
    }

    #[test]
    fn one_narration_then_relief_counts_every_word_bit() {
        let (_, frames) = water_frames();
        let mut a = Associator::new(AssociatorParams::default(), CodecParams::default());
        exposure(&mut a, 0, &frames, true);
        for (slot, f) in frames.iter().enumerate() {
            let counts = &a.store.relief[&slot];
            for b in f.active() {
                assert!(counts[b] > 0, "slot {slot} bit {b}");
            }
        }
        assert_eq!(a.store.relief_events, 5);
    }

    #[test]
    fn no_relief_no_counts() {
        let (_, frames) = water_frames();
        let mut a = Associator::new(AssociatorParams::default(), CodecParams::default());
        exposure(&mut a, 0, &frames, false);
        assert!(a.store.relief.is_empty());
        assert_eq!(a.store.relief_events, 0);
    }

    #[test]
    fn relief_outside_window_is_not_paired() {
        let (_, frames) = water_frames();
        let mut a = Associator::new(AssociatorParams::default(), CodecParams::default());
        let mut t = 0;
        for f in &frames {
            a.observe(&heard(t, f.clone(), 0.65));
            t += 1;
        }
        t += 30;
        a.observe(&heard(t, SdrFrame::silence(), 0.65));
        a.observe(&heard(t + 1, SdrFrame::silence(), 0.6));
        assert!(a.store.relief.is_empty());
        assert_eq!(a.store.relief_events, 1);
    }

    #[test]
    fn trained_store_produces_word_and_untrained_cries() {
        let (cb, frames) = water_frames();
        let params = AssociatorParams::default();
        let mut a = Associator::new(params.clone(), CodecParams::default());
        let mut obs = ObservationFrame::blank(0);
        obs.stage = 4;
        obs.intero.thirst = 0.65;
        assert!(a.act(&obs).is_cry());

        let mut a = Associator::new(params, CodecParams::default());
        let mut t = 0;
        for _ in 0..3 {
            t = exposure(&mut a, t, &frames, true);
        }
        let said = a.store.production(10, 5);
        assert_eq!(said, frames);
        let decoded = cb.decode_stream(
            &crate::sdr::SdrStream::from_frames(said, 3),
            4,
        );
        assert_eq!(decoded.text(), "WATER");

        a.reset();
        let mut out = Vec::new();
        for i in 0..200 {
            let mut o = ObservationFrame::blank(i);
            o.stage = 4;
            o.intero.thirst = 0.65;
            out.push(a.act(&o));
        }
        let spoken: Vec<_> = out[..160]
            .iter()
            .filter_map(|x| match &x.vocal {
                Vocal::Speech { frame } => Some(frame.clone()),
                _ => None,
            })
            .collect();
        assert_eq!(spoken, frames);
        // Waiting for service, not crying.
        assert!(out.iter().take(150).all(|x| !x.is_cry()));
        // Patience runs out: second attempt, then crying.
        let mut later = Vec::new();
        for i in 200..600 {
            let mut o = ObservationFrame::blank(i);
            o.stage = 4;
            o.intero.thirst = 0.65;
            later.push(a.act(&o));
        }
        assert_eq!(a.utterances, 2);
        assert!(later.last().unwrap().is_cry());
    }

    #[test]
    fn no_speech_before_speech_stage() {
        let (_, frames) = water_frames();
        let mut a = Associator::new(AssociatorParams::default(), CodecParams::default());
        let mut t = 0;
        for _ in 0..3 {
            t = exposure(&mut a, t, &frames, true);
        }
        a.reset();
        let mut o = ObservationFrame::blank(0);
        o.stage = 2;
        o.intero.thirst = 0.65;
        assert!(a.act(&o).is_cry());
    }

    #[test]
    fn store_round_trips_through_json() {
        let (_, frames) = water_frames();
        let mut a = Associator::new(AssociatorParams::default(), CodecParams::default());
        exposure(&mut a, 0, &frames, true);
        let text = a.store.to_json();
        assert_eq!(AssociationStore::from_json(&text).unwrap(), a.store);
    }

    #[test]
    fn equal_streams_equal_stores() {
        let (_, frames) = water_frames();
        let mut a = Associator::new(AssociatorParams::default(), CodecParams::default());
        let mut b = a.clone();
        exposure(&mut a, 0, &frames, true);
        exposure(&mut b, 0, &frames, true);
        assert_eq!(a.store, b.store);
    }
}
