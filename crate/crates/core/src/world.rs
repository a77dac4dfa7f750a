//! The room: entities, sound propagation and the deterministic step.

use std::f64::consts::PI;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::body::{AgentBody, MuscleCommand};
use crate::drives::Substance;
use crate::error::Error;
use crate::rng::SessionRng;
use crate::sdr::{apply_noise, SdrFrame};

pub const ROOM_SIZE: f64 = 20.0;
pub const VIEW_RANGE: f64 = 10.0;
pub const CRY_RANGE: f64 = 12.0;
pub const SPEECH_RANGE: f64 = 8.0;
/// One extra speech bit flip per this many metres.
pub const SPEECH_FLIP_DISTANCE: f64 = 4.0;
pub const INAUDIBLE_BELOW: f64 = 0.01;

pub const CRIB_POS: Vec2 = Vec2 { x: 4.0, y: 4.0 };
pub const IDLE_POST: Vec2 = Vec2 { x: 8.0, y: 8.0 };
pub const WATER_SHELF: Vec2 = Vec2 { x: 8.3, y: 7.7 };
pub const MILK_SHELF: Vec2 = Vec2 { x: 7.7, y: 8.3 };
pub const BOTTLE_VOLUME: f64 = 0.6;

/// Offsets of attached items from their holder.
pub const MOUTH_OFFSET: f64 = 0.2;
pub const CARRY_OFFSET: f64 = 0.35;

pub const ID_CRIB: u32 = 5;
pub const ID_AGENT: u32 = 6;
pub const ID_CAREGIVER: u32 = 7;
pub const ID_WATER: u32 = 8;
pub const ID_MILK: u32 = 9;
pub const ID_FIRST_TOY: u32 = 10;
pub const TOY_NAMES: [&str; 4] = ["BALL", "DUCK", "BEAR", "DOLL"];

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn from_angle(angle: f64) -> Self {
        Self::new(angle.cos(), angle.sin())
    }

    pub fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }

    pub fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }

    pub fn scale(self, k: f64) -> Vec2 {
        Vec2::new(self.x * k, self.y * k)
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    pub fn length(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, o: Vec2) -> f64 {
        self.sub(o).length()
    }

    pub fn bearing_to(self, o: Vec2) -> f64 {
        let d = o.sub(self);
        d.y.atan2(d.x)
    }

    pub fn clamp_to_room(self) -> Vec2 {
        Vec2::new(self.x.clamp(0.0, ROOM_SIZE), self.y.clamp(0.0, ROOM_SIZE))
    }

    pub fn in_room(self) -> bool {
        (0.0..=ROOM_SIZE).contains(&self.x) && (0.0..=ROOM_SIZE).contains(&self.y)
    }
}

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    let w = (a + PI).rem_euclid(2.0 * PI) - PI;
    if w <= -PI {
        w + 2.0 * PI
    } else {
        w
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntityKind {
    Wall,
    Crib,
    Caregiver,
    Toy,
    BottleWater,
    BottleMilk,
    Agent,
}

impl EntityKind {
    pub const ALL: [EntityKind; 7] = [
        EntityKind::Wall,
        EntityKind::Crib,
        EntityKind::Caregiver,
        EntityKind::Toy,
        EntityKind::BottleWater,
        EntityKind::BottleMilk,
        EntityKind::Agent,
    ];

    /// Retina code; 0 is reserved for "nothing".
    pub fn code(self) -> u8 {
        match self {
            EntityKind::Wall => 1,
            EntityKind::Crib => 2,
            EntityKind::Caregiver => 3,
            EntityKind::Toy => 4,
            EntityKind::BottleWater => 5,
            EntityKind::BottleMilk => 6,
            EntityKind::Agent => 7,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.code() == code)
    }

    pub fn radius(self) -> f64 {
        match self {
            EntityKind::Wall => 0.0,
            EntityKind::Crib => 0.6,
            EntityKind::Caregiver => 0.3,
            EntityKind::Toy => 0.2,
            EntityKind::BottleWater | EntityKind::BottleMilk => 0.15,
            EntityKind::Agent => 0.25,
        }
    }

    pub fn substance(self) -> Option<Substance> {
        match self {
            EntityKind::BottleWater => Some(Substance::Water),
            EntityKind::BottleMilk => Some(Substance::Milk),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            EntityKind::Wall => "wall",
            EntityKind::Crib => "crib",
            EntityKind::Caregiver => "caregiver",
            EntityKind::Toy => "toy",
            EntityKind::BottleWater => "bottle_water",
            EntityKind::BottleMilk => "bottle_milk",
            EntityKind::Agent => "agent",
        }
    }
}

pub const KIND_NONE: u8 = 0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Attachment {
    Mouth,
    Hand,
    Carry,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Holder {
    pub id: u32,
    pub at: Attachment,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Entity {
    pub id: u32,
    pub kind: EntityKind,
    pub name: String,
    pub pos: Vec2,
    pub facing: f64,
    pub color_code: u8,
    pub held_by: Option<Holder>,
    /// Absent entities are invisible and intangible until their stage.
    pub present: bool,
    /// Bottle contents in ingest units; unused for other kinds.
    pub contents: f64,
    /// Resting place (shelf for bottles, initial spot for toys).
    pub home: Vec2,
}

impl Entity {
    fn new(id: u32, kind: EntityKind, name: &str, pos: Vec2, color_code: u8) -> Self {
        Self {
            id,
            kind,
            name: name.to_string(),
            pos,
            facing: 0.0,
            color_code,
            held_by: None,
            present: true,
            contents: 0.0,
            home: pos,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SoundKind {
    Cry { loudness: f64 },
    Speech { frame: SdrFrame },
    Ambient,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoundEvent {
    pub source_id: u32,
    pub source: Vec2,
    pub kind: SoundKind,
    pub emitted_step: u64,
}

/// A sound as it arrives at a listener.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReceivedSound {
    pub listener: u32,
    pub source_id: u32,
    /// Absolute bearing from the listener to the source.
    pub bearing: f64,
    pub distance: f64,
    pub intensity: f64,
    /// Noised speech frame; `None` for cries and ambient sound.
    pub frame: Option<SdrFrame>,
    pub is_cry: bool,
}

/// Propagation model. Cry: intensity falls linearly to zero at `CRY_RANGE`.
/// Speech: delivered within `SPEECH_RANGE`, with one extra flip per 4 m.
pub fn audible(
    listener: Vec2,
    listener_id: u32,
    event: &SoundEvent,
    dimension: usize,
    rng: &mut SessionRng,
) -> Option<ReceivedSound> {
    let d = listener.distance(event.source);
    let bearing = listener.bearing_to(event.source);
    match &event.kind {
        SoundKind::Cry { loudness } => {
            let intensity = loudness * (1.0 - d / CRY_RANGE).max(0.0);
            (intensity >= INAUDIBLE_BELOW).then(|| ReceivedSound {
                listener: listener_id,
                source_id: event.source_id,
                bearing,
                distance: d,
                intensity,
                frame: None,
                is_cry: true,
            })
        }
        SoundKind::Speech { frame } => {
            if d > SPEECH_RANGE {
                return None;
            }
            let flips = (d / SPEECH_FLIP_DISTANCE).floor() as usize;
            Some(ReceivedSound {
                listener: listener_id,
                source_id: event.source_id,
                bearing,
                distance: d,
                intensity: 1.0 - d / SPEECH_RANGE,
                frame: Some(apply_noise(frame, flips, dimension, rng)),
                is_cry: false,
            })
        }
        SoundKind::Ambient => None,
    }
}

/// Commands the caregiver (or a probe) issues against the world.
#[derive(Debug, Clone, PartialEq)]
pub enum WorldCommand {
    /// Walk up to `max_distance` toward `target`, facing the direction of travel.
    MoveToward {
        id: u32,
        target: Vec2,
        max_distance: f64,
    },
    Face {
        id: u32,
        angle: f64,
    },
    Attach {
        item: u32,
        holder: Holder,
    },
    /// Detach `item` and set it down at `at`.
    Release {
        item: u32,
        at: Vec2,
    },
    Refill {
        item: u32,
    },
    /// Caregiver skin contact with the infant's torso.
    SetContact(bool),
    Emit(SoundEvent),
}

impl WorldCommand {
    fn target_ids(&self) -> Vec<u32> {
        match self {
            WorldCommand::MoveToward { id, .. } | WorldCommand::Face { id, .. } => vec![*id],
            WorldCommand::Attach { item, holder } => vec![*item, holder.id],
            WorldCommand::Release { item, .. } | WorldCommand::Refill { item } => vec![*item],
            WorldCommand::SetContact(_) | WorldCommand::Emit(_) => vec![],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayHit {
    pub kind_code: u8,
    /// Distance divided by `VIEW_RANGE`, clamped to 1.
    pub depth: f64,
    pub distance: f64,
    pub entity: Option<u32>,
}

impl RayHit {
    pub const NONE: RayHit = RayHit {
        kind_code: KIND_NONE,
        depth: 1.0,
        distance: f64::INFINITY,
        entity: None,
    };
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    pub step: u64,
    pub entities: Vec<Entity>,
    pub body: AgentBody,
    /// Sounds emitted during the current step, delivered by the next `step_world`.
    pub pending_sounds: Vec<SoundEvent>,
    /// Sounds delivered by the last `step_world`, per listener.
    pub inbox: Vec<ReceivedSound>,
    pub caregiver_contact: bool,
    pub rng: SessionRng,
    pub dimension: usize,
}

impl WorldState {
    /// Builds the room. Toy positions are the only placement draws.
    pub fn new(rng: SessionRng, dimension: usize) -> Self {
        let mut rng = rng;
        let mut entities = vec![
            Entity::new(1, EntityKind::Wall, "", Vec2::new(ROOM_SIZE / 2.0, 0.0), 0),
            Entity::new(
                2,
                EntityKind::Wall,
                "",
                Vec2::new(ROOM_SIZE, ROOM_SIZE / 2.0),
                0,
            ),
            Entity::new(
                3,
                EntityKind::Wall,
                "",
                Vec2::new(ROOM_SIZE / 2.0, ROOM_SIZE),
                0,
            ),
            Entity::new(4, EntityKind::Wall, "", Vec2::new(0.0, ROOM_SIZE / 2.0), 0),
            Entity::new(ID_CRIB, EntityKind::Crib, "CRIB", CRIB_POS, 7),
            Entity::new(ID_AGENT, EntityKind::Agent, "BABY", CRIB_POS, 8),
            Entity::new(ID_CAREGIVER, EntityKind::Caregiver, "MAMA", IDLE_POST, 9),
            Entity::new(ID_WATER, EntityKind::BottleWater, "WATER", WATER_SHELF, 5),
            Entity::new(ID_MILK, EntityKind::BottleMilk, "MILK", MILK_SHELF, 6),
        ];
        entities[7].contents = BOTTLE_VOLUME;
        entities[8].contents = BOTTLE_VOLUME;
        for (i, name) in TOY_NAMES.iter().enumerate() {
            let x = rng.uniform(10.0, 18.0);
            let y = rng.uniform(10.0, 18.0);
            entities.push(Entity::new(
                ID_FIRST_TOY + i as u32,
                EntityKind::Toy,
                name,
                Vec2::new(x, y),
                1 + i as u8,
            ));
        }
        let body = AgentBody::new(CRIB_POS);
        entities[5].facing = body.gaze;
        entities[6].facing = PI + PI / 4.0;
        Self {
            step: 0,
            entities,
            body,
            pending_sounds: Vec::new(),
            inbox: Vec::new(),
            caregiver_contact: false,
            rng,
            dimension,
        }
    }

    pub fn entity(&self, id: u32) -> Option<&Entity> {
        self.entities.iter().find(|e| e.id == id)
    }

    pub fn entity_mut(&mut self, id: u32) -> Option<&mut Entity> {
        self.entities.iter_mut().find(|e| e.id == id)
    }

    pub fn caregiver(&self) -> &Entity {
        self.entity(ID_CAREGIVER).expect("caregiver exists")
    }

    pub fn agent_pos(&self) -> Vec2 {
        self.body.position
    }

    pub fn bottle_for(&self, substance: Substance) -> u32 {
        match substance {
            Substance::Water => ID_WATER,
            Substance::Milk => ID_MILK,
        }
    }

    pub fn toys(&self) -> impl Iterator<Item = &Entity> {
        self.entities.iter().filter(|e| e.kind == EntityKind::Toy)
    }

    /// Items currently attached to `holder`.
    pub fn held_by(&self, holder: u32) -> impl Iterator<Item = &Entity> {
        self.entities
            .iter()
            .filter(move |e| e.held_by.map(|h| h.id) == Some(holder))
    }

    /// Marks which entities exist. Toys become present in stage order.
    pub fn set_presence(&mut self, bottles: bool, toys: usize) {
        for e in &mut self.entities {
            match e.kind {
                EntityKind::BottleWater | EntityKind::BottleMilk => e.present = bottles,
                EntityKind::Toy => e.present = ((e.id - ID_FIRST_TOY) as usize) < toys,
                _ => {}
            }
        }
    }

    pub fn emit(&mut self, sound: SoundEvent) {
        self.pending_sounds.push(sound);
    }

    /// Sounds the given listener received on the last step.
    pub fn heard_by(&self, listener: u32) -> impl Iterator<Item = &ReceivedSound> {
        self.inbox.iter().filter(move |s| s.listener == listener)
    }

    /// Nearest hit along a ray from `origin`. Circles that contain the origin
    /// are not hit; the agent's own body is never hit.
    pub fn raycast(&self, origin: Vec2, angle: f64) -> RayHit {
        let dir = Vec2::from_angle(angle);
        let mut best = RayHit::NONE;
        for e in &self.entities {
            if !e.present || matches!(e.kind, EntityKind::Wall | EntityKind::Agent) {
                continue;
            }
            let r = e.kind.radius();
            let f = e.pos.sub(origin);
            let closest = f.dot(dir);
            let d2 = f.dot(f) - closest * closest;
            if f.dot(f) <= r * r || d2 > r * r {
                continue;
            }
            let t = closest - (r * r - d2).sqrt();
            if t >= 0.0 && t < best.distance {
                best = RayHit {
                    kind_code: e.kind.code(),
                    depth: (t / VIEW_RANGE).min(1.0),
                    distance: t,
                    entity: Some(e.id),
                };
            }
        }
        if let Some((t, id)) = wall_distance(origin, dir) {
            if t < best.distance {
                best = RayHit {
                    kind_code: EntityKind::Wall.code(),
                    depth: (t / VIEW_RANGE).min(1.0),
                    distance: t,
                    entity: Some(id),
                };
            }
        }
        best
    }

    /// Advances one step: agent muscles, then commands, then attachments,
    /// then sound delivery. Commands naming missing entities are skipped and
    /// reported.
    pub fn step_world(
        &mut self,
        commands: &[WorldCommand],
        muscles: Option<&MuscleCommand>,
        grasp_enabled: bool,
    ) -> Vec<Error> {
        let mut errors = Vec::new();
        if let Some(cmd) = muscles {
            self.body = crate::body::apply_muscles(&self.body, cmd);
            crate::body::update_grasp(self, grasp_enabled);
        }
        for cmd in commands {
            if let Some(&missing) = cmd
                .target_ids()
                .iter()
                .find(|&&id| self.entity(id).is_none())
            {
                log::warn!("stale command {cmd:?}");
                errors.push(Error::StaleCommand(missing));
                continue;
            }
            self.apply(cmd);
        }
        self.update_attachments();

        let sounds = std::mem::take(&mut self.pending_sounds);
        let mut listeners = vec![(ID_AGENT, self.body.position)];
        if let Some(c) = self.entity(ID_CAREGIVER) {
            listeners.push((ID_CAREGIVER, c.pos));
        }
        let mut inbox = Vec::new();
        for sound in &sounds {
            for &(id, pos) in &listeners {
                if id == sound.source_id {
                    continue;
                }
                if let Some(r) = audible(pos, id, sound, self.dimension, &mut self.rng) {
                    inbox.push(r);
                }
            }
        }
        self.inbox = inbox;
        self.step += 1;
        errors
    }

    fn apply(&mut self, cmd: &WorldCommand) {
        match cmd {
            WorldCommand::MoveToward {
                id,
                target,
                max_distance,
            } => {
                let e = self.entity_mut(*id).expect("checked");
                let gap = e.pos.distance(*target);
                if gap > 0.0 {
                    let dist = max_distance.min(gap);
                    let heading = e.pos.bearing_to(*target);
                    e.pos = e
                        .pos
                        .add(Vec2::from_angle(heading).scale(dist))
                        .clamp_to_room();
                    e.facing = heading;
                }
            }
            WorldCommand::Face { id, angle } => {
                self.entity_mut(*id).expect("checked").facing = wrap_angle(*angle);
            }
            WorldCommand::Attach { item, holder } => {
                self.detach_from_agent(*item);
                if holder.id == ID_AGENT {
                    match holder.at {
                        Attachment::Mouth => self.body.mouth_contact = Some(*item),
                        Attachment::Hand => self.body.hand_item = Some(*item),
                        Attachment::Carry => {}
                    }
                }
                self.entity_mut(*item).expect("checked").held_by = Some(*holder);
            }
            WorldCommand::Release { item, at } => {
                self.detach_from_agent(*item);
                let e = self.entity_mut(*item).expect("checked");
                e.held_by = None;
                e.pos = at.clamp_to_room();
            }
            WorldCommand::Refill { item } => {
                let e = self.entity_mut(*item).expect("checked");
                if e.kind.substance().is_some() {
                    e.contents = BOTTLE_VOLUME;
                }
            }
            WorldCommand::SetContact(on) => self.caregiver_contact = *on,
            WorldCommand::Emit(sound) => self.pending_sounds.push(sound.clone()),
        }
    }

    fn detach_from_agent(&mut self, item: u32) {
        if self.body.mouth_contact == Some(item) {
            self.body.mouth_contact = None;
        }
        if self.body.hand_item == Some(item) {
            self.body.hand_item = None;
        }
    }

    /// Held entities follow their holder.
    pub fn update_attachments(&mut self) {
        let gaze = self.body.gaze;
        let agent_pos = self.body.position;
        let hand = self.body.hand_position();
        if let Some(agent) = self.entity_mut(ID_AGENT) {
            agent.facing = gaze;
        }
        let holders: Vec<(u32, Vec2, f64)> = self
            .entities
            .iter()
            .map(|e| (e.id, e.pos, e.facing))
            .collect();
        for e in &mut self.entities {
            let Some(h) = e.held_by else { continue };
            e.pos = match h.at {
                Attachment::Mouth => agent_pos.add(Vec2::from_angle(gaze).scale(MOUTH_OFFSET)),
                Attachment::Hand => hand,
                Attachment::Carry => {
                    let (_, pos, facing) = holders
                        .iter()
                        .copied()
                        .find(|(id, _, _)| *id == h.id)
                        .unwrap_or((h.id, e.pos, 0.0));
                    pos.add(Vec2::from_angle(facing).scale(CARRY_OFFSET))
                }
            }
            .clamp_to_room();
        }
    }

    /// Canonical text form: entities sorted by id, floats at 6 decimals.
    pub fn canonical_string(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "step {}", self.step);
        let mut ents: Vec<&Entity> = self.entities.iter().collect();
        ents.sort_by_key(|e| e.id);
        for e in ents {
            let held = match e.held_by {
                Some(h) => format!("{}:{}", h.id, attachment_str(h.at)),
                None => "-".into(),
            };
            let _ = writeln!(
                s,
                "entity {} {} {} {} {} {} {} {} {} {} {} {}",
                e.id,
                e.kind.as_str(),
                if e.name.is_empty() { "-" } else { &e.name },
                f6(e.pos.x),
                f6(e.pos.y),
                f6(e.facing),
                e.color_code,
                held,
                e.present as u8,
                f6(e.contents),
                f6(e.home.x),
                f6(e.home.y),
            );
        }
        let b = &self.body;
        let _ = writeln!(
            s,
            "body {} {} {} {} {} {} {} {}",
            f6(b.position.x),
            f6(b.position.y),
            f6(b.gaze),
            f6(b.arm_extension),
            f6(b.arm_angle),
            f6(b.grasp),
            f6(b.suck),
            opt_id(b.mouth_contact),
        );
        let _ = writeln!(s, "hand {}", opt_id(b.hand_item));
        let _ = writeln!(s, "contact {}", self.caregiver_contact as u8);
        for snd in &self.pending_sounds {
            let _ = writeln!(
                s,
                "pending {} {} {} {} {}",
                snd.source_id,
                f6(snd.source.x),
                f6(snd.source.y),
                snd.emitted_step,
                sound_str(&snd.kind)
            );
        }
        for r in &self.inbox {
            let _ = writeln!(
                s,
                "inbox {} {} {} {} {} {}",
                r.listener,
                r.source_id,
                f6(r.bearing),
                f6(r.intensity),
                r.is_cry as u8,
                r.frame
                    .as_ref()
                    .map(|f| f.to_string())
                    .unwrap_or("-".into()),
            );
        }
        let st = self.rng.state();
        let _ = writeln!(s, "rng {} {} {} {}", st[0], st[1], st[2], st[3]);
        s
    }

    pub fn hash(&self) -> u64 {
        fnv1a64(self.canonical_string().as_bytes())
    }
}

fn attachment_str(a: Attachment) -> &'static str {
    match a {
        Attachment::Mouth => "mouth",
        Attachment::Hand => "hand",
        Attachment::Carry => "carry",
    }
}

fn opt_id(id: Option<u32>) -> String {
    id.map(|i| i.to_string()).unwrap_or_else(|| "-".into())
}

fn sound_str(kind: &SoundKind) -> String {
    match kind {
        SoundKind::Cry { loudness } => format!("cry {}", f6(*loudness)),
        SoundKind::Speech { frame } => format!("speech {frame}"),
        SoundKind::Ambient => "ambient".into(),
    }
}

/// Fixed 6-decimal rendering; negative zero prints as zero.
pub fn f6(x: f64) -> String {
    let s = format!("{x:.6}");
    if s == "-0.000000" {
        "0.000000".into()
    } else {
        s
    }
}

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Distance to the room boundary along `dir`, with the id of the wall hit.
fn wall_distance(origin: Vec2, dir: Vec2) -> Option<(f64, u32)> {
    let mut best: Option<(f64, u32)> = None;
    let mut consider = |t: f64, id: u32| {
        if t >= 0.0 && best.map_or(true, |(b, _)| t < b) {
            best = Some((t, id));
        }
    };
    if dir.y < 0.0 {
        consider(-origin.y / dir.y, 1);
    }
    if dir.x > 0.0 {
        consider((ROOM_SIZE - origin.x) / dir.x, 2);
    }
    if dir.y > 0.0 {
        consider((ROOM_SIZE - origin.y) / dir.y, 3);
    }
    if dir.x < 0.0 {
        consider(-origin.x / dir.x, 4);
    }
    best
}
