//! The infant body: muscle channels in, sensor bundles out.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::drives::Substance;
use crate::world::{
    wrap_angle, Attachment, EntityKind, Holder, Vec2, WorldState, ID_AGENT, ID_CAREGIVER,
    VIEW_RANGE,
};

pub const HEAD_STEP: f64 = 0.2;
pub const ARM_STEP: f64 = 0.2;
pub const EXTEND_STEP: f64 = 0.1;
pub const SUCK_THRESHOLD: f64 = 0.5;
pub const INGEST_UNIT: f64 = 0.05;
pub const GRASP_THRESHOLD: f64 = 0.5;
pub const GRASP_REACH: f64 = 0.25;

pub const RETINA_SIZE: usize = 16;
pub const FIELD_OF_VIEW: f64 = 120.0 * PI / 180.0;
pub const TOUCH_SIZE: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentBody {
    pub position: Vec2,
    /// Gaze direction in `(-pi, pi]`.
    pub gaze: f64,
    pub arm_extension: f64,
    /// Arm direction relative to the gaze.
    pub arm_angle: f64,
    pub grasp: f64,
    pub suck: f64,
    pub mouth_contact: Option<u32>,
    pub hand_item: Option<u32>,
}

impl AgentBody {
    /// Lying in the crib, looking toward the room centre.
    pub fn new(position: Vec2) -> Self {
        Self {
            position,
            gaze: PI / 4.0,
            arm_extension: 0.0,
            arm_angle: 0.0,
            grasp: 0.0,
            suck: 0.0,
            mouth_contact: None,
            hand_item: None,
        }
    }

    pub fn hand_position(&self) -> Vec2 {
        let reach = 0.2 + 0.4 * self.arm_extension;
        self.position
            .add(Vec2::from_angle(self.gaze + self.arm_angle).scale(reach))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MuscleCommand {
    pub head_turn: f64,
    pub arm_turn: f64,
    pub arm_extend: f64,
    pub grasp: f64,
    pub suck: f64,
}

impl MuscleCommand {
    /// Clamps every channel into range; the flag reports whether anything
    /// had to be clamped. Non-finite values become zero.
    pub fn clamped(&self) -> (MuscleCommand, bool) {
        fn c(v: f64, lo: f64, hi: f64) -> f64 {
            if v.is_finite() {
                v.clamp(lo, hi)
            } else {
                0.0
            }
        }
        let out = MuscleCommand {
            head_turn: c(self.head_turn, -1.0, 1.0),
            arm_turn: c(self.arm_turn, -1.0, 1.0),
            arm_extend: c(self.arm_extend, -1.0, 1.0),
            grasp: c(self.grasp, 0.0, 1.0),
            suck: c(self.suck, 0.0, 1.0),
        };
        let flagged = out != *self;
        (out, flagged)
    }
}

pub fn apply_muscles(body: &AgentBody, cmd: &MuscleCommand) -> AgentBody {
    let (cmd, _) = cmd.clamped();
    AgentBody {
        gaze: wrap_angle(body.gaze + cmd.head_turn * HEAD_STEP),
        arm_angle: wrap_angle(body.arm_angle + cmd.arm_turn * ARM_STEP),
        arm_extension: (body.arm_extension + cmd.arm_extend * EXTEND_STEP).clamp(0.0, 1.0),
        grasp: cmd.grasp,
        suck: cmd.suck,
        ..body.clone()
    }
}

/// Picks up a toy within reach of the hand when grasping, drops it when the
/// grasp relaxes.
pub fn update_grasp(world: &mut WorldState, enabled: bool) {
    let body = &world.body;
    let holding = body.hand_item;
    let gripping = enabled && body.grasp >= GRASP_THRESHOLD;
    let hand = body.hand_position();
    match (gripping, holding) {
        (true, None) => {
            let nearest = world
                .entities
                .iter()
                .filter(|e| e.present && e.kind == EntityKind::Toy && e.held_by.is_none())
                .map(|e| (e.pos.distance(hand), e.id))
                .filter(|(d, _)| *d <= GRASP_REACH)
                .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            if let Some((_, id)) = nearest {
                world.body.hand_item = Some(id);
                if let Some(e) = world.entity_mut(id) {
                    e.held_by = Some(Holder {
                        id: ID_AGENT,
                        at: Attachment::Hand,
                    });
                }
            }
        }
        (false, Some(id)) => {
            world.body.hand_item = None;
            if let Some(e) = world.entity_mut(id) {
                e.held_by = None;
                e.pos = hand.clamp_to_room();
            }
        }
        _ => {}
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetinaCell {
    pub kind: u8,
    pub depth: f64,
}

impl Serialize for Retina {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeSeq;
        let mut seq = s.serialize_seq(Some(self.cells.len()))?;
        for c in &self.cells {
            seq.serialize_element(&(c.kind, c.depth))?;
        }
        seq.end()
    }
}

impl<'de> Deserialize<'de> for Retina {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let pairs: Vec<(u8, f64)> = Vec::deserialize(d)?;
        if pairs.len() != RETINA_SIZE * RETINA_SIZE {
            return Err(serde::de::Error::invalid_length(
                pairs.len(),
                &"256 retina cells",
            ));
        }
        Ok(Retina {
            cells: pairs
                .into_iter()
                .map(|(kind, depth)| RetinaCell { kind, depth })
                .collect(),
        })
    }
}

/// 16x16 row-major grid of (kind code, normalised depth).
#[derive(Debug, Clone, PartialEq)]
pub struct Retina {
    pub cells: Vec<RetinaCell>,
}

impl Retina {
    pub fn zeros() -> Self {
        Self {
            cells: vec![
                RetinaCell {
                    kind: 0,
                    depth: 0.0
                };
                RETINA_SIZE * RETINA_SIZE
            ],
        }
    }

    pub fn cell(&self, row: usize, col: usize) -> RetinaCell {
        self.cells[row * RETINA_SIZE + col]
    }

    pub fn is_zero(&self) -> bool {
        self.cells.iter().all(|c| c.kind == 0 && c.depth == 0.0)
    }

    /// Nearest non-empty kind in the central 2x2 cells.
    pub fn fovea_kind(&self) -> Option<u8> {
        let mid = RETINA_SIZE / 2;
        (mid - 1..=mid)
            .flat_map(|r| (mid - 1..=mid).map(move |c| (r, c)))
            .map(|(r, c)| self.cell(r, c))
            .filter(|c| c.kind != 0)
            .min_by(|a, b| a.depth.total_cmp(&b.depth).then(a.kind.cmp(&b.kind)))
            .map(|c| c.kind)
    }

    /// Columns in which `kind` appears in any row.
    pub fn columns_with(&self, kind: u8) -> Vec<usize> {
        (0..RETINA_SIZE)
            .filter(|&c| (0..RETINA_SIZE).any(|r| self.cell(r, c).kind == kind))
            .collect()
    }
}

/// Bearing of column `col`, relative to the gaze (left positive).
pub fn column_offset(col: usize) -> f64 {
    FIELD_OF_VIEW / 2.0 - (col as f64 + 0.5) * FIELD_OF_VIEW / RETINA_SIZE as f64
}

/// Maximum range seen by a retina row; rows away from the horizon see less.
pub fn row_range(row: usize) -> f64 {
    let centre = (RETINA_SIZE as f64 - 1.0) / 2.0;
    VIEW_RANGE * (1.0 - (row as f64 - centre).abs() / (centre + 1.0))
}

pub fn render_retina(world: &WorldState, body: &AgentBody) -> Retina {
    let mut cells = Vec::with_capacity(RETINA_SIZE * RETINA_SIZE);
    let hits: Vec<_> = (0..RETINA_SIZE)
        .map(|c| world.raycast(body.position, body.gaze + column_offset(c)))
        .collect();
    for row in 0..RETINA_SIZE {
        let range = row_range(row);
        for hit in &hits {
            cells.push(if hit.kind_code != 0 && hit.distance <= range {
                RetinaCell {
                    kind: hit.kind_code,
                    depth: hit.depth,
                }
            } else {
                RetinaCell {
                    kind: 0,
                    depth: 1.0,
                }
            });
        }
    }
    Retina { cells }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TouchGrid {
    /// 8x8 torso pressure, row-major.
    pub torso: Vec<f64>,
    pub mouth: f64,
    pub hand: f64,
    pub crib: f64,
}

impl TouchGrid {
    pub fn zeros() -> Self {
        Self {
            torso: vec![0.0; TOUCH_SIZE * TOUCH_SIZE],
            mouth: 0.0,
            hand: 0.0,
            crib: 0.0,
        }
    }
}

/// Rows and columns of the torso patch the caregiver holds while feeding.
const CONTACT_PATCH: std::ops::RangeInclusive<usize> = 2..=5;
const CONTACT_DISTANCE: f64 = 1.0;

pub fn sample_touch(world: &WorldState, body: &AgentBody) -> TouchGrid {
    let mut touch = TouchGrid::zeros();
    if let Some(id) = body.mouth_contact {
        if world
            .entity(id)
            .is_some_and(|e| e.kind.substance().is_some())
        {
            touch.mouth = 1.0;
        }
    }
    if body.hand_item.is_some() {
        touch.hand = body.grasp;
    }
    if let Some(crib) = world.entity(crate::world::ID_CRIB) {
        if crib.pos.distance(body.position) <= crib.kind.radius() {
            touch.crib = 1.0;
        }
    }
    if world.caregiver_contact
        && world
            .entity(ID_CAREGIVER)
            .is_some_and(|c| c.pos.distance(body.position) <= CONTACT_DISTANCE)
    {
        for r in CONTACT_PATCH {
            for c in CONTACT_PATCH {
                touch.torso[r * TOUCH_SIZE + c] = 1.0;
            }
        }
    }
    touch
}

/// Drinks from the bottle at the mouth when sucking hard enough; the bottle
/// loses what was drunk.
pub fn ingest_if_sucking(world: &mut WorldState, suck_level: f64) -> Option<(Substance, f64)> {
    if suck_level <= SUCK_THRESHOLD {
        return None;
    }
    let id = world.body.mouth_contact?;
    let bottle = world.entity_mut(id)?;
    let substance = bottle.kind.substance()?;
    let amount = (INGEST_UNIT * suck_level).min(bottle.contents);
    if amount <= 1e-9 {
        return None;
    }
    bottle.contents -= amount;
    Some((substance, amount))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SessionRng;
    use crate::world::{Entity, WorldCommand, ID_WATER};

    fn cmd(head: f64) -> MuscleCommand {
        MuscleCommand {
            head_turn: head,
            ..Default::default()
        }
    }

    #[test]
    fn head_turn_integrates() {
        let b = AgentBody {
            gaze: 0.0,
            ..AgentBody::new(Vec2::new(4.0, 4.0))
        };
        assert_eq!(apply_muscles(&b, &cmd(0.0)).gaze, 0.0);
        assert!((apply_muscles(&b, &cmd(1.0)).gaze - 0.2).abs() < 1e-12);
    }

    #[test]
    fn extension_saturates() {
        let mut b = AgentBody::new(Vec2::new(4.0, 4.0));
        let c = MuscleCommand {
            arm_extend: 1.0,
            ..Default::default()
        };
        for _ in 0..30 {
            b = apply_muscles(&b, &c);
        }
        assert_eq!(b.arm_extension, 1.0);
    }

    #[test]
    fn out_of_range_is_clamped_and_flagged() {
        let (c, flagged) = MuscleCommand {
            head_turn: 3.0,
            suck: -1.0,
            ..Default::default()
        }
        .clamped();
        assert!(flagged);
        assert_eq!(c.head_turn, 1.0);
        assert_eq!(c.suck, 0.0);
        assert!(!MuscleCommand::default().clamped().1);
    }

    #[test]
    fn gaze_wraps_back_to_start() {
        let start = AgentBody::new(Vec2::new(4.0, 4.0));
        let mut b = start.clone();
        let steps = (2.0 * PI / HEAD_STEP).ceil() as usize;
        for _ in 0..steps {
            b = apply_muscles(&b, &cmd(1.0));
            assert!(b.gaze > -PI && b.gaze <= PI);
        }
        assert!(wrap_angle(b.gaze - start.gaze).abs() <= HEAD_STEP);
    }

    fn bare_world() -> WorldState {
        let mut w = WorldState::new(SessionRng::seed_from_u64(7), 512);
        w.entities
            .retain(|e| e.kind == EntityKind::Wall || e.id == ID_AGENT);
        w
    }

    #[test]
    fn empty_room_ahead_sees_nothing_close() {
        // Facing a wall beyond every row's range.
        let mut w = bare_world();
        w.body.position = Vec2::new(4.0, 10.0);
        w.body.gaze = 0.0;
        let r = render_retina(&w, &w.body);
        assert!(r.cells.iter().all(|c| c.kind == 0 && c.depth == 1.0));
    }

    #[test]
    fn bottle_ahead_matches_geometry_oracle() {
        let mut w = bare_world();
        w.body.position = Vec2::new(4.0, 10.0);
        w.body.gaze = 0.0;
        let mut bottle = Entity {
            id: 40,
            kind: EntityKind::BottleWater,
            name: "WATER".into(),
            pos: Vec2::new(6.0, 10.0),
            facing: 0.0,
            color_code: 5,
            held_by: None,
            present: true,
            contents: 0.6,
            home: Vec2::new(6.0, 10.0),
        };
        w.entities.push(bottle.clone());
        let r = render_retina(&w, &w.body);

        // Oracle: the ray at offset a passes the bottle centre at perpendicular
        // distance 2*sin|a|; it hits iff that is within the radius, and the row
        // sees it iff the near intersection is within the row's range.
        let radius = EntityKind::BottleWater.radius();
        for row in 0..RETINA_SIZE {
            for col in 0..RETINA_SIZE {
                let a = column_offset(col);
                let perp = 2.0 * a.sin().abs();
                let along = 2.0 * a.cos();
                let hit = a.cos() > 0.0 && perp <= radius;
                let t = along - (radius * radius - perp * perp).max(0.0).sqrt();
                let expect = hit && t <= row_range(row);
                assert_eq!(
                    r.cell(row, col).kind == EntityKind::BottleWater.code(),
                    expect,
                    "row {row} col {col}"
                );
            }
        }
        // Frozen: centre columns 7 and 8 see it on rows 1..=14.
        let cols = r.columns_with(EntityKind::BottleWater.code());
        assert_eq!(cols, vec![7, 8]);
        assert_eq!(r.cell(0, 7).kind, 0);
        assert_eq!(r.cell(1, 7).kind, EntityKind::BottleWater.code());
        assert_eq!(r.cell(14, 8).kind, EntityKind::BottleWater.code());
        assert_eq!(r.cell(15, 8).kind, 0);
        assert_eq!(r.fovea_kind(), Some(EntityKind::BottleWater.code()));

        bottle.present = false;
        w.entities.retain(|e| e.id != 40);
        w.entities.push(bottle);
        assert!(render_retina(&w, &w.body).columns_with(5).is_empty());
    }

    #[test]
    fn retina_values_in_range() {
        let w = WorldState::new(SessionRng::seed_from_u64(3), 512);
        let r = render_retina(&w, &w.body);
        for c in &r.cells {
            assert!((0.0..=1.0).contains(&c.depth));
            assert!(c.kind == 0 || EntityKind::from_code(c.kind).is_some());
        }
    }

    fn feeding_world() -> WorldState {
        let mut w = WorldState::new(SessionRng::seed_from_u64(7), 512);
        w.step_world(
            &[WorldCommand::Attach {
                item: ID_WATER,
                holder: Holder {
                    id: ID_AGENT,
                    at: Attachment::Mouth,
                },
            }],
            None,
            false,
        );
        w
    }

    #[test]
    fn touch_nothing_near() {
        let mut w = bare_world();
        w.body.position = Vec2::new(10.0, 10.0);
        let t = sample_touch(&w, &w.body);
        assert_eq!(t, TouchGrid::zeros());
    }

    #[test]
    fn touch_mouth_and_torso_while_feeding() {
        let mut w = feeding_world();
        let t = sample_touch(&w, &w.body);
        assert_eq!(t.mouth, 1.0);
        assert_eq!(t.crib, 1.0);
        assert!(t.torso.iter().all(|&v| v == 0.0));

        let agent = w.agent_pos();
        w.step_world(
            &[
                WorldCommand::MoveToward {
                    id: crate::world::ID_CAREGIVER,
                    target: agent,
                    max_distance: 5.4,
                },
                WorldCommand::SetContact(true),
            ],
            None,
            false,
        );
        let t = sample_touch(&w, &w.body);
        assert_eq!(t.torso.iter().filter(|&&v| v == 1.0).count(), 16);
    }

    #[test]
    fn touch_hand_reports_grasp_level() {
        let mut w = bare_world();
        let hand = w.body.hand_position();
        w.entities.push(Entity {
            id: 41,
            kind: EntityKind::Toy,
            name: "BALL".into(),
            pos: hand,
            facing: 0.0,
            color_code: 1,
            held_by: None,
            present: true,
            contents: 0.0,
            home: hand,
        });
        let grip = MuscleCommand {
            grasp: 0.7,
            ..Default::default()
        };
        w.step_world(&[], Some(&grip), true);
        assert_eq!(w.body.hand_item, Some(41));
        assert!((sample_touch(&w, &w.body).hand - 0.7).abs() < 1e-12);

        w.step_world(&[], Some(&MuscleCommand::default()), true);
        assert_eq!(w.body.hand_item, None);
        assert_eq!(sample_touch(&w, &w.body).hand, 0.0);
    }

    #[test]
    fn grasp_disabled_never_picks_up() {
        let mut w = bare_world();
        let hand = w.body.hand_position();
        w.entities.push(Entity {
            id: 41,
            kind: EntityKind::Toy,
            name: "BALL".into(),
            pos: hand,
            facing: 0.0,
            color_code: 1,
            held_by: None,
            present: true,
            contents: 0.0,
            home: hand,
        });
        let grip = MuscleCommand {
            grasp: 1.0,
            ..Default::default()
        };
        w.step_world(&[], Some(&grip), false);
        assert_eq!(w.body.hand_item, None);
    }

    #[test]
    fn ingest_rules() {
        let mut w = feeding_world();
        assert_eq!(
            ingest_if_sucking(&mut w, 1.0),
            Some((Substance::Water, 0.05))
        );
        assert_eq!(ingest_if_sucking(&mut w, 0.4), None);
        let mut dry = bare_world();
        assert_eq!(ingest_if_sucking(&mut dry, 1.0), None);
    }

    #[test]
    fn bottle_empties_after_twelve_full_sucks() {
        let mut w = feeding_world();
        let drunk: usize = (0..20)
            .filter(|_| ingest_if_sucking(&mut w, 1.0).is_some())
            .count();
        assert_eq!(drunk, 12);
    }
}
