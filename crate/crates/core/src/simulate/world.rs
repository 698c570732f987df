use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::SimError;
use crate::geometry::{Pose2D, Rect, Vec2};
use crate::worldmap::{
    CellState, OccupancyGrid, Region, Room, SemanticMapDocument, SemanticObject, SemanticWorldMap,
    DEFAULT_CLASS_VOCABULARY,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoomSpec {
    pub name: String,
    pub category: String,
    pub rect: Rect,
}

/// Opening of `width` meters centered on `(x, y)`, which must lie on a room wall.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DoorSpec {
    pub x: f64,
    pub y: f64,
    pub width: f64,
    /// Adds a "door" object to the semantic map.
    #[serde(default = "yes")]
    pub labeled: bool,
}

/// Where an object really is in a fraction of the detection frames.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Displacement {
    pub rect: Rect,
    pub probability: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectSpec {
    #[serde(rename = "class")]
    pub class_label: String,
    pub rect: Rect,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub displaced: Option<Displacement>,
    /// Unmapped objects exist for the simulated camera only.
    #[serde(default = "yes")]
    pub mapped: bool,
}

fn yes() -> bool {
    true
}

impl ObjectSpec {
    pub fn new(class_label: &str, rect: Rect) -> Self {
        Self {
            class_label: class_label.to_string(),
            rect,
            displaced: None,
            mapped: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorldSpec {
    pub width: f64,
    pub height: f64,
    pub resolution: f64,
    pub wall_thickness: f64,
    pub rooms: Vec<RoomSpec>,
    #[serde(default)]
    pub doors: Vec<DoorSpec>,
    #[serde(default)]
    pub objects: Vec<ObjectSpec>,
    #[serde(default = "default_vocabulary")]
    pub class_vocabulary: Vec<String>,
    #[serde(default = "default_dynamic")]
    pub dynamic_classes: Vec<String>,
}

fn default_vocabulary() -> Vec<String> {
    DEFAULT_CLASS_VOCABULARY.iter().map(|s| s.to_string()).collect()
}

fn default_dynamic() -> Vec<String> {
    vec!["person".to_string()]
}

impl WorldSpec {
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(b"world-spec-v1");
        h.update(serde_json::to_vec(self).expect("world spec serializes"));
        hex::encode(h.finalize())
    }

    /// Door rectangles as they appear in the semantic map.
    pub fn door_objects(&self) -> Vec<ObjectSpec> {
        self.doors
            .iter()
            .filter(|d| d.labeled)
            .filter_map(|d| {
                let vertical = self.door_on_vertical_wall(d)?;
                let t = self.wall_thickness;
                let rect = if vertical {
                    Rect::new(d.x, d.y, t, d.width)
                } else {
                    Rect::new(d.x, d.y, d.width, t)
                };
                Some(ObjectSpec::new("door", rect))
            })
            .collect()
    }

    /// `Some(true)` for a door on a vertical wall, `None` if it is on no wall.
    fn door_on_vertical_wall(&self, d: &DoorSpec) -> Option<bool> {
        const EPS: f64 = 1e-6;
        for r in &self.rooms {
            let rect = &r.rect;
            let in_y = d.y >= rect.min_y() - EPS && d.y <= rect.max_y() + EPS;
            let in_x = d.x >= rect.min_x() - EPS && d.x <= rect.max_x() + EPS;
            if in_y && ((d.x - rect.min_x()).abs() < EPS || (d.x - rect.max_x()).abs() < EPS) {
                return Some(true);
            }
            if in_x && ((d.y - rect.min_y()).abs() < EPS || (d.y - rect.max_y()).abs() < EPS) {
                return Some(false);
            }
        }
        None
    }

    fn validate(&self) -> Result<(), SimError> {
        if !(self.resolution > 0.0) || !(self.width > 0.0) || !(self.height > 0.0) {
            return Err(SimError::BadSpec("world size and resolution must be positive".into()));
        }
        if !(self.wall_thickness >= 0.0) {
            return Err(SimError::BadSpec("wall thickness must be non-negative".into()));
        }
        for (i, a) in self.rooms.iter().enumerate() {
            if !a.rect.is_valid() {
                return Err(SimError::BadSpec(format!("room {:?} has a degenerate rectangle", a.name)));
            }
            for (j, b) in self.rooms.iter().enumerate().skip(i + 1) {
                let ox = a.rect.max_x().min(b.rect.max_x()) - a.rect.min_x().max(b.rect.min_x());
                let oy = a.rect.max_y().min(b.rect.max_y()) - a.rect.min_y().max(b.rect.min_y());
                if ox > 1e-9 && oy > 1e-9 {
                    return Err(SimError::OverlappingRooms(i, j));
                }
            }
        }
        for (i, d) in self.doors.iter().enumerate() {
            if self.door_on_vertical_wall(d).is_none() || !(d.width > 0.0) {
                return Err(SimError::DoorOffWall(i));
            }
        }
        for o in &self.objects {
            if let Some(d) = &o.displaced {
                if !(0.0..=1.0).contains(&d.probability) || !d.rect.is_valid() {
                    return Err(SimError::BadSpec(format!("bad displacement for a {:?} object", o.class_label)));
                }
            }
        }
        Ok(())
    }
}

/// Rasterizes the floor plan and assembles the semantic map.
///
/// Cells inside a room are free, cells outside every room are unknown, and
/// cells whose centers lie within half the wall thickness of a room edge are
/// occupied unless a door clears them. Objects are not rasterized.
pub fn generate_world(spec: &WorldSpec) -> Result<(OccupancyGrid, SemanticWorldMap), SimError> {
    spec.validate()?;
    let res = spec.resolution;
    let w = (spec.width / res).round() as usize;
    let h = (spec.height / res).round() as usize;
    let mut grid = OccupancyGrid::new(w, h, res, Pose2D::default(), CellState::Unknown)?;
    let span = |lo: f64, hi: f64, n: usize| -> (usize, usize) {
        let a = ((lo / res) - 0.5).ceil().max(0.0) as usize;
        let b = (((hi / res) - 0.5).floor() + 1.0).clamp(0.0, n as f64) as usize;
        (a, b)
    };
    let fill = |grid: &mut OccupancyGrid, x0: f64, y0: f64, x1: f64, y1: f64, state: CellState, strict: bool| {
        let (c0, c1) = span(x0, x1, w);
        let (r0, r1) = span(y0, y1, h);
        for r in r0..r1 {
            for c in c0..c1 {
                let p = grid.cell_center(c, r);
                let inside = if strict {
                    p.x > x0 && p.x < x1 && p.y > y0 && p.y < y1
                } else {
                    p.x >= x0 && p.x <= x1 && p.y >= y0 && p.y <= y1
                };
                if inside {
                    grid.set(c, r, state);
                }
            }
        }
    };
    for room in &spec.rooms {
        let r = room.rect;
        fill(&mut grid, r.min_x(), r.min_y(), r.max_x(), r.max_y(), CellState::Free, false);
    }
    let t = 0.5 * spec.wall_thickness;
    if t > 0.0 {
        for room in &spec.rooms {
            let r = room.rect;
            let (x0, y0, x1, y1) = (r.min_x(), r.min_y(), r.max_x(), r.max_y());
            fill(&mut grid, x0 - t, y0 - t, x1 + t, y0 + t, CellState::Occupied, true);
            fill(&mut grid, x0 - t, y1 - t, x1 + t, y1 + t, CellState::Occupied, true);
            fill(&mut grid, x0 - t, y0 - t, x0 + t, y1 + t, CellState::Occupied, true);
            fill(&mut grid, x1 - t, y0 - t, x1 + t, y1 + t, CellState::Occupied, true);
        }
    }
    for d in &spec.doors {
        let half = 0.5 * d.width;
        let tt = t + 1e-9;
        if spec.door_on_vertical_wall(d) == Some(true) {
            fill(&mut grid, d.x - tt, d.y - half, d.x + tt, d.y + half, CellState::Free, false);
        } else {
            fill(&mut grid, d.x - half, d.y - tt, d.x + half, d.y + tt, CellState::Free, false);
        }
    }
    let objects = spec
        .objects
        .iter()
        .filter(|o| o.mapped)
        .cloned()
        .chain(spec.door_objects())
        .filter(|o| spec.class_vocabulary.contains(&o.class_label))
        .map(|o| SemanticObject {
            class_label: o.class_label,
            rect: o.rect,
        })
        .collect();
    let rooms = spec
        .rooms
        .iter()
        .map(|r| Room {
            name: r.name.clone(),
            category: r.category.clone(),
            region: Region::Rect { rect: r.rect },
        })
        .collect();
    let map = SemanticWorldMap::new(SemanticMapDocument {
        class_vocabulary: spec.class_vocabulary.clone(),
        dynamic_classes: spec.dynamic_classes.clone(),
        room_categories: None,
        objects,
        rooms,
    })?;
    Ok((grid, map))
}

/// Furniture kit per room category: (class, width, height, against a wall).
fn furniture(category: &str) -> &'static [(&'static str, f64, f64, bool)] {
    match category {
        "office" => &[
            ("desk", 1.4, 0.7, true),
            ("desk", 1.4, 0.7, true),
            ("chair", 0.5, 0.5, false),
            ("chair", 0.5, 0.5, false),
            ("drawers", 0.5, 0.6, true),
        ],
        "kitchen" => &[
            ("sink", 0.6, 0.5, true),
            ("oven", 0.6, 0.6, true),
            ("storage", 1.0, 0.5, true),
            ("table", 1.2, 0.8, false),
            ("chair", 0.5, 0.5, false),
        ],
        "meeting" => &[
            ("table", 2.0, 1.0, false),
            ("whiteboard", 1.6, 0.1, true),
            ("chair", 0.5, 0.5, false),
            ("chair", 0.5, 0.5, false),
            ("plant", 0.4, 0.4, true),
        ],
        "reception" => &[
            ("sofa", 1.8, 0.8, true),
            ("plant", 0.4, 0.4, true),
            ("extinguisher", 0.25, 0.25, true),
            ("table", 0.8, 0.8, false),
            ("cardboard", 0.6, 0.4, false),
        ],
        "corridor" => &[("extinguisher", 0.25, 0.25, true), ("plant", 0.4, 0.4, true)],
        _ => &[],
    }
}

/// Scatters a category's furniture in a room: wall pieces flush with an
/// inner wall face, others in the interior. Keeps clear of the doors.
pub fn furnish_room<R: Rng + ?Sized>(
    room: &RoomSpec,
    doors: &[DoorSpec],
    wall_thickness: f64,
    rng: &mut R,
) -> Vec<ObjectSpec> {
    let inner = Rect::new(
        room.rect.cx,
        room.rect.cy,
        room.rect.w - wall_thickness - 0.02,
        room.rect.h - wall_thickness - 0.02,
    );
    let door_points: Vec<Vec2> = doors.iter().map(|d| Vec2::new(d.x, d.y)).collect();
    let mut placed: Vec<Rect> = Vec::new();
    let mut out = Vec::new();
    for &(class, fw, fh, wall) in furniture(&room.category) {
        for _ in 0..200 {
            let rect = if wall {
                let side = rng.random_range(0..4);
                let (w, h) = if side < 2 { (fw, fh) } else { (fh, fw) };
                if w >= inner.w || h >= inner.h {
                    continue;
                }
                let x = rng.random_range(inner.min_x() + 0.5 * w..inner.max_x() - 0.5 * w);
                let y = rng.random_range(inner.min_y() + 0.5 * h..inner.max_y() - 0.5 * h);
                match side {
                    0 => Rect::new(x, inner.min_y() + 0.5 * h, w, h),
                    1 => Rect::new(x, inner.max_y() - 0.5 * h, w, h),
                    2 => Rect::new(inner.min_x() + 0.5 * w, y, w, h),
                    _ => Rect::new(inner.max_x() - 0.5 * w, y, w, h),
                }
            } else {
                let m = 0.8;
                if fw + 2.0 * m >= inner.w || fh + 2.0 * m >= inner.h {
                    continue;
                }
                let x = rng.random_range(inner.min_x() + m + 0.5 * fw..inner.max_x() - m - 0.5 * fw);
                let y = rng.random_range(inner.min_y() + m + 0.5 * fh..inner.max_y() - m - 0.5 * fh);
                Rect::new(x, y, fw, fh)
            };
            let grown = Rect::new(rect.cx, rect.cy, rect.w + 0.4, rect.h + 0.4);
            let near_door = door_points.iter().any(|p| {
                let dx = (p.x - rect.cx).abs() - 0.5 * rect.w;
                let dy = (p.y - rect.cy).abs() - 0.5 * rect.h;
                dx.max(0.0).hypot(dy.max(0.0)) < 1.2
            });
            if near_door || placed.iter().any(|p| p.overlaps(&grown)) {
                continue;
            }
            placed.push(rect);
            out.push(ObjectSpec::new(class, rect));
            break;
        }
    }
    out
}

pub const DEFAULT_CATEGORIES: [&str; 4] = ["office", "kitchen", "meeting", "reception"];

/// Unknown border kept around generated floors, meters. Beam end points
/// past the outer walls then land in mapped space rather than off the grid.
pub const MARGIN: f64 = 0.5;

/// 30 m × 15 m floor: four rooms on each side of two joined corridors.
/// Every room has the same footprint; doors and furniture vary with `seed`.
pub fn default_world_spec(seed: u64) -> WorldSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (width, height) = (30.0, 15.0);
    let room_w = (width - 2.0 * MARGIN) / 4.0;
    let (corridor_y0, corridor_y1) = (6.5, 8.5);
    let mut rooms = Vec::new();
    let mut doors = Vec::new();
    let mut categories: Vec<&str> = DEFAULT_CATEGORIES.iter().chain(DEFAULT_CATEGORIES.iter()).copied().collect();
    // Deterministic shuffle of the category layout.
    for i in (1..categories.len()).rev() {
        let j = rng.random_range(0..=i);
        categories.swap(i, j);
    }
    for (k, category) in categories.iter().enumerate() {
        let col = k % 4;
        let top = k >= 4;
        let x0 = MARGIN + col as f64 * room_w;
        let (y0, y1) = if top { (corridor_y1, height - MARGIN) } else { (MARGIN, corridor_y0) };
        let rect = Rect::from_bounds(x0, y0, x0 + room_w, y1);
        rooms.push(RoomSpec {
            name: format!("{}{}", if top { "north" } else { "south" }, col + 1),
            category: category.to_string(),
            rect,
        });
        let dx = [1.2, 0.5 * room_w, room_w - 1.2].choose(&mut rng).copied().unwrap_or(0.5 * room_w);
        doors.push(DoorSpec {
            x: x0 + dx,
            y: if top { corridor_y1 } else { corridor_y0 },
            width: 1.0,
            labeled: true,
        });
    }
    let mid = 0.5 * width;
    rooms.push(RoomSpec {
        name: "corridor_west".into(),
        category: "corridor".into(),
        rect: Rect::from_bounds(MARGIN, corridor_y0, mid, corridor_y1),
    });
    rooms.push(RoomSpec {
        name: "corridor_east".into(),
        category: "corridor".into(),
        rect: Rect::from_bounds(mid, corridor_y0, width - MARGIN, corridor_y1),
    });
    doors.push(DoorSpec {
        x: mid,
        y: 0.5 * (corridor_y0 + corridor_y1),
        width: 1.6,
        labeled: false,
    });
    let thickness = 0.1;
    let mut objects = Vec::new();
    for room in &rooms {
        objects.extend(furnish_room(room, &doors, thickness, &mut rng));
    }
    WorldSpec {
        width,
        height,
        resolution: 0.05,
        wall_thickness: thickness,
        rooms,
        doors,
        objects,
        class_vocabulary: default_vocabulary(),
        dynamic_classes: default_dynamic(),
    }
}

/// Two identical office rooms side by side off one corridor: the second
/// room is the first translated by 10 m, furniture included. Only the first
/// room (`office_a`) holds the `marker` object.
pub fn twin_room_world_spec(marker: &str) -> WorldSpec {
    let shift = |r: Rect| Rect::new(r.cx + TWIN_SHIFT, r.cy, r.w, r.h);
    let room_a = Rect::from_bounds(2.0, MARGIN, 8.0, 5.5);
    let rooms = vec![
        RoomSpec { name: "office_a".into(), category: "office".into(), rect: room_a },
        RoomSpec { name: "office_b".into(), category: "office".into(), rect: shift(room_a) },
        RoomSpec { name: "corridor".into(), category: "corridor".into(), rect: Rect::from_bounds(MARGIN, 5.5, 20.0 - MARGIN, 7.5) },
    ];
    let door_a = DoorSpec { x: 6.5, y: 5.5, width: 1.0, labeled: true };
    let door_b = DoorSpec { x: door_a.x + TWIN_SHIFT, ..door_a.clone() };
    let furniture = [
        ObjectSpec::new("desk", Rect::new(3.0, 0.95, 1.4, 0.7)),
        ObjectSpec::new("chair", Rect::new(3.0, 1.8, 0.5, 0.5)),
        ObjectSpec::new("drawers", Rect::new(7.6, 1.5, 0.6, 0.5)),
        ObjectSpec::new("storage", Rect::new(7.65, 4.0, 0.5, 1.2)),
        ObjectSpec::new("extinguisher", Rect::new(5.6, 5.65, 0.25, 0.2)),
    ];
    let mut objects: Vec<ObjectSpec> = furniture.to_vec();
    objects.extend(furniture.iter().map(|o| ObjectSpec::new(&o.class_label, shift(o.rect))));
    objects.push(ObjectSpec::new(marker, Rect::new(2.35, 4.5, 0.6, 0.5)));
    WorldSpec {
        width: 20.0,
        height: 8.0,
        resolution: 0.05,
        wall_thickness: 0.1,
        rooms,
        doors: vec![door_a, door_b],
        objects,
        class_vocabulary: default_vocabulary(),
        dynamic_classes: default_dynamic(),
    }
}

/// Offset between the two rooms of [`twin_room_world_spec`], meters.
pub const TWIN_SHIFT: f64 = 10.0;
