use crate::error::SimError;
use crate::geometry::Vec2;
use crate::simulate::run::{AgentSpec, TrajectorySpec};
use crate::simulate::world::{DoorSpec, RoomSpec, WorldSpec};

const INSET: f64 = 1.2;

fn room<'a>(spec: &'a WorldSpec, name: &str) -> Result<&'a RoomSpec, SimError> {
    spec.rooms
        .iter()
        .find(|r| r.name == name)
        .ok_or_else(|| SimError::BadSpec(format!("no room named {name:?}")))
}

/// The labeled door in the top or bottom wall of a room.
fn room_door<'a>(spec: &'a WorldSpec, room: &RoomSpec) -> Result<&'a DoorSpec, SimError> {
    let r = room.rect;
    spec.doors
        .iter()
        .find(|d| {
            d.labeled
                && d.x > r.min_x()
                && d.x < r.max_x()
                && ((d.y - r.min_y()).abs() < 1e-6 || (d.y - r.max_y()).abs() < 1e-6)
        })
        .ok_or_else(|| SimError::BadSpec(format!("room {:?} has no door in a horizontal wall", room.name)))
}

struct Portal {
    inside: Vec2,
    outside: Vec2,
    /// Points along the wall opposite the door.
    far: [Vec2; 2],
    center: Vec2,
}

fn portal(spec: &WorldSpec, name: &str) -> Result<Portal, SimError> {
    let room = room(spec, name)?;
    let door = room_door(spec, room)?;
    let r = room.rect;
    let into = if door.y <= r.min_y() + 1e-6 { 1.0 } else { -1.0 };
    let probe = Vec2::new(door.x, door.y - 0.5 * into);
    let corridor_y = spec
        .rooms
        .iter()
        .find(|c| c.name != room.name && c.rect.contains(probe))
        .map_or(door.y - into, |c| c.rect.cy);
    let far_y = if into > 0.0 { r.max_y() - INSET } else { r.min_y() + INSET };
    Ok(Portal {
        inside: Vec2::new(door.x, door.y + 0.9 * into),
        outside: Vec2::new(door.x, corridor_y),
        far: [Vec2::new(r.min_x() + INSET, far_y), Vec2::new(r.max_x() - INSET, far_y)],
        center: Vec2::new(r.cx, r.cy),
    })
}

/// Waypoints that start at the center of the first room, sweep its far
/// wall, then walk through the corridors into each following room and sweep
/// it the same way.
pub fn room_tour(spec: &WorldSpec, rooms: &[&str]) -> Result<Vec<[f64; 2]>, SimError> {
    let mut pts: Vec<Vec2> = Vec::new();
    for (i, name) in rooms.iter().enumerate() {
        let p = portal(spec, name)?;
        if i == 0 {
            pts.push(p.center);
        } else {
            let last = *pts.last().expect("tour has a start");
            pts.push(Vec2::new(p.outside.x, last.y));
            pts.extend([p.outside, p.inside, p.center]);
        }
        // Visit the far corner nearer to where we are first.
        let [a, b] = p.far;
        let (a, b) = if (a - p.inside).norm() <= (b - p.inside).norm() { (a, b) } else { (b, a) };
        pts.extend([a, b]);
        if i + 1 < rooms.len() {
            pts.extend([p.center, p.inside, p.outside]);
        }
    }
    pts.dedup_by(|a, b| (*a - *b).norm() < 1e-9);
    Ok(pts.into_iter().map(|p| [p.x, p.y]).collect())
}

/// Room sequences for the five default evaluation tours.
pub const DEFAULT_TOURS: [[&str; 2]; 5] = [
    ["south1", "north2"],
    ["north3", "south4"],
    ["south2", "south3"],
    ["north4", "north1"],
    ["south4", "north3"],
];

pub fn default_tours(spec: &WorldSpec) -> Result<Vec<TrajectorySpec>, SimError> {
    DEFAULT_TOURS
        .iter()
        .map(|rooms| {
            Ok(TrajectorySpec {
                waypoints: room_tour(spec, rooms)?,
                speed: 0.4,
                ..Default::default()
            })
        })
        .collect()
}

/// A tour of the twin-room world that stays in `office_a`, where the marker is.
pub fn twin_room_tour() -> TrajectorySpec {
    TrajectorySpec {
        waypoints: vec![[4.0, 3.0], [6.8, 3.0], [6.8, 1.7], [3.6, 1.7], [3.6, 4.1], [6.5, 4.1], [6.5, 2.3], [4.5, 2.3], [4.5, 3.5], [6.0, 3.5]],
        speed: 0.5,
        ..Default::default()
    }
}

/// A pedestrian pacing across the corridor in front of the first room's door.
pub fn crossing_agent(spec: &WorldSpec, room_name: &str) -> Result<AgentSpec, SimError> {
    let p = portal(spec, room_name)?;
    Ok(AgentSpec {
        waypoints: vec![[p.outside.x - 3.0, p.outside.y], [p.outside.x + 3.0, p.outside.y]],
        speed: 0.8,
        radius: 0.25,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulate::world::{default_world_spec, generate_world, twin_room_world_spec};
    use crate::simulate::run::ground_truth_path;

    #[test]
    fn default_tours_stay_in_free_space() {
        let spec = default_world_spec(1);
        let (grid, _) = generate_world(&spec).unwrap();
        for t in default_tours(&spec).unwrap() {
            let path = ground_truth_path(&t, &grid).unwrap();
            let secs = path.len() as f64 * t.dt;
            assert!(secs > 20.0 && secs < 150.0, "{secs}");
        }
    }

    #[test]
    fn twin_tour_is_free() {
        let spec = twin_room_world_spec("plant");
        let (grid, _) = generate_world(&spec).unwrap();
        ground_truth_path(&twin_room_tour(), &grid).unwrap();
    }
}
