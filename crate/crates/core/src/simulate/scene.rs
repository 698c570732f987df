use std::path::Path;

use rand::seq::IndexedRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson};

use crate::error::SimError;
use crate::geometry::{angle_diff, wrap_pi, Pose2D, Rect, Vec2};
use crate::sensormodels::CameraModel;
use crate::sensormodels::RawDetection;
use crate::simulate::raycast::{cast_ray, Disc};
use crate::simulate::sensors::{ConfidenceSpec, SensorNoiseSpec};
use crate::simulate::world::{generate_world, WorldSpec};
use crate::worldmap::{
    OccupancyGrid, SemanticMapDocument, SemanticObject, SemanticWorldMap, VisibilityIndex, DEFAULT_ANGULAR_RESOLUTION,
};

/// A physical object as the simulated camera sees it.
#[derive(Clone, Debug, PartialEq)]
pub struct SimObject {
    pub class_label: String,
    pub rect: Rect,
    /// Layer of `rect` in the per-object visibility index.
    pub layer: usize,
    /// Alternate placement `(rect, layer, probability per frame)`.
    pub displaced: Option<(Rect, usize, f64)>,
}

/// Per-frame state of the things that move: displaced objects and agents.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Frame {
    /// For each object, whether it sits at its alternate placement.
    pub displaced: Vec<bool>,
    pub agents: Vec<Disc>,
}

/// A generated world plus the per-object visibility index the simulated
/// camera uses. Each object is indexed as its own pseudo-class, so a
/// simulated bearing is always one the map-level index also contains.
pub struct SimWorld {
    spec: WorldSpec,
    grid: OccupancyGrid,
    map: SemanticWorldMap,
    objects: Vec<SimObject>,
    object_map: SemanticWorldMap,
    object_index: VisibilityIndex,
}

impl SimWorld {
    pub fn new(spec: WorldSpec) -> Result<Self, SimError> {
        Self::build(spec, None)
    }

    /// Like [`SimWorld::new`], reusing or refreshing a cached object index.
    pub fn with_cache(spec: WorldSpec, cache: &Path) -> Result<Self, SimError> {
        Self::build(spec, Some(cache))
    }

    fn build(spec: WorldSpec, cache: Option<&Path>) -> Result<Self, SimError> {
        let (grid, map) = generate_world(&spec)?;
        let mut objects = Vec::new();
        let mut layers: Vec<Rect> = Vec::new();
        let physical = spec.objects.iter().cloned().chain(spec.door_objects());
        for o in physical {
            if spec.dynamic_classes.contains(&o.class_label) {
                continue;
            }
            let layer = layers.len();
            layers.push(o.rect);
            let displaced = o.displaced.map(|d| {
                layers.push(d.rect);
                (d.rect, layers.len() - 1, d.probability)
            });
            objects.push(SimObject {
                class_label: o.class_label,
                rect: o.rect,
                layer,
                displaced,
            });
        }
        let object_map = SemanticWorldMap::new(SemanticMapDocument {
            class_vocabulary: (0..layers.len()).map(|k| format!("object{k}")).collect(),
            dynamic_classes: vec![],
            room_categories: None,
            objects: layers
                .iter()
                .enumerate()
                .map(|(k, r)| SemanticObject {
                    class_label: format!("object{k}"),
                    rect: *r,
                })
                .collect(),
            rooms: vec![],
        })?;
        let object_index = match cache {
            Some(path) => VisibilityIndex::load_or_build(&grid, &object_map, DEFAULT_ANGULAR_RESOLUTION, path)?.0,
            None => VisibilityIndex::build(&grid, &object_map, DEFAULT_ANGULAR_RESOLUTION)?,
        };
        Ok(Self {
            spec,
            grid,
            map,
            objects,
            object_map,
            object_index,
        })
    }

    pub fn spec(&self) -> &WorldSpec {
        &self.spec
    }
    pub fn grid(&self) -> &OccupancyGrid {
        &self.grid
    }
    pub fn map(&self) -> &SemanticWorldMap {
        &self.map
    }
    pub fn objects(&self) -> &[SimObject] {
        &self.objects
    }
    pub fn object_index(&self) -> &VisibilityIndex {
        &self.object_index
    }
    /// The pseudo-class map behind [`SimWorld::object_index`].
    pub fn object_map(&self) -> &SemanticWorldMap {
        &self.object_map
    }

    /// Draws which displaced objects are away from their mapped spot.
    pub fn draw_displacements<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<bool> {
        self.objects
            .iter()
            .map(|o| match o.displaced {
                Some((_, _, p)) => rng.random::<f64>() < p,
                None => false,
            })
            .collect()
    }
}

fn draw_confidence<R: Rng + ?Sized>(spec: &ConfidenceSpec, rng: &mut R) -> f64 {
    let v = if spec.sigma > 0.0 {
        Normal::new(spec.mean, spec.sigma).map_or(spec.mean, |n| n.sample(rng))
    } else {
        spec.mean
    };
    v.clamp(0.0, 1.0)
}

fn gaussian<R: Rng + ?Sized>(sigma: f64, rng: &mut R) -> f64 {
    if sigma > 0.0 {
        Normal::new(0.0, sigma).map_or(0.0, |n| n.sample(rng))
    } else {
        0.0
    }
}

/// Bounding box columns for an object centered at camera-frame azimuth
/// `az` with angular half-width `half`, shrunk symmetrically to fit.
fn bbox(camera: &CameraModel, az: f64, half: f64) -> Option<(f64, f64)> {
    const LIMIT: f64 = 1.5;
    if az.abs() >= LIMIT {
        return None;
    }
    let u = camera.azimuth_to_column(az);
    let width = f64::from(camera.width);
    if !(0.0..=width).contains(&u) {
        return None;
    }
    let u_left = camera.azimuth_to_column((az + half).min(LIMIT));
    let u_right = camera.azimuth_to_column((az - half).max(-LIMIT));
    let hw = (0.5 * (u_right - u_left)).max(1.0).min(u).min(width - u);
    (hw >= 0.5).then(|| (u - hw, u + hw))
}

fn distance_to_rect(p: Vec2, r: &Rect) -> f64 {
    let dx = (r.min_x() - p.x).max(p.x - r.max_x()).max(0.0);
    let dy = (r.min_y() - p.y).max(p.y - r.max_y()).max(0.0);
    dx.hypot(dy)
}

/// Groups sorted bins into runs of cyclically consecutive bins.
fn cyclic_runs(bins: &[usize], n: usize) -> Vec<Vec<usize>> {
    let mut runs: Vec<Vec<usize>> = Vec::new();
    for &b in bins {
        match runs.last_mut() {
            Some(run) if run.last().is_some_and(|&l| l + 1 == b) => run.push(b),
            _ => runs.push(vec![b]),
        }
    }
    if runs.len() > 1 && runs[0][0] == 0 && runs.last().and_then(|r| r.last()) == Some(&(n - 1)) {
        let first = runs.remove(0);
        runs.last_mut().expect("non-empty").extend(first);
    }
    runs
}

/// One detection frame seen from `pose`.
///
/// Each object visible from the pose cell yields, per camera whose image
/// contains some of its bearings, one detection per contiguous bearing run.
/// The pre-noise bearing is the center of the run's middle bin.
pub fn simulate_detections<R: Rng + ?Sized>(
    world: &SimWorld,
    pose: &Pose2D,
    cameras: &[CameraModel],
    noise: &SensorNoiseSpec,
    frame: &Frame,
    rng: &mut R,
) -> Vec<RawDetection> {
    let mut out = Vec::new();
    let position = pose.position();
    let index = &world.object_index;
    let Some(cell) = index.cell_of(position) else {
        return out;
    };
    let n = index.n_bins();
    let bin_width = index.bin_width();
    let emit = |out: &mut Vec<RawDetection>, class: &str, camera: &CameraModel, robot_az: f64, half: f64, rng: &mut R| {
        if rng.random::<f64>() < noise.miss_probability {
            return;
        }
        let noisy = robot_az + gaussian(noise.bearing_sigma, rng);
        let confidence = draw_confidence(&noise.true_positive_confidence, rng);
        if let Some((bb_left, bb_right)) = bbox(camera, angle_diff(noisy, camera.yaw()), half) {
            out.push(RawDetection {
                class_label: class.to_string(),
                confidence,
                camera_id: camera.id.clone(),
                bb_left,
                bb_right,
            });
        }
    };

    for (i, obj) in world.objects.iter().enumerate() {
        let (rect, layer) = match obj.displaced {
            Some((alt, alt_layer, _)) if frame.displaced.get(i).copied().unwrap_or(false) => (alt, alt_layer),
            _ => (obj.rect, obj.layer),
        };
        if distance_to_rect(position, &rect) > noise.detection_range {
            continue;
        }
        let set = index.bearings_at_cell(cell, layer);
        if set.is_empty() {
            continue;
        }
        for camera in cameras {
            let bins: Vec<usize> = set
                .bins()
                .filter(|&b| camera.sees(set.bin_angle(b) - pose.theta))
                .collect();
            for run in cyclic_runs(&bins, n) {
                let mid = run[run.len() / 2];
                let robot_az = wrap_pi(set.bin_angle(mid) - pose.theta);
                let half = 0.5 * run.len() as f64 * bin_width;
                emit(&mut out, &obj.class_label, camera, robot_az, half, rng);
            }
        }
    }

    for agent in &frame.agents {
        let v = agent.center - position;
        let dist = v.norm();
        if dist <= agent.radius || dist > noise.detection_range {
            continue;
        }
        let dir = v * (1.0 / dist);
        if cast_ray(&world.grid, position, dir, dist - agent.radius).is_some() {
            continue;
        }
        let robot_az = wrap_pi(v.angle() - pose.theta);
        let half = (agent.radius / dist).asin();
        for camera in cameras.iter().filter(|c| c.sees(robot_az)) {
            emit(&mut out, "person", camera, robot_az, half, rng);
        }
    }

    if noise.false_positive_rate > 0.0 && !cameras.is_empty() {
        let classes: Vec<&String> = world
            .map
            .class_vocabulary()
            .iter()
            .filter(|c| !world.map.is_dynamic(c))
            .collect();
        let count = Poisson::new(noise.false_positive_rate).map_or(0.0, |p| p.sample(rng)) as usize;
        for _ in 0..count {
            let (Some(camera), Some(class)) = (cameras.choose(rng), classes.choose(rng)) else {
                break;
            };
            let width = f64::from(camera.width);
            let hw = 20.0f64.min(0.25 * width);
            let u = rng.random_range(hw..=width - hw);
            out.push(RawDetection {
                class_label: class.to_string(),
                confidence: draw_confidence(&noise.false_positive_confidence, rng),
                camera_id: camera.id.clone(),
                bb_left: u - hw,
                bb_right: u + hw,
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulate::sensors::default_cameras;
    use crate::simulate::world::{ObjectSpec, RoomSpec};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn room_world(objects: Vec<ObjectSpec>) -> SimWorld {
        let spec = WorldSpec {
            width: 8.0,
            height: 6.0,
            resolution: 0.05,
            wall_thickness: 0.1,
            rooms: vec![
                RoomSpec { name: "a".into(), category: "office".into(), rect: Rect::from_bounds(0.5, 0.5, 4.0, 5.5) },
                RoomSpec { name: "b".into(), category: "kitchen".into(), rect: Rect::from_bounds(4.0, 0.5, 7.5, 5.5) },
            ],
            doors: vec![],
            objects,
            class_vocabulary: crate::worldmap::DEFAULT_CLASS_VOCABULARY.iter().map(|s| s.to_string()).collect(),
            dynamic_classes: vec!["person".into()],
        };
        SimWorld::new(spec).unwrap()
    }

    #[test]
    fn object_dead_ahead_gives_one_centered_detection() {
        let world = room_world(vec![ObjectSpec::new("sink", Rect::new(3.7, 3.0, 0.3, 0.3))]);
        let cams = default_cameras();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pose = Pose2D::new(1.525, 3.025, 0.0);
        let dets = simulate_detections(&world, &pose, &cams, &SensorNoiseSpec::noiseless(), &Frame::default(), &mut rng);
        assert_eq!(dets.len(), 1);
        let d = dets[0].resolve(&cams).unwrap();
        assert_eq!(d.camera_id, "front");
        assert!(d.azimuth().abs() < world.object_index().bin_width());
    }

    #[test]
    fn object_behind_a_wall_is_not_detected() {
        let world = room_world(vec![ObjectSpec::new("oven", Rect::new(6.0, 3.0, 0.4, 0.4))]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pose = Pose2D::new(2.0, 3.0, 0.0);
        let dets =
            simulate_detections(&world, &pose, &default_cameras(), &SensorNoiseSpec::noiseless(), &Frame::default(), &mut rng);
        assert!(dets.is_empty());
    }

    #[test]
    fn displaced_objects_follow_the_frame() {
        let mut sink = ObjectSpec::new("sink", Rect::new(6.0, 3.0, 0.3, 0.3));
        sink.displaced = Some(crate::simulate::world::Displacement { rect: Rect::new(1.0, 1.0, 0.3, 0.3), probability: 1.0 });
        let world = room_world(vec![sink]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pose = Pose2D::new(2.0, 3.0, 0.0);
        let noise = SensorNoiseSpec::noiseless();
        let home = simulate_detections(&world, &pose, &default_cameras(), &noise, &Frame::default(), &mut rng);
        assert!(home.is_empty());
        let frame = Frame { displaced: world.draw_displacements(&mut rng), agents: vec![] };
        assert_eq!(frame.displaced, vec![true]);
        let away = simulate_detections(&world, &pose, &default_cameras(), &noise, &frame, &mut rng);
        assert_eq!(away.len(), 1);
    }

    #[test]
    fn agents_produce_person_detections() {
        let world = room_world(vec![]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let frame = Frame { displaced: vec![], agents: vec![Disc { center: Vec2::new(2.0, 4.5), radius: 0.25 }] };
        let dets = simulate_detections(
            &world,
            &Pose2D::new(2.0, 2.0, 0.0),
            &default_cameras(),
            &SensorNoiseSpec::noiseless(),
            &frame,
            &mut rng,
        );
        assert_eq!(dets.len(), 1);
        assert_eq!(dets[0].class_label, "person");
        assert_eq!(dets[0].camera_id, "left");
    }

    #[test]
    fn runs_wrap_around_zero() {
        assert_eq!(cyclic_runs(&[0, 1, 5, 358, 359], 360), vec![vec![5], vec![358, 359, 0, 1]]);
        assert_eq!(cyclic_runs(&[3], 360), vec![vec![3]]);
    }
}
