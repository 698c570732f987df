use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::SimError;
use crate::geometry::{angle_diff, Pose2D, Vec2};
use crate::sensorlog::{LogHeader, LogRecord, SensorLog, SCHEMA_VERSION};
use crate::simulate::raycast::{simulate_ranges, Disc};
use crate::simulate::scene::{simulate_detections, Frame, SimWorld};
use crate::simulate::sensors::{SensorNoiseSpec, SensorRig};
use crate::worldmap::OccupancyGrid;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrajectorySpec {
    pub waypoints: Vec<[f64; 2]>,
    /// m/s
    pub speed: f64,
    /// rad/s
    pub angular_speed: f64,
    /// Simulation tick, seconds.
    pub dt: f64,
    /// Heading at the first waypoint; defaults to facing the second one.
    pub initial_heading: Option<f64>,
}

impl Default for TrajectorySpec {
    fn default() -> Self {
        Self {
            waypoints: Vec::new(),
            speed: 0.5,
            angular_speed: 0.8,
            dt: 0.02,
            initial_heading: None,
        }
    }
}

/// A disc-shaped pedestrian walking back and forth along a polyline.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentSpec {
    pub waypoints: Vec<[f64; 2]>,
    pub speed: f64,
    #[serde(default = "default_radius")]
    pub radius: f64,
}

fn default_radius() -> f64 {
    0.25
}

impl AgentSpec {
    pub fn position(&self, t: f64) -> Vec2 {
        let pts: Vec<Vec2> = self.waypoints.iter().map(|p| Vec2::new(p[0], p[1])).collect();
        let lengths: Vec<f64> = pts.windows(2).map(|w| (w[1] - w[0]).norm()).collect();
        let total: f64 = lengths.iter().sum();
        if pts.len() < 2 || total <= 0.0 {
            return pts.first().copied().unwrap_or_default();
        }
        let mut s = (self.speed * t).rem_euclid(2.0 * total);
        if s > total {
            s = 2.0 * total - s;
        }
        for (w, len) in pts.windows(2).zip(&lengths) {
            if s <= *len {
                return w[0] + (w[1] - w[0]) * (s / len.max(f64::MIN_POSITIVE));
            }
            s -= len;
        }
        pts[pts.len() - 1]
    }

    pub fn disc(&self, t: f64) -> Disc {
        Disc {
            center: self.position(t),
            radius: self.radius,
        }
    }
}

/// Ground-truth poses at every tick: the robot slides straight between
/// waypoints while turning toward its direction of travel at the capped
/// rate, pausing translation when the heading error is large.
pub fn ground_truth_path(spec: &TrajectorySpec, grid: &OccupancyGrid) -> Result<Vec<Pose2D>, SimError> {
    if !(spec.dt > 0.0) || !(spec.speed > 0.0) || !(spec.angular_speed > 0.0) {
        return Err(SimError::BadSpec("dt, speed and angular speed must be positive".into()));
    }
    let pts: Vec<Vec2> = spec.waypoints.iter().map(|p| Vec2::new(p[0], p[1])).collect();
    let Some(&start) = pts.first() else {
        return Err(SimError::BadSpec("trajectory needs at least one waypoint".into()));
    };
    let heading = spec
        .initial_heading
        .or_else(|| pts.get(1).map(|p| (*p - start).angle()))
        .unwrap_or(0.0);
    let mut pose = Pose2D::new(start.x, start.y, heading);
    let check = |p: &Pose2D| {
        if grid.is_free_at(p.position()) {
            Ok(())
        } else {
            Err(SimError::TrajectoryBlocked { x: p.x, y: p.y })
        }
    };
    check(&pose)?;
    let mut out = vec![pose];
    let (step, turn) = (spec.speed * spec.dt, spec.angular_speed * spec.dt);
    for &target in &pts[1..] {
        loop {
            let to = target - pose.position();
            let dist = to.norm();
            if dist < 1e-9 {
                break;
            }
            let err = angle_diff(to.angle(), pose.theta);
            let theta = pose.theta + err.clamp(-turn, turn);
            let p = if err.abs() < 0.5 {
                pose.position() + to * (step.min(dist) / dist)
            } else {
                pose.position()
            };
            pose = Pose2D::new(p.x, p.y, theta);
            check(&pose)?;
            out.push(pose);
            if out.len() > 10_000_000 {
                return Err(SimError::BadSpec("trajectory too long".into()));
            }
        }
    }
    Ok(out)
}

fn every(rate: f64, dt: f64) -> usize {
    ((1.0 / (rate * dt)).round() as usize).max(1)
}

fn stamp(k: usize, dt: f64) -> f64 {
    (k as f64 * dt * 1e6).round() / 1e6
}

fn gaussian<R: Rng + ?Sized>(sigma: f64, rng: &mut R) -> f64 {
    if sigma > 0.0 {
        Normal::new(0.0, sigma).map_or(0.0, |n| n.sample(rng))
    } else {
        0.0
    }
}

/// Hash of everything that determines a run besides the seed.
pub fn run_spec_hash(
    world: &SimWorld,
    trajectory: &TrajectorySpec,
    noise: &SensorNoiseSpec,
    rig: &SensorRig,
    agents: &[AgentSpec],
) -> String {
    let mut h = Sha256::new();
    h.update(b"run-spec-v1");
    h.update(world.spec().content_hash().as_bytes());
    for part in [
        serde_json::to_vec(trajectory),
        serde_json::to_vec(noise),
        serde_json::to_vec(rig),
        serde_json::to_vec(agents),
    ] {
        h.update(part.expect("specs serialize"));
    }
    hex::encode(h.finalize())
}

/// Simulates every sensor stream along the trajectory. All randomness comes
/// from `seed`, with one independent stream per sensor.
pub fn simulate_run(
    world: &SimWorld,
    trajectory: &TrajectorySpec,
    noise: &SensorNoiseSpec,
    rig: &SensorRig,
    agents: &[AgentSpec],
    seed: u64,
) -> Result<SensorLog, SimError> {
    noise.validate()?;
    rig.validate()?;
    let truth = ground_truth_path(trajectory, world.grid())?;
    let dt = trajectory.dt;
    let stream = |k: u64| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(k);
        rng
    };
    let (mut odom_rng, mut lidar_rng, mut camera_rng, mut frame_rng) = (stream(1), stream(2), stream(3), stream(4));
    let (odom_every, scan_every, det_every) = (
        every(rig.odometry_rate, dt),
        every(rig.scan_rate, dt),
        every(rig.detection_rate, dt),
    );
    let mut records = Vec::new();
    let mut last_odom = truth[0];
    for (k, pose) in truth.iter().enumerate() {
        let t = stamp(k, dt);
        records.push(LogRecord::GroundTruth {
            t,
            x: pose.x,
            y: pose.y,
            theta: pose.theta,
        });
        if k > 0 && k % odom_every == 0 {
            let (dx, dy, dtheta) = last_odom.between(pose);
            let trans = dx.hypot(dy);
            let st = noise.odom_trans_sigma * trans.sqrt();
            let sr = (noise.odom_rot_sigma.powi(2) * dtheta.abs() + noise.odom_rot_per_meter.powi(2) * trans).sqrt();
            records.push(LogRecord::Odometry {
                t,
                dx: dx + gaussian(st, &mut odom_rng),
                dy: dy + gaussian(st, &mut odom_rng),
                dtheta: dtheta + gaussian(sr, &mut odom_rng),
            });
            last_odom = *pose;
        }
        let agents_now: Vec<Disc> = agents.iter().map(|a| a.disc(t)).collect();
        if k % scan_every == 0 {
            let ranges = simulate_ranges(
                world.grid(),
                pose,
                &rig.lidar,
                noise.lidar_range_sigma,
                &agents_now,
                &mut lidar_rng,
            )?;
            records.push(LogRecord::Scan { t, ranges });
        }
        if k % det_every == 0 {
            let frame = Frame {
                displaced: world.draw_displacements(&mut frame_rng),
                agents: agents_now,
            };
            let detections = simulate_detections(world, pose, &rig.cameras, noise, &frame, &mut camera_rng);
            records.push(LogRecord::Detections { t, detections });
        }
    }
    Ok(SensorLog {
        header: LogHeader {
            schema_version: SCHEMA_VERSION,
            seed,
            cameras: rig.cameras.clone(),
            lidar: rig.lidar.clone(),
            grid_hash: world.grid().content_hash(),
            map_hash: world.map().content_hash(),
            spec_hash: run_spec_hash(world, trajectory, noise, rig, agents),
        },
        records,
    })
}

/// Integrates the odometry records from the first ground-truth pose.
pub fn dead_reckon(log: &SensorLog) -> Vec<(f64, Pose2D)> {
    let mut pose = log.ground_truth().samples().first().map(|s| s.pose).unwrap_or_default();
    let mut out = Vec::new();
    for r in &log.records {
        if let LogRecord::Odometry { t, dx, dy, dtheta } = *r {
            pose = pose.compose(dx, dy, dtheta);
            out.push((t, pose));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Rect;
    use crate::simulate::world::{ObjectSpec, RoomSpec, WorldSpec};

    fn small_world() -> SimWorld {
        SimWorld::new(WorldSpec {
            width: 6.0,
            height: 4.0,
            resolution: 0.05,
            wall_thickness: 0.1,
            rooms: vec![RoomSpec { name: "r".into(), category: "office".into(), rect: Rect::from_bounds(0.2, 0.2, 5.8, 3.8) }],
            doors: vec![],
            objects: vec![ObjectSpec::new("desk", Rect::new(5.0, 3.2, 1.0, 0.5))],
            class_vocabulary: crate::worldmap::DEFAULT_CLASS_VOCABULARY.iter().map(|s| s.to_string()).collect(),
            dynamic_classes: vec!["person".into()],
        })
        .unwrap()
    }

    fn path() -> TrajectorySpec {
        TrajectorySpec {
            waypoints: vec![[1.0, 1.0], [4.5, 1.0], [4.5, 3.0], [1.0, 3.0]],
            ..Default::default()
        }
    }

    #[test]
    fn truth_follows_waypoints_at_speed() {
        let w = small_world();
        let poses = ground_truth_path(&path(), w.grid()).unwrap();
        let last = poses.last().unwrap();
        assert!((last.x - 1.0).abs() < 1e-9 && (last.y - 3.0).abs() < 1e-9);
        for p in poses.windows(2) {
            assert!((p[1].position() - p[0].position()).norm() <= 0.5 * 0.02 + 1e-12);
            assert!(angle_diff(p[1].theta, p[0].theta).abs() <= 0.8 * 0.02 + 1e-12);
        }
    }

    #[test]
    fn blocked_trajectory_is_an_error() {
        let w = small_world();
        let t = TrajectorySpec { waypoints: vec![[1.0, 1.0], [7.0, 1.0]], ..Default::default() };
        assert!(matches!(ground_truth_path(&t, w.grid()), Err(SimError::TrajectoryBlocked { .. })));
    }

    #[test]
    fn noiseless_odometry_reproduces_truth() {
        let w = small_world();
        let log = simulate_run(&w, &path(), &SensorNoiseSpec::noiseless(), &SensorRig::default(), &[], 3).unwrap();
        let truth = log.ground_truth();
        for (t, p) in dead_reckon(&log) {
            let g = truth.interpolate(t).unwrap();
            assert!((p.position() - g.position()).norm() < 1e-9);
            assert!(angle_diff(p.theta, g.theta).abs() < 1e-9);
        }
    }

    #[test]
    fn same_seed_same_log() {
        let w = small_world();
        let noise = SensorNoiseSpec::default();
        let a = simulate_run(&w, &path(), &noise, &SensorRig::default(), &[], 11).unwrap();
        let b = simulate_run(&w, &path(), &noise, &SensorRig::default(), &[], 11).unwrap();
        for (x, y) in a.to_ndjson().lines().zip(b.to_ndjson().lines()) {
            assert_eq!(x, y);
        }
        let c = simulate_run(&w, &path(), &noise, &SensorRig::default(), &[], 12).unwrap();
        assert_ne!(a.to_ndjson(), c.to_ndjson());
        let back = SensorLog::from_ndjson(&a.to_ndjson()).unwrap();
        assert_eq!(back.to_ndjson(), a.to_ndjson());
    }

    #[test]
    fn rates_follow_the_rig() {
        let w = small_world();
        let log = simulate_run(&w, &path(), &SensorNoiseSpec::default(), &SensorRig::default(), &[], 1).unwrap();
        let count = |f: fn(&LogRecord) -> bool| log.records.iter().filter(|r| f(r)).count();
        let gt = count(|r| matches!(r, LogRecord::GroundTruth { .. }));
        let scans = count(|r| matches!(r, LogRecord::Scan { .. }));
        let dets = count(|r| matches!(r, LogRecord::Detections { .. }));
        assert_eq!(scans, (gt - 1) / 5 + 1);
        assert_eq!(dets, (gt - 1) / 10 + 1);
    }

    #[test]
    fn agents_bounce_along_their_path() {
        let a = AgentSpec { waypoints: vec![[0.0, 0.0], [2.0, 0.0]], speed: 1.0, radius: 0.25 };
        assert!((a.position(1.0).x - 1.0).abs() < 1e-12);
        assert!((a.position(3.0).x - 1.0).abs() < 1e-12);
        assert!((a.position(4.0).x).abs() < 1e-12);
    }
}
