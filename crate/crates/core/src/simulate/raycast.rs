use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::SimError;
use crate::geometry::{Pose2D, Vec2};
use crate::sensorlog::LidarConfig;
use crate::sensormodels::LidarScan;
use crate::worldmap::OccupancyGrid;

/// Disc obstacle that exists only for the LiDAR (and the camera), not in any map.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Disc {
    pub center: Vec2,
    pub radius: f64,
}

/// Distance along the ray from `origin` in direction `dir` (unit) to the
/// first non-free cell, walking the exact cell sequence. `None` if nothing
/// is hit within `range_max` or the ray leaves the grid.
pub fn cast_ray(grid: &OccupancyGrid, origin: Vec2, dir: Vec2, range_max: f64) -> Option<f64> {
    let res = grid.resolution();
    let o = grid.origin();
    let gx = (origin.x - o.x) / res;
    let gy = (origin.y - o.y) / res;
    let (mut c, mut r) = (gx.floor() as i64, gy.floor() as i64);
    if !grid.in_bounds(c, r) {
        return None;
    }
    if !grid.get(c as usize, r as usize).is_free() {
        return Some(0.0);
    }
    let step_c: i64 = if dir.x > 0.0 { 1 } else { -1 };
    let step_r: i64 = if dir.y > 0.0 { 1 } else { -1 };
    let inv = |d: f64| if d != 0.0 { 1.0 / d.abs() } else { f64::INFINITY };
    let (dt_c, dt_r) = (inv(dir.x), inv(dir.y));
    let first = |d: f64, g: f64, i: i64, dt: f64| {
        if d > 0.0 {
            (i as f64 + 1.0 - g) * dt
        } else if d < 0.0 {
            (g - i as f64) * dt
        } else {
            f64::INFINITY
        }
    };
    let mut t_c = first(dir.x, gx, c, dt_c);
    let mut t_r = first(dir.y, gy, r, dt_r);
    let limit = range_max / res;
    loop {
        let t = if t_c < t_r {
            c += step_c;
            let t = t_c;
            t_c += dt_c;
            t
        } else {
            r += step_r;
            let t = t_r;
            t_r += dt_r;
            t
        };
        if t > limit || !grid.in_bounds(c, r) {
            return None;
        }
        if !grid.get(c as usize, r as usize).is_free() {
            return Some(t * res);
        }
    }
}

fn ray_disc(origin: Vec2, dir: Vec2, disc: &Disc) -> Option<f64> {
    let oc = origin - disc.center;
    let b = oc.dot(dir);
    let c = oc.dot(oc) - disc.radius * disc.radius;
    if c <= 0.0 {
        return Some(0.0);
    }
    let disc2 = b * b - c;
    if disc2 < 0.0 {
        return None;
    }
    let t = -b - disc2.sqrt();
    (t >= 0.0).then_some(t)
}

/// Noise-free and noisy ranges for every beam. No-hit beams read `range_max`.
pub fn simulate_ranges<R: Rng + ?Sized>(
    grid: &OccupancyGrid,
    pose: &Pose2D,
    lidar: &LidarConfig,
    range_sigma: f64,
    discs: &[Disc],
    rng: &mut R,
) -> Result<Vec<f64>, SimError> {
    if !grid.is_free_at(pose.position()) {
        return Err(SimError::PoseInObstacle { x: pose.x, y: pose.y });
    }
    let noise = Normal::new(0.0, range_sigma.max(0.0)).map_err(|e| SimError::BadSpec(e.to_string()))?;
    let origin = pose.position();
    Ok(lidar
        .angles()
        .iter()
        .map(|a| {
            let dir = Vec2::from_angle(pose.theta + a);
            let wall = cast_ray(grid, origin, dir, lidar.range_max);
            let hit = discs
                .iter()
                .filter_map(|d| ray_disc(origin, dir, d))
                .chain(wall)
                .reduce(f64::min);
            match hit {
                Some(r) if r < lidar.range_max => {
                    let n = if range_sigma > 0.0 { noise.sample(rng) } else { 0.0 };
                    let r = (r + n).clamp(1e-3, lidar.range_max);
                    // Compact, platform-independent text in the log.
                    (r * 1e4).round() / 1e4
                }
                _ => lidar.range_max,
            }
        })
        .collect())
}

/// One LiDAR scan seen from `pose`.
pub fn simulate_scan<R: Rng + ?Sized>(
    grid: &OccupancyGrid,
    pose: &Pose2D,
    lidar: &LidarConfig,
    range_sigma: f64,
    discs: &[Disc],
    timestamp: f64,
    rng: &mut R,
) -> Result<LidarScan, SimError> {
    let ranges = simulate_ranges(grid, pose, lidar, range_sigma, discs, rng)?;
    LidarScan::new(timestamp, lidar.angles(), ranges, lidar.range_max)
        .map_err(|e| SimError::BadSpec(e.to_string()))
}
