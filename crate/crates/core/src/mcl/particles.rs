use std::f64::consts::TAU;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::FilterError;
use crate::geometry::{Pose2D, Vec2};
use crate::sensormodels::LIKELIHOOD_FLOOR;
use crate::worldmap::{OccupancyGrid, SemanticWorldMap};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Particle {
    pub pose: Pose2D,
    pub weight: f64,
}

/// Weighted pose hypotheses. Weights sum to one after every update.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParticleSet {
    pub particles: Vec<Particle>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OdometryDelta {
    pub timestamp: f64,
    pub dx: f64,
    pub dy: f64,
    pub dtheta: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoseEstimate {
    pub timestamp: f64,
    pub pose: Pose2D,
    /// Weighted positional covariance `[xx, xy, yy]`.
    pub cov_xy: [f64; 3],
    /// Circular standard deviation of the heading, `sqrt(-2 ln R)`.
    pub theta_spread: f64,
}

impl ParticleSet {
    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn weight_sum(&self) -> f64 {
        self.particles.iter().map(|p| p.weight).sum()
    }

    pub fn set_uniform_weights(&mut self) {
        let w = 1.0 / self.particles.len() as f64;
        for p in &mut self.particles {
            p.weight = w;
        }
    }
}

fn sample_in_cells<R: Rng + ?Sized>(
    grid: &OccupancyGrid,
    cells: &[usize],
    n: usize,
    rng: &mut R,
) -> ParticleSet {
    let res = grid.resolution();
    let o = grid.origin();
    let w = 1.0 / n as f64;
    let particles = (0..n)
        .map(|_| {
            let cell = cells[rng.random_range(0..cells.len())];
            let (col, row) = (cell % grid.width(), cell / grid.width());
            let x = o.x + (col as f64 + rng.random::<f64>()) * res;
            let y = o.y + (row as f64 + rng.random::<f64>()) * res;
            let theta = rng.random::<f64>() * TAU;
            Particle {
                pose: Pose2D::new(x, y, theta),
                weight: w,
            }
        })
        .collect();
    ParticleSet { particles }
}

/// `n` particles uniformly over the free cells, uniform headings.
pub fn init_uniform<R: Rng + ?Sized>(
    grid: &OccupancyGrid,
    n: usize,
    rng: &mut R,
) -> Result<ParticleSet, FilterError> {
    if n == 0 {
        return Err(FilterError::NoParticles);
    }
    let cells = grid.free_cell_indices();
    if cells.is_empty() {
        return Err(FilterError::NoFreeCells);
    }
    Ok(sample_in_cells(grid, &cells, n, rng))
}

/// Free cells whose centers lie in a room of `category`.
pub fn category_cells(grid: &OccupancyGrid, map: &SemanticWorldMap, category: &str) -> Vec<usize> {
    let rooms: Vec<_> = map.rooms_with_category(category).collect();
    grid.free_cell_indices()
        .into_iter()
        .filter(|&i| {
            let c = grid.cell_center(i % grid.width(), i / grid.width());
            rooms.iter().any(|r| r.region.contains(c))
        })
        .collect()
}

/// Like [`init_uniform`], restricted to free cells inside rooms of `category`.
pub fn init_hierarchical<R: Rng + ?Sized>(
    grid: &OccupancyGrid,
    map: &SemanticWorldMap,
    category: &str,
    n: usize,
    rng: &mut R,
) -> Result<ParticleSet, FilterError> {
    if n == 0 {
        return Err(FilterError::NoParticles);
    }
    let cells = category_cells(grid, map, category);
    if cells.is_empty() {
        return Err(FilterError::NoSuchCategory(category.to_string()));
    }
    Ok(sample_in_cells(grid, &cells, n, rng))
}

/// Composes every particle with the noisy increment. Per-component noise
/// has standard deviation `sigma[i] * max(|delta[i]|, floor)`.
pub fn motion_update<R: Rng + ?Sized>(
    set: &mut ParticleSet,
    delta: &OdometryDelta,
    sigma: [f64; 3],
    floor: f64,
    rng: &mut R,
) {
    let sx = sigma[0] * delta.dx.abs().max(floor);
    let sy = sigma[1] * delta.dy.abs().max(floor);
    let st = sigma[2] * delta.dtheta.abs().max(floor);
    for p in &mut set.particles {
        let nx: f64 = rng.sample(StandardNormal);
        let ny: f64 = rng.sample(StandardNormal);
        let nt: f64 = rng.sample(StandardNormal);
        p.pose = p
            .pose
            .compose(delta.dx + sx * nx, delta.dy + sy * ny, delta.dtheta + st * nt);
    }
}

/// Multiplies weights by `exp(log_likelihood)` and renormalizes. Returns
/// true when every likelihood sat at the floor, in which case weights are
/// reset to uniform.
pub fn weight_update_log<F>(set: &mut ParticleSet, mut log_likelihood: F) -> bool
where
    F: FnMut(&Pose2D) -> f64,
{
    let ln_floor = LIKELIHOOD_FLOOR.ln();
    let logs: Vec<f64> = set
        .particles
        .iter()
        .map(|p| log_likelihood(&p.pose).max(ln_floor))
        .collect();
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max <= ln_floor || !max.is_finite() {
        set.set_uniform_weights();
        return true;
    }
    let mut sum = 0.0;
    for (p, l) in set.particles.iter_mut().zip(&logs) {
        p.weight *= (l - max).exp();
        sum += p.weight;
    }
    if !(sum > 0.0 && sum.is_finite()) {
        set.set_uniform_weights();
        return true;
    }
    for p in &mut set.particles {
        p.weight /= sum;
    }
    false
}

/// [`weight_update_log`] for a likelihood given directly.
pub fn weight_update<F>(set: &mut ParticleSet, mut likelihood: F) -> bool
where
    F: FnMut(&Pose2D) -> f64,
{
    weight_update_log(set, |p| likelihood(p).ln())
}

pub fn effective_sample_size(set: &ParticleSet) -> f64 {
    1.0 / set.particles.iter().map(|p| p.weight * p.weight).sum::<f64>()
}

/// Systematic resampling with one uniform offset in `[0, 1/N)`.
pub fn low_variance_resample<R: Rng + ?Sized>(set: &ParticleSet, rng: &mut R) -> ParticleSet {
    let n = set.len();
    let step = 1.0 / n as f64;
    let start = rng.random::<f64>() * step;
    ParticleSet {
        particles: systematic_indices(set, start)
            .into_iter()
            .map(|i| Particle {
                pose: set.particles[i].pose,
                weight: step,
            })
            .collect(),
    }
}

/// Indices chosen by systematic resampling with pointer offset `start`.
pub fn systematic_indices(set: &ParticleSet, start: f64) -> Vec<usize> {
    let n = set.len();
    let step = 1.0 / n as f64;
    let mut out = Vec::with_capacity(n);
    let mut i = 0;
    let mut cum = set.particles[0].weight;
    for m in 0..n {
        let u = start + m as f64 * step;
        while u >= cum && i + 1 < n {
            i += 1;
            cum += set.particles[i].weight;
        }
        out.push(i);
    }
    out
}

/// Weighted mean position and circular-mean heading.
pub fn estimate_pose(set: &ParticleSet, timestamp: f64) -> PoseEstimate {
    let (mut mx, mut my, mut s, mut c, mut wsum) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for p in &set.particles {
        mx += p.weight * p.pose.x;
        my += p.weight * p.pose.y;
        s += p.weight * p.pose.theta.sin();
        c += p.weight * p.pose.theta.cos();
        wsum += p.weight;
    }
    mx /= wsum;
    my /= wsum;
    let (mut cxx, mut cxy, mut cyy) = (0.0, 0.0, 0.0);
    for p in &set.particles {
        let d = Vec2::new(p.pose.x - mx, p.pose.y - my);
        cxx += p.weight * d.x * d.x;
        cxy += p.weight * d.x * d.y;
        cyy += p.weight * d.y * d.y;
    }
    let r = (s.hypot(c) / wsum).min(1.0);
    PoseEstimate {
        timestamp,
        pose: Pose2D::new(mx, my, s.atan2(c)),
        cov_xy: [cxx / wsum, cxy / wsum, cyy / wsum],
        theta_spread: if r > 0.0 { (-2.0 * r.ln()).max(0.0).sqrt() } else { f64::INFINITY },
    }
}
