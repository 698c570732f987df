use serde::{Deserialize, Serialize};

use crate::error::SensorError;
use crate::geometry::{Pose2D, Vec2};
use crate::worldmap::DistanceField;

/// Floor applied to every likelihood inside a geometric mean.
pub const LIKELIHOOD_FLOOR: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LidarScan {
    pub timestamp: f64,
    /// Beam azimuths in the robot frame.
    pub angles: Vec<f64>,
    pub ranges: Vec<f64>,
    pub range_max: f64,
    /// Per-beam validity; invalid beams are ignored by the likelihood.
    pub valid: Vec<bool>,
}

impl LidarScan {
    /// Builds a scan, marking non-finite, non-positive and max-range
    /// readings invalid.
    pub fn new(
        timestamp: f64,
        angles: Vec<f64>,
        ranges: Vec<f64>,
        range_max: f64,
    ) -> Result<Self, SensorError> {
        if angles.len() != ranges.len() {
            return Err(SensorError::ScanLength {
                angles: angles.len(),
                ranges: ranges.len(),
            });
        }
        let valid = ranges
            .iter()
            .map(|&r| r.is_finite() && r > 0.0 && r < range_max)
            .collect();
        Ok(Self {
            timestamp,
            angles,
            ranges,
            range_max,
            valid,
        })
    }

    pub fn len(&self) -> usize {
        self.ranges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranges.is_empty()
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|v| **v).count()
    }

    /// Robot-frame endpoints of the beams used at `stride`: every beam whose
    /// index is a multiple of `stride`, if valid.
    pub fn strided_endpoints(&self, stride: usize) -> Vec<Vec2> {
        let stride = stride.max(1);
        (0..self.len())
            .step_by(stride)
            .filter(|&k| self.valid[k])
            .map(|k| Vec2::from_angle(self.angles[k]) * self.ranges[k])
            .collect()
    }
}

/// Beam end point density: `exp(-edt² / (2σ²)) / sqrt(2πσ)`.
pub fn beam_likelihood(endpoint: Vec2, field: &DistanceField, sigma_obs: f64) -> f64 {
    let d = field.at_world(endpoint);
    (-(d * d) / (2.0 * sigma_obs * sigma_obs)).exp() / (2.0 * std::f64::consts::PI * sigma_obs).sqrt()
}

/// Geometric mean of the beam likelihoods of the strided valid beams, or
/// the floor when none qualify.
pub fn scan_likelihood(
    scan: &LidarScan,
    pose: &Pose2D,
    field: &DistanceField,
    sigma_obs: f64,
    beam_stride: usize,
) -> f64 {
    BeamModel::new(sigma_obs).likelihood(&scan.strided_endpoints(beam_stride), pose, field)
}

/// Precomputed constants of the beam end point model.
#[derive(Clone, Copy, Debug)]
pub struct BeamModel {
    ln_norm: f64,
    inv_two_var: f64,
    ln_floor: f64,
}

impl BeamModel {
    pub fn new(sigma_obs: f64) -> Self {
        Self {
            ln_norm: -0.5 * (2.0 * std::f64::consts::PI * sigma_obs).ln(),
            inv_two_var: 1.0 / (2.0 * sigma_obs * sigma_obs),
            ln_floor: LIKELIHOOD_FLOOR.ln(),
        }
    }

    /// Mean log-likelihood of robot-frame `endpoints` seen from `pose`.
    #[inline]
    pub fn mean_log_likelihood(&self, endpoints: &[Vec2], pose: &Pose2D, field: &DistanceField) -> f64 {
        if endpoints.is_empty() {
            return self.ln_floor;
        }
        let (s, c) = pose.theta.sin_cos();
        let mut sum = 0.0;
        for e in endpoints {
            let p = Vec2::new(pose.x + c * e.x - s * e.y, pose.y + s * e.x + c * e.y);
            let d = field.at_world(p);
            sum += (self.ln_norm - d * d * self.inv_two_var).max(self.ln_floor);
        }
        sum / endpoints.len() as f64
    }

    pub fn likelihood(&self, endpoints: &[Vec2], pose: &Pose2D, field: &DistanceField) -> f64 {
        self.mean_log_likelihood(endpoints, pose, field).exp()
    }
}
