use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::error::SimError;
use crate::sensorlog::LidarConfig;
use crate::sensormodels::CameraModel;

/// Clipped Gaussian on `[0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceSpec {
    pub mean: f64,
    pub sigma: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensorNoiseSpec {
    pub lidar_range_sigma: f64,
    /// Translational odometry noise, meters per sqrt(meter) travelled.
    pub odom_trans_sigma: f64,
    /// Rotational odometry noise, radians per sqrt(radian) turned.
    pub odom_rot_sigma: f64,
    /// Extra rotational noise, radians per sqrt(meter) travelled.
    pub odom_rot_per_meter: f64,
    pub bearing_sigma: f64,
    pub miss_probability: f64,
    /// Expected false positives per detection frame.
    pub false_positive_rate: f64,
    pub true_positive_confidence: ConfidenceSpec,
    pub false_positive_confidence: ConfidenceSpec,
    /// Objects farther than this are never detected.
    pub detection_range: f64,
}

impl Default for SensorNoiseSpec {
    fn default() -> Self {
        Self {
            lidar_range_sigma: 0.02,
            odom_trans_sigma: 0.02,
            odom_rot_sigma: 0.02,
            odom_rot_per_meter: 0.01,
            bearing_sigma: 0.02,
            miss_probability: 0.1,
            false_positive_rate: 0.1,
            true_positive_confidence: ConfidenceSpec { mean: 0.85, sigma: 0.1 },
            false_positive_confidence: ConfidenceSpec { mean: 0.4, sigma: 0.15 },
            detection_range: 10.0,
        }
    }
}

impl SensorNoiseSpec {
    /// Every noise source off: exact odometry, ranges and bearings, no
    /// misses and no false positives.
    pub fn noiseless() -> Self {
        Self {
            lidar_range_sigma: 0.0,
            odom_trans_sigma: 0.0,
            odom_rot_sigma: 0.0,
            odom_rot_per_meter: 0.0,
            bearing_sigma: 0.0,
            miss_probability: 0.0,
            false_positive_rate: 0.0,
            true_positive_confidence: ConfidenceSpec { mean: 0.9, sigma: 0.0 },
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let sigmas = [
            self.lidar_range_sigma,
            self.odom_trans_sigma,
            self.odom_rot_sigma,
            self.odom_rot_per_meter,
            self.bearing_sigma,
            self.true_positive_confidence.sigma,
            self.false_positive_confidence.sigma,
            self.false_positive_rate,
        ];
        if sigmas.iter().any(|s| !(*s >= 0.0 && s.is_finite())) {
            return Err(SimError::BadSpec("noise scales must be finite and non-negative".into()));
        }
        if !(0.0..=1.0).contains(&self.miss_probability) {
            return Err(SimError::BadSpec("miss probability must be in [0, 1]".into()));
        }
        if !(self.detection_range > 0.0) {
            return Err(SimError::BadSpec("detection range must be positive".into()));
        }
        Ok(())
    }
}

/// Sensor layout and rates of the simulated robot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensorRig {
    pub cameras: Vec<CameraModel>,
    pub lidar: LidarConfig,
    pub odometry_rate: f64,
    pub scan_rate: f64,
    pub detection_rate: f64,
}

impl Default for SensorRig {
    fn default() -> Self {
        Self {
            cameras: default_cameras(),
            lidar: LidarConfig::default(),
            odometry_rate: 50.0,
            scan_rate: 10.0,
            detection_rate: 5.0,
        }
    }
}

impl SensorRig {
    pub fn validate(&self) -> Result<(), SimError> {
        for c in &self.cameras {
            c.validate().map_err(|e| SimError::BadSpec(e.to_string()))?;
        }
        for rate in [self.odometry_rate, self.scan_rate, self.detection_rate] {
            if !(rate > 0.0 && rate.is_finite()) {
                return Err(SimError::BadSpec("sensor rates must be positive".into()));
            }
        }
        if self.lidar.count == 0 || !(self.lidar.range_max > 0.0) {
            return Err(SimError::BadSpec("lidar needs beams and a positive range".into()));
        }
        Ok(())
    }
}

/// Four 640-pixel cameras with 90° fields of view facing front, left, back and right.
pub fn default_cameras() -> Vec<CameraModel> {
    ["front", "left", "back", "right"]
        .iter()
        .enumerate()
        .map(|(k, id)| CameraModel {
            id: id.to_string(),
            fx: 320.0,
            cx: 320.0,
            width: 640,
            pose: [0.0, 0.0, k as f64 * FRAC_PI_2],
        })
        .collect()
}
