use serde::{Deserialize, Serialize};

use crate::error::SensorError;
use crate::geometry::{angle_diff, Vec2};

/// Planar pinhole camera: horizontal intrinsics plus its pose on the robot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CameraModel {
    pub id: String,
    pub fx: f64,
    pub cx: f64,
    pub width: u32,
    /// `[x, y, yaw]` in the robot frame.
    pub pose: [f64; 3],
}

impl CameraModel {
    pub fn new(id: impl Into<String>, fx: f64, cx: f64, width: u32, pose: [f64; 3]) -> Result<Self, SensorError> {
        let cam = Self {
            id: id.into(),
            fx,
            cx,
            width,
            pose,
        };
        cam.validate()?;
        Ok(cam)
    }

    pub fn validate(&self) -> Result<(), SensorError> {
        let bad = |reason: &str| SensorError::BadCamera {
            id: self.id.clone(),
            reason: reason.to_string(),
        };
        if !(self.fx > 0.0 && self.fx.is_finite()) {
            return Err(bad("fx must be positive"));
        }
        if !(self.cx >= 0.0 && self.cx < f64::from(self.width)) {
            return Err(bad("cx must lie in [0, width)"));
        }
        if !self.pose.iter().all(|v| v.is_finite()) {
            return Err(bad("pose must be finite"));
        }
        Ok(())
    }

    pub fn yaw(&self) -> f64 {
        self.pose[2]
    }

    /// Robot-frame azimuth of the ray through pixel column `u`.
    pub fn column_azimuth(&self, u: f64) -> Result<f64, SensorError> {
        if !(u >= 0.0 && u <= f64::from(self.width)) {
            return Err(SensorError::ColumnOutOfRange {
                column: u,
                width: self.width,
            });
        }
        Ok(((self.cx - u) / self.fx).atan() + self.yaw())
    }

    /// Pixel column seen at a camera-frame azimuth (inverse of the projection).
    pub fn azimuth_to_column(&self, camera_azimuth: f64) -> f64 {
        self.cx - self.fx * camera_azimuth.tan()
    }

    /// Half of the horizontal field of view.
    pub fn half_fov(&self) -> (f64, f64) {
        let left = (self.cx / self.fx).atan();
        let right = ((f64::from(self.width) - self.cx) / self.fx).atan();
        (left, right)
    }

    /// Whether a robot-frame bearing angle falls inside the image.
    pub fn sees(&self, robot_azimuth: f64) -> bool {
        let a = angle_diff(robot_azimuth, self.yaw());
        let (left, right) = self.half_fov();
        a <= left && a >= -right
    }
}

/// Unit bearing in the robot frame for pixel column `u`.
pub fn pixel_to_bearing(camera: &CameraModel, u: f64) -> Result<Vec2, SensorError> {
    Ok(Vec2::from_angle(camera.column_azimuth(u)?))
}
