use serde::{Deserialize, Serialize};

use crate::error::SensorError;
use crate::geometry::{angle_diff, Vec2};
use crate::sensormodels::camera::CameraModel;

/// A detected object reduced to a planar bearing cone in the robot frame.
#[derive(Clone, Debug, PartialEq)]
pub struct Detection {
    pub class_label: String,
    pub confidence: f64,
    pub camera_id: String,
    pub bb_left: f64,
    pub bb_right: f64,
    /// Unit bearing of the box center column, robot frame.
    pub bearing: Vec2,
    pub half_angle: f64,
}

impl Detection {
    pub fn azimuth(&self) -> f64 {
        self.bearing.angle()
    }

    /// Whether a robot-frame azimuth lies within the detection cone.
    pub fn cone_contains(&self, azimuth: f64) -> bool {
        angle_diff(azimuth, self.azimuth()).abs() <= self.half_angle
    }
}

/// Detection as recorded: the raw bounding box columns.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RawDetection {
    #[serde(rename = "class")]
    pub class_label: String,
    pub confidence: f64,
    pub camera_id: String,
    pub bb_left: f64,
    pub bb_right: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct DetectionSet {
    pub timestamp: f64,
    pub detections: Vec<Detection>,
}

/// Projects a bounding box into a bearing cone.
pub fn detection_from_bbox(
    camera: &CameraModel,
    class_label: &str,
    confidence: f64,
    bb_left: f64,
    bb_right: f64,
) -> Result<Detection, SensorError> {
    if !(bb_left < bb_right) {
        return Err(SensorError::EmptyBox {
            left: bb_left,
            right: bb_right,
        });
    }
    let left = camera.column_azimuth(bb_left)?;
    let right = camera.column_azimuth(bb_right)?;
    let center = camera.column_azimuth(0.5 * (bb_left + bb_right))?;
    Ok(Detection {
        class_label: class_label.to_string(),
        confidence,
        camera_id: camera.id.clone(),
        bb_left,
        bb_right,
        bearing: Vec2::from_angle(center),
        half_angle: 0.5 * (left - right).abs(),
    })
}

impl RawDetection {
    pub fn resolve(&self, cameras: &[CameraModel]) -> Result<Detection, SensorError> {
        let camera = cameras
            .iter()
            .find(|c| c.id == self.camera_id)
            .ok_or_else(|| SensorError::BadCamera {
                id: self.camera_id.clone(),
                reason: "unknown camera".into(),
            })?;
        detection_from_bbox(camera, &self.class_label, self.confidence, self.bb_left, self.bb_right)
    }
}
