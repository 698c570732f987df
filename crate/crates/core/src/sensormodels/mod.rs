//! Observation likelihoods for LiDAR scans and semantic detections.

pub mod camera;
pub mod detection;
pub mod lidar;
pub mod masking;
pub mod semantic;

pub use camera::{pixel_to_bearing, CameraModel};
pub use detection::{detection_from_bbox, Detection, DetectionSet, RawDetection};
pub use lidar::{beam_likelihood, scan_likelihood, BeamModel, LidarScan, LIKELIHOOD_FLOOR};
pub use masking::mask_dynamic_beams;
pub use semantic::{
    bearing_set_distance, semantic_distance, semantic_likelihood, PreparedDetections, D_MISS,
};
