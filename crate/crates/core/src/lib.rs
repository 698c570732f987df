//! Floor-plan localization with LiDAR, odometry and semantic detections.

pub mod error;
pub mod geometry;
pub mod worldmap;

pub use error::{Error, Result};
pub use geometry::{Pose2D, Rect, Vec2};
pub mod sensormodels;
pub mod mcl;
pub mod semantics;
pub mod simulate;
pub mod sensorlog;
pub mod trajectory;
pub mod eval;
