//! Room-category inference and semantic stability analysis.

pub mod classifier;
pub mod stability;

pub use classifier::{build_feature_vector, FeatureVector, RoomClassifier, TrainingRow};
pub use stability::{
    stability_scores, stable_class_set, ClassStability, StabilityReport, STABILITY_THRESHOLD,
};
