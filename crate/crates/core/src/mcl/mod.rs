mod config;
mod filter;
mod particles;

pub use config::{FilterConfig, Mode};
pub use filter::{Filter, FilterMaps, FilterStats};
pub use particles::{
    category_cells, effective_sample_size, estimate_pose, init_hierarchical, init_uniform, low_variance_resample,
    motion_update, systematic_indices, weight_update, weight_update_log, OdometryDelta, Particle, ParticleSet,
    PoseEstimate,
};
