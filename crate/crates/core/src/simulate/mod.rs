mod raycast;
mod run;
mod scene;
mod sensors;
mod tours;
mod training;
mod world;

pub use raycast::{cast_ray, simulate_ranges, simulate_scan, Disc};
pub use run::{dead_reckon, ground_truth_path, run_spec_hash, simulate_run, AgentSpec, TrajectorySpec};
pub use scene::{simulate_detections, Frame, SimObject, SimWorld};
pub use sensors::{default_cameras, ConfidenceSpec, SensorNoiseSpec, SensorRig};
pub use tours::{crossing_agent, default_tours, room_tour, twin_room_tour, DEFAULT_TOURS};
pub use training::{generate_training_rows, header_for};
pub use world::{
    default_world_spec, furnish_room, generate_world, twin_room_world_spec, Displacement, DoorSpec, ObjectSpec,
    RoomSpec, WorldSpec, DEFAULT_CATEGORIES, MARGIN, TWIN_SHIFT,
};
