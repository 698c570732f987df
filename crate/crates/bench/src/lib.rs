//! Fixtures shared by the benchmarks.

use floorloc::mcl::{init_uniform, ParticleSet};
use floorloc::sensormodels::{DetectionSet, LidarScan};
use floorloc::simulate::{default_cameras, simulate_detections, simulate_scan, Frame, SensorNoiseSpec, SimWorld, WorldSpec};
use floorloc::worldmap::{compute_distance_field, DistanceField, VisibilityIndex, DEFAULT_ANGULAR_RESOLUTION};
use floorloc::Pose2D;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub struct Scene {
    pub world: SimWorld,
    pub field: DistanceField,
    pub index: VisibilityIndex,
    pub particles: ParticleSet,
    pub scan: LidarScan,
    pub detections: DetectionSet,
}

impl Scene {
    /// World, maps, `n` uniform particles and one scan plus one detection
    /// set seen from `pose`.
    pub fn new(spec: WorldSpec, pose: Pose2D, n: usize) -> Self {
        let world = SimWorld::new(spec).expect("world");
        let field = compute_distance_field(world.grid(), 15.0).expect("field");
        let index = VisibilityIndex::build(world.grid(), world.map(), DEFAULT_ANGULAR_RESOLUTION).expect("index");
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let particles = init_uniform(world.grid(), n, &mut rng).expect("particles");
        let lidar = floorloc::sensorlog::LidarConfig::default();
        let scan = simulate_scan(world.grid(), &pose, &lidar, 0.02, &[], 0.0, &mut rng).expect("scan");
        let cameras = default_cameras();
        let raw = simulate_detections(&world, &pose, &cameras, &SensorNoiseSpec::default(), &Frame::default(), &mut rng);
        let detections = DetectionSet {
            timestamp: 0.0,
            detections: raw.iter().map(|d| d.resolve(&cameras).expect("camera")).collect(),
        };
        Self { world, field, index, particles, scan, detections }
    }
}
