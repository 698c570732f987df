use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::SimError;
use crate::geometry::Pose2D;
use crate::semantics::{build_feature_vector, TrainingRow};
use crate::sensorlog::LogHeader;
use crate::sensormodels::DetectionSet;
use crate::simulate::scene::{simulate_detections, Frame, SimWorld};
use crate::simulate::sensors::{SensorNoiseSpec, SensorRig};

/// Classifier training rows: for each room, `per_room` random free poses,
/// each observed for `window` detection frames.
pub fn generate_training_rows(
    world: &SimWorld,
    rig: &SensorRig,
    noise: &SensorNoiseSpec,
    per_room: usize,
    window: usize,
    tau_conf: f64,
    seed: u64,
) -> Result<Vec<TrainingRow>, SimError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vocab = world.map().class_vocabulary();
    let mut rows = Vec::new();
    for room in world.map().rooms() {
        let (x0, y0, x1, y1) = room.region.bounds();
        let inset = 0.4f64.min(0.25 * (x1 - x0)).min(0.25 * (y1 - y0));
        for _ in 0..per_room {
            let pose = (0..1000)
                .map(|_| {
                    Pose2D::new(
                        rng.random_range(x0 + inset..x1 - inset),
                        rng.random_range(y0 + inset..y1 - inset),
                        rng.random_range(0.0..std::f64::consts::TAU),
                    )
                })
                .find(|p| world.grid().is_free_at(p.position()) && room.region.contains(p.position()))
                .ok_or_else(|| SimError::BadSpec(format!("room {:?} has no free interior", room.name)))?;
            let sets: Vec<DetectionSet> = (0..window)
                .map(|_| {
                    let frame = Frame {
                        displaced: world.draw_displacements(&mut rng),
                        agents: vec![],
                    };
                    let raw = simulate_detections(world, &pose, &rig.cameras, noise, &frame, &mut rng);
                    DetectionSet {
                        timestamp: 0.0,
                        detections: raw.iter().filter_map(|d| d.resolve(&rig.cameras).ok()).collect(),
                    }
                })
                .collect();
            let fv = build_feature_vector(&sets, vocab, tau_conf);
            rows.push(TrainingRow {
                counts: vocab
                    .iter()
                    .zip(&fv.counts)
                    .filter(|(_, &n)| n > 0)
                    .map(|(c, &n)| (c.clone(), n))
                    .collect(),
                category: room.category.clone(),
            });
        }
    }
    Ok(rows)
}

/// Header fields the simulator fills from a rig (used when writing logs by hand).
pub fn header_for(world: &SimWorld, rig: &SensorRig, seed: u64) -> LogHeader {
    LogHeader {
        schema_version: crate::sensorlog::SCHEMA_VERSION,
        seed,
        cameras: rig.cameras.clone(),
        lidar: rig.lidar.clone(),
        grid_hash: world.grid().content_hash(),
        map_hash: world.map().content_hash(),
        spec_hash: String::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::semantics::RoomClassifier;
    use crate::simulate::world::{default_world_spec, generate_world};

    #[test]
    fn rows_cover_every_room_and_train_a_classifier() {
        let world = SimWorld::new(crate::simulate::world::twin_room_world_spec("plant")).unwrap();
        let rows = generate_training_rows(&world, &SensorRig::default(), &SensorNoiseSpec::default(), 4, 5, 0.5, 1).unwrap();
        assert_eq!(rows.len(), 4 * world.map().rooms().len());
        let c = RoomClassifier::from_rows(&rows, world.map().class_vocabulary(), 1).unwrap();
        assert_eq!(c.len(), rows.len());
        let _ = generate_world(&default_world_spec(1)).unwrap();
    }
}
