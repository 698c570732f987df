use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::eval::metrics::{evaluate, ConvergenceCriteria, RunResult};
use crate::eval::replay::{replay, ReplayOutput};
use crate::mcl::{FilterConfig, FilterMaps};
use crate::semantics::{RoomClassifier, TrainingRow};
use crate::sensorlog::SensorLog;
use crate::simulate::{
    default_tours, default_world_spec, generate_training_rows, simulate_run, AgentSpec, SensorNoiseSpec, SensorRig,
    SimWorld, TrajectorySpec, WorldSpec,
};
use crate::worldmap::{compute_distance_field, DistanceField, VisibilityIndex, DEFAULT_ANGULAR_RESOLUTION};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingSpec {
    pub samples_per_room: usize,
    pub window: usize,
    pub seed: u64,
}

impl Default for TrainingSpec {
    fn default() -> Self {
        Self {
            samples_per_room: 20,
            window: 5,
            seed: 7,
        }
    }
}

/// The single configuration document read by every command. Each section
/// defaults independently.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub filter: FilterConfig,
    pub world: WorldSpec,
    pub trajectory: TrajectorySpec,
    pub agents: Vec<AgentSpec>,
    pub noise: SensorNoiseSpec,
    pub rig: SensorRig,
    pub criteria: ConvergenceCriteria,
    pub training: TrainingSpec,
    /// Bin width of the semantic visibility index, radians.
    pub angular_resolution: f64,
    pub seeds: Vec<u64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let world = default_world_spec(1);
        let trajectory = default_tours(&world)
            .ok()
            .and_then(|t| t.into_iter().next())
            .unwrap_or_default();
        Self {
            filter: FilterConfig::default(),
            world,
            trajectory,
            agents: Vec::new(),
            noise: SensorNoiseSpec::default(),
            rig: SensorRig::default(),
            criteria: ConvergenceCriteria::default(),
            training: TrainingSpec::default(),
            angular_resolution: DEFAULT_ANGULAR_RESOLUTION,
            seeds: (0..5).collect(),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, Error> {
        let config: Self = serde_json::from_str(text)?;
        config.filter.validate()?;
        config.criteria.validate()?;
        config.noise.validate()?;
        config.rig.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, Error> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

/// Everything derived from a world spec that the filter and the simulator need.
pub struct WorldAssets {
    pub world: SimWorld,
    pub field: DistanceField,
    pub index: VisibilityIndex,
    pub training_rows: Vec<TrainingRow>,
    pub classifier: RoomClassifier,
}

impl WorldAssets {
    /// Builds the simulator world, distance field, class visibility index
    /// and a room classifier trained on simulated views. With `cache_dir`
    /// both visibility indices are cached there by content hash.
    pub fn build(config: &RunConfig, cache_dir: Option<&Path>) -> Result<Self, Error> {
        let world = match cache_dir {
            Some(dir) => {
                let path = dir.join(format!("objects-{}.json", &config.world.content_hash()[..16]));
                SimWorld::with_cache(config.world.clone(), &path)?
            }
            None => SimWorld::new(config.world.clone())?,
        };
        let field = compute_distance_field(world.grid(), config.filter.r_max)?;
        let index = match cache_dir {
            Some(dir) => {
                let path = dir.join(format!("classes-{}.json", &world.map().content_hash()[..16]));
                VisibilityIndex::load_or_build(world.grid(), world.map(), config.angular_resolution, &path)?.0
            }
            None => VisibilityIndex::build(world.grid(), world.map(), config.angular_resolution)?,
        };
        let t = &config.training;
        let training_rows = generate_training_rows(
            &world,
            &config.rig,
            &config.noise,
            t.samples_per_room,
            t.window,
            config.filter.tau_conf,
            t.seed,
        )?;
        let classifier = RoomClassifier::from_rows(&training_rows, world.map().class_vocabulary(), config.filter.knn_k)?;
        Ok(Self {
            world,
            field,
            index,
            training_rows,
            classifier,
        })
    }

    pub fn maps(&self) -> FilterMaps<'_> {
        FilterMaps {
            grid: self.world.grid(),
            field: &self.field,
            map: self.world.map(),
            index: &self.index,
            classifier: Some(&self.classifier),
        }
    }
}

/// One simulated run replayed through the filter and scored.
pub struct Trial {
    pub log: SensorLog,
    pub output: ReplayOutput,
    pub result: RunResult,
}

/// Simulates the configured trajectory with `seed`, then localizes with
/// the same seed.
pub fn run_trial(assets: &WorldAssets, config: &RunConfig, seed: u64) -> Result<Trial, Error> {
    let log = simulate_run(&assets.world, &config.trajectory, &config.noise, &config.rig, &config.agents, seed)?;
    let output = replay(&log, &config.filter, assets.maps(), seed)?;
    let result = evaluate(&output.estimates, &log.ground_truth(), &config.criteria)?;
    Ok(Trial { log, output, result })
}
