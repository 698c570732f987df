use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::FilterError;
use crate::mcl::config::FilterConfig;
use crate::mcl::particles::{
    effective_sample_size, estimate_pose, init_hierarchical, init_uniform, low_variance_resample, motion_update,
    weight_update_log, OdometryDelta, ParticleSet, PoseEstimate,
};
use crate::semantics::{build_feature_vector, RoomClassifier};
use crate::sensormodels::{mask_dynamic_beams, BeamModel, DetectionSet, LidarScan, PreparedDetections};
use crate::worldmap::{DistanceField, OccupancyGrid, SemanticWorldMap, VisibilityIndex};

/// Read-only inputs shared by every filter instance on one world.
#[derive(Clone, Copy)]
pub struct FilterMaps<'a> {
    pub grid: &'a OccupancyGrid,
    pub field: &'a DistanceField,
    pub map: &'a SemanticWorldMap,
    pub index: &'a VisibilityIndex,
    /// Required by the hierarchical modes.
    pub classifier: Option<&'a RoomClassifier>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FilterStats {
    pub odometry_events: usize,
    pub scan_events: usize,
    pub detection_events: usize,
    pub scan_updates: usize,
    pub semantic_updates: usize,
    pub resamples: usize,
    pub degenerate_updates: usize,
    pub dropped_events: usize,
    pub masked_beams: usize,
    /// Category chosen by the room classifier, once it has run.
    pub room_category: Option<String>,
    pub hierarchical_fallback: bool,
}

#[derive(Clone, Copy, Debug, Default)]
struct StreamClock(Option<f64>);

impl StreamClock {
    fn accept(&mut self, t: f64) -> bool {
        if self.0.is_some_and(|last| t < last) || !t.is_finite() {
            return false;
        }
        self.0 = Some(t);
        true
    }
}

/// Event-driven localization filter. Events of one stream must arrive in
/// timestamp order; out-of-order events are dropped.
pub struct Filter<'a> {
    config: FilterConfig,
    maps: FilterMaps<'a>,
    beam: BeamModel,
    set: ParticleSet,
    rng: ChaCha8Rng,
    acc_xy: f64,
    acc_theta: f64,
    latest_detections: Option<DetectionSet>,
    window: Vec<DetectionSet>,
    classified: bool,
    clocks: [StreamClock; 3],
    stats: FilterStats,
}

impl<'a> Filter<'a> {
    /// Creates a filter with particles spread uniformly over free space.
    pub fn new(config: FilterConfig, maps: FilterMaps<'a>, seed: u64) -> Result<Self, FilterError> {
        config.validate()?;
        if config.mode.uses_hierarchical_init() && maps.classifier.is_none() {
            return Err(FilterError::BadConfig(format!(
                "mode {} needs a room classifier",
                config.mode
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let set = init_uniform(maps.grid, config.particles, &mut rng)?;
        Ok(Self::assemble(config, maps, set, rng))
    }

    /// Creates a filter from an explicit particle set (e.g. a known start).
    pub fn with_particles(
        config: FilterConfig,
        maps: FilterMaps<'a>,
        set: ParticleSet,
        seed: u64,
    ) -> Result<Self, FilterError> {
        config.validate()?;
        if set.is_empty() {
            return Err(FilterError::NoParticles);
        }
        let mut f = Self::assemble(config, maps, set, ChaCha8Rng::seed_from_u64(seed));
        // A provided set needs no room classification.
        f.classified = true;
        Ok(f)
    }

    fn assemble(config: FilterConfig, maps: FilterMaps<'a>, set: ParticleSet, rng: ChaCha8Rng) -> Self {
        Self {
            beam: BeamModel::new(config.sigma_obs),
            config,
            maps,
            set,
            rng,
            acc_xy: 0.0,
            acc_theta: 0.0,
            latest_detections: None,
            window: Vec::new(),
            classified: false,
            clocks: Default::default(),
            stats: FilterStats::default(),
        }
    }

    pub fn config(&self) -> &FilterConfig {
        &self.config
    }
    pub fn particles(&self) -> &ParticleSet {
        &self.set
    }
    pub fn stats(&self) -> &FilterStats {
        &self.stats
    }

    pub fn estimate(&self, timestamp: f64) -> PoseEstimate {
        estimate_pose(&self.set, timestamp)
    }

    /// Propagates the particles and accumulates travelled distance.
    pub fn on_odometry(&mut self, delta: &OdometryDelta) {
        self.stats.odometry_events += 1;
        if !self.clocks[0].accept(delta.timestamp) {
            self.drop_event("odometry", delta.timestamp);
            return;
        }
        motion_update(
            &mut self.set,
            delta,
            self.config.sigma_odom,
            self.config.odom_noise_floor,
            &mut self.rng,
        );
        self.acc_xy += delta.dx.hypot(delta.dy);
        self.acc_theta += delta.dtheta.abs();
    }

    /// Runs the beam end point update once the robot has moved far enough.
    pub fn on_scan(&mut self, scan: &LidarScan) -> Option<PoseEstimate> {
        self.stats.scan_events += 1;
        if !self.clocks[1].accept(scan.timestamp) {
            self.drop_event("scan", scan.timestamp);
            return None;
        }
        if self.acc_xy < self.config.d_xy && self.acc_theta < self.config.d_theta {
            return None;
        }
        let masked;
        let scan = match self.mask_source(scan.timestamp) {
            Some(dets) => {
                masked = mask_dynamic_beams(scan, dets, self.maps.map.dynamic_classes());
                self.stats.masked_beams += scan.valid_count() - masked.valid_count();
                &masked
            }
            None => scan,
        };
        let endpoints = scan.strided_endpoints(self.config.beam_stride);
        if endpoints.is_empty() {
            return None;
        }
        let (beam, field) = (&self.beam, self.maps.field);
        let degenerate = weight_update_log(&mut self.set, |p| beam.mean_log_likelihood(&endpoints, p, field));
        self.acc_xy = 0.0;
        self.acc_theta = 0.0;
        self.stats.scan_updates += 1;
        Some(self.after_update(degenerate, scan.timestamp))
    }

    /// Integrates a detection set; the semantic update is never gated by motion.
    pub fn on_detections(&mut self, detections: &DetectionSet) -> Option<PoseEstimate> {
        self.stats.detection_events += 1;
        let mode = self.config.mode;
        if !mode.consumes_detections() {
            return None;
        }
        if !self.clocks[2].accept(detections.timestamp) {
            self.drop_event("detections", detections.timestamp);
            return None;
        }
        self.latest_detections = Some(detections.clone());
        if mode.uses_hierarchical_init() && !self.classified {
            self.window.push(detections.clone());
            if self.window.len() >= self.config.classification_window {
                self.classify_and_reinit();
            }
        }
        if !mode.uses_semantic_weights() {
            return None;
        }
        let index = self.maps.index;
        let prepared = PreparedDetections::new(detections, index, self.config.tau_conf);
        if prepared.is_empty() {
            return None;
        }
        let degenerate = weight_update_log(&mut self.set, |p| prepared.log_likelihood(p, index));
        self.stats.semantic_updates += 1;
        Some(self.after_update(degenerate, detections.timestamp))
    }

    fn mask_source(&self, t: f64) -> Option<&DetectionSet> {
        if !self.config.mask_dynamic || !self.config.mode.consumes_detections() {
            return None;
        }
        self.latest_detections
            .as_ref()
            .filter(|d| t - d.timestamp <= self.config.mask_max_age)
    }

    fn classify_and_reinit(&mut self) {
        self.classified = true;
        let window = std::mem::take(&mut self.window);
        let map = self.maps.map;
        let Some(classifier) = self.maps.classifier else {
            return;
        };
        let fv = build_feature_vector(&window, map.class_vocabulary(), self.config.tau_conf);
        let category = match classifier.classify(&fv) {
            Ok(c) => c.to_string(),
            Err(e) => {
                log::warn!("room classification failed ({e}); keeping uniform initialization");
                self.stats.hierarchical_fallback = true;
                return;
            }
        };
        match init_hierarchical(self.maps.grid, map, &category, self.config.particles, &mut self.rng) {
            Ok(set) => self.set = set,
            Err(e) => {
                log::warn!("{e}; falling back to uniform initialization");
                self.stats.hierarchical_fallback = true;
                if let Ok(set) = init_uniform(self.maps.grid, self.config.particles, &mut self.rng) {
                    self.set = set;
                }
            }
        }
        self.stats.room_category = Some(category);
    }

    fn after_update(&mut self, degenerate: bool, t: f64) -> PoseEstimate {
        if degenerate {
            self.stats.degenerate_updates += 1;
            log::debug!("all particle likelihoods at the floor at t = {t:.3}");
        }
        let estimate = estimate_pose(&self.set, t);
        if effective_sample_size(&self.set) < self.config.resample_ess_fraction * self.set.len() as f64 {
            self.set = low_variance_resample(&self.set, &mut self.rng);
            self.stats.resamples += 1;
        }
        estimate
    }

    fn drop_event(&mut self, stream: &str, t: f64) {
        self.stats.dropped_events += 1;
        log::warn!("out-of-order {stream} event at t = {t:.3} dropped");
    }
}
