use crate::geometry::{Pose2D, Vec2};
use crate::sensormodels::detection::DetectionSet;
use crate::sensormodels::lidar::LIKELIHOOD_FLOOR;
use crate::worldmap::{BearingSet, VisibilityIndex};

/// Distance assigned when the detected class is not visible from the cell.
pub const D_MISS: f64 = 2.0;

/// `1 - max cos(b_i, b)` over the set, or [`D_MISS`] for an empty set.
pub fn semantic_distance(bearings: &[Vec2], observed: Vec2) -> f64 {
    bearings
        .iter()
        .map(|b| b.dot(observed))
        .reduce(f64::max)
        .map_or(D_MISS, |best| 1.0 - best)
}

/// Same as [`semantic_distance`] on an index bearing set.
#[inline]
pub fn bearing_set_distance(set: &BearingSet<'_>, observed: Vec2) -> f64 {
    set.best_cosine(observed).map_or(D_MISS, |best| 1.0 - best)
}

/// Confident detections reduced to (class index, robot-frame azimuth).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PreparedDetections {
    items: Vec<(usize, f64)>,
}

impl PreparedDetections {
    /// Keeps detections with confidence at least `tau_conf` whose class is
    /// in the index vocabulary and not excluded as dynamic.
    pub fn new(detections: &DetectionSet, index: &VisibilityIndex, tau_conf: f64) -> Self {
        let items = detections
            .detections
            .iter()
            .filter(|d| d.confidence >= tau_conf)
            .filter_map(|d| {
                let k = index.class_index(&d.class_label)?;
                (!index.is_excluded(k)).then(|| (k, d.azimuth()))
            })
            .collect();
        Self { items }
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    /// Geometric mean of `exp(-d)` over the detections, 1.0 when empty.
    pub fn likelihood(&self, pose: &Pose2D, index: &VisibilityIndex) -> f64 {
        self.log_likelihood(pose, index).exp()
    }

    /// Mean of `max(-d, ln floor)` over the detections, 0 when empty.
    #[inline]
    pub fn log_likelihood(&self, pose: &Pose2D, index: &VisibilityIndex) -> f64 {
        if self.items.is_empty() {
            return 0.0;
        }
        let Some(cell) = index.cell_of(pose.position()) else {
            return (-D_MISS).max(LIKELIHOOD_FLOOR.ln());
        };
        let ln_floor = LIKELIHOOD_FLOOR.ln();
        let mut sum = 0.0;
        for &(k, azimuth) in &self.items {
            let d = index
                .bearings_at_cell(cell, k)
                .best_cosine_at(azimuth + pose.theta)
                .map_or(D_MISS, |best| 1.0 - best);
            sum += (-d).max(ln_floor);
        }
        sum / self.items.len() as f64
    }
}

pub fn semantic_likelihood(
    detections: &DetectionSet,
    pose: &Pose2D,
    index: &VisibilityIndex,
    tau_conf: f64,
) -> f64 {
    PreparedDetections::new(detections, index, tau_conf).likelihood(pose, index)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Rect;
    use crate::sensormodels::detection::Detection;
    use crate::worldmap::{CellState, OccupancyGrid, SemanticWorldMap};
    use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2};

    #[test]
    fn distance_examples() {
        let e = Vec2::new(1.0, 0.0);
        let n = Vec2::new(0.0, 1.0);
        assert_eq!(semantic_distance(&[e], e), 0.0);
        assert!((semantic_distance(&[e], n) - 1.0).abs() < 1e-15);
        let diag = Vec2::new(FRAC_1_SQRT_2, FRAC_1_SQRT_2);
        assert!((semantic_distance(&[e, n], diag) - (1.0 - FRAC_1_SQRT_2)).abs() < 1e-12);
        assert_eq!(semantic_distance(&[], e), D_MISS);
    }

    fn det(class: &str, conf: f64, azimuth: f64) -> Detection {
        Detection {
            class_label: class.into(),
            confidence: conf,
            camera_id: "c".into(),
            bb_left: 0.0,
            bb_right: 1.0,
            bearing: Vec2::from_angle(azimuth),
            half_angle: 0.05,
        }
    }

    fn setup() -> (OccupancyGrid, VisibilityIndex) {
        let grid = OccupancyGrid::new(60, 60, 0.05, Pose2D::default(), CellState::Free).unwrap();
        let map = SemanticWorldMap::from_json(
            r#"{"class_vocabulary": ["sink", "oven", "person"], "dynamic_classes": ["person"],
                "objects": [{"class": "sink", "rect": {"cx": 2.9, "cy": 1.5, "w": 0.02, "h": 0.02}}]}"#,
        )
        .unwrap();
        let index = VisibilityIndex::build(&grid, &map, std::f64::consts::PI / 180.0).unwrap();
        (grid, index)
    }

    #[test]
    fn likelihood_examples() {
        let (_, index) = setup();
        let pose = Pose2D::new(1.0, 1.5, FRAC_PI_2);
        // The sink lies due east; with heading π/2 that is azimuth -π/2 in the robot frame.
        let set = index.query(pose.position(), "sink").unwrap();
        let exact = set.bins().map(|b| set.bin_angle(b)).next().unwrap() - FRAC_PI_2;
        let one = DetectionSet { timestamp: 0.0, detections: vec![det("sink", 0.9, exact)] };
        assert!((semantic_likelihood(&one, &pose, &index, 0.5) - 1.0).abs() < 1e-12);
        let miss = DetectionSet { timestamp: 0.0, detections: vec![det("oven", 0.9, 0.0)] };
        assert!((semantic_likelihood(&miss, &pose, &index, 0.5) - (-2.0f64).exp()).abs() < 1e-12);
        let weak = DetectionSet { timestamp: 0.0, detections: vec![det("oven", 0.4, 0.0)] };
        assert_eq!(semantic_likelihood(&weak, &pose, &index, 0.5), 1.0);
        let dynamic = DetectionSet { timestamp: 0.0, detections: vec![det("person", 0.9, 0.0)] };
        assert_eq!(semantic_likelihood(&dynamic, &pose, &index, 0.5), 1.0);
    }

    #[test]
    fn likelihood_is_bounded_and_order_invariant() {
        let (_, index) = setup();
        let pose = Pose2D::new(0.7, 0.4, 1.0);
        let dets = vec![det("sink", 0.9, 0.3), det("oven", 0.8, 1.0), det("sink", 0.7, -2.0)];
        let a = semantic_likelihood(&DetectionSet { timestamp: 0.0, detections: dets.clone() }, &pose, &index, 0.5);
        let mut rev = dets.clone();
        rev.reverse();
        let b = semantic_likelihood(&DetectionSet { timestamp: 0.0, detections: rev }, &pose, &index, 0.5);
        assert!((a - b).abs() < 1e-15);
        for d in dets {
            let l = semantic_likelihood(&DetectionSet { timestamp: 0.0, detections: vec![d] }, &pose, &index, 0.5);
            assert!(l >= (-2.0f64).exp() - 1e-15 && l <= 1.0);
        }
    }

    #[test]
    fn rotated_twin_worlds_agree() {
        // A square world and its 90° rotation about the grid center; the
        // particle and the observation rotate with it.
        let n = 40;
        let res = 0.05;
        let mut g1 = OccupancyGrid::new(n, n, res, Pose2D::default(), CellState::Free).unwrap();
        let mut g2 = g1.clone();
        for k in 5..30 {
            g1.set(k, 20, CellState::Occupied);
            // (col, row) -> (n - 1 - row, col)
            g2.set(n - 1 - 20, k, CellState::Occupied);
        }
        let size = n as f64 * res;
        let r1 = Rect::new(1.2, 1.6, 0.3, 0.1);
        let r2 = Rect::new(size - r1.cy, r1.cx, r1.h, r1.w);
        let doc = |r: Rect| {
            format!(
                r#"{{"class_vocabulary": ["desk"], "objects": [{{"class": "desk", "rect": {{"cx": {}, "cy": {}, "w": {}, "h": {}}}}}]}}"#,
                r.cx, r.cy, r.w, r.h
            )
        };
        let m1 = SemanticWorldMap::from_json(&doc(r1)).unwrap();
        let m2 = SemanticWorldMap::from_json(&doc(r2)).unwrap();
        // 4 bins per quadrant keeps bin centers aligned under the rotation.
        let ang = FRAC_PI_2 / 4.0;
        let i1 = VisibilityIndex::build(&g1, &m1, ang).unwrap();
        let i2 = VisibilityIndex::build(&g2, &m2, ang).unwrap();
        for (x, y, th, az) in [(0.5, 0.3, 0.2, 0.9), (1.0, 0.5, 4.0, -0.4), (0.3, 1.8, 1.0, 2.0)] {
            let p1 = Pose2D::new(x, y, th);
            let p2 = Pose2D::new(size - y, x, th + FRAC_PI_2);
            let d1 = DetectionSet { timestamp: 0.0, detections: vec![det("desk", 0.9, az)] };
            let a = semantic_likelihood(&d1, &p1, &i1, 0.5);
            let b = semantic_likelihood(&d1, &p2, &i2, 0.5);
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }
}
