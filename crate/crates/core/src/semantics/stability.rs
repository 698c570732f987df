use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, SemanticsError};
use crate::sensorlog::{LogRecord, SensorLog};
use crate::sensormodels::bearing_set_distance;
use crate::worldmap::VisibilityIndex;

/// A class is stable when its consistency ratio is strictly above this.
pub const STABILITY_THRESHOLD: f64 = 0.6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassStability {
    pub class: String,
    pub consistent: u64,
    pub total: u64,
    /// `None` when the class was never detected.
    pub score: Option<f64>,
    pub stable: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub tau_s: f64,
    pub threshold: f64,
    pub classes: Vec<ClassStability>,
}

impl StabilityReport {
    /// Report from known scores, e.g. published reference values.
    pub fn from_scores(scores: &[(&str, f64)]) -> Self {
        Self {
            tau_s: 0.6,
            threshold: STABILITY_THRESHOLD,
            classes: scores
                .iter()
                .map(|&(c, s)| ClassStability {
                    class: c.to_string(),
                    consistent: 0,
                    total: 0,
                    score: Some(s),
                    stable: Some(s > STABILITY_THRESHOLD),
                })
                .collect(),
        }
    }

    fn from_counts(tau_s: f64, counts: Vec<(String, u64, u64)>) -> Self {
        let classes = counts
            .into_iter()
            .map(|(class, consistent, total)| {
                let score = (total > 0).then(|| consistent as f64 / total as f64);
                ClassStability {
                    class,
                    consistent,
                    total,
                    score,
                    stable: score.map(|s| s > STABILITY_THRESHOLD),
                }
            })
            .collect();
        Self {
            tau_s,
            threshold: STABILITY_THRESHOLD,
            classes,
        }
    }

    pub fn score(&self, class: &str) -> Option<f64> {
        self.classes.iter().find(|c| c.class == class)?.score
    }

    /// Classes with data whose score is at or below the threshold.
    pub fn unstable_classes(&self) -> Vec<String> {
        self.classes
            .iter()
            .filter(|c| c.stable == Some(false))
            .map(|c| c.class.clone())
            .collect()
    }

    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{:<16} {:>10} {:>8} {:>7}  {}", "class", "consistent", "total", "score", "stable");
        for c in &self.classes {
            let (score, stable) = match (c.score, c.stable) {
                (Some(v), Some(st)) => (format!("{v:.2}"), if st { "yes" } else { "no" }),
                _ => ("-".to_string(), "no data"),
            };
            let _ = writeln!(s, "{:<16} {:>10} {:>8} {:>7}  {}", c.class, c.consistent, c.total, score, stable);
        }
        s
    }
}

/// Classes flagged stable.
pub fn stable_class_set(report: &StabilityReport) -> Vec<String> {
    report
        .classes
        .iter()
        .filter(|c| c.stable == Some(true))
        .map(|c| c.class.clone())
        .collect()
}

/// Fraction of confident detections per class whose bearing matches the map
/// (`d < tau_s`) at the ground-truth pose.
pub fn stability_scores(
    log: &SensorLog,
    index: &VisibilityIndex,
    tau_s: f64,
    tau_conf: f64,
) -> Result<StabilityReport, Error> {
    let truth = log.ground_truth();
    let mut counts: Vec<(String, u64, u64)> = index.classes().iter().map(|c| (c.clone(), 0, 0)).collect();
    for rec in &log.records {
        let LogRecord::Detections { t, detections } = rec else {
            continue;
        };
        let set = log.resolve_detections(*t, detections)?;
        let confident: Vec<_> = set.detections.iter().filter(|d| d.confidence >= tau_conf).collect();
        if confident.is_empty() {
            continue;
        }
        let pose = truth
            .interpolate(*t)
            .ok_or(SemanticsError::MissingGroundTruth(*t))?;
        let cell = index.cell_of(pose.position());
        for d in confident {
            let Some(k) = index.class_index(&d.class_label) else {
                continue;
            };
            let world = d.bearing.rotated(pose.theta);
            let dist = match cell {
                Some(cell) => bearing_set_distance(&index.bearings_at_cell(cell, k), world),
                None => crate::sensormodels::D_MISS,
            };
            counts[k].2 += 1;
            if dist < tau_s {
                counts[k].1 += 1;
            }
        }
    }
    Ok(StabilityReport::from_counts(tau_s, counts))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_report() -> StabilityReport {
        StabilityReport::from_scores(&[
            ("sink", 0.97),
            ("door", 0.96),
            ("oven", 0.90),
            ("whiteboard", 0.91),
            ("table", 0.95),
            ("cardboard", 0.46),
            ("plant", 0.88),
            ("drawers", 0.86),
            ("sofa", 0.99),
            ("storage", 0.96),
            ("chair", 0.58),
            ("extinguisher", 0.84),
            ("person", 0.11),
            ("desk", 1.00),
        ])
    }

    #[test]
    fn reference_scores_split_as_published() {
        let r = sample_report();
        let unstable = r.unstable_classes();
        for c in ["person", "cardboard", "chair"] {
            assert!(unstable.contains(&c.to_string()));
        }
        assert_eq!(unstable.len(), 3);
        let stable = stable_class_set(&r);
        assert!(stable.contains(&"desk".to_string()) && stable.contains(&"sink".to_string()));
        assert_eq!(stable.len(), 11);
    }

    #[test]
    fn threshold_is_strict() {
        let r = StabilityReport::from_counts(0.6, vec![("x".into(), 6, 10), ("y".into(), 7, 10), ("z".into(), 0, 0)]);
        assert_eq!(r.classes[0].stable, Some(false));
        assert_eq!(r.classes[1].stable, Some(true));
        assert_eq!(r.classes[2].score, None);
        assert_eq!(r.unstable_classes(), vec!["x".to_string()]);
        assert_eq!(stable_class_set(&r), vec!["y".to_string()]);
        assert!(r.to_table().contains("no data"));
    }

    #[test]
    fn all_stable_excludes_nothing() {
        let r = StabilityReport::from_scores(&[("a", 0.9), ("b", 1.0)]);
        assert!(r.unstable_classes().is_empty());
    }
}
