use crate::sensormodels::detection::DetectionSet;
use crate::sensormodels::lidar::LidarScan;

/// Invalidates beams whose azimuth falls inside the cone of any detection
/// of a dynamic class. Ranges are never modified.
pub fn mask_dynamic_beams<S: AsRef<str>>(
    scan: &LidarScan,
    detections: &DetectionSet,
    dynamic_classes: &[S],
) -> LidarScan {
    let mut out = scan.clone();
    let cones: Vec<_> = detections
        .detections
        .iter()
        .filter(|d| dynamic_classes.iter().any(|c| c.as_ref() == d.class_label))
        .collect();
    if cones.is_empty() {
        return out;
    }
    for (valid, &angle) in out.valid.iter_mut().zip(&scan.angles) {
        if *valid && cones.iter().any(|d| d.cone_contains(angle)) {
            *valid = false;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Vec2;
    use crate::sensormodels::detection::Detection;
    use std::f64::consts::PI;

    fn person(azimuth: f64, half: f64) -> DetectionSet {
        DetectionSet {
            timestamp: 0.0,
            detections: vec![Detection {
                class_label: "person".into(),
                confidence: 0.9,
                camera_id: "c".into(),
                bb_left: 0.0,
                bb_right: 1.0,
                bearing: Vec2::from_angle(azimuth),
                half_angle: half,
            }],
        }
    }

    #[test]
    fn beams_inside_cone_are_masked() {
        let scan = LidarScan::new(0.0, vec![0.0, PI, 0.05, -0.2], vec![1.0, 2.0, 3.0, 4.0], 15.0).unwrap();
        let out = mask_dynamic_beams(&scan, &person(0.0, 0.1), &["person"]);
        assert_eq!(out.valid, vec![false, true, false, true]);
        assert_eq!(out.ranges, scan.ranges);
    }

    #[test]
    fn no_dynamic_detections_is_identity() {
        let scan = LidarScan::new(0.0, vec![0.0, 1.0], vec![1.0, 2.0], 15.0).unwrap();
        let out = mask_dynamic_beams(&scan, &person(0.0, 0.1), &["chair"]);
        assert_eq!(out, scan);
        let out = mask_dynamic_beams::<&str>(&scan, &DetectionSet::default(), &[]);
        assert_eq!(out, scan);
    }
}
