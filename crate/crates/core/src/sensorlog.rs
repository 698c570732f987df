//! Newline-delimited JSON sensor logs.
//!
//! The first line is a header; every following line is one timestamped
//! record. Scan records carry only ranges; beam angles come from the header.

use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{LogError, SensorError};
use crate::geometry::Pose2D;
use crate::sensormodels::{CameraModel, DetectionSet, LidarScan, RawDetection};
use crate::trajectory::{TimedPose, Trajectory};

pub const SCHEMA_VERSION: u32 = 1;

/// Beam layout of a planar LiDAR: `count` beams evenly spread over `fov`,
/// centered on the robot's heading.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LidarConfig {
    pub count: usize,
    pub fov: f64,
    pub range_max: f64,
}

impl Default for LidarConfig {
    fn default() -> Self {
        Self {
            count: 360,
            fov: 270f64.to_radians(),
            range_max: 15.0,
        }
    }
}

impl LidarConfig {
    /// Azimuth of beam `k`: `-fov/2 + k * fov / (count - 1)`.
    pub fn angles(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![0.0];
        }
        let step = self.fov / (self.count - 1) as f64;
        (0..self.count)
            .map(|k| -0.5 * self.fov + k as f64 * step)
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogHeader {
    pub schema_version: u32,
    pub seed: u64,
    pub cameras: Vec<CameraModel>,
    pub lidar: LidarConfig,
    pub grid_hash: String,
    pub map_hash: String,
    #[serde(default)]
    pub spec_hash: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LogRecord {
    Odometry {
        t: f64,
        dx: f64,
        dy: f64,
        dtheta: f64,
    },
    Scan {
        t: f64,
        ranges: Vec<f64>,
    },
    Detections {
        t: f64,
        detections: Vec<RawDetection>,
    },
    GroundTruth {
        t: f64,
        x: f64,
        y: f64,
        theta: f64,
    },
}

impl LogRecord {
    pub fn timestamp(&self) -> f64 {
        match self {
            LogRecord::Odometry { t, .. }
            | LogRecord::Scan { t, .. }
            | LogRecord::Detections { t, .. }
            | LogRecord::GroundTruth { t, .. } => *t,
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum HeaderLine {
    Header(LogHeader),
}

#[derive(Clone, Debug, PartialEq)]
pub struct SensorLog {
    pub header: LogHeader,
    pub records: Vec<LogRecord>,
}

impl SensorLog {
    pub fn to_ndjson(&self) -> String {
        let mut out = serde_json::to_string(&HeaderLine::Header(self.header.clone()))
            .expect("header serializes");
        out.push('\n');
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("record serializes"));
            out.push('\n');
        }
        out
    }

    pub fn from_ndjson(text: &str) -> Result<Self, LogError> {
        Self::read(text.as_bytes())
    }

    /// Parses a log; errors name the offending line (0 = header).
    pub fn read<R: BufRead>(reader: R) -> Result<Self, LogError> {
        let mut lines = reader.lines().enumerate().filter(|(_, l)| match l {
            Ok(s) => !s.trim().is_empty(),
            Err(_) => true,
        });
        let corrupt = |index: usize, message: String| LogError::Corrupt { index, message };
        let (_, first) = lines.next().ok_or(LogError::MissingHeader)?;
        let first = first.map_err(|e| corrupt(0, e.to_string()))?;
        // Check the version before the full header so newer logs fail clearly.
        let raw: serde_json::Value =
            serde_json::from_str(&first).map_err(|e| corrupt(0, e.to_string()))?;
        if raw.get("type").and_then(|t| t.as_str()) != Some("header") {
            return Err(LogError::MissingHeader);
        }
        let version = raw
            .get("schema_version")
            .and_then(|v| v.as_u64())
            .ok_or_else(|| corrupt(0, "missing schema_version".into()))?;
        if version != u64::from(SCHEMA_VERSION) {
            return Err(LogError::UnsupportedVersion(version as u32));
        }
        let HeaderLine::Header(header) =
            serde_json::from_value(raw).map_err(|e| corrupt(0, e.to_string()))?;
        let mut records = Vec::new();
        for (i, line) in lines {
            let line = line.map_err(|e| corrupt(i, e.to_string()))?;
            let rec: LogRecord = serde_json::from_str(&line).map_err(|e| corrupt(i, e.to_string()))?;
            if let LogRecord::Scan { ranges, .. } = &rec {
                if ranges.len() != header.lidar.count {
                    return Err(corrupt(
                        i,
                        format!("scan has {} ranges, header declares {}", ranges.len(), header.lidar.count),
                    ));
                }
            }
            records.push(rec);
        }
        Ok(Self { header, records })
    }

    pub fn save(&self, path: &Path) -> Result<(), LogError> {
        let io = |source| LogError::Io {
            path: path.to_path_buf(),
            source,
        };
        let mut f = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
        f.write_all(self.to_ndjson().as_bytes()).map_err(io)?;
        f.flush().map_err(io)
    }

    pub fn load(path: &Path) -> Result<Self, LogError> {
        let f = std::fs::File::open(path).map_err(|source| LogError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::read(std::io::BufReader::new(f))
    }

    pub fn ground_truth(&self) -> Trajectory {
        Trajectory::new(
            self.records
                .iter()
                .filter_map(|r| match *r {
                    LogRecord::GroundTruth { t, x, y, theta } => Some(TimedPose {
                        t,
                        pose: Pose2D::new(x, y, theta),
                    }),
                    _ => None,
                })
                .collect(),
        )
    }

    /// Copy without detection records.
    pub fn without_detections(&self) -> Self {
        Self {
            header: self.header.clone(),
            records: self
                .records
                .iter()
                .filter(|r| !matches!(r, LogRecord::Detections { .. }))
                .cloned()
                .collect(),
        }
    }

    pub fn scan_from_ranges(&self, t: f64, ranges: &[f64]) -> Result<LidarScan, SensorError> {
        LidarScan::new(t, self.header.lidar.angles(), ranges.to_vec(), self.header.lidar.range_max)
    }

    pub fn resolve_detections(&self, t: f64, raw: &[RawDetection]) -> Result<DetectionSet, SensorError> {
        let detections = raw
            .iter()
            .map(|d| d.resolve(&self.header.cameras))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(DetectionSet {
            timestamp: t,
            detections,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> SensorLog {
        SensorLog {
            header: LogHeader {
                schema_version: SCHEMA_VERSION,
                seed: 7,
                cameras: vec![CameraModel::new("front", 320.0, 320.0, 640, [0.0, 0.0, 0.0]).unwrap()],
                lidar: LidarConfig {
                    count: 3,
                    fov: 1.0,
                    range_max: 15.0,
                },
                grid_hash: "g".into(),
                map_hash: "m".into(),
                spec_hash: String::new(),
            },
            records: vec![
                LogRecord::GroundTruth { t: 0.0, x: 1.0, y: 2.0, theta: 0.1 },
                LogRecord::Odometry { t: 0.02, dx: 0.01, dy: 0.0, dtheta: 1e-4 },
                LogRecord::Scan { t: 0.1, ranges: vec![1.5, 15.0, 0.123456789] },
                LogRecord::Detections {
                    t: 0.2,
                    detections: vec![RawDetection {
                        class_label: "desk".into(),
                        confidence: 0.83,
                        camera_id: "front".into(),
                        bb_left: 10.5,
                        bb_right: 80.25,
                    }],
                },
            ],
        }
    }

    #[test]
    fn round_trip_is_byte_identical() {
        let log = sample();
        let text = log.to_ndjson();
        let back = SensorLog::from_ndjson(&text).unwrap();
        assert_eq!(back, log);
        assert_eq!(back.to_ndjson(), text);
    }

    #[test]
    fn corrupt_record_reports_its_line() {
        let mut text = sample().to_ndjson();
        text.push_str("{\"type\": \"scan\", \"t\": 1.0}\n");
        match SensorLog::from_ndjson(&text) {
            Err(LogError::Corrupt { index, .. }) => assert_eq!(index, 5),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn version_and_header_checks() {
        let text = sample().to_ndjson().replacen("\"schema_version\":1", "\"schema_version\":9", 1);
        assert!(matches!(SensorLog::from_ndjson(&text), Err(LogError::UnsupportedVersion(9))));
        assert!(matches!(SensorLog::from_ndjson(""), Err(LogError::MissingHeader)));
    }

    #[test]
    fn lidar_angles_span_the_fov() {
        let a = LidarConfig::default().angles();
        assert_eq!(a.len(), 360);
        assert!((a[0] + 135f64.to_radians()).abs() < 1e-12);
        assert!((a[359] - 135f64.to_radians()).abs() < 1e-12);
    }
}
