use crate::error::{Error, EvalError, LogError};
use crate::mcl::{Filter, FilterConfig, FilterMaps, FilterStats, OdometryDelta, PoseEstimate};
use crate::sensorlog::{LogRecord, SensorLog};

#[derive(Clone, Debug, PartialEq)]
pub struct ReplayOutput {
    pub estimates: Vec<PoseEstimate>,
    pub stats: FilterStats,
}

/// Rejects logs recorded against different maps. Empty header hashes are
/// treated as unknown and accepted.
pub fn check_hashes(log: &SensorLog, maps: &FilterMaps<'_>) -> Result<(), EvalError> {
    let checks = [
        ("grid", &log.header.grid_hash, maps.grid.content_hash()),
        ("semantic map", &log.header.map_hash, maps.map.content_hash()),
    ];
    for (what, expected, actual) in checks {
        if !expected.is_empty() && *expected != actual {
            return Err(EvalError::HashMismatch {
                what,
                expected: expected.clone(),
                actual,
            });
        }
    }
    Ok(())
}

/// Feeds every record of `log` to `filter` in file order (the simulator
/// writes records in timestamp order). `on_update` sees the filter after
/// each weight update together with the estimate it produced.
pub fn replay_into<F>(filter: &mut Filter<'_>, log: &SensorLog, mut on_update: F) -> Result<Vec<PoseEstimate>, Error>
where
    F: FnMut(&Filter<'_>, &PoseEstimate),
{
    let mut estimates = Vec::new();
    for (i, record) in log.records.iter().enumerate() {
        // Line numbers count the header as line 0.
        let corrupt = |e: &dyn std::fmt::Display| LogError::Corrupt {
            index: i + 1,
            message: e.to_string(),
        };
        let estimate = match record {
            LogRecord::Odometry { t, dx, dy, dtheta } => {
                filter.on_odometry(&OdometryDelta {
                    timestamp: *t,
                    dx: *dx,
                    dy: *dy,
                    dtheta: *dtheta,
                });
                None
            }
            LogRecord::Scan { t, ranges } => {
                let scan = log.scan_from_ranges(*t, ranges).map_err(|e| corrupt(&e))?;
                filter.on_scan(&scan)
            }
            LogRecord::Detections { t, detections } => {
                if !filter.config().mode.consumes_detections() {
                    continue;
                }
                let set = log.resolve_detections(*t, detections).map_err(|e| corrupt(&e))?;
                filter.on_detections(&set)
            }
            LogRecord::GroundTruth { .. } => None,
        };
        if let Some(e) = estimate {
            on_update(filter, &e);
            estimates.push(e);
        }
    }
    Ok(estimates)
}

/// Replays a log through a freshly initialized filter.
pub fn replay(log: &SensorLog, config: &FilterConfig, maps: FilterMaps<'_>, seed: u64) -> Result<ReplayOutput, Error> {
    check_hashes(log, &maps)?;
    let mut filter = Filter::new(config.clone(), maps, seed)?;
    let estimates = replay_into(&mut filter, log, |_, _| {})?;
    Ok(ReplayOutput {
        estimates,
        stats: filter.stats().clone(),
    })
}

/// Serializes estimates as newline-delimited JSON.
pub fn estimates_to_ndjson(estimates: &[PoseEstimate]) -> String {
    let mut out = String::new();
    for e in estimates {
        out.push_str(&serde_json::to_string(e).expect("estimates serialize"));
        out.push('\n');
    }
    out
}

pub fn estimates_from_ndjson(text: &str) -> Result<Vec<PoseEstimate>, LogError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| LogError::Corrupt {
                index: i,
                message: e.to_string(),
            })
        })
        .collect()
}
