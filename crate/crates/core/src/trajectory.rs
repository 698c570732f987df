//! Timestamped pose sequences with interpolation.

use serde::{Deserialize, Serialize};

use crate::geometry::{angle_diff, Pose2D};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimedPose {
    pub t: f64,
    pub pose: Pose2D,
}

/// Poses sorted by time.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Trajectory {
    samples: Vec<TimedPose>,
}

impl Trajectory {
    /// Sorts the samples by time (stable for equal timestamps).
    pub fn new(mut samples: Vec<TimedPose>) -> Self {
        samples.sort_by(|a, b| a.t.total_cmp(&b.t));
        Self { samples }
    }

    pub fn samples(&self) -> &[TimedPose] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn start(&self) -> Option<f64> {
        self.samples.first().map(|s| s.t)
    }

    pub fn end(&self) -> Option<f64> {
        self.samples.last().map(|s| s.t)
    }

    /// Pose at `t`: linear in position, shortest arc in heading. `None`
    /// outside the covered time range.
    pub fn interpolate(&self, t: f64) -> Option<Pose2D> {
        let first = self.samples.first()?;
        let last = self.samples.last()?;
        if t < first.t || t > last.t {
            return None;
        }
        let i = self.samples.partition_point(|s| s.t <= t);
        if i == 0 {
            return Some(first.pose);
        }
        let a = &self.samples[i - 1];
        if i == self.samples.len() || a.t == t {
            return Some(a.pose);
        }
        let b = &self.samples[i];
        let u = (t - a.t) / (b.t - a.t);
        Some(Pose2D::new(
            a.pose.x + u * (b.pose.x - a.pose.x),
            a.pose.y + u * (b.pose.y - a.pose.y),
            a.pose.theta + u * angle_diff(b.pose.theta, a.pose.theta),
        ))
    }
}
