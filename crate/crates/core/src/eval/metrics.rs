use std::f64::consts::FRAC_PI_4;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::EvalError;
use crate::geometry::angle_diff;
use crate::mcl::PoseEstimate;
use crate::trajectory::Trajectory;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConvergenceCriteria {
    pub position_radius: f64,
    pub angle_tolerance: f64,
    /// Convergence must happen within this fraction of the sequence.
    pub deadline_fraction: f64,
    /// Largest fraction of post-convergence samples allowed outside the criteria.
    pub divergence_budget: f64,
}

impl Default for ConvergenceCriteria {
    fn default() -> Self {
        Self {
            position_radius: 0.3,
            angle_tolerance: FRAC_PI_4,
            deadline_fraction: 0.95,
            divergence_budget: 0.01,
        }
    }
}

impl ConvergenceCriteria {
    pub fn validate(&self) -> Result<(), EvalError> {
        let frac = |v: f64| v > 0.0 && v <= 1.0;
        if !(self.position_radius > 0.0 && self.position_radius.is_finite()) {
            return Err(EvalError::BadCriteria(format!("position radius {}", self.position_radius)));
        }
        if !(self.angle_tolerance > 0.0 && self.angle_tolerance.is_finite()) {
            return Err(EvalError::BadCriteria(format!("angle tolerance {}", self.angle_tolerance)));
        }
        if !frac(self.deadline_fraction) || !frac(self.divergence_budget) {
            return Err(EvalError::BadCriteria("fractions must lie in (0, 1]".into()));
        }
        Ok(())
    }
}

/// Outcome of one localization run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    /// Converged before the deadline and tracked to the end.
    pub success: bool,
    /// Seconds from the start of the ground truth to convergence, if the
    /// pose ever settled (even after the deadline).
    pub convergence_time: Option<f64>,
    /// RMSE over post-convergence samples.
    pub ate_translation: Option<f64>,
    pub ate_rotation: Option<f64>,
    pub mae_translation: Option<f64>,
    pub mae_rotation: Option<f64>,
    /// Fraction of post-convergence samples outside the criteria.
    pub divergence_fraction: Option<f64>,
    pub samples: usize,
}

/// Scores an estimate sequence against ground truth. Estimates outside the
/// truth time range are ignored.
pub fn evaluate(
    estimates: &[PoseEstimate],
    truth: &Trajectory,
    criteria: &ConvergenceCriteria,
) -> Result<RunResult, EvalError> {
    criteria.validate()?;
    let (Some(t0), Some(t1)) = (truth.start(), truth.end()) else {
        return Err(EvalError::NoOverlap);
    };
    let errors: Vec<(f64, f64, f64)> = estimates
        .iter()
        .filter_map(|e| {
            let g = truth.interpolate(e.timestamp)?;
            let dp = (e.pose.position() - g.position()).norm();
            Some((e.timestamp, dp, angle_diff(e.pose.theta, g.theta).abs()))
        })
        .collect();
    if errors.is_empty() {
        return Err(EvalError::NoOverlap);
    }
    let within: Vec<bool> = errors
        .iter()
        .map(|&(_, dp, da)| dp <= criteria.position_radius && da <= criteria.angle_tolerance)
        .collect();
    // outside[k] = number of samples at index >= k outside the criteria.
    let n = within.len();
    let mut outside = vec![0usize; n + 1];
    for k in (0..n).rev() {
        outside[k] = outside[k + 1] + usize::from(!within[k]);
    }
    let converged_at = (0..n).find(|&k| {
        within[k] && outside[k] as f64 <= criteria.divergence_budget * (n - k) as f64
    });
    let Some(k) = converged_at else {
        return Ok(RunResult {
            success: false,
            convergence_time: None,
            ate_translation: None,
            ate_rotation: None,
            mae_translation: None,
            mae_rotation: None,
            divergence_fraction: None,
            samples: n,
        });
    };
    let deadline = t0 + criteria.deadline_fraction * (t1 - t0);
    let post = &errors[k..];
    let m = post.len() as f64;
    let rms = |f: fn(&(f64, f64, f64)) -> f64| (post.iter().map(|e| f(e).powi(2)).sum::<f64>() / m).sqrt();
    let mean = |f: fn(&(f64, f64, f64)) -> f64| post.iter().map(f).sum::<f64>() / m;
    Ok(RunResult {
        success: errors[k].0 <= deadline,
        convergence_time: Some(errors[k].0 - t0),
        ate_translation: Some(rms(|e| e.1)),
        ate_rotation: Some(rms(|e| e.2)),
        mae_translation: Some(mean(|e| e.1)),
        mae_rotation: Some(mean(|e| e.2)),
        divergence_fraction: Some(outside[k] as f64 / m),
        samples: n,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledRun {
    pub label: String,
    pub seed: u64,
    pub result: RunResult,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub runs: Vec<LabeledRun>,
    pub total: usize,
    pub successes: usize,
    pub success_rate: f64,
    /// Means over successful runs only; absent when nothing succeeded.
    pub mean_ate_translation: Option<f64>,
    pub mean_ate_rotation: Option<f64>,
    pub mean_convergence_time: Option<f64>,
}

pub fn aggregate(runs: Vec<LabeledRun>) -> EvalReport {
    let ok: Vec<&RunResult> = runs.iter().map(|r| &r.result).filter(|r| r.success).collect();
    let mean = |f: fn(&RunResult) -> Option<f64>| {
        let v: Vec<f64> = ok.iter().filter_map(|r| f(r)).collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    };
    let total = runs.len();
    let successes = ok.len();
    EvalReport {
        total,
        successes,
        success_rate: if total == 0 { 0.0 } else { successes as f64 / total as f64 },
        mean_ate_translation: mean(|r| r.ate_translation),
        mean_ate_rotation: mean(|r| r.ate_rotation),
        mean_convergence_time: mean(|r| r.convergence_time),
        runs,
    }
}

impl EvalReport {
    /// Fixed-width table, one row per run plus a summary line.
    pub fn to_table(&self) -> String {
        let opt = |v: Option<f64>, p: usize| v.map_or("-".to_string(), |v| format!("{v:.p$}"));
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<20} {:>6} {:>7} {:>9} {:>8} {:>9} {:>8}",
            "run", "seed", "success", "conv[s]", "ATE[m]", "ATE[rad]", "diverge"
        );
        for r in &self.runs {
            let x = &r.result;
            let _ = writeln!(
                out,
                "{:<20} {:>6} {:>7} {:>9} {:>8} {:>9} {:>8}",
                r.label,
                r.seed,
                if x.success { "yes" } else { "no" },
                opt(x.convergence_time, 2),
                opt(x.ate_translation, 3),
                opt(x.ate_rotation, 3),
                opt(x.divergence_fraction, 3),
            );
        }
        let _ = writeln!(
            out,
            "success {}/{} ({:.1}%)  mean ATE {} m / {} rad  mean convergence {} s",
            self.successes,
            self.total,
            100.0 * self.success_rate,
            opt(self.mean_ate_translation, 3),
            opt(self.mean_ate_rotation, 3),
            opt(self.mean_convergence_time, 2),
        );
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Pose2D;
    use crate::trajectory::TimedPose;
    use std::f64::consts::TAU;

    fn truth(n: usize) -> Trajectory {
        Trajectory::new(
            (0..=n)
                .map(|k| TimedPose { t: k as f64 * 0.1, pose: Pose2D::new(k as f64 * 0.05, 1.0, 0.2) })
                .collect(),
        )
    }

    fn est(t: f64, p: Pose2D) -> PoseEstimate {
        PoseEstimate { timestamp: t, pose: p, cov_xy: [0.0; 3], theta_spread: 0.0 }
    }

    fn copy_of(tr: &Trajectory) -> Vec<PoseEstimate> {
        tr.samples().iter().map(|s| est(s.t, s.pose)).collect()
    }

    #[test]
    fn perfect_estimates() {
        let tr = truth(100);
        let r = evaluate(&copy_of(&tr), &tr, &ConvergenceCriteria::default()).unwrap();
        assert!(r.success);
        assert_eq!(r.convergence_time, Some(0.0));
        assert_eq!((r.ate_translation, r.ate_rotation), (Some(0.0), Some(0.0)));
    }

    #[test]
    fn constant_offset_never_converges() {
        let tr = truth(100);
        let e: Vec<_> = tr.samples().iter().map(|s| est(s.t, Pose2D::new(s.pose.x + 1.0, s.pose.y, s.pose.theta))).collect();
        let r = evaluate(&e, &tr, &ConvergenceCriteria::default()).unwrap();
        assert!(!r.success && r.convergence_time.is_none() && r.ate_translation.is_none());
    }

    #[test]
    fn late_convergence_fails_the_deadline() {
        let tr = truth(100);
        let e: Vec<_> = tr
            .samples()
            .iter()
            .map(|s| {
                let off = if s.t < 9.6 - 1e-9 { 1.0 } else { 0.0 };
                est(s.t, Pose2D::new(s.pose.x + off, s.pose.y, s.pose.theta))
            })
            .collect();
        let r = evaluate(&e, &tr, &ConvergenceCriteria::default()).unwrap();
        assert!(!r.success);
        assert!((r.convergence_time.unwrap() - 9.6).abs() < 1e-9);
        // Entering at 94% is in time.
        let e2: Vec<_> = e
            .iter()
            .zip(tr.samples())
            .map(|(x, s)| if s.t >= 9.4 - 1e-9 { est(s.t, s.pose) } else { x.clone() })
            .collect();
        assert!(evaluate(&e2, &tr, &ConvergenceCriteria::default()).unwrap().success);
    }

    #[test]
    fn divergence_budget() {
        let tr = truth(200);
        let mut e = copy_of(&tr);
        // One bad sample in 201 is within 1%; three are not, so convergence moves past them.
        e[150].pose.x += 2.0;
        let r = evaluate(&e, &tr, &ConvergenceCriteria::default()).unwrap();
        assert_eq!(r.convergence_time, Some(0.0));
        assert!((r.divergence_fraction.unwrap() - 1.0 / 201.0).abs() < 1e-12);
        e[151].pose.x += 2.0;
        e[152].pose.x += 2.0;
        let r = evaluate(&e, &tr, &ConvergenceCriteria::default()).unwrap();
        assert!((r.convergence_time.unwrap() - 15.3).abs() < 1e-9);
    }

    #[test]
    fn wrapped_angle_error() {
        let tr = Trajectory::new(vec![
            TimedPose { t: 0.0, pose: Pose2D::new(0.0, 0.0, 0.01) },
            TimedPose { t: 1.0, pose: Pose2D::new(0.0, 0.0, 0.01) },
        ]);
        let e = vec![est(0.0, Pose2D::new(0.0, 0.0, TAU - 0.01)), est(1.0, Pose2D::new(0.0, 0.0, TAU - 0.01))];
        let r = evaluate(&e, &tr, &ConvergenceCriteria::default()).unwrap();
        assert!((r.ate_rotation.unwrap() - 0.02).abs() < 1e-9);
    }

    #[test]
    fn rmse_and_mae() {
        let tr = truth(3);
        let offs = [0.0, 0.1, 0.2, 0.0];
        let e: Vec<_> = tr.samples().iter().zip(offs).map(|(s, o)| est(s.t, Pose2D::new(s.pose.x, s.pose.y + o, s.pose.theta))).collect();
        let r = evaluate(&e, &tr, &ConvergenceCriteria::default()).unwrap();
        assert!((r.ate_translation.unwrap() - (0.05f64 / 4.0).sqrt()).abs() < 1e-12);
        assert!((r.mae_translation.unwrap() - 0.075).abs() < 1e-12);
    }

    #[test]
    fn no_overlap_is_an_error() {
        let tr = truth(10);
        let e = vec![est(50.0, Pose2D::default())];
        assert!(matches!(evaluate(&e, &tr, &ConvergenceCriteria::default()), Err(EvalError::NoOverlap)));
        assert!(matches!(evaluate(&[], &tr, &ConvergenceCriteria::default()), Err(EvalError::NoOverlap)));
    }

    #[test]
    fn time_shift_invariance() {
        let tr = truth(50);
        let mut e = copy_of(&tr);
        for (k, x) in e.iter_mut().enumerate() {
            x.pose.x += if k < 20 { 0.5 } else { 0.01 * (k % 3) as f64 };
        }
        let shift = |tr: &Trajectory, dt: f64| {
            Trajectory::new(tr.samples().iter().map(|s| TimedPose { t: s.t + dt, pose: s.pose }).collect())
        };
        let e2: Vec<_> = e.iter().map(|x| est(x.timestamp + 100.0, x.pose)).collect();
        let a = evaluate(&e, &tr, &ConvergenceCriteria::default()).unwrap();
        let b = evaluate(&e2, &shift(&tr, 100.0), &ConvergenceCriteria::default()).unwrap();
        assert_eq!(a.success, b.success);
        assert!((a.convergence_time.unwrap() - b.convergence_time.unwrap()).abs() < 1e-9);
        assert!((a.ate_translation.unwrap() - b.ate_translation.unwrap()).abs() < 1e-9);
    }

    fn run(success: bool, ate: f64) -> LabeledRun {
        LabeledRun {
            label: "r".into(),
            seed: 0,
            result: RunResult {
                success,
                convergence_time: Some(1.0),
                ate_translation: Some(ate),
                ate_rotation: Some(ate / 10.0),
                mae_translation: Some(ate),
                mae_rotation: Some(ate / 10.0),
                divergence_fraction: Some(0.0),
                samples: 10,
            },
        }
    }

    #[test]
    fn aggregate_examples() {
        let all = aggregate((0..5).map(|_| run(true, 0.2)).collect());
        assert_eq!(all.success_rate, 1.0);
        let two = aggregate(vec![run(true, 0.1), run(false, 9.0), run(true, 0.3), run(false, 9.0), run(false, 9.0)]);
        assert!((two.success_rate - 0.4).abs() < 1e-12);
        assert!((two.mean_ate_translation.unwrap() - 0.2).abs() < 1e-12);
        let none = aggregate(vec![run(false, 1.0), run(false, 2.0)]);
        assert_eq!(none.mean_ate_translation, None);
        assert!(none.to_table().contains("- m"));
    }

    #[test]
    fn aggregate_is_permutation_invariant() {
        let runs = vec![run(true, 0.1), run(false, 9.0), run(true, 0.3)];
        let mut rev = runs.clone();
        rev.reverse();
        assert_eq!(aggregate(runs).success_rate, aggregate(rev).success_rate);
    }
}
