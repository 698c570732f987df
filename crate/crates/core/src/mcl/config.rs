use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::FilterError;

/// Which observation models and initialization the filter uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mode {
    #[serde(rename = "MCL")]
    Mcl,
    #[serde(rename = "SMCL")]
    Smcl,
    #[serde(rename = "HMCL")]
    Hmcl,
    #[serde(rename = "HSMCL")]
    Hsmcl,
}

impl Mode {
    pub const ALL: [Mode; 4] = [Mode::Mcl, Mode::Smcl, Mode::Hmcl, Mode::Hsmcl];

    pub fn uses_semantic_weights(self) -> bool {
        matches!(self, Mode::Smcl | Mode::Hsmcl)
    }

    pub fn uses_hierarchical_init(self) -> bool {
        matches!(self, Mode::Hmcl | Mode::Hsmcl)
    }

    /// Whether detection records influence the filter at all.
    pub fn consumes_detections(self) -> bool {
        self != Mode::Mcl
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Mcl => "MCL",
            Mode::Smcl => "SMCL",
            Mode::Hmcl => "HMCL",
            Mode::Hsmcl => "HSMCL",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = FilterError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Mode::ALL
            .into_iter()
            .find(|m| m.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| FilterError::BadConfig(format!("unknown mode {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterConfig {
    pub particles: usize,
    /// Odometry noise `(x, y, θ)`, relative to the increment magnitude.
    pub sigma_odom: [f64; 3],
    /// Smallest increment magnitude used when scaling odometry noise.
    pub odom_noise_floor: f64,
    pub sigma_obs: f64,
    pub r_max: f64,
    pub tau_conf: f64,
    pub tau_s: f64,
    pub d_xy: f64,
    pub d_theta: f64,
    pub beam_stride: usize,
    /// Resample when ESS drops below this fraction of the particle count.
    pub resample_ess_fraction: f64,
    pub mode: Mode,
    pub mask_dynamic: bool,
    /// Detections older than this (seconds) are not used for masking.
    pub mask_max_age: f64,
    /// Detection sets accumulated before room classification.
    pub classification_window: usize,
    pub knn_k: usize,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            particles: 10_000,
            sigma_odom: [0.15, 0.15, 0.15],
            odom_noise_floor: 0.01,
            sigma_obs: 6.0,
            r_max: 15.0,
            tau_conf: 0.5,
            tau_s: 0.6,
            d_xy: 0.1,
            d_theta: 0.03,
            beam_stride: 10,
            resample_ess_fraction: 0.5,
            mode: Mode::Hsmcl,
            mask_dynamic: true,
            mask_max_age: 0.5,
            classification_window: 5,
            knn_k: 1,
        }
    }
}

impl FilterConfig {
    pub fn with_mode(mut self, mode: Mode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_particles(mut self, n: usize) -> Self {
        self.particles = n;
        self
    }

    pub fn validate(&self) -> Result<(), FilterError> {
        let bad = |what: &str| Err(FilterError::BadConfig(what.to_string()));
        if self.particles == 0 {
            return Err(FilterError::NoParticles);
        }
        if self.sigma_odom.iter().any(|s| !(*s >= 0.0 && s.is_finite())) {
            return bad("sigma_odom components must be finite and non-negative");
        }
        for (name, v) in [
            ("sigma_obs", self.sigma_obs),
            ("r_max", self.r_max),
            ("tau_s", self.tau_s),
            ("d_xy", self.d_xy),
            ("d_theta", self.d_theta),
            ("odom_noise_floor", self.odom_noise_floor),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(&format!("{name} must be positive, got {v}"));
            }
        }
        if !(0.0..=1.0).contains(&self.tau_conf) {
            return bad("tau_conf must be in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.resample_ess_fraction) {
            return bad("resample_ess_fraction must be in [0, 1]");
        }
        if self.beam_stride == 0 || self.knn_k == 0 || self.classification_window == 0 {
            return bad("beam_stride, knn_k and classification_window must be at least 1");
        }
        if !(self.mask_max_age >= 0.0) {
            return bad("mask_max_age must be non-negative");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_partial_documents() {
        let c: FilterConfig = serde_json::from_str(r#"{"mode": "MCL", "particles": 500}"#).unwrap();
        assert_eq!(c.mode, Mode::Mcl);
        assert_eq!(c.particles, 500);
        assert_eq!(c.sigma_odom, [0.15; 3]);
        assert_eq!(c.sigma_obs, 6.0);
        assert_eq!((c.d_xy, c.d_theta, c.tau_s, c.r_max), (0.1, 0.03, 0.6, 15.0));
        c.validate().unwrap();
        assert!(serde_json::from_str::<FilterConfig>(r#"{"partcles": 5}"#).is_err());
    }

    #[test]
    fn mode_parsing() {
        assert_eq!("hsmcl".parse::<Mode>().unwrap(), Mode::Hsmcl);
        assert!("AMCL".parse::<Mode>().is_err());
        assert!(!Mode::Mcl.consumes_detections());
        assert!(Mode::Hmcl.uses_hierarchical_init() && !Mode::Hmcl.uses_semantic_weights());
    }

    #[test]
    fn validation() {
        assert!(FilterConfig { d_xy: 0.0, ..Default::default() }.validate().is_err());
        assert!(FilterConfig { particles: 0, ..Default::default() }.validate().is_err());
        assert!(FilterConfig { tau_conf: 1.5, ..Default::default() }.validate().is_err());
    }
}
