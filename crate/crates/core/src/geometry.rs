//! Planar geometry primitives shared by every module.

use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};
use std::ops::{Add, Mul, Sub};

/// Wraps an angle into `[0, 2π)`.
#[inline]
pub fn wrap_two_pi(angle: f64) -> f64 {
    // Fast paths; both subtractions are exact and agree with rem_euclid.
    if (0.0..TAU).contains(&angle) {
        return angle;
    }
    if (TAU..2.0 * TAU).contains(&angle) {
        return angle - TAU;
    }
    let a = angle.rem_euclid(TAU);
    // rem_euclid can return TAU itself for tiny negative inputs.
    if a >= TAU {
        0.0
    } else {
        a
    }
}

/// Wraps an angle into `(-π, π]`.
pub fn wrap_pi(angle: f64) -> f64 {
    let a = wrap_two_pi(angle);
    if a > PI {
        a - TAU
    } else {
        a
    }
}

/// Signed shortest rotation taking `from` to `to`, in `(-π, π]`.
pub fn angle_diff(to: f64, from: f64) -> f64 {
    wrap_pi(to - from)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    /// Unit vector pointing at `angle` radians.
    pub fn from_angle(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self { x: c, y: s }
    }

    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn angle(self) -> f64 {
        self.y.atan2(self.x)
    }

    pub fn normalized(self) -> Option<Vec2> {
        let n = self.norm();
        (n > 0.0 && n.is_finite()).then(|| Vec2::new(self.x / n, self.y / n))
    }

    /// Counter-clockwise rotation by `angle`.
    pub fn rotated(self, angle: f64) -> Vec2 {
        let (s, c) = angle.sin_cos();
        Vec2::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, rhs: f64) -> Vec2 {
        Vec2::new(self.x * rhs, self.y * rhs)
    }
}

/// A planar pose. The heading is kept wrapped into `[0, 2π)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Pose2D {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Pose2D {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Self {
            x,
            y,
            theta: wrap_two_pi(theta),
        }
    }

    pub fn position(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.theta.is_finite()
    }

    /// Maps a point from this pose's local frame into the parent frame.
    pub fn transform_point(&self, local: Vec2) -> Vec2 {
        self.position() + local.rotated(self.theta)
    }

    /// Maps a parent-frame point into this pose's local frame.
    pub fn inverse_transform_point(&self, world: Vec2) -> Vec2 {
        (world - self.position()).rotated(-self.theta)
    }

    /// Composes a robot-frame increment `(dx, dy, dtheta)` onto this pose.
    pub fn compose(&self, dx: f64, dy: f64, dtheta: f64) -> Pose2D {
        let p = self.transform_point(Vec2::new(dx, dy));
        Pose2D::new(p.x, p.y, self.theta + dtheta)
    }

    /// The robot-frame increment that takes `self` to `other`.
    pub fn between(&self, other: &Pose2D) -> (f64, f64, f64) {
        let local = self.inverse_transform_point(other.position());
        (local.x, local.y, angle_diff(other.theta, self.theta))
    }
}

/// Axis-aligned rectangle given by its center and extents, in meters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
}

impl Rect {
    pub fn new(cx: f64, cy: f64, w: f64, h: f64) -> Self {
        Self { cx, cy, w, h }
    }

    pub fn from_bounds(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Self {
            cx: 0.5 * (x0 + x1),
            cy: 0.5 * (y0 + y1),
            w: x1 - x0,
            h: y1 - y0,
        }
    }

    pub fn min_x(&self) -> f64 {
        self.cx - 0.5 * self.w
    }
    pub fn max_x(&self) -> f64 {
        self.cx + 0.5 * self.w
    }
    pub fn min_y(&self) -> f64 {
        self.cy - 0.5 * self.h
    }
    pub fn max_y(&self) -> f64 {
        self.cy + 0.5 * self.h
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn is_valid(&self) -> bool {
        self.w > 0.0 && self.h > 0.0 && self.cx.is_finite() && self.cy.is_finite()
    }

    /// Closed containment test.
    pub fn contains(&self, p: Vec2) -> bool {
        p.x >= self.min_x() && p.x <= self.max_x() && p.y >= self.min_y() && p.y <= self.max_y()
    }

    /// True when the interiors overlap.
    pub fn overlaps(&self, other: &Rect) -> bool {
        self.min_x() < other.max_x()
            && other.min_x() < self.max_x()
            && self.min_y() < other.max_y()
            && other.min_y() < self.max_y()
    }

    pub fn corners(&self) -> [Vec2; 4] {
        [
            Vec2::new(self.min_x(), self.min_y()),
            Vec2::new(self.max_x(), self.min_y()),
            Vec2::new(self.max_x(), self.max_y()),
            Vec2::new(self.min_x(), self.max_y()),
        ]
    }

    /// Points along the perimeter, counter-clockwise from the lower-left
    /// corner, with at most `spacing` between neighbors. Corners are always
    /// included; each side is split into `ceil(len / spacing)` equal parts.
    pub fn perimeter_samples(&self, spacing: f64) -> Vec<Vec2> {
        let corners = self.corners();
        let mut out = Vec::new();
        for i in 0..4 {
            let a = corners[i];
            let b = corners[(i + 1) % 4];
            let len = (b - a).norm();
            let n = ((len / spacing).ceil() as usize).max(1);
            for k in 0..n {
                let t = k as f64 / n as f64;
                out.push(a + (b - a) * t);
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrapping() {
        assert_eq!(wrap_two_pi(0.0), 0.0);
        assert!((wrap_two_pi(-0.1) - (TAU - 0.1)).abs() < 1e-12);
        assert!((wrap_two_pi(TAU + 0.2) - 0.2).abs() < 1e-12);
        assert!(wrap_two_pi(-1e-18) < TAU);
        assert!((wrap_pi(TAU - 0.01) + 0.01).abs() < 1e-12);
        assert_eq!(wrap_pi(PI), PI);
        assert!((angle_diff(0.01, TAU - 0.01) - 0.02).abs() < 1e-12);
    }

    #[test]
    fn compose_and_between_are_inverse() {
        let a = Pose2D::new(1.0, 2.0, 0.7);
        let b = a.compose(0.3, -0.2, 0.4);
        let (dx, dy, dt) = a.between(&b);
        assert!((dx - 0.3).abs() < 1e-12);
        assert!((dy + 0.2).abs() < 1e-12);
        assert!((dt - 0.4).abs() < 1e-12);
    }

    #[test]
    fn perimeter_samples_cover_corners() {
        let r = Rect::new(0.0, 0.0, 1.0, 0.5);
        let s = r.perimeter_samples(0.1);
        assert_eq!(s.len(), 10 + 5 + 10 + 5);
        assert!(s.iter().all(|p| {
            let on_x = (p.x.abs() - 0.5).abs() < 1e-12;
            let on_y = (p.y.abs() - 0.25).abs() < 1e-12;
            on_x || on_y
        }));
    }
}
