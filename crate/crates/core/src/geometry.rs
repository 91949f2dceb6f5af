//! Planar rigid-motion helpers shared by the sensor simulator and SLAM.

use std::f64::consts::PI;

/// Wraps an angle into `(-pi, pi]`.
pub fn normalize_angle(a: f64) -> f64 {
    if !a.is_finite() {
        return a;
    }
    let mut r = a % (2.0 * PI);
    if r <= -PI {
        r += 2.0 * PI;
    } else if r > PI {
        r -= 2.0 * PI;
    }
    r
}

/// Rotates `v` counter-clockwise by `angle`.
#[inline]
pub fn rotate(angle: f64, v: [f64; 2]) -> [f64; 2] {
    let (s, c) = angle.sin_cos();
    [c * v[0] - s * v[1], s * v[0] + c * v[1]]
}

#[inline]
pub fn dist2(a: [f64; 2], b: [f64; 2]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    dx * dx + dy * dy
}

/// A planar pose: world position plus heading.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose2 {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
}

impl Pose2 {
    pub fn new(x: f64, y: f64, heading: f64) -> Self {
        Self { x, y, heading }
    }

    /// Maps a point from this pose's body frame into the world frame.
    pub fn transform(&self, p: [f64; 2]) -> [f64; 2] {
        let r = rotate(self.heading, p);
        [r[0] + self.x, r[1] + self.y]
    }

    /// Maps a world point into this pose's body frame.
    pub fn inverse_transform(&self, p: [f64; 2]) -> [f64; 2] {
        rotate(-self.heading, [p[0] - self.x, p[1] - self.y])
    }
}
