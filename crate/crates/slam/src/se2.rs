use std::f64::consts::PI;

use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};

/// Wraps an angle into `(−π, π]`.
pub fn wrap_angle(theta: f64) -> f64 {
    let mut t = theta % (2.0 * PI);
    if t <= -PI {
        t += 2.0 * PI;
    } else if t > PI {
        t -= 2.0 * PI;
    }
    t
}

/// Planar rigid transform; `theta` is kept in `(−π, π]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose2 {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Pose2 {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Pose2 {
            x,
            y,
            theta: wrap_angle(theta),
        }
    }

    pub fn identity() -> Self {
        Pose2::new(0.0, 0.0, 0.0)
    }

    pub fn translation(&self) -> Vector2<f64> {
        Vector2::new(self.x, self.y)
    }

    pub fn rotation(&self) -> Matrix2<f64> {
        let (s, c) = self.theta.sin_cos();
        Matrix2::new(c, -s, s, c)
    }

    pub fn compose(&self, other: &Pose2) -> Pose2 {
        se2_compose(self, other)
    }

    pub fn inverse(&self) -> Pose2 {
        se2_inverse(self)
    }

    /// `self⁻¹ ∘ other`, the increment taking `self` to `other`.
    pub fn between(&self, other: &Pose2) -> Pose2 {
        se2_compose(&se2_inverse(self), other)
    }

    /// Maps a point from this pose's frame into the world frame.
    pub fn transform_point(&self, p: &Vector2<f64>) -> Vector2<f64> {
        self.rotation() * p + self.translation()
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.x, self.y, self.theta]
    }
}

pub fn se2_compose(a: &Pose2, b: &Pose2) -> Pose2 {
    let t = a.rotation() * b.translation() + a.translation();
    Pose2::new(t.x, t.y, a.theta + b.theta)
}

pub fn se2_inverse(a: &Pose2) -> Pose2 {
    let t = -(a.rotation().transpose() * a.translation());
    Pose2::new(t.x, t.y, -a.theta)
}
