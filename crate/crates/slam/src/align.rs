use nalgebra::{Matrix2, Vector2};

use crate::error::{Result, SlamError};
use crate::se2::Pose2;

/// Rigid motion `p ↦ R p + t` in the plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform2 {
    pub rotation: Matrix2<f64>,
    pub translation: Vector2<f64>,
}

impl RigidTransform2 {
    pub fn angle(&self) -> f64 {
        self.rotation[(1, 0)].atan2(self.rotation[(0, 0)])
    }

    pub fn apply(&self, p: &Vector2<f64>) -> Vector2<f64> {
        self.rotation * p + self.translation
    }
}

fn centroid(points: &[Vector2<f64>]) -> Vector2<f64> {
    points.iter().sum::<Vector2<f64>>() / points.len() as f64
}

/// Least-squares rigid registration (no scale) taking `source` onto `target`.
///
/// In the plane the optimal rotation angle is the argument of
/// `Σ (p̂_i · q̂_i) + i Σ (p̂_i × q̂_i)` over centred points.
pub fn umeyama_align(source: &[Vector2<f64>], target: &[Vector2<f64>]) -> Result<RigidTransform2> {
    if source.len() != target.len() {
        return Err(SlamError::LengthMismatch {
            expected: source.len(),
            got: target.len(),
        });
    }
    if source.len() < 2 {
        return Err(SlamError::DegenerateAlignment("need at least two points".into()));
    }
    let ps = centroid(source);
    let qs = centroid(target);
    let spread = |pts: &[Vector2<f64>], c: &Vector2<f64>| pts.iter().map(|p| (p - c).norm_squared()).sum::<f64>();
    let scale = 1.0 + ps.norm_squared() + qs.norm_squared();
    if spread(source, &ps) <= 1e-24 * scale || spread(target, &qs) <= 1e-24 * scale {
        return Err(SlamError::DegenerateAlignment("all points coincide".into()));
    }
    let (mut dot, mut cross) = (0.0, 0.0);
    for (p, q) in source.iter().zip(target) {
        let a = p - ps;
        let b = q - qs;
        dot += a.dot(&b);
        cross += a.x * b.y - a.y * b.x;
    }
    let theta = cross.atan2(dot);
    let (s, c) = theta.sin_cos();
    let rotation = Matrix2::new(c, -s, s, c);
    Ok(RigidTransform2 {
        rotation,
        translation: qs - rotation * ps,
    })
}

fn translations(poses: &[Pose2]) -> Vec<Vector2<f64>> {
    poses.iter().map(|p| p.translation()).collect()
}

/// Squared aligned translation error of every pose of `estimate`.
pub fn aligned_errors(truth: &[Pose2], estimate: &[Pose2]) -> Result<Vec<f64>> {
    if truth.len() != estimate.len() {
        return Err(SlamError::LengthMismatch {
            expected: truth.len(),
            got: estimate.len(),
        });
    }
    let t = translations(truth);
    let e = translations(estimate);
    let xf = umeyama_align(&e, &t)?;
    Ok(t.iter().zip(&e).map(|(x, m)| (x - xf.apply(m)).norm_squared()).collect())
}

/// Aligned absolute trajectory error `Σ_i ‖x_i − R μ_i − t‖²`.
pub fn ate(truth: &[Pose2], estimate: &[Pose2]) -> Result<f64> {
    Ok(aligned_errors(truth, estimate)?.iter().sum())
}

/// Worst-case ATE: each estimate is aligned on its own, then the per-pose
/// largest squared error is summed over poses.
pub fn wc_ate(truth: &[Pose2], estimates: &[Vec<Pose2>]) -> Result<f64> {
    if estimates.is_empty() {
        return Err(SlamError::LengthMismatch { expected: 1, got: 0 });
    }
    let per_source = estimates
        .iter()
        .map(|e| aligned_errors(truth, e))
        .collect::<Result<Vec<_>>>()?;
    Ok((0..truth.len())
        .map(|i| per_source.iter().map(|errs| errs[i]).fold(0.0, f64::max))
        .sum())
}
