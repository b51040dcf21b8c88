use fgr_core::{IndexSet, SymMatrix};
use nalgebra::{DMatrix, DVector, Matrix3, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SlamError};
use crate::se2::{wrap_angle, Pose2};
use crate::sim::{to_matrix3, SimWorld};

/// Values of every variable: poses first, then landmarks.
///
/// The stacked vector is `(x_0, y_0, θ_0, …, x_{P−1}, y_{P−1}, θ_{P−1}, l_0x, l_0y, …)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Values {
    pub poses: Vec<Pose2>,
    pub landmarks: Vec<[f64; 2]>,
}

impl Values {
    pub fn new(poses: Vec<Pose2>, landmarks: Vec<[f64; 2]>) -> Self {
        Values { poses, landmarks }
    }

    pub fn dim(&self) -> usize {
        3 * self.poses.len() + 2 * self.landmarks.len()
    }

    pub fn landmark(&self, s: usize) -> Vector2<f64> {
        Vector2::new(self.landmarks[s][0], self.landmarks[s][1])
    }

    pub fn to_vector(&self) -> DVector<f64> {
        let mut v = Vec::with_capacity(self.dim());
        for p in &self.poses {
            v.extend_from_slice(&p.as_array());
        }
        for l in &self.landmarks {
            v.extend_from_slice(l);
        }
        DVector::from_vec(v)
    }

    /// Adds a tangent step; headings are re-wrapped.
    pub fn retract(&self, delta: &DVector<f64>) -> Values {
        let poses = self
            .poses
            .iter()
            .enumerate()
            .map(|(k, p)| Pose2::new(p.x + delta[3 * k], p.y + delta[3 * k + 1], p.theta + delta[3 * k + 2]))
            .collect();
        let off = 3 * self.poses.len();
        let landmarks = self
            .landmarks
            .iter()
            .enumerate()
            .map(|(s, l)| [l[0] + delta[off + 2 * s], l[1] + delta[off + 2 * s + 1]])
            .collect();
        Values { poses, landmarks }
    }

    /// Applies the rigid motion `t` to every pose and landmark.
    pub fn transformed(&self, t: &Pose2) -> Values {
        Values {
            poses: self.poses.iter().map(|p| t.compose(p)).collect(),
            landmarks: self
                .landmarks
                .iter()
                .map(|l| {
                    let q = t.transform_point(&Vector2::new(l[0], l[1]));
                    [q.x, q.y]
                })
                .collect(),
        }
    }
}

/// A factor of the landmark SLAM problem.
#[derive(Debug, Clone, PartialEq)]
pub enum Factor {
    /// Gaussian prior on one pose.
    Prior { pose: usize, mean: Pose2, precision: Matrix3<f64> },
    /// Relative pose measurement `X_from⁻¹ X_to`.
    Odometry { from: usize, to: usize, measured: Pose2, precision: Matrix3<f64> },
    /// Range and bearing of a landmark seen from a pose. The range variance is
    /// `range_var_coeff · d²` with `d` the distance at the evaluation point.
    RangeBearing {
        pose: usize,
        landmark: usize,
        measured: crate::sim::RangeBearing,
        range_var_coeff: f64,
        bearing_var: f64,
    },
    /// Already linear factor `exp(-½‖A x − z‖²_Γ)` over the stacked state.
    Linear { a: DMatrix<f64>, z: DVector<f64>, gamma: SymMatrix },
}

/// Residual, Jacobian and precision of one factor at a point.
#[derive(Debug, Clone)]
pub struct FactorEvaluation {
    pub residual: DVector<f64>,
    /// Jacobian with respect to the full stacked state.
    pub jacobian: DMatrix<f64>,
    pub precision: DMatrix<f64>,
}

impl FactorEvaluation {
    pub fn cost(&self) -> f64 {
        0.5 * (self.residual.transpose() * &self.precision * &self.residual)[(0, 0)]
    }
}

/// Nonlinear factor graph over poses and landmarks with a designated base set.
#[derive(Debug, Clone)]
pub struct NonlinearGraph {
    n_poses: usize,
    n_landmarks: usize,
    factors: Vec<Factor>,
    base: IndexSet,
}

fn pose_col(k: usize) -> usize {
    3 * k
}

impl NonlinearGraph {
    pub fn new(n_poses: usize, n_landmarks: usize, factors: Vec<Factor>, base: IndexSet) -> Result<Self> {
        let g = NonlinearGraph {
            n_poses,
            n_landmarks,
            factors,
            base,
        };
        if let Some(i) = g.base.iter().find(|&i| i >= g.factors.len()) {
            return Err(SlamError::InvalidSubset(format!("base index {i} out of range")));
        }
        let dim = g.state_dim();
        let mut touched = vec![false; dim];
        for (i, f) in g.factors.iter().enumerate() {
            let bad = |what: &str| SlamError::InvalidSubset(format!("factor {i}: {what} out of range"));
            match f {
                Factor::Prior { pose, .. } if *pose >= n_poses => return Err(bad("pose")),
                Factor::Odometry { from, to, .. } if *from >= n_poses || *to >= n_poses => return Err(bad("pose")),
                Factor::RangeBearing { pose, landmark, .. } if *pose >= n_poses || *landmark >= n_landmarks => {
                    return Err(bad("variable"))
                }
                Factor::Linear { a, z, gamma } if a.ncols() != dim || a.nrows() != z.len() || z.len() != gamma.dim() => {
                    return Err(bad("linear factor shape"))
                }
                _ => {}
            }
            for c in g.factor_columns(i) {
                touched[c] = true;
            }
        }
        if let Some(c) = touched.iter().position(|t| !t) {
            return Err(SlamError::InvalidSubset(format!("state coordinate {c} is not touched by any factor")));
        }
        Ok(g)
    }

    /// Anchor prior, one odometry factor per step, then the range-bearing
    /// factors of landmark 0 followed by those of landmark 1.
    ///
    /// Factor `0` is the anchor, `i ∈ 1..=n` the odometry `Z_i`, and
    /// `(s + 1)n + i` the range-bearing factor from `X_i` to landmark `s`.
    pub fn from_world(world: &SimWorld) -> Result<Self> {
        let cfg = &world.config;
        cfg.validate()?;
        let n = world.n_poses();
        let anchor_var = [cfg.anchor_sigma_xy.powi(2), cfg.anchor_sigma_xy.powi(2), cfg.anchor_sigma_theta.powi(2)];
        let mut factors = vec![Factor::Prior {
            pose: 0,
            mean: world.truth_poses[0],
            precision: Matrix3::from_diagonal(&anchor_var.map(|v| 1.0 / v).into()),
        }];
        let odom_precision = to_matrix3(&cfg.sigma_odom)
            .try_inverse()
            .ok_or_else(|| SlamError::InvalidConfig("sigma_odom is singular".into()))?;
        for (k, z) in world.odom_measurements.iter().enumerate() {
            factors.push(Factor::Odometry {
                from: k,
                to: k + 1,
                measured: *z,
                precision: odom_precision,
            });
        }
        for (s, obs) in world.rb_measurements.iter().enumerate() {
            for (k, m) in obs.iter().enumerate() {
                factors.push(Factor::RangeBearing {
                    pose: k + 1,
                    landmark: s,
                    measured: *m,
                    range_var_coeff: cfg.range_var_coeff,
                    bearing_var: cfg.bearing_var,
                });
            }
        }
        NonlinearGraph::new(n + 1, 2, factors, IndexSet::range(0..n + 1))
    }

    pub fn n_poses(&self) -> usize {
        self.n_poses
    }

    pub fn n_landmarks(&self) -> usize {
        self.n_landmarks
    }

    pub fn pose_dim(&self) -> usize {
        3 * self.n_poses
    }

    pub fn state_dim(&self) -> usize {
        3 * self.n_poses + 2 * self.n_landmarks
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    pub fn base(&self) -> &IndexSet {
        &self.base
    }

    pub fn supplemental(&self) -> IndexSet {
        IndexSet::new((0..self.factors.len()).filter(|&i| !self.base.contains(i)).collect())
    }

    fn landmark_col(&self, s: usize) -> usize {
        3 * self.n_poses + 2 * s
    }

    /// Range-bearing factors that observe landmark `s`.
    pub fn landmark_source(&self, s: usize) -> IndexSet {
        IndexSet::new(
            self.factors
                .iter()
                .enumerate()
                .filter(|(_, f)| matches!(f, Factor::RangeBearing { landmark, .. } if *landmark == s))
                .map(|(i, _)| i)
                .collect(),
        )
    }

    /// State coordinates a factor depends on.
    pub fn factor_columns(&self, index: usize) -> Vec<usize> {
        match &self.factors[index] {
            Factor::Prior { pose, .. } => (0..3).map(|c| pose_col(*pose) + c).collect(),
            Factor::Odometry { from, to, .. } => {
                let mut cols: Vec<usize> = (0..3).map(|c| pose_col(*from) + c).collect();
                cols.extend((0..3).map(|c| pose_col(*to) + c));
                cols
            }
            Factor::RangeBearing { pose, landmark, .. } => {
                let mut cols: Vec<usize> = (0..3).map(|c| pose_col(*pose) + c).collect();
                cols.extend((0..2).map(|c| self.landmark_col(*landmark) + c));
                cols
            }
            Factor::Linear { a, .. } => (0..a.ncols()).filter(|&c| a.column(c).iter().any(|v| *v != 0.0)).collect(),
        }
    }

    /// Residual `h(x) − z` (angles wrapped), its Jacobian and the precision.
    pub fn evaluate(&self, index: usize, values: &Values) -> Result<FactorEvaluation> {
        let dim = self.state_dim();
        if values.dim() != dim {
            return Err(SlamError::LengthMismatch {
                expected: dim,
                got: values.dim(),
            });
        }
        let eval = match &self.factors[index] {
            Factor::Prior { pose, mean, precision } => {
                let p = values.poses[*pose];
                let residual = DVector::from_vec(vec![p.x - mean.x, p.y - mean.y, wrap_angle(p.theta - mean.theta)]);
                let mut jac = DMatrix::zeros(3, dim);
                jac.view_mut((0, pose_col(*pose)), (3, 3)).fill_with_identity();
                FactorEvaluation {
                    residual,
                    jacobian: jac,
                    precision: DMatrix::from_iterator(3, 3, precision.iter().copied()),
                }
            }
            Factor::Odometry {
                from,
                to,
                measured,
                precision,
            } => {
                let a = values.poses[*from];
                let b = values.poses[*to];
                let (s, c) = a.theta.sin_cos();
                let dx = b.x - a.x;
                let dy = b.y - a.y;
                let px = c * dx + s * dy;
                let py = -s * dx + c * dy;
                let residual = DVector::from_vec(vec![
                    px - measured.x,
                    py - measured.y,
                    wrap_angle(b.theta - a.theta - measured.theta),
                ]);
                let mut jac = DMatrix::zeros(3, dim);
                let fa = pose_col(*from);
                let fb = pose_col(*to);
                // ∂p/∂t_a = −Rᵀ, ∂p/∂θ_a = (p_y, −p_x), ∂p/∂t_b = Rᵀ
                jac[(0, fa)] = -c;
                jac[(0, fa + 1)] = -s;
                jac[(0, fa + 2)] = py;
                jac[(1, fa)] = s;
                jac[(1, fa + 1)] = -c;
                jac[(1, fa + 2)] = -px;
                jac[(2, fa + 2)] = -1.0;
                jac[(0, fb)] = c;
                jac[(0, fb + 1)] = s;
                jac[(1, fb)] = -s;
                jac[(1, fb + 1)] = c;
                jac[(2, fb + 2)] = 1.0;
                FactorEvaluation {
                    residual,
                    jacobian: jac,
                    precision: DMatrix::from_iterator(3, 3, precision.iter().copied()),
                }
            }
            Factor::RangeBearing {
                pose,
                landmark,
                measured,
                range_var_coeff,
                bearing_var,
            } => {
                let p = values.poses[*pose];
                let delta = values.landmark(*landmark) - p.translation();
                let q = delta.norm_squared();
                let r = q.sqrt();
                if !(r > 1e-9) {
                    return Err(SlamError::DegenerateGeometry {
                        pose: *pose,
                        landmark: *landmark,
                    });
                }
                let residual = DVector::from_vec(vec![
                    r - measured.range,
                    wrap_angle(delta.y.atan2(delta.x) - p.theta - measured.bearing),
                ]);
                let mut jac = DMatrix::zeros(2, dim);
                let fp = pose_col(*pose);
                let fl = self.landmark_col(*landmark);
                jac[(0, fp)] = -delta.x / r;
                jac[(0, fp + 1)] = -delta.y / r;
                jac[(0, fl)] = delta.x / r;
                jac[(0, fl + 1)] = delta.y / r;
                jac[(1, fp)] = delta.y / q;
                jac[(1, fp + 1)] = -delta.x / q;
                jac[(1, fp + 2)] = -1.0;
                jac[(1, fl)] = -delta.y / q;
                jac[(1, fl + 1)] = delta.x / q;
                FactorEvaluation {
                    residual,
                    jacobian: jac,
                    precision: DMatrix::from_diagonal(&DVector::from_vec(vec![
                        1.0 / (range_var_coeff * q),
                        1.0 / bearing_var,
                    ])),
                }
            }
            Factor::Linear { a, z, gamma } => FactorEvaluation {
                residual: a * values.to_vector() - z,
                jacobian: a.clone(),
                precision: gamma.as_matrix().clone(),
            },
        };
        Ok(eval)
    }

    /// Total cost `½ Σ ‖r_i‖²_{Γ_i}` over a factor subset.
    pub fn cost(&self, subset: &IndexSet, values: &Values) -> Result<f64> {
        subset.iter().map(|i| self.evaluate(i, values).map(|e| e.cost())).sum()
    }

    /// Dead-reckoned poses from the prior and odometry chain; each landmark is
    /// placed using its first range-bearing factor.
    pub fn initial_estimate(&self) -> Values {
        let mut poses: Vec<Option<Pose2>> = vec![None; self.n_poses];
        for f in &self.factors {
            if let Factor::Prior { pose, mean, .. } = f {
                poses[*pose].get_or_insert(*mean);
            }
        }
        // relax the chain until no odometry factor adds a pose
        loop {
            let mut changed = false;
            for f in &self.factors {
                if let Factor::Odometry { from, to, measured, .. } = f {
                    if let (Some(a), None) = (poses[*from], poses[*to]) {
                        poses[*to] = Some(a.compose(measured));
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        let poses: Vec<Pose2> = poses.into_iter().map(|p| p.unwrap_or_else(Pose2::identity)).collect();
        let mut landmarks: Vec<Option<[f64; 2]>> = vec![None; self.n_landmarks];
        for f in &self.factors {
            if let Factor::RangeBearing {
                pose, landmark, measured, ..
            } = f
            {
                let p = poses[*pose];
                landmarks[*landmark].get_or_insert_with(|| {
                    let ang = p.theta + measured.bearing;
                    [p.x + measured.range * ang.cos(), p.y + measured.range * ang.sin()]
                });
            }
        }
        Values {
            poses,
            landmarks: landmarks.into_iter().map(|l| l.unwrap_or([0.0, 0.0])).collect(),
        }
    }

    /// One position guess for `landmark` per range-bearing factor, placed from
    /// the measuring pose in `values`.
    pub fn landmark_guesses(&self, values: &Values, landmark: usize) -> Vec<[f64; 2]> {
        self.factors
            .iter()
            .filter_map(|f| match f {
                Factor::RangeBearing {
                    pose,
                    landmark: l,
                    measured,
                    ..
                } if *l == landmark => {
                    let p = values.poses[*pose];
                    let ang = p.theta + measured.bearing;
                    Some([p.x + measured.range * ang.cos(), p.y + measured.range * ang.sin()])
                }
                _ => None,
            })
            .collect()
    }
}
