use nalgebra::{Matrix3, SymmetricEigen, Vector2, Vector3};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SlamError};
use crate::se2::{wrap_angle, Pose2};

/// Parameters of the random-walk landmark world.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    /// Number of motion steps; the trajectory has `n_poses + 1` poses.
    pub n_poses: usize,
    /// Landmarks are drawn from `[−C, C]²`, the start from `[−C/2, C/2]²`.
    #[serde(rename = "C")]
    pub box_half_width: f64,
    /// Mean of each increment `η_i = X_{i−1}⁻¹ X_i`.
    pub step_mean: Pose2,
    /// Covariance of each increment in `(x, y, θ)`.
    pub step_cov: [[f64; 3]; 3],
    /// Odometry noise covariance in `(x, y, θ)`.
    pub sigma_odom: [[f64; 3]; 3],
    /// Bearing noise variance, rad².
    pub bearing_var: f64,
    /// Range noise variance is `range_var_coeff · d²`.
    pub range_var_coeff: f64,
    /// Standard deviation of the anchor prior on the first pose translation, m.
    pub anchor_sigma_xy: f64,
    /// Standard deviation of the anchor prior on the first pose heading, rad.
    pub anchor_sigma_theta: f64,
    /// When false the measurements are exact; the estimator still uses the
    /// configured noise model.
    pub inject_noise: bool,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            n_poses: 10,
            box_half_width: 10.0,
            step_mean: Pose2::new(1.0, 0.0, 0.1),
            step_cov: diag3(0.25, 0.25, 0.09),
            sigma_odom: diag3(1.0, 1.0, 0.0025),
            bearing_var: 0.0025,
            range_var_coeff: 0.01,
            anchor_sigma_xy: 0.01,
            anchor_sigma_theta: 0.01,
            inject_noise: true,
            seed: 0,
        }
    }
}

pub(crate) fn diag3(a: f64, b: f64, c: f64) -> [[f64; 3]; 3] {
    [[a, 0.0, 0.0], [0.0, b, 0.0], [0.0, 0.0, c]]
}

pub(crate) fn to_matrix3(m: &[[f64; 3]; 3]) -> Matrix3<f64> {
    Matrix3::from_fn(|i, j| m[i][j])
}

fn check_covariance(name: &str, m: &[[f64; 3]; 3]) -> Result<()> {
    let mat = to_matrix3(m);
    if (mat - mat.transpose()).amax() > 1e-12 * (1.0 + mat.amax()) {
        return Err(SlamError::InvalidConfig(format!("{name} is not symmetric")));
    }
    if mat.cholesky().is_none() {
        return Err(SlamError::InvalidConfig(format!("{name} is not positive definite")));
    }
    Ok(())
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_poses < 2 {
            return Err(SlamError::InvalidConfig(format!("n_poses must be at least 2, got {}", self.n_poses)));
        }
        if !(self.box_half_width > 0.0) || !self.box_half_width.is_finite() {
            return Err(SlamError::InvalidConfig(format!("C must be positive, got {}", self.box_half_width)));
        }
        check_covariance("step_cov", &self.step_cov)?;
        check_covariance("sigma_odom", &self.sigma_odom)?;
        for (name, v) in [
            ("bearing_var", self.bearing_var),
            ("range_var_coeff", self.range_var_coeff),
            ("anchor_sigma_xy", self.anchor_sigma_xy),
            ("anchor_sigma_theta", self.anchor_sigma_theta),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(SlamError::InvalidConfig(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// One range-bearing observation of a landmark from a pose.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RangeBearing {
    pub range: f64,
    pub bearing: f64,
}

impl RangeBearing {
    /// Exact polar coordinates of `landmark` in the frame of `pose`.
    pub fn observe(pose: &Pose2, landmark: &Vector2<f64>) -> Self {
        let d = landmark - pose.translation();
        RangeBearing {
            range: d.norm(),
            bearing: wrap_angle(d.y.atan2(d.x) - pose.theta),
        }
    }
}

/// Ground truth and measurements of one simulated run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimWorld {
    pub config: SimConfig,
    /// `X_0 … X_n`.
    pub truth_poses: Vec<Pose2>,
    pub landmarks: [[f64; 2]; 2],
    /// `Z_1 … Z_n`, measured increments.
    pub odom_measurements: Vec<Pose2>,
    /// `rb_measurements[s][i − 1]` is taken from `X_i` of landmark `s`.
    pub rb_measurements: [Vec<RangeBearing>; 2],
}

/// Matrix square root of a PSD covariance, for drawing correlated noise.
fn sqrt_psd(m: &[[f64; 3]; 3]) -> Matrix3<f64> {
    let eig = SymmetricEigen::new(to_matrix3(m));
    let d = Matrix3::from_diagonal(&eig.eigenvalues.map(|v| v.max(0.0).sqrt()));
    eig.eigenvectors * d * eig.eigenvectors.transpose()
}

fn normal3(rng: &mut ChaCha8Rng) -> Vector3<f64> {
    Vector3::from_fn(|_, _| rng.sample(StandardNormal))
}

pub fn simulate_world(config: &SimConfig) -> Result<SimWorld> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let c = config.box_half_width;
    let mut landmarks = [[0.0; 2]; 2];
    for l in landmarks.iter_mut() {
        *l = [rng.random_range(-c..=c), rng.random_range(-c..=c)];
    }
    let start = Pose2::new(
        rng.random_range(-c / 2.0..=c / 2.0),
        rng.random_range(-c / 2.0..=c / 2.0),
        rng.random_range(-std::f64::consts::PI..std::f64::consts::PI),
    );
    let step_root = sqrt_psd(&config.step_cov);
    let odom_root = sqrt_psd(&config.sigma_odom);
    let noise_scale = if config.inject_noise { 1.0 } else { 0.0 };
    let mean = config.step_mean;
    let lm: [Vector2<f64>; 2] = landmarks.map(|l| Vector2::new(l[0], l[1]));

    let mut truth_poses = vec![start];
    let mut odom_measurements = Vec::with_capacity(config.n_poses);
    let mut rb_measurements = [Vec::with_capacity(config.n_poses), Vec::with_capacity(config.n_poses)];
    for _ in 0..config.n_poses {
        let e = step_root * normal3(&mut rng);
        let eta = Pose2::new(mean.x + e.x, mean.y + e.y, mean.theta + e.z);
        let pose = truth_poses.last().unwrap().compose(&eta);
        truth_poses.push(pose);

        let w = odom_root * normal3(&mut rng) * noise_scale;
        odom_measurements.push(Pose2::new(eta.x + w.x, eta.y + w.y, eta.theta + w.z));

        for (s, landmark) in lm.iter().enumerate() {
            let exact = RangeBearing::observe(&pose, landmark);
            let range_sd = (config.range_var_coeff * exact.range * exact.range).sqrt();
            let nr: f64 = rng.sample(StandardNormal);
            let nb: f64 = rng.sample(StandardNormal);
            rb_measurements[s].push(RangeBearing {
                range: exact.range + noise_scale * range_sd * nr,
                bearing: wrap_angle(exact.bearing + noise_scale * config.bearing_var.sqrt() * nb),
            });
        }
    }
    Ok(SimWorld {
        config: config.clone(),
        truth_poses,
        landmarks,
        odom_measurements,
        rb_measurements,
    })
}

impl SimWorld {
    pub fn n_poses(&self) -> usize {
        self.odom_measurements.len()
    }

    pub fn landmark(&self, s: usize) -> Vector2<f64> {
        Vector2::new(self.landmarks[s][0], self.landmarks[s][1])
    }

    /// True distances from `X_1 … X_n` to each landmark.
    pub fn posewise_distances(&self) -> [Vec<f64>; 2] {
        [0, 1].map(|s| {
            let l = self.landmark(s);
            self.truth_poses[1..].iter().map(|p| (l - p.translation()).norm()).collect()
        })
    }

    /// Mean of [`SimWorld::posewise_distances`] per landmark.
    pub fn mean_distances(&self) -> [f64; 2] {
        self.posewise_distances().map(|d| d.iter().sum::<f64>() / d.len() as f64)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("world serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let world: SimWorld = serde_json::from_str(s).map_err(|e| SlamError::Json(e.to_string()))?;
        let n = world.config.n_poses;
        let counts = [
            (n + 1, world.truth_poses.len()),
            (n, world.odom_measurements.len()),
            (n, world.rb_measurements[0].len()),
            (n, world.rb_measurements[1].len()),
        ];
        if let Some(&(expected, got)) = counts.iter().find(|(e, g)| e != g) {
            return Err(SlamError::LengthMismatch { expected, got });
        }
        Ok(world)
    }
}
