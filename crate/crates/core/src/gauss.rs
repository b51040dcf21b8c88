//! Dense symmetric matrices and information-form Gaussian beliefs.
//!
//! Everything here is desk-scale: states of a few dozen coordinates at most,
//! so matrices are stored densely and inverses are materialized when a
//! quantity is reused.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative tolerance on the smallest Cholesky pivot.
pub const PIVOT_TOL: f64 = 1e-10;

/// Relative tolerance for accepting a matrix as symmetric.
pub const SYMMETRY_TOL: f64 = 1e-10;

/// Eigenvalue slack used when checking positive semidefiniteness.
pub const PSD_TOL: f64 = 1e-10;

/// A square symmetric matrix.
///
/// Symmetry is restored on construction by averaging with the transpose.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix(DMatrix<f64>);

impl SymMatrix {
    /// Checked constructor: rejects matrices whose asymmetry exceeds
    /// [`SYMMETRY_TOL`] relative to the largest entry.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::NotSquare {
                rows: m.nrows(),
                cols: m.ncols(),
            });
        }
        let scale = m.amax().max(1.0);
        let asym = (&m - m.transpose()).amax();
        if asym > SYMMETRY_TOL * scale {
            return Err(Error::NotSymmetric { asymmetry: asym });
        }
        Ok(Self::symmetrize(m))
    }

    /// Averages `m` with its transpose without checking how far apart they were.
    ///
    /// Used for derived products such as `Λ_B Λ̃⁻¹ Λ_B` whose asymmetry is
    /// pure rounding.
    pub fn symmetrize(m: DMatrix<f64>) -> Self {
        assert_eq!(m.nrows(), m.ncols(), "symmetrize needs a square matrix");
        let t = m.transpose();
        SymMatrix((m + t) * 0.5)
    }

    pub fn zeros(dim: usize) -> Self {
        SymMatrix(DMatrix::zeros(dim, dim))
    }

    pub fn identity(dim: usize) -> Self {
        SymMatrix(DMatrix::identity(dim, dim))
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        SymMatrix(DMatrix::from_diagonal(&DVector::from_column_slice(diag)))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }

    /// `vᵀ M v` with no sign checks.
    pub fn quad_form(&self, v: &DVector<f64>) -> f64 {
        debug_assert_eq!(v.len(), self.dim());
        v.dot(&(&self.0 * v))
    }

    pub fn min_eigenvalue(&self) -> f64 {
        if self.dim() == 0 {
            return 0.0;
        }
        self.0.clone().symmetric_eigenvalues().min()
    }

    pub fn is_psd(&self) -> bool {
        let scale = self.0.amax().max(1.0);
        self.min_eigenvalue() >= -PSD_TOL * scale
    }

    pub fn cholesky(&self) -> Result<Cholesky> {
        Cholesky::new(self)
    }
}

impl std::ops::Add for &SymMatrix {
    type Output = SymMatrix;
    fn add(self, rhs: &SymMatrix) -> SymMatrix {
        SymMatrix(&self.0 + &rhs.0)
    }
}

impl std::ops::Sub for &SymMatrix {
    type Output = SymMatrix;
    fn sub(self, rhs: &SymMatrix) -> SymMatrix {
        SymMatrix(&self.0 - &rhs.0)
    }
}

/// Lower-triangular Cholesky factor `M = L Lᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct Cholesky {
    l: DMatrix<f64>,
}

impl Cholesky {
    /// Factorizes `m`, failing on the first leading minor whose pivot falls
    /// below [`PIVOT_TOL`] times the largest diagonal entry.
    pub fn new(m: &SymMatrix) -> Result<Self> {
        let a = m.as_matrix();
        let n = a.nrows();
        let scale = (0..n).map(|i| a[(i, i)].abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        let mut l = DMatrix::<f64>::zeros(n, n);
        for j in 0..n {
            let mut d = a[(j, j)];
            for k in 0..j {
                d -= l[(j, k)] * l[(j, k)];
            }
            if !(d > PIVOT_TOL * scale) {
                return Err(Error::NotPositiveDefinite {
                    minor: j + 1,
                    pivot: d,
                });
            }
            let ljj = d.sqrt();
            l[(j, j)] = ljj;
            for i in (j + 1)..n {
                let mut s = a[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / ljj;
            }
        }
        Ok(Cholesky { l })
    }

    pub fn l(&self) -> &DMatrix<f64> {
        &self.l
    }

    pub fn dim(&self) -> usize {
        self.l.nrows()
    }

    pub fn logdet(&self) -> f64 {
        2.0 * self.l.diagonal().iter().map(|d| d.ln()).sum::<f64>()
    }

    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let y = self
            .l
            .solve_lower_triangular(b)
            .expect("cholesky factor has a positive diagonal");
        self.l
            .tr_solve_lower_triangular(&y)
            .expect("cholesky factor has a positive diagonal")
    }

    pub fn solve_matrix(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        let y = self
            .l
            .solve_lower_triangular(b)
            .expect("cholesky factor has a positive diagonal");
        self.l
            .tr_solve_lower_triangular(&y)
            .expect("cholesky factor has a positive diagonal")
    }

    /// `L⁻ᵀ v`; maps a standard normal draw to one with covariance `M⁻¹`.
    pub fn whiten_inverse(&self, v: &DVector<f64>) -> DVector<f64> {
        self.l
            .tr_solve_lower_triangular(v)
            .expect("cholesky factor has a positive diagonal")
    }

    pub fn inverse(&self) -> SymMatrix {
        let n = self.dim();
        SymMatrix::symmetrize(self.solve_matrix(&DMatrix::identity(n, n)))
    }
}

/// `vᵀ M v` for a positive semidefinite `M`.
///
/// Tiny negative results from rounding are clamped to zero. A matrix with an
/// eigenvalue below `-PSD_TOL` (relative) is rejected.
pub fn mahalanobis_sq(v: &DVector<f64>, m: &SymMatrix) -> Result<f64> {
    if v.len() != m.dim() {
        return Err(Error::DimensionMismatch {
            expected: m.dim(),
            got: v.len(),
        });
    }
    let scale = m.as_matrix().amax().max(1.0);
    let lambda_min = m.min_eigenvalue();
    if lambda_min < -PSD_TOL * scale {
        return Err(Error::NotPositiveSemidefinite {
            eigenvalue: lambda_min,
        });
    }
    let q = m.quad_form(v);
    Ok(if q < 0.0 && q >= -1e-12 * scale { 0.0 } else { q.max(0.0) })
}

/// `ln |M|` for positive definite `M`.
pub fn logdet_pd(m: &SymMatrix) -> Result<f64> {
    Ok(m.cholesky()?.logdet())
}

/// A Gaussian in information form: mean `μ` and precision `Λ`.
#[derive(Debug, Clone)]
pub struct GaussianBelief {
    mean: DVector<f64>,
    info: SymMatrix,
    chol: Cholesky,
}

impl GaussianBelief {
    pub fn new(mean: DVector<f64>, info: SymMatrix) -> Result<Self> {
        if mean.len() != info.dim() {
            return Err(Error::DimensionMismatch {
                expected: info.dim(),
                got: mean.len(),
            });
        }
        let chol = info.cholesky()?;
        Ok(GaussianBelief { mean, info, chol })
    }

    /// Builds the belief whose precision is `info` and whose mean solves
    /// `Λ μ = eta`.
    pub fn from_canonical(eta: &DVector<f64>, info: SymMatrix) -> Result<Self> {
        if eta.len() != info.dim() {
            return Err(Error::DimensionMismatch {
                expected: info.dim(),
                got: eta.len(),
            });
        }
        let chol = info.cholesky()?;
        let mean = chol.solve(eta);
        Ok(GaussianBelief { mean, info, chol })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn info(&self) -> &SymMatrix {
        &self.info
    }

    pub fn cholesky(&self) -> &Cholesky {
        &self.chol
    }

    pub fn covariance(&self) -> SymMatrix {
        self.chol.inverse()
    }

    pub fn logdet_info(&self) -> f64 {
        self.chol.logdet()
    }
}

fn check_update_dims(belief: &GaussianBelief, delta: &SymMatrix, x: &DVector<f64>) -> Result<()> {
    let n = belief.dim();
    for got in [delta.dim(), x.len()] {
        if got != n {
            return Err(Error::DimensionMismatch { expected: n, got });
        }
    }
    Ok(())
}

/// `E(μ̃_J | x) = Λ̃⁻¹(Λ_B μ_B + Δ_J x)` with `Λ̃ = Λ_B + Δ_J`.
pub fn conditional_mean_posterior(
    belief_b: &GaussianBelief,
    delta_j: &SymMatrix,
    x: &DVector<f64>,
) -> Result<DVector<f64>> {
    check_update_dims(belief_b, delta_j, x)?;
    let post = belief_b.info() + delta_j;
    let chol = post.cholesky()?;
    Ok(chol.solve(&conditional_numerator(belief_b, delta_j, x)))
}

fn conditional_numerator(belief_b: &GaussianBelief, delta_j: &SymMatrix, x: &DVector<f64>) -> DVector<f64> {
    belief_b.info().as_matrix() * belief_b.mean() + delta_j.as_matrix() * x
}

/// `E(‖μ̃_J + m‖²_T | x) = tr(T Λ̃⁻¹ Δ_J Λ̃⁻¹) + ‖E(μ̃_J | x) + m‖²_T`.
pub fn expected_recentred_quadratic(
    belief_b: &GaussianBelief,
    delta_j: &SymMatrix,
    t: &SymMatrix,
    m: &DVector<f64>,
    x: &DVector<f64>,
) -> Result<f64> {
    check_update_dims(belief_b, delta_j, x)?;
    let n = belief_b.dim();
    for got in [t.dim(), m.len()] {
        if got != n {
            return Err(Error::DimensionMismatch { expected: n, got });
        }
    }
    let post = belief_b.info() + delta_j;
    let chol = post.cholesky()?;
    let post_cov = chol.inverse();
    let spread = post_cov.as_matrix() * delta_j.as_matrix() * post_cov.as_matrix();
    let trace_term = (t.as_matrix() * spread).trace();
    let centre = chol.solve(&conditional_numerator(belief_b, delta_j, x)) + m;
    Ok(trace_term + t.quad_form(&centre))
}
