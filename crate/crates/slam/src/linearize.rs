use fgr_core::{Antichain, IndexSet, LinearFactor, SupplementedGraph, SymMatrix};
use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Result, SlamError};
use crate::graph::{Factor, NonlinearGraph, Values};

/// Relative eigenvalue cutoff when factoring a marginal information matrix.
const RANK_TOL: f64 = 1e-12;

/// Linear factors over the full pose-and-landmark state (one scalar
/// coordinate per graph variable).
#[derive(Debug, Clone)]
pub struct LinearizedGraph {
    n_poses: usize,
    n_landmarks: usize,
    factors: Vec<LinearFactor>,
    base: IndexSet,
}

/// Linearizes one factor: `A` is the Jacobian at `lin_point` and
/// `z = A x₀ − r(x₀)`, so that `A x − z ≈ r(x)` near `x₀`.
pub fn linearize_factor(graph: &NonlinearGraph, index: usize, lin_point: &Values) -> Result<LinearFactor> {
    if let Factor::Linear { a, z, gamma } = &graph.factors()[index] {
        return Ok(LinearFactor::dense(a.clone(), z.clone(), gamma.clone(), 1)?);
    }
    let e = graph.evaluate(index, lin_point)?;
    let z = &e.jacobian * lin_point.to_vector() - &e.residual;
    Ok(LinearFactor::dense(
        e.jacobian,
        z,
        SymMatrix::symmetrize(e.precision),
        1,
    )?)
}

/// Linearizes every factor about the same point.
pub fn linearize_to_lfg(graph: &NonlinearGraph, lin_point: &Values) -> Result<LinearizedGraph> {
    let factors = (0..graph.factors().len())
        .map(|i| linearize_factor(graph, i, lin_point))
        .collect::<Result<Vec<_>>>()?;
    Ok(LinearizedGraph {
        n_poses: graph.n_poses(),
        n_landmarks: graph.n_landmarks(),
        factors,
        base: graph.base().clone(),
    })
}

impl LinearizedGraph {
    /// Base factors linearized about `base_point`, each source's factors about
    /// its own point. Factors in no source are linearized about `base_point`.
    pub fn from_points(graph: &NonlinearGraph, base_point: &Values, sources: &[(IndexSet, Values)]) -> Result<Self> {
        let mut lin = linearize_to_lfg(graph, base_point)?;
        for (set, point) in sources {
            for i in set.iter() {
                if i >= lin.factors.len() || graph.base().contains(i) {
                    return Err(SlamError::InvalidSubset(format!("source factor {i} is not supplemental")));
                }
                lin.factors[i] = linearize_factor(graph, i, point)?;
            }
        }
        Ok(lin)
    }

    pub fn factors(&self) -> &[LinearFactor] {
        &self.factors
    }

    pub fn base(&self) -> &IndexSet {
        &self.base
    }

    pub fn state_dim(&self) -> usize {
        3 * self.n_poses + 2 * self.n_landmarks
    }

    pub fn pose_dim(&self) -> usize {
        3 * self.n_poses
    }

    /// The same factors as a supplemented graph with scalar variables.
    /// Fails when the base does not pin down every coordinate.
    pub fn into_supplemented(self) -> Result<SupplementedGraph> {
        let dim = self.state_dim();
        Ok(SupplementedGraph::new(1, dim, self.factors, self.base)?)
    }

    /// Eliminates the landmarks, giving a graph over pose coordinates.
    ///
    /// Base factors must not involve landmarks, and no landmark may be shared
    /// between two sources. Each source becomes one factor carrying its
    /// Schur-complemented information, so the result has base indices
    /// `0..|B|` and source `s` at index `|B| + s`.
    pub fn marginalize_landmarks(&self, sources: &[IndexSet]) -> Result<PoseGraph> {
        let pose_dim = self.pose_dim();
        let dim = self.state_dim();
        let is_landmark_col = |c: usize| c >= pose_dim;
        let touches = |f: &LinearFactor, c: usize| f.a().column(c).iter().any(|v| *v != 0.0);

        let mut factors = Vec::new();
        for i in self.base.iter() {
            let f = &self.factors[i];
            if (pose_dim..dim).any(|c| touches(f, c)) {
                return Err(SlamError::Marginalization(format!("base factor {i} involves a landmark")));
            }
            factors.push(LinearFactor::dense(
                f.a().columns(0, pose_dim).into_owned(),
                f.z().clone(),
                f.gamma().clone(),
                1,
            )?);
        }
        let n_base = factors.len();

        let mut claimed = vec![None; dim];
        for (s, set) in sources.iter().enumerate() {
            let mut delta = DMatrix::zeros(dim, dim);
            let mut rhs = DVector::zeros(dim);
            for i in set.iter() {
                if i >= self.factors.len() || self.base.contains(i) {
                    return Err(SlamError::InvalidSubset(format!("source factor {i} is not supplemental")));
                }
                let f = &self.factors[i];
                let atg = f.a().transpose() * f.gamma().as_matrix();
                delta += &atg * f.a();
                rhs += atg * f.z();
            }
            let touched: Vec<usize> = (0..dim).filter(|&c| delta.column(c).iter().any(|v| *v != 0.0)).collect();
            let lms: Vec<usize> = touched.iter().copied().filter(|&c| is_landmark_col(c)).collect();
            let poses: Vec<usize> = touched.iter().copied().filter(|&c| !is_landmark_col(c)).collect();
            for &c in &lms {
                if let Some(other) = claimed[c].replace(s) {
                    return Err(SlamError::Marginalization(format!(
                        "landmark coordinate {c} is shared by sources {other} and {s}"
                    )));
                }
            }
            let d_pp = delta.select_rows(&poses).select_columns(&poses);
            let (d_red, r_red) = if lms.is_empty() {
                (d_pp, rhs.select_rows(&poses))
            } else {
                let d_pl = delta.select_rows(&poses).select_columns(&lms);
                let d_ll = SymMatrix::symmetrize(delta.select_rows(&lms).select_columns(&lms));
                let chol = d_ll
                    .cholesky()
                    .map_err(|e| SlamError::Marginalization(format!("source {s} landmark block: {e}")))?;
                let gain = chol.solve_matrix(&d_pl.transpose()).transpose();
                (
                    d_pp - &gain * d_pl.transpose(),
                    rhs.select_rows(&poses) - gain * rhs.select_rows(&lms),
                )
            };
            factors.push(information_factor(&d_red, &r_red, &poses, pose_dim, s)?);
        }
        let graph = SupplementedGraph::new(1, pose_dim, factors, IndexSet::range(0..n_base))?;
        let sources = (0..sources.len()).map(|s| IndexSet::from([n_base + s])).collect();
        Ok(PoseGraph { graph, sources })
    }
}

/// A factor `W` with `WᵀW = info` and `Wᵀz = rhs` on the given columns.
fn information_factor(
    info: &DMatrix<f64>,
    rhs: &DVector<f64>,
    cols: &[usize],
    dim: usize,
    source: usize,
) -> Result<LinearFactor> {
    let eig = SymmetricEigen::new(SymMatrix::symmetrize(info.clone()).into_matrix());
    let top = eig.eigenvalues.amax();
    let keep: Vec<usize> = (0..eig.eigenvalues.len())
        .filter(|&k| eig.eigenvalues[k] > RANK_TOL * top)
        .collect();
    if keep.is_empty() {
        return Err(SlamError::Marginalization(format!("source {source} carries no pose information")));
    }
    let mut a = DMatrix::zeros(keep.len(), dim);
    let mut z = DVector::zeros(keep.len());
    for (row, &k) in keep.iter().enumerate() {
        let root = eig.eigenvalues[k].sqrt();
        let v = eig.eigenvectors.column(k);
        for (j, &c) in cols.iter().enumerate() {
            a[(row, c)] = root * v[j];
        }
        z[row] = v.dot(rhs) / root;
    }
    Ok(LinearFactor::dense(a, z, SymMatrix::identity(keep.len()), 1)?)
}

/// Linear graph over pose coordinates with one factor per source.
#[derive(Debug, Clone)]
pub struct PoseGraph {
    pub graph: SupplementedGraph,
    pub sources: Vec<IndexSet>,
}

impl PoseGraph {
    /// The antichain of all sources.
    pub fn antichain(&self) -> Result<Antichain> {
        Ok(Antichain::new(self.sources.clone())?)
    }
}
