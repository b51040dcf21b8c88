//! Linear Gaussian factors and supplemented factor graphs.
//!
//! A [`SupplementedGraph`] splits its factors into a base set, whose product
//! defines the prior `p(x) = N(μ_B, Λ_B⁻¹)`, and supplemental factors. Any
//! subset `J` of the supplemental factors yields the posterior with
//! information `Λ_B + Δ_J`.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gauss::{GaussianBelief, SymMatrix};

/// Sorted, duplicate-free list of factor indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(from = "Vec<usize>", into = "Vec<usize>")]
pub struct IndexSet(Vec<usize>);

impl IndexSet {
    pub fn new(mut indices: Vec<usize>) -> Self {
        indices.sort_unstable();
        indices.dedup();
        IndexSet(indices)
    }

    pub fn empty() -> Self {
        IndexSet(Vec::new())
    }

    pub fn range(range: std::ops::Range<usize>) -> Self {
        IndexSet(range.collect())
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.0.binary_search(&i).is_ok()
    }

    pub fn is_subset(&self, other: &IndexSet) -> bool {
        self.0.iter().all(|&i| other.contains(i))
    }

    pub fn union(&self, other: &IndexSet) -> IndexSet {
        IndexSet::new(self.0.iter().chain(other.0.iter()).copied().collect())
    }

    pub fn is_disjoint(&self, other: &IndexSet) -> bool {
        self.0.iter().all(|&i| !other.contains(i))
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().copied()
    }
}

impl From<Vec<usize>> for IndexSet {
    fn from(v: Vec<usize>) -> Self {
        IndexSet::new(v)
    }
}

impl From<IndexSet> for Vec<usize> {
    fn from(s: IndexSet) -> Self {
        s.0
    }
}

impl<const N: usize> From<[usize; N]> for IndexSet {
    fn from(a: [usize; N]) -> Self {
        IndexSet::new(a.to_vec())
    }
}

impl std::fmt::Display for IndexSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{{")?;
        for (k, i) in self.0.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{i}")?;
        }
        write!(f, "}}")
    }
}

/// One Gaussian factor `exp(-½‖A x − z‖²_Γ)`.
///
/// `A` spans the full stacked state; columns outside the argument variables
/// must be zero.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearFactor {
    a: DMatrix<f64>,
    z: DVector<f64>,
    gamma: SymMatrix,
    args: Vec<usize>,
}

impl LinearFactor {
    pub fn new(a: DMatrix<f64>, z: DVector<f64>, gamma: SymMatrix, args: Vec<usize>) -> Result<Self> {
        if a.nrows() != z.len() || z.len() != gamma.dim() {
            return Err(Error::InvalidFactor {
                index: 0,
                reason: format!(
                    "rows(A)={}, dim(z)={}, dim(Γ)={} must agree",
                    a.nrows(),
                    z.len(),
                    gamma.dim()
                ),
            });
        }
        gamma.cholesky().map_err(|e| Error::InvalidFactor {
            index: 0,
            reason: format!("precision not positive definite: {e}"),
        })?;
        let mut args = args;
        args.sort_unstable();
        args.dedup();
        Ok(LinearFactor { a, z, gamma, args })
    }

    /// Factor with unit-free dense `A`; the argument set is every variable
    /// block that has a nonzero column.
    pub fn dense(a: DMatrix<f64>, z: DVector<f64>, gamma: SymMatrix, var_dim: usize) -> Result<Self> {
        let n_vars = a.ncols() / var_dim.max(1);
        let args = (0..n_vars)
            .filter(|&v| {
                a.columns(v * var_dim, var_dim).iter().any(|x| *x != 0.0)
            })
            .collect();
        Self::new(a, z, gamma, args)
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn z(&self) -> &DVector<f64> {
        &self.z
    }

    pub fn gamma(&self) -> &SymMatrix {
        &self.gamma
    }

    pub fn args(&self) -> &[usize] {
        &self.args
    }

    pub fn rows(&self) -> usize {
        self.z.len()
    }

    fn validate_in_graph(&self, index: usize, n_vars: usize, var_dim: usize) -> Result<()> {
        let invalid = |reason: String| Error::InvalidFactor { index, reason };
        if self.a.ncols() != n_vars * var_dim {
            return Err(invalid(format!(
                "A has {} columns, state dimension is {}",
                self.a.ncols(),
                n_vars * var_dim
            )));
        }
        if let Some(&v) = self.args.iter().find(|&&v| v >= n_vars) {
            return Err(invalid(format!("argument variable {v} out of range")));
        }
        for v in (0..n_vars).filter(|v| !self.args.contains(v)) {
            if self.a.columns(v * var_dim, var_dim).iter().any(|x| *x != 0.0) {
                return Err(invalid(format!("nonzero columns for non-argument variable {v}")));
            }
        }
        Ok(())
    }

    /// `(AᵀΓA, AᵀΓz)`
    fn information(&self) -> (DMatrix<f64>, DVector<f64>) {
        let atg = self.a.transpose() * self.gamma.as_matrix();
        (&atg * &self.a, atg * &self.z)
    }
}

/// Stacked information of a factor subset: `Δ_J = A_JᵀΓ_J A_J` and `A_JᵀΓ_J z_J`.
#[derive(Debug, Clone, PartialEq)]
pub struct SubgraphInfo {
    pub delta: SymMatrix,
    pub weighted_rhs: DVector<f64>,
}

/// Linear factor graph with a full-rank base subgraph.
#[derive(Debug, Clone)]
pub struct SupplementedGraph {
    var_dim: usize,
    n_vars: usize,
    factors: Vec<LinearFactor>,
    base: IndexSet,
    supplemental: IndexSet,
    prior: GaussianBelief,
}

impl SupplementedGraph {
    pub fn new(var_dim: usize, n_vars: usize, factors: Vec<LinearFactor>, base: IndexSet) -> Result<Self> {
        if var_dim == 0 || n_vars == 0 {
            return Err(Error::InvalidArgument("var_dim and n_vars must be positive".into()));
        }
        for (i, f) in factors.iter().enumerate() {
            f.validate_in_graph(i, n_vars, var_dim)?;
        }
        if let Some(&i) = base.as_slice().iter().find(|&&i| i >= factors.len()) {
            return Err(Error::IndexOutOfRange {
                index: i,
                count: factors.len(),
            });
        }
        let supplemental = IndexSet::new((0..factors.len()).filter(|&i| !base.contains(i)).collect());
        let info = stack(&factors, var_dim * n_vars, &base);
        let prior = GaussianBelief::from_canonical(&info.weighted_rhs, info.delta)
            .map_err(|e| Error::BaseNotFullRank(Box::new(e)))?;
        Ok(SupplementedGraph {
            var_dim,
            n_vars,
            factors,
            base,
            supplemental,
            prior,
        })
    }

    pub fn var_dim(&self) -> usize {
        self.var_dim
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn state_dim(&self) -> usize {
        self.var_dim * self.n_vars
    }

    pub fn factors(&self) -> &[LinearFactor] {
        &self.factors
    }

    pub fn base(&self) -> &IndexSet {
        &self.base
    }

    /// `B̄ = [m] \ B`
    pub fn supplemental(&self) -> &IndexSet {
        &self.supplemental
    }

    fn check_range(&self, j: &IndexSet) -> Result<()> {
        match j.iter().find(|&i| i >= self.factors.len()) {
            Some(i) => Err(Error::IndexOutOfRange {
                index: i,
                count: self.factors.len(),
            }),
            None => Ok(()),
        }
    }

    pub(crate) fn check_supplemental(&self, j: &IndexSet) -> Result<()> {
        self.check_range(j)?;
        match j.iter().find(|&i| self.base.contains(i)) {
            Some(index) => Err(Error::IndexInBase { index }),
            None => Ok(()),
        }
    }

    /// `Δ_J` and `A_JᵀΓ_J z_J` for any subset of factors.
    pub fn stack_subgraph(&self, j: &IndexSet) -> Result<SubgraphInfo> {
        self.check_range(j)?;
        Ok(stack(&self.factors, self.state_dim(), j))
    }

    /// `(μ_B, Λ_B)`
    pub fn prior_belief(&self) -> &GaussianBelief {
        &self.prior
    }

    /// `(μ_J̃, Λ_J̃)` with `Λ_J̃ = Λ_B + Δ_J`. The empty set gives the prior.
    pub fn posterior_belief(&self, j: &IndexSet) -> Result<GaussianBelief> {
        self.check_supplemental(j)?;
        if j.is_empty() {
            return Ok(self.prior.clone());
        }
        let sub = self.stack_subgraph(j)?;
        let info = self.prior.info() + &sub.delta;
        let eta = self.prior.info().as_matrix() * self.prior.mean() + sub.weighted_rhs;
        GaussianBelief::from_canonical(&eta, info)
    }

    /// Supplemental information `Δ_J`, restricted to `J ⊆ B̄`.
    pub fn supplemental_delta(&self, j: &IndexSet) -> Result<SymMatrix> {
        self.check_supplemental(j)?;
        Ok(self.stack_subgraph(j)?.delta)
    }

    /// `I(Z_J; X) = ½ ln(|Λ_J̃| / |Λ_B|)` in nats.
    pub fn mutual_information(&self, j: &IndexSet) -> Result<f64> {
        self.check_supplemental(j)?;
        if j.is_empty() {
            return Ok(0.0);
        }
        let delta = self.supplemental_delta(j)?;
        mutual_information_from_parts(&self.prior, &delta)
    }

    /// I.i.d. draws from the prior `N(μ_B, Λ_B⁻¹)`.
    pub fn sample_prior(&self, seed: u64, count: usize) -> Result<Vec<DVector<f64>>> {
        if count == 0 {
            return Err(Error::InvalidArgument("sample count must be at least 1".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok((0..count).map(|_| sample_belief(&self.prior, &mut rng)).collect())
    }

    /// Draws `z_J ~ N(A_J x, Γ_J⁻¹)`, one independent block per factor,
    /// stacked in index order.
    pub fn sample_measurements(&self, j: &IndexSet, x: &DVector<f64>, seed: u64) -> Result<DVector<f64>> {
        self.check_range(j)?;
        if x.len() != self.state_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.state_dim(),
                got: x.len(),
            });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::new();
        for i in j.iter() {
            let f = &self.factors[i];
            let chol = f.gamma.cholesky()?;
            let eps = standard_normal(f.rows(), &mut rng);
            let z = f.a() * x + chol.whiten_inverse(&eps);
            out.extend(z.iter().copied());
        }
        Ok(DVector::from_vec(out))
    }
}

/// `½ ln|I + Δ Λ_B⁻¹|`, evaluated as `½(ln|Λ_B + Δ| − ln|Λ_B|)`.
pub fn mutual_information_from_parts(prior: &GaussianBelief, delta: &SymMatrix) -> Result<f64> {
    let post = prior.info() + delta;
    let mi = 0.5 * (post.cholesky()?.logdet() - prior.logdet_info());
    Ok(mi.max(0.0))
}

fn stack(factors: &[LinearFactor], dim: usize, j: &IndexSet) -> SubgraphInfo {
    let mut delta = DMatrix::zeros(dim, dim);
    let mut rhs = DVector::zeros(dim);
    for i in j.iter() {
        let (d, r) = factors[i].information();
        delta += d;
        rhs += r;
    }
    SubgraphInfo {
        delta: SymMatrix::symmetrize(delta),
        weighted_rhs: rhs,
    }
}

pub(crate) fn standard_normal<R: rand::Rng + ?Sized>(n: usize, rng: &mut R) -> DVector<f64> {
    DVector::from_fn(n, |_, _| StandardNormal.sample(rng))
}

/// One draw from `N(μ, Λ⁻¹)` as `μ + L⁻ᵀ ε`.
pub fn sample_belief<R: rand::Rng + ?Sized>(belief: &GaussianBelief, rng: &mut R) -> DVector<f64> {
    let eps = standard_normal(belief.dim(), rng);
    belief.mean() + belief.cholesky().whiten_inverse(&eps)
}

/// JSON document for a supplemented graph. Matrices are lists of rows.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GraphDocument {
    pub var_dim: usize,
    pub n_vars: usize,
    pub factors: Vec<FactorDocument>,
    pub base: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FactorDocument {
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    pub z: Vec<f64>,
    pub gamma: Vec<Vec<f64>>,
    pub args: Vec<usize>,
}

fn rows_to_matrix(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|row| row.len() != c) {
        return Err(Error::Json(format!("{what}: ragged rows")));
    }
    Ok(DMatrix::from_row_iterator(r, c, rows.iter().flatten().copied()))
}

fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

impl GraphDocument {
    pub fn from_graph(g: &SupplementedGraph) -> Self {
        GraphDocument {
            var_dim: g.var_dim,
            n_vars: g.n_vars,
            factors: g
                .factors
                .iter()
                .map(|f| FactorDocument {
                    a: matrix_to_rows(&f.a),
                    z: f.z.iter().copied().collect(),
                    gamma: matrix_to_rows(f.gamma.as_matrix()),
                    args: f.args.clone(),
                })
                .collect(),
            base: g.base.as_slice().to_vec(),
        }
    }

    pub fn into_graph(self) -> Result<SupplementedGraph> {
        let factors = self
            .factors
            .into_iter()
            .enumerate()
            .map(|(i, f)| {
                let a = rows_to_matrix(&f.a, "A")?;
                let gamma = SymMatrix::new(rows_to_matrix(&f.gamma, "gamma")?)?;
                LinearFactor::new(a, DVector::from_vec(f.z), gamma, f.args).map_err(|e| match e {
                    Error::InvalidFactor { reason, .. } => Error::InvalidFactor { index: i, reason },
                    other => other,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        SupplementedGraph::new(self.var_dim, self.n_vars, factors, IndexSet::new(self.base))
    }
}

impl SupplementedGraph {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&GraphDocument::from_graph(self)).expect("graph document serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let doc: GraphDocument = serde_json::from_str(s).map_err(|e| Error::Json(e.to_string()))?;
        doc.into_graph()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::{dmatrix, dvector};

    fn scalar_factor(a: f64, z: f64, gamma: f64) -> LinearFactor {
        LinearFactor::new(dmatrix![a], dvector![z], SymMatrix::from_diagonal(&[gamma]), vec![0]).unwrap()
    }

    #[test]
    fn empty_subgraph_is_zero() {
        let g = SupplementedGraph::new(1, 1, vec![scalar_factor(1.0, 0.0, 1.0)], [0].into()).unwrap();
        let s = g.stack_subgraph(&IndexSet::empty()).unwrap();
        assert_eq!(s.delta, SymMatrix::zeros(1));
        assert_eq!(s.weighted_rhs, dvector![0.0]);
    }

    #[test]
    fn single_factor_stack() {
        let g = SupplementedGraph::new(
            1,
            1,
            vec![scalar_factor(1.0, 0.0, 1.0), scalar_factor(1.0, 3.0, 2.0)],
            [0].into(),
        )
        .unwrap();
        let s = g.stack_subgraph(&[1].into()).unwrap();
        assert_eq!(s.delta.as_matrix()[(0, 0)], 2.0);
        assert_eq!(s.weighted_rhs[0], 6.0);
        assert!(matches!(
            g.stack_subgraph(&[5].into()),
            Err(Error::IndexOutOfRange { index: 5, .. })
        ));
    }

    #[test]
    fn prior_examples() {
        let g = SupplementedGraph::new(
            2,
            1,
            vec![LinearFactor::new(
                DMatrix::identity(2, 2),
                dvector![1.5, -0.5],
                SymMatrix::identity(2),
                vec![0],
            )
            .unwrap()],
            [0].into(),
        )
        .unwrap();
        assert_relative_eq!(g.prior_belief().mean().clone(), dvector![1.5, -0.5], epsilon = 1e-14);
        assert_eq!(g.prior_belief().info(), &SymMatrix::identity(2));

        let g = SupplementedGraph::new(
            1,
            1,
            vec![scalar_factor(1.0, 0.0, 1.0), scalar_factor(1.0, 2.0, 1.0)],
            [0, 1].into(),
        )
        .unwrap();
        assert_relative_eq!(g.prior_belief().mean()[0], 1.0, epsilon = 1e-14);
        assert_eq!(g.prior_belief().info().as_matrix()[(0, 0)], 2.0);

        let f1 = LinearFactor::new(dmatrix![1.0, 0.0], dvector![3.0], SymMatrix::identity(1), vec![0]).unwrap();
        let f2 = LinearFactor::new(dmatrix![0.0, 1.0], dvector![4.0], SymMatrix::identity(1), vec![1]).unwrap();
        let g = SupplementedGraph::new(1, 2, vec![f1, f2], [0, 1].into()).unwrap();
        assert_relative_eq!(g.prior_belief().mean().clone(), dvector![3.0, 4.0], epsilon = 1e-14);
        assert_eq!(g.prior_belief().info(), &SymMatrix::identity(2));
    }

    #[test]
    fn rank_deficient_base_is_rejected() {
        let f1 = LinearFactor::new(dmatrix![1.0, 0.0], dvector![3.0], SymMatrix::identity(1), vec![0]).unwrap();
        let err = SupplementedGraph::new(1, 2, vec![f1], [0].into()).unwrap_err();
        assert!(matches!(err, Error::BaseNotFullRank(_)));
        assert!(err.to_string().contains("base graph not full-rank"));
    }

    #[test]
    fn factor_zero_block_invariant() {
        let f = LinearFactor::new(dmatrix![1.0, 1.0], dvector![0.0], SymMatrix::identity(1), vec![0]).unwrap();
        let err = SupplementedGraph::new(1, 2, vec![f], [0].into()).unwrap_err();
        assert!(matches!(err, Error::InvalidFactor { index: 0, .. }));
    }

    #[test]
    fn posterior_examples() {
        let g = SupplementedGraph::new(
            1,
            1,
            vec![scalar_factor(1.0, 0.0, 1.0), scalar_factor(1.0, 2.0, 1.0)],
            [0].into(),
        )
        .unwrap();
        let p = g.posterior_belief(&IndexSet::empty()).unwrap();
        assert_eq!(p.mean(), g.prior_belief().mean());
        assert_eq!(p.info(), g.prior_belief().info());

        let p = g.posterior_belief(&[1].into()).unwrap();
        assert_relative_eq!(p.mean()[0], 1.0, epsilon = 1e-14);
        assert_eq!(p.info().as_matrix()[(0, 0)], 2.0);

        let direct = g.stack_subgraph(&[0, 1].into()).unwrap();
        assert_eq!(p.info(), &direct.delta);

        assert!(matches!(g.posterior_belief(&[0].into()), Err(Error::IndexInBase { index: 0 })));
    }

    #[test]
    fn mutual_information_examples() {
        let g = SupplementedGraph::new(
            1,
            1,
            vec![scalar_factor(1.0, 0.0, 1.0), scalar_factor(1.0, 2.0, 1.0)],
            [0].into(),
        )
        .unwrap();
        assert_eq!(g.mutual_information(&IndexSet::empty()).unwrap(), 0.0);
        assert_relative_eq!(g.mutual_information(&[1].into()).unwrap(), 0.5 * 2f64.ln(), epsilon = 1e-12);

        let base = LinearFactor::new(DMatrix::identity(2, 2), dvector![0.0, 0.0], SymMatrix::identity(2), vec![0]).unwrap();
        let sup = LinearFactor::new(dmatrix![1.0, 0.0], dvector![0.0], SymMatrix::from_diagonal(&[3.0]), vec![0]).unwrap();
        let g = SupplementedGraph::new(2, 1, vec![base, sup], [0].into()).unwrap();
        assert_relative_eq!(g.mutual_information(&[1].into()).unwrap(), 2f64.ln(), epsilon = 1e-12);
    }

    #[test]
    fn json_roundtrip_preserves_graph() {
        let f1 = LinearFactor::new(dmatrix![1.0, 0.0], dvector![3.0], SymMatrix::identity(1), vec![0]).unwrap();
        let f2 = LinearFactor::new(dmatrix![0.0, 1.0], dvector![4.0], SymMatrix::identity(1), vec![1]).unwrap();
        let f3 = LinearFactor::new(dmatrix![1.0, -1.0], dvector![0.5], SymMatrix::from_diagonal(&[2.0]), vec![0, 1]).unwrap();
        let g = SupplementedGraph::new(1, 2, vec![f1, f2, f3], [0, 1].into()).unwrap();
        let back = SupplementedGraph::from_json(&g.to_json()).unwrap();
        assert_eq!(back.factors(), g.factors());
        assert_eq!(back.base(), g.base());
        let v: serde_json::Value = serde_json::from_str(&g.to_json()).unwrap();
        assert_eq!(v["factors"][2]["A"], serde_json::json!([[1.0, -1.0]]));
    }

    #[test]
    fn sampling_is_deterministic() {
        let g = SupplementedGraph::new(
            1,
            1,
            vec![scalar_factor(1.0, 0.0, 1.0), scalar_factor(1.0, 2.0, 1.0)],
            [0].into(),
        )
        .unwrap();
        assert_eq!(g.sample_prior(7, 10).unwrap(), g.sample_prior(7, 10).unwrap());
        assert_ne!(g.sample_prior(7, 10).unwrap(), g.sample_prior(8, 10).unwrap());
        assert!(g.sample_prior(7, 0).is_err());
        let x = dvector![0.3];
        assert_eq!(
            g.sample_measurements(&[0, 1].into(), &x, 3).unwrap(),
            g.sample_measurements(&[0, 1].into(), &x, 3).unwrap()
        );
    }

    #[test]
    fn index_set_normalizes() {
        let s = IndexSet::new(vec![3, 1, 3, 2]);
        assert_eq!(s.as_slice(), &[1, 2, 3]);
        assert_eq!(s.to_string(), "{1,2,3}");
        assert!(IndexSet::from([1, 2]).is_subset(&s));
        assert!(!s.is_subset(&IndexSet::from([1, 2])));
    }
}
