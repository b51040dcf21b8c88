//! Reference computations for tests.
//!
//! Nothing here calls the numerical routines of `fgr-core`; graphs are read
//! only through their raw factor data (`A`, `z`, `Γ`) and every quantity is
//! rebuilt with plain `nalgebra` operations, brute-force sampling or
//! quadrature.

use fgr_core::{IndexSet, LinearFactor, SupplementedGraph, SymMatrix};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};

pub use rand_chacha::ChaCha8Rng;
pub use rand::SeedableRng;

/// Mean and standard error of a sample.
#[derive(Debug, Clone, Copy)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
}

impl Estimate {
    pub fn from_samples(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        Estimate {
            mean,
            std_error: (var / n).sqrt(),
        }
    }

    /// `|mean − target| ≤ k·se`, with a tiny absolute floor for
    /// zero-variance samples.
    pub fn within(&self, target: f64, k: f64) -> bool {
        (self.mean - target).abs() <= k * self.std_error + 1e-12 * (1.0 + target.abs())
    }
}

/// A random supplemented graph together with its supplemental sources.
pub struct RandomInstance {
    pub graph: SupplementedGraph,
    pub sources: Vec<IndexSet>,
}

fn normal_matrix<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

fn random_precision<R: Rng>(dim: usize, rng: &mut R) -> SymMatrix {
    let u = Uniform::new(0.3, 3.0).unwrap();
    let g = normal_matrix(dim, dim, rng) * 0.3;
    let diag = DMatrix::from_diagonal(&DVector::from_fn(dim, |_, _| u.sample(rng)));
    SymMatrix::symmetrize(&g * g.transpose() + diag)
}

/// State of dimension `dim` held in a single variable; a dense base factor
/// plus `n_sources` supplemental sources of one or two factors each.
pub fn random_instance<R: Rng>(dim: usize, n_sources: usize, rng: &mut R) -> RandomInstance {
    let mut factors = Vec::new();
    let base_a = DMatrix::identity(dim, dim) + normal_matrix(dim, dim, rng) * 0.3;
    let base_z = DVector::from_fn(dim, |_, _| StandardNormal.sample(rng));
    factors.push(LinearFactor::new(base_a, base_z, random_precision(dim, rng), vec![0]).unwrap());
    let mut sources = Vec::new();
    for _ in 0..n_sources {
        let count = rng.random_range(1..=2);
        let mut idx = Vec::new();
        for _ in 0..count {
            let rows = rng.random_range(1..=dim);
            let a = normal_matrix(rows, dim, rng);
            let z = DVector::from_fn(rows, |_, _| StandardNormal.sample(rng));
            idx.push(factors.len());
            factors.push(LinearFactor::new(a, z, random_precision(rows, rng), vec![0]).unwrap());
        }
        sources.push(IndexSet::new(idx));
    }
    let graph = SupplementedGraph::new(dim, 1, factors, IndexSet::from([0])).unwrap();
    RandomInstance { graph, sources }
}

/// Raw stacked data of a subgraph: `A_J`, `Γ_J` (block diagonal), `z_J`.
pub struct Stacked {
    pub a: DMatrix<f64>,
    pub gamma: DMatrix<f64>,
    pub z: DVector<f64>,
}

pub fn stack_raw(graph: &SupplementedGraph, j: &IndexSet) -> Stacked {
    let n = graph.state_dim();
    let rows: usize = j.iter().map(|i| graph.factors()[i].rows()).sum();
    let mut a = DMatrix::zeros(rows, n);
    let mut gamma = DMatrix::zeros(rows, rows);
    let mut z = DVector::zeros(rows);
    let mut r = 0;
    for i in j.iter() {
        let f = &graph.factors()[i];
        let k = f.rows();
        a.view_mut((r, 0), (k, n)).copy_from(f.a());
        gamma.view_mut((r, r), (k, k)).copy_from(f.gamma().as_matrix());
        z.rows_mut(r, k).copy_from(f.z());
        r += k;
    }
    Stacked { a, gamma, z }
}

/// Prior and per-source quantities recomputed with generic inverses.
pub struct Reference {
    pub prior_info: DMatrix<f64>,
    pub prior_mean: DVector<f64>,
    pub source: Stacked,
    pub post_info: DMatrix<f64>,
    pub post_cov: DMatrix<f64>,
}

impl Reference {
    pub fn new(graph: &SupplementedGraph, j: &IndexSet) -> Self {
        let base = stack_raw(graph, graph.base());
        let at_g = base.a.transpose() * &base.gamma;
        let prior_info = &at_g * &base.a;
        let prior_mean = prior_info.clone().try_inverse().expect("base full rank") * (at_g * &base.z);
        let source = stack_raw(graph, j);
        let post_info = &prior_info + source.a.transpose() * &source.gamma * &source.a;
        let post_cov = post_info.clone().try_inverse().expect("posterior PD");
        Reference {
            prior_info,
            prior_mean,
            source,
            post_info,
            post_cov,
        }
    }

    pub fn dim(&self) -> usize {
        self.prior_mean.len()
    }

    pub fn prior_cov(&self) -> DMatrix<f64> {
        self.prior_info.clone().try_inverse().unwrap()
    }

    /// Draw `z_J ~ N(A_J x, Γ_J⁻¹)` through an eigendecomposition of `Γ_J⁻¹`.
    pub fn measurement_sampler(&self) -> impl Fn(&DVector<f64>, &mut ChaCha8Rng) -> DVector<f64> + '_ {
        let cov = self.source.gamma.clone().try_inverse().unwrap();
        let eig = cov.symmetric_eigen();
        let root = &eig.eigenvectors * DMatrix::from_diagonal(&eig.eigenvalues.map(|v| v.max(0.0).sqrt()));
        move |x, rng| {
            let eps = DVector::from_fn(root.ncols(), |_, _| StandardNormal.sample(rng));
            &self.source.a * x + &root * eps
        }
    }

    /// `μ̃(z) = Λ̃⁻¹(Λ_B μ_B + A_JᵀΓ_J z)`
    pub fn posterior_mean(&self, z: &DVector<f64>) -> DVector<f64> {
        &self.post_cov * (&self.prior_info * &self.prior_mean + self.source.a.transpose() * &self.source.gamma * z)
    }
}

/// `ln N(x; μ, Λ⁻¹)` via a determinant from LU elimination.
pub fn log_density(x: &DVector<f64>, mean: &DVector<f64>, info: &DMatrix<f64>) -> f64 {
    let d = x - mean;
    let n = x.len() as f64;
    0.5 * det_lu(info).ln() - 0.5 * n * (2.0 * std::f64::consts::PI).ln() - 0.5 * d.dot(&(info * &d))
}

/// Nested Monte Carlo of `E(ln p(x | Z_J) − ln p(x) | x)` over `z_J ~ p(z_J | x)`.
pub fn specific_info_by_definition(
    graph: &SupplementedGraph,
    j: &IndexSet,
    x: &DVector<f64>,
    n: usize,
    rng: &mut ChaCha8Rng,
) -> Estimate {
    let r = Reference::new(graph, j);
    let sample = r.measurement_sampler();
    let prior_term = log_density(x, &r.prior_mean, &r.prior_info);
    let values: Vec<f64> = (0..n)
        .map(|_| {
            let z = sample(x, rng);
            log_density(x, &r.posterior_mean(&z), &r.post_info) - prior_term
        })
        .collect();
    Estimate::from_samples(&values)
}

/// Nested Monte Carlo of the expected reduction in squared 2-Wasserstein
/// distance to `δ_x`, with `d²(N(m, Σ), δ_x) = tr Σ + ‖m − x‖²`.
pub fn specific_wer_by_definition(
    graph: &SupplementedGraph,
    j: &IndexSet,
    x: &DVector<f64>,
    n: usize,
    rng: &mut ChaCha8Rng,
) -> Estimate {
    let r = Reference::new(graph, j);
    let sample = r.measurement_sampler();
    let prior_d2 = r.prior_cov().trace() + (&r.prior_mean - x).norm_squared();
    let post_tr = r.post_cov.trace();
    let values: Vec<f64> = (0..n)
        .map(|_| {
            let z = sample(x, rng);
            prior_d2 - (post_tr + (r.posterior_mean(&z) - x).norm_squared())
        })
        .collect();
    Estimate::from_samples(&values)
}

/// Sampled `μ̃_J` given `x`: per-coordinate mean estimates, and the estimate
/// of `E‖μ̃_J + m‖²_T`.
pub fn conditional_moments_by_sampling(
    graph: &SupplementedGraph,
    j: &IndexSet,
    x: &DVector<f64>,
    t: &DMatrix<f64>,
    m: &DVector<f64>,
    n: usize,
    rng: &mut ChaCha8Rng,
) -> (Vec<Estimate>, Estimate) {
    let r = Reference::new(graph, j);
    let sample = r.measurement_sampler();
    let mut coords = vec![Vec::with_capacity(n); r.dim()];
    let mut quad = Vec::with_capacity(n);
    for _ in 0..n {
        let mu = r.posterior_mean(&sample(x, rng));
        for (k, c) in coords.iter_mut().enumerate() {
            c.push(mu[k]);
        }
        let v = mu + m;
        quad.push(v.dot(&(t * &v)));
    }
    (coords.iter().map(|c| Estimate::from_samples(c)).collect(), Estimate::from_samples(&quad))
}

/// Determinant by Gaussian elimination with partial pivoting.
pub fn det_lu(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut a = m.clone();
    let mut det = 1.0;
    for c in 0..n {
        let p = (c..n)
            .max_by(|&i, &k| a[(i, c)].abs().total_cmp(&a[(k, c)].abs()))
            .unwrap();
        if a[(p, c)] == 0.0 {
            return 0.0;
        }
        if p != c {
            a.swap_rows(p, c);
            det = -det;
        }
        det *= a[(c, c)];
        for r in (c + 1)..n {
            let f = a[(r, c)] / a[(c, c)];
            for k in c..n {
                a[(r, k)] -= f * a[(c, k)];
            }
        }
    }
    det
}

/// Determinant by cofactor expansion along the first row (small matrices).
pub fn det_cofactor(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    match n {
        0 => 1.0,
        1 => m[(0, 0)],
        _ => (0..n)
            .map(|c| {
                let minor = m.clone().remove_row(0).remove_column(c);
                let sign = if c % 2 == 0 { 1.0 } else { -1.0 };
                sign * m[(0, c)] * det_cofactor(&minor)
            })
            .sum(),
    }
}

/// Probabilists' Gauss–Hermite rule for `∫ φ(t) f(t) dt` with `φ` the
/// standard normal density. Nodes are found by Newton iteration on the
/// physicists' Hermite recurrence.
pub fn gauss_hermite(n: usize) -> Vec<(f64, f64)> {
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(n);
    let pi4 = std::f64::consts::PI.powf(-0.25);
    let mut z = 0.0f64;
    let m = n.div_ceil(2);
    for i in 0..m {
        z = match i {
            0 => (2.0 * n as f64 + 1.0).sqrt() - 1.85575 * (2.0 * n as f64 + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * (n as f64).powf(0.426) / z,
            2 => 1.86 * z - 0.86 * out[0].0 * std::f64::consts::SQRT_2.recip(),
            3 => 1.91 * z - 0.91 * out[2].0 * std::f64::consts::SQRT_2.recip(),
            _ => 2.0 * z - out[2 * (i - 2)].0 * std::f64::consts::SQRT_2.recip(),
        };
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = pi4;
            let mut p2 = 0.0;
            for k in 0..n {
                let p3 = p2;
                p2 = p1;
                p1 = z * (2.0 / (k as f64 + 1.0)).sqrt() * p2 - (k as f64 / (k as f64 + 1.0)).sqrt() * p3;
            }
            pp = (2.0 * n as f64).sqrt() * p2;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / (pp * pp);
        // physicists' node z, weight w for ∫ e^{-z²} f(z) dz → t = √2 z
        let t = z * std::f64::consts::SQRT_2;
        let wt = w / std::f64::consts::PI.sqrt();
        out.push((t, wt));
        out.push((-t, wt));
    }
    if n % 2 == 1 {
        out.pop();
    }
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    out
}

/// Differential entropy `−∫ p ln p` of a 1D density by a fine trapezoid rule
/// over `[centre − width, centre + width]`.
pub fn entropy_by_quadrature<F: Fn(f64) -> f64>(density: F, centre: f64, width: f64) -> f64 {
    let steps = 200_000;
    let h = 2.0 * width / steps as f64;
    let term = |x: f64| {
        let p = density(x);
        if p > 0.0 {
            -p * p.ln()
        } else {
            0.0
        }
    };
    let mut s = 0.5 * (term(centre - width) + term(centre + width));
    for k in 1..steps {
        s += term(centre - width + k as f64 * h);
    }
    s * h
}

/// Brute-force `vᵀMv` by explicit double loop.
pub fn quad_form_loop(v: &DVector<f64>, m: &DMatrix<f64>) -> f64 {
    let mut s = 0.0;
    for i in 0..v.len() {
        for k in 0..v.len() {
            s += v[i] * m[(i, k)] * v[k];
        }
    }
    s
}
