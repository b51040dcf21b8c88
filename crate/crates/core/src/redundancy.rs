//! Specific-quality functions and the redundancy they induce.
//!
//! Both measures are target integrals: a source `Z_J` has a specific quality
//! `S_J(x)` at every state `x`, its quality is `Q(J) = E_p S_J(X)` and the
//! redundancy of an antichain `α` is `R(α) = E_p min_{J∈α} S_J(X)`, where
//! `p = N(μ_B, Λ_B⁻¹)` is the base-graph prior.
//!
//! * WB (information): `S(x) = I(Z_J;X) − ½[tr M′ − ‖x − μ_B‖²_M]` with
//!   `M = Λ_B − Λ_B Λ̃⁻¹ Λ_B` and `M′ = Δ_J Λ̃⁻¹`.
//! * WASS (Wasserstein error reduction): `S(x) = tr N′ + ‖μ_B − x‖²_N` with
//!   `N′ = Λ_B⁻¹ − Λ̃⁻¹ − Λ̃⁻¹ Δ_J Λ̃⁻¹` and `N = I − Λ_B Λ̃⁻² Λ_B`.
//!
//! Here `Λ̃ = Λ_B + Δ_J`. The coefficient matrices are evaluated through
//! algebraically equivalent products of `Δ_J` (e.g. `M = Λ_B Λ̃⁻¹ Δ_J`) so
//! that a weak source does not cancel catastrophically against `Λ_B`.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gauss::{GaussianBelief, SymMatrix};
use crate::graph::{mutual_information_from_parts, sample_belief, IndexSet, SupplementedGraph};
use crate::lattice::Antichain;

/// Default Monte Carlo sample count for redundancy estimates.
pub const DEFAULT_MC_SAMPLES: usize = 10_000;

/// Samples drawn from one RNG substream. Fixed so estimates do not depend on
/// how chunks are scheduled.
const MC_CHUNK: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum QualityKind {
    #[serde(rename = "WB")]
    Wb,
    #[serde(rename = "WASS")]
    Wass,
}

impl QualityKind {
    pub const ALL: [QualityKind; 2] = [QualityKind::Wb, QualityKind::Wass];

    pub fn as_str(self) -> &'static str {
        match self {
            QualityKind::Wb => "WB",
            QualityKind::Wass => "WASS",
        }
    }
}

impl std::fmt::Display for QualityKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for QualityKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "WB" => Ok(QualityKind::Wb),
            "WASS" => Ok(QualityKind::Wass),
            other => Err(Error::InvalidArgument(format!("unknown quality kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WbCoefficients {
    /// `I(Z_J; X)` in nats.
    pub mi: f64,
    pub m: SymMatrix,
    /// `Δ_J Λ̃⁻¹`; not symmetric in general, only its trace enters `S`.
    pub m_prime: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WassCoefficients {
    pub n: SymMatrix,
    pub n_prime: SymMatrix,
}

struct Posterior {
    /// `Λ̃⁻¹`
    cov: DMatrix<f64>,
    /// `Λ_B⁻¹`
    prior_cov: DMatrix<f64>,
}

fn posterior_parts(prior: &GaussianBelief, delta: &SymMatrix) -> Result<Posterior> {
    if delta.dim() != prior.dim() {
        return Err(Error::DimensionMismatch {
            expected: prior.dim(),
            got: delta.dim(),
        });
    }
    let post = prior.info() + delta;
    Ok(Posterior {
        cov: post.cholesky()?.inverse().into_matrix(),
        prior_cov: prior.covariance().into_matrix(),
    })
}

impl WbCoefficients {
    pub fn from_parts(prior: &GaussianBelief, delta: &SymMatrix) -> Result<Self> {
        let p = posterior_parts(prior, delta)?;
        let d = delta.as_matrix();
        // Λ_B − Λ_B Λ̃⁻¹ Λ_B = Λ_B Λ̃⁻¹ Δ_J
        let m = SymMatrix::symmetrize(prior.info().as_matrix() * &p.cov * d);
        Ok(WbCoefficients {
            mi: mutual_information_from_parts(prior, delta)?,
            m,
            m_prime: d * &p.cov,
        })
    }

    pub fn trace_m_prime(&self) -> f64 {
        self.m_prime.trace()
    }
}

impl WassCoefficients {
    pub fn from_parts(prior: &GaussianBelief, delta: &SymMatrix) -> Result<Self> {
        let p = posterior_parts(prior, delta)?;
        let d = delta.as_matrix();
        let dp = d * &p.cov;
        // I − Λ_B Λ̃⁻² Λ_B = ΔΛ̃⁻¹ + Λ̃⁻¹Δ − ΔΛ̃⁻²Δ, using Λ_B Λ̃⁻¹ = I − ΔΛ̃⁻¹
        let n = &dp + dp.transpose() - &dp * dp.transpose();
        // Λ_B⁻¹ − Λ̃⁻¹ − Λ̃⁻¹ΔΛ̃⁻¹ = Λ_B⁻¹ Δ Λ̃⁻¹ Δ Λ̃⁻¹
        let n_prime = &p.prior_cov * &dp * &dp;
        Ok(WassCoefficients {
            n: SymMatrix::symmetrize(n),
            n_prime: SymMatrix::symmetrize(n_prime.transpose()),
        })
    }
}

pub fn wb_coefficients(graph: &SupplementedGraph, j: &IndexSet) -> Result<WbCoefficients> {
    WbCoefficients::from_parts(graph.prior_belief(), &graph.supplemental_delta(j)?)
}

pub fn wass_coefficients(graph: &SupplementedGraph, j: &IndexSet) -> Result<WassCoefficients> {
    WassCoefficients::from_parts(graph.prior_belief(), &graph.supplemental_delta(j)?)
}

/// Specific information `S^WB_J(x)`. Negative values are legitimate.
pub fn specific_info_wb(coeffs: &WbCoefficients, mu_b: &DVector<f64>, x: &DVector<f64>) -> f64 {
    let u = x - mu_b;
    coeffs.mi - 0.5 * (coeffs.trace_m_prime() - coeffs.m.quad_form(&u))
}

/// Specific Wasserstein error reduction `S^Wass_J(x)`.
///
/// `N` need not be positive semidefinite, so the quadratic term is used as is.
pub fn specific_wer(coeffs: &WassCoefficients, mu_b: &DVector<f64>, x: &DVector<f64>) -> f64 {
    let u = mu_b - x;
    coeffs.n_prime.trace() + coeffs.n.quad_form(&u)
}

/// `Q(Z_J)`: mutual information for WB, `2 tr(Λ_B⁻¹ − Λ̃⁻¹)` for WASS.
pub fn quality(graph: &SupplementedGraph, j: &IndexSet, kind: QualityKind) -> Result<f64> {
    let delta = graph.supplemental_delta(j)?;
    quality_from_parts(graph.prior_belief(), &delta, kind)
}

pub fn quality_from_parts(prior: &GaussianBelief, delta: &SymMatrix, kind: QualityKind) -> Result<f64> {
    match kind {
        QualityKind::Wb => mutual_information_from_parts(prior, delta),
        QualityKind::Wass => {
            let p = posterior_parts(prior, delta)?;
            // Λ_B⁻¹ − Λ̃⁻¹ = Λ_B⁻¹ Δ Λ̃⁻¹
            let diff = &p.prior_cov * delta.as_matrix() * &p.cov;
            Ok(2.0 * diff.trace())
        }
    }
}

/// A specific-quality function `x ↦ S_J(x)` reduced to `c + uᵀ Q u` with
/// `u = x − μ_B`.
#[derive(Debug, Clone)]
pub struct SpecificQuality {
    offset: f64,
    quadratic: SymMatrix,
    scale: f64,
}

impl SpecificQuality {
    pub fn from_parts(prior: &GaussianBelief, delta: &SymMatrix, kind: QualityKind) -> Result<Self> {
        Ok(match kind {
            QualityKind::Wb => {
                let c = WbCoefficients::from_parts(prior, delta)?;
                SpecificQuality {
                    offset: c.mi - 0.5 * c.trace_m_prime(),
                    quadratic: c.m,
                    scale: 0.5,
                }
            }
            QualityKind::Wass => {
                let c = WassCoefficients::from_parts(prior, delta)?;
                SpecificQuality {
                    offset: c.n_prime.trace(),
                    quadratic: c.n,
                    scale: 1.0,
                }
            }
        })
    }

    pub fn new(graph: &SupplementedGraph, j: &IndexSet, kind: QualityKind) -> Result<Self> {
        Self::from_parts(graph.prior_belief(), &graph.supplemental_delta(j)?, kind)
    }

    /// Value at prior offset `u = x − μ_B`.
    pub fn at_offset(&self, u: &DVector<f64>) -> f64 {
        self.offset + self.scale * self.quadratic.quad_form(u)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RedundancyEstimate {
    pub value: f64,
    /// Sample standard deviation over `√n_samples`.
    pub std_error: f64,
    pub n_samples: usize,
    pub kind: QualityKind,
    /// Position within the antichain of the minimizing source, per sample.
    /// Ties resolve to the first source.
    #[serde(skip)]
    pub argmin: Vec<u32>,
}

impl RedundancyEstimate {
    /// How often each source of the antichain was the pointwise minimum.
    pub fn argmin_counts(&self, n_sources: usize) -> Vec<usize> {
        let mut counts = vec![0; n_sources];
        for &k in &self.argmin {
            counts[k as usize] += 1;
        }
        counts
    }
}

fn antichain_functions(
    graph: &SupplementedGraph,
    alpha: &Antichain,
    kind: QualityKind,
) -> Result<Vec<SpecificQuality>> {
    alpha
        .sources()
        .iter()
        .map(|j| SpecificQuality::new(graph, j, kind))
        .collect()
}

/// Monte Carlo estimate of `R(α) = E_p min_{J∈α} S_J(X)`.
///
/// Samples are drawn in fixed-size chunks, chunk `k` from stream `k` of a
/// ChaCha generator keyed by `seed`.
pub fn redundancy_mc(
    graph: &SupplementedGraph,
    alpha: &Antichain,
    kind: QualityKind,
    n_samples: usize,
    seed: u64,
) -> Result<RedundancyEstimate> {
    let functions = antichain_functions(graph, alpha, kind)?;
    redundancy_mc_with(graph.prior_belief(), &functions, kind, n_samples, seed)
}

/// Monte Carlo redundancy over explicit specific-quality functions.
pub fn redundancy_mc_with(
    prior: &GaussianBelief,
    functions: &[SpecificQuality],
    kind: QualityKind,
    n_samples: usize,
    seed: u64,
) -> Result<RedundancyEstimate> {
    if n_samples < 2 {
        return Err(Error::InvalidArgument("n_samples must be at least 2".into()));
    }
    if functions.is_empty() {
        return Err(Error::InvalidArgument("no sources".into()));
    }
    let mut values = Vec::with_capacity(n_samples);
    let mut argmin = Vec::with_capacity(n_samples);
    let n_chunks = n_samples.div_ceil(MC_CHUNK);
    for chunk in 0..n_chunks {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(chunk as u64);
        let len = MC_CHUNK.min(n_samples - chunk * MC_CHUNK);
        for _ in 0..len {
            let x = sample_belief(prior, &mut rng);
            let u = x - prior.mean();
            let (k, v) = functions
                .iter()
                .map(|s| s.at_offset(&u))
                .enumerate()
                .fold((0, f64::INFINITY), |best, (k, v)| if v < best.1 { (k, v) } else { best });
            values.push(v);
            argmin.push(k as u32);
        }
    }
    let (mean, std_error) = mean_and_std_error(&values);
    Ok(RedundancyEstimate {
        value: mean,
        std_error,
        n_samples,
        kind,
        argmin,
    })
}

pub(crate) fn mean_and_std_error(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Absolute tolerance of the 1D quadrature oracle.
pub const QUADRATURE_TOL: f64 = 1e-6;

/// `R(α)` for a one-dimensional state by adaptive Simpson quadrature of
/// `∫ p(x) min_J S_J(x) dx`.
pub fn redundancy_quadrature_1d(graph: &SupplementedGraph, alpha: &Antichain, kind: QualityKind) -> Result<f64> {
    if graph.state_dim() != 1 {
        return Err(Error::NotOneDimensional(graph.state_dim()));
    }
    let functions = antichain_functions(graph, alpha, kind)?;
    let prior = graph.prior_belief();
    let sigma = prior.covariance().as_matrix()[(0, 0)].sqrt();
    let integrand = |t: f64| {
        let u = DVector::from_element(1, sigma * t);
        let s = functions.iter().map(|f| f.at_offset(&u)).fold(f64::INFINITY, f64::min);
        (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt() * s
    };
    // Beyond |t| = 14 the Gaussian weight times any quadratic is below 1e-40.
    let (lo, hi) = (-14.0, 14.0);
    let pieces = 28;
    let h = (hi - lo) / pieces as f64;
    let tol = QUADRATURE_TOL * 1e-3 / pieces as f64;
    Ok((0..pieces)
        .map(|k| {
            let a = lo + k as f64 * h;
            adaptive_simpson(&integrand, a, a + h, tol)
        })
        .sum())
}

/// Adaptive Simpson rule with Richardson correction.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(f, a, b, fa, fm, fb, whole, tol, 48)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let diff = left + right - whole;
    if depth == 0 || diff.abs() <= 15.0 * tol {
        return left + right + diff / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// One evaluated antichain, as written to reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRecord {
    pub kind: QualityKind,
    pub antichain: Vec<Vec<usize>>,
    pub value: f64,
    pub std_error: f64,
    pub n_samples: usize,
    pub per_source_quality: Vec<f64>,
}

impl ReportRecord {
    pub const CSV_HEADER: &'static str = "kind,antichain,value,std_error,n_samples,per_source_quality";

    pub fn evaluate(
        graph: &SupplementedGraph,
        alpha: &Antichain,
        kind: QualityKind,
        n_samples: usize,
        seed: u64,
    ) -> Result<Self> {
        let est = redundancy_mc(graph, alpha, kind, n_samples, seed)?;
        let per_source_quality = alpha
            .sources()
            .iter()
            .map(|j| quality(graph, j, kind))
            .collect::<Result<Vec<_>>>()?;
        Ok(ReportRecord {
            kind,
            antichain: alpha.sources().iter().map(|s| s.as_slice().to_vec()).collect(),
            value: est.value,
            std_error: est.std_error,
            n_samples,
            per_source_quality,
        })
    }

    /// Sources are `;`-separated and factor indices `|`-separated so the row
    /// needs no quoting.
    pub fn to_csv_row(&self) -> String {
        let antichain = self
            .antichain
            .iter()
            .map(|s| s.iter().map(usize::to_string).collect::<Vec<_>>().join("|"))
            .collect::<Vec<_>>()
            .join(";");
        let qualities = self
            .per_source_quality
            .iter()
            .map(f64::to_string)
            .collect::<Vec<_>>()
            .join(";");
        format!(
            "{},{},{},{},{},{}",
            self.kind, antichain, self.value, self.std_error, self.n_samples, qualities
        )
    }
}
