use fgr_core::redundancy::{quality, redundancy_mc, redundancy_quadrature_1d};
use fgr_core::{Antichain, IndexSet, LinearFactor, QualityKind, SupplementedGraph, SymMatrix};
use nalgebra::{dmatrix, dvector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::Result;

/// One comparison between two ways of computing the same number.
#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub trial: usize,
    pub kind: QualityKind,
    pub check: &'static str,
    pub expected: f64,
    pub got: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// Random scalar graph: a unit-gain base factor and 2–3 scalar sources.
fn random_scalar_graph(rng: &mut ChaCha8Rng) -> Result<SupplementedGraph> {
    let factor = |gain: f64, z: f64, precision: f64| {
        LinearFactor::new(dmatrix![gain], dvector![z], SymMatrix::from_diagonal(&[precision]), vec![0])
    };
    let mut factors = vec![factor(1.0, rng.random_range(-1.0..1.0), rng.random_range(0.2..5.0))?];
    for _ in 0..rng.random_range(2..=3) {
        factors.push(factor(rng.random_range(0.3..2.0), rng.random_range(-1.0..1.0), rng.random_range(0.1..5.0))?);
    }
    Ok(SupplementedGraph::new(1, 1, factors, IndexSet::from([0]))?)
}

/// Cross-checks the 1D quadrature against Monte Carlo (within 3 standard
/// errors) and against the closed-form quality for singletons (to 1e-5).
pub fn cross_check_1d(trials: usize, samples: usize, seed: u64) -> Result<Vec<CheckResult>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = vec![];
    for trial in 0..trials {
        let graph = random_scalar_graph(&mut rng)?;
        let sources: Vec<IndexSet> = graph.supplemental().iter().map(|i| IndexSet::from([i])).collect();
        let alpha = Antichain::new(sources.clone())?;
        for kind in QualityKind::ALL {
            let quad = redundancy_quadrature_1d(&graph, &alpha, kind)?;
            let est = redundancy_mc(&graph, &alpha, kind, samples, rng.random())?;
            out.push(CheckResult {
                trial,
                kind,
                check: "quadrature vs Monte Carlo",
                expected: quad,
                got: est.value,
                tolerance: 3.0 * est.std_error,
                passed: (est.value - quad).abs() <= 3.0 * est.std_error,
            });
            for j in &sources {
                let q = quality(&graph, j, kind)?;
                let single = redundancy_quadrature_1d(&graph, &Antichain::singleton(j.clone())?, kind)?;
                out.push(CheckResult {
                    trial,
                    kind,
                    check: "self-redundancy",
                    expected: q,
                    got: single,
                    tolerance: 1e-5,
                    passed: (single - q).abs() <= 1e-5,
                });
            }
        }
    }
    Ok(out)
}
