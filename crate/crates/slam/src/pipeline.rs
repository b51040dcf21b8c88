use fgr_core::IndexSet;

use crate::error::Result;
use crate::graph::{NonlinearGraph, Values};
use crate::linearize::{LinearizedGraph, PoseGraph};
use crate::se2::Pose2;
use crate::solve::{solve_gauss_newton, Solution};

/// MAP estimates of the base graph and of each base-plus-landmark subgraph.
#[derive(Debug, Clone)]
pub struct SourceSolutions {
    pub base: Solution,
    /// Factor sets `J_s`, one per landmark.
    pub source_sets: Vec<IndexSet>,
    /// Solution of `B ∪ J_s`, aligned with `source_sets`.
    pub sources: Vec<Solution>,
}

/// Solves the base from the dead-reckoned initial estimate and every
/// single-landmark subgraph from a start per landmark observation.
pub fn solve_sources(graph: &NonlinearGraph) -> Result<SourceSolutions> {
    let init = graph.initial_estimate();
    let base = solve_gauss_newton(graph, graph.base(), &init)?;
    let source_sets: Vec<IndexSet> = (0..graph.n_landmarks()).map(|s| graph.landmark_source(s)).collect();
    let sources = source_sets
        .iter()
        .enumerate()
        .map(|(s, j)| solve_multistart(graph, &graph.base().union(j), &init, s))
        .collect::<Result<Vec<_>>>()?;
    Ok(SourceSolutions {
        base,
        source_sets,
        sources,
    })
}

/// Gauss–Newton restarted from every observation-based guess of `landmark`,
/// keeping the lowest-cost solution (converged runs first). A start that hits
/// degenerate geometry is skipped unless every start fails.
fn solve_multistart(graph: &NonlinearGraph, subset: &IndexSet, init: &Values, landmark: usize) -> Result<Solution> {
    let mut best: Option<Solution> = None;
    let mut first_err = None;
    for guess in graph.landmark_guesses(init, landmark) {
        let mut start = init.clone();
        start.landmarks[landmark] = guess;
        match solve_gauss_newton(graph, subset, &start) {
            Ok(sol) => {
                let better = best
                    .as_ref()
                    .is_none_or(|b| (sol.converged, -sol.cost) > (b.converged, -b.cost));
                if better {
                    best = Some(sol);
                }
            }
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    match (best, first_err) {
        (Some(sol), _) => Ok(sol),
        (None, Some(e)) => Err(e),
        (None, None) => solve_gauss_newton(graph, subset, init),
    }
}

impl SourceSolutions {
    /// Base factors linearized at the base solution and each source at its
    /// own subgraph solution, with the landmarks marginalized.
    pub fn pose_graph(&self, graph: &NonlinearGraph) -> Result<PoseGraph> {
        let points: Vec<_> = self
            .source_sets
            .iter()
            .cloned()
            .zip(self.sources.iter().map(|s| s.values.clone()))
            .collect();
        LinearizedGraph::from_points(graph, &self.base.values, &points)?.marginalize_landmarks(&self.source_sets)
    }

    /// Estimated trajectories of the single-source subgraphs.
    pub fn source_trajectories(&self) -> Vec<Vec<Pose2>> {
        self.sources.iter().map(|s| s.values.poses.clone()).collect()
    }

    pub fn converged(&self) -> Vec<bool> {
        self.sources.iter().map(|s| s.converged && self.base.converged).collect()
    }
}
