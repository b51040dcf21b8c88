use fgr_core::redundancy::{quality, redundancy_mc};
use fgr_core::{Antichain, QualityKind};
use fgr_slam::{simulate_world, solve_sources, wc_ate, NonlinearGraph, SimConfig, SimWorld};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{ExperimentError, Result};

/// Outcome of one simulated world.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimRecord {
    pub sim_id: u64,
    pub r_wb: f64,
    pub r_wb_se: f64,
    pub r_wass: f64,
    pub r_wass_se: f64,
    /// Per-landmark qualities; NaN when the kind was not requested.
    pub q_wb: [f64; 2],
    pub q_wass: [f64; 2],
    pub wc_ate: f64,
    pub mean_dist: [f64; 2],
    /// True distance from each measuring pose to each landmark.
    pub posewise_dist: [Vec<f64>; 2],
    /// Gauss–Newton convergence of the base and the `B ∪ J_s` subgraph.
    pub converged: [bool; 2],
    /// Set when the pipeline failed; numeric fields are then NaN.
    pub error: Option<String>,
    /// Whether each singleton redundancy landed within 3 standard errors of
    /// its quality, for spot-checked simulations.
    pub self_redundancy_ok: Option<bool>,
}

impl SimRecord {
    fn failed(sim_id: u64, error: String, world: Option<&SimWorld>) -> Self {
        SimRecord {
            sim_id,
            r_wb: f64::NAN,
            r_wb_se: f64::NAN,
            r_wass: f64::NAN,
            r_wass_se: f64::NAN,
            q_wb: [f64::NAN; 2],
            q_wass: [f64::NAN; 2],
            wc_ate: f64::NAN,
            mean_dist: world.map_or([f64::NAN; 2], |w| w.mean_distances()),
            posewise_dist: world.map_or([vec![], vec![]], |w| w.posewise_distances()),
            converged: [false; 2],
            error: Some(error),
            self_redundancy_ok: None,
        }
    }

    /// Converged, error-free and finite in every requested column.
    pub fn is_valid(&self) -> bool {
        self.error.is_none()
            && self.converged.iter().all(|c| *c)
            && self.wc_ate.is_finite()
            && (self.r_wb.is_finite() || self.r_wass.is_finite())
    }

    pub fn redundancy(&self, kind: QualityKind) -> f64 {
        match kind {
            QualityKind::Wb => self.r_wb,
            QualityKind::Wass => self.r_wass,
        }
    }
}

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Independent seed for stream `purpose` of simulation `sim_id`.
pub fn derive_seed(root: u64, sim_id: u64, purpose: u64) -> u64 {
    mix(mix(mix(root) ^ sim_id) ^ purpose)
}

const WORLD: u64 = 0;
const MC_WB: u64 = 1;
const MC_WASS: u64 = 2;
const SPOT: u64 = 3;

fn mc_purpose(kind: QualityKind) -> u64 {
    match kind {
        QualityKind::Wb => MC_WB,
        QualityKind::Wass => MC_WASS,
    }
}

/// World configuration of simulation `sim_id`.
pub fn world_config(config: &ExperimentConfig, sim_id: u64) -> SimConfig {
    SimConfig {
        seed: derive_seed(config.root_seed, sim_id, WORLD),
        ..config.sim.clone()
    }
}

/// Simulates, solves and scores one world. Failures are recorded, not raised.
pub fn run_simulation(config: &ExperimentConfig, sim_id: u64) -> SimRecord {
    let world = match simulate_world(&world_config(config, sim_id)) {
        Ok(w) => w,
        Err(e) => return SimRecord::failed(sim_id, e.to_string(), None),
    };
    analyze_world(config, sim_id, &world).unwrap_or_else(|e| SimRecord::failed(sim_id, e.to_string(), Some(&world)))
}

/// Scores an already simulated world.
pub fn analyze_world(config: &ExperimentConfig, sim_id: u64, world: &SimWorld) -> Result<SimRecord> {
    let graph = NonlinearGraph::from_world(world)?;
    let sols = solve_sources(&graph)?;
    let pg = sols.pose_graph(&graph)?;
    let alpha = pg.antichain()?;
    let conv = sols.converged();

    let mut record = SimRecord::failed(sim_id, String::new(), Some(world));
    record.error = None;
    record.converged = [conv[0], conv[1]];
    record.wc_ate = wc_ate(&world.truth_poses, &sols.source_trajectories())?;
    let spot = sim_id.is_multiple_of(config.spot_check_every as u64);
    let mut spot_ok = true;
    for &kind in &config.kinds {
        let seed = derive_seed(config.root_seed, sim_id, mc_purpose(kind));
        let est = redundancy_mc(&pg.graph, &alpha, kind, config.mc_samples, seed)?;
        let q = [quality(&pg.graph, &pg.sources[0], kind)?, quality(&pg.graph, &pg.sources[1], kind)?];
        match kind {
            QualityKind::Wb => {
                (record.r_wb, record.r_wb_se, record.q_wb) = (est.value, est.std_error, q);
            }
            QualityKind::Wass => {
                (record.r_wass, record.r_wass_se, record.q_wass) = (est.value, est.std_error, q);
            }
        }
        if spot {
            for (s, j) in pg.sources.iter().enumerate() {
                let single = Antichain::singleton(j.clone())?;
                let seed = derive_seed(config.root_seed, sim_id, SPOT + 2 * s as u64 + mc_purpose(kind) * 16);
                let est = redundancy_mc(&pg.graph, &single, kind, config.mc_samples, seed)?;
                spot_ok &= (est.value - q[s]).abs() <= 3.0 * est.std_error;
            }
        }
    }
    record.self_redundancy_ok = spot.then_some(spot_ok);
    Ok(record)
}

/// Runs every simulation on a pool of `jobs` workers (0 means one per core).
/// Records come back ordered by `sim_id` whatever the scheduling.
pub fn run_experiment(config: &ExperimentConfig, jobs: usize) -> Result<Vec<SimRecord>> {
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| ExperimentError::Config(format!("worker pool: {e}")))?;
    let mut records: Vec<SimRecord> = pool.install(|| {
        (0..config.n_sims as u64)
            .into_par_iter()
            .map(|id| run_simulation(config, id))
            .collect()
    });
    records.sort_by_key(|r| r.sim_id);
    Ok(records)
}

/// Fails when more than a fifth of the simulations are unusable.
pub fn check_failures(records: &[SimRecord]) -> Result<()> {
    let failed = records.iter().filter(|r| !r.is_valid()).count();
    if failed * 5 > records.len() {
        return Err(ExperimentError::TooManyFailures {
            failed,
            total: records.len(),
        });
    }
    Ok(())
}
