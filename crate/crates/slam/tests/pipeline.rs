use fgr_core::redundancy::{quality, specific_wer, wass_coefficients};
use fgr_core::{IndexSet, LinearFactor, QualityKind, SupplementedGraph, SymMatrix};
use fgr_slam::{
    linearize_to_lfg, simulate_world, solve_gauss_newton, solve_sources, Factor, LinearizedGraph, NonlinearGraph,
    Pose2, SimConfig, SimWorld, Values,
};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn noiseless_world(seed: u64) -> SimWorld {
    simulate_world(&SimConfig {
        inject_noise: false,
        seed,
        ..SimConfig::default()
    })
    .unwrap()
}

fn truth_values(world: &SimWorld) -> Values {
    Values::new(world.truth_poses.clone(), world.landmarks.to_vec())
}

fn all_factors(graph: &NonlinearGraph) -> IndexSet {
    IndexSet::range(0..graph.factors().len())
}

fn max_pose_error(a: &Values, b: &Values) -> f64 {
    let poses = a.poses.iter().zip(&b.poses).map(|(p, q)| {
        (p.x - q.x).abs().max((p.y - q.y).abs()).max(fgr_slam::wrap_angle(p.theta - q.theta).abs())
    });
    let lms = a.landmarks.iter().zip(&b.landmarks).map(|(p, q)| (p[0] - q[0]).abs().max((p[1] - q[1]).abs()));
    poses.chain(lms).fold(0.0, f64::max)
}

#[test]
fn noiseless_truth_is_a_fixed_point() {
    for seed in 0..5 {
        let world = noiseless_world(seed);
        let graph = NonlinearGraph::from_world(&world).unwrap();
        let truth = truth_values(&world);
        let subsets = [
            all_factors(&graph),
            graph.base().union(&graph.landmark_source(0)),
            graph.base().union(&graph.landmark_source(1)),
        ];
        for subset in subsets {
            let sol = solve_gauss_newton(&graph, &subset, &truth).unwrap();
            assert!(sol.converged);
            assert!(sol.iterations <= 2, "{} iterations", sol.iterations);
            assert!(sol.cost < 1e-9, "cost {}", sol.cost);
            assert!(max_pose_error(&sol.values, &truth) < 1e-9);
        }
    }
}

#[test]
fn noiseless_perturbed_start_recovers_truth() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for seed in 0..5 {
        let world = noiseless_world(seed);
        let graph = NonlinearGraph::from_world(&world).unwrap();
        let truth = truth_values(&world);
        let delta = DVector::from_fn(truth.dim(), |_, _| rng.random_range(-0.1..0.1));
        let sol = solve_gauss_newton(&graph, &all_factors(&graph), &truth.retract(&delta)).unwrap();
        assert!(sol.converged);
        assert!(max_pose_error(&sol.values, &truth) < 1e-6);
    }
}

#[test]
fn base_solution_is_dead_reckoning() {
    let world = simulate_world(&SimConfig { seed: 8, ..SimConfig::default() }).unwrap();
    let graph = NonlinearGraph::from_world(&world).unwrap();
    let mut chain = vec![world.truth_poses[0]];
    for z in &world.odom_measurements {
        let next = chain.last().unwrap().compose(z);
        chain.push(next);
    }
    let mut start = truth_values(&world);
    start.poses.iter_mut().for_each(|p| *p = Pose2::new(p.x + 0.05, p.y - 0.05, p.theta + 0.05));
    let sol = solve_gauss_newton(&graph, graph.base(), &start).unwrap();
    assert!(sol.converged);
    let dead = Values::new(chain, sol.values.landmarks.clone());
    assert!(max_pose_error(&sol.values, &dead) < 1e-8);
    // untouched landmarks keep their start values
    assert_eq!(sol.values.landmarks, start.landmarks);
}

#[test]
fn subset_without_base_is_rejected() {
    let world = noiseless_world(1);
    let graph = NonlinearGraph::from_world(&world).unwrap();
    assert!(solve_gauss_newton(&graph, &graph.landmark_source(0), &truth_values(&world)).is_err());
}

#[test]
fn linear_graph_round_trips() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let dim = 5; // one pose and one landmark
    let mut factors = vec![LinearFactor::dense(DMatrix::identity(dim, dim), DVector::zeros(dim), SymMatrix::identity(dim), 1).unwrap()];
    for _ in 0..3 {
        let a = DMatrix::from_fn(2, dim, |_, _| rng.random_range(-1.0..1.0));
        let z = DVector::from_fn(2, |_, _| rng.random_range(-1.0..1.0));
        factors.push(LinearFactor::dense(a, z, SymMatrix::from_diagonal(&[2.0, 0.5]), 1).unwrap());
    }
    let original = SupplementedGraph::new(1, dim, factors, IndexSet::from([0])).unwrap();
    let nonlinear = NonlinearGraph::new(
        1,
        1,
        original
            .factors()
            .iter()
            .map(|f| Factor::Linear {
                a: f.a().clone(),
                z: f.z().clone(),
                gamma: f.gamma().clone(),
            })
            .collect(),
        original.base().clone(),
    )
    .unwrap();
    let at = Values::new(vec![Pose2::new(0.3, 0.1, -0.2)], vec![[1.0, 2.0]]);
    let back = linearize_to_lfg(&nonlinear, &at).unwrap().into_supplemented().unwrap();
    assert_eq!(back.factors(), original.factors());
    assert_eq!(back.base(), original.base());
    assert_eq!(back.prior_belief().info(), original.prior_belief().info());
    assert_eq!(back.prior_belief().mean(), original.prior_belief().mean());
}

/// Pose-block marginal information of `B ∪ J` by inverting the joint.
fn joint_pose_information(lin: &LinearizedGraph, subset: &IndexSet) -> DMatrix<f64> {
    let dim = lin.state_dim();
    let mut info = DMatrix::zeros(dim, dim);
    for i in subset.iter() {
        let f = &lin.factors()[i];
        info += f.a().transpose() * f.gamma().as_matrix() * f.a();
    }
    let active: Vec<usize> = (0..dim).filter(|&c| info.column(c).iter().any(|v| *v != 0.0)).collect();
    let sub = info.select_rows(&active).select_columns(&active);
    let cov = sub.try_inverse().unwrap();
    let poses: Vec<usize> = (0..active.len()).filter(|&k| active[k] < lin.pose_dim()).collect();
    cov.select_rows(&poses).select_columns(&poses).try_inverse().unwrap()
}

#[test]
fn marginalized_sources_match_joint_inverse() {
    for seed in 0..4 {
        let world = simulate_world(&SimConfig { seed, ..SimConfig::default() }).unwrap();
        let graph = NonlinearGraph::from_world(&world).unwrap();
        let sols = solve_sources(&graph).unwrap();
        assert!(sols.converged().iter().all(|c| *c));
        let points: Vec<_> = sols
            .source_sets
            .iter()
            .cloned()
            .zip(sols.sources.iter().map(|s| s.values.clone()))
            .collect();
        let lin = LinearizedGraph::from_points(&graph, &sols.base.values, &points).unwrap();
        let pg = sols.pose_graph(&graph).unwrap();
        for (s, j) in sols.source_sets.iter().enumerate() {
            let oracle = joint_pose_information(&lin, &graph.base().union(j));
            let post = pg.graph.posterior_belief(&pg.sources[s]).unwrap();
            let got = post.info().as_matrix();
            assert!((got - &oracle).amax() <= 1e-7 * oracle.amax(), "seed {seed} source {s}");
            // PD posterior at the converged solution
            assert!(post.info().cholesky().is_ok());
        }
        // the base prior is the linearized odometry chain
        let base_info = joint_pose_information(&lin, graph.base());
        let prior = pg.graph.prior_belief().info().as_matrix();
        assert!((prior - &base_info).amax() <= 1e-7 * base_info.amax());
    }
}

#[test]
fn qualities_are_invariant_under_rigid_reanchoring() {
    let t = Pose2::new(3.0, -2.0, 1.0);
    for seed in [21, 22, 23] {
        let world = simulate_world(&SimConfig { seed, ..SimConfig::default() }).unwrap();
        let mut moved = world.clone();
        moved.truth_poses = world.truth_poses.iter().map(|p| t.compose(p)).collect();
        let lm = truth_values(&world).transformed(&t).landmarks;
        moved.landmarks = [lm[0], lm[1]];

        let evaluate = |w: &SimWorld| {
            let graph = NonlinearGraph::from_world(w).unwrap();
            let pg = solve_sources(&graph).unwrap().pose_graph(&graph).unwrap();
            let mut out = vec![];
            for j in &pg.sources {
                out.push(pg.graph.mutual_information(j).unwrap());
                for kind in QualityKind::ALL {
                    out.push(quality(&pg.graph, j, kind).unwrap());
                }
            }
            out.push(pg.graph.mutual_information(pg.graph.supplemental()).unwrap());
            out
        };
        let a = evaluate(&world);
        let b = evaluate(&moved);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() <= 1e-6 * x.abs().max(1e-12), "seed {seed}: {x} vs {y}");
        }
    }
}

#[test]
fn wasserstein_quadratic_vanishes_at_the_prior_mean() {
    for seed in 0..5 {
        let world = noiseless_world(seed);
        let graph = NonlinearGraph::from_world(&world).unwrap();
        let pg = solve_sources(&graph).unwrap().pose_graph(&graph).unwrap();
        let mu = pg.graph.prior_belief().mean().clone();
        for j in &pg.sources {
            let coeffs = wass_coefficients(&pg.graph, j).unwrap();
            let at_mean = specific_wer(&coeffs, &mu, &mu);
            assert!((at_mean - coeffs.n_prime.trace()).abs() <= 1e-12 * at_mean.abs());
        }
    }
}

/// `N = I − KᵀK` with `K = Λ̃⁻¹Λ_B`, straight from the definition.
fn textbook_weight(pg: &fgr_slam::PoseGraph, j: &IndexSet) -> DMatrix<f64> {
    let lb = pg.graph.prior_belief().info().as_matrix().clone();
    let lt = pg.graph.posterior_belief(j).unwrap().info().as_matrix().clone();
    let k = lt.try_inverse().unwrap() * &lb;
    DMatrix::identity(k.nrows(), k.nrows()) - k.transpose() * &k
}

/// The prior mean minimizes `S^Wass` only when `KᵀK ⪯ I`. With stiff
/// odometry and a weak anchor `K` is far from normal and the weight is
/// indefinite, so moving away from the prior mean along a negative direction
/// lowers `S^Wass`.
#[test]
fn wasserstein_weight_is_indefinite_on_slam_graphs() {
    for seed in 0..5 {
        let world = noiseless_world(seed);
        let graph = NonlinearGraph::from_world(&world).unwrap();
        let pg = solve_sources(&graph).unwrap().pose_graph(&graph).unwrap();
        let mu = pg.graph.prior_belief().mean().clone();
        for j in &pg.sources {
            let coeffs = wass_coefficients(&pg.graph, j).unwrap();
            let oracle = textbook_weight(&pg, j);
            assert!((coeffs.n.as_matrix() - &oracle).amax() <= 1e-6 * oracle.amax());
            let eig = nalgebra::SymmetricEigen::new(coeffs.n.as_matrix().clone());
            let k = eig.eigenvalues.imin();
            assert!(eig.eigenvalues[k] < 0.0);
            let x = &mu + eig.eigenvectors.column(k) * 0.1;
            assert!(specific_wer(&coeffs, &mu, &x) < specific_wer(&coeffs, &mu, &mu));
        }
    }
}

/// With commuting `Λ_B` and `Δ`, `K` is symmetric with spectrum in `(0, 1]`
/// and the prior mean is the pointwise minimum.
#[test]
fn wasserstein_minimum_at_prior_mean_when_information_commutes() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for _ in 0..20 {
        let dim = 4;
        let diag = |rng: &mut ChaCha8Rng| (0..dim).map(|_| rng.random_range(0.01..100.0)).collect::<Vec<_>>();
        let lb = diag(&mut rng);
        let d = diag(&mut rng);
        let f = |g: &[f64]| LinearFactor::dense(DMatrix::identity(dim, dim), DVector::zeros(dim), SymMatrix::from_diagonal(g), 1).unwrap();
        let graph = SupplementedGraph::new(1, dim, vec![f(&lb), f(&d)], IndexSet::from([0])).unwrap();
        let j = IndexSet::from([1]);
        let coeffs = wass_coefficients(&graph, &j).unwrap();
        let mu = graph.prior_belief().mean().clone();
        let at_mean = specific_wer(&coeffs, &mu, &mu);
        for _ in 0..200 {
            let scale = rng.random_range(0.01..2.0);
            let x = &mu + DVector::from_fn(dim, |_, _| scale * rng.random_range(-1.0..1.0));
            assert!(specific_wer(&coeffs, &mu, &x) >= at_mean - 1e-12 * at_mean.abs());
        }
    }
}
