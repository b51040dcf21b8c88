//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any failed.

use std::process::ExitCode;
use std::time::Instant;

use fgr_core::gauss::{conditional_mean_posterior, expected_recentred_quadratic};
use fgr_core::redundancy::{
    quality, redundancy_mc, redundancy_quadrature_1d, specific_info_wb, specific_wer, wass_coefficients,
    wb_coefficients,
};
use fgr_core::{Antichain, IndexSet, LinearFactor, QualityKind, SupplementedGraph, SymMatrix};
use fgr_experiment::output::records_to_csv;
use fgr_experiment::{correlation_report, run_experiment, ExperimentConfig, SimRecord, Summary};
use fgr_oracles::{
    conditional_moments_by_sampling, entropy_by_quadrature, random_instance, specific_info_by_definition,
    specific_wer_by_definition, ChaCha8Rng, Estimate, RandomInstance, SeedableRng,
};
use fgr_slam::{simulate_world, solve_sources, wc_ate, wrap_angle, NonlinearGraph, SimConfig, Values};
use nalgebra::{dmatrix, dvector, DMatrix, DVector};
use rand::Rng;

/// Running tally of checks with the worst standardized deviation seen.
#[derive(Default)]
struct Tally {
    checks: usize,
    stat_checks: usize,
    failures: Vec<String>,
    worst_z: f64,
}

impl Tally {
    fn stat(&mut self, label: impl FnOnce() -> String, est: &Estimate, target: f64) {
        self.checks += 1;
        self.stat_checks += 1;
        let z = (est.mean - target).abs() / est.std_error.max(f64::MIN_POSITIVE);
        self.worst_z = self.worst_z.max(z);
        if !est.within(target, 3.0) {
            self.failures.push(format!("{}: {} ± {} vs {}", label(), est.mean, est.std_error, target));
        }
    }

    fn exact(&mut self, label: impl FnOnce() -> String, ok: bool) {
        self.checks += 1;
        if !ok {
            self.failures.push(label());
        }
    }

    fn verdict(self, extra: String) -> (bool, String) {
        // a correct estimator leaves 3σ with probability 0.0027
        let mut detail = format!(
            "{} checks, {} failed, worst |z| {:.2} over {} 3σ checks ({:.1} exceedances expected by chance)",
            self.checks,
            self.failures.len(),
            self.worst_z,
            self.stat_checks,
            0.0027 * self.stat_checks as f64
        );
        if !extra.is_empty() {
            detail = format!("{detail}; {extra}");
        }
        if !self.failures.is_empty() {
            detail = format!("{detail}; failures: {}", self.failures.join(" | "));
        }
        (self.failures.is_empty(), detail)
    }
}

fn unions(sources: &[IndexSet]) -> Vec<(u32, IndexSet)> {
    (1..1u32 << sources.len())
        .map(|mask| {
            let set = sources
                .iter()
                .enumerate()
                .filter(|(k, _)| mask >> k & 1 == 1)
                .fold(IndexSet::empty(), |acc, (_, s)| acc.union(s));
            (mask, set)
        })
        .collect()
}

fn antichain_of(sources: &[IndexSet], mask: u32) -> Antichain {
    Antichain::new(
        sources
            .iter()
            .enumerate()
            .filter(|(k, _)| mask >> k & 1 == 1)
            .map(|(_, s)| s.clone())
            .collect(),
    )
    .unwrap()
}

fn axiom_suite() -> (bool, String) {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xacce_0001);
    let mut t = Tally::default();
    for g in 0..200 {
        let dim = 1 + g % 4;
        let n_sources = rng.random_range(2..=4);
        let inst = random_instance(dim, n_sources, &mut rng);
        let graph = &inst.graph;
        for kind in QualityKind::ALL {
            // (SR)
            for (s, j) in inst.sources.iter().enumerate() {
                let q = quality(graph, j, kind).unwrap();
                let single = Antichain::singleton(j.clone()).unwrap();
                let est = redundancy_mc(graph, &single, kind, 10_000, g as u64 * 16 + s as u64).unwrap();
                let est = Estimate {
                    mean: est.value,
                    std_error: est.std_error,
                };
                t.stat(|| format!("SR graph {g} source {s} {kind}"), &est, q);
                if dim == 1 {
                    let quad = redundancy_quadrature_1d(graph, &single, kind).unwrap();
                    t.exact(|| format!("SR quadrature graph {g} source {s} {kind}: {quad} vs {q}"), (quad - q).abs() < 1e-5);
                }
            }
            // (MQ) over unions of sources
            let sets = unions(&inst.sources);
            let qualities: Vec<f64> = sets.iter().map(|(_, j)| quality(graph, j, kind).unwrap()).collect();
            for (a, (ma, _)) in sets.iter().enumerate() {
                for (b, (mb, _)) in sets.iter().enumerate() {
                    if ma & mb == *ma && ma != mb {
                        t.exact(
                            || format!("MQ graph {g} {kind}: {} > {}", qualities[a], qualities[b]),
                            qualities[a] <= qualities[b] + 1e-10,
                        );
                    }
                }
            }
            // (MR) over nested antichains of sources
            let masks: Vec<u32> = (1..1u32 << inst.sources.len()).collect();
            let values: Vec<(f64, f64)> = masks
                .iter()
                .map(|&m| {
                    let alpha = antichain_of(&inst.sources, m);
                    if dim == 1 {
                        (redundancy_quadrature_1d(graph, &alpha, kind).unwrap(), 0.0)
                    } else {
                        let est = redundancy_mc(graph, &alpha, kind, 10_000, 7_000 + g as u64).unwrap();
                        (est.value, est.std_error)
                    }
                })
                .collect();
            for (a, &ma) in masks.iter().enumerate() {
                for (b, &mb) in masks.iter().enumerate() {
                    // beta ⊂ alpha
                    if mb & ma == mb && ma != mb {
                        let (ra, sa) = values[a];
                        let (rb, sb) = values[b];
                        let slack = if dim == 1 { 1e-9 } else { 3.0 * (sa * sa + sb * sb).sqrt() };
                        t.exact(|| format!("MR graph {g} {kind}: R({ma:b}) = {ra} > R({mb:b}) = {rb}"), ra <= rb + slack);
                    }
                }
            }
        }
    }
    let secs = started.elapsed().as_secs_f64();
    let fast = secs < 120.0;
    let (ok, detail) = t.verdict(format!("{secs:.1}s"));
    (ok && fast, detail)
}

fn closed_forms_vs_definitions() -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(0xacce_0002);
    let mut t = Tally::default();
    for trial in 0..50 {
        let dim = 1 + trial % 2;
        let inst = random_instance(dim, 1, &mut rng);
        let j = &inst.sources[0];
        let mu = inst.graph.prior_belief().mean().clone();
        let cov = inst.graph.prior_belief().covariance().into_matrix();
        // a point a couple of prior standard deviations away
        let x = &mu + DVector::from_fn(dim, |i, _| rng.random_range(-2.0..2.0) * cov[(i, i)].sqrt());
        let wb = wb_coefficients(&inst.graph, j).unwrap();
        let wass = wass_coefficients(&inst.graph, j).unwrap();
        let def_wb = specific_info_by_definition(&inst.graph, j, &x, 100_000, &mut rng);
        let def_wass = specific_wer_by_definition(&inst.graph, j, &x, 100_000, &mut rng);
        t.stat(|| format!("S^WB trial {trial}"), &def_wb, specific_info_wb(&wb, &mu, &x));
        t.stat(|| format!("S^Wass trial {trial}"), &def_wass, specific_wer(&wass, &mu, &x));
    }
    t.verdict(String::new())
}

fn expectation_identities() -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(0xacce_0003);
    let mut t = Tally::default();
    for trial in 0..100 {
        let dim = 1 + trial % 4;
        let inst = random_instance(dim, 1, &mut rng);
        let j = &inst.sources[0];
        let mu = inst.graph.prior_belief().mean().clone();
        let wb = wb_coefficients(&inst.graph, j).unwrap();
        let wass = wass_coefficients(&inst.graph, j).unwrap();
        let xs = inst.graph.sample_prior(trial as u64, 10_000).unwrap();
        let s_wb: Vec<f64> = xs.iter().map(|x| specific_info_wb(&wb, &mu, x)).collect();
        let s_wass: Vec<f64> = xs.iter().map(|x| specific_wer(&wass, &mu, x)).collect();
        let mi = inst.graph.mutual_information(j).unwrap();
        let q = quality(&inst.graph, j, QualityKind::Wass).unwrap();
        t.stat(|| format!("E S^WB trial {trial}"), &Estimate::from_samples(&s_wb), mi);
        t.stat(|| format!("E S^Wass trial {trial}"), &Estimate::from_samples(&s_wass), q);
    }
    // Λ_B = 1 and one unit source: S^Wass(μ_B) = tr N′ = ¼, N Λ_B⁻¹ = ¾
    let graph = scalar_graph(1.0, 1.0);
    let wass = wass_coefficients(&graph, &IndexSet::from([1])).unwrap();
    let n_prime = wass.n_prime.trace();
    let n = wass.n.as_matrix()[(0, 0)];
    t.exact(|| format!("1D: tr N′ = {n_prime}, N = {n}"), (n_prime - 0.25).abs() < 1e-15 && (n - 0.75).abs() < 1e-15 && (n_prime + n - 1.0).abs() < 1e-15);
    let q = quality(&graph, &IndexSet::from([1]), QualityKind::Wass).unwrap();
    t.exact(|| format!("1D: Q^Wass = {q}"), (q - 1.0).abs() < 1e-15);
    t.verdict(String::new())
}

fn scalar_graph(prior_info: f64, delta: f64) -> SupplementedGraph {
    let f = |g: f64| LinearFactor::new(dmatrix![1.0], dvector![0.0], SymMatrix::from_diagonal(&[g]), vec![0]).unwrap();
    SupplementedGraph::new(1, 1, vec![f(prior_info), f(delta)], IndexSet::from([0])).unwrap()
}

fn mutual_information_forms() -> (bool, String) {
    let mut t = Tally::default();
    let normal = |var: f64| move |x: f64| (-0.5 * x * x / var).exp() / (2.0 * std::f64::consts::PI * var).sqrt();
    for (prior, delta) in [(1.0, 1.0), (0.3, 2.5), (4.0, 0.1), (2.0, 7.0)] {
        let graph = scalar_graph(prior, delta);
        let mi = graph.mutual_information(&IndexSet::from([1])).unwrap();
        let h_prior = entropy_by_quadrature(normal(1.0 / prior), 0.0, 20.0 / prior.sqrt());
        let h_post = entropy_by_quadrature(normal(1.0 / (prior + delta)), 0.0, 20.0 / (prior + delta).sqrt());
        let diff = h_prior - h_post;
        t.exact(|| format!("1D Λ_B = {prior}, Δ = {delta}: {mi} vs {diff}"), (mi - diff).abs() < 1e-5);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0xacce_0004);
    for trial in 0..200 {
        let dim = 1 + trial % 4;
        let inst = random_instance(dim, 3, &mut rng);
        let sup = inst.graph.supplemental().clone();
        for j in inst.sources.iter().chain([&sup]) {
            let mi = inst.graph.mutual_information(j).unwrap();
            let d = inst.graph.supplemental_delta(j).unwrap();
            let lb_inv = inst.graph.prior_belief().info().as_matrix().clone().try_inverse().unwrap();
            let alt = 0.5 * (DMatrix::identity(dim, dim) + d.as_matrix() * lb_inv).determinant().ln();
            t.exact(|| format!("trial {trial}: {mi} vs {alt}"), (mi - alt).abs() <= 1e-9 * alt.abs().max(1.0));
        }
    }
    t.verdict(String::new())
}

fn conditional_moments() -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(0xacce_0005);
    let mut t = Tally::default();
    for trial in 0..50 {
        let dim = 1 + trial % 3;
        let inst: RandomInstance = random_instance(dim, 1, &mut rng);
        let j = &inst.sources[0];
        let prior = inst.graph.prior_belief();
        let delta = inst.graph.supplemental_delta(j).unwrap();
        let x = prior.mean() + DVector::from_fn(dim, |_, _| rng.random_range(-1.5..1.5));
        let g = DMatrix::from_fn(dim, dim, |_, _| rng.random_range(-1.0..1.0));
        let tm = SymMatrix::symmetrize(g.transpose() * &g);
        let m = DVector::from_fn(dim, |_, _| rng.random_range(-1.0..1.0));
        let (means, quad) = conditional_moments_by_sampling(&inst.graph, j, &x, tm.as_matrix(), &m, 100_000, &mut rng);
        let closed_mean = conditional_mean_posterior(prior, &delta, &x).unwrap();
        for (k, est) in means.iter().enumerate() {
            t.stat(|| format!("mean trial {trial} coord {k}"), est, closed_mean[k]);
        }
        let closed_quad = expected_recentred_quadratic(prior, &delta, &tm, &m, &x).unwrap();
        t.stat(|| format!("quadratic trial {trial}"), &quad, closed_quad);
    }
    t.verdict(String::new())
}

fn numeric_jacobian(graph: &NonlinearGraph, index: usize, at: &Values, h: f64) -> DMatrix<f64> {
    let dim = at.dim();
    let r0 = graph.evaluate(index, at).unwrap().residual;
    let mut jac = DMatrix::zeros(r0.len(), dim);
    for c in 0..dim {
        let mut e = DVector::zeros(dim);
        e[c] = h;
        let plus = graph.evaluate(index, &at.retract(&e)).unwrap().residual;
        let minus = graph.evaluate(index, &at.retract(&(-&e))).unwrap().residual;
        for r in 0..r0.len() {
            jac[(r, c)] = wrap_angle(plus[r] - minus[r]) / (2.0 * h);
        }
    }
    jac
}

fn slam_sanity() -> (bool, String) {
    let mut t = Tally::default();
    let mut worst_ate: f64 = 0.0;
    let mut worst_iters = 0;
    for seed in 0..20 {
        let world = simulate_world(&SimConfig {
            inject_noise: false,
            seed,
            ..SimConfig::default()
        })
        .unwrap();
        let graph = NonlinearGraph::from_world(&world).unwrap();
        let sols = solve_sources(&graph).unwrap();
        let ate = wc_ate(&world.truth_poses, &sols.source_trajectories()).unwrap();
        let iters = sols.sources.iter().chain([&sols.base]).map(|s| s.iterations).max().unwrap();
        worst_ate = worst_ate.max(ate);
        worst_iters = worst_iters.max(iters);
        t.exact(|| format!("world {seed}: WC-ATE {ate}"), ate < 1e-8);
        t.exact(|| format!("world {seed}: {iters} iterations"), iters <= 2 && sols.converged().iter().all(|c| *c));
    }
    let mut worst_jac: f64 = 0.0;
    let mut rng = ChaCha8Rng::seed_from_u64(0xacce_0006);
    for seed in 0..20 {
        let world = simulate_world(&SimConfig { seed, ..SimConfig::default() }).unwrap();
        let graph = NonlinearGraph::from_world(&world).unwrap();
        let truth = Values::new(world.truth_poses.clone(), world.landmarks.to_vec());
        let jitter = DVector::from_fn(truth.dim(), |_, _| rng.random_range(-0.3..0.3));
        let at = truth.retract(&jitter);
        for index in 0..graph.factors().len() {
            let analytic = graph.evaluate(index, &at).unwrap().jacobian;
            let err = (&analytic - numeric_jacobian(&graph, index, &at, 1e-6)).amax();
            worst_jac = worst_jac.max(err);
            t.exact(|| format!("world {seed} factor {index}: Jacobian error {err}"), err < 1e-5);
        }
    }
    t.verdict(format!(
        "worst WC-ATE {worst_ate:.1e}, most iterations {worst_iters}, worst Jacobian error {worst_jac:.1e}"
    ))
}

fn fig1_trend(s: &Summary, secs: f64) -> (bool, String) {
    let q = s.quartile_medians.wass.as_ref().unwrap();
    let ok = s.spearman_rwass_wcate < 0.0
        && s.p_rwass_wcate < 0.01
        && s.permutations == 10_000
        && q.top_quartile_wcate < q.bottom_quartile_wcate;
    (
        ok,
        format!(
            "{} valid sims in {secs:.0}s, Spearman(R^Wass, WC-ATE) = {:.3} (p = {:.1e}), median WC-ATE top quartile {:.3} vs bottom {:.3}",
            s.n_valid, s.spearman_rwass_wcate, s.p_rwass_wcate, q.top_quartile_wcate, q.bottom_quartile_wcate
        ),
    )
}

fn fig2_trend(s: &Summary) -> (bool, String) {
    let wb = s.top_decile_distances.wb.as_ref().unwrap();
    let wass = s.top_decile_distances.wass.as_ref().unwrap();
    let ok = s.spearman_r_dist < 0.0
        && s.p_r_dist < 0.01
        && s.spearman_rwb_dist < 0.0
        && s.p_rwb_dist < 0.01
        && wb.both_below_median_fraction == 1.0
        && wass.both_below_median_fraction == 1.0;
    (
        ok,
        format!(
            "Spearman vs max mean distance: R^Wass {:.3} (p = {:.1e}), R^WB {:.3} (p = {:.1e}); top-decile sims with both distances below median: R^Wass {}/{}, R^WB {}/{}",
            s.spearman_r_dist,
            s.p_r_dist,
            s.spearman_rwb_dist,
            s.p_rwb_dist,
            (wass.both_below_median_fraction * wass.count as f64).round(),
            wass.count,
            (wb.both_below_median_fraction * wb.count as f64).round(),
            wb.count
        ),
    )
}

fn determinism(config: &ExperimentConfig, reference: &[SimRecord]) -> (bool, String) {
    let expected = records_to_csv(reference);
    let mut same = vec![];
    for jobs in [1, 2] {
        let csv = records_to_csv(&run_experiment(config, jobs).unwrap());
        same.push((jobs, csv == expected));
    }
    let ok = same.iter().all(|(_, s)| *s);
    let detail = same
        .iter()
        .map(|(j, s)| format!("{j} workers {}", if *s { "identical" } else { "differ" }))
        .collect::<Vec<_>>()
        .join(", ");
    (ok, format!("{detail} to the 8-worker run ({} bytes)", expected.len()))
}

fn main() -> ExitCode {
    let mut results: Vec<(usize, &str, (bool, String))> = vec![];
    let mut run = |n, name, f: &mut dyn FnMut() -> (bool, String)| {
        let outcome = f();
        println!("criterion {n} [{}] {name}: {}", if outcome.0 { "PASS" } else { "FAIL" }, outcome.1);
        results.push((n, name, outcome));
    };
    run(1, "axiom suite", &mut axiom_suite);
    run(2, "closed forms vs defining expectations", &mut closed_forms_vs_definitions);
    run(3, "expectation identities", &mut expectation_identities);
    run(4, "mutual information forms", &mut mutual_information_forms);
    run(5, "conditional moments", &mut conditional_moments);
    run(6, "SLAM pipeline sanity", &mut slam_sanity);

    let config = ExperimentConfig::default();
    let started = Instant::now();
    let records = run_experiment(&config, 8).unwrap();
    let secs = started.elapsed().as_secs_f64();
    let summary = correlation_report(&records, config.permutations, config.root_seed).unwrap();
    run(7, "redundancy vs WC-ATE trend", &mut || fig1_trend(&summary, secs));
    run(8, "redundancy vs landmark distance trend", &mut || fig2_trend(&summary));
    run(9, "determinism across worker counts", &mut || determinism(&config, &records));

    let failed: Vec<usize> = results.iter().filter(|r| !r.2 .0).map(|r| r.0).collect();
    println!("acceptance: {} of {} criteria passed", results.len() - failed.len(), results.len());
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
