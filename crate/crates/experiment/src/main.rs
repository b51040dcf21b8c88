use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fgr_experiment::error::{ExperimentError, Result};
use fgr_experiment::output::{self, RECORDS_FILE};
use fgr_experiment::runner::{check_failures, world_config};
use fgr_experiment::{correlation_report, oracle, run_experiment, ExperimentConfig};
use rayon::prelude::*;

#[derive(Parser)]
#[command(name = "fgr", version, about = "Redundancy experiments on simulated landmark SLAM")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Experiment config (JSON); defaults are used for missing fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Root seed, overriding the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory, overriding the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (0 = one per core).
    #[arg(long, default_value_t = 0)]
    jobs: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the worlds of a batch and write them as JSON.
    Simulate(Common),
    /// Run the full batch and write records, summary and plots.
    Analyze(Common),
    /// Recompute summary and plots from an existing records.csv.
    Report(Common),
    /// Run the 1D quadrature / Monte Carlo cross-checks.
    Oracle {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 50)]
        trials: usize,
        #[arg(long, default_value_t = 20_000)]
        samples: usize,
    },
}

fn load(common: &Common) -> Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.root_seed = seed;
    }
    if let Some(out) = &common.out {
        cfg.output_dir = out.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| ExperimentError::Config(format!("worker pool: {e}")))
}

fn simulate(common: &Common) -> Result<()> {
    let cfg = load(common)?;
    let dir = cfg.output_dir.join("worlds");
    output::create_dir(&dir)?;
    output::write_config(&cfg.output_dir, &cfg)?;
    pool(common.jobs)?.install(|| {
        (0..cfg.n_sims as u64).into_par_iter().try_for_each(|id| {
            let world = fgr_slam::simulate_world(&world_config(&cfg, id))?;
            let path = dir.join(format!("world_{id:05}.json"));
            std::fs::write(&path, world.to_json()).map_err(|e| ExperimentError::io(&path, e))
        })
    })?;
    println!("wrote {} worlds to {}", cfg.n_sims, dir.display());
    Ok(())
}

fn report(cfg: &ExperimentConfig, records: &[fgr_experiment::SimRecord]) -> Result<()> {
    let summary = correlation_report(records, cfg.permutations, cfg.root_seed)?;
    output::emit_outputs(records, &summary, &cfg.kinds, &cfg.output_dir)?;
    println!(
        "n_valid={} spearman(R^Wass, WC-ATE)={:.3} (p={:.4}) spearman(R^WB, WC-ATE)={:.3} (p={:.4})",
        summary.n_valid,
        summary.spearman_rwass_wcate,
        summary.p_rwass_wcate,
        summary.spearman_rwb_wcate,
        summary.p_rwb_wcate
    );
    Ok(())
}

fn analyze(common: &Common) -> Result<()> {
    let cfg = load(common)?;
    let records = run_experiment(&cfg, common.jobs)?;
    output::write_records(&cfg.output_dir, &records)?;
    output::write_config(&cfg.output_dir, &cfg)?;
    let failed = records.iter().filter(|r| !r.is_valid()).count();
    println!("{} simulations, {failed} failed", records.len());
    check_failures(&records)?;
    report(&cfg, &records)
}

fn report_only(common: &Common) -> Result<()> {
    let cfg = load(common)?;
    let records = output::read_records(&Path::new(&cfg.output_dir).join(RECORDS_FILE))?;
    report(&cfg, &records)
}

fn run_oracle(seed: u64, trials: usize, samples: usize) -> Result<bool> {
    let results = oracle::cross_check_1d(trials, samples, seed)?;
    let failed: Vec<_> = results.iter().filter(|r| !r.passed).collect();
    for r in &failed {
        println!("FAIL {}", serde_json::to_string(r).expect("serializes"));
    }
    println!("{} checks, {} failed", results.len(), failed.len());
    Ok(failed.is_empty())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate(c) => simulate(c),
        Command::Analyze(c) => analyze(c),
        Command::Report(c) => report_only(c),
        Command::Oracle { seed, trials, samples } => match run_oracle(*seed, *trials, *samples) {
            Ok(true) => Ok(()),
            Ok(false) => return ExitCode::from(1),
            Err(e) => Err(e),
        },
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
