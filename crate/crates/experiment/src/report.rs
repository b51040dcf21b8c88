use fgr_core::QualityKind;
use serde::{Deserialize, Serialize};

use crate::error::{ExperimentError, Result};
use crate::runner::SimRecord;
use crate::stats::{median, quantile, spearman_permutation};

/// Fewest valid records a report is computed from.
pub const MIN_RECORDS: usize = 30;

/// Median WC-ATE of the sims at or above the upper redundancy quartile and at
/// or below the lower one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuartileMedians {
    pub top_quartile_wcate: f64,
    pub bottom_quartile_wcate: f64,
    pub top_count: usize,
    pub bottom_count: usize,
}

/// Landmark distances of the sims at or above the 90th redundancy percentile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopDecileDistances {
    pub count: usize,
    /// Fraction of those sims whose two mean distances are both below the
    /// batch medians.
    pub both_below_median_fraction: f64,
    pub top_decile_median_dist: [f64; 2],
    pub batch_median_dist: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerKind<T> {
    pub wb: Option<T>,
    pub wass: Option<T>,
}

/// Rank statistics of a batch. Correlations that are undefined (a constant
/// column) are NaN, serialized as `null`, and listed in `undefined`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub n_records: usize,
    pub n_valid: usize,
    pub spearman_rwass_wcate: f64,
    pub spearman_rwb_wcate: f64,
    /// `R^Wass` against the larger of the two mean landmark distances.
    pub spearman_r_dist: f64,
    pub spearman_rwb_dist: f64,
    pub p_rwass_wcate: f64,
    pub p_rwb_wcate: f64,
    pub p_r_dist: f64,
    pub p_rwb_dist: f64,
    pub permutations: usize,
    pub quartile_medians: PerKind<QuartileMedians>,
    pub top_decile_distances: PerKind<TopDecileDistances>,
    pub undefined: Vec<String>,
    /// Scaling used for the redundancy colours in the distance plot.
    pub normalization: String,
}

fn column(records: &[&SimRecord], f: impl Fn(&SimRecord) -> f64) -> Vec<f64> {
    records.iter().map(|r| f(r)).collect()
}

fn quartiles(r: &[f64], wcate: &[f64]) -> QuartileMedians {
    let (q1, q3) = (quantile(r, 0.25), quantile(r, 0.75));
    let top: Vec<f64> = r.iter().zip(wcate).filter(|(x, _)| **x >= q3).map(|(_, w)| *w).collect();
    let bottom: Vec<f64> = r.iter().zip(wcate).filter(|(x, _)| **x <= q1).map(|(_, w)| *w).collect();
    QuartileMedians {
        top_quartile_wcate: median(&top),
        bottom_quartile_wcate: median(&bottom),
        top_count: top.len(),
        bottom_count: bottom.len(),
    }
}

fn top_decile(r: &[f64], d0: &[f64], d1: &[f64]) -> TopDecileDistances {
    let cut = quantile(r, 0.9);
    let batch = [median(d0), median(d1)];
    let idx: Vec<usize> = (0..r.len()).filter(|&i| r[i] >= cut).collect();
    let below = idx.iter().filter(|&&i| d0[i] < batch[0] && d1[i] < batch[1]).count();
    let pick = |d: &[f64]| idx.iter().map(|&i| d[i]).collect::<Vec<_>>();
    TopDecileDistances {
        count: idx.len(),
        both_below_median_fraction: below as f64 / idx.len().max(1) as f64,
        top_decile_median_dist: [median(&pick(d0)), median(&pick(d1))],
        batch_median_dist: batch,
    }
}

/// Rank correlations of redundancy with WC-ATE and landmark distance over the
/// valid records. Permutation tests are seeded from `seed`.
pub fn correlation_report(records: &[SimRecord], permutations: usize, seed: u64) -> Result<Summary> {
    let valid: Vec<&SimRecord> = records.iter().filter(|r| r.is_valid()).collect();
    if valid.len() < MIN_RECORDS {
        return Err(ExperimentError::TooFewRecords {
            needed: MIN_RECORDS,
            got: valid.len(),
        });
    }
    let wcate = column(&valid, |r| r.wc_ate);
    let d0 = column(&valid, |r| r.mean_dist[0]);
    let d1 = column(&valid, |r| r.mean_dist[1]);
    let dmax: Vec<f64> = d0.iter().zip(&d1).map(|(a, b)| a.max(*b)).collect();

    let mut undefined = vec![];
    let mut corr = |name: &str, r: &[f64], y: &[f64], k: u64| {
        let (rho, p) = if r.iter().all(|v| v.is_finite()) {
            spearman_permutation(r, y, permutations, seed.wrapping_add(k))
        } else {
            (f64::NAN, f64::NAN)
        };
        if rho.is_nan() {
            undefined.push(name.to_string());
        }
        (rho, p)
    };
    let rwb = column(&valid, |r| r.redundancy(QualityKind::Wb));
    let rwass = column(&valid, |r| r.redundancy(QualityKind::Wass));
    let (s_wass_ate, p_wass_ate) = corr("spearman_rwass_wcate", &rwass, &wcate, 1);
    let (s_wb_ate, p_wb_ate) = corr("spearman_rwb_wcate", &rwb, &wcate, 2);
    let (s_wass_d, p_wass_d) = corr("spearman_r_dist", &rwass, &dmax, 3);
    let (s_wb_d, p_wb_d) = corr("spearman_rwb_dist", &rwb, &dmax, 4);

    let finite = |r: &[f64]| r.iter().all(|v| v.is_finite());
    Ok(Summary {
        n_records: records.len(),
        n_valid: valid.len(),
        spearman_rwass_wcate: s_wass_ate,
        spearman_rwb_wcate: s_wb_ate,
        spearman_r_dist: s_wass_d,
        spearman_rwb_dist: s_wb_d,
        p_rwass_wcate: p_wass_ate,
        p_rwb_wcate: p_wb_ate,
        p_r_dist: p_wass_d,
        p_rwb_dist: p_wb_d,
        permutations,
        quartile_medians: PerKind {
            wb: finite(&rwb).then(|| quartiles(&rwb, &wcate)),
            wass: finite(&rwass).then(|| quartiles(&rwass, &wcate)),
        },
        top_decile_distances: PerKind {
            wb: finite(&rwb).then(|| top_decile(&rwb, &d0, &d1)),
            wass: finite(&rwass).then(|| top_decile(&rwass, &d0, &d1)),
        },
        undefined,
        normalization: "z-score per batch".into(),
    })
}
