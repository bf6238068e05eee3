//! Per-site sufficient statistics: arm means, degrees-of-freedom-corrected
//! within-arm variances and covariances, effect estimators, and their robust
//! variance estimators.
//!
//! Within a site, the variables are stacked as `[y, d, m_1, ..., m_K]`; each
//! arm stores the mean vector and the (n-1)-divisor covariance matrix of that
//! stack, which is everything the downstream estimators consume.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::data::{SiteData, UnitObs};
use crate::error::{Error, Result};

/// Index of the outcome in the per-arm variable stack.
pub const VAR_Y: usize = 0;
/// Index of treatment take-up in the per-arm variable stack.
pub const VAR_D: usize = 1;
/// Index of mediator `k` in the per-arm variable stack.
pub fn var_m(k: usize) -> usize {
    2 + k
}

/// Aggregate LATE is reported only when |FS| exceeds this floor.
pub const FS_FLOOR: f64 = 1e-6;

/// Means and DOF-corrected covariances of `[y, d, m..]` within one arm.
#[derive(Debug, Clone)]
pub struct ArmStats {
    pub n: usize,
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

impl ArmStats {
    fn from_units(units: &[UnitObs], n_mediators: usize) -> Self {
        let n = units.len();
        let p = 2 + n_mediators;
        let mut mean = DVector::zeros(p);
        for u in units {
            mean[VAR_Y] += u.y;
            mean[VAR_D] += u.d;
            for k in 0..n_mediators {
                mean[var_m(k)] += u.m[k];
            }
        }
        mean /= n as f64;

        let mut cov = DMatrix::zeros(p, p);
        if n >= 2 {
            let mut dev = DVector::zeros(p);
            for u in units {
                dev[VAR_Y] = u.y - mean[VAR_Y];
                dev[VAR_D] = u.d - mean[VAR_D];
                for k in 0..n_mediators {
                    dev[var_m(k)] = u.m[k] - mean[var_m(k)];
                }
                cov.syger(1.0, &dev, &dev, 1.0);
            }
            cov /= (n - 1) as f64;
            cov.fill_upper_triangle_with_lower_triangle();
        }
        ArmStats { n, mean, cov }
    }
}

/// All per-site sufficient statistics used by the estimators.
#[derive(Debug, Clone)]
pub struct SiteSummary {
    pub site_id: String,
    pub n_mediators: usize,
    pub focal: ArmStats,
    pub control: ArmStats,
    /// Other treatment arms with at least two units, keyed by arm label.
    pub second: BTreeMap<String, ArmStats>,
    /// Observed site covariates carried through from the dataset.
    pub covariates: Vec<f64>,
}

impl SiteSummary {
    pub fn n_focal(&self) -> usize {
        self.focal.n
    }
    pub fn n_control(&self) -> usize {
        self.control.n
    }
    /// Units in the two-arm analysis sample.
    pub fn n_analysis(&self) -> usize {
        self.focal.n + self.control.n
    }

    pub fn itt_hat(&self) -> f64 {
        self.focal.mean[VAR_Y] - self.control.mean[VAR_Y]
    }
    pub fn fs_hat(&self) -> f64 {
        self.focal.mean[VAR_D] - self.control.mean[VAR_D]
    }
    pub fn itt_m_hat(&self, k: usize) -> f64 {
        self.focal.mean[var_m(k)] - self.control.mean[var_m(k)]
    }
    /// Per-site LATE; undefined when the site first stage is zero.
    pub fn late_hat(&self) -> Option<f64> {
        let fs = self.fs_hat();
        (fs != 0.0).then(|| self.itt_hat() / fs)
    }

    /// `r2_y1/n1 + r2_y0/n0`.
    pub fn v_rob_itt(&self) -> f64 {
        self.v_rob(VAR_Y)
    }
    pub fn v_rob_fs(&self) -> f64 {
        self.v_rob(VAR_D)
    }
    pub fn v_rob_itt_m(&self, k: usize) -> f64 {
        self.v_rob(var_m(k))
    }
    fn v_rob(&self, v: usize) -> f64 {
        self.focal.cov[(v, v)] / self.focal.n as f64
            + self.control.cov[(v, v)] / self.control.n as f64
    }

    /// Second-arm ITT estimator, if the arm is present with two or more units.
    pub fn second_itt_hat(&self, arm: &str) -> Option<f64> {
        self.second
            .get(arm)
            .map(|a| a.mean[VAR_Y] - self.control.mean[VAR_Y])
    }
}

/// Computes the [`SiteSummary`] of one site.
///
/// Requires at least two units in the focal and control arms (sites should
/// already have been through the count filter). Other treatment arms with a
/// single unit are dropped from the summary.
pub fn summarize_site(site: &SiteData) -> Result<SiteSummary> {
    let n_mediators = site
        .focal
        .first()
        .or_else(|| site.control.first())
        .map_or(0, |u| u.m.len());
    for (units, arm) in [(&site.focal, "focal"), (&site.control, "control")] {
        if units.len() < 2 {
            return Err(Error::ArmTooSmall {
                site: site.site_id.clone(),
                arm: arm.to_string(),
                n: units.len(),
            });
        }
    }
    let second = site
        .second
        .iter()
        .filter(|(_, units)| units.len() >= 2)
        .map(|(arm, units)| (arm.clone(), ArmStats::from_units(units, n_mediators)))
        .collect();
    Ok(SiteSummary {
        site_id: site.site_id.clone(),
        n_mediators,
        focal: ArmStats::from_units(&site.focal, n_mediators),
        control: ArmStats::from_units(&site.control, n_mediators),
        second,
        covariates: site.covariates.clone(),
    })
}

/// Summarizes every site, in site-id order.
pub fn summarize_sites(sites: &[SiteData]) -> Result<Vec<SiteSummary>> {
    sites.iter().map(summarize_site).collect()
}

/// Weighted cross-site aggregates of the per-site estimators.
#[derive(Debug, Clone, Serialize)]
pub struct Aggregates {
    pub itt: f64,
    pub fs: f64,
    pub itt_m: Vec<f64>,
    /// `itt / fs`, absent when |fs| is within [`FS_FLOOR`] of zero.
    pub late: Option<f64>,
}

impl Aggregates {
    pub fn late_checked(&self) -> Result<f64> {
        self.late.ok_or(Error::WeakFirstStage {
            value: self.fs,
            floor: FS_FLOOR,
        })
    }
}

/// Weighted means of the per-site estimators, and their ratio for LATE.
pub fn aggregate(summaries: &[SiteSummary], weights: &[f64]) -> Aggregates {
    debug_assert_eq!(summaries.len(), weights.len());
    let n_m = summaries.first().map_or(0, |s| s.n_mediators);
    let mut itt = 0.0;
    let mut fs = 0.0;
    let mut itt_m = vec![0.0; n_m];
    for (s, &w) in summaries.iter().zip(weights) {
        itt += w * s.itt_hat();
        fs += w * s.fs_hat();
        for (k, acc) in itt_m.iter_mut().enumerate() {
            *acc += w * s.itt_m_hat(k);
        }
    }
    let late = (fs.abs() > FS_FLOOR).then(|| itt / fs);
    Aggregates { itt, fs, itt_m, late }
}

/// Aligns a site-id keyed weight map with a slice of summaries.
pub fn align_weights(
    summaries: &[SiteSummary],
    weights: &BTreeMap<String, f64>,
) -> Result<Vec<f64>> {
    summaries
        .iter()
        .map(|s| {
            weights
                .get(&s.site_id)
                .copied()
                .ok_or_else(|| Error::MissingCustomWeight(s.site_id.clone()))
        })
        .collect()
}

/// Variance of `values` with the `1/n` divisor (the influence-function
/// convention used by every standard-error formula in this crate).
pub fn population_variance(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n
}
