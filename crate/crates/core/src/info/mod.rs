//! Mutual information terms of the bounds.
//!
//! The mean-estimation pipeline has exact Gaussian expressions for both
//! terms; for the ridge pipeline they are estimated by simulating the
//! learners and running a k-NN estimator on the simulated pairs.

mod estimators;
pub mod kdtree;

pub use estimators::{gaussian_plugin_mi, ksg_mutual_information, Points, FOLDS};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::{sample_dataset, sample_meta_dataset, sample_tasks, Dataset, Task};
use crate::error::{Error, Result};
use crate::gaps::Pipeline;
use crate::learn::{fit_base, fit_meta};
use crate::rng::child;
use crate::stats::Summary;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MiMethod {
    ClosedForm,
    Ksg { k: usize },
    GaussianPlugin,
}

/// A mutual information value in nats.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MIEstimate {
    pub nats: f64,
    pub method: MiMethod,
    pub n_samples: usize,
    pub std_err: f64,
    /// Set when the plug-in estimator had to regularise a near-singular
    /// covariance.
    pub regularized: bool,
}

impl MIEstimate {
    fn closed_form(nats: f64) -> Self {
        MIEstimate {
            nats,
            method: MiMethod::ClosedForm,
            n_samples: 0,
            std_err: 0.0,
            regularized: false,
        }
    }

    /// The estimate with estimator noise below zero removed.
    pub fn clamped_nats(&self) -> f64 {
        self.nats.max(0.0)
    }
}

/// `I(U; S_i | T_{1:N}) = 0.5 ln(N / (N-1))` for the mean pipeline.
pub fn mi_hyper_dataset_closed_form(n_tasks: usize) -> Result<MIEstimate> {
    if n_tasks < 2 {
        return Err(Error::invalid(
            "N",
            "needs N >= 2; with one task U is a function of S_1",
        ));
    }
    let n = n_tasks as f64;
    Ok(MIEstimate::closed_form(0.5 * (n / (n - 1.0)).ln()))
}

/// `I(W; Z_j | T=τ, T_{1:N})` for the mean pipeline.
pub fn mi_model_sample_closed_form(alpha: f64, m: usize, n_tasks: usize) -> Result<MIEstimate> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::invalid("alpha", format!("must lie in [0, 1], got {alpha}")));
    }
    if m == 0 || n_tasks == 0 {
        return Err(Error::invalid("m, N", "must be >= 1"));
    }
    let (m, n) = (m as f64, n_tasks as f64);
    let shrink = (1.0 - alpha).powi(2) / n;
    let num = alpha * alpha + shrink;
    let den = alpha * alpha * (m - 1.0) / m + shrink;
    if den <= 0.0 {
        return Err(Error::invalid(
            "alpha, m",
            "alpha = 1 with m = 1 makes W = Z_1 and the information infinite",
        ));
    }
    Ok(MIEstimate::closed_form(0.5 * (num / den).ln()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MiEstimator {
    Ksg,
    GaussianPlugin,
}

/// Sampling plan for the simulated MI terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MiSampling {
    /// Conditioning draws (task tuples, or meta-test tasks for B).
    pub tuples: usize,
    /// Training-task tuples per meta-test task when assembling B.
    pub tuples_per_test_task: usize,
    /// Simulated pairs per conditioning draw.
    pub samples: usize,
    pub k: usize,
    pub estimator: MiEstimator,
}

impl Default for MiSampling {
    fn default() -> Self {
        MiSampling {
            tuples: 8,
            tuples_per_test_task: 2,
            samples: 10_000,
            k: 5,
            estimator: MiEstimator::Ksg,
        }
    }
}

impl MiSampling {
    pub fn validate(&self) -> Result<()> {
        if self.tuples == 0 || self.tuples_per_test_task == 0 {
            return Err(Error::invalid("mi_trials", "must be >= 1"));
        }
        if self.k == 0 {
            return Err(Error::invalid("k", "must be >= 1"));
        }
        if self.samples <= self.k {
            return Err(Error::invalid("mi_samples", "must exceed k"));
        }
        Ok(())
    }

    fn estimate(&self, xs: &Points, ys: &Points) -> Result<MIEstimate> {
        match self.estimator {
            MiEstimator::Ksg => ksg_mutual_information(xs, ys, self.k),
            MiEstimator::GaussianPlugin => gaussian_plugin_mi(xs, ys),
        }
    }
}

/// How a dataset enters the hyperparameter MI.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetView {
    /// The statistic the meta-learner actually reads (see
    /// [`sufficient_statistic`]).
    SufficientStatistic,
    /// Every sample coordinate, flattened.
    Raw,
}

/// Append the statistic through which the meta-learner depends on `s`.
///
/// Scalar data: the sample mean. Regression data: the upper triangle of
/// `XᵀX` without its last diagonal entry (features have unit norm, so the
/// diagonal sums to `m`), followed by `XᵀY`.
pub fn sufficient_statistic(s: &Dataset, out: &mut Vec<f64>) -> Result<()> {
    match s {
        Dataset::Scalar(_) => out.push(s.mean()?),
        Dataset::Pairs { d, .. } => {
            let (xtx, xty) = s.gram()?;
            for a in 0..*d {
                for b in a..*d {
                    if !(a == b && a == d - 1) {
                        out.push(xtx[(a, b)]);
                    }
                }
            }
            out.extend(xty.iter());
        }
    }
    Ok(())
}

fn raw_view(s: &Dataset, out: &mut Vec<f64>) {
    match s {
        Dataset::Scalar(z) => out.extend_from_slice(z),
        Dataset::Pairs { d, x, y } => {
            for (row, yj) in x.chunks_exact(*d).zip(y) {
                out.extend_from_slice(row);
                out.push(*yj);
            }
        }
    }
}

fn dim_of(values: &[f64], n: usize) -> usize {
    values.len() / n.max(1)
}

/// Average per-tuple estimates into a conditional MI.
fn average_over_tuples(per_tuple: &[MIEstimate]) -> MIEstimate {
    let nats: Vec<f64> = per_tuple.iter().map(|e| e.nats).collect();
    let s = Summary::of(&nats);
    let std_err = if per_tuple.len() > 1 {
        s.std_err
    } else {
        per_tuple[0].std_err
    };
    MIEstimate {
        nats: s.mean,
        method: per_tuple[0].method,
        n_samples: per_tuple.iter().map(|e| e.n_samples).sum(),
        std_err,
        regularized: per_tuple.iter().any(|e| e.regularized),
    }
}

/// Simulated `I(U; S_1 | T_{1:N})`.
///
/// Each conditioning draw fixes a task tuple and simulates `samples`
/// meta-training sets; the per-tuple estimates are averaged. Training sets
/// are exchangeable, so the value for `S_1` stands for every `S_i`.
pub fn mi_hyper_dataset_empirical<R: Rng + ?Sized>(
    p: &Pipeline,
    sampling: &MiSampling,
    rng: &mut R,
) -> Result<MIEstimate> {
    mi_hyper_dataset_empirical_with(p, sampling, DatasetView::SufficientStatistic, rng)
}

/// [`mi_hyper_dataset_empirical`] with an explicit dataset representation.
pub fn mi_hyper_dataset_empirical_with<R: Rng + ?Sized>(
    p: &Pipeline,
    sampling: &MiSampling,
    view: DatasetView,
    rng: &mut R,
) -> Result<MIEstimate> {
    sampling.validate()?;
    let mut per_tuple = Vec::with_capacity(sampling.tuples);
    for _ in 0..sampling.tuples {
        let mut r = child(rng);
        let tasks = sample_tasks(&p.env, p.n_tasks, &mut r);
        let (mut us, mut stats) = (Vec::new(), Vec::new());
        for _ in 0..sampling.samples {
            let meta = sample_meta_dataset(&p.env, &tasks, p.m, &mut r)?;
            let u = fit_meta(&p.meta, &meta, &p.base)?;
            us.extend(u.iter());
            match view {
                DatasetView::SufficientStatistic => {
                    sufficient_statistic(&meta.datasets()[0], &mut stats)?
                }
                DatasetView::Raw => raw_view(&meta.datasets()[0], &mut stats),
            }
        }
        let n = sampling.samples;
        let xs = Points::new(dim_of(&us, n), us)?;
        let ys = Points::new(dim_of(&stats, n), stats)?;
        per_tuple.push(sampling.estimate(&xs, &ys)?);
    }
    Ok(average_over_tuples(&per_tuple))
}

/// Simulated `I(W; Z_1 | T=task, T_{1:N}=tasks_train)` for one fixed
/// conditioning draw. Samples within a dataset are exchangeable, so `Z_1`
/// stands for every `Z_j`.
pub fn mi_model_sample_empirical<R: Rng + ?Sized>(
    p: &Pipeline,
    task: &Task,
    tasks_train: &[Task],
    sampling: &MiSampling,
    rng: &mut R,
) -> Result<MIEstimate> {
    sampling.validate()?;
    let (mut ws, mut zs) = (Vec::new(), Vec::new());
    for _ in 0..sampling.samples {
        let meta = sample_meta_dataset(&p.env, tasks_train, p.m, rng)?;
        let u = fit_meta(&p.meta, &meta, &p.base)?;
        let s = sample_dataset(&p.env, task, p.m, rng)?;
        let w = fit_base(&p.base, &s, &u)?;
        ws.extend(w.iter());
        match s {
            Dataset::Scalar(z) => zs.push(z[0]),
            Dataset::Pairs { d, x, y } => {
                zs.extend_from_slice(&x[..d]);
                zs.push(y[0]);
            }
        }
    }
    let n = sampling.samples;
    let xs = Points::new(dim_of(&ws, n), ws)?;
    let ys = Points::new(dim_of(&zs, n), zs)?;
    sampling.estimate(&xs, &ys)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hyper_closed_form_values() {
        assert!((mi_hyper_dataset_closed_form(2).unwrap().nats - 0.5 * 2f64.ln()).abs() < 1e-15);
        let v = mi_hyper_dataset_closed_form(4).unwrap().nats;
        assert!((v - 0.143_841_036).abs() < 1e-8);
        assert!(mi_hyper_dataset_closed_form(1000).unwrap().nats < 1e-3);
        assert!(mi_hyper_dataset_closed_form(1).is_err());
    }

    #[test]
    fn model_closed_form_values() {
        assert_eq!(mi_model_sample_closed_form(0.0, 6, 4).unwrap().nats, 0.0);
        assert!(mi_model_sample_closed_form(0.5, 10_000, 4).unwrap().nats < 1e-3);
        // 0.5 ln(0.3125 / 0.2708333...)
        let v = mi_model_sample_closed_form(0.5, 6, 4).unwrap().nats;
        assert!((v - 0.5 * (0.3125f64 / (0.25 * 5.0 / 6.0 + 0.0625)).ln()).abs() < 1e-15);
        assert!((v - 0.071_550_2).abs() < 1e-6);
        assert!(mi_model_sample_closed_form(1.0, 1, 4).is_err());
        assert!(mi_model_sample_closed_form(1.2, 6, 4).is_err());
    }

    #[test]
    fn closed_forms_decrease() {
        for n in 2..100 {
            assert!(mi_hyper_dataset_closed_form(n + 1).unwrap().nats < mi_hyper_dataset_closed_form(n).unwrap().nats);
        }
        for m in 2..100 {
            let a = mi_model_sample_closed_form(0.5, m, 4).unwrap().nats;
            let b = mi_model_sample_closed_form(0.5, m + 1, 4).unwrap().nats;
            assert!(b < a);
        }
        for n in 2..100 {
            // more tasks pin down u, so W leans harder on the task's own data
            let a = mi_model_sample_closed_form(0.5, 6, n).unwrap().nats;
            let b = mi_model_sample_closed_form(0.5, 6, n + 1).unwrap().nats;
            assert!(b > a && b < 0.5 * (6.0f64 / 5.0).ln());
        }
    }

    #[test]
    fn regression_statistic_layout() {
        let s = Dataset::Pairs {
            d: 2,
            x: vec![1.0, 0.0, 0.6, 0.8],
            y: vec![2.0, 1.0],
        };
        let mut out = Vec::new();
        sufficient_statistic(&s, &mut out).unwrap();
        // [xx_00, xx_01, xy_0, xy_1]
        assert_eq!(out.len(), 4);
        assert!((out[0] - 1.36).abs() < 1e-12);
        assert!((out[1] - 0.48).abs() < 1e-12);
        assert!((out[2] - 2.6).abs() < 1e-12);
        assert!((out[3] - 0.8).abs() < 1e-12);
    }
}
