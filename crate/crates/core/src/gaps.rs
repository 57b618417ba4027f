//! Monte Carlo estimation of meta-generalization gaps.
//!
//! The estimators are nested: an outer level draws task tuples
//! `(T, T_1..T_N)`, an inner level draws meta-training data for the tuple
//! together with a fresh dataset for the meta-test task, and population
//! losses are either exact (mean family) or averaged over test draws. Each
//! level gets its own child stream.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::{sample_dataset, sample_meta_dataset, sample_task, sample_tasks, EnvironmentSpec, MetaDataset, Task};
use crate::error::{Error, Result};
use crate::learn::{
    check_compatible, fit_base, fit_meta, population_loss, training_loss, BaseLearnerSpec,
    Hyperparam, LossSpec, MetaLearnerSpec, ModelParam, PopulationMode,
};
use crate::rng::child;
use crate::stats::Summary;

/// Which gap quantity a [`GapEstimate`] refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GapMetric {
    /// `E_{T,T_{1:N}} |ΔL̄(T, T_{1:N})|`.
    AbsAvg,
    /// `|E_{T,T_{1:N}} ΔL̄(T, T_{1:N})|`.
    AvgAbs,
    /// `ΔL̄(T, T_{1:N})` for one task tuple.
    PerTask,
    WithinTask,
    EnvLevel,
    /// Total gap of a decomposition, on the same draws as its parts.
    Total,
    /// Meta-population loss `L_g(u|τ)` (not a gap).
    MetaPopulationLoss,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapEstimate {
    pub mean: f64,
    pub std_err: f64,
    pub trials: usize,
    pub metric: GapMetric,
}

impl GapEstimate {
    fn from_summary(s: Summary, metric: GapMetric) -> Self {
        GapEstimate {
            mean: s.mean,
            std_err: s.std_err,
            trials: s.n,
            metric,
        }
    }
}

/// Monte Carlo budget for the nested estimators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MCBudget {
    /// Task tuples `(T, T_{1:N})`.
    pub outer_trials: usize,
    /// Meta-datasets per tuple.
    pub inner_trials: usize,
    /// Test draws per Monte Carlo population loss.
    pub test_samples: usize,
    pub seed: u64,
}

impl Default for MCBudget {
    fn default() -> Self {
        MCBudget {
            outer_trials: 2000,
            inner_trials: 50,
            test_samples: 2000,
            seed: 1,
        }
    }
}

impl MCBudget {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("outer_trials", self.outer_trials),
            ("inner_trials", self.inner_trials),
            ("test_samples", self.test_samples),
        ] {
            if v == 0 {
                return Err(Error::invalid(name, "must be >= 1"));
            }
        }
        Ok(())
    }
}

/// A complete meta-learning setup: environment, learners, loss and the
/// sizes `N` (tasks) and `m` (samples per task).
#[derive(Debug, Clone, PartialEq)]
pub struct Pipeline {
    pub env: EnvironmentSpec,
    pub base: BaseLearnerSpec,
    pub meta: MetaLearnerSpec,
    pub loss: LossSpec,
    pub n_tasks: usize,
    pub m: usize,
}

impl Pipeline {
    pub fn new(
        env: EnvironmentSpec,
        base: BaseLearnerSpec,
        meta: MetaLearnerSpec,
        loss: LossSpec,
        n_tasks: usize,
        m: usize,
    ) -> Result<Self> {
        let p = Pipeline {
            env,
            base,
            meta,
            loss,
            n_tasks,
            m,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        self.env.validate()?;
        self.loss.validate()?;
        check_compatible(&self.env, &self.base, &self.meta)?;
        if self.n_tasks == 0 {
            return Err(Error::invalid("N", "must be >= 1"));
        }
        if self.m == 0 {
            return Err(Error::invalid("m", "must be >= 1"));
        }
        Ok(())
    }

    /// Same pipeline in a different environment (used by sweeps).
    pub fn with_env(&self, env: EnvironmentSpec) -> Self {
        Pipeline {
            env,
            ..self.clone()
        }
    }

    /// Population loss routed through the exact formula when the
    /// environment admits one.
    pub fn population_loss<R: Rng + ?Sized>(
        &self,
        w: &ModelParam,
        task: &Task,
        test_samples: usize,
        rng: &mut R,
    ) -> Result<f64> {
        let mode = if self.env.is_regression() {
            PopulationMode::MonteCarlo
        } else {
            PopulationMode::ClosedForm1D
        };
        population_loss(w, task, &self.env, &self.loss, mode, test_samples, rng)
    }
}

/// Meta-training loss `(1/N) Σ_i L_t(fit_base(S_i, u) | S_i)`.
pub fn meta_training_loss(
    u: &Hyperparam,
    meta: &MetaDataset,
    base: &BaseLearnerSpec,
    loss: &LossSpec,
) -> Result<f64> {
    let mut total = 0.0;
    for s in meta.datasets() {
        let w = fit_base(base, s, u)?;
        total += training_loss(&w, s, loss)?;
    }
    Ok(total / meta.len() as f64)
}

/// Meta-population loss `L_g(u|τ)`: the population loss of the model fitted
/// on a fresh dataset of the task, averaged over `inner_trials` datasets.
pub fn meta_population_loss<R: Rng + ?Sized>(
    p: &Pipeline,
    u: &Hyperparam,
    task: &Task,
    budget: &MCBudget,
    rng: &mut R,
) -> Result<GapEstimate> {
    budget.validate()?;
    let mut values = Vec::with_capacity(budget.inner_trials);
    for _ in 0..budget.inner_trials {
        let mut r = child(rng);
        let s = sample_dataset(&p.env, task, p.m, &mut r)?;
        let w = fit_base(&p.base, &s, u)?;
        values.push(p.population_loss(&w, task, budget.test_samples, &mut r)?);
    }
    Ok(GapEstimate::from_summary(
        Summary::of(&values),
        GapMetric::MetaPopulationLoss,
    ))
}

/// The three losses of one inner draw.
#[derive(Debug, Clone, Copy)]
struct TrialLosses {
    /// Population loss of the meta-test model, an unbiased draw of `L_g(u|τ)`.
    population: f64,
    /// Its training loss on its own dataset, a draw of `L_{g,t}(u|τ)`.
    test_training: f64,
    /// Meta-training loss `L_t(u|S_{1:N})`.
    meta_training: f64,
}

fn gap_trial<R: Rng + ?Sized>(
    p: &Pipeline,
    fixed_u: Option<&Hyperparam>,
    task: &Task,
    tasks_train: &[Task],
    test_samples: usize,
    rng: &mut R,
) -> Result<TrialLosses> {
    let meta = sample_meta_dataset(&p.env, tasks_train, p.m, rng)?;
    let learned;
    let u = match fixed_u {
        Some(u) => u,
        None => {
            learned = fit_meta(&p.meta, &meta, &p.base)?;
            &learned
        }
    };
    let s = sample_dataset(&p.env, task, p.m, rng)?;
    let w = fit_base(&p.base, &s, u)?;
    Ok(TrialLosses {
        population: p.population_loss(&w, task, test_samples, rng)?,
        test_training: training_loss(&w, &s, &p.loss)?,
        meta_training: meta_training_loss(u, &meta, &p.base, &p.loss)?,
    })
}

fn check_tuple(p: &Pipeline, tasks_train: &[Task]) -> Result<()> {
    if tasks_train.len() != p.n_tasks {
        return Err(Error::invalid(
            "tasks_train",
            format!("expected {} tasks, got {}", p.n_tasks, tasks_train.len()),
        ));
    }
    Ok(())
}

/// `ΔL̄(T, T_{1:N})`: meta-generalization gap for a fixed tuple, averaged
/// over meta-training data and the learned hyperparameter.
pub fn per_task_gap<R: Rng + ?Sized>(
    p: &Pipeline,
    task: &Task,
    tasks_train: &[Task],
    budget: &MCBudget,
    rng: &mut R,
) -> Result<GapEstimate> {
    budget.validate()?;
    check_tuple(p, tasks_train)?;
    let mut values = Vec::with_capacity(budget.inner_trials);
    for _ in 0..budget.inner_trials {
        let t = gap_trial(p, None, task, tasks_train, budget.test_samples, &mut child(rng))?;
        values.push(t.population - t.meta_training);
    }
    Ok(GapEstimate::from_summary(Summary::of(&values), GapMetric::PerTask))
}

/// Both averaged gap metrics from one set of task tuples, so they are
/// paired by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct GapMetrics {
    pub abs_avg: GapEstimate,
    pub avg_abs: GapEstimate,
    /// Per-tuple gap means, in draw order.
    pub per_tuple: Vec<f64>,
}

/// Estimate `|ΔL̄|^avg` and `|ΔL̄^avg|` together.
pub fn gap_metrics<R: Rng + ?Sized>(
    p: &Pipeline,
    budget: &MCBudget,
    rng: &mut R,
) -> Result<GapMetrics> {
    budget.validate()?;
    let mut per_tuple = Vec::with_capacity(budget.outer_trials);
    for _ in 0..budget.outer_trials {
        let mut r = child(rng);
        let task = sample_task(&p.env, &mut r);
        let tasks_train = sample_tasks(&p.env, p.n_tasks, &mut r);
        per_tuple.push(per_task_gap(p, &task, &tasks_train, budget, &mut r)?.mean);
    }
    let abs: Vec<f64> = per_tuple.iter().map(|g| g.abs()).collect();
    let signed = Summary::of(&per_tuple);
    Ok(GapMetrics {
        abs_avg: GapEstimate::from_summary(Summary::of(&abs), GapMetric::AbsAvg),
        avg_abs: GapEstimate {
            mean: signed.mean.abs(),
            std_err: signed.std_err,
            trials: signed.n,
            metric: GapMetric::AvgAbs,
        },
        per_tuple,
    })
}

/// `|ΔL̄|^avg`: absolute value inside the average over task tuples.
pub fn abs_avg_gap<R: Rng + ?Sized>(p: &Pipeline, budget: &MCBudget, rng: &mut R) -> Result<GapEstimate> {
    Ok(gap_metrics(p, budget, rng)?.abs_avg)
}

/// `|ΔL̄^avg|`: absolute value of the fully averaged gap.
pub fn avg_abs_gap<R: Rng + ?Sized>(p: &Pipeline, budget: &MCBudget, rng: &mut R) -> Result<GapEstimate> {
    Ok(gap_metrics(p, budget, rng)?.avg_abs)
}

/// Within-task / environment-level split of the gap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapDecomposition {
    /// `L_g(u|τ) - L_{g,t}(u|τ)`.
    pub within: GapEstimate,
    /// `L_{g,t}(u|τ) - L_t(u|S_{1:N})`.
    pub env_level: GapEstimate,
    /// `L_g(u|τ) - L_t(u|S_{1:N})`, on the same draws.
    pub total: GapEstimate,
}

/// Decompose the gap for a fixed tuple. With `u = Some(..)` the bias is held
/// fixed; with `None` it is re-learned from each meta-training draw.
pub fn gap_decomposition<R: Rng + ?Sized>(
    p: &Pipeline,
    u: Option<&Hyperparam>,
    task: &Task,
    tasks_train: &[Task],
    budget: &MCBudget,
    rng: &mut R,
) -> Result<GapDecomposition> {
    budget.validate()?;
    check_tuple(p, tasks_train)?;
    let n = budget.inner_trials;
    let (mut within, mut env_level, mut total) =
        (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    for _ in 0..n {
        let t = gap_trial(p, u, task, tasks_train, budget.test_samples, &mut child(rng))?;
        within.push(t.population - t.test_training);
        env_level.push(t.test_training - t.meta_training);
        total.push(t.population - t.meta_training);
    }
    Ok(GapDecomposition {
        within: GapEstimate::from_summary(Summary::of(&within), GapMetric::WithinTask),
        env_level: GapEstimate::from_summary(Summary::of(&env_level), GapMetric::EnvLevel),
        total: GapEstimate::from_summary(Summary::of(&total), GapMetric::Total),
    })
}
