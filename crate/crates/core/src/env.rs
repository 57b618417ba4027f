//! Task environments: task and dataset sampling, divergences between
//! per-task dataset distributions, and task-relatedness estimates.
//!
//! Two environment families are supported. In the Gaussian-mean family a task
//! is a mean `τ ~ N(μ̄, ν̄²)` and samples are `z ~ N(τ, ν²)`. In the
//! linear-regression family a task is a weight vector `w̄ ~ N(μ_w, ν̄² I_d)`,
//! features are uniform on the unit sphere in `R^d` and `y | x ~ N(w̄ᵀx, ν²)`.

use std::f64::consts::LN_2;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{softplus, Summary};

/// Largest feature dimension accepted.
pub const MAX_DIM: usize = 16;

/// A task environment: the task distribution plus the per-task data family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EnvironmentSpec {
    GaussianMean {
        mu_bar: f64,
        nu_bar_sq: f64,
        nu_sq: f64,
    },
    LinearRegression {
        mu_w: Vec<f64>,
        nu_bar_sq: f64,
        nu_sq: f64,
    },
}

impl EnvironmentSpec {
    pub fn gaussian_mean(mu_bar: f64, nu_bar_sq: f64, nu_sq: f64) -> Result<Self> {
        let env = EnvironmentSpec::GaussianMean {
            mu_bar,
            nu_bar_sq,
            nu_sq,
        };
        env.validate()?;
        Ok(env)
    }

    pub fn linear_regression(mu_w: Vec<f64>, nu_bar_sq: f64, nu_sq: f64) -> Result<Self> {
        let env = EnvironmentSpec::LinearRegression {
            mu_w,
            nu_bar_sq,
            nu_sq,
        };
        env.validate()?;
        Ok(env)
    }

    pub fn validate(&self) -> Result<()> {
        let (nu_bar_sq, nu_sq) = (self.nu_bar_sq(), self.nu_sq());
        if !(nu_sq > 0.0 && nu_sq.is_finite()) {
            return Err(Error::invalid("nu_sq", format!("must be > 0, got {nu_sq}")));
        }
        if !(nu_bar_sq >= 0.0 && nu_bar_sq.is_finite()) {
            return Err(Error::invalid(
                "nu_bar_sq",
                format!("must be >= 0, got {nu_bar_sq}"),
            ));
        }
        match self {
            EnvironmentSpec::GaussianMean { mu_bar, .. } if !mu_bar.is_finite() => {
                Err(Error::invalid("mu_bar", "must be finite"))
            }
            EnvironmentSpec::LinearRegression { mu_w, .. } => {
                if mu_w.is_empty() || mu_w.len() > MAX_DIM {
                    return Err(Error::invalid(
                        "mu_w",
                        format!("dimension must be in 1..={MAX_DIM}, got {}", mu_w.len()),
                    ));
                }
                if mu_w.iter().any(|v| !v.is_finite()) {
                    return Err(Error::invalid("mu_w", "entries must be finite"));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Task variance ν̄².
    pub fn nu_bar_sq(&self) -> f64 {
        match self {
            EnvironmentSpec::GaussianMean { nu_bar_sq, .. }
            | EnvironmentSpec::LinearRegression { nu_bar_sq, .. } => *nu_bar_sq,
        }
    }

    /// Per-task noise variance ν².
    pub fn nu_sq(&self) -> f64 {
        match self {
            EnvironmentSpec::GaussianMean { nu_sq, .. }
            | EnvironmentSpec::LinearRegression { nu_sq, .. } => *nu_sq,
        }
    }

    /// Copy of this environment with a different task variance.
    pub fn with_nu_bar_sq(&self, value: f64) -> Self {
        let mut env = self.clone();
        match &mut env {
            EnvironmentSpec::GaussianMean { nu_bar_sq, .. }
            | EnvironmentSpec::LinearRegression { nu_bar_sq, .. } => *nu_bar_sq = value,
        }
        env
    }

    /// Model-parameter dimension: 1 for the mean family, `d` for regression.
    pub fn dim(&self) -> usize {
        match self {
            EnvironmentSpec::GaussianMean { .. } => 1,
            EnvironmentSpec::LinearRegression { mu_w, .. } => mu_w.len(),
        }
    }

    pub fn is_regression(&self) -> bool {
        matches!(self, EnvironmentSpec::LinearRegression { .. })
    }
}

/// A task drawn from an environment.
#[derive(Debug, Clone, PartialEq)]
pub enum Task {
    Mean { tau: f64 },
    Weights { w_bar: Vec<f64> },
}

/// One data sample, borrowed from a [`Dataset`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Sample<'a> {
    Scalar(f64),
    Pair { x: &'a [f64], y: f64 },
}

/// A per-task sample set. Stored column-wise so a dataset can never mix
/// sample variants; features are row-major `m × d`.
#[derive(Debug, Clone, PartialEq)]
pub enum Dataset {
    Scalar(Vec<f64>),
    Pairs { d: usize, x: Vec<f64>, y: Vec<f64> },
}

impl Dataset {
    pub fn len(&self) -> usize {
        match self {
            Dataset::Scalar(z) => z.len(),
            Dataset::Pairs { y, .. } => y.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn sample(&self, j: usize) -> Sample<'_> {
        match self {
            Dataset::Scalar(z) => Sample::Scalar(z[j]),
            Dataset::Pairs { d, x, y } => Sample::Pair {
                x: &x[j * d..(j + 1) * d],
                y: y[j],
            },
        }
    }

    pub fn samples(&self) -> impl Iterator<Item = Sample<'_>> + '_ {
        (0..self.len()).map(move |j| self.sample(j))
    }

    /// Sample average S̃ of a scalar dataset.
    pub fn mean(&self) -> Result<f64> {
        match self {
            Dataset::Scalar(z) if !z.is_empty() => Ok(z.iter().sum::<f64>() / z.len() as f64),
            Dataset::Scalar(_) => Err(Error::invalid("dataset", "empty")),
            Dataset::Pairs { .. } => Err(Error::VariantMismatch(
                "sample mean requires a scalar dataset".into(),
            )),
        }
    }

    /// `XᵀX` and `XᵀY` for a regression dataset.
    pub fn gram(&self) -> Result<(DMatrix<f64>, DVector<f64>)> {
        match self {
            Dataset::Pairs { d, x, y } => {
                let d = *d;
                let mut xtx = DMatrix::zeros(d, d);
                let mut xty = DVector::zeros(d);
                for (row, &yj) in x.chunks_exact(d).zip(y) {
                    for a in 0..d {
                        xty[a] += row[a] * yj;
                        for b in 0..d {
                            xtx[(a, b)] += row[a] * row[b];
                        }
                    }
                }
                Ok((xtx, xty))
            }
            Dataset::Scalar(_) => Err(Error::VariantMismatch(
                "gram matrix requires a regression dataset".into(),
            )),
        }
    }

    /// Feature dimension of the samples (1 for scalar data).
    pub fn dim(&self) -> usize {
        match self {
            Dataset::Scalar(_) => 1,
            Dataset::Pairs { d, .. } => *d,
        }
    }
}

/// Meta-training data: `N` tasks and their datasets, aligned by index.
#[derive(Debug, Clone, PartialEq)]
pub struct MetaDataset {
    tasks: Vec<Task>,
    datasets: Vec<Dataset>,
}

impl MetaDataset {
    pub fn new(tasks: Vec<Task>, datasets: Vec<Dataset>) -> Result<Self> {
        if tasks.len() != datasets.len() {
            return Err(Error::invalid(
                "meta-dataset",
                format!("{} tasks but {} datasets", tasks.len(), datasets.len()),
            ));
        }
        if datasets.is_empty() {
            return Err(Error::invalid("meta-dataset", "no datasets"));
        }
        let m = datasets[0].len();
        if datasets.iter().any(|s| s.len() != m) {
            return Err(Error::invalid("meta-dataset", "datasets differ in size"));
        }
        Ok(MetaDataset { tasks, datasets })
    }

    pub fn tasks(&self) -> &[Task] {
        &self.tasks
    }

    pub fn datasets(&self) -> &[Dataset] {
        &self.datasets
    }

    /// Number of tasks `N`.
    pub fn len(&self) -> usize {
        self.datasets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.datasets.is_empty()
    }

    /// Per-task sample count `m`.
    pub fn samples_per_task(&self) -> usize {
        self.datasets[0].len()
    }
}

/// How a relatedness value was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RelatednessMethod {
    ClosedForm,
    MonteCarlo,
}

/// Task relatedness of an environment at a given per-task sample size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelatednessReport {
    pub epsilon_kl: f64,
    pub epsilon_js: f64,
    pub method: RelatednessMethod,
    pub std_err: f64,
}

/// Estimation route for the JS relatedness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JsMode {
    /// `min{log 2, ε_KL / 2}` from the KL relatedness.
    Lemma1,
    /// Nested sampling with exact log-density ratios.
    MonteCarlo,
}

/// Draw a task `T ~ P_T`.
pub fn sample_task<R: Rng + ?Sized>(env: &EnvironmentSpec, rng: &mut R) -> Task {
    match env {
        EnvironmentSpec::GaussianMean {
            mu_bar, nu_bar_sq, ..
        } => {
            let z: f64 = rng.sample(StandardNormal);
            Task::Mean {
                tau: mu_bar + nu_bar_sq.sqrt() * z,
            }
        }
        EnvironmentSpec::LinearRegression { mu_w, nu_bar_sq, .. } => {
            let sd = nu_bar_sq.sqrt();
            let w_bar = mu_w
                .iter()
                .map(|mu| {
                    let z: f64 = rng.sample(StandardNormal);
                    mu + sd * z
                })
                .collect();
            Task::Weights { w_bar }
        }
    }
}

/// Draw `n` independent tasks.
pub fn sample_tasks<R: Rng + ?Sized>(env: &EnvironmentSpec, n: usize, rng: &mut R) -> Vec<Task> {
    (0..n).map(|_| sample_task(env, rng)).collect()
}

/// Fill `out` with a point drawn uniformly from the unit sphere.
pub fn sample_unit_vector<R: Rng + ?Sized>(rng: &mut R, out: &mut [f64]) {
    loop {
        let mut norm_sq = 0.0;
        for v in out.iter_mut() {
            *v = rng.sample(StandardNormal);
            norm_sq += *v * *v;
        }
        if norm_sq > 1e-300 {
            let inv = norm_sq.sqrt().recip();
            out.iter_mut().for_each(|v| *v *= inv);
            return;
        }
    }
}

fn check_task(env: &EnvironmentSpec, task: &Task) -> Result<()> {
    match (env, task) {
        (EnvironmentSpec::GaussianMean { .. }, Task::Mean { .. }) => Ok(()),
        (EnvironmentSpec::LinearRegression { mu_w, .. }, Task::Weights { w_bar }) => {
            if w_bar.len() == mu_w.len() {
                Ok(())
            } else {
                Err(Error::DimensionMismatch {
                    expected: mu_w.len(),
                    actual: w_bar.len(),
                })
            }
        }
        _ => Err(Error::VariantMismatch(
            "task variant does not match the environment".into(),
        )),
    }
}

/// Draw a dataset `S ~ P_{Z|T=task}^{⊗m}`.
pub fn sample_dataset<R: Rng + ?Sized>(
    env: &EnvironmentSpec,
    task: &Task,
    m: usize,
    rng: &mut R,
) -> Result<Dataset> {
    check_task(env, task)?;
    if m == 0 {
        return Err(Error::invalid("m", "must be >= 1"));
    }
    let nu = env.nu_sq().sqrt();
    Ok(match task {
        Task::Mean { tau } => Dataset::Scalar(
            (0..m)
                .map(|_| {
                    let e: f64 = rng.sample(StandardNormal);
                    tau + nu * e
                })
                .collect(),
        ),
        Task::Weights { w_bar } => {
            let d = w_bar.len();
            let mut x = vec![0.0; m * d];
            let mut y = Vec::with_capacity(m);
            for row in x.chunks_exact_mut(d) {
                sample_unit_vector(rng, row);
                let e: f64 = rng.sample(StandardNormal);
                let mean: f64 = row.iter().zip(w_bar).map(|(a, b)| a * b).sum();
                y.push(mean + nu * e);
            }
            Dataset::Pairs { d, x, y }
        }
    })
}

/// Draw one dataset per task.
pub fn sample_meta_dataset<R: Rng + ?Sized>(
    env: &EnvironmentSpec,
    tasks: &[Task],
    m: usize,
    rng: &mut R,
) -> Result<MetaDataset> {
    let datasets = tasks
        .iter()
        .map(|t| sample_dataset(env, t, m, rng))
        .collect::<Result<Vec<_>>>()?;
    MetaDataset::new(tasks.to_vec(), datasets)
}

/// `KL(P_{S|T=τ} ‖ P_{S|T=τ'})` for datasets of `m` samples.
///
/// For regression the feature marginal is shared, so only the conditional
/// term survives: `m (w̄-w̄')ᵀ E[XXᵀ] (w̄-w̄') / (2ν²)` with `E[XXᵀ] = I/d`.
pub fn kl_dataset_distributions(
    env: &EnvironmentSpec,
    tau: &Task,
    tau_prime: &Task,
    m: usize,
) -> Result<f64> {
    check_task(env, tau)?;
    check_task(env, tau_prime)?;
    let nu_sq = env.nu_sq();
    let per_sample = match (tau, tau_prime) {
        (Task::Mean { tau: a }, Task::Mean { tau: b }) => (a - b) * (a - b) / (2.0 * nu_sq),
        (Task::Weights { w_bar: a }, Task::Weights { w_bar: b }) => {
            let d = a.len() as f64;
            let sq: f64 = a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum();
            sq / d / (2.0 * nu_sq)
        }
        _ => unreachable!("variants checked above"),
    };
    Ok(m as f64 * per_sample)
}

/// Minimal ε of the expectation-form KL relatedness: `m ν̄² / ν²`.
pub fn epsilon_kl(env: &EnvironmentSpec, m: usize) -> f64 {
    m as f64 * env.nu_bar_sq() / env.nu_sq()
}

/// Monte Carlo average of [`kl_dataset_distributions`] over independent
/// task pairs.
pub fn expected_kl_monte_carlo<R: Rng + ?Sized>(
    env: &EnvironmentSpec,
    m: usize,
    pairs: usize,
    rng: &mut R,
) -> Result<Summary> {
    if pairs == 0 {
        return Err(Error::invalid("pairs", "must be >= 1"));
    }
    let mut values = Vec::with_capacity(pairs);
    for _ in 0..pairs {
        let t = sample_task(env, rng);
        let t_prime = sample_task(env, rng);
        values.push(kl_dataset_distributions(env, &t, &t_prime, m)?);
    }
    Ok(Summary::of(&values))
}

/// `log p(S | p_task) - log p(S | q_task)`. The feature density is common to
/// both tasks and cancels.
pub fn log_density_ratio(
    env: &EnvironmentSpec,
    p_task: &Task,
    q_task: &Task,
    dataset: &Dataset,
) -> Result<f64> {
    check_task(env, p_task)?;
    check_task(env, q_task)?;
    let two_nu_sq = 2.0 * env.nu_sq();
    let ratio = match (p_task, q_task, dataset) {
        (Task::Mean { tau: p }, Task::Mean { tau: q }, Dataset::Scalar(z)) => z
            .iter()
            .map(|&zj| ((zj - q) * (zj - q) - (zj - p) * (zj - p)) / two_nu_sq)
            .sum(),
        (Task::Weights { w_bar: p }, Task::Weights { w_bar: q }, Dataset::Pairs { d, x, y }) => {
            if *d != p.len() {
                return Err(Error::DimensionMismatch {
                    expected: p.len(),
                    actual: *d,
                });
            }
            x.chunks_exact(*d)
                .zip(y)
                .map(|(row, &yj)| {
                    let rp = yj - dot(row, p);
                    let rq = yj - dot(row, q);
                    (rq * rq - rp * rp) / two_nu_sq
                })
                .sum()
        }
        _ => {
            return Err(Error::VariantMismatch(
                "dataset variant does not match the tasks".into(),
            ))
        }
    };
    Ok(ratio)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| u * v).sum()
}

/// One nested draw for the mixture divergences: tasks `T, T'`, then
/// `S ~ P_{S|T}` and `S' ~ P_{S|T'}`. Returns the integrands
/// `log(2p/(p+q))` at `S` and `log(2q/(p+q))` at `S'`, whose expectations are
/// `KL(P_{S|T} ‖ M)` and `KL(P_{S|T'} ‖ M)` for the mixture `M = (p+q)/2`.
fn mixture_draw<R: Rng + ?Sized>(
    env: &EnvironmentSpec,
    m: usize,
    rng: &mut R,
) -> Result<(f64, f64)> {
    let t = sample_task(env, rng);
    let t_prime = sample_task(env, rng);
    let s = sample_dataset(env, &t, m, rng)?;
    let s_prime = sample_dataset(env, &t_prime, m, rng)?;
    let r = log_density_ratio(env, &t, &t_prime, &s)?;
    let r_prime = log_density_ratio(env, &t_prime, &t, &s_prime)?;
    Ok((LN_2 - softplus(-r), LN_2 - softplus(-r_prime)))
}

/// Task relatedness: the closed-form KL value together with a JS value from
/// the containment bound `min(ε_KL/2, log 2)` or nested Monte Carlo.
pub fn epsilon_js<R: Rng + ?Sized>(
    env: &EnvironmentSpec,
    m: usize,
    mode: JsMode,
    trials: usize,
    rng: &mut R,
) -> Result<RelatednessReport> {
    let eps_kl = epsilon_kl(env, m);
    match mode {
        JsMode::Lemma1 => Ok(RelatednessReport {
            epsilon_kl: eps_kl,
            epsilon_js: LN_2.min(eps_kl / 2.0),
            method: RelatednessMethod::ClosedForm,
            std_err: 0.0,
        }),
        JsMode::MonteCarlo => {
            if trials == 0 {
                return Err(Error::invalid("trials", "must be >= 1"));
            }
            let mut values = Vec::with_capacity(trials);
            for _ in 0..trials {
                let (a, b) = mixture_draw(env, m, rng)?;
                values.push(0.5 * (a + b));
            }
            let s = Summary::of(&values);
            Ok(RelatednessReport {
                epsilon_kl: eps_kl,
                epsilon_js: s.mean.clamp(0.0, LN_2),
                method: RelatednessMethod::MonteCarlo,
                std_err: s.std_err,
            })
        }
    }
}

/// Expected KL divergences from each of two tasks' dataset distributions to
/// their equal-weight mixture.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixtureKl {
    /// `E[KL(P_{S|T} ‖ M)]`, meta-test side.
    pub test: Summary,
    /// `E[KL(P_{S|T_i} ‖ M)]`, meta-training side.
    pub train: Summary,
}

/// Monte Carlo estimate of the two mixture divergences. Their sum is twice
/// the expected JS divergence.
pub fn mixture_kl_terms<R: Rng + ?Sized>(
    env: &EnvironmentSpec,
    m: usize,
    trials: usize,
    rng: &mut R,
) -> Result<MixtureKl> {
    if trials == 0 {
        return Err(Error::invalid("trials", "must be >= 1"));
    }
    let mut test = Vec::with_capacity(trials);
    let mut train = Vec::with_capacity(trials);
    for _ in 0..trials {
        let (a, b) = mixture_draw(env, m, rng)?;
        test.push(a);
        train.push(b);
    }
    Ok(MixtureKl {
        test: Summary::of(&test),
        train: Summary::of(&train),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    fn fig2_env(nu_bar_sq: f64) -> EnvironmentSpec {
        EnvironmentSpec::linear_regression(vec![2.0, 3.0], nu_bar_sq, 1.1).unwrap()
    }

    #[test]
    fn rejects_degenerate_variances() {
        assert!(EnvironmentSpec::gaussian_mean(0.0, 1.0, 0.0).is_err());
        assert!(EnvironmentSpec::gaussian_mean(0.0, -0.1, 1.0).is_err());
        assert!(EnvironmentSpec::linear_regression(vec![], 0.1, 1.0).is_err());
        assert!(EnvironmentSpec::linear_regression(vec![0.0; 17], 0.1, 1.0).is_err());
        let e = EnvironmentSpec::gaussian_mean(0.0, 1.0, -1.0).unwrap_err();
        assert!(e.is_validation());
    }

    #[test]
    fn zero_task_variance_is_deterministic() {
        let mut rng = stream(1);
        let env = EnvironmentSpec::gaussian_mean(0.0, 0.0, 1.0).unwrap();
        for _ in 0..10 {
            assert_eq!(sample_task(&env, &mut rng), Task::Mean { tau: 0.0 });
        }
        let env = fig2_env(0.0);
        for _ in 0..10 {
            assert_eq!(
                sample_task(&env, &mut rng),
                Task::Weights {
                    w_bar: vec![2.0, 3.0]
                }
            );
        }
    }

    #[test]
    fn task_moments_match_distribution() {
        let mut rng = stream(2);
        let env = EnvironmentSpec::gaussian_mean(0.0, 1.0, 1.0).unwrap();
        let n = 100_000;
        let taus: Vec<f64> = (0..n)
            .map(|_| match sample_task(&env, &mut rng) {
                Task::Mean { tau } => tau,
                _ => unreachable!(),
            })
            .collect();
        let mean = taus.iter().sum::<f64>() / n as f64;
        let var = taus.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!(mean.abs() < 3.0 * (1e-5f64).sqrt(), "mean {mean}");
        assert!((var - 1.0).abs() < 0.05, "var {var}");
    }

    #[test]
    fn near_degenerate_noise_concentrates_samples() {
        let mut rng = stream(3);
        let env = EnvironmentSpec::gaussian_mean(0.0, 0.0, 1e-12).unwrap();
        let s = sample_dataset(&env, &Task::Mean { tau: 5.0 }, 50, &mut rng).unwrap();
        for z in s.samples() {
            let Sample::Scalar(z) = z else { panic!() };
            assert!((z - 5.0).abs() < 1e-4);
        }
    }

    #[test]
    fn regression_features_are_unit_norm() {
        let mut rng = stream(4);
        for d in [1, 2, 3, 7] {
            let env = EnvironmentSpec::linear_regression(vec![0.5; d], 0.3, 1.0).unwrap();
            let t = sample_task(&env, &mut rng);
            let s = sample_dataset(&env, &t, 20, &mut rng).unwrap();
            for z in s.samples() {
                let Sample::Pair { x, .. } = z else { panic!() };
                let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                assert!((norm - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn pooled_sample_variance_matches_noise() {
        let mut rng = stream(5);
        let env = EnvironmentSpec::gaussian_mean(0.0, 0.0, 1.1).unwrap();
        let task = Task::Mean { tau: 0.0 };
        let (mut ss, mut dof) = (0.0, 0usize);
        for _ in 0..100_000 {
            let s = sample_dataset(&env, &task, 6, &mut rng).unwrap();
            let mean = s.mean().unwrap();
            let Dataset::Scalar(z) = &s else { panic!() };
            ss += z.iter().map(|v| (v - mean).powi(2)).sum::<f64>();
            dof += 5;
        }
        let pooled = ss / dof as f64;
        assert!((pooled - 1.1).abs() < 0.02 * 1.1, "pooled {pooled}");
    }

    #[test]
    fn variant_mismatch_is_rejected() {
        let mut rng = stream(6);
        let env = fig2_env(0.1);
        let err = sample_dataset(&env, &Task::Mean { tau: 0.0 }, 3, &mut rng).unwrap_err();
        assert!(matches!(err, Error::VariantMismatch(_)));
        let err = kl_dataset_distributions(
            &env,
            &Task::Weights { w_bar: vec![1.0] },
            &Task::Weights {
                w_bar: vec![1.0, 2.0],
            },
            1,
        )
        .unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { .. }));
    }

    #[test]
    fn kl_closed_form_values() {
        let env = EnvironmentSpec::gaussian_mean(0.0, 0.5, 1.1).unwrap();
        let a = Task::Mean { tau: 0.0 };
        let b = Task::Mean { tau: 1.0 };
        assert_eq!(kl_dataset_distributions(&env, &a, &a, 6).unwrap(), 0.0);
        let kl = kl_dataset_distributions(&env, &a, &b, 6).unwrap();
        assert!((kl - 6.0 / 2.2).abs() < 1e-12);

        let env = EnvironmentSpec::linear_regression(vec![0.0, 0.0], 0.5, 1.0).unwrap();
        let a = Task::Weights {
            w_bar: vec![2.0, 0.0],
        };
        let b = Task::Weights {
            w_bar: vec![0.0, 0.0],
        };
        assert!((kl_dataset_distributions(&env, &a, &b, 1).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn gaussian_kl_matches_density_ratio_average() {
        // E_{S~P}[log p/q] estimated by sampling against the closed form
        let env = EnvironmentSpec::gaussian_mean(0.0, 0.5, 1.1).unwrap();
        let (p, q) = (Task::Mean { tau: 0.0 }, Task::Mean { tau: 1.0 });
        let mut rng = stream(7);
        let vals: Vec<f64> = (0..50_000)
            .map(|_| {
                let s = sample_dataset(&env, &p, 6, &mut rng).unwrap();
                log_density_ratio(&env, &p, &q, &s).unwrap()
            })
            .collect();
        let s = Summary::of(&vals);
        let exact = kl_dataset_distributions(&env, &p, &q, 6).unwrap();
        assert!((s.mean - exact).abs() < 4.0 * s.std_err, "{s:?} vs {exact}");
    }

    #[test]
    fn regression_kl_matches_density_ratio_average() {
        let env = fig2_env(0.5);
        let p = Task::Weights {
            w_bar: vec![2.0, 3.0],
        };
        let q = Task::Weights {
            w_bar: vec![1.0, 3.5],
        };
        let mut rng = stream(8);
        let vals: Vec<f64> = (0..50_000)
            .map(|_| {
                let s = sample_dataset(&env, &p, 6, &mut rng).unwrap();
                log_density_ratio(&env, &p, &q, &s).unwrap()
            })
            .collect();
        let s = Summary::of(&vals);
        let exact = kl_dataset_distributions(&env, &p, &q, 6).unwrap();
        assert!((s.mean - exact).abs() < 4.0 * s.std_err, "{s:?} vs {exact}");
    }

    #[test]
    fn epsilon_kl_formula() {
        let env = EnvironmentSpec::gaussian_mean(0.0, 0.5, 1.1).unwrap();
        assert!((epsilon_kl(&env, 6) - 6.0 * 0.5 / 1.1).abs() < 1e-15);
        assert!((epsilon_kl(&fig2_env(0.5), 6) - 2.727_272_727).abs() < 1e-8);
        assert_eq!(epsilon_kl(&fig2_env(0.0), 6), 0.0);
    }

    #[test]
    fn regression_epsilon_kl_matches_monte_carlo() {
        let env = fig2_env(0.5);
        let mut rng = stream(9);
        let s = expected_kl_monte_carlo(&env, 6, 100_000, &mut rng).unwrap();
        let exact = epsilon_kl(&env, 6);
        assert!((s.mean - exact).abs() < 0.02 * exact, "{s:?}");
    }

    #[test]
    fn containment_mode_saturates() {
        let mut rng = stream(10);
        // ε_KL = 10
        let env = EnvironmentSpec::gaussian_mean(0.0, 10.0 / 6.0, 1.0).unwrap();
        let r = epsilon_js(&env, 6, JsMode::Lemma1, 1, &mut rng).unwrap();
        assert!((r.epsilon_kl - 10.0).abs() < 1e-12);
        assert_eq!(r.epsilon_js, LN_2);
        assert_eq!(r.std_err, 0.0);
    }

    #[test]
    fn identical_tasks_have_zero_js() {
        let mut rng = stream(11);
        for env in [
            EnvironmentSpec::gaussian_mean(1.0, 0.0, 1.0).unwrap(),
            fig2_env(0.0),
        ] {
            for mode in [JsMode::Lemma1, JsMode::MonteCarlo] {
                let r = epsilon_js(&env, 6, mode, 100, &mut rng).unwrap();
                assert_eq!(r.epsilon_js, 0.0);
            }
        }
    }

    #[test]
    fn mixture_terms_sum_to_twice_js() {
        let env = fig2_env(0.4);
        let mx = mixture_kl_terms(&env, 6, 20_000, &mut stream(12)).unwrap();
        let js = epsilon_js(&env, 6, JsMode::MonteCarlo, 20_000, &mut stream(12)).unwrap();
        // same stream, same draws
        assert!((0.5 * (mx.test.mean + mx.train.mean) - js.epsilon_js).abs() < 1e-12);
    }
}
