//! Losses, base-learners and meta-learners.
//!
//! The truncated square loss `min{r², c²}` is used for every training,
//! population and gap evaluation. The ridge base-learner and the bias
//! meta-learner optimise the plain squared loss, which is what makes both of
//! them solvable in closed form.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::env::{sample_unit_vector, Dataset, EnvironmentSpec, MetaDataset, Sample, Task};
use crate::error::{Error, Result};
use crate::stats::Summary;

/// Model parameter `W`: dimension 1 for the mean family, `d` for regression.
pub type ModelParam = DVector<f64>;
/// Hyperparameter `u` (a bias vector), same dimension as the model.
pub type Hyperparam = DVector<f64>;

/// Condition number above which the meta normal equations are solved by
/// minimum-norm least squares.
pub const MAX_CONDITION: f64 = 1e12;

/// Truncated square loss with truncation level `c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossSpec {
    pub c: f64,
}

impl LossSpec {
    pub fn new(c: f64) -> Result<Self> {
        let spec = LossSpec { c };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.c > 0.0 && self.c.is_finite() {
            Ok(())
        } else {
            Err(Error::invalid("c", format!("must be > 0, got {}", self.c)))
        }
    }

    /// Upper end of the loss range, `c²`.
    pub fn max_loss(&self) -> f64 {
        self.c * self.c
    }

    /// Sub-Gaussian parameter of the per-task training loss. A loss bounded
    /// in `[0, c²]` gives `(c²)²/4`.
    pub fn sigma_sq(&self) -> f64 {
        self.c.powi(4) / 4.0
    }

    /// Sub-Gaussian parameter of the per-sample loss, also `c⁴/4`.
    pub fn delta_sq(&self) -> f64 {
        self.c.powi(4) / 4.0
    }

    #[inline]
    pub(crate) fn truncate(&self, residual: f64) -> f64 {
        (residual * residual).min(self.c * self.c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BaseLearnerSpec {
    /// `W = α S̃ + (1-α) u`.
    ConvexCombination { alpha: f64 },
    /// Ridge regression biased towards `u`.
    Ridge { lambda: f64 },
}

impl BaseLearnerSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            BaseLearnerSpec::ConvexCombination { alpha } if !(0.0..=1.0).contains(&alpha) => {
                Err(Error::invalid("alpha", format!("must lie in [0, 1], got {alpha}")))
            }
            BaseLearnerSpec::Ridge { lambda } if !(lambda > 0.0 && lambda.is_finite()) => {
                Err(Error::invalid("lambda", format!("must be > 0, got {lambda}")))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MetaLearnerSpec {
    /// `U = (1/N) Σ_i S̃_i`.
    DatasetMean,
    /// Bias minimising the average training loss of the ridge solutions.
    RidgeBiasClosedForm,
}

/// Check that environment, base-learner and meta-learner fit together.
pub fn check_compatible(
    env: &EnvironmentSpec,
    base: &BaseLearnerSpec,
    meta: &MetaLearnerSpec,
) -> Result<()> {
    base.validate()?;
    match (env, base, meta) {
        (
            EnvironmentSpec::GaussianMean { .. },
            BaseLearnerSpec::ConvexCombination { .. },
            MetaLearnerSpec::DatasetMean,
        )
        | (
            EnvironmentSpec::LinearRegression { .. },
            BaseLearnerSpec::Ridge { .. },
            MetaLearnerSpec::RidgeBiasClosedForm,
        ) => Ok(()),
        _ => Err(Error::VariantMismatch(format!(
            "incompatible pipeline: {env:?} / {base:?} / {meta:?}"
        ))),
    }
}

/// Truncated loss of model `w` on one sample.
pub fn loss(w: &ModelParam, z: Sample<'_>, spec: &LossSpec) -> Result<f64> {
    let residual = match z {
        Sample::Scalar(z) => {
            if w.len() != 1 {
                return Err(Error::DimensionMismatch {
                    expected: 1,
                    actual: w.len(),
                });
            }
            w[0] - z
        }
        Sample::Pair { x, y } => {
            if w.len() != x.len() {
                return Err(Error::DimensionMismatch {
                    expected: x.len(),
                    actual: w.len(),
                });
            }
            w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() - y
        }
    };
    Ok(spec.truncate(residual))
}

/// Empirical training loss `(1/m) Σ_j l(w, Z_j)`.
pub fn training_loss(w: &ModelParam, s: &Dataset, spec: &LossSpec) -> Result<f64> {
    if s.is_empty() {
        return Err(Error::invalid("dataset", "empty"));
    }
    let mut total = 0.0;
    for z in s.samples() {
        total += loss(w, z, spec)?;
    }
    Ok(total / s.len() as f64)
}

/// Evaluation route for the population loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PopulationMode {
    /// Exact Gaussian formula; mean family only.
    ClosedForm1D,
    MonteCarlo,
}

/// `E[min{D², c²}]` for `D ~ N(mean, var)`.
pub fn truncated_square_mean(mean: f64, var: f64, c: f64) -> f64 {
    let s = var.sqrt();
    let lo = (-c - mean) / s;
    let hi = (c - mean) / s;
    let inside = norm_cdf(hi) - norm_cdf(lo);
    let (pdf_lo, pdf_hi) = (norm_pdf(lo), norm_pdf(hi));
    let second_moment = mean * mean * inside
        + 2.0 * mean * s * (pdf_lo - pdf_hi)
        + var * (inside + lo * pdf_lo - hi * pdf_hi);
    (second_moment + c * c * (1.0 - inside)).clamp(0.0, c * c)
}

fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

fn norm_pdf(x: f64) -> f64 {
    if x.is_infinite() {
        return 0.0;
    }
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Population loss `E[l(w, Z)]` under the task's data distribution.
pub fn population_loss<R: Rng + ?Sized>(
    w: &ModelParam,
    task: &Task,
    env: &EnvironmentSpec,
    spec: &LossSpec,
    mode: PopulationMode,
    n_test: usize,
    rng: &mut R,
) -> Result<f64> {
    match mode {
        PopulationMode::ClosedForm1D => match (env, task) {
            (EnvironmentSpec::GaussianMean { nu_sq, .. }, Task::Mean { tau }) => {
                if w.len() != 1 {
                    return Err(Error::DimensionMismatch {
                        expected: 1,
                        actual: w.len(),
                    });
                }
                Ok(truncated_square_mean(w[0] - tau, *nu_sq, spec.c))
            }
            (EnvironmentSpec::LinearRegression { .. }, _) => Err(Error::VariantMismatch(
                "closed-form population loss is only available for the mean family".into(),
            )),
            _ => Err(Error::VariantMismatch(
                "task variant does not match the environment".into(),
            )),
        },
        PopulationMode::MonteCarlo => {
            Ok(population_loss_mc(w, task, env, spec, n_test, rng)?.mean)
        }
    }
}

/// Monte Carlo population loss over `n_test` fresh samples, with its
/// standard error.
pub fn population_loss_mc<R: Rng + ?Sized>(
    w: &ModelParam,
    task: &Task,
    env: &EnvironmentSpec,
    spec: &LossSpec,
    n_test: usize,
    rng: &mut R,
) -> Result<Summary> {
    if n_test == 0 {
        return Err(Error::invalid("n_test", "must be >= 1"));
    }
    let nu = env.nu_sq().sqrt();
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    match (env, task) {
        (EnvironmentSpec::GaussianMean { .. }, Task::Mean { tau }) => {
            if w.len() != 1 {
                return Err(Error::DimensionMismatch {
                    expected: 1,
                    actual: w.len(),
                });
            }
            let offset = w[0] - tau;
            for _ in 0..n_test {
                let e: f64 = rng.sample(StandardNormal);
                let l = spec.truncate(offset - nu * e);
                sum += l;
                sum_sq += l * l;
            }
        }
        (EnvironmentSpec::LinearRegression { .. }, Task::Weights { w_bar }) => {
            let d = w_bar.len();
            if w.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    actual: w.len(),
                });
            }
            // residual w'x - y = (w - w̄)'x - ν e
            let delta: Vec<f64> = w.iter().zip(w_bar).map(|(a, b)| a - b).collect();
            let mut x = vec![0.0; d];
            for _ in 0..n_test {
                sample_unit_vector(rng, &mut x);
                let e: f64 = rng.sample(StandardNormal);
                let r: f64 = delta.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>() - nu * e;
                let l = spec.truncate(r);
                sum += l;
                sum_sq += l * l;
            }
        }
        _ => {
            return Err(Error::VariantMismatch(
                "task variant does not match the environment".into(),
            ))
        }
    }
    let n = n_test as f64;
    let mean = sum / n;
    let var = if n_test > 1 {
        ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0)
    } else {
        0.0
    };
    Ok(Summary {
        mean,
        std_err: (var / n).sqrt(),
        n: n_test,
    })
}

/// Pieces of the ridge problem for one dataset: `A = 2XᵀX/m + λI` and the
/// data part of the right-hand side `2XᵀY/m`.
struct RidgeSystem {
    a: DMatrix<f64>,
    rhs_data: DVector<f64>,
    xtx: DMatrix<f64>,
    xty: DVector<f64>,
}

fn ridge_system(s: &Dataset, lambda: f64) -> Result<RidgeSystem> {
    let (xtx, xty) = s.gram()?;
    let m = s.len() as f64;
    let d = xtx.nrows();
    let a = &xtx * (2.0 / m) + DMatrix::identity(d, d) * lambda;
    let rhs_data = &xty * (2.0 / m);
    Ok(RidgeSystem {
        a,
        rhs_data,
        xtx,
        xty,
    })
}

/// Fit the base-learner on dataset `s` with hyperparameter `u`.
pub fn fit_base(spec: &BaseLearnerSpec, s: &Dataset, u: &Hyperparam) -> Result<ModelParam> {
    spec.validate()?;
    if s.is_empty() {
        return Err(Error::invalid("dataset", "empty"));
    }
    match *spec {
        BaseLearnerSpec::ConvexCombination { alpha } => {
            if u.len() != 1 {
                return Err(Error::DimensionMismatch {
                    expected: 1,
                    actual: u.len(),
                });
            }
            let mean = s.mean()?;
            Ok(DVector::from_element(1, alpha * mean + (1.0 - alpha) * u[0]))
        }
        BaseLearnerSpec::Ridge { lambda } => {
            if u.len() != s.dim() {
                return Err(Error::DimensionMismatch {
                    expected: s.dim(),
                    actual: u.len(),
                });
            }
            let sys = ridge_system(s, lambda)?;
            let rhs = sys.rhs_data + u * lambda;
            sys.a
                .cholesky()
                .map(|c| c.solve(&rhs))
                .ok_or_else(|| Error::Numerical("ridge system is not positive definite".into()))
        }
    }
}

/// Ridge objective `(1/m) Σ (wᵀx_j - y_j)² + (λ/2) ‖w - u‖²`.
pub fn ridge_objective(w: &ModelParam, s: &Dataset, lambda: f64, u: &Hyperparam) -> Result<f64> {
    let (xtx, xty) = s.gram()?;
    let Dataset::Pairs { y, .. } = s else {
        unreachable!("gram succeeded")
    };
    let m = s.len() as f64;
    let yty: f64 = y.iter().map(|v| v * v).sum();
    let fit = (w.dot(&(&xtx * w)) - 2.0 * w.dot(&xty) + yty) / m;
    Ok(fit + 0.5 * lambda * (w - u).norm_squared())
}

/// Gradient of [`ridge_objective`] in `w`.
pub fn ridge_gradient(w: &ModelParam, s: &Dataset, lambda: f64, u: &Hyperparam) -> Result<DVector<f64>> {
    let (xtx, xty) = s.gram()?;
    let m = s.len() as f64;
    Ok((&xtx * w - xty) * (2.0 / m) + (w - u) * lambda)
}

/// Meta-training objective of the bias meta-learner: the average squared
/// training loss of the ridge solutions fitted with bias `u`.
pub fn meta_objective(u: &Hyperparam, meta: &MetaDataset, base: &BaseLearnerSpec) -> Result<f64> {
    let mut total = 0.0;
    for s in meta.datasets() {
        let w = fit_base(base, s, u)?;
        let (xtx, xty) = s.gram()?;
        let Dataset::Pairs { y, .. } = s else {
            unreachable!("gram succeeded")
        };
        let yty: f64 = y.iter().map(|v| v * v).sum();
        total += (w.dot(&(&xtx * &w)) - 2.0 * w.dot(&xty) + yty) / s.len() as f64;
    }
    Ok(total / meta.len() as f64)
}

/// Fit the meta-learner on meta-training data.
///
/// For the ridge pipeline each task's solution is affine in the bias,
/// `W_i(u) = p_i + Q_i u` with `Q_i = λ A_i⁻¹` and `p_i = A_i⁻¹ 2X_iᵀY_i/m`,
/// so the meta objective is quadratic and its minimiser solves
/// `Σ Q_iᵀX_iᵀX_iQ_i u = Σ Q_iᵀ(X_iᵀY_i - X_iᵀX_i p_i)`.
pub fn fit_meta(
    spec: &MetaLearnerSpec,
    meta: &MetaDataset,
    base: &BaseLearnerSpec,
) -> Result<Hyperparam> {
    base.validate()?;
    match (spec, base) {
        (MetaLearnerSpec::DatasetMean, BaseLearnerSpec::ConvexCombination { .. }) => {
            let mut total = 0.0;
            for s in meta.datasets() {
                total += s.mean()?;
            }
            Ok(DVector::from_element(1, total / meta.len() as f64))
        }
        (MetaLearnerSpec::RidgeBiasClosedForm, BaseLearnerSpec::Ridge { lambda }) => {
            let d = meta.datasets()[0].dim();
            let mut lhs = DMatrix::<f64>::zeros(d, d);
            let mut rhs = DVector::<f64>::zeros(d);
            for s in meta.datasets() {
                let sys = ridge_system(s, *lambda)?;
                let a_inv = sys
                    .a
                    .cholesky()
                    .ok_or_else(|| Error::Numerical("ridge system is not positive definite".into()))?
                    .inverse();
                let q = &a_inv * *lambda;
                let p = &a_inv * &sys.rhs_data;
                let qt = q.transpose();
                lhs += &qt * &sys.xtx * &q;
                rhs += &qt * (&sys.xty - &sys.xtx * &p);
            }
            solve_normal_equations(lhs, rhs)
        }
        _ => Err(Error::VariantMismatch(format!(
            "meta-learner {spec:?} is incompatible with base-learner {base:?}"
        ))),
    }
}

/// Solve a symmetric positive semi-definite system, falling back to the
/// minimum-norm least-squares solution when it is near singular.
pub fn solve_normal_equations(lhs: DMatrix<f64>, rhs: DVector<f64>) -> Result<DVector<f64>> {
    let svd = lhs.clone().svd(true, true);
    let max_sv = svd.singular_values.max();
    let min_sv = svd.singular_values.min();
    if max_sv == 0.0 {
        return Ok(DVector::zeros(rhs.len()));
    }
    if min_sv > 0.0 && max_sv / min_sv <= MAX_CONDITION {
        if let Some(chol) = lhs.cholesky() {
            return Ok(chol.solve(&rhs));
        }
    }
    svd.solve(&rhs, max_sv / MAX_CONDITION)
        .map_err(|e| Error::Numerical(e.to_string()))
}
