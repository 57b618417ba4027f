//! TOML scenario files.
//!
//! ```toml
//! n_tasks = 4
//! m = 6
//! output = "out/fig2"
//!
//! [environment]
//! kind = "linear_regression"
//! mu_w = [2.0, 3.0]
//! nu_bar_sq = 0.5
//! nu_sq = 1.1
//!
//! [base]
//! kind = "ridge"
//! lambda = 2.0
//!
//! [meta]
//! kind = "ridge_bias_closed_form"
//!
//! [loss]
//! c = 1.5
//!
//! [sweep]
//! parameter = "nu_bar_sq"
//! values = [0.1, 0.2, 0.3]
//! ```
//!
//! `[budget]` and `[estimators]` are optional and default to the values
//! below. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::env::EnvironmentSpec;
use crate::error::{Error, Result};
use crate::gaps::{MCBudget, Pipeline};
use crate::info::{MiEstimator, MiSampling};
use crate::learn::{BaseLearnerSpec, LossSpec, MetaLearnerSpec};

/// Settings of the relatedness and mutual information estimators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstimatorConfig {
    /// Neighbour count of the KSG estimator.
    pub k: usize,
    /// Conditioning draws per simulated MI term.
    pub mi_trials: usize,
    /// Simulated pairs per conditioning draw.
    pub mi_samples: usize,
    /// Training tuples per meta-test task in the within-task term.
    pub tuples_per_test_task: usize,
    /// Task pairs for the Monte Carlo JS relatedness.
    pub js_trials: usize,
    pub mi_estimator: MiEstimator,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        let s = MiSampling::default();
        EstimatorConfig {
            k: s.k,
            mi_trials: s.tuples,
            mi_samples: s.samples,
            tuples_per_test_task: s.tuples_per_test_task,
            js_trials: 100_000,
            mi_estimator: s.estimator,
        }
    }
}

impl EstimatorConfig {
    pub fn sampling(&self) -> MiSampling {
        MiSampling {
            tuples: self.mi_trials,
            tuples_per_test_task: self.tuples_per_test_task,
            samples: self.mi_samples,
            k: self.k,
            estimator: self.mi_estimator,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.sampling().validate()?;
        if self.js_trials == 0 {
            return Err(Error::invalid("estimators.js_trials", "must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub parameter: String,
    pub values: Vec<f64>,
}

/// Numeric fields a sweep may vary.
pub const SWEEPABLE: &[&str] = &[
    "nu_bar_sq", "nu_sq", "mu_bar", "c", "alpha", "lambda", "n_tasks", "m",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub environment: EnvironmentSpec,
    pub base: BaseLearnerSpec,
    pub meta: MetaLearnerSpec,
    pub loss: LossSpec,
    #[serde(alias = "N")]
    pub n_tasks: usize,
    pub m: usize,
    #[serde(default)]
    pub budget: MCBudget,
    #[serde(default)]
    pub estimators: EstimatorConfig,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
    /// Directory for results; defaults to `out`.
    #[serde(default)]
    pub output: Option<PathBuf>,
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        ScenarioConfig::from_toml(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario configs always serialize")
    }

    pub fn validate(&self) -> Result<()> {
        self.pipeline()?;
        self.budget.validate()?;
        self.estimators.validate()?;
        if let Some(s) = &self.sweep {
            if !SWEEPABLE.contains(&s.parameter.as_str()) {
                return Err(Error::invalid(
                    "sweep.parameter",
                    format!("`{}` is not one of {SWEEPABLE:?}", s.parameter),
                ));
            }
            if s.values.is_empty() {
                return Err(Error::invalid("sweep.values", "must not be empty"));
            }
            for &v in &s.values {
                self.with_param(&s.parameter, v)?;
            }
        }
        Ok(())
    }

    pub fn pipeline(&self) -> Result<Pipeline> {
        Pipeline::new(
            self.environment.clone(),
            self.base,
            self.meta,
            self.loss,
            self.n_tasks,
            self.m,
        )
    }

    pub fn output_dir(&self) -> PathBuf {
        self.output.clone().unwrap_or_else(|| PathBuf::from("out"))
    }

    /// Copy with one numeric field replaced.
    pub fn with_param(&self, name: &str, value: f64) -> Result<Self> {
        let mut cfg = self.clone();
        let count = |v: f64| -> Result<usize> {
            if v >= 1.0 && v.fract() == 0.0 && v < 1e9 {
                Ok(v as usize)
            } else {
                Err(Error::invalid(name, format!("needs a positive integer, got {v}")))
            }
        };
        match (name, &mut cfg.environment, &mut cfg.base) {
            ("nu_bar_sq", env, _) => cfg.environment = env.with_nu_bar_sq(value),
            ("nu_sq", EnvironmentSpec::GaussianMean { nu_sq, .. }, _)
            | ("nu_sq", EnvironmentSpec::LinearRegression { nu_sq, .. }, _) => *nu_sq = value,
            ("mu_bar", EnvironmentSpec::GaussianMean { mu_bar, .. }, _) => *mu_bar = value,
            ("alpha", _, BaseLearnerSpec::ConvexCombination { alpha }) => *alpha = value,
            ("lambda", _, BaseLearnerSpec::Ridge { lambda }) => *lambda = value,
            ("c", _, _) => cfg.loss = LossSpec { c: value },
            ("n_tasks", _, _) => cfg.n_tasks = count(value)?,
            ("m", _, _) => cfg.m = count(value)?,
            _ => {
                return Err(Error::invalid(
                    "sweep.parameter",
                    format!("`{name}` does not apply to this pipeline"),
                ))
            }
        }
        cfg.sweep = None;
        cfg.pipeline()?;
        Ok(cfg)
    }
}

/// Parse `a:b:n` into `n` evenly spaced values from `a` to `b` inclusive.
pub fn parse_range(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    let bad = || Error::invalid("values", format!("expected a:b:n, got `{spec}`"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let a: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let b: f64 = parts[1].trim().parse().map_err(|_| bad())?;
    let n: usize = parts[2].trim().parse().map_err(|_| bad())?;
    if n < 2 {
        return Err(Error::invalid("values", "a sweep needs at least 2 points"));
    }
    if !a.is_finite() || !b.is_finite() {
        return Err(bad());
    }
    let step = (b - a) / (n - 1) as f64;
    Ok((0..n)
        .map(|i| if i == n - 1 { b } else { a + step * i as f64 })
        .collect())
}

/// Settings used for the ridge-regression sweep over `ν̄²`.
pub fn fig2_defaults() -> ScenarioConfig {
    ScenarioConfig {
        environment: EnvironmentSpec::LinearRegression {
            mu_w: vec![2.0, 3.0],
            nu_bar_sq: 0.5,
            nu_sq: 1.1,
        },
        base: BaseLearnerSpec::Ridge { lambda: 2.0 },
        meta: MetaLearnerSpec::RidgeBiasClosedForm,
        loss: LossSpec { c: 1.5 },
        n_tasks: 4,
        m: 6,
        budget: MCBudget::default(),
        estimators: EstimatorConfig::default(),
        sweep: Some(SweepConfig {
            parameter: "nu_bar_sq".into(),
            values: (1..=10).map(|i| i as f64 / 10.0).collect(),
        }),
        output: None,
    }
}

/// Mean-estimation counterpart of [`fig2_defaults`].
pub fn mean_defaults() -> ScenarioConfig {
    ScenarioConfig {
        environment: EnvironmentSpec::GaussianMean {
            mu_bar: 0.0,
            nu_bar_sq: 0.5,
            nu_sq: 1.1,
        },
        base: BaseLearnerSpec::ConvexCombination { alpha: 0.5 },
        meta: MetaLearnerSpec::DatasetMean,
        // at c = 1.5 the within-task term alone is about 1.1e-3 at N = m = 10⁶
        loss: LossSpec { c: 1.0 },
        sweep: None,
        ..fig2_defaults()
    }
}
