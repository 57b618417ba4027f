//! Scenario runners: one configuration to one result row, sweeps, and the
//! mean-estimation study.

use serde::Serialize;

use crate::bounds::{
    b_term, b_term_empirical, bound_corollary_js, bound_corollary_kl, closed_form_bound_mean_estimation,
    closed_form_bound_with_epsilon, Relatedness, SubGaussian,
};
use crate::env::{epsilon_js, epsilon_kl, sample_task, sample_tasks, JsMode};
use crate::error::{Error, Result};
use crate::gaps::{gap_metrics, Pipeline};
use crate::info::{
    mi_hyper_dataset_closed_form, mi_hyper_dataset_empirical, mi_model_sample_closed_form,
    mi_model_sample_empirical,
};
use crate::learn::BaseLearnerSpec;
use crate::rng::substream;

use super::config::ScenarioConfig;

// Sub-seed labels; each estimator reads its own stream so adding one does
// not shift the others.
const GAPS: u64 = 1;
const JS: u64 = 2;
const MI_HYPER: u64 = 3;
const MI_MODEL: u64 = 4;

/// One row of `results.csv`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub swept_value: f64,
    pub abs_avg_gap: f64,
    pub abs_avg_gap_se: f64,
    pub avg_abs_gap: f64,
    pub avg_abs_gap_se: f64,
    pub bound_kl: f64,
    pub bound_js: f64,
    pub epsilon_kl: f64,
    pub epsilon_js: f64,
    pub epsilon_js_se: f64,
    pub mi_hyper: f64,
    pub b_term: f64,
    pub seed: u64,
}

/// Column order of `results.csv`.
pub const SWEEP_HEADER: [&str; 13] = [
    "swept_value",
    "abs_avg_gap",
    "abs_avg_gap_se",
    "avg_abs_gap",
    "avg_abs_gap_se",
    "bound_kl",
    "bound_js",
    "epsilon_kl",
    "epsilon_js",
    "epsilon_js_se",
    "mi_hyper",
    "b_term",
    "seed",
];

impl SweepRow {
    pub fn values(&self) -> [f64; 12] {
        [
            self.swept_value,
            self.abs_avg_gap,
            self.abs_avg_gap_se,
            self.avg_abs_gap,
            self.avg_abs_gap_se,
            self.bound_kl,
            self.bound_js,
            self.epsilon_kl,
            self.epsilon_js,
            self.epsilon_js_se,
            self.mi_hyper,
            self.b_term,
        ]
    }

    /// Every number in the row must be finite.
    pub fn check_finite(&self) -> Result<()> {
        match self.values().iter().position(|v| !v.is_finite()) {
            None => Ok(()),
            Some(i) => Err(Error::Numerical(format!(
                "non-finite {} ({}) at swept value {}",
                SWEEP_HEADER[i],
                self.values()[i],
                self.swept_value
            ))),
        }
    }
}

/// Bound inputs for one scenario, without the gap simulation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundInputs {
    pub epsilon_kl: f64,
    pub epsilon_js: f64,
    pub epsilon_js_se: f64,
    /// `I(U; S_i | T_{1:N})`, clamped at zero.
    pub mi_hyper: f64,
    pub b_term: f64,
    pub bound_kl: f64,
    pub bound_js: f64,
}

/// Relatedness levels, MI terms and both bounds for a configuration.
///
/// The mean pipeline uses the exact MI expressions; the ridge pipeline
/// estimates them by simulation.
pub fn bound_inputs(cfg: &ScenarioConfig) -> Result<BoundInputs> {
    let p = cfg.pipeline()?;
    let seed = cfg.budget.seed;
    let sampling = cfg.estimators.sampling();
    let sg = SubGaussian::bounded(&p.loss);

    let eps_kl = epsilon_kl(&p.env, p.m);
    let js = epsilon_js(&p.env, p.m, JsMode::MonteCarlo, cfg.estimators.js_trials, &mut substream(seed, JS))?;

    let (mi_hyper, b) = match p.base {
        BaseLearnerSpec::ConvexCombination { alpha } => {
            let hyper = mi_hyper_dataset_closed_form(p.n_tasks)?.nats;
            let model = mi_model_sample_closed_form(alpha, p.m, p.n_tasks)?.nats;
            (hyper, b_term(sg.delta_sq, &vec![model; p.m])?)
        }
        BaseLearnerSpec::Ridge { .. } => {
            let hyper = mi_hyper_dataset_empirical(&p, &sampling, &mut substream(seed, MI_HYPER))?;
            let b = b_term_empirical(&p, &sampling, &mut substream(seed, MI_MODEL))?;
            (hyper.clamped_nats(), b.b)
        }
    };
    let mi = vec![mi_hyper; p.n_tasks];
    let kl = bound_corollary_kl(sg, eps_kl, &mi, b)?;
    let js_bound = bound_corollary_js(sg, js.epsilon_js, &mi, b)?;
    Ok(BoundInputs {
        epsilon_kl: eps_kl,
        epsilon_js: js.epsilon_js,
        epsilon_js_se: js.std_err,
        mi_hyper,
        b_term: b,
        bound_kl: kl.total,
        bound_js: js_bound.total,
    })
}

/// Run the gap, information and bound pipelines for one configuration.
/// `swept_value` is recorded in the row as is.
pub fn run_scenario(cfg: &ScenarioConfig, swept_value: f64) -> Result<SweepRow> {
    cfg.validate()?;
    let p = cfg.pipeline()?;
    let gaps = gap_metrics(&p, &cfg.budget, &mut substream(cfg.budget.seed, GAPS))?;
    let b = bound_inputs(cfg)?;
    let row = SweepRow {
        swept_value,
        abs_avg_gap: gaps.abs_avg.mean,
        abs_avg_gap_se: gaps.abs_avg.std_err,
        avg_abs_gap: gaps.avg_abs.mean,
        avg_abs_gap_se: gaps.avg_abs.std_err,
        bound_kl: b.bound_kl,
        bound_js: b.bound_js,
        epsilon_kl: b.epsilon_kl,
        epsilon_js: b.epsilon_js,
        epsilon_js_se: b.epsilon_js_se,
        mi_hyper: b.mi_hyper,
        b_term: b.b_term,
        seed: cfg.budget.seed,
    };
    row.check_finite()?;
    Ok(row)
}

/// Run every point of the configured sweep with the same seed, so the
/// points share their random numbers.
pub fn run_sweep(cfg: &ScenarioConfig) -> Result<Vec<SweepRow>> {
    run_sweep_with(cfg, |_, _| {})
}

/// [`run_sweep`] with a callback after each finished point.
pub fn run_sweep_with(cfg: &ScenarioConfig, mut progress: impl FnMut(usize, &SweepRow)) -> Result<Vec<SweepRow>> {
    cfg.validate()?;
    let sweep = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| Error::invalid("sweep", "the configuration has no [sweep] section"))?;
    if sweep.values.len() < 2 {
        return Err(Error::invalid("sweep.values", "a sweep needs at least 2 points"));
    }
    let mut rows = Vec::with_capacity(sweep.values.len());
    for (i, &v) in sweep.values.iter().enumerate() {
        let point = cfg.with_param(&sweep.parameter, v)?;
        let row = run_scenario(&point, v)?;
        progress(i, &row);
        rows.push(row);
    }
    Ok(rows)
}

/// A line of the mean-estimation study: a closed-form value next to a
/// second route to the same quantity.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudyRow {
    pub quantity: String,
    pub closed_form: f64,
    pub estimate: f64,
    pub abs_diff: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl StudyRow {
    fn new(quantity: impl Into<String>, closed_form: f64, estimate: f64, tolerance: f64) -> Self {
        let abs_diff = (closed_form - estimate).abs();
        StudyRow {
            quantity: quantity.into(),
            closed_form,
            estimate,
            abs_diff,
            tolerance,
            pass: abs_diff <= tolerance,
        }
    }
}

/// Size used for the large-sample limit of the closed-form bound.
pub const LIMIT_SIZE: usize = 1_000_000;

/// Compare the exact mean-estimation expressions with their simulated or
/// assembled counterparts.
///
/// Rows: KSG vs exact `I(U; S_i | T_{1:N})`, KSG vs exact `I(W; Z_j | ..)`
/// at one sampled tuple, the closed-form KL and JS bounds vs the assembled
/// corollaries, and the bound at `N = m = 10⁶` with `ε` fixed vs its limit
/// `c²√ε/√2`.
pub fn run_mean_estimation_study(cfg: &ScenarioConfig) -> Result<Vec<StudyRow>> {
    cfg.validate()?;
    let p: Pipeline = cfg.pipeline()?;
    let alpha = match p.base {
        BaseLearnerSpec::ConvexCombination { alpha } => alpha,
        _ => {
            return Err(Error::VariantMismatch(
                "the mean-estimation study needs a gaussian_mean configuration".into(),
            ))
        }
    };
    let seed = cfg.budget.seed;
    let sampling = cfg.estimators.sampling();
    let sg = SubGaussian::bounded(&p.loss);
    let c = p.loss.c;
    let (nu_bar_sq, nu_sq) = (p.env.nu_bar_sq(), p.env.nu_sq());
    let mut rows = Vec::new();

    let hyper = mi_hyper_dataset_closed_form(p.n_tasks)?.nats;
    let hyper_ksg = mi_hyper_dataset_empirical(&p, &sampling, &mut substream(seed, MI_HYPER))?;
    rows.push(StudyRow::new("mi_hyper_ksg", hyper, hyper_ksg.nats, 0.03));

    let model = mi_model_sample_closed_form(alpha, p.m, p.n_tasks)?.nats;
    let mut r = substream(seed, MI_MODEL);
    let task = sample_task(&p.env, &mut r);
    let tasks_train = sample_tasks(&p.env, p.n_tasks, &mut r);
    let model_ksg = mi_model_sample_empirical(&p, &task, &tasks_train, &sampling, &mut r)?;
    rows.push(StudyRow::new("mi_model_ksg", model, model_ksg.nats, 0.03));

    let b = b_term(sg.delta_sq, &vec![model; p.m])?;
    let mi = vec![hyper; p.n_tasks];
    let eps_kl = epsilon_kl(&p.env, p.m);
    let assembled = bound_corollary_kl(sg, eps_kl, &mi, b)?.total;
    let cf = closed_form_bound_mean_estimation(c, alpha, p.m, p.n_tasks, nu_bar_sq, nu_sq, Relatedness::Kl)?.total;
    rows.push(StudyRow::new("bound_kl_assembled", cf, assembled, 1e-12));

    let eps_js = std::f64::consts::LN_2.min(eps_kl / 2.0);
    let assembled = bound_corollary_js(sg, eps_js, &mi, b)?.total;
    let cf = closed_form_bound_mean_estimation(c, alpha, p.m, p.n_tasks, nu_bar_sq, nu_sq, Relatedness::Js)?.total;
    rows.push(StudyRow::new("bound_js_assembled", cf, assembled, 1e-12));

    let limit = c * c * eps_kl.sqrt() / std::f64::consts::SQRT_2;
    let far = closed_form_bound_with_epsilon(c, alpha, LIMIT_SIZE, LIMIT_SIZE, eps_kl, Relatedness::Kl)?.total;
    rows.push(StudyRow::new("bound_kl_limit", limit, far, 1e-3));

    for row in &rows {
        if !(row.closed_form.is_finite() && row.estimate.is_finite()) {
            return Err(Error::Numerical(format!("non-finite value in `{}`", row.quantity)));
        }
    }
    Ok(rows)
}
