//! Information-theoretic upper bounds on `|ΔL̄|^avg`.
//!
//! Every bound has the shape `(1/N) Σ_i env_term_i + B`: one
//! environment-level radical per meta-training dataset plus the within-task
//! term `B`. The general bound takes per-dataset KL divergences to an
//! auxiliary data distribution `R`; the two corollaries are that bound with
//! `R = P_{S_i|T}` (KL relatedness) and with the equal-weight mixture of the
//! test- and training-task distributions (JS relatedness).

use std::f64::consts::LN_2;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::{kl_dataset_distributions, sample_task, sample_tasks, MixtureKl, Task};
use crate::error::{Error, Result};
use crate::gaps::Pipeline;
use crate::info::{mi_model_sample_empirical, MiSampling};
use crate::learn::LossSpec;
use crate::rng::child;
use crate::stats::Summary;

/// Sub-Gaussian constants: `sigma_sq` for the per-task training loss,
/// `delta_sq` for the per-sample loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubGaussian {
    pub sigma_sq: f64,
    pub delta_sq: f64,
}

impl SubGaussian {
    /// Constants of a loss bounded in `[0, c²]`: both equal `c⁴/4`.
    pub fn bounded(loss: &LossSpec) -> Self {
        SubGaussian {
            sigma_sq: loss.sigma_sq(),
            delta_sq: loss.delta_sq(),
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.sigma_sq > 0.0 && self.sigma_sq.is_finite()) {
            return Err(Error::invalid("sigma_sq", "must be > 0"));
        }
        if !(self.delta_sq > 0.0 && self.delta_sq.is_finite()) {
            return Err(Error::invalid("delta_sq", "must be > 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundVariant {
    /// General bound with explicit auxiliary-distribution divergences.
    Theorem1,
    CorollaryKl,
    CorollaryJs,
    ClosedFormMeanEstimation,
}

/// An evaluated bound and its parts.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundBreakdown {
    /// One environment-level radical per meta-training dataset.
    pub env_terms: Vec<f64>,
    /// Within-task term.
    pub b: f64,
    pub epsilon: f64,
    pub sigma_sq: f64,
    pub delta_sq: f64,
    pub total: f64,
    pub variant: BoundVariant,
}

impl BoundBreakdown {
    fn assemble(env_terms: Vec<f64>, b: f64, epsilon: f64, sg: SubGaussian, variant: BoundVariant) -> Self {
        let total = env_terms.iter().sum::<f64>() / env_terms.len() as f64 + b;
        BoundBreakdown {
            env_terms,
            b,
            epsilon,
            sigma_sq: sg.sigma_sq,
            delta_sq: sg.delta_sq,
            total,
            variant,
        }
    }

    /// Average of the environment-level radicals.
    pub fn env_mean(&self) -> f64 {
        self.env_terms.iter().sum::<f64>() / self.env_terms.len() as f64
    }
}

fn nonneg(name: &str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(name, format!("must be finite and >= 0, got {v}")))
    }
}

fn check_terms(name: &str, terms: &[f64]) -> Result<()> {
    if terms.is_empty() {
        return Err(Error::invalid(name, "needs one term per dataset"));
    }
    terms.iter().try_for_each(|&v| nonneg(name, v))
}

/// Bound for an `ε`-KL related environment:
/// `(1/N) Σ_i √(2σ²(I_i + ε)) + B`.
pub fn bound_corollary_kl(sg: SubGaussian, epsilon: f64, mi_terms: &[f64], b: f64) -> Result<BoundBreakdown> {
    sg.validate()?;
    nonneg("epsilon", epsilon)?;
    nonneg("B", b)?;
    check_terms("mi_terms", mi_terms)?;
    let env_terms = mi_terms
        .iter()
        .map(|i| (2.0 * sg.sigma_sq * (i + epsilon)).sqrt())
        .collect();
    Ok(BoundBreakdown::assemble(env_terms, b, epsilon, sg, BoundVariant::CorollaryKl))
}

/// Bound for an `ε`-JS related environment:
/// `(2/N) Σ_i √(σ²(I_i + 2ε)) + B`, for `ε ∈ [0, log 2]`.
pub fn bound_corollary_js(sg: SubGaussian, epsilon_js: f64, mi_terms: &[f64], b: f64) -> Result<BoundBreakdown> {
    sg.validate()?;
    if !(0.0..=LN_2).contains(&epsilon_js) {
        return Err(Error::invalid(
            "epsilon_js",
            format!("must lie in [0, log 2], got {epsilon_js}"),
        ));
    }
    nonneg("B", b)?;
    check_terms("mi_terms", mi_terms)?;
    let env_terms = mi_terms
        .iter()
        .map(|i| 2.0 * (sg.sigma_sq * (i + 2.0 * epsilon_js)).sqrt())
        .collect();
    Ok(BoundBreakdown::assemble(env_terms, b, epsilon_js, sg, BoundVariant::CorollaryJs))
}

/// Per-dataset divergences to the auxiliary distribution `R`:
/// `kl_test_i = E[KL(P_{S_i|T} ‖ R)]`, `kl_train_i = E[KL(P_{S_i|T_i} ‖ R)]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AuxiliaryTerms {
    pub kl_test: Vec<f64>,
    pub kl_train: Vec<f64>,
    /// Relatedness level the choice corresponds to.
    pub epsilon: f64,
}

impl AuxiliaryTerms {
    /// `R = P_{S_i|T}`: the test-side divergence vanishes and the training
    /// side is the expected KL between task pairs, `ε_KL`.
    pub fn test_task_data(epsilon_kl: f64, n_tasks: usize) -> Self {
        AuxiliaryTerms {
            kl_test: vec![0.0; n_tasks],
            kl_train: vec![epsilon_kl; n_tasks],
            epsilon: epsilon_kl,
        }
    }

    /// `R = (P_{S_i|T} + P_{S_i|T_i}) / 2`, with both divergences from a
    /// Monte Carlo estimate. Their sum is `2 ε_JS`.
    pub fn mixture(mx: &MixtureKl, n_tasks: usize) -> Self {
        let (test, train) = (mx.test.mean.max(0.0), mx.train.mean.max(0.0));
        AuxiliaryTerms {
            kl_test: vec![test; n_tasks],
            kl_train: vec![train; n_tasks],
            epsilon: 0.5 * (test + train),
        }
    }

    /// `R = P_{S_i|τ}` at a fixed tuple: `kl_train_i = KL(P_{S|τ_i} ‖ P_{S|τ})`
    /// in closed form. Used for the tuple-conditioned bound.
    pub fn conditioned(p: &Pipeline, task: &Task, tasks_train: &[Task]) -> Result<Self> {
        let kl_train = tasks_train
            .iter()
            .map(|t| kl_dataset_distributions(&p.env, t, task, p.m))
            .collect::<Result<Vec<_>>>()?;
        let epsilon = kl_train.iter().sum::<f64>() / kl_train.len().max(1) as f64;
        Ok(AuxiliaryTerms {
            kl_test: vec![0.0; tasks_train.len()],
            kl_train,
            epsilon,
        })
    }
}

fn check_aux(mi_terms: &[f64], aux: &AuxiliaryTerms) -> Result<()> {
    check_terms("mi_terms", mi_terms)?;
    check_terms("kl_test_terms", &aux.kl_test)?;
    check_terms("kl_train_terms", &aux.kl_train)?;
    if aux.kl_test.len() != mi_terms.len() || aux.kl_train.len() != mi_terms.len() {
        return Err(Error::invalid("kl terms", "need one term per dataset"));
    }
    Ok(())
}

/// General bound:
/// `(1/N) Σ_i [√(2σ² kl_test_i) + √(2σ²(I_i + kl_train_i))] + B`.
pub fn bound_theorem1(sg: SubGaussian, mi_terms: &[f64], aux: &AuxiliaryTerms, b: f64) -> Result<BoundBreakdown> {
    sg.validate()?;
    nonneg("B", b)?;
    check_aux(mi_terms, aux)?;
    let two_s = 2.0 * sg.sigma_sq;
    let env_terms = mi_terms
        .iter()
        .zip(aux.kl_test.iter().zip(&aux.kl_train))
        .map(|(i, (kt, kr))| (two_s * kt).sqrt() + (two_s * (i + kr)).sqrt())
        .collect();
    Ok(BoundBreakdown::assemble(env_terms, b, aux.epsilon, sg, BoundVariant::Theorem1))
}

/// The general bound after merging each pair of radicals by concavity,
/// `√(2σ²C) + √(2σ²D) ≤ 2√(σ²(C+D))`. With mixture terms this is the
/// JS-corollary expression evaluated on the raw divergence estimates.
pub fn bound_theorem1_merged(sg: SubGaussian, mi_terms: &[f64], aux: &AuxiliaryTerms, b: f64) -> Result<BoundBreakdown> {
    sg.validate()?;
    nonneg("B", b)?;
    check_aux(mi_terms, aux)?;
    let env_terms = mi_terms
        .iter()
        .zip(aux.kl_test.iter().zip(&aux.kl_train))
        .map(|(i, (kt, kr))| 2.0 * (sg.sigma_sq * (kt + i + kr)).sqrt())
        .collect();
    Ok(BoundBreakdown::assemble(env_terms, b, aux.epsilon, sg, BoundVariant::Theorem1))
}

/// Within-task term `(1/m) Σ_j √(2δ² I_j)`.
pub fn b_term(delta_sq: f64, mi_terms: &[f64]) -> Result<f64> {
    if !(delta_sq > 0.0 && delta_sq.is_finite()) {
        return Err(Error::invalid("delta_sq", "must be > 0"));
    }
    check_terms("mi_terms", mi_terms)?;
    Ok(mi_terms.iter().map(|i| (2.0 * delta_sq * i).sqrt()).sum::<f64>() / mi_terms.len() as f64)
}

/// Simulated within-task term.
#[derive(Debug, Clone, PartialEq)]
pub struct BTermEstimate {
    pub b: f64,
    pub std_err: f64,
    /// Conditional MI `Î(T')` per sampled meta-test task.
    pub mi_per_test_task: Vec<f64>,
}

/// Estimate `B = E_{T'} √(2δ² I(W; Z_j | T=T', T_{1:N}))` by simulation.
///
/// For each of `sampling.tuples` meta-test tasks the conditional MI is the
/// average of per-tuple estimates over `sampling.tuples_per_test_task`
/// training tuples; negative estimates are clamped to zero before the root.
pub fn b_term_empirical<R: Rng + ?Sized>(
    p: &Pipeline,
    sampling: &MiSampling,
    rng: &mut R,
) -> Result<BTermEstimate> {
    sampling.validate()?;
    let delta_sq = p.loss.delta_sq();
    let mut per_task_b = Vec::with_capacity(sampling.tuples);
    let mut mi_per_test_task = Vec::with_capacity(sampling.tuples);
    for _ in 0..sampling.tuples {
        let mut r = child(rng);
        let task = sample_task(&p.env, &mut r);
        let mut total = 0.0;
        for _ in 0..sampling.tuples_per_test_task {
            let mut rr = child(&mut r);
            let tasks_train = sample_tasks(&p.env, p.n_tasks, &mut rr);
            total += mi_model_sample_empirical(p, &task, &tasks_train, sampling, &mut rr)?.nats;
        }
        let mi = (total / sampling.tuples_per_test_task as f64).max(0.0);
        mi_per_test_task.push(mi);
        per_task_b.push(b_term(delta_sq, &vec![mi; p.m])?);
    }
    let s = Summary::of(&per_task_b);
    Ok(BTermEstimate {
        b: s.mean,
        std_err: s.std_err,
        mi_per_test_task,
    })
}

/// Relatedness notion used by the closed-form mean-estimation bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relatedness {
    Kl,
    Js,
}

/// Closed-form bound for mean estimation with a meta-learned bias, with `ε`
/// derived from the environment: `m ν̄²/ν²` (KL) or `min{log 2, m ν̄²/2ν²}` (JS).
pub fn closed_form_bound_mean_estimation(
    c: f64,
    alpha: f64,
    m: usize,
    n_tasks: usize,
    nu_bar_sq: f64,
    nu_sq: f64,
    variant: Relatedness,
) -> Result<BoundBreakdown> {
    if !(nu_sq > 0.0) || !(nu_bar_sq >= 0.0) {
        return Err(Error::invalid("nu_sq, nu_bar_sq", "need nu_sq > 0 and nu_bar_sq >= 0"));
    }
    let eps_kl = m as f64 * nu_bar_sq / nu_sq;
    let epsilon = match variant {
        Relatedness::Kl => eps_kl,
        Relatedness::Js => LN_2.min(eps_kl / 2.0),
    };
    closed_form_bound_with_epsilon(c, alpha, m, n_tasks, epsilon, variant)
}

/// Closed-form mean-estimation bound at a given relatedness level `ε`.
///
/// KL: `c²/√2 · √(½ ln(N/(N-1)) + ε) + √(c⁴/4 · ln ρ)`, JS: the first term
/// becomes `c² √(½ ln(N/(N-1)) + 2ε)`; `ρ` is the variance ratio of the
/// within-task information.
pub fn closed_form_bound_with_epsilon(
    c: f64,
    alpha: f64,
    m: usize,
    n_tasks: usize,
    epsilon: f64,
    variant: Relatedness,
) -> Result<BoundBreakdown> {
    if !(c > 0.0) {
        return Err(Error::invalid("c", "must be > 0"));
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::invalid("alpha", "must lie in [0, 1]"));
    }
    if n_tasks < 2 || m == 0 {
        return Err(Error::invalid("N, m", "need N >= 2 and m >= 1"));
    }
    if alpha == 1.0 && m == 1 {
        return Err(Error::invalid("alpha, m", "alpha = 1 with m = 1 is unbounded"));
    }
    nonneg("epsilon", epsilon)?;
    let (nf, mf) = (n_tasks as f64, m as f64);
    let c2 = c * c;
    let hyper = 0.5 * (nf / (nf - 1.0)).ln();
    let shrink = (1.0 - alpha) * (1.0 - alpha) / nf;
    let ratio = (alpha * alpha + shrink) / (alpha * alpha * (mf - 1.0) / mf + shrink);
    let b = (c2 * c2 / 4.0 * ratio.ln()).max(0.0).sqrt();
    let first = match variant {
        Relatedness::Kl => c2 / std::f64::consts::SQRT_2 * (hyper + epsilon).sqrt(),
        Relatedness::Js => c2 * (hyper + 2.0 * epsilon).sqrt(),
    };
    let sg = SubGaussian {
        sigma_sq: c2 * c2 / 4.0,
        delta_sq: c2 * c2 / 4.0,
    };
    let mut out = BoundBreakdown::assemble(vec![first; n_tasks], b, epsilon, sg, BoundVariant::ClosedFormMeanEstimation);
    out.total = first + b;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::info::{mi_hyper_dataset_closed_form, mi_model_sample_closed_form};
    use proptest::prelude::*;

    fn sg(c: f64) -> SubGaussian {
        SubGaussian::bounded(&LossSpec::new(c).unwrap())
    }

    #[test]
    fn kl_bound_collapses_to_b() {
        let out = bound_corollary_kl(sg(1.5), 0.0, &[0.0; 4], 0.3).unwrap();
        assert_eq!(out.total, 0.3);
    }

    #[test]
    fn kl_bound_reference_value() {
        let i = 0.5 * (4.0f64 / 3.0).ln();
        let eps = 6.0 * 0.5 / 1.1;
        let out = bound_corollary_kl(sg(1.5), eps, &[i; 4], 0.0).unwrap();
        let reference = 1.5 * 1.5 / 2f64.sqrt() * (i + eps).sqrt();
        assert!((out.total - reference).abs() < 1e-12);
        assert!((out.total - 2.696).abs() < 1e-3);
    }

    #[test]
    fn js_bound_collapse_and_range() {
        let s = sg(1.5);
        let out = bound_corollary_js(s, 0.4, &[0.0; 3], 0.1).unwrap();
        assert!((out.total - (2.0 * (2.0 * s.sigma_sq * 0.4).sqrt() + 0.1)).abs() < 1e-12);
        assert!(bound_corollary_js(s, 0.7, &[0.0; 3], 0.0).is_err());
        assert!(bound_corollary_js(s, -0.1, &[0.0; 3], 0.0).is_err());
    }

    #[test]
    fn rejects_negative_inputs() {
        let s = sg(1.0);
        assert!(bound_corollary_kl(s, -1.0, &[0.0], 0.0).is_err());
        assert!(bound_corollary_kl(s, 1.0, &[-0.1], 0.0).is_err());
        assert!(bound_corollary_kl(s, 1.0, &[0.1], -0.1).is_err());
        assert!(bound_corollary_kl(s, 1.0, &[], 0.0).is_err());
        assert!(b_term(1.0, &[-1.0]).is_err());
    }

    #[test]
    fn theorem1_with_test_task_data_is_kl_corollary() {
        let s = sg(1.5);
        let mi = [0.1, 0.2, 0.15, 0.12];
        let aux = AuxiliaryTerms::test_task_data(2.7, 4);
        let a = bound_theorem1(s, &mi, &aux, 0.4).unwrap();
        let b = bound_corollary_kl(s, 2.7, &mi, 0.4).unwrap();
        assert!((a.total - b.total).abs() < 1e-12);
        let zero = bound_theorem1(s, &[0.0; 2], &AuxiliaryTerms::test_task_data(0.0, 2), 0.25).unwrap();
        assert_eq!(zero.total, 0.25);
    }

    #[test]
    fn b_term_exchangeable_collapse() {
        let delta_sq = 1.5f64.powi(4) / 4.0;
        let i = mi_model_sample_closed_form(0.5, 6, 4).unwrap().nats;
        let b = b_term(delta_sq, &[i; 6]).unwrap();
        assert!((b - (2.0 * delta_sq * i).sqrt()).abs() < 1e-12);
        assert_eq!(b_term(delta_sq, &[0.0; 6]).unwrap(), 0.0);
        // √(2 · 1.265625 · 0.0715502)
        assert!((b - 0.425_57).abs() < 1e-4, "{b}");
    }

    #[test]
    fn closed_form_matches_assembled_kl_bound() {
        let (c, alpha, m, n) = (1.5, 0.5, 6, 4);
        let cf = closed_form_bound_mean_estimation(c, alpha, m, n, 0.5, 1.1, Relatedness::Kl).unwrap();
        let s = sg(c);
        let hyper = mi_hyper_dataset_closed_form(n).unwrap().nats;
        let model = mi_model_sample_closed_form(alpha, m, n).unwrap().nats;
        let b = b_term(s.delta_sq, &vec![model; m]).unwrap();
        let assembled = bound_corollary_kl(s, 6.0 * 0.5 / 1.1, &[hyper; 4], b).unwrap();
        assert!((cf.total - assembled.total).abs() < 1e-12);
        assert!((cf.total - (2.6958 + 0.4256)).abs() < 1e-3, "{}", cf.total);

        let cf_js = closed_form_bound_mean_estimation(c, alpha, m, n, 0.5, 1.1, Relatedness::Js).unwrap();
        let assembled_js = bound_corollary_js(s, LN_2, &[hyper; 4], b).unwrap();
        assert!((cf_js.total - assembled_js.total).abs() < 1e-12);
    }

    #[test]
    fn closed_form_vanishes_for_identical_tasks_and_infinite_data() {
        let big = 1_000_000;
        for v in [Relatedness::Kl, Relatedness::Js] {
            let out = closed_form_bound_mean_estimation(1.5, 0.5, big, big, 0.0, 1.0, v).unwrap();
            assert!(out.total < 5e-3, "{out:?}");
        }
        assert!(closed_form_bound_mean_estimation(1.5, 1.0, 1, 4, 0.5, 1.0, Relatedness::Kl).is_err());
    }

    #[test]
    fn closed_form_never_below_asymptote() {
        let (c, nu_bar_sq, nu_sq) = (1.5, 0.3, 1.1);
        for n in [2, 5, 40, 1000] {
            for m in [1, 6, 60, 5000] {
                let out = closed_form_bound_mean_estimation(c, 0.5, m, n, nu_bar_sq, nu_sq, Relatedness::Kl).unwrap();
                let floor = c * c * (m as f64 * nu_bar_sq / nu_sq).sqrt() / 2f64.sqrt();
                assert!(out.total >= floor);
            }
        }
    }

    #[test]
    fn breakdown_total_is_mean_plus_b() {
        let out = bound_corollary_js(sg(2.0), 0.3, &[0.1, 0.4, 0.0], 0.7).unwrap();
        assert!((out.total - (out.env_mean() + out.b)).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn concavity_of_merged_radicals(cv in 0.0f64..50.0, dv in 0.0f64..50.0, s in 0.01f64..10.0) {
            let lhs = (2.0 * s * cv).sqrt() + (2.0 * s * dv).sqrt();
            let rhs = 2.0 * (s * (cv + dv)).sqrt();
            prop_assert!(lhs <= rhs * (1.0 + 1e-12));
        }

        #[test]
        fn bounds_monotone(eps in 0.0f64..5.0, de in 0.0f64..1.0, i in 0.0f64..1.0, di in 0.0f64..1.0, b in 0.0f64..1.0, db in 0.0f64..1.0) {
            let s = sg(1.5);
            let lo = bound_corollary_kl(s, eps, &[i; 3], b).unwrap().total;
            prop_assert!(bound_corollary_kl(s, eps + de, &[i; 3], b).unwrap().total >= lo);
            prop_assert!(bound_corollary_kl(s, eps, &[i + di; 3], b).unwrap().total >= lo);
            prop_assert!(bound_corollary_kl(s, eps, &[i; 3], b + db).unwrap().total >= lo);
            let e = eps.min(LN_2 - 1e-9) * 0.5;
            let lo = bound_corollary_js(s, e, &[i; 3], b).unwrap().total;
            prop_assert!(bound_corollary_js(s, (e + de).min(LN_2), &[i; 3], b).unwrap().total >= lo);
            prop_assert!(bound_corollary_js(s, e, &[i + di; 3], b + db).unwrap().total >= lo);
        }

        #[test]
        fn merged_theorem1_dominates_unmerged(kt in 0.0f64..2.0, kr in 0.0f64..2.0, i in 0.0f64..1.0) {
            let s = sg(1.5);
            let aux = AuxiliaryTerms { kl_test: vec![kt; 2], kl_train: vec![kr; 2], epsilon: 0.0 };
            let a = bound_theorem1(s, &[i; 2], &aux, 0.0).unwrap().total;
            let b = bound_theorem1_merged(s, &[i; 2], &aux, 0.0).unwrap().total;
            prop_assert!(a <= b * (1.0 + 1e-12));
        }
    }
}
