//! Library routines checked against independent numerical oracles.

mod common;

use common::{normal_pdf, simpson, simpson_pieces};
use metagap::env::{epsilon_js, EnvironmentSpec, JsMode, Task};
use metagap::gaps::{meta_population_loss, MCBudget, Pipeline};
use metagap::learn::{
    population_loss, truncated_square_mean, BaseLearnerSpec, LossSpec, MetaLearnerSpec, PopulationMode,
};
use metagap::rng::stream;
use nalgebra::DVector;

#[test]
fn closed_form_population_loss_matches_quadrature() {
    let env = EnvironmentSpec::gaussian_mean(0.0, 0.5, 1.1).unwrap();
    for &(w, tau, c) in &[(0.0, 0.0, 1.5), (0.7, -0.3, 1.5), (2.0, 0.0, 0.5), (-1.0, 3.0, 2.0), (0.1, 0.2, 0.05)] {
        let loss = LossSpec::new(c).unwrap();
        let got = population_loss(
            &DVector::from_element(1, w),
            &Task::Mean { tau },
            &env,
            &loss,
            PopulationMode::ClosedForm1D,
            1,
            &mut stream(0),
        )
        .unwrap();
        let f = |z: f64| ((w - z) * (w - z)).min(c * c) * normal_pdf(z, tau, 1.1);
        let sd = 1.1f64.sqrt();
        let breaks = [tau - 12.0 * sd, w - c, w + c, tau + 12.0 * sd];
        let mut breaks = breaks.to_vec();
        breaks.sort_by(f64::total_cmp);
        let oracle = simpson_pieces(&f, &breaks, 1e-13);
        assert!((got - oracle).abs() < 1e-8, "w={w} tau={tau} c={c}: {got} vs {oracle}");
    }
}

#[test]
fn truncated_square_mean_matches_quadrature_over_offsets() {
    for &(mean, var, c) in &[(0.0, 1.0, 1.0), (3.0, 0.2, 1.5), (-0.4, 4.0, 0.7)] {
        let f = |x: f64| (x * x).min(c * c) * normal_pdf(x, mean, var);
        let sd = var.sqrt();
        let mut breaks = vec![mean - 12.0 * sd, -c, c, mean + 12.0 * sd];
        breaks.sort_by(f64::total_cmp);
        let oracle = simpson_pieces(&f, &breaks, 1e-13);
        assert!((truncated_square_mean(mean, var, c) - oracle).abs() < 1e-8);
    }
}

#[test]
fn meta_population_loss_with_sample_mean_learner() {
    // α = 1 ⇒ W is the sample mean and W - Z ~ N(0, ν²(1 + 1/m)) for a fresh Z;
    // the expected loss is checked by a double integral over (W, Z).
    let (nu_sq, m, c) = (1.1, 6usize, 1.5);
    let p = Pipeline::new(
        EnvironmentSpec::gaussian_mean(0.0, 0.5, nu_sq).unwrap(),
        BaseLearnerSpec::ConvexCombination { alpha: 1.0 },
        MetaLearnerSpec::DatasetMean,
        LossSpec::new(c).unwrap(),
        4,
        m,
    )
    .unwrap();
    let tau = 0.8;
    let var_w = nu_sq / m as f64;
    let inner = |w: f64| truncated_square_mean(w - tau, nu_sq, c);
    let outer = |w: f64| inner(w) * normal_pdf(w, tau, var_w);
    let sd = var_w.sqrt();
    let oracle = simpson(&outer, tau - 12.0 * sd, tau + 12.0 * sd, 1e-13);
    let closed = truncated_square_mean(0.0, nu_sq * (1.0 + 1.0 / m as f64), c);
    assert!((oracle - closed).abs() < 1e-8);

    let budget = MCBudget {
        outer_trials: 1,
        inner_trials: 20_000,
        test_samples: 1,
        seed: 0,
    };
    let u = DVector::from_element(1, -5.0);
    let est = meta_population_loss(&p, &u, &Task::Mean { tau }, &budget, &mut stream(11)).unwrap();
    assert!((est.mean - oracle).abs() < 3.0 * est.std_err, "{est:?} vs {oracle}");
}

/// `E_δ JS(N(0, s²) ‖ N(δ, s²))` with `δ ~ N(0, 2ν̄²)` by nested quadrature.
fn js_oracle(nu_bar_sq: f64, s_sq: f64) -> f64 {
    let s = s_sq.sqrt();
    let js = |delta: f64| {
        let f = |z: f64| {
            let r = (z * z - (z - delta) * (z - delta)) / (2.0 * s_sq);
            let log_mix = std::f64::consts::LN_2 - (r.max(0.0) + (-r.abs()).exp().ln_1p());
            normal_pdf(z, 0.0, s_sq) * log_mix
        };
        simpson(&f, -12.0 * s + delta.min(0.0), 12.0 * s + delta.max(0.0), 1e-12)
    };
    let sd = (2.0 * nu_bar_sq).sqrt();
    simpson(&|d: f64| js(d) * normal_pdf(d, 0.0, 2.0 * nu_bar_sq), -10.0 * sd, 10.0 * sd, 1e-10)
}

#[test]
fn monte_carlo_js_matches_quadrature() {
    for &(nu_bar_sq, m) in &[(0.5, 1usize), (0.05, 1), (0.3, 6)] {
        let env = EnvironmentSpec::gaussian_mean(1.0, nu_bar_sq, 1.1).unwrap();
        // the sample mean is sufficient, so m samples act like one with variance ν²/m
        let oracle = js_oracle(nu_bar_sq, 1.1 / m as f64);
        let est = epsilon_js(&env, m, JsMode::MonteCarlo, 200_000, &mut stream(5)).unwrap();
        assert!(
            (est.epsilon_js - oracle).abs() < 3.0 * est.std_err + 1e-6,
            "ν̄²={nu_bar_sq} m={m}: {} ± {} vs {oracle}",
            est.epsilon_js,
            est.std_err
        );
        let containment = epsilon_js(&env, m, JsMode::Lemma1, 1, &mut stream(0)).unwrap();
        assert!(oracle <= containment.epsilon_js);
    }
}
