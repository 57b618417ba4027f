use metagap::harness::{
    fig2_defaults, mean_defaults, report::sweep_csv, run_mean_estimation_study, run_scenario, run_sweep, write_sweep_outputs,
    ScenarioConfig, SweepConfig, SWEEP_HEADER,
};
use metagap::gaps::MCBudget;
use metagap::learn::BaseLearnerSpec;

fn small(mut cfg: ScenarioConfig, outer: usize) -> ScenarioConfig {
    cfg.budget = MCBudget {
        outer_trials: outer,
        inner_trials: 20,
        test_samples: 300,
        seed: 7,
    };
    cfg.estimators.mi_trials = 2;
    cfg.estimators.tuples_per_test_task = 1;
    cfg.estimators.mi_samples = 2000;
    cfg.estimators.js_trials = 20_000;
    cfg
}

#[test]
fn golden_csv_header() {
    assert_eq!(
        SWEEP_HEADER.join(","),
        "swept_value,abs_avg_gap,abs_avg_gap_se,avg_abs_gap,avg_abs_gap_se,bound_kl,bound_js,\
         epsilon_kl,epsilon_js,epsilon_js_se,mi_hyper,b_term,seed"
    );
    let row = run_scenario(&small(mean_defaults(), 20), 0.5).unwrap();
    let csv = sweep_csv(&[row]).unwrap();
    assert_eq!(csv.lines().next().unwrap(), SWEEP_HEADER.join(","));
    assert_eq!(csv.lines().count(), 2);
}

#[test]
fn degenerate_environment_keeps_only_hyperparameter_information() {
    // identical tasks and a data-independent base-learner: only the bias
    // fitted to the meta-training data can overfit
    let mut cfg = small(mean_defaults(), 200).with_param("nu_bar_sq", 0.0).unwrap();
    cfg.base = BaseLearnerSpec::ConvexCombination { alpha: 0.0 };
    let row = run_scenario(&cfg, 0.0).unwrap();
    assert!(row.abs_avg_gap > 0.0 && row.abs_avg_gap <= row.bound_kl, "{row:?}");
    assert_eq!(row.epsilon_kl, 0.0);
    assert_eq!(row.epsilon_js, 0.0);
    assert_eq!(row.b_term, 0.0);
    // only the hyperparameter information is left in the bounds
    let c2 = cfg.loss.c * cfg.loss.c;
    let hyper = 0.5 * (4.0f64 / 3.0).ln();
    assert!((row.bound_kl - c2 / 2f64.sqrt() * hyper.sqrt()).abs() < 1e-12);
    assert!((row.bound_js - c2 * hyper.sqrt()).abs() < 1e-12);
}

#[test]
fn scenario_is_deterministic_and_dominated() {
    let cfg = small(fig2_defaults(), 40).with_param("nu_bar_sq", 0.5).unwrap();
    let a = run_scenario(&cfg, 0.5).unwrap();
    let b = run_scenario(&cfg, 0.5).unwrap();
    assert_eq!(sweep_csv(std::slice::from_ref(&a)).unwrap(), sweep_csv(&[b]).unwrap());
    assert!(a.bound_kl >= a.abs_avg_gap - 3.0 * a.abs_avg_gap_se);
    assert!(a.bound_js >= a.abs_avg_gap - 3.0 * a.abs_avg_gap_se);
    assert!(a.avg_abs_gap <= a.abs_avg_gap);
}

#[test]
fn repeated_sweep_value_gives_identical_rows() {
    let mut cfg = small(fig2_defaults(), 10);
    cfg.sweep = Some(SweepConfig {
        parameter: "nu_bar_sq".into(),
        values: vec![0.0, 0.0],
    });
    let rows = run_sweep(&cfg).unwrap();
    assert_eq!(rows[0], rows[1]);
}

#[test]
fn doubled_budget_agrees_within_noise() {
    let values = vec![0.2, 0.6, 1.0];
    let run = |outer| {
        let mut cfg = small(mean_defaults(), outer);
        cfg.sweep = Some(SweepConfig {
            parameter: "nu_bar_sq".into(),
            values: values.clone(),
        });
        run_sweep(&cfg).unwrap()
    };
    let (half, full) = (run(300), run(600));
    for (h, f) in half.iter().zip(&full) {
        let tol = 3.0 * (h.abs_avg_gap_se.powi(2) + f.abs_avg_gap_se.powi(2)).sqrt();
        assert!((h.abs_avg_gap - f.abs_avg_gap).abs() <= tol, "{h:?}\n{f:?}");
        let tol = 3.0 * (h.avg_abs_gap_se.powi(2) + f.avg_abs_gap_se.powi(2)).sqrt();
        assert!((h.avg_abs_gap - f.avg_abs_gap).abs() <= tol);
    }
}

#[test]
fn mean_study_rows() {
    let mut cfg = mean_defaults();
    cfg.estimators.mi_trials = 1;
    let rows = run_mean_estimation_study(&cfg).unwrap();
    let names: Vec<&str> = rows.iter().map(|r| r.quantity.as_str()).collect();
    assert_eq!(
        names,
        ["mi_hyper_ksg", "mi_model_ksg", "bound_kl_assembled", "bound_js_assembled", "bound_kl_limit"]
    );
    for r in &rows {
        assert!(r.pass, "{r:?}");
    }
    assert!(run_mean_estimation_study(&fig2_defaults()).is_err());
}

#[test]
fn sweep_outputs_are_written() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small(mean_defaults(), 20);
    cfg.sweep = Some(SweepConfig {
        parameter: "alpha".into(),
        values: vec![0.2, 0.8],
    });
    let rows = run_sweep(&cfg).unwrap();
    let out = write_sweep_outputs(dir.path(), &cfg, &rows).unwrap();
    let csv = std::fs::read_to_string(&out.results).unwrap();
    assert_eq!(csv, sweep_csv(&rows).unwrap());
    let svg = std::fs::read_to_string(out.plot.unwrap()).unwrap();
    assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
    assert!(svg.contains("KL bound") && svg.contains("alpha"));
    let report = std::fs::read_to_string(&out.report).unwrap();
    assert!(report.contains("alpha"));
}

#[test]
fn unwritable_output_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let cfg = small(mean_defaults(), 5);
    let row = run_scenario(&cfg, 0.5).unwrap();
    let err = write_sweep_outputs(&blocker.join("sub"), &cfg, &[row]).unwrap_err();
    assert!(!err.is_validation());
    assert!(err.to_string().contains("file"));
}
