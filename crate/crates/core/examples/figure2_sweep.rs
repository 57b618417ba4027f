//! A reduced-budget version of the ridge sweep over the task variance,
//! written to `out/example_sweep`. Pass `--full` for the default budgets.

use metagap::harness::{fig2_defaults, run_sweep_with, write_sweep_outputs};

fn main() -> metagap::Result<()> {
    let mut cfg = fig2_defaults();
    if !std::env::args().any(|a| a == "--full") {
        cfg.budget.outer_trials = 150;
        cfg.budget.inner_trials = 20;
        cfg.budget.test_samples = 500;
        cfg.estimators.mi_trials = 2;
        cfg.estimators.tuples_per_test_task = 1;
        cfg.estimators.mi_samples = 3000;
        cfg.estimators.js_trials = 20_000;
        if let Some(s) = cfg.sweep.as_mut() {
            s.values = vec![0.1, 0.4, 0.7, 1.0];
        }
    }
    let rows = run_sweep_with(&cfg, |i, r| {
        eprintln!(
            "point {}: nu_bar_sq {:.2}  |gap|^avg {:.4}  KL {:.3}  JS {:.3}",
            i + 1,
            r.swept_value,
            r.abs_avg_gap,
            r.bound_kl,
            r.bound_js
        )
    })?;
    let out = write_sweep_outputs("out/example_sweep".as_ref(), &cfg, &rows)?;
    println!("wrote {}", out.results.display());
    Ok(())
}
