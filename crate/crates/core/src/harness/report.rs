//! CSV and plain-text outputs.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

use super::config::ScenarioConfig;
use super::scenario::{StudyRow, SweepRow, SWEEP_HEADER};

/// Serialize sweep rows. Floats use the shortest round-trip form, so equal
/// rows give equal bytes.
pub fn sweep_csv(rows: &[SweepRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(SWEEP_HEADER)?;
    for row in rows {
        row.check_finite()?;
        let mut rec: Vec<String> = row.values().iter().map(|v| v.to_string()).collect();
        rec.push(row.seed.to_string());
        w.write_record(&rec)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::Numerical(format!("csv buffer: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn study_csv(rows: &[StudyRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::Numerical(format!("csv buffer: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Checks applied to every sweep row, as `(label, passed)` pairs.
pub fn row_checks(row: &SweepRow) -> Vec<(&'static str, bool)> {
    let tol = 3.0 * row.abs_avg_gap_se;
    vec![
        (
            "avg_abs <= abs_avg",
            row.avg_abs_gap <= row.abs_avg_gap + 3.0 * row.avg_abs_gap_se.max(row.abs_avg_gap_se),
        ),
        ("bound_kl >= abs_avg - 3se", row.bound_kl >= row.abs_avg_gap - tol),
        ("bound_js >= abs_avg - 3se", row.bound_js >= row.abs_avg_gap - tol),
    ]
}

fn table(rows: &[SweepRow], parameter: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:>10} {:>19} {:>19} {:>9} {:>9} {:>8} {:>8} {:>8} {:>8}",
        parameter, "|gap|^avg (se)", "|gap^avg| (se)", "bound_kl", "bound_js", "eps_kl", "eps_js", "I(U;S)", "B"
    );
    for r in rows {
        let _ = writeln!(
            s,
            "{:>10.4} {:>10.5} ({:.5}) {:>10.5} ({:.5}) {:>9.4} {:>9.4} {:>8.4} {:>8.4} {:>8.4} {:>8.4}",
            r.swept_value,
            r.abs_avg_gap,
            r.abs_avg_gap_se,
            r.avg_abs_gap,
            r.avg_abs_gap_se,
            r.bound_kl,
            r.bound_js,
            r.epsilon_kl,
            r.epsilon_js,
            r.mi_hyper,
            r.b_term
        );
    }
    s
}

/// Human-readable summary of a sweep or a single scenario.
pub fn sweep_report(cfg: &ScenarioConfig, rows: &[SweepRow]) -> String {
    let parameter = cfg.sweep.as_ref().map_or("value", |s| s.parameter.as_str());
    let mut s = String::new();
    let b = &cfg.budget;
    let _ = writeln!(
        s,
        "seed {}  outer {}  inner {}  test samples {}",
        b.seed, b.outer_trials, b.inner_trials, b.test_samples
    );
    let _ = writeln!(s, "N = {}  m = {}  c = {}", cfg.n_tasks, cfg.m, cfg.loss.c);
    let _ = writeln!(s);
    s.push_str(&table(rows, parameter));
    let _ = writeln!(s);
    let mut failures = 0;
    for r in rows {
        for (label, ok) in row_checks(r) {
            if !ok {
                failures += 1;
                let _ = writeln!(s, "check failed at {parameter} = {}: {label}", r.swept_value);
            }
        }
    }
    if failures == 0 {
        let _ = writeln!(s, "all per-row checks passed ({} rows)", rows.len());
    }
    s
}

pub fn study_report(cfg: &ScenarioConfig, rows: &[StudyRow]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "N = {}  m = {}  c = {}  nu_bar_sq = {}  nu_sq = {}",
        cfg.n_tasks,
        cfg.m,
        cfg.loss.c,
        cfg.environment.nu_bar_sq(),
        cfg.environment.nu_sq()
    );
    let _ = writeln!(s);
    let _ = writeln!(
        s,
        "{:<20} {:>14} {:>14} {:>10} {:>8}  ok",
        "quantity", "closed form", "other route", "diff", "tol"
    );
    for r in rows {
        let _ = writeln!(
            s,
            "{:<20} {:>14.8} {:>14.8} {:>10.2e} {:>8.0e}  {}",
            r.quantity,
            r.closed_form,
            r.estimate,
            r.abs_diff,
            r.tolerance,
            if r.pass { "yes" } else { "NO" }
        );
    }
    s
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}
