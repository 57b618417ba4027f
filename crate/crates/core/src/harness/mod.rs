//! Configuration files, scenario runners and report files.
//!
//! A run writes up to three files into the output directory:
//! `results.csv` (the numbers), `fig2.svg` (sweeps only) and `report.txt`.

pub mod config;
pub mod plot;
pub mod report;
pub mod scenario;

use std::path::{Path, PathBuf};

pub use config::{fig2_defaults, mean_defaults, parse_range, EstimatorConfig, ScenarioConfig, SweepConfig};
pub use scenario::{
    bound_inputs, run_mean_estimation_study, run_scenario, run_sweep, run_sweep_with, BoundInputs, StudyRow,
    SweepRow, SWEEP_HEADER,
};

use crate::error::Result;

pub const RESULTS_FILE: &str = "results.csv";
pub const PLOT_FILE: &str = "fig2.svg";
pub const REPORT_FILE: &str = "report.txt";

/// Paths of the files a run produced.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outputs {
    pub results: PathBuf,
    pub plot: Option<PathBuf>,
    pub report: PathBuf,
}

/// Write sweep rows; the plot is only drawn for two or more rows.
pub fn write_sweep_outputs(dir: &Path, cfg: &ScenarioConfig, rows: &[SweepRow]) -> Result<Outputs> {
    let results = dir.join(RESULTS_FILE);
    report::write_file(&results, &report::sweep_csv(rows)?)?;
    let plot = if rows.len() >= 2 {
        let parameter = cfg.sweep.as_ref().map_or("value", |s| s.parameter.as_str());
        let path = dir.join(PLOT_FILE);
        report::write_file(&path, &plot::sweep_svg(rows, parameter))?;
        Some(path)
    } else {
        None
    };
    let rep = dir.join(REPORT_FILE);
    report::write_file(&rep, &report::sweep_report(cfg, rows))?;
    Ok(Outputs {
        results,
        plot,
        report: rep,
    })
}

pub fn write_study_outputs(dir: &Path, cfg: &ScenarioConfig, rows: &[StudyRow]) -> Result<Outputs> {
    let results = dir.join(RESULTS_FILE);
    report::write_file(&results, &report::study_csv(rows)?)?;
    let rep = dir.join(REPORT_FILE);
    report::write_file(&rep, &report::study_report(cfg, rows))?;
    Ok(Outputs {
        results,
        plot: None,
        report: rep,
    })
}
