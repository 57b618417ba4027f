use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use metagap::gaps::Pipeline;
use metagap::harness::{self, ScenarioConfig, SweepConfig};
use metagap::info::{
    mi_hyper_dataset_closed_form, mi_hyper_dataset_empirical, mi_model_sample_closed_form,
    mi_model_sample_empirical, MIEstimate, MiSampling,
};
use metagap::env::{sample_task, sample_tasks};
use metagap::learn::BaseLearnerSpec;
use metagap::rng::stream;
use metagap::{Error, Result};

#[derive(Parser)]
#[command(name = "metagap", version, about = "Meta-generalization gaps and their information-theoretic bounds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario: gaps, relatedness, MI terms and bounds.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory (overrides the config).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sweep one numeric parameter and plot gaps and bounds.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        param: Option<String>,
        /// Evenly spaced values as `start:end:count`.
        #[arg(long)]
        values: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate the bounds. Mean-estimation configs also get the
    /// closed-form comparison table.
    Bounds {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Estimate one mutual information term with the KSG estimator.
    EstimateMi {
        #[arg(long, value_enum)]
        pipeline: PipelineKind,
        #[arg(long, value_enum)]
        target: Target,
        /// Simulated pairs.
        #[arg(short = 'n', default_value_t = 10_000)]
        n: usize,
        /// Neighbour count.
        #[arg(short = 'k', default_value_t = 5)]
        k: usize,
        /// Use this config's pipeline instead of the built-in defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum PipelineKind {
    Mean,
    Ridge,
}

#[derive(Clone, Copy, ValueEnum)]
enum Target {
    /// I(U; S_i | T_1..T_N)
    Hyper,
    /// I(W; Z_j | T, T_1..T_N)
    Model,
}

fn load(path: &PathBuf, seed: Option<u64>, out: Option<PathBuf>) -> Result<ScenarioConfig> {
    let mut cfg = ScenarioConfig::load(path)?;
    if let Some(s) = seed {
        cfg.budget.seed = s;
    }
    if out.is_some() {
        cfg.output = out;
    }
    Ok(cfg)
}

fn print_outputs(o: &harness::Outputs) {
    println!("wrote {}", o.results.display());
    if let Some(p) = &o.plot {
        println!("wrote {}", p.display());
    }
    println!("wrote {}", o.report.display());
}

fn simulate(cfg: ScenarioConfig) -> Result<()> {
    let row = harness::run_scenario(&cfg, cfg.environment.nu_bar_sq())?;
    let out = harness::write_sweep_outputs(&cfg.output_dir(), &cfg, std::slice::from_ref(&row))?;
    print!("{}", harness::report::sweep_report(&cfg, &[row]));
    print_outputs(&out);
    Ok(())
}

fn sweep(mut cfg: ScenarioConfig, param: Option<String>, values: Option<String>) -> Result<()> {
    if param.is_some() || values.is_some() {
        let current = cfg.sweep.take();
        let parameter = param
            .or_else(|| current.as_ref().map(|s| s.parameter.clone()))
            .unwrap_or_else(|| "nu_bar_sq".into());
        let values = match values {
            Some(v) => harness::parse_range(&v)?,
            None => current
                .map(|s| s.values)
                .ok_or_else(|| Error::invalid("values", "give --values or a [sweep] section"))?,
        };
        cfg.sweep = Some(SweepConfig { parameter, values });
        cfg.validate()?;
    }
    let total = cfg.sweep.as_ref().map_or(0, |s| s.values.len());
    let rows = harness::run_sweep_with(&cfg, |i, row| {
        eprintln!("[{}/{}] {} done: |gap|^avg = {:.5}", i + 1, total, row.swept_value, row.abs_avg_gap);
    })?;
    let out = harness::write_sweep_outputs(&cfg.output_dir(), &cfg, &rows)?;
    print!("{}", harness::report::sweep_report(&cfg, &rows));
    print_outputs(&out);
    Ok(())
}

fn bounds(cfg: ScenarioConfig) -> Result<()> {
    if matches!(cfg.base, BaseLearnerSpec::ConvexCombination { .. }) {
        let rows = harness::run_mean_estimation_study(&cfg)?;
        let out = harness::write_study_outputs(&cfg.output_dir(), &cfg, &rows)?;
        print!("{}", harness::report::study_report(&cfg, &rows));
        print_outputs(&out);
    } else {
        let b = harness::bound_inputs(&cfg)?;
        println!("epsilon_kl  {:.6}", b.epsilon_kl);
        println!("epsilon_js  {:.6} (se {:.6})", b.epsilon_js, b.epsilon_js_se);
        println!("I(U;S_i)    {:.6}", b.mi_hyper);
        println!("B           {:.6}", b.b_term);
        println!("KL bound    {:.6}", b.bound_kl);
        println!("JS bound    {:.6}", b.bound_js);
    }
    Ok(())
}

fn estimate_mi(kind: PipelineKind, target: Target, n: usize, k: usize, config: Option<PathBuf>, seed: u64) -> Result<()> {
    let cfg = match config {
        Some(path) => ScenarioConfig::load(path)?,
        None => match kind {
            PipelineKind::Mean => harness::mean_defaults(),
            PipelineKind::Ridge => harness::fig2_defaults(),
        },
    };
    let p: Pipeline = cfg.pipeline()?;
    match (kind, &p.base) {
        (PipelineKind::Mean, BaseLearnerSpec::ConvexCombination { .. })
        | (PipelineKind::Ridge, BaseLearnerSpec::Ridge { .. }) => {}
        _ => return Err(Error::invalid("pipeline", "does not match the config's base learner")),
    }
    let sampling = MiSampling {
        tuples: 1,
        samples: n,
        k,
        ..MiSampling::default()
    };
    let mut rng = stream(seed);
    let (est, exact): (MIEstimate, Option<f64>) = match target {
        Target::Hyper => {
            let exact = match p.base {
                BaseLearnerSpec::ConvexCombination { .. } => Some(mi_hyper_dataset_closed_form(p.n_tasks)?.nats),
                _ => None,
            };
            (mi_hyper_dataset_empirical(&p, &sampling, &mut rng)?, exact)
        }
        Target::Model => {
            let task = sample_task(&p.env, &mut rng);
            let tasks_train = sample_tasks(&p.env, p.n_tasks, &mut rng);
            let exact = match p.base {
                BaseLearnerSpec::ConvexCombination { alpha } => {
                    Some(mi_model_sample_closed_form(alpha, p.m, p.n_tasks)?.nats)
                }
                _ => None,
            };
            (mi_model_sample_empirical(&p, &task, &tasks_train, &sampling, &mut rng)?, exact)
        }
    };
    println!("ksg estimate  {:.6} nats (se {:.6}, n = {}, k = {k})", est.nats, est.std_err, est.n_samples);
    if let Some(v) = exact {
        println!("closed form   {v:.6} nats");
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate { config, seed, out } => simulate(load(&config, seed, out)?),
        Command::Sweep {
            config,
            param,
            values,
            seed,
            out,
        } => sweep(load(&config, seed, out)?, param, values),
        Command::Bounds { config, seed, out } => bounds(load(&config, seed, out)?),
        Command::EstimateMi {
            pipeline,
            target,
            n,
            k,
            config,
            seed,
        } => estimate_mi(pipeline, target, n, k, config, seed),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}
