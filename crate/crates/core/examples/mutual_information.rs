//! KSG and Gaussian plug-in estimates of the hyperparameter and model
//! information terms, next to the exact values for mean estimation.

use metagap::env::{sample_task, sample_tasks};
use metagap::harness::mean_defaults;
use metagap::info::{
    mi_hyper_dataset_closed_form, mi_hyper_dataset_empirical, mi_model_sample_closed_form, mi_model_sample_empirical,
    MiEstimator, MiSampling,
};
use metagap::rng::stream;

fn main() -> metagap::Result<()> {
    let p = mean_defaults().pipeline()?;
    let mut rng = stream(9);
    let task = sample_task(&p.env, &mut rng);
    let tasks_train = sample_tasks(&p.env, p.n_tasks, &mut rng);

    println!("exact I(U;S_i)  {:.4}", mi_hyper_dataset_closed_form(p.n_tasks)?.nats);
    println!("exact I(W;Z_j)  {:.4}", mi_model_sample_closed_form(0.5, p.m, p.n_tasks)?.nats);
    for estimator in [MiEstimator::Ksg, MiEstimator::GaussianPlugin] {
        let sampling = MiSampling {
            tuples: 2,
            samples: 5000,
            estimator,
            ..MiSampling::default()
        };
        let hyper = mi_hyper_dataset_empirical(&p, &sampling, &mut rng)?;
        let model = mi_model_sample_empirical(&p, &task, &tasks_train, &sampling, &mut rng)?;
        println!(
            "{estimator:?}: I(U;S_i) {:.4} ± {:.4}   I(W;Z_j) {:.4}",
            hyper.nats, hyper.std_err, model.nats
        );
    }
    Ok(())
}
