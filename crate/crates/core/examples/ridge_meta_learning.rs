//! Learn a ridge bias from a meta-training set and compare the resulting
//! test-task loss with an unbiased learner.

use metagap::env::{sample_dataset, sample_meta_dataset, sample_task, sample_tasks, EnvironmentSpec};
use metagap::learn::{fit_base, fit_meta, population_loss, BaseLearnerSpec, LossSpec, MetaLearnerSpec, PopulationMode};
use metagap::rng::stream;
use nalgebra::DVector;

fn main() -> metagap::Result<()> {
    let mut rng = stream(5);
    let env = EnvironmentSpec::linear_regression(vec![2.0, 3.0], 0.5, 1.1)?;
    let base = BaseLearnerSpec::Ridge { lambda: 2.0 };
    let loss = LossSpec::new(1.5)?;

    let tasks = sample_tasks(&env, 4, &mut rng);
    let meta = sample_meta_dataset(&env, &tasks, 6, &mut rng)?;
    let u = fit_meta(&MetaLearnerSpec::RidgeBiasClosedForm, &meta, &base)?;
    println!("learned bias u = [{:.3}, {:.3}]", u[0], u[1]);

    let zero = DVector::zeros(2);
    let (mut learned, mut plain) = (0.0, 0.0);
    let trials = 200;
    for _ in 0..trials {
        let task = sample_task(&env, &mut rng);
        let s = sample_dataset(&env, &task, 6, &mut rng)?;
        for (bias, acc) in [(&u, &mut learned), (&zero, &mut plain)] {
            let w = fit_base(&base, &s, bias)?;
            *acc += population_loss(&w, &task, &env, &loss, PopulationMode::MonteCarlo, 500, &mut rng)?;
        }
    }
    println!("mean test loss with learned bias {:.4}", learned / trials as f64);
    println!("mean test loss with zero bias    {:.4}", plain / trials as f64);
    Ok(())
}
