//! Draw tasks and datasets from both environments and compare the exact
//! KL relatedness with Monte Carlo JS estimates.

use metagap::env::{epsilon_js, epsilon_kl, sample_dataset, sample_task, EnvironmentSpec, JsMode};
use metagap::rng::stream;

fn main() -> metagap::Result<()> {
    let mut rng = stream(11);
    let mean = EnvironmentSpec::gaussian_mean(0.0, 0.5, 1.1)?;
    let ridge = EnvironmentSpec::linear_regression(vec![2.0, 3.0], 0.5, 1.1)?;

    for env in [&mean, &ridge] {
        let task = sample_task(env, &mut rng);
        let s = sample_dataset(env, &task, 6, &mut rng)?;
        println!("{task:?}");
        println!("  first sample {:?}", s.sample(0));
    }

    println!("\n  m   eps_kl   eps_js(MC)   eps_js(KL/2)");
    for m in [1, 3, 6, 12] {
        let mc = epsilon_js(&ridge, m, JsMode::MonteCarlo, 20_000, &mut rng)?;
        let containment = epsilon_js(&ridge, m, JsMode::Lemma1, 0, &mut rng)?;
        println!(
            "{m:>3}  {:>7.4}  {:>7.4} ±{:.4}  {:>7.4}",
            epsilon_kl(&ridge, m),
            mc.epsilon_js,
            mc.std_err,
            containment.epsilon_js
        );
    }
    Ok(())
}
