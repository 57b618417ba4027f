//! Closed-form KL and JS bounds for mean estimation as the task variance
//! grows, and their limit for many tasks and samples.

use metagap::bounds::{closed_form_bound_mean_estimation, closed_form_bound_with_epsilon, Relatedness};

fn main() -> metagap::Result<()> {
    let (c, alpha, m, n) = (1.5, 0.5, 6, 4);
    println!("nu_bar_sq   KL bound   JS bound   B");
    for i in 0..=5 {
        let nu_bar_sq = 0.2 * i as f64;
        let kl = closed_form_bound_mean_estimation(c, alpha, m, n, nu_bar_sq, 1.1, Relatedness::Kl)?;
        let js = closed_form_bound_mean_estimation(c, alpha, m, n, nu_bar_sq, 1.1, Relatedness::Js)?;
        println!("{nu_bar_sq:>9.1}  {:>9.4}  {:>9.4}  {:.4}", kl.total, js.total, kl.b);
    }

    let eps = 1.0;
    let big = 1_000_000;
    let limit = closed_form_bound_with_epsilon(1.0, alpha, big, big, eps, Relatedness::Kl)?;
    println!(
        "\nN = m = 1e6, eps = 1: bound {:.5}, c^2 sqrt(eps/2) = {:.5}",
        limit.total,
        (eps / 2.0).sqrt()
    );
    Ok(())
}
