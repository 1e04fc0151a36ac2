//! Compare the sampled objective with the exact bounds on a random instance.

use vod::bounds::{evaluate_vod, exact_elbo, exact_marginal_log_likelihood, exact_rvb};
use vod::latent::{random_instance, InstanceShape};
use vod::sampling::priority_sample;

fn main() -> vod::Result<()> {
    let shape = InstanceShape {
        n_docs: 24,
        support: 16,
        ..InstanceShape::default()
    };
    let inst = random_instance(shape, 5)?;
    let (m, r) = (&inst.model, &inst.proposal);
    println!(
        "log p(a|q) on the support = {:.5}",
        exact_marginal_log_likelihood(m, &r.support)?
    );
    println!("ELBO                      = {:.5}", exact_elbo(m, r)?);

    let dist = r.to_discrete()?;
    for alpha in [0.0, 0.5, 1.0] {
        let exact = exact_rvb(alpha, m, r)?;
        let mut line = format!("alpha {alpha:.1}: RVB {exact:.5} |");
        for k in [2, 4, 8, 16] {
            let mean: f64 = (0..200)
                .map(|s| evaluate_vod(m, r, &priority_sample(&dist, k, s)?, alpha).map(|b| b.value))
                .sum::<vod::Result<f64>>()?
                / 200.0;
            line.push_str(&format!(" K={k}: {mean:.5}"));
        }
        println!("{line}");
    }
    Ok(())
}
