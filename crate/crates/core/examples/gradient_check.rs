//! Exhaustive sampled gradient against central differences of the exact bound.

use vod::bounds::exact_rvb;
use vod::gradients::{evaluate_vod_gradient, finite_difference, max_relative_error};
use vod::latent::{random_instance, InstanceShape};
use vod::sampling::priority_sample;

fn main() -> vod::Result<()> {
    let inst = random_instance(InstanceShape::default(), 11)?;
    let (m, r) = (&inst.model, &inst.proposal);
    let full = priority_sample(&r.to_discrete()?, r.len(), 0)?;
    for alpha in [0.0, 0.5, 1.0] {
        let g = evaluate_vod_gradient(m, r, &full, alpha)?;
        let fd_reader = finite_difference(
            |t| exact_rvb(alpha, &m.with_reader_params(t), r).unwrap_or(f64::NAN),
            &m.reader_params,
            1e-6,
        )?;
        let fd_retriever = finite_difference(
            |t| exact_rvb(alpha, &m.with_retriever_params(t), r).unwrap_or(f64::NAN),
            &m.retriever_params,
            1e-6,
        )?;
        println!(
            "alpha {alpha}: reader rel err {:.2e}, retriever rel err {:.2e}",
            max_relative_error(&g.reader_grad, &fd_reader, 1e-4),
            max_relative_error(&g.retriever_grad, &fd_retriever, 1e-4)
        );
    }
    Ok(())
}
