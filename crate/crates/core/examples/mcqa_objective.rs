//! Multiple-choice objective: one retrieved document per option, the product
//! sample enumerated, and option probabilities from Monte-Carlo evaluation.

use vod::mcqa::DEFAULT_ENUMERATION_CAP as CAP;
use vod::mcqa::{exact_mcqa_rvb, format_prediction, mc_eval, mcqa_vod_step, random_mcqa, OptionRetrievalState};

fn main() -> vod::Result<()> {
    let r = random_mcqa(12, 4, 3)?;
    let c = &r.collection;
    let (reader, retriever) = (r.reader.bind(c), r.retriever.bind(c));
    let state = OptionRetrievalState::draw(r.proposals.clone(), 4, 1)?;
    for alpha in [0.0, 1.0] {
        let step = mcqa_vod_step(alpha, &state, &reader, &retriever, &r.instance, CAP, true)?;
        let exact = exact_mcqa_rvb(alpha, &reader, &retriever, &r.instance, &r.proposals, CAP)?;
        println!(
            "alpha {alpha}: sampled {:.4}, exact {exact:.4}, ess {:.1}, |grad| {:.3}",
            step.report.value,
            step.report.ess,
            step.gradient.reader_grad.iter().map(|g| g * g).sum::<f64>().sqrt()
        );
    }
    let probs = mc_eval(&r.instance, &reader, &retriever, &r.proposals, 4, 10, 0.0, 7, CAP)?;
    println!("correct option {}", r.instance.correct);
    println!("{}", format_prediction(&r.instance.qid, &probs)?);
    Ok(())
}
