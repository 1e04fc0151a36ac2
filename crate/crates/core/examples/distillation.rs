//! Train briefly, then distill the answer-aware proposal into a query-only
//! student and report recall@1 of the planted evidence.

use vod::training::synthetic::{generate, SyntheticConfig};
use vod::training::{
    recall_at_1, run_distillation, run_training, teacher_proposals, DistillConfig, ModelConfig, Models, TrainConfig,
};

fn main() -> vod::Result<()> {
    let task = generate(&SyntheticConfig::default(), 1)?;
    let c = &task.collection;
    let mc = ModelConfig {
        vocab: Some(task.markers.clone()),
        ..Default::default()
    };
    let cfg = TrainConfig {
        support: 32,
        ..Default::default()
    };
    let trained = run_training(&cfg, &task.train, &[], c, Models::from_config(&mc, c, 1)?, 1)?.models;

    let dc = DistillConfig::default();
    let teachers = teacher_proposals(&task.train, c, Some(&trained.retriever), dc.support, dc.hybrid_tau)?;
    let student = mc.build(c, 9)?;
    let before = recall_at_1(&student, &task.eval, &task.eval_evidence, c)?;
    let out = run_distillation(&dc, &task.train, &teachers, c, student)?;
    let after = recall_at_1(&out.student, &task.eval, &task.eval_evidence, c)?;
    println!(
        "KL {:.4} -> {:.4}",
        out.kl_trace[0],
        out.kl_trace[out.kl_trace.len() - 1]
    );
    println!("recall@1 {before:.3} -> {after:.3}");
    Ok(())
}
