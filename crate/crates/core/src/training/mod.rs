//! End-to-end training of the multiple-choice reader and retriever.

mod distill;
mod models;
mod optimizer;
mod reindex;
mod schedule;
pub mod synthetic;
mod trainer;

pub use distill::{
    distillation_loss_and_grad, recall_at_1, run_distillation, teacher_proposals, DistillConfig, DistillOutcome,
};
pub use models::{frequent_terms, ModelConfig, ModelKind, Models};
pub use optimizer::{AdamConfig, AdamState};
pub use reindex::{hybrid_proposal, reindex, RoundCache};
pub use schedule::AlphaSchedule;
pub use trainer::{
    eval_cache, evaluate, option_kl, run_training, train_step, EvalResult, MetricsTrace, OptimizerState, RetrieverMode,
    StepMetrics, TrainConfig, TrainOutcome,
};
