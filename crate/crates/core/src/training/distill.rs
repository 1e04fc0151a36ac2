//! Query-only student retriever trained to match the answer-aware proposal
//! `r_φ(d | [q; a★])` on its truncated support.

use serde::{Deserialize, Serialize};

use super::optimizer::{AdamConfig, AdamState};
use super::reindex::hybrid_proposal;
use crate::error::{ensure, Result};
use crate::math::{argmax, axpy, pairwise_sum};
use crate::mcqa::McqaInstance;
use crate::retrieval::{kl_divergence, softmax_on_support, TruncatedDistribution};
use crate::scoring::{Collection, PairScorer, QueryRecord, ScoreModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DistillConfig {
    pub steps: usize,
    pub support: usize,
    pub hybrid_tau: f64,
    pub optimizer: AdamConfig,
}

impl Default for DistillConfig {
    fn default() -> Self {
        Self {
            steps: 100,
            support: 32,
            hybrid_tau: 5.0,
            optimizer: AdamConfig {
                lr: 5e-3,
                ..AdamConfig::default()
            },
        }
    }
}

/// `KL(r ‖ p_θ)` on the teacher's support and its gradient
/// `Σ_d (p_θ(d|q) − r(d)) ∇f_θ(d, q)`.
pub fn distillation_loss_and_grad(
    teacher: &TruncatedDistribution,
    student: &impl PairScorer,
    query: &QueryRecord,
) -> Result<(f64, Vec<f64>)> {
    let mut scores = Vec::with_capacity(teacher.len());
    let mut grads = Vec::with_capacity(teacher.len());
    for &d in &teacher.support {
        let (f, g) = student.score_and_grad(query, d)?;
        scores.push(f);
        grads.push(g);
    }
    let p = softmax_on_support(teacher.support.clone(), scores)?;
    let loss = kl_divergence(teacher, &p)?;
    let mut grad = vec![0.0; student.num_params()];
    for (i, g) in grads.iter().enumerate() {
        axpy(&mut grad, p.log_probs[i].exp() - teacher.log_probs[i].exp(), g);
    }
    Ok((loss, grad))
}

/// Teacher proposals `r_φ(d | [q; a★])` with `retriever` as checkpoint term.
pub fn teacher_proposals(
    instances: &[McqaInstance],
    collection: &Collection,
    retriever: Option<&ScoreModel>,
    support: usize,
    tau: f64,
) -> Result<Vec<TruncatedDistribution>> {
    let support = support.min(collection.len());
    instances
        .iter()
        .map(|inst| {
            let q = &inst.option_queries[inst.correct];
            let ckpt = retriever.map(|m| m.score_all(q, collection)).transpose()?;
            hybrid_proposal(
                collection,
                &inst.question,
                &inst.options[inst.correct],
                ckpt.as_deref(),
                support,
                tau,
            )
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct DistillOutcome {
    pub student: ScoreModel,
    /// Mean KL before each step, then once more after the last step.
    pub kl_trace: Vec<f64>,
}

/// Full-batch Adam on the mean distillation loss.
pub fn run_distillation(
    cfg: &DistillConfig,
    instances: &[McqaInstance],
    teachers: &[TruncatedDistribution],
    collection: &Collection,
    student: ScoreModel,
) -> Result<DistillOutcome> {
    ensure!(!instances.is_empty(), "nothing to distill");
    ensure!(instances.len() == teachers.len(), "one teacher per question required");
    let queries: Vec<QueryRecord> = instances.iter().map(McqaInstance::question_query).collect();
    let mut student = student;
    let mut state = AdamState::new(student.num_params());
    let mut kl_trace = Vec::with_capacity(cfg.steps + 1);
    let n = instances.len() as f64;
    for step in 0..=cfg.steps {
        let scorer = student.bind(collection);
        let mut losses = Vec::with_capacity(instances.len());
        let mut grad = vec![0.0; student.num_params()];
        for (t, q) in teachers.iter().zip(&queries) {
            let (l, g) = distillation_loss_and_grad(t, &scorer, q)?;
            losses.push(l);
            axpy(&mut grad, 1.0 / n, &g);
        }
        kl_trace.push(pairwise_sum(&losses) / n);
        if step < cfg.steps {
            cfg.optimizer.step(&mut student.params, &grad, &mut state)?;
        }
    }
    Ok(DistillOutcome { student, kl_trace })
}

/// Fraction of questions whose top-scored document over the whole corpus,
/// from the question alone, is the evidence document.
pub fn recall_at_1(
    student: &ScoreModel,
    instances: &[McqaInstance],
    evidence: &[usize],
    collection: &Collection,
) -> Result<f64> {
    ensure!(
        instances.len() == evidence.len() && !instances.is_empty(),
        "one evidence id per question required"
    );
    let mut hits = 0;
    for (inst, &ev) in instances.iter().zip(evidence) {
        let scores = student.score_all(&inst.question_query(), collection)?;
        if argmax(&scores) == Some(ev) {
            hits += 1;
        }
    }
    Ok(hits as f64 / instances.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gradients::{finite_difference, max_relative_error};
    use crate::scoring::{tokenize, Corpus};

    fn setup() -> (Collection, QueryRecord, ScoreModel) {
        let c = Collection::with_defaults(
            Corpus::from_texts([
                "aortic stenosis confirmed",
                "mitral valve not",
                "aortic valve",
                "chest pain valve",
            ])
            .unwrap(),
        )
        .unwrap();
        let q = QueryRecord::new(tokenize("which valve stenosis"), None).unwrap();
        let m = ScoreModel::linear(vec!["confirmed".into(), "not".into()])
            .with_params(vec![0.3, -0.4, 0.2, 0.9, -0.5])
            .unwrap();
        (c, q, m)
    }

    #[test]
    fn matching_teacher_gives_zero() {
        let (c, q, m) = setup();
        let support = vec![2, 0, 3];
        let f: Vec<f64> = support.iter().map(|&d| m.score(&q, d, &c).unwrap()).collect();
        let teacher = softmax_on_support(support, f).unwrap();
        let (l, g) = distillation_loss_and_grad(&teacher, &m.bind(&c), &q).unwrap();
        assert!(l.abs() < 1e-12);
        assert!(g.iter().all(|x| x.abs() < 1e-10));
    }

    #[test]
    fn gradient_matches_fd() {
        let (c, q, m) = setup();
        let teacher = softmax_on_support(vec![0, 1, 2, 3], vec![2.0, -1.0, 0.5, 0.0]).unwrap();
        let (l, g) = distillation_loss_and_grad(&teacher, &m.bind(&c), &q).unwrap();
        assert!(l >= 0.0);
        let fd = finite_difference(
            |t| {
                let s = m.clone().with_params(t.to_vec()).unwrap();
                distillation_loss_and_grad(&teacher, &s.bind(&c), &q).unwrap().0
            },
            &m.params,
            1e-6,
        )
        .unwrap();
        assert!(max_relative_error(&g, &fd, 1e-4) < 1e-5);
    }
}
