//! Per-round proposal caches: the hybrid score
//! `f_φ = f_ckpt(d, q_j) + τ⁻¹(BM25(q, d) + β·BM25(a_j, d))` and its top-P
//! support for every option query.

use crate::error::{ensure, Result};
use crate::mcqa::McqaInstance;
use crate::retrieval::{build_support, softmax_on_support, TruncatedDistribution};
use crate::scoring::{beta_correction, hybrid_posterior_score, Collection, ScoreModel};

/// Frozen for a whole round.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundCache {
    /// `proposals[i][j]` is `r_φ(· | q_j)` for instance `i`, option `j`.
    pub proposals: Vec<Vec<TruncatedDistribution>>,
    /// Effective support size after clamping to the corpus size.
    pub support: usize,
    pub notices: Vec<String>,
}

/// Hybrid proposal for one query. `ckpt` scores every document for
/// `[q; a]`; `None` means the checkpoint term is identically zero.
pub fn hybrid_proposal(
    collection: &Collection,
    question: &[String],
    answer: &[String],
    ckpt: Option<&[f64]>,
    support: usize,
    tau: f64,
) -> Result<TruncatedDistribution> {
    let bm25_q = collection.index.score_all(question);
    hybrid_proposal_with(collection, &bm25_q, question.len(), answer, ckpt, support, tau)
}

fn hybrid_proposal_with(
    collection: &Collection,
    bm25_q: &[f64],
    len_q: usize,
    answer: &[String],
    ckpt: Option<&[f64]>,
    support: usize,
    tau: f64,
) -> Result<TruncatedDistribution> {
    let bm25_a = collection.index.score_all(answer);
    let beta = beta_correction(len_q, answer.len())?;
    let n = collection.len();
    let scores = (0..n)
        .map(|d| hybrid_posterior_score(ckpt.map_or(0.0, |c| c[d]), bm25_q[d], bm25_a[d], tau, beta))
        .collect::<Result<Vec<f64>>>()?;
    let ids = build_support(&scores, support)?;
    let on_support = ids.iter().map(|&d| scores[d]).collect();
    softmax_on_support(ids, on_support)
}

/// Rebuilds every proposal. `checkpoint` is the retriever snapshot, or
/// `None` in the first round.
pub fn reindex(
    collection: &Collection,
    instances: &[McqaInstance],
    checkpoint: Option<&ScoreModel>,
    support: usize,
    tau: f64,
) -> Result<RoundCache> {
    ensure!(support >= 1, "support size must be at least 1");
    let n = collection.len();
    let mut notices = Vec::new();
    let support = if support > n {
        notices.push(format!(
            "support size {support} exceeds corpus size {n}; clamped to {n}"
        ));
        n
    } else {
        support
    };
    let proposals = instances
        .iter()
        .map(|inst| {
            let bm25_q = collection.index.score_all(&inst.question);
            inst.options
                .iter()
                .zip(&inst.option_queries)
                .map(|(answer, q)| {
                    let ckpt = checkpoint.map(|m| m.score_all(q, collection)).transpose()?;
                    hybrid_proposal_with(
                        collection,
                        &bm25_q,
                        inst.question.len(),
                        answer,
                        ckpt.as_deref(),
                        support,
                        tau,
                    )
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RoundCache {
        proposals,
        support,
        notices,
    })
}
