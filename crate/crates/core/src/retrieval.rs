//! Truncated softmax retrievers over a top-P support, density ratios and
//! distribution diagnostics.

use std::cmp::Ordering;
use std::collections::HashSet;

use crate::error::{ensure, Result, VodError};
use crate::math::{logsumexp, pairwise_sum};
use crate::sampling::{DiscreteDistribution, PrioritySample};

/// Ids of the `p` highest scores, best first. Ties go to the smaller id.
pub fn build_support(scores: &[f64], p: usize) -> Result<Vec<usize>> {
    ensure!(!scores.is_empty(), "cannot build a support over an empty corpus");
    ensure!(p >= 1, "support size must be at least 1");
    ensure!(scores.iter().all(|s| !s.is_nan()), "NaN score in support ranking");
    let mut ids: Vec<usize> = (0..scores.len()).collect();
    let cmp = |a: &usize, b: &usize| {
        scores[*b]
            .partial_cmp(&scores[*a])
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(b))
    };
    if p < ids.len() {
        ids.select_nth_unstable_by(p - 1, cmp);
        ids.truncate(p);
    }
    ids.sort_by(cmp);
    Ok(ids)
}

/// A softmax over a fixed support: `log_probs[i] = scores[i] − logsumexp(scores)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedDistribution {
    pub support: Vec<usize>,
    pub scores: Vec<f64>,
    pub log_probs: Vec<f64>,
}

impl TruncatedDistribution {
    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    pub fn probs(&self) -> Vec<f64> {
        self.log_probs.iter().map(|l| l.exp()).collect()
    }

    pub fn position(&self, doc_id: usize) -> Option<usize> {
        self.support.iter().position(|&d| d == doc_id)
    }

    pub fn score_of(&self, doc_id: usize) -> Option<f64> {
        self.position(doc_id).map(|i| self.scores[i])
    }

    pub fn log_prob_of(&self, doc_id: usize) -> Option<f64> {
        self.position(doc_id).map(|i| self.log_probs[i])
    }

    /// The same distribution keyed by ascending doc id, ready for sampling.
    pub fn to_discrete(&self) -> Result<DiscreteDistribution> {
        let mut pairs: Vec<(usize, f64)> = self
            .support
            .iter()
            .copied()
            .zip(self.log_probs.iter().copied())
            .collect();
        pairs.sort_by_key(|(id, _)| *id);
        DiscreteDistribution::from_log_weights(pairs)
    }

    /// Score of every sampled document. Fails if one lies outside the support.
    pub fn scores_for(&self, sample: &PrioritySample) -> Result<Vec<f64>> {
        sample
            .indices
            .iter()
            .map(|&d| {
                self.score_of(d)
                    .ok_or_else(|| VodError::invalid(format!("document {d} is outside the support")))
            })
            .collect()
    }
}

pub fn softmax_on_support(support: Vec<usize>, scores: Vec<f64>) -> Result<TruncatedDistribution> {
    ensure!(!support.is_empty(), "empty support");
    ensure!(
        support.len() == scores.len(),
        "support has {} ids but {} scores",
        support.len(),
        scores.len()
    );
    ensure!(scores.iter().all(|s| !s.is_nan()), "NaN score on support");
    ensure!(scores.iter().all(|s| s.is_finite()), "infinite score on support");
    let mut seen = HashSet::with_capacity(support.len());
    ensure!(support.iter().all(|d| seen.insert(*d)), "duplicate id in support");
    let lse = logsumexp(&scores);
    let log_probs = scores.iter().map(|s| s - lse).collect();
    Ok(TruncatedDistribution {
        support,
        scores,
        log_probs,
    })
}

/// `log ζ(d) = f_θ(d, q) − f_φ(d, q)`.
pub fn log_zeta(f_theta: f64, f_phi: f64) -> f64 {
    f_theta - f_phi
}

/// `log ζ` for each document of one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct RatioTable {
    pub doc_ids: Vec<usize>,
    pub log_zeta: Vec<f64>,
}

impl RatioTable {
    pub fn new(sample: &PrioritySample, f_theta: &[f64], f_phi: &[f64]) -> Result<Self> {
        ensure!(
            f_theta.len() == sample.len() && f_phi.len() == sample.len(),
            "ratio table needs one score pair per sampled document"
        );
        let log_zeta: Vec<f64> = f_theta.iter().zip(f_phi).map(|(t, p)| log_zeta(*t, *p)).collect();
        if log_zeta.iter().any(|z| !z.is_finite()) {
            return Err(VodError::NonFinite("log ζ".into()));
        }
        Ok(Self {
            doc_ids: sample.indices.clone(),
            log_zeta,
        })
    }
}

/// `KL(r ‖ p) = Σ r (log r − log p)` over a shared support.
pub fn kl_divergence(r: &TruncatedDistribution, p: &TruncatedDistribution) -> Result<f64> {
    ensure!(
        r.support == p.support,
        "KL needs identical supports ({} vs {} ids)",
        r.len(),
        p.len()
    );
    let terms: Vec<f64> = r
        .log_probs
        .iter()
        .zip(&p.log_probs)
        .map(|(lr, lp)| {
            if *lr == f64::NEG_INFINITY {
                0.0
            } else {
                lr.exp() * (lr - lp)
            }
        })
        .collect();
    Ok(pairwise_sum(&terms).max(0.0))
}

/// `(Σw)² / Σw²`.
pub fn effective_sample_size(weights: &[f64]) -> Result<f64> {
    ensure!(
        weights.iter().all(|w| *w >= 0.0 && w.is_finite()),
        "weights must be finite and non-negative"
    );
    let sum = pairwise_sum(weights);
    ensure!(sum > 0.0, "effective sample size needs a positive weight");
    let sq: Vec<f64> = weights.iter().map(|w| (w / sum) * (w / sum)).collect();
    Ok(1.0 / pairwise_sum(&sq))
}

/// ESS from log weights, without leaving log space.
pub fn effective_sample_size_log(log_weights: &[f64]) -> Result<f64> {
    let lse = logsumexp(log_weights);
    ensure!(lse.is_finite(), "effective sample size needs a positive weight");
    let doubled: Vec<f64> = log_weights.iter().map(|l| 2.0 * (l - lse)).collect();
    Ok((-logsumexp(&doubled)).exp())
}
