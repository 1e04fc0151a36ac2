//! Parametric (query, document) scorers with analytic gradients.
//!
//! Two kinds are provided:
//!
//! * `LinearFeatures`: `score = scale · θ·φ(q, d)` where `φ` is
//!   `[shared-token count, shared count / |q|, BM25(q, d), 1[v_k ∈ d]...]`
//!   for a fixed vocabulary `v`.
//! * `DualEmbedding`: mean-pooled token embeddings for query and document,
//!   `score = scale · e_q·e_d`. Tokens outside the vocabulary are ignored.

use std::collections::HashMap;

use rand_distr::{Distribution, Normal};

use super::bm25::term_counts;
use super::corpus::Collection;
use crate::error::{ensure, Result, VodError};
use crate::math::dot;
use crate::rng;

/// Number of dense features before the vocabulary indicators.
const DENSE_FEATURES: usize = 3;

/// A question with an optional answer; `tokens` is the concatenation `[q; a]`.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryRecord {
    pub question: Vec<String>,
    pub answer: Option<Vec<String>>,
    pub tokens: Vec<String>,
}

impl QueryRecord {
    pub fn new(question: Vec<String>, answer: Option<Vec<String>>) -> Result<Self> {
        ensure!(!question.is_empty(), "query has an empty question");
        let mut tokens = question.clone();
        if let Some(a) = &answer {
            tokens.extend(a.iter().cloned());
        }
        Ok(Self {
            question,
            answer,
            tokens,
        })
    }

    pub fn question_only(&self) -> QueryRecord {
        QueryRecord {
            question: self.question.clone(),
            answer: None,
            tokens: self.question.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ScoreKind {
    LinearFeatures { vocab: Vec<String> },
    DualEmbedding { vocab: Vec<String>, dim: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreModel {
    pub kind: ScoreKind,
    pub params: Vec<f64>,
    /// Fixed multiplier on the score; not learned.
    pub scale: f64,
    vocab_index: HashMap<String, usize>,
}

impl ScoreModel {
    /// Linear model with zero parameters.
    pub fn linear(vocab: Vec<String>) -> Self {
        let n = DENSE_FEATURES + vocab.len();
        Self::from_parts(ScoreKind::LinearFeatures { vocab }, vec![0.0; n])
    }

    /// Dual-embedding model with `N(0, init_std²)` embeddings.
    pub fn dual_embedding(vocab: Vec<String>, dim: usize, init_std: f64, seed: u64) -> Result<Self> {
        ensure!(dim >= 1, "embedding dimension must be at least 1");
        ensure!(init_std >= 0.0 && init_std.is_finite(), "bad init std {init_std}");
        let normal = Normal::new(0.0, init_std).map_err(|e| VodError::invalid(e.to_string()))?;
        let mut rng = rng::stream(seed, 0);
        let params = (0..vocab.len() * dim).map(|_| normal.sample(&mut rng)).collect();
        Ok(Self::from_parts(ScoreKind::DualEmbedding { vocab, dim }, params))
    }

    fn from_parts(kind: ScoreKind, params: Vec<f64>) -> Self {
        let vocab = match &kind {
            ScoreKind::LinearFeatures { vocab } | ScoreKind::DualEmbedding { vocab, .. } => vocab,
        };
        let vocab_index = vocab.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Self {
            kind,
            params,
            scale: 1.0,
            vocab_index,
        }
    }

    pub fn with_params(mut self, params: Vec<f64>) -> Result<Self> {
        ensure!(
            params.len() == self.expected_params(),
            "expected {} parameters, got {}",
            self.expected_params(),
            params.len()
        );
        ensure!(params.iter().all(|p| p.is_finite()), "parameters must be finite");
        self.params = params;
        Ok(self)
    }

    pub fn with_scale(mut self, scale: f64) -> Self {
        self.scale = scale;
        self
    }

    pub fn vocab(&self) -> &[String] {
        match &self.kind {
            ScoreKind::LinearFeatures { vocab } | ScoreKind::DualEmbedding { vocab, .. } => vocab,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self.kind {
            ScoreKind::LinearFeatures { .. } => "linear-features",
            ScoreKind::DualEmbedding { .. } => "dual-embedding",
        }
    }

    pub fn expected_params(&self) -> usize {
        match &self.kind {
            ScoreKind::LinearFeatures { vocab } => DENSE_FEATURES + vocab.len(),
            ScoreKind::DualEmbedding { vocab, dim } => vocab.len() * dim,
        }
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    fn check_params(&self) -> Result<()> {
        ensure!(
            self.params.len() == self.expected_params(),
            "dimension mismatch: {} parameters for a model expecting {}",
            self.params.len(),
            self.expected_params()
        );
        Ok(())
    }

    /// The fixed feature vector `φ(q, d)` of the linear kind.
    pub fn features(&self, query: &QueryRecord, doc_id: usize, collection: &Collection) -> Result<Vec<f64>> {
        let ScoreKind::LinearFeatures { vocab } = &self.kind else {
            return Err(VodError::invalid(
                "features() is only defined for linear-features models",
            ));
        };
        collection.corpus.doc(doc_id)?;
        let index = &collection.index;
        let shared = query.tokens.iter().filter(|t| index.contains(t, doc_id)).count() as f64;
        let qlen = query.tokens.len().max(1) as f64;
        let mut phi = Vec::with_capacity(DENSE_FEATURES + vocab.len());
        phi.push(shared);
        phi.push(shared / qlen);
        phi.push(index.score(&query.tokens, doc_id)?);
        phi.extend(vocab.iter().map(|v| if index.contains(v, doc_id) { 1.0 } else { 0.0 }));
        Ok(phi)
    }

    pub fn score(&self, query: &QueryRecord, doc_id: usize, collection: &Collection) -> Result<f64> {
        self.check_params()?;
        match &self.kind {
            ScoreKind::LinearFeatures { .. } => {
                let phi = self.features(query, doc_id, collection)?;
                Ok(self.scale * dot(&self.params, &phi))
            }
            ScoreKind::DualEmbedding { dim, .. } => {
                let doc = collection.corpus.doc(doc_id)?;
                let eq = self.embed(&query.tokens, *dim);
                let ed = self.embed(&doc.tokens, *dim);
                Ok(self.scale * dot(&eq, &ed))
            }
        }
    }

    /// Score and its gradient with respect to `params`.
    pub fn score_and_grad(
        &self,
        query: &QueryRecord,
        doc_id: usize,
        collection: &Collection,
    ) -> Result<(f64, Vec<f64>)> {
        self.check_params()?;
        match &self.kind {
            ScoreKind::LinearFeatures { .. } => {
                let phi = self.features(query, doc_id, collection)?;
                let score = self.scale * dot(&self.params, &phi);
                let grad = phi.into_iter().map(|x| self.scale * x).collect();
                Ok((score, grad))
            }
            ScoreKind::DualEmbedding { dim, .. } => {
                let dim = *dim;
                let doc = collection.corpus.doc(doc_id)?;
                let eq = self.embed(&query.tokens, dim);
                let ed = self.embed(&doc.tokens, dim);
                let score = self.scale * dot(&eq, &ed);
                let mut grad = vec![0.0; self.params.len()];
                // d(e_q·e_d)/dE[t] = c_q(t)/n_q · e_d + c_d(t)/n_d · e_q
                for (tokens, other) in [(&query.tokens, &ed), (&doc.tokens, &eq)] {
                    let (counts, n) = self.vocab_counts(tokens);
                    for (t, c) in counts {
                        let w = self.scale * c as f64 / n as f64;
                        for k in 0..dim {
                            grad[t * dim + k] += w * other[k];
                        }
                    }
                }
                Ok((score, grad))
            }
        }
    }

    /// Scores of every document in the collection for one query.
    pub fn score_all(&self, query: &QueryRecord, collection: &Collection) -> Result<Vec<f64>> {
        self.check_params()?;
        let n = collection.len();
        match &self.kind {
            ScoreKind::LinearFeatures { vocab } => {
                let index = &collection.index;
                let mut shared = vec![0.0; n];
                for (term, count) in term_counts(&query.tokens) {
                    for &(doc, _) in index.postings(term) {
                        shared[doc] += count as f64;
                    }
                }
                let bm25 = index.score_all(&query.tokens);
                let qlen = query.tokens.len().max(1) as f64;
                let (w_shared, w_norm, w_bm25) = (self.params[0], self.params[1], self.params[2]);
                let mut scores: Vec<f64> = (0..n)
                    .map(|d| w_shared * shared[d] + w_norm * shared[d] / qlen + w_bm25 * bm25[d])
                    .collect();
                for (k, v) in vocab.iter().enumerate() {
                    let w = self.params[DENSE_FEATURES + k];
                    if w != 0.0 {
                        for &(doc, _) in index.postings(v) {
                            scores[doc] += w;
                        }
                    }
                }
                Ok(scores.into_iter().map(|s| self.scale * s).collect())
            }
            ScoreKind::DualEmbedding { dim, .. } => {
                let eq = self.embed(&query.tokens, *dim);
                Ok(collection
                    .corpus
                    .docs()
                    .iter()
                    .map(|d| self.scale * dot(&eq, &self.embed(&d.tokens, *dim)))
                    .collect())
            }
        }
    }

    fn vocab_counts(&self, tokens: &[String]) -> (Vec<(usize, usize)>, usize) {
        let mut counts: Vec<(usize, usize)> = Vec::new();
        let mut n = 0;
        for t in tokens {
            if let Some(&i) = self.vocab_index.get(t) {
                n += 1;
                match counts.iter_mut().find(|(j, _)| *j == i) {
                    Some((_, c)) => *c += 1,
                    None => counts.push((i, 1)),
                }
            }
        }
        (counts, n)
    }

    fn embed(&self, tokens: &[String], dim: usize) -> Vec<f64> {
        let (counts, n) = self.vocab_counts(tokens);
        let mut e = vec![0.0; dim];
        if n == 0 {
            return e;
        }
        for (t, c) in counts {
            let w = c as f64 / n as f64;
            for (ek, p) in e.iter_mut().zip(&self.params[t * dim..(t + 1) * dim]) {
                *ek += w * p;
            }
        }
        e
    }

    pub fn bind<'a>(&'a self, collection: &'a Collection) -> BoundScorer<'a> {
        BoundScorer {
            model: self,
            collection,
        }
    }
}

/// Anything that scores (query, document) pairs and differentiates the score
/// with respect to its own parameter vector.
pub trait PairScorer {
    fn num_params(&self) -> usize;
    fn score(&self, query: &QueryRecord, doc_id: usize) -> Result<f64>;
    fn score_and_grad(&self, query: &QueryRecord, doc_id: usize) -> Result<(f64, Vec<f64>)>;
}

/// A [`ScoreModel`] paired with the collection it scores against.
#[derive(Debug, Clone, Copy)]
pub struct BoundScorer<'a> {
    pub model: &'a ScoreModel,
    pub collection: &'a Collection,
}

impl PairScorer for BoundScorer<'_> {
    fn num_params(&self) -> usize {
        self.model.num_params()
    }

    fn score(&self, query: &QueryRecord, doc_id: usize) -> Result<f64> {
        self.model.score(query, doc_id, self.collection)
    }

    fn score_and_grad(&self, query: &QueryRecord, doc_id: usize) -> Result<(f64, Vec<f64>)> {
        self.model.score_and_grad(query, doc_id, self.collection)
    }
}

/// Wraps a scorer and counts its calls.
#[derive(Debug)]
pub struct CountingScorer<S> {
    pub inner: S,
    calls: std::cell::Cell<usize>,
}

impl<S: PairScorer> CountingScorer<S> {
    pub fn new(inner: S) -> Self {
        Self {
            inner,
            calls: std::cell::Cell::new(0),
        }
    }

    pub fn calls(&self) -> usize {
        self.calls.get()
    }

    pub fn reset(&self) {
        self.calls.set(0);
    }
}

impl<S: PairScorer> PairScorer for CountingScorer<S> {
    fn num_params(&self) -> usize {
        self.inner.num_params()
    }

    fn score(&self, query: &QueryRecord, doc_id: usize) -> Result<f64> {
        self.calls.set(self.calls.get() + 1);
        self.inner.score(query, doc_id)
    }

    fn score_and_grad(&self, query: &QueryRecord, doc_id: usize) -> Result<(f64, Vec<f64>)> {
        self.calls.set(self.calls.get() + 1);
        self.inner.score_and_grad(query, doc_id)
    }
}

impl<T: PairScorer + ?Sized> PairScorer for &T {
    fn num_params(&self) -> usize {
        (**self).num_params()
    }

    fn score(&self, query: &QueryRecord, doc_id: usize) -> Result<f64> {
        (**self).score(query, doc_id)
    }

    fn score_and_grad(&self, query: &QueryRecord, doc_id: usize) -> Result<(f64, Vec<f64>)> {
        (**self).score_and_grad(query, doc_id)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scoring::{tokenize, Corpus};

    fn collection() -> Collection {
        Collection::with_defaults(
            Corpus::from_texts([
                "aortic stenosis murmur confirmed",
                "mitral valve prolapse",
                "stenosis of the aortic valve not",
                "chest pain radiating",
            ])
            .unwrap(),
        )
        .unwrap()
    }

    fn vocab() -> Vec<String> {
        vec!["confirmed".into(), "not".into()]
    }

    fn query() -> QueryRecord {
        QueryRecord::new(tokenize("which valve stenosis"), Some(tokenize("aortic"))).unwrap()
    }

    #[test]
    fn zero_params_give_zero_score_and_feature_grad() {
        let c = collection();
        let m = ScoreModel::linear(vocab());
        let (s, g) = m.score_and_grad(&query(), 0, &c).unwrap();
        assert_eq!(s, 0.0);
        assert_eq!(g, m.features(&query(), 0, &c).unwrap());
    }

    #[test]
    fn linear_score_is_dot_product() {
        let c = collection();
        let m = ScoreModel::linear(vocab())
            .with_params(vec![0.5, -1.0, 0.25, 2.0, -3.0])
            .unwrap();
        let phi = m.features(&query(), 2, &c).unwrap();
        // shared: valve, stenosis, aortic -> 3 of 4 query tokens
        assert_eq!(phi[0], 3.0);
        assert_eq!(phi[1], 0.75);
        assert_eq!(&phi[3..], &[0.0, 1.0]);
        let s = m.score(&query(), 2, &c).unwrap();
        assert_eq!(s, dot(&m.params, &phi));
    }

    #[test]
    fn score_all_matches_pointwise() {
        let c = collection();
        let lin = ScoreModel::linear(vocab())
            .with_params(vec![0.3, -0.7, 0.9, 1.5, -2.0])
            .unwrap();
        let vocab_all: Vec<String> = tokenize("aortic stenosis valve mitral chest which not");
        let dual = ScoreModel::dual_embedding(vocab_all, 4, 0.5, 3).unwrap();
        for m in [&lin, &dual] {
            let all = m.score_all(&query(), &c).unwrap();
            for (d, s) in all.iter().enumerate() {
                assert!((s - m.score(&query(), d, &c).unwrap()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let c = collection();
        let mut m = ScoreModel::linear(vocab());
        m.params.push(1.0);
        assert!(matches!(
            m.score_and_grad(&query(), 0, &c),
            Err(VodError::InvalidArgument(_))
        ));
        assert!(ScoreModel::linear(vocab()).with_params(vec![1.0]).is_err());
    }

    #[test]
    fn dual_embedding_ignores_unknown_tokens() {
        let c = collection();
        let m = ScoreModel::dual_embedding(vec!["zzz".into()], 3, 1.0, 1).unwrap();
        let (s, g) = m.score_and_grad(&query(), 0, &c).unwrap();
        assert_eq!(s, 0.0);
        assert!(g.iter().all(|x| *x == 0.0));
    }

    #[test]
    fn empty_question_rejected() {
        assert!(QueryRecord::new(vec![], Some(vec!["a".into()])).is_err());
        let q = query();
        assert_eq!(q.tokens, tokenize("which valve stenosis aortic"));
        assert_eq!(q.question_only().tokens, tokenize("which valve stenosis"));
    }
}
