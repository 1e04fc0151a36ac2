//! Okapi BM25 over an in-memory inverted index.
//!
//! `score(q, d) = Σ_{t∈q} IDF(t) · tf·(k1+1) / (tf + k1·(1 − b + b·|d|/avgdl))`
//! with `IDF(t) = ln(1 + (N − n_t + 0.5)/(n_t + 0.5))`, which is never
//! negative. Repeated query terms contribute once per occurrence.

use std::collections::HashMap;

use super::corpus::Corpus;
use crate::error::{ensure, Result, VodError};

pub const DEFAULT_K1: f64 = 1.2;
pub const DEFAULT_B: f64 = 0.75;

#[derive(Debug, Clone)]
pub struct Bm25Index {
    /// term -> (doc_id, tf), sorted by doc id.
    postings: HashMap<String, Vec<(usize, u32)>>,
    /// doc_id -> term -> tf.
    forward: Vec<HashMap<String, u32>>,
    doc_lengths: Vec<usize>,
    avg_doc_len: f64,
    k1: f64,
    b: f64,
}

impl Bm25Index {
    pub fn build(corpus: &Corpus, k1: f64, b: f64) -> Result<Self> {
        ensure!(!corpus.is_empty(), "cannot index an empty corpus");
        ensure!(k1 >= 0.0 && k1.is_finite(), "k1 must be finite and >= 0");
        ensure!((0.0..=1.0).contains(&b), "b must lie in [0, 1]");

        let mut postings: HashMap<String, Vec<(usize, u32)>> = HashMap::new();
        let mut forward = Vec::with_capacity(corpus.len());
        let mut doc_lengths = Vec::with_capacity(corpus.len());
        for doc in corpus.docs() {
            let mut tf: HashMap<String, u32> = HashMap::new();
            for t in &doc.tokens {
                *tf.entry(t.clone()).or_insert(0) += 1;
            }
            for (term, &count) in &tf {
                postings.entry(term.clone()).or_default().push((doc.id, count));
            }
            forward.push(tf);
            doc_lengths.push(doc.tokens.len());
        }
        for list in postings.values_mut() {
            list.sort_unstable_by_key(|(id, _)| *id);
        }
        let avg_doc_len = doc_lengths.iter().sum::<usize>() as f64 / doc_lengths.len() as f64;
        Ok(Self {
            postings,
            forward,
            doc_lengths,
            avg_doc_len,
            k1,
            b,
        })
    }

    pub fn n_docs(&self) -> usize {
        self.doc_lengths.len()
    }

    pub fn avg_doc_len(&self) -> f64 {
        self.avg_doc_len
    }

    pub fn k1(&self) -> f64 {
        self.k1
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn doc_length(&self, doc_id: usize) -> Option<usize> {
        self.doc_lengths.get(doc_id).copied()
    }

    /// Posting list for `term`; empty when the term is absent.
    pub fn postings(&self, term: &str) -> &[(usize, u32)] {
        self.postings.get(term).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn term_frequency(&self, term: &str, doc_id: usize) -> u32 {
        self.forward.get(doc_id).and_then(|m| m.get(term).copied()).unwrap_or(0)
    }

    pub fn contains(&self, term: &str, doc_id: usize) -> bool {
        self.term_frequency(term, doc_id) > 0
    }

    pub fn idf(&self, term: &str) -> f64 {
        let n = self.n_docs() as f64;
        let nt = self.postings(term).len() as f64;
        (1.0 + (n - nt + 0.5) / (nt + 0.5)).ln()
    }

    fn term_weight(&self, idf: f64, tf: u32, doc_id: usize) -> f64 {
        let tf = tf as f64;
        let len = self.doc_lengths[doc_id] as f64;
        let norm = self.k1 * (1.0 - self.b + self.b * len / self.avg_doc_len);
        idf * tf * (self.k1 + 1.0) / (tf + norm)
    }

    pub fn score(&self, query_tokens: &[String], doc_id: usize) -> Result<f64> {
        if doc_id >= self.n_docs() {
            return Err(VodError::invalid(format!("unknown document id {doc_id}")));
        }
        Ok(query_tokens
            .iter()
            .map(|t| {
                let tf = self.term_frequency(t, doc_id);
                if tf == 0 {
                    0.0
                } else {
                    self.term_weight(self.idf(t), tf, doc_id)
                }
            })
            .sum())
    }

    /// Scores of every document, walking posting lists only.
    pub fn score_all(&self, query_tokens: &[String]) -> Vec<f64> {
        let mut scores = vec![0.0; self.n_docs()];
        for (term, count) in term_counts(query_tokens) {
            let idf = self.idf(term);
            for &(doc_id, tf) in self.postings(term) {
                scores[doc_id] += count as f64 * self.term_weight(idf, tf, doc_id);
            }
        }
        scores
    }
}

/// Distinct terms with their multiplicities, in first-occurrence order.
pub(crate) fn term_counts(tokens: &[String]) -> Vec<(&str, usize)> {
    let mut out: Vec<(&str, usize)> = Vec::new();
    for t in tokens {
        match out.iter_mut().find(|(s, _)| *s == t.as_str()) {
            Some((_, c)) => *c += 1,
            None => out.push((t.as_str(), 1)),
        }
    }
    out
}
