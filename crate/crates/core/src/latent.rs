//! Single-latent reader–retriever models for one fixed (question, answer) pair.
//!
//! The bound and gradient code is generic over [`LatentModel`]. A small
//! linear model with random features is provided for oracle checks, and
//! [`CountingModel`] wraps any model to count its evaluations.

use std::cell::{Cell, RefCell};

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{ensure, Result, VodError};
use crate::math::{dot, log_sigmoid, sigmoid};
use crate::retrieval::{build_support, softmax_on_support, TruncatedDistribution};
use crate::rng;

/// Reader `log p(a | d, q)` and retriever score `f_θ(d, q)` with disjoint
/// parameter blocks, for one fixed query.
pub trait LatentModel {
    fn num_reader_params(&self) -> usize;
    fn num_retriever_params(&self) -> usize;

    /// Query-side retriever work done once per query (a dual encoder would
    /// embed the query here). Counted as one retriever evaluation.
    fn encode_query(&self) -> Result<()> {
        Ok(())
    }

    fn reader_loglik(&self, doc: usize) -> Result<f64>;
    fn reader_loglik_grad(&self, doc: usize) -> Result<(f64, Vec<f64>)>;
    fn retriever_score(&self, doc: usize) -> Result<f64>;
    fn retriever_score_grad(&self, doc: usize) -> Result<(f64, Vec<f64>)>;
}

impl<T: LatentModel + ?Sized> LatentModel for &T {
    fn num_reader_params(&self) -> usize {
        (**self).num_reader_params()
    }
    fn num_retriever_params(&self) -> usize {
        (**self).num_retriever_params()
    }
    fn encode_query(&self) -> Result<()> {
        (**self).encode_query()
    }
    fn reader_loglik(&self, doc: usize) -> Result<f64> {
        (**self).reader_loglik(doc)
    }
    fn reader_loglik_grad(&self, doc: usize) -> Result<(f64, Vec<f64>)> {
        (**self).reader_loglik_grad(doc)
    }
    fn retriever_score(&self, doc: usize) -> Result<f64> {
        (**self).retriever_score(doc)
    }
    fn retriever_score_grad(&self, doc: usize) -> Result<(f64, Vec<f64>)> {
        (**self).retriever_score_grad(doc)
    }
}

/// `log p(a|d) = log σ(θ_R·x_d)`, `f_θ(d) = θ_Q·y_d`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearLatentModel {
    pub reader_features: Vec<Vec<f64>>,
    pub retriever_features: Vec<Vec<f64>>,
    pub reader_params: Vec<f64>,
    pub retriever_params: Vec<f64>,
}

impl LinearLatentModel {
    pub fn new(
        reader_features: Vec<Vec<f64>>,
        retriever_features: Vec<Vec<f64>>,
        reader_params: Vec<f64>,
        retriever_params: Vec<f64>,
    ) -> Result<Self> {
        ensure!(!reader_features.is_empty(), "model needs at least one document");
        ensure!(
            reader_features.len() == retriever_features.len(),
            "reader and retriever features cover different corpora"
        );
        ensure!(
            reader_features.iter().all(|x| x.len() == reader_params.len()),
            "reader feature width differs from reader parameter count"
        );
        ensure!(
            retriever_features.iter().all(|y| y.len() == retriever_params.len()),
            "retriever feature width differs from retriever parameter count"
        );
        Ok(Self {
            reader_features,
            retriever_features,
            reader_params,
            retriever_params,
        })
    }

    pub fn n_docs(&self) -> usize {
        self.reader_features.len()
    }

    pub fn with_reader_params(&self, params: &[f64]) -> Self {
        Self {
            reader_params: params.to_vec(),
            ..self.clone()
        }
    }

    pub fn with_retriever_params(&self, params: &[f64]) -> Self {
        Self {
            retriever_params: params.to_vec(),
            ..self.clone()
        }
    }

    fn check_doc(&self, doc: usize) -> Result<()> {
        if doc >= self.n_docs() {
            return Err(VodError::invalid(format!("unknown document id {doc}")));
        }
        Ok(())
    }
}

impl LatentModel for LinearLatentModel {
    fn num_reader_params(&self) -> usize {
        self.reader_params.len()
    }

    fn num_retriever_params(&self) -> usize {
        self.retriever_params.len()
    }

    fn reader_loglik(&self, doc: usize) -> Result<f64> {
        self.check_doc(doc)?;
        Ok(log_sigmoid(dot(&self.reader_params, &self.reader_features[doc])))
    }

    fn reader_loglik_grad(&self, doc: usize) -> Result<(f64, Vec<f64>)> {
        self.check_doc(doc)?;
        let x = &self.reader_features[doc];
        let z = dot(&self.reader_params, x);
        let c = sigmoid(-z);
        Ok((log_sigmoid(z), x.iter().map(|v| c * v).collect()))
    }

    fn retriever_score(&self, doc: usize) -> Result<f64> {
        self.check_doc(doc)?;
        Ok(dot(&self.retriever_params, &self.retriever_features[doc]))
    }

    fn retriever_score_grad(&self, doc: usize) -> Result<(f64, Vec<f64>)> {
        self.check_doc(doc)?;
        let y = &self.retriever_features[doc];
        Ok((dot(&self.retriever_params, y), y.clone()))
    }
}

/// A random linear model together with a proposal `r_φ` over its top-P
/// support. `f_φ` is `f_θ` plus Gaussian noise, so the proposal is related
/// to, but not equal to, the model retriever.
#[derive(Debug, Clone)]
pub struct LatentInstance {
    pub model: LinearLatentModel,
    pub proposal: TruncatedDistribution,
}

#[derive(Debug, Clone, Copy)]
pub struct InstanceShape {
    pub n_docs: usize,
    pub support: usize,
    pub reader_dim: usize,
    pub retriever_dim: usize,
    pub param_std: f64,
    pub proposal_noise: f64,
}

impl Default for InstanceShape {
    fn default() -> Self {
        Self {
            n_docs: 8,
            support: 8,
            reader_dim: 3,
            retriever_dim: 4,
            param_std: 0.8,
            proposal_noise: 1.0,
        }
    }
}

pub fn random_instance(shape: InstanceShape, seed: u64) -> Result<LatentInstance> {
    ensure!(shape.n_docs >= 1 && shape.support >= 1, "instance needs documents");
    let mut rng = rng::stream(seed, 0);
    let mut normal =
        |n: usize, std: f64| -> Vec<f64> { (0..n).map(|_| std * rng.sample::<f64, _>(StandardNormal)).collect() };
    let reader_features: Vec<Vec<f64>> = (0..shape.n_docs).map(|_| normal(shape.reader_dim, 1.0)).collect();
    let retriever_features: Vec<Vec<f64>> = (0..shape.n_docs).map(|_| normal(shape.retriever_dim, 1.0)).collect();
    let reader_params = normal(shape.reader_dim, shape.param_std);
    let retriever_params = normal(shape.retriever_dim, shape.param_std);
    let noise = normal(shape.n_docs, shape.proposal_noise);
    let model = LinearLatentModel::new(reader_features, retriever_features, reader_params, retriever_params)?;

    let f_phi: Vec<f64> = (0..shape.n_docs)
        .map(|d| model.retriever_score(d).map(|f| f + noise[d]))
        .collect::<Result<_>>()?;
    let support = build_support(&f_phi, shape.support)?;
    let scores = support.iter().map(|&d| f_phi[d]).collect();
    let proposal = softmax_on_support(support, scores)?;
    Ok(LatentInstance { model, proposal })
}

/// Counts every call made through the [`LatentModel`] interface.
#[derive(Debug)]
pub struct CountingModel<M> {
    pub inner: M,
    reader_calls: Cell<usize>,
    retriever_calls: Cell<usize>,
    scored_docs: RefCell<Vec<usize>>,
}

impl<M: LatentModel> CountingModel<M> {
    pub fn new(inner: M) -> Self {
        Self {
            inner,
            reader_calls: Cell::new(0),
            retriever_calls: Cell::new(0),
            scored_docs: RefCell::new(Vec::new()),
        }
    }

    pub fn reader_calls(&self) -> usize {
        self.reader_calls.get()
    }

    /// Query encodings plus document scores.
    pub fn retriever_calls(&self) -> usize {
        self.retriever_calls.get()
    }

    /// Documents whose retriever score was requested, in call order.
    pub fn scored_docs(&self) -> Vec<usize> {
        self.scored_docs.borrow().clone()
    }

    pub fn reset(&self) {
        self.reader_calls.set(0);
        self.retriever_calls.set(0);
        self.scored_docs.borrow_mut().clear();
    }

    fn bump_retriever(&self, doc: Option<usize>) {
        self.retriever_calls.set(self.retriever_calls.get() + 1);
        if let Some(d) = doc {
            self.scored_docs.borrow_mut().push(d);
        }
    }
}

impl<M: LatentModel> LatentModel for CountingModel<M> {
    fn num_reader_params(&self) -> usize {
        self.inner.num_reader_params()
    }
    fn num_retriever_params(&self) -> usize {
        self.inner.num_retriever_params()
    }
    fn encode_query(&self) -> Result<()> {
        self.bump_retriever(None);
        self.inner.encode_query()
    }
    fn reader_loglik(&self, doc: usize) -> Result<f64> {
        self.reader_calls.set(self.reader_calls.get() + 1);
        self.inner.reader_loglik(doc)
    }
    fn reader_loglik_grad(&self, doc: usize) -> Result<(f64, Vec<f64>)> {
        self.reader_calls.set(self.reader_calls.get() + 1);
        self.inner.reader_loglik_grad(doc)
    }
    fn retriever_score(&self, doc: usize) -> Result<f64> {
        self.bump_retriever(Some(doc));
        self.inner.retriever_score(doc)
    }
    fn retriever_score_grad(&self, doc: usize) -> Result<(f64, Vec<f64>)> {
        self.bump_retriever(Some(doc));
        self.inner.retriever_score_grad(doc)
    }
}
