//! Multiple-choice reading with one retrieved document per answer option.
//!
//! Option `j` is paired with the query `q_j = [q; a_j]`, and a document
//! combination `D = (d_1, …, d_M)` is drawn from the product of per-option
//! retrievers. The reader scores `g(d_j, q_j)` and takes a softmax over
//! options. Because each logit depends on one option only, the `K^M`
//! combination enumeration reuses `M·K` reader evaluations.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::bounds::{check_alpha, is_alpha_one, vod_core, vod_value, BoundReport};
use crate::error::{ensure, Result, VodError};
use crate::gradients::GradientEstimate;
use crate::math::{argmax, axpy, log_softmax, logsumexp, pairwise_sum, softmax, LogSumExp};
use crate::retrieval::{softmax_on_support, TruncatedDistribution};
use crate::rng::derive_seed;
use crate::sampling::{product_priority_sample, Combinations, ProductSample};
use crate::scoring::{tokenize, Collection, Corpus, McqaRecord, PairScorer, QueryRecord, ScoreModel};

/// Largest number of document combinations enumerated by default.
pub const DEFAULT_ENUMERATION_CAP: usize = 65_536;

#[derive(Debug, Clone, PartialEq)]
pub struct McqaInstance {
    pub qid: String,
    pub question: Vec<String>,
    pub options: Vec<Vec<String>>,
    pub correct: usize,
    /// `q_j = [q; a_j]`.
    pub option_queries: Vec<QueryRecord>,
}

impl McqaInstance {
    pub fn new(
        qid: impl Into<String>,
        question: Vec<String>,
        options: Vec<Vec<String>>,
        correct: usize,
    ) -> Result<Self> {
        ensure!(
            options.len() >= 2,
            "a multiple-choice question needs at least 2 options"
        );
        ensure!(
            correct < options.len(),
            "correct index {correct} out of range for {} options",
            options.len()
        );
        let option_queries = options
            .iter()
            .map(|a| QueryRecord::new(question.clone(), Some(a.clone())))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            qid: qid.into(),
            question,
            options,
            correct,
            option_queries,
        })
    }

    pub fn from_record(record: &McqaRecord) -> Result<Self> {
        Self::new(
            record.qid.clone(),
            tokenize(&record.question),
            record.options.iter().map(|o| tokenize(o)).collect(),
            record.correct,
        )
    }

    pub fn num_options(&self) -> usize {
        self.options.len()
    }

    /// The question without any answer attached.
    pub fn question_query(&self) -> QueryRecord {
        self.option_queries[0].question_only()
    }
}

/// Log-likelihood of a document combination, given per-component values
/// `u_{j,k}` at sample position `k` of component `j`.
pub trait CombinationReader {
    fn num_components(&self) -> usize;
    fn component_len(&self, j: usize) -> usize;
    fn loglik(&self, positions: &[usize]) -> f64;
    /// Adds `weight · ∂loglik/∂u_{j, positions[j]}` to `coeffs[j][positions[j]]`.
    fn accumulate_grad(&self, positions: &[usize], weight: f64, coeffs: &mut [Vec<f64>]);
}

/// `ℓ(D) = Σ_j ℓ_j[d_j]`. With one component this is the single-latent reader.
#[derive(Debug, Clone)]
pub struct AdditiveReader {
    pub loglik: Vec<Vec<f64>>,
}

impl CombinationReader for AdditiveReader {
    fn num_components(&self) -> usize {
        self.loglik.len()
    }
    fn component_len(&self, j: usize) -> usize {
        self.loglik[j].len()
    }
    fn loglik(&self, positions: &[usize]) -> f64 {
        positions.iter().enumerate().map(|(j, &k)| self.loglik[j][k]).sum()
    }
    fn accumulate_grad(&self, positions: &[usize], weight: f64, coeffs: &mut [Vec<f64>]) {
        for (j, &k) in positions.iter().enumerate() {
            coeffs[j][k] += weight;
        }
    }
}

/// `ℓ(D) = log softmax_j(g_j[d_j])[target]`.
#[derive(Debug, Clone)]
pub struct OptionSoftmaxReader<'a> {
    pub logits: &'a [Vec<f64>],
    pub target: usize,
}

/// `log Σ_j exp g_j[positions[j]]` without allocating.
fn combination_lse(logits: &[Vec<f64>], positions: &[usize]) -> f64 {
    let mut acc = LogSumExp::new();
    for (j, &k) in positions.iter().enumerate() {
        acc.push(logits[j][k]);
    }
    acc.value()
}

impl CombinationReader for OptionSoftmaxReader<'_> {
    fn num_components(&self) -> usize {
        self.logits.len()
    }
    fn component_len(&self, j: usize) -> usize {
        self.logits[j].len()
    }
    fn loglik(&self, positions: &[usize]) -> f64 {
        self.logits[self.target][positions[self.target]] - combination_lse(self.logits, positions)
    }
    fn accumulate_grad(&self, positions: &[usize], weight: f64, coeffs: &mut [Vec<f64>]) {
        let lse = combination_lse(self.logits, positions);
        for (j, &k) in positions.iter().enumerate() {
            let delta = if j == self.target { 1.0 } else { 0.0 };
            coeffs[j][k] += weight * (delta - (self.logits[j][k] - lse).exp());
        }
    }
}

/// Gradient of the product objective with respect to the per-component
/// reader values `u_{j,k}` and retriever scores `f_{j,k}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductCoefficients {
    pub reader: Vec<Vec<f64>>,
    /// `m_j(k) − ρ_j(k)`: marginal weight minus the ratio weight.
    pub retriever: Vec<Vec<f64>>,
}

fn check_product(
    sample: &ProductSample,
    log_zeta: &[Vec<f64>],
    reader: &impl CombinationReader,
    cap: usize,
) -> Result<()> {
    let m = sample.num_components();
    ensure!(m >= 1, "empty product sample");
    ensure!(
        log_zeta.len() == m && reader.num_components() == m,
        "product sample has {m} components but {} ratio lists and {} reader components",
        log_zeta.len(),
        reader.num_components()
    );
    for (j, s) in sample.per_option_samples.iter().enumerate() {
        ensure!(!s.is_empty(), "component {j} has an empty sample");
        ensure!(
            log_zeta[j].len() == s.len() && reader.component_len(j) == s.len(),
            "component {j} lengths disagree with its sample of {}",
            s.len()
        );
    }
    let n = sample.num_combinations();
    if n > cap {
        return Err(VodError::ResourceLimit(format!(
            "{n} document combinations exceed the enumeration cap of {cap}"
        )));
    }
    Ok(())
}

/// Reader-independent parts of the enumeration: positions (flattened, `m`
/// per combination), `log s(D)`, `log ζ(D)` and the factorized ratio estimate.
struct ProductBase {
    m: usize,
    positions: Vec<usize>,
    log_s: Vec<Vec<f64>>,
    ls: Vec<f64>,
    lz: Vec<f64>,
    log_ratio: f64,
}

impl ProductBase {
    fn new(sample: &ProductSample, log_zeta: &[Vec<f64>]) -> Self {
        let log_s: Vec<Vec<f64>> = sample.per_option_samples.iter().map(|s| s.log_norm_weights()).collect();
        // log Σ_D s(D) ζ(D) factorizes over components.
        let log_ratio: f64 = (0..log_s.len())
            .map(|j| {
                let t: Vec<f64> = log_s[j].iter().zip(&log_zeta[j]).map(|(s, z)| s + z).collect();
                logsumexp(&t)
            })
            .sum();
        let m = log_s.len();
        let n = sample.num_combinations();
        let mut positions = Vec::with_capacity(n * m);
        let (mut ls, mut lz) = (Vec::with_capacity(n), Vec::with_capacity(n));
        let radices: Vec<usize> = log_s.iter().map(Vec::len).collect();
        let mut pos = vec![0; m];
        for _ in 0..n {
            let (mut s, mut z) = (0.0, 0.0);
            for (j, &k) in pos.iter().enumerate() {
                s += log_s[j][k];
                z += log_zeta[j][k];
            }
            ls.push(s);
            lz.push(z);
            positions.extend_from_slice(&pos);
            // Same order as `ProductSample::combinations`: last component fastest.
            for j in (0..m).rev() {
                pos[j] += 1;
                if pos[j] < radices[j] {
                    break;
                }
                pos[j] = 0;
            }
        }
        Self {
            m,
            positions,
            log_s,
            ls,
            lz,
            log_ratio,
        }
    }

    fn combos(&self) -> std::slice::ChunksExact<'_, usize> {
        self.positions.chunks_exact(self.m)
    }

    fn terms(&self, alpha: f64, loglik: &[f64]) -> Result<crate::bounds::VodTerms> {
        vod_core(alpha, &self.ls, loglik, &self.lz, self.log_ratio)
    }
}

struct ProductTerms {
    base: ProductBase,
    terms: crate::bounds::VodTerms,
}

fn product_terms(
    alpha: f64,
    sample: &ProductSample,
    log_zeta: &[Vec<f64>],
    reader: &impl CombinationReader,
    cap: usize,
) -> Result<ProductTerms> {
    check_alpha(alpha)?;
    check_product(sample, log_zeta, reader, cap)?;
    let base = ProductBase::new(sample, log_zeta);
    let ll: Vec<f64> = base.combos().map(|pos| reader.loglik(pos)).collect();
    let terms = base.terms(alpha, &ll)?;
    Ok(ProductTerms { base, terms })
}

fn report(terms: &crate::bounds::VodTerms) -> BoundReport {
    BoundReport {
        value: terms.value,
        ess: terms.ess,
        per_doc_norm_weights: terms.log_weights.iter().map(|l| l.exp()).collect(),
    }
}

/// The sampled objective over all combinations of a product sample.
/// Per-combination weights in the report follow [`ProductSample::combinations`] order.
pub fn product_vod_objective(
    alpha: f64,
    sample: &ProductSample,
    log_zeta: &[Vec<f64>],
    reader: &impl CombinationReader,
    cap: usize,
) -> Result<BoundReport> {
    Ok(report(&product_terms(alpha, sample, log_zeta, reader, cap)?.terms))
}

/// Objective and its gradient coefficients in one enumeration.
pub fn product_vod_gradient(
    alpha: f64,
    sample: &ProductSample,
    log_zeta: &[Vec<f64>],
    reader: &impl CombinationReader,
    cap: usize,
) -> Result<(BoundReport, ProductCoefficients)> {
    let pt = product_terms(alpha, sample, log_zeta, reader, cap)?;
    let shape: Vec<usize> = pt.base.log_s.iter().map(Vec::len).collect();
    let mut reader_coeffs: Vec<Vec<f64>> = shape.iter().map(|&k| vec![0.0; k]).collect();
    let mut marginal = reader_coeffs.clone();
    for (pos, lw) in pt.base.combos().zip(&pt.terms.log_weights) {
        let w = lw.exp();
        reader.accumulate_grad(pos, w, &mut reader_coeffs);
        for (j, &k) in pos.iter().enumerate() {
            marginal[j][k] += w;
        }
    }
    let retriever = marginal
        .into_iter()
        .enumerate()
        .map(|(j, m)| {
            let t: Vec<f64> = pt.base.log_s[j].iter().zip(&log_zeta[j]).map(|(s, z)| s + z).collect();
            let rho = softmax(&t);
            m.iter().zip(rho).map(|(a, b)| a - b).collect()
        })
        .collect();
    Ok((
        report(&pt.terms),
        ProductCoefficients {
            reader: reader_coeffs,
            retriever,
        },
    ))
}

/// Per-option proposals `r_φ(· | q_j)` and one product sample drawn from them.
#[derive(Debug, Clone, PartialEq)]
pub struct OptionRetrievalState {
    pub proposals: Vec<TruncatedDistribution>,
    pub sample: ProductSample,
}

impl OptionRetrievalState {
    /// Draws `k` documents per option, each option on its own stream.
    pub fn draw(proposals: Vec<TruncatedDistribution>, k: usize, seed: u64) -> Result<Self> {
        let dists = proposals
            .iter()
            .map(TruncatedDistribution::to_discrete)
            .collect::<Result<Vec<_>>>()?;
        let sample = product_priority_sample(&dists, k, seed)?;
        Ok(Self { proposals, sample })
    }

    pub fn num_options(&self) -> usize {
        self.proposals.len()
    }

    /// Cached `f_φ` of every sampled document, per option.
    pub fn f_phi(&self) -> Result<Vec<Vec<f64>>> {
        self.proposals
            .iter()
            .zip(&self.sample.per_option_samples)
            .map(|(p, s)| p.scores_for(s))
            .collect()
    }
}

/// `g(d_j, q_j)` for one document per option.
pub fn option_logits(reader: &impl PairScorer, docs: &[usize], instance: &McqaInstance) -> Result<Vec<f64>> {
    ensure!(
        docs.len() == instance.num_options(),
        "{} documents for {} options",
        docs.len(),
        instance.num_options()
    );
    docs.iter()
        .zip(&instance.option_queries)
        .map(|(&d, q)| reader.score(q, d))
        .collect()
}

/// Reader logits and `log ζ` for every sampled document, optionally with
/// their parameter gradients.
struct OptionEvaluation {
    logits: Vec<Vec<f64>>,
    log_zeta: Vec<Vec<f64>>,
    reader_grads: Vec<Vec<Vec<f64>>>,
    score_grads: Vec<Vec<Vec<f64>>>,
}

fn evaluate_options(
    state: &OptionRetrievalState,
    reader: &impl PairScorer,
    retriever: &impl PairScorer,
    instance: &McqaInstance,
    with_grads: bool,
) -> Result<OptionEvaluation> {
    let m = instance.num_options();
    ensure!(
        state.num_options() == m,
        "retrieval state has {} options, instance has {m}",
        state.num_options()
    );
    let f_phi = state.f_phi()?;
    let mut out = OptionEvaluation {
        logits: Vec::with_capacity(m),
        log_zeta: Vec::with_capacity(m),
        reader_grads: Vec::new(),
        score_grads: Vec::new(),
    };
    for (j, s) in state.sample.per_option_samples.iter().enumerate() {
        let q = &instance.option_queries[j];
        let (mut g, mut z, mut gg, mut fg) = (vec![], vec![], vec![], vec![]);
        for (&d, fp) in s.indices.iter().zip(&f_phi[j]) {
            if with_grads {
                let (gv, ggrad) = reader.score_and_grad(q, d)?;
                let (fv, fgrad) = retriever.score_and_grad(q, d)?;
                g.push(gv);
                z.push(fv - fp);
                gg.push(ggrad);
                fg.push(fgrad);
            } else {
                g.push(reader.score(q, d)?);
                z.push(retriever.score(q, d)? - fp);
            }
        }
        out.logits.push(g);
        out.log_zeta.push(z);
        if with_grads {
            out.reader_grads.push(gg);
            out.score_grads.push(fg);
        }
    }
    Ok(out)
}

pub fn mcqa_vod_objective(
    alpha: f64,
    state: &OptionRetrievalState,
    reader: &impl PairScorer,
    retriever: &impl PairScorer,
    instance: &McqaInstance,
    cap: usize,
) -> Result<BoundReport> {
    let ev = evaluate_options(state, reader, retriever, instance, false)?;
    let r = OptionSoftmaxReader {
        logits: &ev.logits,
        target: instance.correct,
    };
    product_vod_objective(alpha, &state.sample, &ev.log_zeta, &r, cap)
}

/// Objective, gradient, and the sampled-option accuracy signal for one instance.
#[derive(Debug, Clone, PartialEq)]
pub struct McqaStepResult {
    pub report: BoundReport,
    pub gradient: GradientEstimate,
    /// α = 0 objective of every option on this sample.
    pub option_values: Vec<f64>,
}

pub fn mcqa_vod_gradient(
    alpha: f64,
    state: &OptionRetrievalState,
    reader: &impl PairScorer,
    retriever: &impl PairScorer,
    instance: &McqaInstance,
    cap: usize,
) -> Result<GradientEstimate> {
    Ok(mcqa_vod_step(alpha, state, reader, retriever, instance, cap, false)?.gradient)
}

/// Gradient plus diagnostics. With `score_options`, also evaluates the α = 0
/// objective for every option on the same sample (no extra model calls).
pub fn mcqa_vod_step(
    alpha: f64,
    state: &OptionRetrievalState,
    reader: &impl PairScorer,
    retriever: &impl PairScorer,
    instance: &McqaInstance,
    cap: usize,
    score_options: bool,
) -> Result<McqaStepResult> {
    let ev = evaluate_options(state, reader, retriever, instance, true)?;
    let r = OptionSoftmaxReader {
        logits: &ev.logits,
        target: instance.correct,
    };
    let (report, coeffs) = product_vod_gradient(alpha, &state.sample, &ev.log_zeta, &r, cap)?;
    let mut reader_grad = vec![0.0; reader.num_params()];
    let mut retriever_grad = vec![0.0; retriever.num_params()];
    for j in 0..ev.logits.len() {
        for k in 0..ev.logits[j].len() {
            axpy(&mut reader_grad, coeffs.reader[j][k], &ev.reader_grads[j][k]);
            axpy(&mut retriever_grad, coeffs.retriever[j][k], &ev.score_grads[j][k]);
        }
    }
    if reader_grad.iter().chain(&retriever_grad).any(|g| !g.is_finite()) {
        return Err(VodError::NonFinite("multiple-choice gradient".into()));
    }
    let option_values = if score_options {
        option_objectives(0.0, &state.sample, &ev.logits, &ev.log_zeta, cap)?
    } else {
        Vec::new()
    };
    Ok(McqaStepResult {
        report,
        gradient: GradientEstimate {
            reader_grad,
            retriever_grad,
        },
        option_values,
    })
}

/// The objective of every option as target, sharing one enumeration.
fn option_objectives(
    alpha: f64,
    sample: &ProductSample,
    logits: &[Vec<f64>],
    log_zeta: &[Vec<f64>],
    cap: usize,
) -> Result<Vec<f64>> {
    check_alpha(alpha)?;
    check_product(sample, log_zeta, &OptionSoftmaxReader { logits, target: 0 }, cap)?;
    let base = ProductBase::new(sample, log_zeta);
    let denom: Vec<f64> = base.combos().map(|pos| combination_lse(logits, pos)).collect();
    (0..logits.len())
        .map(|target| {
            let ll: Vec<f64> = base
                .combos()
                .zip(&denom)
                .map(|(pos, d)| logits[target][pos[target]] - d)
                .collect();
            Ok(vod_value(alpha, &base.ls, &ll, &base.lz, base.log_ratio))
        })
        .collect()
}

/// `p̂(a | Q) = C⁻¹ Σ_c softmax_a L̂(a, Q | S_c)` with independent product
/// samples `S_c` of size `k` per option.
#[allow(clippy::too_many_arguments)]
pub fn mc_eval(
    instance: &McqaInstance,
    reader: &impl PairScorer,
    retriever: &impl PairScorer,
    proposals: &[TruncatedDistribution],
    k: usize,
    c: usize,
    alpha: f64,
    seed: u64,
    cap: usize,
) -> Result<Vec<f64>> {
    ensure!(c >= 1, "need at least one Monte-Carlo sample");
    let m = instance.num_options();
    let mut acc = vec![0.0; m];
    for rep in 0..c {
        let state = OptionRetrievalState::draw(proposals.to_vec(), k, derive_seed(seed, rep as u64))?;
        let ev = evaluate_options(&state, reader, retriever, instance, false)?;
        let values = option_objectives(alpha, &state.sample, &ev.logits, &ev.log_zeta, cap)?;
        for (a, p) in acc.iter_mut().zip(softmax(&values)) {
            *a += p;
        }
    }
    Ok(acc.into_iter().map(|a| a / c as f64).collect())
}

/// Argmax with ties to the smallest index.
pub fn predict(probs: &[f64]) -> Result<usize> {
    argmax(probs).ok_or_else(|| VodError::invalid("cannot predict from an empty probability vector"))
}

/// `<qid>\t<pred>\t<p_0,...,p_{M-1}>`.
pub fn format_prediction(qid: &str, probs: &[f64]) -> Result<String> {
    let pred = predict(probs)?;
    let ps: Vec<String> = probs.iter().map(|p| format!("{p:.6}")).collect();
    Ok(format!("{qid}\t{pred}\t{}", ps.join(",")))
}

/// Exhaustive RVB for the correct option, enumerating every combination of
/// the proposal supports. `α = 0` gives `log p(a★ | Q)`.
pub fn exact_mcqa_rvb(
    alpha: f64,
    reader: &impl PairScorer,
    retriever: &impl PairScorer,
    instance: &McqaInstance,
    proposals: &[TruncatedDistribution],
    cap: usize,
) -> Result<f64> {
    exact_mcqa_rvb_for(alpha, reader, retriever, instance, proposals, instance.correct, cap)
}

pub fn exact_mcqa_rvb_for(
    alpha: f64,
    reader: &impl PairScorer,
    retriever: &impl PairScorer,
    instance: &McqaInstance,
    proposals: &[TruncatedDistribution],
    target: usize,
    cap: usize,
) -> Result<f64> {
    check_alpha(alpha)?;
    let m = instance.num_options();
    ensure!(proposals.len() == m, "{} proposals for {m} options", proposals.len());
    ensure!(target < m, "target {target} out of range");
    let total = proposals.iter().fold(1usize, |a, p| a.saturating_mul(p.len()));
    if total > cap {
        return Err(VodError::ResourceLimit(format!(
            "{total} document combinations exceed the enumeration cap of {cap}"
        )));
    }
    let mut g = Vec::with_capacity(m);
    let mut log_prior = Vec::with_capacity(m);
    for (j, p) in proposals.iter().enumerate() {
        let q = &instance.option_queries[j];
        g.push(
            p.support
                .iter()
                .map(|&d| reader.score(q, d))
                .collect::<Result<Vec<_>>>()?,
        );
        let f = p
            .support
            .iter()
            .map(|&d| retriever.score(q, d))
            .collect::<Result<Vec<_>>>()?;
        log_prior.push(log_softmax(&f));
    }
    let one = is_alpha_one(alpha);
    let a = 1.0 - alpha;
    let mut lse = LogSumExp::new();
    let mut elbo_terms = Vec::new();
    for pos in Combinations::new(proposals.iter().map(|p| p.len()).collect()) {
        let logits: Vec<f64> = pos.iter().enumerate().map(|(j, &k)| g[j][k]).collect();
        let ll = logits[target] - logsumexp(&logits);
        let lp: f64 = pos.iter().enumerate().map(|(j, &k)| log_prior[j][k]).sum();
        let lr: f64 = pos.iter().enumerate().map(|(j, &k)| proposals[j].log_probs[k]).sum();
        let lw = ll + lp - lr;
        if one {
            elbo_terms.push(lr.exp() * lw);
        } else {
            lse.push(lr + a * lw);
        }
    }
    Ok(if one {
        pairwise_sum(&elbo_terms)
    } else {
        lse.value() / a
    })
}

/// A small random multiple-choice problem: random documents over a tiny
/// vocabulary, random linear reader and retriever, and noisy BM25 proposals
/// over the whole corpus.
#[derive(Debug, Clone)]
pub struct RandomMcqa {
    pub collection: Collection,
    pub instance: McqaInstance,
    pub reader: ScoreModel,
    pub retriever: ScoreModel,
    pub proposals: Vec<TruncatedDistribution>,
}

pub fn random_mcqa(n_docs: usize, n_options: usize, seed: u64) -> Result<RandomMcqa> {
    ensure!(n_docs >= 1, "need at least one document");
    let mut rng = crate::rng::stream(seed, 0);
    let word = |rng: &mut crate::rng::StreamRng| format!("w{}", rng.random_range(0..8));
    let texts: Vec<String> = (0..n_docs)
        .map(|_| {
            let len = rng.random_range(2..=5);
            (0..len).map(|_| word(&mut rng)).collect::<Vec<_>>().join(" ")
        })
        .collect();
    let collection = Collection::with_defaults(Corpus::from_texts(texts)?)?;
    let question = vec![word(&mut rng), word(&mut rng)];
    let options = (0..n_options).map(|_| vec![word(&mut rng)]).collect();
    let correct = rng.random_range(0..n_options.max(1));
    let instance = McqaInstance::new(format!("r{seed}"), question, options, correct)?;

    let vocab: Vec<String> = ["w0", "w1", "w2"].map(String::from).to_vec();
    let mut normal =
        |n: usize, std: f64| -> Vec<f64> { (0..n).map(|_| std * rng.sample::<f64, _>(StandardNormal)).collect() };
    let reader = ScoreModel::linear(vocab.clone());
    let reader = reader.clone().with_params(normal(reader.num_params(), 0.8))?;
    let retriever = ScoreModel::linear(vocab);
    let retriever = retriever.clone().with_params(normal(retriever.num_params(), 0.8))?;
    let proposals = instance
        .option_queries
        .iter()
        .map(|q| {
            let bm25 = collection.index.score_all(&q.tokens);
            let noise = normal(n_docs, 1.0);
            let f: Vec<f64> = bm25.iter().zip(&noise).map(|(b, e)| b + e).collect();
            softmax_on_support((0..n_docs).collect(), f)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RandomMcqa {
        collection,
        instance,
        reader,
        retriever,
        proposals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::{vod_objective, BoundInput};
    use crate::gradients::vod_gradient;
    use crate::sampling::{priority_sample, PrioritySample};

    fn collection() -> Collection {
        Collection::with_defaults(
            Corpus::from_texts([
                "aortic stenosis confirmed murmur",
                "mitral valve not prolapse",
                "aortic valve not stenosis",
                "tricuspid regurgitation confirmed",
                "chest pain",
                "valve murmur heard",
            ])
            .unwrap(),
        )
        .unwrap()
    }

    fn instance() -> McqaInstance {
        McqaInstance::new(
            "q0",
            tokenize("which valve has stenosis"),
            vec![tokenize("aortic"), tokenize("mitral"), tokenize("tricuspid")],
            0,
        )
        .unwrap()
    }

    fn vocab() -> Vec<String> {
        tokenize("confirmed not murmur valve")
    }

    fn models() -> (ScoreModel, ScoreModel) {
        let reader = ScoreModel::linear(vocab())
            .with_params(vec![0.3, -0.2, 0.4, 1.1, -0.9, 0.2, 0.1])
            .unwrap();
        let retriever = ScoreModel::linear(vocab())
            .with_params(vec![-0.1, 0.5, 0.2, 0.6, -0.3, 0.0, 0.4])
            .unwrap();
        (reader, retriever)
    }

    fn proposals(c: &Collection, inst: &McqaInstance, p: usize) -> Vec<TruncatedDistribution> {
        inst.option_queries
            .iter()
            .map(|q| {
                let s = c.index.score_all(&q.tokens);
                let support = crate::retrieval::build_support(&s, p).unwrap();
                let scores = support.iter().map(|&d| s[d] / 5.0).collect();
                softmax_on_support(support, scores).unwrap()
            })
            .collect()
    }

    #[test]
    fn logits_and_option_probs() {
        let c = collection();
        let inst = instance();
        let zero = ScoreModel::linear(vocab());
        let l = option_logits(&zero.bind(&c), &[0, 1, 2], &inst).unwrap();
        assert_eq!(l, vec![0.0; 3]);
        assert!(option_logits(&zero.bind(&c), &[0, 1], &inst).is_err());
        let p = softmax(&[3f64.ln(), 0.0]);
        assert!((p[0] - 0.75).abs() < 1e-15 && (p[1] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn needs_two_options() {
        assert!(McqaInstance::new("x", tokenize("q"), vec![tokenize("a")], 0).is_err());
        assert!(McqaInstance::new("x", tokenize("q"), vec![tokenize("a"), tokenize("b")], 2).is_err());
    }

    #[test]
    fn single_component_matches_single_latent() {
        let prop = softmax_on_support(vec![0, 1, 2, 3, 4], vec![0.2, 1.0, -0.5, 0.3, 0.0]).unwrap();
        let sample: PrioritySample = priority_sample(&prop.to_discrete().unwrap(), 3, 7).unwrap();
        let ll = vec![-0.4, -2.0, -0.1];
        let lz = vec![0.3, -0.2, 0.5];
        for alpha in [0.0, 0.4, 1.0] {
            let single =
                vod_objective(&BoundInput::new(alpha, sample.clone(), ll.clone(), lz.clone()).unwrap()).unwrap();
            let ps = ProductSample {
                per_option_samples: vec![sample.clone()],
            };
            let r = AdditiveReader {
                loglik: vec![ll.clone()],
            };
            let (prod, coeffs) = product_vod_gradient(alpha, &ps, std::slice::from_ref(&lz), &r, 100).unwrap();
            assert_eq!(single.value.to_bits(), prod.value.to_bits());

            let rg: Vec<Vec<f64>> = vec![vec![1.0, 0.0], vec![0.5, 2.0], vec![-1.0, 1.0]];
            let sg: Vec<Vec<f64>> = vec![vec![0.2], vec![-1.0], vec![0.7]];
            let direct = vod_gradient(
                &BoundInput::new(alpha, sample.clone(), ll.clone(), lz.clone()).unwrap(),
                &rg,
                &sg,
            )
            .unwrap();
            let mut reader = vec![0.0; 2];
            let mut retr = vec![0.0; 1];
            for k in 0..3 {
                axpy(&mut reader, coeffs.reader[0][k], &rg[k]);
                axpy(&mut retr, coeffs.retriever[0][k], &sg[k]);
            }
            for (a, b) in reader
                .iter()
                .zip(&direct.reader_grad)
                .chain(retr.iter().zip(&direct.retriever_grad))
            {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn exhaustive_objective_matches_oracle() {
        let c = collection();
        let inst = instance();
        let (reader, retriever) = models();
        let props = proposals(&c, &inst, 6);
        let state = OptionRetrievalState::draw(props.clone(), 6, 3).unwrap();
        for alpha in [0.0, 0.5, 1.0] {
            let vod = mcqa_vod_objective(
                alpha,
                &state,
                &reader.bind(&c),
                &retriever.bind(&c),
                &inst,
                DEFAULT_ENUMERATION_CAP,
            )
            .unwrap();
            let exact = exact_mcqa_rvb(
                alpha,
                &reader.bind(&c),
                &retriever.bind(&c),
                &inst,
                &props,
                DEFAULT_ENUMERATION_CAP,
            )
            .unwrap();
            assert!(
                (vod.value - exact).abs() < 1e-9,
                "alpha {alpha}: {} vs {exact}",
                vod.value
            );
            assert!((vod.per_doc_norm_weights.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn reader_calls_are_factorized() {
        let c = collection();
        let inst = instance();
        let (reader, retriever) = models();
        let state = OptionRetrievalState::draw(proposals(&c, &inst, 6), 4, 1).unwrap();
        let counted = crate::scoring::CountingScorer::new(reader.bind(&c));
        let rep = mcqa_vod_objective(
            0.3,
            &state,
            &counted,
            &retriever.bind(&c),
            &inst,
            DEFAULT_ENUMERATION_CAP,
        )
        .unwrap();
        assert_eq!(counted.calls(), 3 * 4);
        assert_eq!(rep.per_doc_norm_weights.len(), 64);
    }

    #[test]
    fn cap_is_enforced() {
        let c = collection();
        let inst = instance();
        let (reader, retriever) = models();
        let state = OptionRetrievalState::draw(proposals(&c, &inst, 6), 4, 1).unwrap();
        let err = mcqa_vod_objective(0.0, &state, &reader.bind(&c), &retriever.bind(&c), &inst, 63).unwrap_err();
        assert!(matches!(err, VodError::ResourceLimit(_)));
    }

    #[test]
    fn mc_eval_is_a_distribution() {
        let c = collection();
        let inst = instance();
        let (reader, retriever) = models();
        let props = proposals(&c, &inst, 5);
        let p = mc_eval(
            &inst,
            &reader.bind(&c),
            &retriever.bind(&c),
            &props,
            2,
            4,
            0.0,
            9,
            DEFAULT_ENUMERATION_CAP,
        )
        .unwrap();
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(p.iter().all(|x| (0.0..=1.0).contains(x)));
    }

    #[test]
    fn prediction_rules() {
        assert_eq!(predict(&[0.1, 0.7, 0.2]).unwrap(), 1);
        assert_eq!(predict(&[0.25; 4]).unwrap(), 0);
        assert!(predict(&[]).is_err());
        assert_eq!(
            format_prediction("q7", &[0.25, 0.75]).unwrap(),
            "q7\t1\t0.250000,0.750000"
        );
    }
}
