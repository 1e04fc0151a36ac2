//! Round-based training: re-index, then `T` sampled gradient steps with `α`
//! from the schedule, then evaluation.

use std::io::Write;

use rand::seq::index;
use serde::{Deserialize, Serialize};

use super::models::Models;
use super::optimizer::{AdamConfig, AdamState};
use super::reindex::{reindex, RoundCache};
use super::schedule::AlphaSchedule;
use crate::error::{ensure, Result, VodError};
use crate::math::{argmax, axpy, pairwise_sum};
use crate::mcqa::{mc_eval, mcqa_vod_step, McqaInstance, OptionRetrievalState, DEFAULT_ENUMERATION_CAP};
use crate::retrieval::{kl_divergence, softmax_on_support, TruncatedDistribution};
use crate::rng::{self, derive_seed};
use crate::scoring::{Collection, PairScorer, QueryRecord, ScoreModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RetrieverMode {
    /// `f_θ` is learned.
    Trained,
    /// `f_θ := f_φ`: the retriever is the cached proposal and never updated.
    Frozen,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub rounds: usize,
    pub steps_per_round: usize,
    pub k: usize,
    pub options: usize,
    pub support: usize,
    pub eval_samples: usize,
    pub batch_size: usize,
    pub hybrid_tau: f64,
    pub alpha_schedule: AlphaSchedule,
    pub eval_alpha: f64,
    pub retriever_mode: RetrieverMode,
    pub enumeration_cap: usize,
    pub optimizer: AdamConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            rounds: 2,
            steps_per_round: 125,
            k: 8,
            options: 4,
            support: 100,
            eval_samples: 10,
            batch_size: 8,
            hybrid_tau: 5.0,
            alpha_schedule: AlphaSchedule::Linear,
            eval_alpha: 0.0,
            retriever_mode: RetrieverMode::Trained,
            enumeration_cap: DEFAULT_ENUMERATION_CAP,
            optimizer: AdamConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        ensure!(self.k >= 1, "k must be at least 1");
        ensure!(
            self.k <= self.support,
            "k = {} exceeds the support size {}",
            self.k,
            self.support
        );
        ensure!(self.options >= 2, "need at least 2 options");
        ensure!(self.eval_samples >= 1, "need at least one evaluation sample");
        ensure!(self.batch_size >= 1, "batch size must be at least 1");
        ensure!(self.hybrid_tau > 0.0, "hybrid temperature must be positive");
        ensure!((0.0..=1.0).contains(&self.eval_alpha), "eval alpha must lie in [0, 1]");
        Ok(())
    }
}

/// Scores documents with the cached proposal: `f_θ := f_φ`, no parameters.
struct ProposalScorer<'a> {
    queries: &'a [QueryRecord],
    proposals: &'a [TruncatedDistribution],
}

impl PairScorer for ProposalScorer<'_> {
    fn num_params(&self) -> usize {
        0
    }

    fn score(&self, query: &QueryRecord, doc_id: usize) -> Result<f64> {
        let j = self
            .queries
            .iter()
            .position(|q| q == query)
            .ok_or_else(|| VodError::invalid("query has no cached proposal"))?;
        self.proposals[j]
            .score_of(doc_id)
            .ok_or_else(|| VodError::invalid(format!("document {doc_id} is outside the cached support")))
    }

    fn score_and_grad(&self, query: &QueryRecord, doc_id: usize) -> Result<(f64, Vec<f64>)> {
        Ok((self.score(query, doc_id)?, Vec::new()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepMetrics {
    pub step: usize,
    pub alpha: f64,
    pub objective: f64,
    pub ess: f64,
    /// Mean `KL(r_φ ‖ p_θ)` over the cached supports of the batch.
    pub kl: f64,
    pub train_acc: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MetricsTrace {
    pub steps: Vec<StepMetrics>,
    /// `(round, accuracy)`; round 0 is the evaluation before training.
    pub evals: Vec<(usize, f64)>,
}

impl MetricsTrace {
    pub fn write_csv(&self, mut out: impl Write) -> Result<()> {
        writeln!(out, "step,alpha,objective,ess,kl,train_acc")?;
        for s in &self.steps {
            writeln!(
                out,
                "{},{:.9},{:.9},{:.9},{:.9},{:.9}",
                s.step, s.alpha, s.objective, s.ess, s.kl, s.train_acc
            )?;
        }
        writeln!(out, "round,eval_acc")?;
        for (r, a) in &self.evals {
            writeln!(out, "{r},{a:.9}")?;
        }
        Ok(())
    }

    pub fn final_eval(&self) -> Option<f64> {
        self.evals.last().map(|(_, a)| *a)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub reader: AdamState,
    pub retriever: AdamState,
}

impl OptimizerState {
    pub fn new(models: &Models) -> Self {
        Self {
            reader: AdamState::new(models.reader.num_params()),
            retriever: AdamState::new(models.retriever.num_params()),
        }
    }
}

/// Mean `KL(r_φ(·|q_j) ‖ p_θ(·|q_j))` over the options of one instance.
pub fn option_kl(
    instance: &McqaInstance,
    proposals: &[TruncatedDistribution],
    retriever: &ScoreModel,
    collection: &Collection,
) -> Result<f64> {
    let mut total = 0.0;
    for (q, r) in instance.option_queries.iter().zip(proposals) {
        let f = r
            .support
            .iter()
            .map(|&d| retriever.score(q, d, collection))
            .collect::<Result<Vec<_>>>()?;
        let p = softmax_on_support(r.support.clone(), f)?;
        total += kl_divergence(r, &p)?;
    }
    Ok(total / proposals.len() as f64)
}

/// One optimizer update from a batch of `(instance, cached proposals)`.
/// Per-instance gradients are averaged; the objective is maximized.
#[allow(clippy::too_many_arguments)]
pub fn train_step(
    batch: &[(&McqaInstance, &[TruncatedDistribution])],
    collection: &Collection,
    models: &mut Models,
    opt_state: &mut OptimizerState,
    alpha: f64,
    cfg: &TrainConfig,
    step: usize,
    seed: u64,
) -> Result<StepMetrics> {
    ensure!(!batch.is_empty(), "empty batch");
    let frozen = cfg.retriever_mode == RetrieverMode::Frozen;
    let mut reader_grad = vec![0.0; models.reader.num_params()];
    let mut retriever_grad = vec![0.0; models.retriever.num_params()];
    let (mut objective, mut ess, mut kl, mut correct) = (Vec::new(), Vec::new(), Vec::new(), 0usize);

    for (i, (inst, proposals)) in batch.iter().enumerate() {
        let state = OptionRetrievalState::draw(proposals.to_vec(), cfg.k, derive_seed(seed, i as u64))?;
        let reader = models.reader.bind(collection);
        let result = if frozen {
            let retr = ProposalScorer {
                queries: &inst.option_queries,
                proposals,
            };
            mcqa_vod_step(alpha, &state, &reader, &retr, inst, cfg.enumeration_cap, true)?
        } else {
            let retr = models.retriever.bind(collection);
            mcqa_vod_step(alpha, &state, &reader, &retr, inst, cfg.enumeration_cap, true)?
        };
        axpy(&mut reader_grad, 1.0, &result.gradient.reader_grad);
        if !frozen {
            axpy(&mut retriever_grad, 1.0, &result.gradient.retriever_grad);
            kl.push(option_kl(inst, proposals, &models.retriever, collection)?);
        }
        objective.push(result.report.value);
        ess.push(result.report.ess);
        if argmax(&result.option_values) == Some(inst.correct) {
            correct += 1;
        }
    }

    let n = batch.len() as f64;
    let neg = |g: Vec<f64>| -> Vec<f64> { g.into_iter().map(|x| -x / n).collect() };
    cfg.optimizer
        .step(&mut models.reader.params, &neg(reader_grad), &mut opt_state.reader)?;
    if !frozen {
        cfg.optimizer.step(
            &mut models.retriever.params,
            &neg(retriever_grad),
            &mut opt_state.retriever,
        )?;
    }
    let mean = |v: &[f64]| {
        if v.is_empty() {
            0.0
        } else {
            pairwise_sum(v) / v.len() as f64
        }
    };
    Ok(StepMetrics {
        step,
        alpha,
        objective: mean(&objective),
        ess: mean(&ess),
        kl: mean(&kl),
        train_acc: correct as f64 / n,
    })
}

/// Per-instance option probabilities and accuracy under Monte-Carlo evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalResult {
    pub accuracy: f64,
    pub probabilities: Vec<Vec<f64>>,
}

pub fn evaluate(
    instances: &[McqaInstance],
    cache: &RoundCache,
    collection: &Collection,
    models: &Models,
    cfg: &TrainConfig,
    seed: u64,
) -> Result<EvalResult> {
    ensure!(!instances.is_empty(), "nothing to evaluate");
    ensure!(
        cache.proposals.len() == instances.len(),
        "cache does not cover the evaluation set"
    );
    let reader = models.reader.bind(collection);
    let mut probabilities = Vec::with_capacity(instances.len());
    let mut correct = 0;
    for (i, (inst, proposals)) in instances.iter().zip(&cache.proposals).enumerate() {
        let s = derive_seed(seed, i as u64);
        let p = match cfg.retriever_mode {
            RetrieverMode::Frozen => {
                let retr = ProposalScorer {
                    queries: &inst.option_queries,
                    proposals,
                };
                mc_eval(
                    inst,
                    &reader,
                    &retr,
                    proposals,
                    cfg.k,
                    cfg.eval_samples,
                    cfg.eval_alpha,
                    s,
                    cfg.enumeration_cap,
                )?
            }
            RetrieverMode::Trained => {
                let retr = models.retriever.bind(collection);
                mc_eval(
                    inst,
                    &reader,
                    &retr,
                    proposals,
                    cfg.k,
                    cfg.eval_samples,
                    cfg.eval_alpha,
                    s,
                    cfg.enumeration_cap,
                )?
            }
        };
        if argmax(&p) == Some(inst.correct) {
            correct += 1;
        }
        probabilities.push(p);
    }
    Ok(EvalResult {
        accuracy: correct as f64 / instances.len() as f64,
        probabilities,
    })
}

/// Proposal cache for evaluation: the current retriever is the checkpoint
/// term, except for a frozen retriever, which stays on BM25.
pub fn eval_cache(
    instances: &[McqaInstance],
    collection: &Collection,
    models: &Models,
    cfg: &TrainConfig,
) -> Result<RoundCache> {
    let ckpt = match cfg.retriever_mode {
        RetrieverMode::Trained => Some(&models.retriever),
        RetrieverMode::Frozen => None,
    };
    reindex(collection, instances, ckpt, cfg.support, cfg.hybrid_tau)
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub trace: MetricsTrace,
    pub models: Models,
    pub notices: Vec<String>,
    /// The last evaluation, with per-question option probabilities.
    pub final_eval: Option<EvalResult>,
}

/// Runs `rounds × steps_per_round` updates. Fully determined by the inputs
/// and `seed`.
pub fn run_training(
    cfg: &TrainConfig,
    train: &[McqaInstance],
    eval: &[McqaInstance],
    collection: &Collection,
    initial: Models,
    seed: u64,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    ensure!(!train.is_empty(), "empty training set");
    ensure!(
        train.iter().chain(eval).all(|i| i.num_options() == cfg.options),
        "every question must have {} options",
        cfg.options
    );
    let mut models = initial;
    let mut opt_state = OptimizerState::new(&models);
    let mut trace = MetricsTrace::default();
    let mut notices = Vec::new();

    let mut final_eval = None;
    let mut run_eval = |models: &Models, round: usize, trace: &mut MetricsTrace| -> Result<()> {
        if eval.is_empty() {
            return Ok(());
        }
        let cache = eval_cache(eval, collection, models, cfg)?;
        let r = evaluate(
            eval,
            &cache,
            collection,
            models,
            cfg,
            derive_seed(seed, 1_000_000 + round as u64),
        )?;
        trace.evals.push((round, r.accuracy));
        final_eval = Some(r);
        Ok(())
    };
    run_eval(&models, 0, &mut trace)?;

    let batch_size = cfg.batch_size.min(train.len());
    for round in 0..cfg.rounds {
        if cfg.steps_per_round == 0 {
            continue;
        }
        let ckpt = if round == 0 || cfg.retriever_mode == RetrieverMode::Frozen {
            None
        } else {
            Some(models.retriever.clone())
        };
        let cache = reindex(collection, train, ckpt.as_ref(), cfg.support, cfg.hybrid_tau)?;
        notices.extend(cache.notices.iter().cloned());
        for t in 0..cfg.steps_per_round {
            let step = round * cfg.steps_per_round + t;
            let alpha = cfg.alpha_schedule.alpha_at(step, cfg.steps_per_round);
            let step_seed = derive_seed(seed, step as u64);
            let mut pick = rng::stream(step_seed, 1);
            let idx = index::sample(&mut pick, train.len(), batch_size);
            let batch: Vec<(&McqaInstance, &[TruncatedDistribution])> =
                idx.iter().map(|i| (&train[i], cache.proposals[i].as_slice())).collect();
            let m = train_step(
                &batch,
                collection,
                &mut models,
                &mut opt_state,
                alpha,
                cfg,
                step,
                step_seed,
            )?;
            trace.steps.push(m);
        }
        run_eval(&models, round + 1, &mut trace)?;
    }
    Ok(TrainOutcome {
        trace,
        models,
        notices,
        final_eval,
    })
}
