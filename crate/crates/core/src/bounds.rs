//! The sampled VOD objective and the exhaustive oracles it is checked against.
//!
//! Notation: `s_i` are self-normalized priority weights drawn from `r_φ`,
//! `ℓ_i = log p(a | d_i, q)` and `log ζ_i = f_θ(d_i) − f_φ(d_i)`. The
//! estimate of `log v̂_i` never needs the retriever normalizer `Z_θ`: the
//! ratio `Z_θ / Z_φ` is itself estimated from the sample.

use rand::Rng;

use crate::error::{ensure, Result, VodError};
use crate::latent::LatentModel;
use crate::math::{logsumexp, pairwise_sum, LogSumExp};
use crate::retrieval::{effective_sample_size_log, TruncatedDistribution};
use crate::rng;
use crate::sampling::PrioritySample;

/// Below this distance from 1, `α` is treated as exactly 1.
pub const ALPHA_ONE_TOL: f64 = 1e-6;

pub(crate) fn is_alpha_one(alpha: f64) -> bool {
    (1.0 - alpha).abs() < ALPHA_ONE_TOL
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    ensure!(
        alpha.is_finite() && (0.0..=1.0).contains(&alpha),
        "alpha must lie in [0, 1], got {alpha}"
    );
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundInput {
    pub alpha: f64,
    pub sample: PrioritySample,
    pub reader_loglik: Vec<f64>,
    pub log_zeta: Vec<f64>,
}

impl BoundInput {
    pub fn new(alpha: f64, sample: PrioritySample, reader_loglik: Vec<f64>, log_zeta: Vec<f64>) -> Result<Self> {
        let input = Self {
            alpha,
            sample,
            reader_loglik,
            log_zeta,
        };
        input.validate()?;
        Ok(input)
    }

    pub fn validate(&self) -> Result<()> {
        check_alpha(self.alpha)?;
        ensure!(!self.sample.is_empty(), "empty sample");
        let k = self.sample.len();
        ensure!(
            self.reader_loglik.len() == k && self.log_zeta.len() == k,
            "sample has {k} documents but {} reader values and {} ratios",
            self.reader_loglik.len(),
            self.log_zeta.len()
        );
        ensure!(
            self.reader_loglik.iter().chain(&self.log_zeta).all(|x| !x.is_nan()),
            "NaN in bound input"
        );
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub value: f64,
    /// ESS of the combined weights `s_i · v̂_i`.
    pub ess: f64,
    /// `softmax(log s_i + (1 − α) log v̂_i)`; equals `s` at `α = 1`.
    pub per_doc_norm_weights: Vec<f64>,
}

/// Shared by the single-latent and multiple-choice paths. All slices are
/// indexed by sample element (document or document combination).
pub(crate) struct VodTerms {
    pub value: f64,
    pub ess: f64,
    pub log_weights: Vec<f64>,
}

pub(crate) fn vod_core(
    alpha: f64,
    log_s: &[f64],
    loglik: &[f64],
    log_zeta: &[f64],
    log_ratio: f64,
) -> Result<VodTerms> {
    let log_v: Vec<f64> = loglik.iter().zip(log_zeta).map(|(l, z)| l + z - log_ratio).collect();
    let (value, log_weights) = if is_alpha_one(alpha) {
        let terms: Vec<f64> = log_s.iter().zip(&log_v).map(|(ls, lv)| ls.exp() * lv).collect();
        (pairwise_sum(&terms), log_s.to_vec())
    } else {
        let a = 1.0 - alpha;
        let terms: Vec<f64> = log_s.iter().zip(&log_v).map(|(ls, lv)| ls + a * lv).collect();
        let lse = logsumexp(&terms);
        (lse / a, terms.iter().map(|t| t - lse).collect())
    };
    if value.is_nan() {
        return Err(VodError::NonFinite("VOD objective is NaN".into()));
    }
    let combined: Vec<f64> = log_s.iter().zip(&log_v).map(|(ls, lv)| ls + lv).collect();
    let ess = effective_sample_size_log(&combined).unwrap_or(0.0);
    Ok(VodTerms {
        value,
        ess,
        log_weights,
    })
}

/// The objective value alone, streamed without intermediate buffers.
pub(crate) fn vod_value(alpha: f64, log_s: &[f64], loglik: &[f64], log_zeta: &[f64], log_ratio: f64) -> f64 {
    let log_v = loglik.iter().zip(log_zeta).map(|(l, z)| l + z - log_ratio);
    if is_alpha_one(alpha) {
        log_s.iter().zip(log_v).map(|(ls, lv)| ls.exp() * lv).sum()
    } else {
        let a = 1.0 - alpha;
        let mut acc = LogSumExp::new();
        for (ls, lv) in log_s.iter().zip(log_v) {
            acc.push(ls + a * lv);
        }
        acc.value() / a
    }
}

/// `log Σ_j s_j ζ_j`, the sampled estimate of `log(Z_θ / Z_φ)`.
pub fn normalizer_ratio_log_estimate(sample: &PrioritySample, log_zeta: &[f64]) -> Result<f64> {
    ensure!(!sample.is_empty(), "empty sample");
    ensure!(
        log_zeta.len() == sample.len(),
        "one ratio per sampled document required"
    );
    let terms: Vec<f64> = sample
        .norm_weights
        .iter()
        .zip(log_zeta)
        .map(|(s, z)| s.ln() + z)
        .collect();
    Ok(logsumexp(&terms))
}

pub fn vod_objective(input: &BoundInput) -> Result<BoundReport> {
    input.validate()?;
    let log_s = input.sample.log_norm_weights();
    let log_ratio = normalizer_ratio_log_estimate(&input.sample, &input.log_zeta)?;
    let terms = vod_core(input.alpha, &log_s, &input.reader_loglik, &input.log_zeta, log_ratio)?;
    Ok(BoundReport {
        value: terms.value,
        ess: terms.ess,
        per_doc_norm_weights: terms.log_weights.iter().map(|l| l.exp()).collect(),
    })
}

/// Evaluates the model on the sampled documents only: one query encoding,
/// then one reader and one retriever call per document.
pub fn vod_input(
    model: &impl LatentModel,
    proposal: &TruncatedDistribution,
    sample: &PrioritySample,
    alpha: f64,
) -> Result<BoundInput> {
    let f_phi = proposal.scores_for(sample)?;
    model.encode_query()?;
    let mut reader_loglik = Vec::with_capacity(sample.len());
    let mut log_zeta = Vec::with_capacity(sample.len());
    for (&d, fp) in sample.indices.iter().zip(&f_phi) {
        reader_loglik.push(model.reader_loglik(d)?);
        log_zeta.push(model.retriever_score(d)? - fp);
    }
    BoundInput::new(alpha, sample.clone(), reader_loglik, log_zeta)
}

pub fn evaluate_vod(
    model: &impl LatentModel,
    proposal: &TruncatedDistribution,
    sample: &PrioritySample,
    alpha: f64,
) -> Result<BoundReport> {
    vod_objective(&vod_input(model, proposal, sample, alpha)?)
}

/// The α = 0 objective on a sample that covers the whole truncated support:
/// the top-K marginal likelihood.
pub fn realm_objective(
    model: &impl LatentModel,
    proposal: &TruncatedDistribution,
    sample: &PrioritySample,
) -> Result<f64> {
    ensure!(
        sample.is_exhaustive() && sample.len() == proposal.len(),
        "the REALM objective needs a sample covering the whole support ({} of {} documents)",
        sample.len(),
        proposal.len()
    );
    Ok(evaluate_vod(model, proposal, sample, 0.0)?.value)
}

// Exhaustive oracles. These enumerate the support directly and share no
// code with the sampled path beyond `logsumexp`.

struct Exhaustive {
    loglik: Vec<f64>,
    log_prior: Vec<f64>,
    log_r: Vec<f64>,
}

impl Exhaustive {
    fn new(model: &impl LatentModel, proposal: &TruncatedDistribution) -> Result<Self> {
        let loglik = proposal
            .support
            .iter()
            .map(|&d| model.reader_loglik(d))
            .collect::<Result<Vec<_>>>()?;
        let f = proposal
            .support
            .iter()
            .map(|&d| model.retriever_score(d))
            .collect::<Result<Vec<_>>>()?;
        let lz = logsumexp(&f);
        Ok(Self {
            loglik,
            log_prior: f.iter().map(|x| x - lz).collect(),
            log_r: proposal.log_probs.clone(),
        })
    }

    fn log_w(&self) -> Vec<f64> {
        (0..self.loglik.len())
            .map(|i| self.loglik[i] + self.log_prior[i] - self.log_r[i])
            .collect()
    }
}

/// `log Σ_d p(a|d) p_θ(d|q)` over `support`, with `p_θ` truncated to it.
pub fn exact_marginal_log_likelihood(model: &impl LatentModel, support: &[usize]) -> Result<f64> {
    ensure!(!support.is_empty(), "empty support");
    let mut joint = Vec::with_capacity(support.len());
    let mut f = Vec::with_capacity(support.len());
    for &d in support {
        let fd = model.retriever_score(d)?;
        joint.push(model.reader_loglik(d)? + fd);
        f.push(fd);
    }
    Ok(logsumexp(&joint) - logsumexp(&f))
}

/// `E_r[log w]` with `w = p(a|d) p_θ(d|q) / r(d)`.
pub fn exact_elbo(model: &impl LatentModel, proposal: &TruncatedDistribution) -> Result<f64> {
    let ex = Exhaustive::new(model, proposal)?;
    let terms: Vec<f64> = ex
        .log_w()
        .iter()
        .zip(&ex.log_r)
        .map(|(lw, lr)| if *lr == f64::NEG_INFINITY { 0.0 } else { lr.exp() * lw })
        .collect();
    Ok(pairwise_sum(&terms))
}

/// `(1 − α)⁻¹ log E_r[w^{1−α}]`; the ELBO at `α = 1`.
pub fn exact_rvb(alpha: f64, model: &impl LatentModel, proposal: &TruncatedDistribution) -> Result<f64> {
    check_alpha(alpha)?;
    if is_alpha_one(alpha) {
        return exact_elbo(model, proposal);
    }
    let ex = Exhaustive::new(model, proposal)?;
    let a = 1.0 - alpha;
    let terms: Vec<f64> = ex.log_w().iter().zip(&ex.log_r).map(|(lw, lr)| lr + a * lw).collect();
    Ok(logsumexp(&terms) / a)
}

/// `(1 − α)⁻¹ log(K⁻¹ Σ_i w_i^{1−α})` over `k` i.i.d. draws from `r`.
pub fn iw_rvb_with_replacement(
    alpha: f64,
    model: &impl LatentModel,
    proposal: &TruncatedDistribution,
    k: usize,
    seed: u64,
) -> Result<f64> {
    check_alpha(alpha)?;
    ensure!(k >= 1, "k must be at least 1");
    let ex = Exhaustive::new(model, proposal)?;
    let log_w = ex.log_w();
    let probs = proposal.probs();
    let mut rng = rng::stream(seed, 0);
    let draws: Vec<f64> = (0..k)
        .map(|_| {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut pick = probs.len() - 1;
            for (i, p) in probs.iter().enumerate() {
                acc += p;
                if u < acc {
                    pick = i;
                    break;
                }
            }
            log_w[pick]
        })
        .collect();
    if is_alpha_one(alpha) {
        return Ok(pairwise_sum(&draws) / k as f64);
    }
    let a = 1.0 - alpha;
    let scaled: Vec<f64> = draws.iter().map(|lw| a * lw).collect();
    Ok((logsumexp(&scaled) - (k as f64).ln()) / a)
}
