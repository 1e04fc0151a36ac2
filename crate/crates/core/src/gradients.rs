//! Analytic gradients of the VOD objective and the exact RVB, plus a
//! central-difference checker.

use crate::bounds::{check_alpha, is_alpha_one, BoundInput};
use crate::error::{ensure, Result, VodError};
use crate::latent::LatentModel;
use crate::math::{axpy, log_softmax, logsumexp, softmax};
use crate::retrieval::TruncatedDistribution;
use crate::sampling::PrioritySample;

#[derive(Debug, Clone, PartialEq)]
pub struct GradientEstimate {
    pub reader_grad: Vec<f64>,
    pub retriever_grad: Vec<f64>,
}

/// `ρ_j = s_j ζ_j / Σ_k s_k ζ_k`, the sampled estimate of `p_θ(d_j | q)`.
pub(crate) fn ratio_weights(log_s: &[f64], log_zeta: &[f64]) -> Vec<f64> {
    let terms: Vec<f64> = log_s.iter().zip(log_zeta).map(|(s, z)| s + z).collect();
    softmax(&terms)
}

fn check_grads(grads: &[Vec<f64>], k: usize, what: &str) -> Result<usize> {
    ensure!(grads.len() == k, "expected {k} {what} gradients, got {}", grads.len());
    let dim = grads.first().map_or(0, Vec::len);
    ensure!(
        grads.iter().all(|g| g.len() == dim),
        "{what} gradients differ in length"
    );
    Ok(dim)
}

/// `h(d_t) = ∇f_θ(d_t) − Σ_j ρ_j ∇f_θ(d_j)`.
pub fn retriever_logprob_grad(
    sample: &PrioritySample,
    log_zeta: &[f64],
    score_grads: &[Vec<f64>],
    target: usize,
) -> Result<Vec<f64>> {
    ensure!(
        target < sample.len(),
        "target {target} outside a sample of {}",
        sample.len()
    );
    ensure!(
        log_zeta.len() == sample.len(),
        "one ratio per sampled document required"
    );
    let dim = check_grads(score_grads, sample.len(), "score")?;
    let rho = ratio_weights(&sample.log_norm_weights(), log_zeta);
    let mut h = score_grads[target].clone();
    for (r, g) in rho.iter().zip(score_grads) {
        axpy(&mut h, -r, g);
    }
    debug_assert_eq!(h.len(), dim);
    Ok(h)
}

/// Weights `softmax(log s_i + (1 − α)(ℓ_i + log ζ_i))`; exactly `s` at `α = 1`.
pub(crate) fn vod_weights(alpha: f64, log_s: &[f64], loglik: &[f64], log_zeta: &[f64]) -> Vec<f64> {
    if is_alpha_one(alpha) {
        return log_s.iter().map(|l| l.exp()).collect();
    }
    let a = 1.0 - alpha;
    let terms: Vec<f64> = (0..log_s.len())
        .map(|i| log_s[i] + a * (loglik[i] + log_zeta[i]))
        .collect();
    softmax(&terms)
}

/// `Σ_i ω_i (∇ℓ_i + h_i)`, split into the reader and retriever blocks.
pub fn vod_gradient(
    input: &BoundInput,
    reader_grads: &[Vec<f64>],
    score_grads: &[Vec<f64>],
) -> Result<GradientEstimate> {
    input.validate()?;
    let k = input.sample.len();
    let reader_dim = check_grads(reader_grads, k, "reader")?;
    let retriever_dim = check_grads(score_grads, k, "score")?;
    let log_s = input.sample.log_norm_weights();
    let omega = vod_weights(input.alpha, &log_s, &input.reader_loglik, &input.log_zeta);
    let rho = ratio_weights(&log_s, &input.log_zeta);

    let mut reader_grad = vec![0.0; reader_dim];
    let mut retriever_grad = vec![0.0; retriever_dim];
    // Σ_i ω_i h_i = Σ_i (ω_i − ρ_i) ∇f_i because Σ ω = 1.
    for i in 0..k {
        axpy(&mut reader_grad, omega[i], &reader_grads[i]);
        axpy(&mut retriever_grad, omega[i] - rho[i], &score_grads[i]);
    }
    finite_estimate(reader_grad, retriever_grad)
}

/// Gradient of the sampled objective, evaluating the model on the sampled
/// documents only.
pub fn evaluate_vod_gradient(
    model: &impl LatentModel,
    proposal: &TruncatedDistribution,
    sample: &PrioritySample,
    alpha: f64,
) -> Result<GradientEstimate> {
    let f_phi = proposal.scores_for(sample)?;
    model.encode_query()?;
    let k = sample.len();
    let (mut loglik, mut log_zeta) = (Vec::with_capacity(k), Vec::with_capacity(k));
    let (mut reader_grads, mut score_grads) = (Vec::with_capacity(k), Vec::with_capacity(k));
    for (&d, fp) in sample.indices.iter().zip(&f_phi) {
        let (l, gl) = model.reader_loglik_grad(d)?;
        let (f, gf) = model.retriever_score_grad(d)?;
        loglik.push(l);
        log_zeta.push(f - fp);
        reader_grads.push(gl);
        score_grads.push(gf);
    }
    let input = BoundInput::new(alpha, sample.clone(), loglik, log_zeta)?;
    vod_gradient(&input, &reader_grads, &score_grads)
}

/// `E_r[w̃^{1−α} ∇ log p(a, d | q)]` enumerated over the proposal support.
pub fn exact_rvb_gradient(
    alpha: f64,
    model: &impl LatentModel,
    proposal: &TruncatedDistribution,
) -> Result<GradientEstimate> {
    check_alpha(alpha)?;
    let n = proposal.len();
    let (mut loglik, mut f) = (Vec::with_capacity(n), Vec::with_capacity(n));
    let (mut reader_grads, mut score_grads) = (Vec::with_capacity(n), Vec::with_capacity(n));
    for &d in &proposal.support {
        let (l, gl) = model.reader_loglik_grad(d)?;
        let (fd, gf) = model.retriever_score_grad(d)?;
        loglik.push(l);
        f.push(fd);
        reader_grads.push(gl);
        score_grads.push(gf);
    }
    let log_prior = log_softmax(&f);
    let weights: Vec<f64> = if is_alpha_one(alpha) {
        proposal.probs()
    } else {
        let a = 1.0 - alpha;
        let terms: Vec<f64> = (0..n)
            .map(|i| proposal.log_probs[i] + a * (loglik[i] + log_prior[i] - proposal.log_probs[i]))
            .collect();
        let lse = logsumexp(&terms);
        terms.iter().map(|t| (t - lse).exp()).collect()
    };
    let prior: Vec<f64> = log_prior.iter().map(|l| l.exp()).collect();
    let mut reader_grad = vec![0.0; model.num_reader_params()];
    let mut retriever_grad = vec![0.0; model.num_retriever_params()];
    let mut mean_score_grad = vec![0.0; model.num_retriever_params()];
    for i in 0..n {
        axpy(&mut mean_score_grad, prior[i], &score_grads[i]);
    }
    let total: f64 = weights.iter().sum();
    for i in 0..n {
        axpy(&mut reader_grad, weights[i], &reader_grads[i]);
        axpy(&mut retriever_grad, weights[i], &score_grads[i]);
    }
    axpy(&mut retriever_grad, -total, &mean_score_grad);
    finite_estimate(reader_grad, retriever_grad)
}

fn finite_estimate(reader_grad: Vec<f64>, retriever_grad: Vec<f64>) -> Result<GradientEstimate> {
    if reader_grad.iter().chain(&retriever_grad).any(|g| !g.is_finite()) {
        return Err(VodError::NonFinite("gradient".into()));
    }
    Ok(GradientEstimate {
        reader_grad,
        retriever_grad,
    })
}

/// Central differences `(f(θ + h e_i) − f(θ − h e_i)) / 2h`.
pub fn finite_difference(mut objective: impl FnMut(&[f64]) -> f64, theta: &[f64], h: f64) -> Result<Vec<f64>> {
    ensure!(h > 0.0 && h.is_finite(), "step must be positive, got {h}");
    let mut point = theta.to_vec();
    let mut out = Vec::with_capacity(theta.len());
    for i in 0..theta.len() {
        point[i] = theta[i] + h;
        let up = objective(&point);
        point[i] = theta[i] - h;
        let down = objective(&point);
        point[i] = theta[i];
        if !up.is_finite() || !down.is_finite() {
            return Err(VodError::NonFinite(format!("objective at coordinate {i}")));
        }
        out.push((up - down) / (2.0 * h));
    }
    Ok(out)
}

/// `|a − b| / max(|a|, |b|, floor)`. The floor keeps coordinates whose true
/// derivative is near zero from turning rounding noise into a large ratio.
pub fn relative_error(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

pub fn max_relative_error(a: &[f64], b: &[f64], floor: f64) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| relative_error(*x, *y, floor))
        .fold(0.0, f64::max)
}
