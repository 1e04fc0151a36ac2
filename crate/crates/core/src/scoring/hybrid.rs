use crate::error::{ensure, Result};

/// Temperature applied to the BM25 part of the sampling score.
pub const DEFAULT_HYBRID_TAU: f64 = 5.0;

/// Sampling score `f_ckpt + (bm25_q + β·bm25_a) / τ`.
pub fn hybrid_posterior_score(ckpt_score: f64, bm25_q: f64, bm25_a: f64, tau: f64, beta: f64) -> Result<f64> {
    ensure!(tau > 0.0 && tau.is_finite(), "tau must be positive, got {tau}");
    Ok(ckpt_score + (bm25_q + beta * bm25_a) / tau)
}

/// `β = 1 + 0.5·max(0, ln(L_q / L_a))`, so long questions do not drown out
/// the answer's BM25 score.
pub fn beta_correction(len_q: usize, len_a: usize) -> Result<f64> {
    ensure!(
        len_q >= 1 && len_a >= 1,
        "lengths must be at least 1, got L_q={len_q}, L_a={len_a}"
    );
    Ok(1.0 + 0.5 * (len_q as f64 / len_a as f64).ln().max(0.0))
}
