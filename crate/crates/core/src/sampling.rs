//! Priority sampling without replacement.
//!
//! Each item gets a key `p_i / u_i` with `u_i ~ Uniform(0, 1]`. The `k`
//! items with the largest keys are kept and `τ` is the `(k+1)`-th largest
//! key. With raw weights `s̄_i = max(p_i, τ)`, `Σ_{i∈S} s̄_i f_i` is an
//! unbiased estimate of `Σ_i p_i f_i`; dividing the raw weights by their sum
//! gives the self-normalized weights used by the objectives.
//!
//! Key ties have probability zero but can occur with pinned uniforms; they
//! are broken towards the smaller item id so the output stays deterministic.

use std::cmp::Ordering;

use crate::error::{ensure, Result, VodError};
use crate::math::pairwise_sum;
use crate::rng;

const SUM_TOLERANCE: f64 = 1e-12;

/// A probability vector over sorted, unique integer ids.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteDistribution {
    item_ids: Vec<usize>,
    probs: Vec<f64>,
}

impl DiscreteDistribution {
    pub fn new(item_ids: Vec<usize>, probs: Vec<f64>) -> Result<Self> {
        ensure!(!item_ids.is_empty(), "empty distribution");
        ensure!(
            item_ids.len() == probs.len(),
            "{} ids but {} probabilities",
            item_ids.len(),
            probs.len()
        );
        ensure!(
            item_ids.windows(2).all(|w| w[0] < w[1]),
            "item ids must be unique and sorted ascending"
        );
        ensure!(
            probs.iter().all(|p| p.is_finite() && *p >= 0.0),
            "probabilities must be finite and non-negative"
        );
        let total = pairwise_sum(&probs);
        ensure!(
            (total - 1.0).abs() <= SUM_TOLERANCE,
            "probabilities sum to {total}, expected 1"
        );
        Ok(Self { item_ids, probs })
    }

    /// Normalizes log-weights given in any id order.
    pub fn from_log_weights(pairs: impl IntoIterator<Item = (usize, f64)>) -> Result<Self> {
        let mut pairs: Vec<(usize, f64)> = pairs.into_iter().collect();
        ensure!(!pairs.is_empty(), "empty distribution");
        ensure!(
            pairs.iter().all(|(_, w)| !w.is_nan() && *w != f64::INFINITY),
            "log-weights must not be NaN or +inf"
        );
        pairs.sort_by_key(|(id, _)| *id);
        let logs: Vec<f64> = pairs.iter().map(|(_, w)| *w).collect();
        let lse = crate::math::logsumexp(&logs);
        ensure!(lse.is_finite(), "all log-weights are -inf");
        let probs: Vec<f64> = logs.iter().map(|w| (w - lse).exp()).collect();
        let total = pairwise_sum(&probs);
        let probs = probs.into_iter().map(|p| p / total).collect();
        Self::new(pairs.into_iter().map(|(id, _)| id).collect(), probs)
    }

    pub fn len(&self) -> usize {
        self.item_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.item_ids.is_empty()
    }

    pub fn item_ids(&self) -> &[usize] {
        &self.item_ids
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob_of(&self, id: usize) -> Option<f64> {
        self.item_ids.binary_search(&id).ok().map(|pos| self.probs[pos])
    }

    /// Expectation `Σ p_i f(id_i)`.
    pub fn expectation(&self, f: impl Fn(usize) -> f64) -> f64 {
        let terms: Vec<f64> = self
            .item_ids
            .iter()
            .zip(&self.probs)
            .map(|(&id, &p)| p * f(id))
            .collect();
        pairwise_sum(&terms)
    }
}

/// Items selected by priority sampling, in ascending id order.
#[derive(Debug, Clone, PartialEq)]
pub struct PrioritySample {
    pub indices: Vec<usize>,
    /// `s̄_i = max(p_i, τ)`.
    pub raw_weights: Vec<f64>,
    /// `s_i = s̄_i / Σ_j s̄_j`.
    pub norm_weights: Vec<f64>,
    /// `τ`, zero when the whole support was selected.
    pub threshold: f64,
    pub k: usize,
}

impl PrioritySample {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// True when every item of the source support was selected.
    pub fn is_exhaustive(&self) -> bool {
        self.threshold == 0.0
    }

    pub fn log_norm_weights(&self) -> Vec<f64> {
        self.norm_weights.iter().map(|w| w.ln()).collect()
    }
}

/// Draws `k` items without replacement from `dist`.
pub fn priority_sample(dist: &DiscreteDistribution, k: usize, seed: u64) -> Result<PrioritySample> {
    priority_sample_on_stream(dist, k, seed, 0)
}

pub(crate) fn priority_sample_on_stream(
    dist: &DiscreteDistribution,
    k: usize,
    seed: u64,
    stream: u64,
) -> Result<PrioritySample> {
    let mut rng = rng::stream(seed, stream);
    let uniforms: Vec<f64> = (0..dist.len()).map(|_| rng::open_closed_unit(&mut rng)).collect();
    priority_sample_with_uniforms(dist, k, &uniforms)
}

/// Priority sampling with caller-supplied uniforms, one per item in id order.
pub fn priority_sample_with_uniforms(
    dist: &DiscreteDistribution,
    k: usize,
    uniforms: &[f64],
) -> Result<PrioritySample> {
    ensure!(k >= 1, "k must be at least 1, got {k}");
    ensure!(!dist.is_empty(), "empty distribution");
    ensure!(
        uniforms.len() == dist.len(),
        "expected {} uniforms, got {}",
        dist.len(),
        uniforms.len()
    );
    ensure!(
        uniforms.iter().all(|u| *u > 0.0 && *u <= 1.0),
        "uniforms must lie in (0, 1]"
    );

    // Zero-probability items can never beat τ; drop them up front.
    let mut keyed: Vec<(f64, usize, f64)> = dist
        .item_ids
        .iter()
        .zip(&dist.probs)
        .zip(uniforms)
        .filter(|((_, &p), _)| p > 0.0)
        .map(|((&id, &p), &u)| (p / u, id, p))
        .collect();
    ensure!(!keyed.is_empty(), "distribution has no positive mass");

    let n = keyed.len();
    let (selected, threshold) = if k >= n {
        (keyed, 0.0)
    } else {
        let by_priority = |a: &(f64, usize, f64), b: &(f64, usize, f64)| {
            b.0.partial_cmp(&a.0).unwrap_or(Ordering::Equal).then(a.1.cmp(&b.1))
        };
        keyed.select_nth_unstable_by(k, by_priority);
        let tau = keyed[k].0;
        keyed.truncate(k);
        (keyed, tau)
    };

    let mut selected = selected;
    selected.sort_by_key(|(_, id, _)| *id);
    let indices: Vec<usize> = selected.iter().map(|(_, id, _)| *id).collect();
    let raw_weights: Vec<f64> = selected.iter().map(|(_, _, p)| p.max(threshold)).collect();
    let total = pairwise_sum(&raw_weights);
    let norm_weights = raw_weights.iter().map(|w| w / total).collect();

    Ok(PrioritySample {
        indices,
        raw_weights,
        norm_weights,
        threshold,
        k,
    })
}

/// `Σ s̄_i f_i` (unbiased) or `Σ s_i f_i` (self-normalized).
pub fn estimate_weighted_sum(
    sample: &PrioritySample,
    values: impl Fn(usize) -> Option<f64>,
    normalized: bool,
) -> Result<f64> {
    let weights = if normalized {
        &sample.norm_weights
    } else {
        &sample.raw_weights
    };
    let terms = sample
        .indices
        .iter()
        .zip(weights)
        .map(|(&id, &w)| {
            values(id)
                .map(|v| w * v)
                .ok_or_else(|| VodError::invalid(format!("no value for selected item {id}")))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(pairwise_sum(&terms))
}

/// Independent priority samples, one per component of a product
/// distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductSample {
    pub per_option_samples: Vec<PrioritySample>,
}

impl ProductSample {
    pub fn num_components(&self) -> usize {
        self.per_option_samples.len()
    }

    /// Number of combinations `Π_j |S_j|`, saturating.
    pub fn num_combinations(&self) -> usize {
        self.per_option_samples
            .iter()
            .fold(1usize, |acc, s| acc.saturating_mul(s.len()))
    }

    /// `s(D) = Π_j s_j[d_j]`, with `positions[j]` indexing into sample `j`.
    pub fn combination_weight(&self, positions: &[usize]) -> f64 {
        self.per_option_samples
            .iter()
            .zip(positions)
            .map(|(s, &p)| s.norm_weights[p])
            .product()
    }

    /// All combinations as positions into the per-component samples.
    pub fn combinations(&self) -> Combinations {
        Combinations::new(self.per_option_samples.iter().map(|s| s.len()).collect())
    }
}

/// Draws one priority sample per distribution. Component `j` uses stream `j`
/// of `seed`, so a single component reproduces [`priority_sample`].
pub fn product_priority_sample(dists: &[DiscreteDistribution], k: usize, seed: u64) -> Result<ProductSample> {
    ensure!(!dists.is_empty(), "product sample needs at least one component");
    let per_option_samples = dists
        .iter()
        .enumerate()
        .map(|(j, d)| priority_sample_on_stream(d, k, seed, j as u64))
        .collect::<Result<Vec<_>>>()?;
    Ok(ProductSample { per_option_samples })
}

/// Mixed-radix counter over `Π_j radices[j]` positions, last component
/// fastest.
#[derive(Debug, Clone)]
pub struct Combinations {
    radices: Vec<usize>,
    current: Vec<usize>,
    done: bool,
}

impl Combinations {
    pub fn new(radices: Vec<usize>) -> Self {
        let done = radices.is_empty() || radices.contains(&0);
        Self {
            current: vec![0; radices.len()],
            radices,
            done,
        }
    }
}

impl Iterator for Combinations {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        if self.done {
            return None;
        }
        let out = self.current.clone();
        let mut j = self.radices.len();
        loop {
            if j == 0 {
                self.done = true;
                break;
            }
            j -= 1;
            self.current[j] += 1;
            if self.current[j] < self.radices[j] {
                break;
            }
            self.current[j] = 0;
        }
        Some(out)
    }
}
