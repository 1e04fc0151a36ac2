//! Self-check suite. Every check draws small random instances, compares the
//! sampled path against a brute-force oracle and records the largest error.

use std::io::Write;

use rand::Rng;

use crate::bounds::{
    evaluate_vod, exact_elbo, exact_marginal_log_likelihood, exact_rvb, realm_objective, vod_input, vod_objective,
};
use crate::error::Result;
use crate::gradients::{
    evaluate_vod_gradient, exact_rvb_gradient, finite_difference, max_relative_error, vod_weights, GradientEstimate,
};
use crate::latent::{random_instance, CountingModel, InstanceShape, LatentInstance};
use crate::mcqa::{
    exact_mcqa_rvb, mcqa_vod_gradient, mcqa_vod_objective, random_mcqa, OptionRetrievalState, RandomMcqa,
};
use crate::rng::{self, derive_seed};
use crate::sampling::{priority_sample, PrioritySample};

pub const ALPHA_GRID: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];
pub const CONSISTENCY_TOL: f64 = 1e-9;
pub const FD_STEP: f64 = 1e-6;
pub const FD_REL_TOL: f64 = 1e-5;
/// Denominator floor of the finite-difference relative error.
pub const FD_REL_FLOOR: f64 = 1e-4;
pub const WEIGHT_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct OracleConfig {
    pub latent_instances: usize,
    pub mcqa_instances: usize,
    /// Added to `log ζ` of the first sampled document before the sampled
    /// objective is evaluated. A negative control: any non-zero value must
    /// make the consistency check fail.
    pub zeta_fault: Option<f64>,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            latent_instances: 100,
            mcqa_instances: 20,
            zeta_fault: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub cases: usize,
    /// Largest absolute error.
    pub max_error: f64,
    /// Mean signed error.
    pub mean_error: f64,
    /// `None` for informational lines that cannot fail.
    pub tolerance: Option<f64>,
}

impl CheckResult {
    pub fn passed(&self) -> bool {
        self.tolerance.is_none_or(|t| self.max_error <= t)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct OracleReport {
    pub checks: Vec<CheckResult>,
}

impl OracleReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(CheckResult::passed)
    }

    pub fn check(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// One line per check: `<status> <name> cases=<n> max_error=<e> mean_error=<m> tolerance=<t>`.
    pub fn write(&self, mut out: impl Write) -> Result<()> {
        for c in &self.checks {
            let status = match (c.tolerance, c.passed()) {
                (None, _) => "INFO",
                (Some(_), true) => "PASS",
                (Some(_), false) => "FAIL",
            };
            let tol = c.tolerance.map_or("-".to_string(), |t| format!("{t:e}"));
            writeln!(
                out,
                "{status} {} cases={} max_error={:.3e} mean_error={:.3e} tolerance={tol}",
                c.name, c.cases, c.max_error, c.mean_error
            )?;
        }
        Ok(())
    }
}

struct Tracker {
    name: &'static str,
    cases: usize,
    max_error: f64,
    sum: f64,
    tolerance: Option<f64>,
}

impl Tracker {
    fn new(name: &'static str, tolerance: Option<f64>) -> Self {
        Self {
            name,
            cases: 0,
            max_error: 0.0,
            sum: 0.0,
            tolerance,
        }
    }

    fn record(&mut self, err: f64) {
        self.cases += 1;
        self.sum += err;
        // NaN must fail, so it wins over any finite error.
        if err.is_nan() || err.abs() > self.max_error {
            self.max_error = if err.is_nan() { f64::INFINITY } else { err.abs() };
        }
    }

    fn finish(self) -> CheckResult {
        CheckResult {
            name: self.name,
            cases: self.cases,
            max_error: self.max_error,
            mean_error: if self.cases == 0 {
                0.0
            } else {
                self.sum / self.cases as f64
            },
            tolerance: self.tolerance,
        }
    }
}

/// A random single-latent instance with `N ≤ 32` documents.
pub fn random_latent(seed: u64) -> Result<LatentInstance> {
    let mut rng = rng::stream(seed, 7);
    let n_docs = rng.random_range(2..=32);
    let support = rng.random_range(1..=n_docs);
    random_instance(
        InstanceShape {
            n_docs,
            support,
            ..InstanceShape::default()
        },
        seed,
    )
}

/// A random multiple-choice instance with `N ≤ 6` documents and `M ≤ 3` options.
pub fn random_small_mcqa(seed: u64) -> Result<RandomMcqa> {
    let mut rng = rng::stream(seed, 7);
    let n_docs = rng.random_range(1..=6);
    let m = rng.random_range(2..=3);
    random_mcqa(n_docs, m, seed)
}

pub fn exhaustive_sample(inst: &LatentInstance) -> Result<PrioritySample> {
    priority_sample(&inst.proposal.to_discrete()?, inst.proposal.len(), 0)
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn grad_diff(a: &GradientEstimate, b: &GradientEstimate) -> f64 {
    max_abs_diff(&a.reader_grad, &b.reader_grad).max(max_abs_diff(&a.retriever_grad, &b.retriever_grad))
}

/// Finite differences of `objective` in both parameter blocks of a latent instance.
fn latent_fd(
    inst: &LatentInstance,
    objective: impl Fn(&crate::latent::LinearLatentModel) -> Result<f64>,
) -> Result<GradientEstimate> {
    let m = &inst.model;
    let reader_grad = finite_difference(
        |t| objective(&m.with_reader_params(t)).unwrap_or(f64::NAN),
        &m.reader_params,
        FD_STEP,
    )?;
    let retriever_grad = finite_difference(
        |t| objective(&m.with_retriever_params(t)).unwrap_or(f64::NAN),
        &m.retriever_params,
        FD_STEP,
    )?;
    Ok(GradientEstimate {
        reader_grad,
        retriever_grad,
    })
}

fn rel_diff(a: &GradientEstimate, b: &GradientEstimate) -> f64 {
    max_relative_error(&a.reader_grad, &b.reader_grad, FD_REL_FLOOR).max(max_relative_error(
        &a.retriever_grad,
        &b.retriever_grad,
        FD_REL_FLOOR,
    ))
}

pub fn run_oracle_suite(cfg: &OracleConfig, seed: u64) -> Result<OracleReport> {
    let mut consistency = Tracker::new("vod-consistency", Some(CONSISTENCY_TOL));
    let mut realm = Tracker::new("realm-equivalence", Some(CONSISTENCY_TOL));
    let mut ordering = Tracker::new("bound-ordering", Some(CONSISTENCY_TOL));
    let mut monotone = Tracker::new("rvb-monotone-in-alpha", Some(CONSISTENCY_TOL));
    let mut counts = Tracker::new("evaluation-count", Some(0.0));
    let mut grad_consistency = Tracker::new("gradient-consistency", Some(CONSISTENCY_TOL));
    let mut grad_fd = Tracker::new("gradient-finite-difference", Some(FD_REL_TOL));
    let mut realm_grad = Tracker::new("realm-gradient", Some(FD_REL_TOL));
    let mut weights = Tracker::new("gradient-weights-simplex", Some(WEIGHT_TOL));
    let mut bias = Tracker::new("vod-bias-half-support", None);
    let mut mcqa = Tracker::new("mcqa-consistency", Some(CONSISTENCY_TOL));
    let mut mcqa_grad = Tracker::new("mcqa-gradient-finite-difference", Some(FD_REL_TOL));

    for i in 0..cfg.latent_instances {
        let s = derive_seed(seed, i as u64);
        let inst = random_latent(s)?;
        let (model, proposal) = (&inst.model, &inst.proposal);
        let full = exhaustive_sample(&inst)?;

        for alpha in ALPHA_GRID {
            let mut input = vod_input(model, proposal, &full, alpha)?;
            if let Some(delta) = cfg.zeta_fault {
                input.log_zeta[0] += delta;
            }
            let vod = vod_objective(&input)?.value;
            consistency.record((vod - exact_rvb(alpha, model, proposal)?).abs());

            let g = evaluate_vod_gradient(model, proposal, &full, alpha)?;
            grad_consistency.record(grad_diff(&g, &exact_rvb_gradient(alpha, model, proposal)?));
        }

        let mll = exact_marginal_log_likelihood(model, &proposal.support)?;
        realm.record((realm_objective(model, proposal, &full)? - mll).abs());

        let elbo = exact_elbo(model, proposal)?;
        let grid: Vec<f64> = (0..=10)
            .map(|t| exact_rvb(t as f64 / 10.0, model, proposal))
            .collect::<Result<_>>()?;
        for (t, rvb) in grid.iter().enumerate() {
            ordering.record((elbo - rvb).max(rvb - mll).max(0.0));
            if t > 0 {
                monotone.record((rvb - grid[t - 1]).max(0.0));
            }
        }

        if i % 5 == 0 {
            for alpha in [0.0, 0.5, 1.0] {
                let exact = exact_rvb_gradient(alpha, model, proposal)?;
                let fd = latent_fd(&inst, |m| exact_rvb(alpha, m, proposal))?;
                grad_fd.record(rel_diff(&exact, &fd));
            }
            let vod0 = evaluate_vod_gradient(model, proposal, &full, 0.0)?;
            let fd = latent_fd(&inst, |m| realm_objective(m, proposal, &full))?;
            realm_grad.record(rel_diff(&vod0, &fd));
        }

        let mut rng = rng::stream(s, 9);
        let k = rng.random_range(1..=proposal.len());
        let sample = priority_sample(&proposal.to_discrete()?, k, s)?;
        let counting = CountingModel::new(model);
        let alpha = rng.random_range(0.0..=1.0);
        let input = vod_input(&counting, proposal, &sample, alpha)?;
        vod_objective(&input)?;
        let scored_outside = counting
            .scored_docs()
            .iter()
            .filter(|d| !sample.indices.contains(d))
            .count();
        counts.record(
            (counting.reader_calls() as f64 - k as f64).abs()
                + (counting.retriever_calls() as f64 - (k + 1) as f64).abs()
                + scored_outside as f64,
        );

        let log_s = sample.log_norm_weights();
        let w = vod_weights(alpha, &log_s, &input.reader_loglik, &input.log_zeta);
        let neg = w.iter().map(|x| (-x).max(0.0)).fold(0.0, f64::max);
        weights.record((w.iter().sum::<f64>() - 1.0).abs().max(neg));

        if proposal.len() >= 2 {
            let half = priority_sample(&proposal.to_discrete()?, proposal.len() / 2, s)?;
            let v = evaluate_vod(model, proposal, &half, 0.5)?.value;
            bias.record(v - exact_rvb(0.5, model, proposal)?);
        }
    }

    for i in 0..cfg.mcqa_instances {
        let s = derive_seed(seed, 1_000_000 + i as u64);
        let r = random_small_mcqa(s)?;
        let c = &r.collection;
        let (reader, retriever) = (r.reader.bind(c), r.retriever.bind(c));
        let n = r.proposals[0].len();
        let state = OptionRetrievalState::draw(r.proposals.clone(), n, s)?;
        let cap = crate::mcqa::DEFAULT_ENUMERATION_CAP;
        for alpha in ALPHA_GRID {
            let vod = mcqa_vod_objective(alpha, &state, &reader, &retriever, &r.instance, cap)?.value;
            let exact = exact_mcqa_rvb(alpha, &reader, &retriever, &r.instance, &r.proposals, cap)?;
            mcqa.record((vod - exact).abs());
        }
        for alpha in [0.0, 0.5, 1.0] {
            let g = mcqa_vod_gradient(alpha, &state, &reader, &retriever, &r.instance, cap)?;
            let exact = |rd: &crate::scoring::ScoreModel, rt: &crate::scoring::ScoreModel| {
                exact_mcqa_rvb(alpha, &rd.bind(c), &rt.bind(c), &r.instance, &r.proposals, cap).unwrap_or(f64::NAN)
            };
            let fd = GradientEstimate {
                reader_grad: finite_difference(
                    |t| {
                        exact(
                            &r.reader.clone().with_params(t.to_vec()).expect("same length"),
                            &r.retriever,
                        )
                    },
                    &r.reader.params,
                    FD_STEP,
                )?,
                retriever_grad: finite_difference(
                    |t| {
                        exact(
                            &r.reader,
                            &r.retriever.clone().with_params(t.to_vec()).expect("same length"),
                        )
                    },
                    &r.retriever.params,
                    FD_STEP,
                )?,
            };
            mcqa_grad.record(rel_diff(&g, &fd));
        }
    }

    Ok(OracleReport {
        checks: [
            consistency,
            realm,
            ordering,
            monotone,
            counts,
            grad_consistency,
            grad_fd,
            realm_grad,
            weights,
            mcqa,
            mcqa_grad,
            bias,
        ]
        .into_iter()
        .map(Tracker::finish)
        .collect(),
    })
}
