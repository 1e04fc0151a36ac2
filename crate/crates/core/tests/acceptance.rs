//! Acceptance suite. Runs every criterion in order, prints one PASS/FAIL line
//! each, and exits non-zero if any criterion fails.
//!
//! The exact references here are brute-force sums written directly against
//! the model definitions, independent of the library's own exact routines.

use std::process::ExitCode;
use std::time::Instant;

use rand::Rng;
use rand_distr::StandardNormal;

use vod::bench::{variance_study, BenchConfig, ValueSetting};
use vod::bounds::evaluate_vod;
use vod::gradients::{evaluate_vod_gradient, finite_difference, max_relative_error, GradientEstimate};
use vod::latent::{random_instance, CountingModel, InstanceShape, LatentInstance, LinearLatentModel};
use vod::math::softmax;
use vod::mcqa::{mcqa_vod_gradient, mcqa_vod_objective, OptionRetrievalState, RandomMcqa};
use vod::oracle::{exhaustive_sample, random_latent, random_small_mcqa};
use vod::retrieval::TruncatedDistribution;
use vod::rng::{derive_seed, stream};
use vod::sampling::{estimate_weighted_sum, priority_sample, DiscreteDistribution};
use vod::scoring::ScoreModel;
use vod::training::synthetic::{generate, SyntheticConfig};
use vod::training::{
    recall_at_1, run_distillation, run_training, teacher_proposals, AlphaSchedule, DistillConfig, ModelConfig, Models,
    RetrieverMode, TrainConfig,
};

// Unbiasedness.
const UNBIASED_INSTANCES: u64 = 20;
const UNBIASED_N: usize = 20;
const UNBIASED_K: [usize; 3] = [2, 5, 10];
const UNBIASED_REPLICATES: usize = 200_000;
const UNBIASED_SE_MULT: f64 = 4.0;
// Variance study.
const VARIANCE_MIN_FRACTION: f64 = 0.9;
// Exact agreement.
const LATENT_INSTANCES: u64 = 100;
const MCQA_INSTANCES: u64 = 20;
const EXACT_TOL: f64 = 1e-9;
const ALPHA_GRID: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];
// Gradients.
const FD_STEP: f64 = 1e-6;
const FD_REL_TOL: f64 = 1e-5;
const FD_REL_FLOOR: f64 = 1e-4;
const FD_ALPHAS: [f64; 3] = [0.0, 0.5, 1.0];
const FD_LATENT_INSTANCES: u64 = 20;
const FD_MCQA_INSTANCES: u64 = 10;
// Bound hierarchy.
const ORDER_TOL: f64 = 1e-9;
// Complexity.
const SLOPE_RANGE: (f64, f64) = (0.8, 1.2);
const TIMING_N: usize = 8192;
const TIMING_K: [usize; 5] = [128, 256, 512, 1024, 2048];
const TIMING_ORACLE_N: [usize; 5] = [512, 1024, 2048, 4096, 8192];
// End to end.
const E2E_SEEDS: [u64; 5] = [0, 1, 2, 3, 4];
const E2E_SUPPORT: usize = 32;
const E2E_MIN_ACCURACY: f64 = 0.95;
const E2E_MIN_MARGIN_OVER_FROZEN: f64 = 0.05;
const E2E_KL_WINDOW: usize = 10;
const E2E_KL_JUMP_FACTOR: f64 = 10.0;
const E2E_BUDGET_SECS: f64 = 300.0;
// Distillation.
const DISTILL_SEED: u64 = 0;
const DISTILL_MIN_RECALL_GAIN: f64 = 0.20;

struct Verdict {
    passed: bool,
    detail: String,
}

fn verdict(passed: bool, detail: String) -> Verdict {
    Verdict { passed, detail }
}

// ---- independent brute-force references -------------------------------------------------------

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn log_sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        -(-z).exp().ln_1p()
    } else {
        z - z.exp().ln_1p()
    }
}

fn lse(xs: &[f64]) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Per-support-document `log w = log p(a|d) + log p_θ(d) − log r(d)`.
fn latent_log_weights(m: &LinearLatentModel, r: &TruncatedDistribution) -> Vec<f64> {
    let f: Vec<f64> = r
        .support
        .iter()
        .map(|&d| dot(&m.retriever_params, &m.retriever_features[d]))
        .collect();
    let z = lse(&f);
    r.support
        .iter()
        .enumerate()
        .map(|(i, &d)| log_sigmoid(dot(&m.reader_params, &m.reader_features[d])) + f[i] - z - r.log_probs[i])
        .collect()
}

/// `1/(1−α) log E_r[w^{1−α}]`, `E_r[log w]` at `α = 1`.
fn rvb_from(alpha: f64, log_r: &[f64], log_w: &[f64]) -> f64 {
    if alpha == 1.0 {
        log_r.iter().zip(log_w).map(|(r, w)| r.exp() * w).sum()
    } else {
        let a = 1.0 - alpha;
        let terms: Vec<f64> = log_r.iter().zip(log_w).map(|(r, w)| r + a * w).collect();
        lse(&terms) / a
    }
}

fn brute_rvb(alpha: f64, m: &LinearLatentModel, r: &TruncatedDistribution) -> f64 {
    rvb_from(alpha, &r.log_probs, &latent_log_weights(m, r))
}

fn brute_mcqa_rvb(alpha: f64, reader: &ScoreModel, retriever: &ScoreModel, p: &RandomMcqa) -> f64 {
    let inst = &p.instance;
    let c = &p.collection;
    let mm = inst.options.len();
    let mut g = Vec::new();
    let mut lp = Vec::new();
    for (j, prop) in p.proposals.iter().enumerate() {
        let q = &inst.option_queries[j];
        g.push(
            prop.support
                .iter()
                .map(|&d| reader.score(q, d, c).unwrap())
                .collect::<Vec<_>>(),
        );
        let f: Vec<f64> = prop
            .support
            .iter()
            .map(|&d| retriever.score(q, d, c).unwrap())
            .collect();
        let z = lse(&f);
        lp.push(f.iter().map(|x| x - z).collect::<Vec<_>>());
    }
    let sizes: Vec<usize> = p.proposals.iter().map(|x| x.len()).collect();
    let total: usize = sizes.iter().product();
    let (mut log_r, mut log_w) = (Vec::with_capacity(total), Vec::with_capacity(total));
    for mut code in 0..total {
        let mut pos = vec![0; mm];
        for j in (0..mm).rev() {
            pos[j] = code % sizes[j];
            code /= sizes[j];
        }
        let logits: Vec<f64> = (0..mm).map(|j| g[j][pos[j]]).collect();
        let ll = logits[inst.correct] - lse(&logits);
        let prior: f64 = (0..mm).map(|j| lp[j][pos[j]]).sum();
        let lr: f64 = (0..mm).map(|j| p.proposals[j].log_probs[pos[j]]).sum();
        log_r.push(lr);
        log_w.push(ll + prior - lr);
    }
    rvb_from(alpha, &log_r, &log_w)
}

fn latent_fd(inst: &LatentInstance, alpha: f64) -> GradientEstimate {
    let (m, r) = (&inst.model, &inst.proposal);
    GradientEstimate {
        reader_grad: finite_difference(
            |t| brute_rvb(alpha, &m.with_reader_params(t), r),
            &m.reader_params,
            FD_STEP,
        )
        .unwrap(),
        retriever_grad: finite_difference(
            |t| brute_rvb(alpha, &m.with_retriever_params(t), r),
            &m.retriever_params,
            FD_STEP,
        )
        .unwrap(),
    }
}

fn mcqa_fd(p: &RandomMcqa, alpha: f64) -> GradientEstimate {
    let with = |m: &ScoreModel, t: &[f64]| m.clone().with_params(t.to_vec()).unwrap();
    GradientEstimate {
        reader_grad: finite_difference(
            |t| brute_mcqa_rvb(alpha, &with(&p.reader, t), &p.retriever, p),
            &p.reader.params,
            FD_STEP,
        )
        .unwrap(),
        retriever_grad: finite_difference(
            |t| brute_mcqa_rvb(alpha, &p.reader, &with(&p.retriever, t), p),
            &p.retriever.params,
            FD_STEP,
        )
        .unwrap(),
    }
}

fn grad_rel_error(a: &GradientEstimate, b: &GradientEstimate) -> f64 {
    max_relative_error(&a.reader_grad, &b.reader_grad, FD_REL_FLOOR).max(max_relative_error(
        &a.retriever_grad,
        &b.retriever_grad,
        FD_REL_FLOOR,
    ))
}

fn exhaustive_state(p: &RandomMcqa) -> OptionRetrievalState {
    let k = p.proposals.iter().map(|x| x.len()).max().unwrap();
    OptionRetrievalState::draw(p.proposals.clone(), k, 0).unwrap()
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

fn loglog_slope(x: &[usize], t: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| (*v as f64).ln()).collect();
    let lt: Vec<f64> = t.iter().map(|v| v.ln()).collect();
    let (mx, mt) = (mean(&lx), mean(&lt));
    let num: f64 = lx.iter().zip(&lt).map(|(a, b)| (a - mx) * (b - mt)).sum();
    let den: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    num / den
}

/// Best-of-five seconds per call.
fn time_per_call(reps: usize, mut f: impl FnMut()) -> f64 {
    (0..5)
        .map(|_| {
            let t = Instant::now();
            for _ in 0..reps {
                f();
            }
            t.elapsed().as_secs_f64() / reps as f64
        })
        .fold(f64::INFINITY, f64::min)
}

// ---- criteria ---------------------------------------------------------------------------------

fn unbiasedness() -> Verdict {
    let mut worst = 0.0f64;
    let mut cases = 0;
    for i in 0..UNBIASED_INSTANCES {
        let mut rng = stream(derive_seed(11, i), 0);
        let logits: Vec<f64> = (0..UNBIASED_N)
            .map(|_| 2.0 * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let f: Vec<f64> = (0..UNBIASED_N).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let p = softmax(&logits);
        let truth: f64 = p.iter().zip(&f).map(|(a, b)| a * b).sum();
        let dist = DiscreteDistribution::new((0..UNBIASED_N).collect(), p).unwrap();
        for k in UNBIASED_K {
            let (mut sum, mut sq) = (0.0, 0.0);
            for rep in 0..UNBIASED_REPLICATES {
                let s = priority_sample(&dist, k, derive_seed(derive_seed(i, k as u64), rep as u64)).unwrap();
                let est = estimate_weighted_sum(&s, |j| f.get(j).copied(), false).unwrap();
                sum += est;
                sq += est * est;
            }
            let n = UNBIASED_REPLICATES as f64;
            let m = sum / n;
            let se = ((sq / n - m * m) * n / (n - 1.0)).max(0.0).sqrt() / n.sqrt();
            worst = worst.max((m - truth).abs() / se.max(f64::MIN_POSITIVE));
            cases += 1;
        }
    }
    verdict(
        worst <= UNBIASED_SE_MULT,
        format!("{cases} cases, max |mean-truth|/SE = {worst:.2} (tol {UNBIASED_SE_MULT})"),
    )
}

fn variance() -> Verdict {
    let rows = variance_study(&BenchConfig::default(), 0).unwrap();
    let mut parts = Vec::new();
    let mut ok = true;
    for setting in [ValueSetting::SameAsLogits, ValueSetting::Independent] {
        let sel: Vec<_> = rows.iter().filter(|r| r.setting == setting).collect();
        let wins = sel.iter().filter(|r| r.priority_normalized <= r.mc).count();
        let frac = wins as f64 / sel.len() as f64;
        ok &= frac >= VARIANCE_MIN_FRACTION;
        parts.push(format!("{}: {wins}/{}", setting.label(), sel.len()));
    }
    verdict(
        ok,
        format!(
            "self-normalized <= MC in {} (min fraction {VARIANCE_MIN_FRACTION})",
            parts.join(", ")
        ),
    )
}

fn consistency() -> Verdict {
    let mut worst = 0.0f64;
    for i in 0..LATENT_INSTANCES {
        let inst = random_latent(derive_seed(21, i)).unwrap();
        let full = exhaustive_sample(&inst).unwrap();
        for a in ALPHA_GRID {
            let vod = evaluate_vod(&inst.model, &inst.proposal, &full, a).unwrap().value;
            worst = worst.max((vod - brute_rvb(a, &inst.model, &inst.proposal)).abs());
        }
    }
    let mut worst_mcqa = 0.0f64;
    for i in 0..MCQA_INSTANCES {
        let p = random_small_mcqa(derive_seed(22, i)).unwrap();
        let st = exhaustive_state(&p);
        let (rd, rt) = (p.reader.bind(&p.collection), p.retriever.bind(&p.collection));
        for a in ALPHA_GRID {
            let vod = mcqa_vod_objective(a, &st, &rd, &rt, &p.instance, 1 << 16)
                .unwrap()
                .value;
            worst_mcqa = worst_mcqa.max((vod - brute_mcqa_rvb(a, &p.reader, &p.retriever, &p)).abs());
        }
    }
    verdict(
        worst.max(worst_mcqa) <= EXACT_TOL,
        format!(
            "max |VOD-RVB| latent {worst:.2e} over {LATENT_INSTANCES}, mcqa {worst_mcqa:.2e} over {MCQA_INSTANCES} (tol {EXACT_TOL:.0e})"
        ),
    )
}

fn realm_equivalence() -> Verdict {
    let mut worst = 0.0f64;
    for i in 0..LATENT_INSTANCES {
        let inst = random_latent(derive_seed(31, i)).unwrap();
        let full = exhaustive_sample(&inst).unwrap();
        let vod = evaluate_vod(&inst.model, &inst.proposal, &full, 0.0).unwrap().value;
        let m = &inst.model;
        let f: Vec<f64> = inst
            .proposal
            .support
            .iter()
            .map(|&d| dot(&m.retriever_params, &m.retriever_features[d]))
            .collect();
        let z = lse(&f);
        let terms: Vec<f64> = inst
            .proposal
            .support
            .iter()
            .enumerate()
            .map(|(j, &d)| log_sigmoid(dot(&m.reader_params, &m.reader_features[d])) + f[j] - z)
            .collect();
        worst = worst.max((vod - lse(&terms)).abs());
    }
    verdict(
        worst <= EXACT_TOL,
        format!("max |VOD(a=0,K=P) - log p(a)| = {worst:.2e} over {LATENT_INSTANCES} (tol {EXACT_TOL:.0e})"),
    )
}

fn gradients() -> Verdict {
    let mut worst_latent = 0.0f64;
    for i in 0..FD_LATENT_INSTANCES {
        let inst = random_latent(derive_seed(41, i)).unwrap();
        let full = exhaustive_sample(&inst).unwrap();
        for a in FD_ALPHAS {
            let g = evaluate_vod_gradient(&inst.model, &inst.proposal, &full, a).unwrap();
            worst_latent = worst_latent.max(grad_rel_error(&g, &latent_fd(&inst, a)));
        }
    }
    let mut worst_mcqa = 0.0f64;
    for i in 0..FD_MCQA_INSTANCES {
        let p = random_small_mcqa(derive_seed(42, i)).unwrap();
        let st = exhaustive_state(&p);
        let (rd, rt) = (p.reader.bind(&p.collection), p.retriever.bind(&p.collection));
        for a in FD_ALPHAS {
            let g = mcqa_vod_gradient(a, &st, &rd, &rt, &p.instance, 1 << 16).unwrap();
            worst_mcqa = worst_mcqa.max(grad_rel_error(&g, &mcqa_fd(&p, a)));
        }
    }
    verdict(
        worst_latent.max(worst_mcqa) <= FD_REL_TOL,
        format!(
            "max rel error latent {worst_latent:.2e}, mcqa {worst_mcqa:.2e} (h {FD_STEP:.0e}, floor {FD_REL_FLOOR:.0e}, tol {FD_REL_TOL:.0e})"
        ),
    )
}

fn hierarchy() -> Verdict {
    let mut worst = 0.0f64;
    for i in 0..LATENT_INSTANCES {
        let inst = random_latent(derive_seed(51, i)).unwrap();
        let grid: Vec<f64> = (0..=10)
            .map(|t| brute_rvb(t as f64 / 10.0, &inst.model, &inst.proposal))
            .collect();
        let (mll, elbo) = (grid[0], grid[10]);
        for t in 0..=10 {
            worst = worst.max(elbo - grid[t]).max(grid[t] - mll);
            if t > 0 {
                worst = worst.max(grid[t] - grid[t - 1]);
            }
        }
    }
    verdict(
        worst <= ORDER_TOL,
        format!(
            "max violation of ELBO <= RVB(a) <= MLL and monotonicity on 11 points = {worst:.2e} (tol {ORDER_TOL:.0e})"
        ),
    )
}

fn complexity() -> Verdict {
    let shape = InstanceShape {
        n_docs: TIMING_N,
        support: TIMING_N,
        ..Default::default()
    };
    let inst = random_instance(shape, 61).unwrap();
    let dist = inst.proposal.to_discrete().unwrap();

    let counting = CountingModel::new(inst.model.clone());
    let mut counts_ok = true;
    let mut vod_t = Vec::new();
    for k in TIMING_K {
        let s = priority_sample(&dist, k, k as u64).unwrap();
        counting.reset();
        evaluate_vod(&counting, &inst.proposal, &s, 0.5).unwrap();
        let scored = counting.scored_docs();
        counts_ok &= counting.reader_calls() == k
            && counting.retriever_calls() == k + 1
            && scored.iter().all(|d| s.indices.contains(d));
        vod_t.push(time_per_call(20_000 / k.max(1) + 5, || {
            std::hint::black_box(evaluate_vod(&inst.model, &inst.proposal, &s, 0.5).unwrap());
        }));
    }
    let mut oracle_t = Vec::new();
    for n in TIMING_ORACLE_N {
        let sub = random_instance(
            InstanceShape {
                n_docs: n,
                support: n,
                ..Default::default()
            },
            62,
        )
        .unwrap();
        oracle_t.push(time_per_call(20_000 / n + 3, || {
            std::hint::black_box(vod::bounds::exact_rvb(0.5, &sub.model, &sub.proposal).unwrap());
        }));
    }
    let (sk, sn) = (
        loglog_slope(&TIMING_K, &vod_t),
        loglog_slope(&TIMING_ORACLE_N, &oracle_t),
    );
    let in_range = |s: f64| (SLOPE_RANGE.0..=SLOPE_RANGE.1).contains(&s);
    verdict(
        counts_ok && in_range(sk) && in_range(sn),
        format!(
            "K reader + K+1 retriever calls on sampled docs only: {counts_ok}; log-log slope VOD in K {sk:.2}, exact in N {sn:.2} (range {:?})",
            SLOPE_RANGE
        ),
    )
}

struct RunResult {
    acc: f64,
    kl: Vec<f64>,
}

fn train_one(cfg: &TrainConfig, seed: u64) -> RunResult {
    let task = generate(&SyntheticConfig::default(), seed).unwrap();
    let mc = ModelConfig {
        vocab: Some(task.markers.clone()),
        ..Default::default()
    };
    let models = Models::from_config(&mc, &task.collection, seed).unwrap();
    let out = run_training(cfg, &task.train, &task.eval, &task.collection, models, seed).unwrap();
    RunResult {
        acc: out.trace.final_eval().unwrap(),
        kl: out.trace.steps.iter().map(|s| s.kl).collect(),
    }
}

fn end_to_end() -> Verdict {
    let start = Instant::now();
    let base = TrainConfig {
        support: E2E_SUPPORT,
        ..Default::default()
    };
    let elbo = TrainConfig {
        alpha_schedule: AlphaSchedule::Constant(1.0),
        ..base.clone()
    };
    let frozen = TrainConfig {
        retriever_mode: RetrieverMode::Frozen,
        ..base.clone()
    };
    let t = base.steps_per_round;
    let (mut a, mut e, mut f) = (Vec::new(), Vec::new(), Vec::new());
    let mut kl_ok = 0;
    let mut jumps = Vec::new();
    for seed in E2E_SEEDS {
        let run = train_one(&base, seed);
        let kl = &run.kl;
        // Descent while alpha >= 0.5, then a change of level after re-indexing.
        let half = t / 2;
        let first = mean(&kl[..E2E_KL_WINDOW]);
        let annealed = mean(&kl[half - E2E_KL_WINDOW..half]);
        let end = mean(&kl[t - E2E_KL_WINDOW..t]);
        let peak = kl[t..].windows(E2E_KL_WINDOW).map(mean).fold(0.0, f64::max);
        if annealed < first && peak >= E2E_KL_JUMP_FACTOR * end {
            kl_ok += 1;
        }
        jumps.push(peak / end);
        a.push(run.acc);
        e.push(train_one(&elbo, seed).acc);
        f.push(train_one(&frozen, seed).acc);
    }
    let secs = start.elapsed().as_secs_f64();
    let (ma, me, mf) = (median(&a), median(&e), median(&f));
    let ok = ma >= E2E_MIN_ACCURACY
        && ma - mf >= E2E_MIN_MARGIN_OVER_FROZEN
        && ma >= me
        && kl_ok == E2E_SEEDS.len()
        && secs < E2E_BUDGET_SECS;
    verdict(
        ok,
        format!(
            "median acc annealed {ma:.3} (min {E2E_MIN_ACCURACY}), elbo {me:.3}, frozen {mf:.3} (margin min {E2E_MIN_MARGIN_OVER_FROZEN}); \
             KL pattern in {kl_ok}/{} seeds (median round-2 peak / round-1 end {:.0}x, min {E2E_KL_JUMP_FACTOR}x); {secs:.0}s (budget {E2E_BUDGET_SECS}s)",
            E2E_SEEDS.len(),
            median(&jumps)
        ),
    )
}

fn distillation() -> Verdict {
    let task = generate(&SyntheticConfig::default(), DISTILL_SEED).unwrap();
    let c = &task.collection;
    let mc = ModelConfig {
        vocab: Some(task.markers.clone()),
        ..Default::default()
    };
    let cfg = TrainConfig {
        support: E2E_SUPPORT,
        ..Default::default()
    };
    let models = Models::from_config(&mc, c, DISTILL_SEED).unwrap();
    let trained = run_training(&cfg, &task.train, &[], c, models, DISTILL_SEED)
        .unwrap()
        .models;
    let dc = DistillConfig::default();
    let teachers = teacher_proposals(&task.train, c, Some(&trained.retriever), dc.support, dc.hybrid_tau).unwrap();
    let student = mc.build(c, derive_seed(DISTILL_SEED, 3)).unwrap();
    let before = recall_at_1(&student, &task.eval, &task.eval_evidence, c).unwrap();
    let out = run_distillation(&dc, &task.train, &teachers, c, student).unwrap();
    let after = recall_at_1(&out.student, &task.eval, &task.eval_evidence, c).unwrap();
    let kl = &out.kl_trace;
    let increases = kl.windows(2).filter(|w| w[1] > w[0]).count();
    verdict(
        increases == 0 && after - before >= DISTILL_MIN_RECALL_GAIN,
        format!(
            "KL {:.4} -> {:.4} over {} steps with {increases} increases; recall@1 {before:.3} -> {after:.3} (min gain {DISTILL_MIN_RECALL_GAIN})",
            kl[0],
            kl[kl.len() - 1],
            dc.steps
        ),
    )
}

type Criterion = (&'static str, fn() -> Verdict);

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("1 priority estimator unbiased", unbiasedness),
        ("2 variance vs sampling with replacement", variance),
        ("3 exhaustive VOD equals exact RVB", consistency),
        (
            "4 alpha=0 full-support VOD equals marginal likelihood",
            realm_equivalence,
        ),
        ("5 gradients match finite differences", gradients),
        ("6 bound hierarchy", hierarchy),
        ("7 evaluation count and linear cost", complexity),
        ("8 end-to-end synthetic training", end_to_end),
        ("9 retriever distillation", distillation),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        let t = Instant::now();
        let v = run();
        if !v.passed {
            failed += 1;
        }
        println!(
            "{} criterion {name}: {} [{:.1}s]",
            if v.passed { "PASS" } else { "FAIL" },
            v.detail,
            t.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {} passed, {failed} failed", 9 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
