use approx::assert_abs_diff_eq;
use proptest::prelude::*;

use vod::bounds::{evaluate_vod, exact_elbo, exact_marginal_log_likelihood, exact_rvb, vod_objective, BoundInput};
use vod::gradients::{finite_difference, max_relative_error, vod_gradient};
use vod::latent::{random_instance, InstanceShape};
use vod::math::softmax;
use vod::mcqa::{product_vod_gradient, AdditiveReader};
use vod::retrieval::{effective_sample_size, kl_divergence, softmax_on_support};
use vod::sampling::{
    estimate_weighted_sum, priority_sample, product_priority_sample, DiscreteDistribution, ProductSample,
};
use vod::scoring::{tokenize, Collection, Corpus, QueryRecord, ScoreModel};
use vod::training::{AdamConfig, AdamState, AlphaSchedule, Models};

fn distribution() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (2usize..24).prop_flat_map(|n| {
        (
            prop::collection::vec(-4.0f64..4.0, n),
            prop::collection::vec(-10.0f64..10.0, n),
        )
    })
}

fn dist_of(logits: &[f64]) -> DiscreteDistribution {
    DiscreteDistribution::new((0..logits.len()).collect(), softmax(logits)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn sample_weights_form_a_simplex((logits, _) in distribution(), k in 1usize..30, seed in any::<u64>()) {
        let d = dist_of(&logits);
        let s = priority_sample(&d, k, seed).unwrap();
        prop_assert_eq!(s.len(), k.min(logits.len()));
        prop_assert!(s.indices.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(s.norm_weights.iter().all(|w| *w >= 0.0));
        prop_assert!(s.raw_weights.iter().zip(&s.indices).all(|(w, &i)| *w >= d.probs()[i]));
        assert_abs_diff_eq!(s.norm_weights.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        prop_assert_eq!(&s, &priority_sample(&d, k, seed).unwrap());
    }

    #[test]
    fn exhaustive_sample_is_exact((logits, f) in distribution(), extra in 0usize..4, seed in any::<u64>()) {
        let d = dist_of(&logits);
        let s = priority_sample(&d, logits.len() + extra, seed).unwrap();
        prop_assert!(s.is_exhaustive());
        let exact: f64 = d.probs().iter().zip(&f).map(|(p, v)| p * v).sum();
        for normalized in [false, true] {
            let est = estimate_weighted_sum(&s, |i| f.get(i).copied(), normalized).unwrap();
            assert_abs_diff_eq!(est, exact, epsilon = 1e-9);
        }
    }

    #[test]
    fn product_weights_sum_to_one(
        (a, _) in distribution(),
        (b, _) in distribution(),
        k in 1usize..5,
        seed in any::<u64>(),
    ) {
        let ps = product_priority_sample(&[dist_of(&a), dist_of(&b)], k, seed).unwrap();
        let total: f64 = ps.combinations().map(|c| ps.combination_weight(&c)).sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-10);
        prop_assert_eq!(ps.combinations().count(), ps.num_combinations());
    }

    #[test]
    fn single_component_product_is_single_latent(
        (logits, ll) in distribution(),
        k in 1usize..8,
        alpha in 0.0f64..=1.0,
        seed in any::<u64>(),
    ) {
        let d = dist_of(&logits);
        let s = priority_sample(&d, k, seed).unwrap();
        let loglik: Vec<f64> = s.indices.iter().map(|&i| -ll[i].abs()).collect();
        let lz: Vec<f64> = s.indices.iter().map(|&i| 0.1 * ll[i]).collect();
        let input = BoundInput::new(alpha, s.clone(), loglik.clone(), lz.clone()).unwrap();
        let single = vod_objective(&input).unwrap();
        let ps = ProductSample { per_option_samples: vec![s.clone()] };
        let (prod, coeffs) =
            product_vod_gradient(alpha, &ps, std::slice::from_ref(&lz), &AdditiveReader { loglik: vec![loglik] }, 1 << 16).unwrap();
        prop_assert_eq!(single.value.to_bits(), prod.value.to_bits());
        let unit: Vec<Vec<f64>> = (0..s.len()).map(|i| vec![if i == 0 { 1.0 } else { 0.0 }]).collect();
        let g = vod_gradient(&input, &unit, &unit).unwrap();
        assert_abs_diff_eq!(g.reader_grad[0], coeffs.reader[0][0], epsilon = 1e-12);
        assert_abs_diff_eq!(g.retriever_grad[0], coeffs.retriever[0][0], epsilon = 1e-12);
    }

    #[test]
    fn softmax_on_support_shift_invariant(
        scores in prop::collection::vec(-500.0f64..500.0, 1..40),
        shift in -200.0f64..200.0,
    ) {
        let ids: Vec<usize> = (0..scores.len()).collect();
        let a = softmax_on_support(ids.clone(), scores.clone()).unwrap();
        let b = softmax_on_support(ids, scores.iter().map(|s| s + shift).collect()).unwrap();
        prop_assert!(a.log_probs.iter().all(|l| l.is_finite()));
        for (x, y) in a.log_probs.iter().zip(&b.log_probs) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-12 * (1.0 + x.abs()));
        }
        assert_abs_diff_eq!(a.probs().iter().sum::<f64>(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn kl_is_non_negative(
        pairs in prop::collection::vec((-20.0f64..20.0, -20.0f64..20.0), 1..30),
    ) {
        let ids: Vec<usize> = (0..pairs.len()).collect();
        let r = softmax_on_support(ids.clone(), pairs.iter().map(|p| p.0).collect()).unwrap();
        let p = softmax_on_support(ids, pairs.iter().map(|p| p.1).collect()).unwrap();
        prop_assert!(kl_divergence(&r, &p).unwrap() >= 0.0);
        prop_assert!(kl_divergence(&r, &r).unwrap() <= 1e-12);
    }

    #[test]
    fn ess_lies_between_one_and_k(w in prop::collection::vec(0.0f64..10.0, 1..50)) {
        prop_assume!(w.iter().any(|x| *x > 0.0));
        let e = effective_sample_size(&w).unwrap();
        prop_assert!(e >= 1.0 - 1e-12 && e <= w.len() as f64 * (1.0 + 1e-12));
    }

    #[test]
    fn tokenize_is_idempotent(text in "[ -~]{0,60}") {
        let once = tokenize(&text);
        prop_assert_eq!(tokenize(&once.join(" ")), once);
    }

    #[test]
    fn bounds_are_ordered_and_monotone(seed in any::<u64>(), n in 2usize..20) {
        let inst = random_instance(InstanceShape { n_docs: n, support: n, ..Default::default() }, seed).unwrap();
        let (m, r) = (&inst.model, &inst.proposal);
        let mll = exact_marginal_log_likelihood(m, &r.support).unwrap();
        let elbo = exact_elbo(m, r).unwrap();
        let mut prev = f64::INFINITY;
        for t in 0..=10 {
            let v = exact_rvb(t as f64 / 10.0, m, r).unwrap();
            prop_assert!(elbo <= v + 1e-9 && v <= mll + 1e-9);
            prop_assert!(v <= prev + 1e-9);
            prev = v;
        }
    }

    #[test]
    fn exhaustive_vod_matches_rvb(seed in any::<u64>(), alpha in 0.0f64..=1.0) {
        let inst = random_instance(InstanceShape::default(), seed).unwrap();
        let full = priority_sample(&inst.proposal.to_discrete().unwrap(), inst.proposal.len(), seed).unwrap();
        let vod = evaluate_vod(&inst.model, &inst.proposal, &full, alpha).unwrap().value;
        let exact = exact_rvb(alpha, &inst.model, &inst.proposal).unwrap();
        assert_abs_diff_eq!(vod, exact, epsilon = 1e-9);
    }

    #[test]
    fn alpha_schedule_stays_in_unit_interval(step in 0usize..1000, t in 1usize..300) {
        let a = AlphaSchedule::Linear.alpha_at(step, t);
        prop_assert!((0.0..=1.0).contains(&a));
        prop_assert!(AlphaSchedule::Linear.alpha_at(step + 1, t) <= a);
    }

    #[test]
    fn zero_gradient_leaves_params(params in prop::collection::vec(-5.0f64..5.0, 1..10)) {
        let mut p = params.clone();
        let mut st = AdamState::new(p.len());
        let zeros = vec![0.0; p.len()];
        AdamConfig::default().step(&mut p, &zeros, &mut st).unwrap();
        prop_assert_eq!(p, params);
    }
}

fn small_collection() -> Collection {
    Collection::with_defaults(
        Corpus::from_texts([
            "alpha beta gamma",
            "beta beta delta",
            "gamma epsilon alpha zeta",
            "delta",
            "epsilon zeta eta alpha",
        ])
        .unwrap(),
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn bm25_is_non_negative(q in prop::collection::vec("(alpha|beta|gamma|delta|nope)", 1..6), d in 0usize..5) {
        let c = small_collection();
        prop_assert!(c.index.score(&q, d).unwrap() >= 0.0);
    }

    #[test]
    fn score_gradients_match_finite_differences(
        seed in any::<u64>(),
        theta in prop::collection::vec(-1.0f64..1.0, 5),
        q in prop::collection::vec("(alpha|beta|gamma|delta|eta)", 1..5),
        d in 0usize..5,
        dual in any::<bool>(),
    ) {
        let c = small_collection();
        let query = QueryRecord::new(q, None).unwrap();
        let vocab = tokenize("alpha beta");
        let model = if dual {
            ScoreModel::dual_embedding(tokenize("alpha beta delta"), 3, 0.7, seed).unwrap()
        } else {
            ScoreModel::linear(vocab).with_params(theta).unwrap()
        };
        let (_, g) = model.score_and_grad(&query, d, &c).unwrap();
        let fd = finite_difference(
            |t| model.clone().with_params(t.to_vec()).unwrap().score(&query, d, &c).unwrap(),
            &model.params,
            1e-6,
        )
        .unwrap();
        prop_assert!(max_relative_error(&g, &fd, 1e-4) < 1e-5);
    }

    #[test]
    fn checkpoints_round_trip(params in prop::collection::vec(-1e6f64..1e6, 5), scale in 0.01f64..10.0) {
        let reader = ScoreModel::linear(tokenize("alpha beta")).with_params(params.clone()).unwrap();
        let retriever = reader.clone().with_scale(scale);
        let models = Models { reader, retriever };
        let mut buf = Vec::new();
        models.write(&mut buf).unwrap();
        prop_assert_eq!(Models::parse(&buf[..], std::path::Path::new("m")).unwrap(), models);
    }
}
