use dsel_core::harness::{adapt, generate, plan_subset, prepare, HarnessParams, Plan, PlanSpec, SynthConfig};
use dsel_core::scorers::NGramModel;
use dsel_core::TokenBudget;

#[test]
fn mixing_in_domain_counts_never_hurts_domain_fit() {
    for seed in 0..5 {
        let s = generate(&SynthConfig::with_docs(400, 0.3, seed)).unwrap();
        let base = NGramModel::train(&s.reference, 3, 0.1).unwrap();
        let base_ppl = base.corpus_perplexity(&s.domain_test).unwrap();
        for w in [0.25, 0.5, 1.0] {
            let adapted = adapt(&base, &s.domain, w).unwrap();
            let ppl = adapted.corpus_perplexity(&s.domain_test).unwrap();
            assert!(ppl <= base_ppl, "seed {seed} w {w}: {ppl} > {base_ppl}");
            assert!(ppl.is_finite() && ppl >= 1.0);
        }
    }
}

#[test]
fn zero_weight_adaptation_is_identity() {
    let s = generate(&SynthConfig::with_docs(200, 0.3, 1)).unwrap();
    let base = NGramModel::train(&s.reference, 2, 0.1).unwrap();
    let same = adapt(&base, &s.domain, 0.0).unwrap();
    for ctx in [vec!["the"], vec!["of"], vec!["unseen-word"]] {
        let (a, b) = (base.distribution(&ctx), same.distribution(&ctx));
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
    }
}

#[test]
fn larger_ets_budgets_fit_the_domain_better() {
    const SEEDS: u64 = 20;
    let budgets = [0.05, 0.10, 0.20];
    let mut means = [0.0; 3];
    for seed in 0..SEEDS {
        let s = generate(&SynthConfig::with_docs(1000, 0.3, seed)).unwrap();
        let params = HarnessParams {
            seed,
            ..HarnessParams::default()
        };
        let prepared = prepare((&s).into(), &params).unwrap();
        for (i, &b) in budgets.iter().enumerate() {
            let subset = plan_subset(
                &prepared,
                &s.domain,
                PlanSpec::hard(Plan::EtsDacp),
                TokenBudget::Fraction(b),
                seed,
            )
            .unwrap();
            let model = adapt(&prepared.base, &subset, params.mix_weight).unwrap();
            means[i] += model.corpus_perplexity(&s.domain_test).unwrap() / SEEDS as f64;
        }
    }
    assert!(means[2] <= means[1] && means[1] <= means[0], "{means:?}");
}
