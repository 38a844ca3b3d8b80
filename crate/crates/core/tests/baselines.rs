mod common;

use common::{random_model, rel_err, rng, two_block_graph};
use kglink::baselines::{
    most_popular_ranker, pointwise_gradients, pointwise_loss, pointwise_mf_train, pointwise_step, random_ranker,
    PopularityTable,
};
use kglink::kg::Adjacency;
use kglink::model::{EmbeddingModel, HyperParams};
use proptest::prelude::*;
use rand::Rng;

#[test]
fn pointwise_gradient_matches_central_differences() {
    const EPS: f64 = 1e-6;
    let mut r = rng(77);
    for _ in 0..100 {
        let k = r.random_range(1..12);
        let model = random_model(3, 4, k, 0.8, &mut r);
        let (s, o) = (r.random_range(0..3), r.random_range(0..4));
        let y = if r.random::<bool>() { 1.0 } else { 0.0 };
        let hp = HyperParams {
            factors: k,
            lambda_subject: r.random_range(0.0..0.1),
            lambda_positive: r.random_range(0.0..0.1),
            ..HyperParams::default()
        };
        let g = pointwise_gradients(&model, s, o, y, &hp);
        let fd = |edit: &dyn Fn(&mut EmbeddingModel, f64)| {
            let mut plus = model.clone();
            edit(&mut plus, EPS);
            let mut minus = model.clone();
            edit(&mut minus, -EPS);
            (pointwise_loss(&plus, s, o, y, &hp) - pointwise_loss(&minus, s, o, y, &hp)) / (2.0 * EPS)
        };
        let fd_u: Vec<f64> = (0..k).map(|f| fd(&|m, d| m.subject_row_mut(s)[f] += d)).collect();
        let fd_v: Vec<f64> = (0..k).map(|f| fd(&|m, d| m.object_row_mut(o)[f] += d)).collect();
        let fd_b = fd(&|m, d| {
            let b = m.bias(o);
            m.set_bias(o, b + d)
        });
        assert!(rel_err(&g.subject, &fd_u) < 1e-5);
        assert!(rel_err(&g.object, &fd_v) < 1e-5);
        assert!(rel_err(&[g.bias], &[fd_b]) < 1e-5);

        // the update is a descent step of half the learning rate
        let mut stepped = model.clone();
        pointwise_step(&mut stepped, s, o, y, &hp, 0).unwrap();
        for f in 0..k {
            let want = model.subject_row(s)[f] - hp.learning_rate / 2.0 * g.subject[f];
            assert!((stepped.subject_row(s)[f] - want).abs() < 1e-12);
        }
        assert!((stepped.bias(o) - (model.bias(o) - hp.learning_rate / 2.0 * g.bias)).abs() < 1e-12);
    }
}

#[test]
fn pointwise_training_lowers_squared_error() {
    let adj = two_block_graph(50, 40, 0.3, 9);
    let hp = HyperParams { factors: 10, epochs: 20, learning_rate: 0.05, seed: 3, ..HyperParams::default() };
    let (_, report) = pointwise_mf_train(&adj, &hp).unwrap();
    let first = report.objective_trace[0].1;
    assert!(report.final_objective < first, "{first} -> {}", report.final_objective);
    assert_eq!(report.samples_processed, 20 * adj.edge_count());
}

#[test]
fn pointwise_training_is_deterministic() {
    let adj = two_block_graph(30, 20, 0.3, 2);
    let hp = HyperParams { factors: 6, epochs: 4, seed: 12, ..HyperParams::default() };
    let (a, _) = pointwise_mf_train(&adj, &hp).unwrap();
    let (b, _) = pointwise_mf_train(&adj, &hp).unwrap();
    assert!(a.parameters().zip(b.parameters()).all(|(x, y)| x.to_bits() == y.to_bits()));
}

#[test]
fn random_ranker_is_uniform() {
    let draws = 100_000usize;
    let mut counts = [0usize; 10];
    for i in 0..draws {
        let list = random_ranker(10, &[], 1, i as u64);
        counts[list[0]] += 1;
    }
    let p = 0.1;
    let se = (p * (1.0 - p) / draws as f64).sqrt();
    let mut chi2 = 0.0;
    let mut outside = 0;
    for &c in &counts {
        let freq = c as f64 / draws as f64;
        outside += ((freq - p).abs() > 3.0 * se) as usize;
        chi2 += (c as f64 - draws as f64 * p).powi(2) / (draws as f64 * p);
    }
    assert!(outside <= 1, "{outside} objects outside 0.1 ± 3 SE: {counts:?}");
    // 99.9% quantile of chi-square with 9 degrees of freedom
    assert!(chi2 < 27.88, "chi-square {chi2}");
}

#[test]
fn most_popular_ignores_subject_identity() {
    let adj = Adjacency::from_edges(4, 5, [(0, 1), (1, 1), (2, 1), (0, 3), (1, 3), (3, 0)]).unwrap();
    let table = PopularityTable::build(&adj);
    assert_eq!(table.counts, vec![1, 3, 0, 2, 0]);
    assert_eq!(table.order, vec![1, 3, 0, 2, 4]);
    // subjects with identical exclusions receive identical lists
    assert_eq!(most_popular_ranker(&table, adj.row(2), 2), most_popular_ranker(&table, &[1], 2));
    assert_eq!(most_popular_ranker(&table, adj.row(3), 3), vec![1, 3, 2]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn random_ranker_respects_exclusions(n in 1usize..40, top_n in 0usize..50, seed in any::<u64>(), mask in any::<u64>()) {
        let exclude: Vec<usize> = (0..n).filter(|o| mask >> (o % 64) & 1 == 1).collect();
        let list = random_ranker(n, &exclude, top_n, seed);
        prop_assert_eq!(list.len(), top_n.min(n - exclude.len()));
        let mut sorted = list.clone();
        sorted.sort_unstable();
        sorted.dedup();
        prop_assert_eq!(sorted.len(), list.len());
        prop_assert!(list.iter().all(|o| *o < n && !exclude.contains(o)));
        prop_assert_eq!(list, random_ranker(n, &exclude, top_n, seed));
    }

    #[test]
    fn most_popular_is_sorted_by_count(counts in proptest::collection::vec(0usize..20, 1..30), top_n in 0usize..40) {
        let table = PopularityTable::from_counts(counts.clone());
        let list = most_popular_ranker(&table, &[], top_n);
        prop_assert_eq!(list.len(), top_n.min(counts.len()));
        for w in list.windows(2) {
            prop_assert!(counts[w[0]] > counts[w[1]] || (counts[w[0]] == counts[w[1]] && w[0] < w[1]));
        }
    }
}
