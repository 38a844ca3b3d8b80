mod common;

use std::collections::BTreeSet;

use kglink::kg::{parse_triples, subgraph_stats, Adjacency, KnowledgeGraph, Triple, TripleFormat};
use kglink::synth::{generate_synthetic, SyntheticKind, SyntheticSpec, CORPUS_RELATIONS};
use kglink::{extract_bipartite, Error};
use proptest::prelude::*;

const FIXTURE: &str = include_str!("fixtures/corpus_small.tsv");

fn parse(text: &str) -> KnowledgeGraph {
    parse_triples(text.as_bytes(), TripleFormat::Tsv).unwrap().0
}

#[test]
fn fixture_relations_have_expected_sizes() {
    let kg = parse(FIXTURE);
    for (pred, m, n, e) in [("import", 142, 62, 391), ("dealsWith", 131, 124, 945)] {
        let stats = subgraph_stats(&extract_bipartite(&kg, pred).unwrap());
        assert_eq!((stats.subjects, stats.objects, stats.edges), (m, n, e), "{pred}");
    }
}

#[test]
fn fixture_matches_generator() {
    let data = generate_synthetic(&SyntheticSpec { kind: SyntheticKind::RelationCorpus, seed: 0 }).unwrap();
    let generated: BTreeSet<String> = data
        .triples
        .iter()
        .filter(|t| t.predicate == "import" || t.predicate == "dealsWith")
        .map(|t| format!("{}\t{}\t{}", t.subject, t.predicate, t.object))
        .collect();
    let fixture: BTreeSet<String> = FIXTURE.lines().map(str::to_owned).collect();
    assert_eq!(generated, fixture);
}

#[test]
fn generated_corpus_matches_every_relation() {
    let data = generate_synthetic(&SyntheticSpec { kind: SyntheticKind::RelationCorpus, seed: 42 }).unwrap();
    let kg: KnowledgeGraph = data.triples.into_iter().collect();
    for (pred, m, n, e, _) in CORPUS_RELATIONS {
        let stats = subgraph_stats(&extract_bipartite(&kg, pred).unwrap());
        assert_eq!((stats.subjects, stats.objects, stats.edges), (m, n, e), "{pred}");
    }
    let row = |name: &str| CORPUS_RELATIONS.iter().find(|r| r.0 == name).map(|r| (r.1, r.2, r.3)).unwrap();
    assert_eq!(row("hasOfficialLanguage"), (583, 214, 964));
    assert_eq!(row("export"), (140, 176, 579));
}

#[test]
fn tsv_round_trip() {
    let kg = parse(FIXTURE);
    let mut out = Vec::new();
    kg.write_tsv(&mut out).unwrap();
    let again = parse(std::str::from_utf8(&out).unwrap());
    assert_eq!(kg, again);
}

#[test]
fn unknown_predicate_lists_available() {
    let kg = parse("a\tp\tb\n");
    match extract_bipartite(&kg, "q") {
        Err(Error::UnknownPredicate { predicate, available }) => {
            assert_eq!(predicate, "q");
            assert_eq!(available, vec!["p".to_string()]);
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn invalid_utf8_reports_offset() {
    let bytes = b"a\tp\tb\nc\tp\t\xff\n";
    match parse_triples(&bytes[..], TripleFormat::Tsv) {
        Err(Error::NonUtf8 { offset }) => assert_eq!(offset, 10),
        other => panic!("{other:?}"),
    }
}

#[test]
fn adjacency_rejects_out_of_range_edges() {
    assert!(Adjacency::from_edges(2, 2, [(0, 2)]).is_err());
    assert!(Adjacency::from_edges(2, 2, [(2, 0)]).is_err());
}

fn triple_strategy() -> impl Strategy<Value = (String, String, String)> {
    ("[a-e]{1,2}", "[pq]", "[a-e]{1,2}")
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn graph_is_order_independent_and_idempotent(mut triples in proptest::collection::vec(triple_strategy(), 0..40), rot in 0usize..40) {
        let to_text = |ts: &[(String, String, String)]| ts.iter().map(|(s, p, o)| format!("{s}\t{p}\t{o}\n")).collect::<String>();
        let a = parse(&to_text(&triples));
        let doubled = parse(&(to_text(&triples) + &to_text(&triples)));
        if !triples.is_empty() {
            let k = rot % triples.len();
            triples.rotate_left(k);
            triples.reverse();
        }
        let b = parse(&to_text(&triples));
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(&a, &doubled);
    }

    #[test]
    fn bipartite_extraction_is_consistent(triples in proptest::collection::vec(triple_strategy(), 1..60)) {
        let kg: KnowledgeGraph = triples.iter().map(|(s, p, o)| Triple::new(s, p, o).unwrap()).collect();
        for pred in kg.predicates() {
            let g = extract_bipartite(&kg, pred).unwrap();
            let adj = g.adjacency();
            let pairs = kg.pairs(pred).unwrap();
            prop_assert_eq!(g.edge_count(), pairs.len());
            // degree sums agree on both sides
            let subject_sum: usize = (0..g.m()).map(|s| adj.degree(s)).sum();
            let object_sum: usize = adj.object_degrees().iter().sum();
            prop_assert_eq!(subject_sum, g.edge_count());
            prop_assert_eq!(object_sum, g.edge_count());
            // ids are dense, labels sorted, and every edge maps back to a pair
            prop_assert!(g.subject_labels().windows(2).all(|w| w[0] < w[1]));
            prop_assert!(g.object_labels().windows(2).all(|w| w[0] < w[1]));
            for (s, o) in adj.edges() {
                prop_assert!(pairs.contains(&(g.subject_label(s).to_owned(), g.object_label(o).to_owned())));
            }
            for s in 0..g.m() {
                prop_assert!(adj.degree(s) > 0);
            }
            prop_assert!(adj.object_degrees().iter().all(|&d| d > 0));
        }
    }
}
