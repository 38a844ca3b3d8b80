#![allow(dead_code)]

use kglink::bpr::TrainSample;
use kglink::kg::{Adjacency, PredicateBipartiteGraph};
use kglink::model::{EmbeddingModel, HyperParams};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Two subject blocks by two object blocks, links only inside blocks.
pub fn two_block_graph(subjects: usize, objects: usize, p: f64, seed: u64) -> Adjacency {
    let mut r = rng(seed);
    let mut edges = Vec::new();
    for s in 0..subjects {
        for o in 0..objects {
            let same = (s * 2 / subjects) == (o * 2 / objects);
            if same && r.random::<f64>() < p {
                edges.push((s, o));
            }
        }
    }
    Adjacency::from_edges(subjects, objects, edges).unwrap()
}

pub fn graph(adj: Adjacency) -> PredicateBipartiteGraph {
    PredicateBipartiteGraph::from_adjacency("p", adj)
}

/// Model with entries drawn uniformly from `[-scale, scale]`.
pub fn random_model(m: usize, n: usize, k: usize, scale: f64, r: &mut ChaCha8Rng) -> EmbeddingModel {
    let mut model = EmbeddingModel::zeros(m, n, k);
    for s in 0..m {
        for x in model.subject_row_mut(s) {
            *x = r.random_range(-scale..scale);
        }
    }
    for o in 0..n {
        for x in model.object_row_mut(o) {
            *x = r.random_range(-scale..scale);
        }
        model.set_bias(o, r.random_range(-scale..scale));
    }
    model
}

/// Naive score: explicit loop over factors plus bias.
pub fn naive_score(model: &EmbeddingModel, s: usize, o: usize) -> f64 {
    let u = model.subject_row(s);
    let v = model.object_row(o);
    let mut acc = 0.0;
    for f in 0..u.len() {
        acc += u[f] * v[f];
    }
    acc + model.bias(o)
}

/// `‖a - b‖ / max(‖a‖, ‖b‖, 1e-8)`.
pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    diff / na.max(nb).max(1e-8)
}

/// Every predicate of a synthetic family as a bipartite graph.
pub fn synthetic_graphs(kind: kglink::synth::SyntheticKind, seed: u64) -> Vec<PredicateBipartiteGraph> {
    let data = kglink::synth::generate_synthetic(&kglink::synth::SyntheticSpec { kind, seed }).unwrap();
    let kg: kglink::KnowledgeGraph = data.triples.into_iter().collect();
    kg.predicates().map(|p| kglink::extract_bipartite(&kg, p).unwrap()).collect()
}

pub const EPS: f64 = 1e-6;

/// Per-sample BPR objective coded from scratch: ln σ(x+ - x-) minus the L2
/// terms on the five touched parameter blocks.
pub fn bpr_objective(model: &EmbeddingModel, t: &TrainSample, hp: &HyperParams) -> f64 {
    let diff = naive_score(model, t.subject, t.positive) - naive_score(model, t.subject, t.negative);
    let sq = |r: &[f64]| r.iter().map(|x| x * x).sum::<f64>();
    (1.0 / (1.0 + (-diff).exp())).ln()
        - hp.lambda_subject * sq(model.subject_row(t.subject))
        - hp.lambda_positive * (sq(model.object_row(t.positive)) + model.bias(t.positive).powi(2))
        - hp.lambda_negative * (sq(model.object_row(t.negative)) + model.bias(t.negative).powi(2))
}

pub enum Param {
    U(usize, usize),
    V(usize, usize),
    B(usize),
}

pub fn perturb(model: &mut EmbeddingModel, p: &Param, delta: f64) {
    match *p {
        Param::U(s, f) => model.subject_row_mut(s)[f] += delta,
        Param::V(o, f) => model.object_row_mut(o)[f] += delta,
        Param::B(o) => {
            let b = model.bias(o);
            model.set_bias(o, b + delta);
        }
    }
}

pub fn central_difference(model: &EmbeddingModel, t: &TrainSample, hp: &HyperParams, p: Param) -> f64 {
    let mut plus = model.clone();
    perturb(&mut plus, &p, EPS);
    let mut minus = model.clone();
    perturb(&mut minus, &p, -EPS);
    (bpr_objective(&plus, t, hp) - bpr_objective(&minus, t, hp)) / (2.0 * EPS)
}
