//! Comparison rankers: uniform random, most popular, and pointwise matrix
//! factorization trained on squared error.

use rand::seq::index;
use serde::Serialize;

use crate::bpr::{trace_interval, SampleStream, TrainReport, TrainSample, MONITOR_SAMPLES};
use crate::error::{Error, Result};
use crate::kg::Adjacency;
use crate::model::{dot, init_model, EmbeddingModel, HyperParams};
use crate::seed::Seed;

/// Per-object count of distinct training subjects, and the objects ordered
/// by descending count (ties by ascending id).
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PopularityTable {
    pub counts: Vec<usize>,
    pub order: Vec<usize>,
}

impl PopularityTable {
    pub fn from_counts(counts: Vec<usize>) -> Self {
        let mut order: Vec<usize> = (0..counts.len()).collect();
        order.sort_by(|&a, &b| counts[b].cmp(&counts[a]).then(a.cmp(&b)));
        PopularityTable { counts, order }
    }

    pub fn build(training: &Adjacency) -> Self {
        Self::from_counts(training.object_degrees())
    }
}

pub fn most_popular_ranker(table: &PopularityTable, exclude: &[usize], top_n: usize) -> Vec<usize> {
    let mut excluded = vec![false; table.counts.len()];
    for &o in exclude {
        if o < excluded.len() {
            excluded[o] = true;
        }
    }
    table.order.iter().copied().filter(|&o| !excluded[o]).take(top_n).collect()
}

/// Uniform sample without replacement of `min(top_n, n - |exclude|)`
/// non-excluded ids, in random order.
pub fn random_ranker(n: usize, exclude: &[usize], top_n: usize, seed: u64) -> Vec<usize> {
    let mut excluded = vec![false; n];
    for &o in exclude {
        if o < n {
            excluded[o] = true;
        }
    }
    let candidates: Vec<usize> = (0..n).filter(|&o| !excluded[o]).collect();
    let amount = top_n.min(candidates.len());
    let mut rng = Seed(seed).rng();
    index::sample(&mut rng, candidates.len(), amount).into_iter().map(|i| candidates[i]).collect()
}

/// Gradient of `(y - x)² + λs‖U_s‖² + λo(‖V_o‖² + b_o²)` for one `(s, o, y)`.
#[derive(Clone, Debug, PartialEq)]
pub struct PointwiseGradients {
    pub subject: Vec<f64>,
    pub object: Vec<f64>,
    pub bias: f64,
}

pub fn pointwise_loss(model: &EmbeddingModel, s: usize, o: usize, y: f64, hp: &HyperParams) -> f64 {
    let u = model.subject_row(s);
    let v = model.object_row(o);
    let e = y - (dot(u, v) + model.bias(o));
    e * e + hp.lambda_subject * dot(u, u) + hp.lambda_positive * (dot(v, v) + model.bias(o).powi(2))
}

pub fn pointwise_gradients(model: &EmbeddingModel, s: usize, o: usize, y: f64, hp: &HyperParams) -> PointwiseGradients {
    let u = model.subject_row(s);
    let v = model.object_row(o);
    let e = y - (dot(u, v) + model.bias(o));
    PointwiseGradients {
        subject: u.iter().zip(v).map(|(&uf, &vf)| -2.0 * e * vf + 2.0 * hp.lambda_subject * uf).collect(),
        object: u.iter().zip(v).map(|(&uf, &vf)| -2.0 * e * uf + 2.0 * hp.lambda_positive * vf).collect(),
        bias: -2.0 * e + 2.0 * hp.lambda_positive * model.bias(o),
    }
}

/// `U_s += α(e·V_o − λU_s)`, `V_o += α(e·U_s − λV_o)`, `b_o += α(e − λb_o)`
/// with `e = y − x(s, o)`: a descent step of size `α/2` on [`pointwise_loss`].
pub fn pointwise_step(
    model: &mut EmbeddingModel,
    s: usize,
    o: usize,
    y: f64,
    hp: &HyperParams,
    index: usize,
) -> Result<()> {
    let k = model.factors();
    let e = y - model.score_unchecked(s, o);
    let a = hp.learning_rate;
    let (us, vo) = (s * k, o * k);
    for f in 0..k {
        let u = model.u[us + f];
        let v = model.v[vo + f];
        model.u[us + f] = u + a * (e * v - hp.lambda_subject * u);
        model.v[vo + f] = v + a * (e * u - hp.lambda_positive * v);
    }
    let b = model.b[o];
    model.b[o] = b + a * (e - hp.lambda_positive * b);
    if !(model.subject_row(s).iter().chain(model.object_row(o)).all(|x| x.is_finite()) && model.b[o].is_finite()) {
        return Err(Error::Divergence {
            sample_index: index,
            subject: s,
            parameter: "pointwise MF parameters",
            hint: "; try a smaller learning rate",
        });
    }
    Ok(())
}

/// Mean squared error `(y - x)²` over the positive and negative pair of each sample.
pub fn pointwise_mse(model: &EmbeddingModel, samples: &[TrainSample]) -> f64 {
    let sum: f64 = samples
        .iter()
        .map(|t| {
            let ep = 1.0 - model.score_unchecked(t.subject, t.positive);
            let en = model.score_unchecked(t.subject, t.negative);
            ep * ep + en * en
        })
        .sum();
    sum / (2 * samples.len()) as f64
}

/// Pointwise MF sharing BPR's init, sampler and budget: each of the
/// `epochs * edge_count` draws yields one `(s, o+, 1)` step followed by one
/// `(s, o-, 0)` step. The report's objective is the monitoring-set MSE.
/// `λ_subject` regularises `U`; `λ_positive` regularises `V` and `b`.
pub fn pointwise_mf_train(adjacency: &Adjacency, hp: &HyperParams) -> Result<(EmbeddingModel, TrainReport)> {
    hp.validate()?;
    let root = Seed(hp.seed);
    let total = hp.epochs * adjacency.edge_count();
    let stream = SampleStream::new(adjacency, total, root.child("samples").0)?;
    let skipped_subjects = stream.skipped_subjects();
    let monitor: Vec<TrainSample> = SampleStream::new(adjacency, MONITOR_SAMPLES, root.child("monitor").0)?.collect();

    let mut model = init_model(adjacency.n_subjects(), adjacency.n_objects(), hp)?;
    let interval = trace_interval(total);
    let mut trace = vec![(0, pointwise_mse(&model, &monitor))];
    let mut processed = 0;
    for t in stream {
        pointwise_step(&mut model, t.subject, t.positive, 1.0, hp, processed)?;
        pointwise_step(&mut model, t.subject, t.negative, 0.0, hp, processed)?;
        processed += 1;
        if processed % interval == 0 || processed == total {
            trace.push((processed, pointwise_mse(&model, &monitor)));
        }
    }
    let final_objective = trace.last().map(|&(_, v)| v).unwrap_or(f64::NAN);
    Ok((model, TrainReport { samples_processed: processed, skipped_subjects, final_objective, objective_trace: trace }))
}
