//! BPR training: uniform `(s, o+, o-)` sampling and the pairwise SGD step.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::kg::Adjacency;
use crate::model::{dot, init_model, log_sigmoid, sigmoid, EmbeddingModel, HyperParams};
use crate::seed::Seed;

/// Samples drawn once per run to track the objective during training.
pub const MONITOR_SAMPLES: usize = 1000;
const TRACE_CHECKPOINTS: usize = 20;

/// `o_pos` is linked to `s` in the training adjacency, `o_neg` is not.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct TrainSample {
    pub subject: usize,
    pub positive: usize,
    pub negative: usize,
}

/// Draws training samples with replacement: an observed edge uniformly over
/// all sampleable edges, then an unlinked object by rejection over `[0, n)`.
///
/// Subjects linked to every object cannot yield a negative; their edges are
/// dropped from the pool and counted in [`skipped_subjects`](Self::skipped_subjects).
pub struct SampleStream<'a> {
    adjacency: &'a Adjacency,
    edges: Vec<(usize, usize)>,
    skipped_subjects: usize,
    rng: ChaCha8Rng,
    remaining: usize,
}

impl<'a> SampleStream<'a> {
    pub fn new(adjacency: &'a Adjacency, count: usize, seed: u64) -> Result<Self> {
        let n = adjacency.n_objects();
        let mut edges = Vec::with_capacity(adjacency.edge_count());
        let mut skipped_subjects = 0;
        for s in 0..adjacency.n_subjects() {
            let row = adjacency.row(s);
            if row.len() >= n {
                if !row.is_empty() {
                    skipped_subjects += 1;
                }
                continue;
            }
            edges.extend(row.iter().map(|&o| (s, o)));
        }
        if edges.is_empty() {
            return Err(Error::NoSampleableEdge { n_objects: n });
        }
        Ok(SampleStream { adjacency, edges, skipped_subjects, rng: Seed(seed).rng(), remaining: count })
    }

    pub fn skipped_subjects(&self) -> usize {
        self.skipped_subjects
    }
}

impl Iterator for SampleStream<'_> {
    type Item = TrainSample;

    fn next(&mut self) -> Option<TrainSample> {
        if self.remaining == 0 {
            return None;
        }
        self.remaining -= 1;
        let (subject, positive) = self.edges[self.rng.random_range(0..self.edges.len())];
        let n = self.adjacency.n_objects();
        let negative = loop {
            let o = self.rng.random_range(0..n);
            if !self.adjacency.contains(subject, o) {
                break o;
            }
        };
        Some(TrainSample { subject, positive, negative })
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        (self.remaining, Some(self.remaining))
    }
}

#[derive(Clone, Debug)]
pub struct TrainingSet {
    pub samples: Vec<TrainSample>,
    pub skipped_subjects: usize,
}

/// Materialises `epochs * edge_count` samples. [`train`] streams the same
/// sequence instead of storing it.
pub fn sample_training_set(adjacency: &Adjacency, epochs: usize, seed: u64) -> Result<TrainingSet> {
    let stream = SampleStream::new(adjacency, epochs * adjacency.edge_count(), seed)?;
    let skipped_subjects = stream.skipped_subjects();
    Ok(TrainingSet { samples: stream.collect(), skipped_subjects })
}

/// Gradient of the per-sample objective
/// `ln σ(x+ - x-) - λs‖U_s‖² - λ+(‖V+‖² + b+²) - λ-(‖V-‖² + b-²)`.
#[derive(Clone, Debug, PartialEq)]
pub struct BprGradients {
    /// `1 - σ(x+ - x-)`.
    pub d: f64,
    pub subject: Vec<f64>,
    pub positive: Vec<f64>,
    pub negative: Vec<f64>,
    pub positive_bias: f64,
    pub negative_bias: f64,
}

fn check_sample(model: &EmbeddingModel, sample: &TrainSample) -> Result<()> {
    if sample.subject >= model.m() {
        return Err(Error::IndexOutOfRange { kind: "subject", index: sample.subject, len: model.m() });
    }
    for o in [sample.positive, sample.negative] {
        if o >= model.n() {
            return Err(Error::IndexOutOfRange { kind: "object", index: o, len: model.n() });
        }
    }
    Ok(())
}

#[inline]
fn margin(model: &EmbeddingModel, sample: &TrainSample) -> f64 {
    let u = model.subject_row(sample.subject);
    dot(u, model.object_row(sample.positive)) + model.bias(sample.positive)
        - dot(u, model.object_row(sample.negative))
        - model.bias(sample.negative)
}

pub fn bpr_gradients(model: &EmbeddingModel, sample: &TrainSample, hp: &HyperParams) -> Result<BprGradients> {
    check_sample(model, sample)?;
    let d = 1.0 - sigmoid(margin(model, sample));
    let u = model.subject_row(sample.subject);
    let vp = model.object_row(sample.positive);
    let vn = model.object_row(sample.negative);
    Ok(BprGradients {
        d,
        subject: (0..u.len()).map(|f| d * (vp[f] - vn[f]) - 2.0 * hp.lambda_subject * u[f]).collect(),
        positive: u.iter().zip(vp).map(|(&uf, &vf)| d * uf - 2.0 * hp.lambda_positive * vf).collect(),
        negative: u.iter().zip(vn).map(|(&uf, &vf)| -d * uf - 2.0 * hp.lambda_negative * vf).collect(),
        positive_bias: d - 2.0 * hp.lambda_positive * model.bias(sample.positive),
        negative_bias: -d - 2.0 * hp.lambda_negative * model.bias(sample.negative),
    })
}

/// Per-sample objective that [`bpr_gradients`] differentiates.
pub fn sample_objective(model: &EmbeddingModel, sample: &TrainSample, hp: &HyperParams) -> f64 {
    let sq = |r: &[f64]| dot(r, r);
    log_sigmoid(margin(model, sample))
        - hp.lambda_subject * sq(model.subject_row(sample.subject))
        - hp.lambda_positive * (sq(model.object_row(sample.positive)) + model.bias(sample.positive).powi(2))
        - hp.lambda_negative * (sq(model.object_row(sample.negative)) + model.bias(sample.negative).powi(2))
}

/// One gradient-ascent step. All deltas are computed from the pre-step
/// parameters; `o+ != o-` so each coordinate can be updated in place.
pub fn sgd_step(model: &mut EmbeddingModel, sample: &TrainSample, hp: &HyperParams) -> Result<()> {
    check_sample(model, sample)?;
    step_unchecked(model, sample, hp, 0)
}

fn step_unchecked(model: &mut EmbeddingModel, sample: &TrainSample, hp: &HyperParams, index: usize) -> Result<()> {
    let &TrainSample { subject: s, positive: p, negative: q } = sample;
    debug_assert_ne!(p, q);
    let d = 1.0 - sigmoid(margin(model, sample));
    let a = hp.learning_rate;
    let k = model.factors();
    let (us, vp0, vq0) = (s * k, p * k, q * k);
    for f in 0..k {
        let u = model.u[us + f];
        let vp = model.v[vp0 + f];
        let vq = model.v[vq0 + f];
        model.u[us + f] = u + a * (d * (vp - vq) - 2.0 * hp.lambda_subject * u);
        model.v[vp0 + f] = vp + a * (d * u - 2.0 * hp.lambda_positive * vp);
        model.v[vq0 + f] = vq + a * (-d * u - 2.0 * hp.lambda_negative * vq);
    }
    let bp = model.b[p];
    let bq = model.b[q];
    model.b[p] = bp + a * (d - 2.0 * hp.lambda_positive * bp);
    model.b[q] = bq + a * (-d - 2.0 * hp.lambda_negative * bq);

    let diverged = |parameter| Error::Divergence {
        sample_index: index,
        subject: s,
        parameter,
        hint: "; try a smaller learning rate",
    };
    if !model.subject_row(s).iter().all(|x| x.is_finite()) {
        return Err(diverged("U[subject]"));
    }
    if !model.object_row(p).iter().all(|x| x.is_finite()) {
        return Err(diverged("V[positive]"));
    }
    if !model.object_row(q).iter().all(|x| x.is_finite()) {
        return Err(diverged("V[negative]"));
    }
    if !model.b[p].is_finite() {
        return Err(diverged("b[positive]"));
    }
    if !model.b[q].is_finite() {
        return Err(diverged("b[negative]"));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrainReport {
    pub samples_processed: usize,
    pub skipped_subjects: usize,
    /// Mean monitored objective after the last sample.
    pub final_objective: f64,
    /// `(samples processed, mean monitored objective)` checkpoints, starting at 0.
    pub objective_trace: Vec<(usize, f64)>,
}

pub(crate) fn trace_interval(total: usize) -> usize {
    total.div_ceil(TRACE_CHECKPOINTS).max(1)
}

/// Mean [`sample_objective`] over a fixed set of samples.
pub fn mean_objective(model: &EmbeddingModel, samples: &[TrainSample], hp: &HyperParams) -> f64 {
    samples.iter().map(|t| sample_objective(model, t, hp)).sum::<f64>() / samples.len() as f64
}

/// Fits a model on `adjacency`: Gaussian init, then one step per sample over
/// `epochs * edge_count` uniformly drawn samples. The budget is the only
/// stopping rule.
///
/// Seeds: init uses `hp.seed`; samples and the monitoring set use children
/// `"samples"` and `"monitor"` of it.
pub fn train(adjacency: &Adjacency, hp: &HyperParams) -> Result<(EmbeddingModel, TrainReport)> {
    hp.validate()?;
    let root = Seed(hp.seed);
    let total = hp.epochs * adjacency.edge_count();
    let stream = SampleStream::new(adjacency, total, root.child("samples").0)?;
    let skipped_subjects = stream.skipped_subjects();
    let monitor: Vec<TrainSample> = SampleStream::new(adjacency, MONITOR_SAMPLES, root.child("monitor").0)?.collect();

    let mut model = init_model(adjacency.n_subjects(), adjacency.n_objects(), hp)?;
    let interval = trace_interval(total);
    let mut trace = vec![(0, mean_objective(&model, &monitor, hp))];
    let mut processed = 0;
    for sample in stream {
        step_unchecked(&mut model, &sample, hp, processed)?;
        processed += 1;
        if processed % interval == 0 || processed == total {
            trace.push((processed, mean_objective(&model, &monitor, hp)));
        }
    }
    let final_objective = trace.last().map(|&(_, v)| v).unwrap_or(f64::NAN);
    Ok((model, TrainReport { samples_processed: processed, skipped_subjects, final_objective, objective_trace: trace }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_dim(u: f64, vp: f64, vn: f64) -> EmbeddingModel {
        let mut m = EmbeddingModel::zeros(1, 2, 1);
        m.subject_row_mut(0)[0] = u;
        m.object_row_mut(0)[0] = vp;
        m.object_row_mut(1)[0] = vn;
        m
    }

    fn no_reg(alpha: f64) -> HyperParams {
        HyperParams {
            factors: 1,
            learning_rate: alpha,
            lambda_subject: 0.0,
            lambda_positive: 0.0,
            lambda_negative: 0.0,
            ..HyperParams::default()
        }
    }

    const SAMPLE: TrainSample = TrainSample { subject: 0, positive: 0, negative: 1 };

    #[test]
    fn hand_computed_step() {
        let mut m = one_dim(0.0, 1.0, -1.0);
        sgd_step(&mut m, &SAMPLE, &no_reg(0.2)).unwrap();
        assert!((m.subject_row(0)[0] - 0.2).abs() < 1e-15);
        assert_eq!(m.object_row(0)[0], 1.0);
        assert_eq!(m.object_row(1)[0], -1.0);
        assert!((m.bias(0) - 0.1).abs() < 1e-15);
        assert!((m.bias(1) + 0.1).abs() < 1e-15);
    }

    #[test]
    fn saturated_sample_leaves_model_unchanged() {
        // margin = 40 * 1 - 40 * -1 = 80, so d = 1 - σ(80) ≈ 1.8e-35
        let mut m = one_dim(40.0, 1.0, -1.0);
        let before = m.clone();
        sgd_step(&mut m, &SAMPLE, &no_reg(0.2)).unwrap();
        for (a, b) in m.parameters().zip(before.parameters()) {
            assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn step_rejects_bad_ids() {
        let mut m = one_dim(0.0, 0.0, 0.0);
        let bad = TrainSample { subject: 1, positive: 0, negative: 1 };
        assert!(sgd_step(&mut m, &bad, &no_reg(0.1)).is_err());
    }

    #[test]
    fn divergence_is_reported() {
        let mut m = one_dim(1e308, 1e308, -1e308);
        let hp = HyperParams { lambda_subject: 1.0, ..no_reg(1e10) };
        let err = sgd_step(&mut m, &SAMPLE, &hp).unwrap_err();
        assert!(matches!(err, Error::Divergence { parameter: "U[subject]", .. }), "{err}");
    }

    #[test]
    fn sample_set_size_and_validity() {
        let adj = Adjacency::from_edges(
            4,
            5,
            [(0, 0), (0, 1), (1, 2), (2, 3), (2, 4), (3, 0), (3, 1), (3, 2), (3, 3), (1, 4)],
        )
        .unwrap();
        assert_eq!(adj.edge_count(), 10);
        let set = sample_training_set(&adj, 50, 5).unwrap();
        assert_eq!(set.samples.len(), 500);
        for t in &set.samples {
            assert!(adj.contains(t.subject, t.positive));
            assert!(!adj.contains(t.subject, t.negative));
            assert_ne!(t.positive, t.negative);
        }
    }

    #[test]
    fn full_subject_is_skipped() {
        let adj = Adjacency::from_edges(2, 2, [(0, 0), (0, 1), (1, 0)]).unwrap();
        let set = sample_training_set(&adj, 10, 1).unwrap();
        assert_eq!(set.skipped_subjects, 1);
        assert_eq!(set.samples.len(), 30);
        assert!(set.samples.iter().all(|t| t.subject == 1 && t.negative == 1));

        let full = Adjacency::from_edges(1, 2, [(0, 0), (0, 1)]).unwrap();
        assert!(matches!(sample_training_set(&full, 1, 1), Err(Error::NoSampleableEdge { .. })));
        let single_object = Adjacency::from_edges(3, 1, [(0, 0), (2, 0)]).unwrap();
        assert!(sample_training_set(&single_object, 1, 1).is_err());
    }

    #[test]
    fn sampling_is_deterministic() {
        let adj = Adjacency::from_edges(3, 6, [(0, 0), (1, 2), (2, 5), (2, 1)]).unwrap();
        let a = sample_training_set(&adj, 20, 77).unwrap().samples;
        let b = sample_training_set(&adj, 20, 77).unwrap().samples;
        assert_eq!(a, b);
        assert_ne!(a, sample_training_set(&adj, 20, 78).unwrap().samples);
    }

    #[test]
    fn stream_matches_materialised_set() {
        let adj = Adjacency::from_edges(3, 6, [(0, 0), (1, 2), (2, 5), (2, 1)]).unwrap();
        let set = sample_training_set(&adj, 7, 3).unwrap().samples;
        let streamed: Vec<_> = SampleStream::new(&adj, 28, 3).unwrap().collect();
        assert_eq!(set, streamed);
    }

    #[test]
    fn train_report_trace() {
        let adj = Adjacency::from_edges(3, 6, [(0, 0), (0, 1), (1, 2), (2, 5), (2, 1)]).unwrap();
        let hp = HyperParams { factors: 4, epochs: 9, seed: 2, ..HyperParams::default() };
        let (model, report) = train(&adj, &hp).unwrap();
        assert_eq!(report.samples_processed, 45);
        assert_eq!(report.objective_trace.first().unwrap().0, 0);
        assert_eq!(report.objective_trace.last().unwrap().0, 45);
        assert_eq!(report.final_objective, report.objective_trace.last().unwrap().1);
        assert!(model.is_finite());
    }
}
