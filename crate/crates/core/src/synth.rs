//! Deterministic synthetic triple corpora used as fixtures and for the
//! qualitative benchmarks.
//!
//! Every generator is a pure function of its [`SyntheticSpec`]. Each
//! predicate draws from its own ChaCha8 stream seeded by
//! `Seed(spec.seed).child(predicate)`.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Zipf};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::kg::Triple;
use crate::seed::Seed;

/// Relation sizes `(name, subjects, objects, facts)` of the thirteen-relation
/// benchmark corpus, and whether its subjects and objects share a namespace.
pub const CORPUS_RELATIONS: [(&str, usize, usize, usize, bool); 13] = [
    ("import", 142, 62, 391, false),
    ("export", 140, 176, 579, false),
    ("isInterestedIn", 358, 213, 464, false),
    ("hasOfficialLanguage", 583, 214, 964, false),
    ("dealsWith", 131, 124, 945, true),
    ("happenedIn", 7121, 5526, 12500, false),
    ("participatedIn", 2330, 7043, 16809, false),
    ("isConnectedTo", 2835, 4391, 33581, true),
    ("hasChild", 10758, 12800, 17320, true),
    ("influence", 8056, 9153, 25819, true),
    ("wroteMusicFor", 5109, 21487, 24271, false),
    ("edited", 549, 5673, 5946, false),
    ("owns", 8330, 24422, 26536, false),
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SyntheticKind {
    /// Subjects and objects split into `blocks` contiguous groups; each pair
    /// links with `p_within` inside a block and `p_across` otherwise.
    PlantedBlocks { subjects: usize, objects: usize, blocks: usize, p_within: f64, p_across: f64 },
    /// Each subject links to `2..=2*mean_degree-2` distinct objects drawn by
    /// Zipf rank.
    PopularitySkew { subjects: usize, objects: usize, mean_degree: usize, zipf_exponent: f64 },
    /// `predicates` planted-block relations on one vertex set with
    /// `p_within` rising linearly from `p_min` to `p_max`. Pair draws are
    /// shared across predicates so edge sets are nested, and every vertex
    /// has an anchor edge so `m` and `n` stay fixed.
    DensitySweep { predicates: usize, subjects: usize, objects: usize, blocks: usize, p_min: f64, p_max: f64 },
    /// Planted-block relations where a growing fraction (0 up to
    /// `max_overlap`) of subjects is replaced by a pool of entities that
    /// appear on both sides and link in random directed triangles.
    OverlapSweep { predicates: usize, subjects: usize, objects: usize, blocks: usize, p_within: f64, max_overlap: f64 },
    /// One relation per row of [`CORPUS_RELATIONS`] with exactly those counts.
    RelationCorpus,
}

impl SyntheticKind {
    pub fn planted_blocks() -> Self {
        SyntheticKind::PlantedBlocks { subjects: 1000, objects: 500, blocks: 4, p_within: 0.2, p_across: 0.0 }
    }

    pub fn popularity_skew() -> Self {
        SyntheticKind::PopularitySkew { subjects: 500, objects: 200, mean_degree: 6, zipf_exponent: 1.0 }
    }

    pub fn density_sweep() -> Self {
        SyntheticKind::DensitySweep { predicates: 8, subjects: 200, objects: 100, blocks: 4, p_min: 0.05, p_max: 0.4 }
    }

    pub fn overlap_sweep() -> Self {
        SyntheticKind::OverlapSweep {
            predicates: 8,
            subjects: 200,
            objects: 100,
            blocks: 4,
            p_within: 0.2,
            max_overlap: 0.7,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SyntheticKind::PlantedBlocks { .. } => "planted-blocks",
            SyntheticKind::PopularitySkew { .. } => "popularity-skew",
            SyntheticKind::DensitySweep { .. } => "density-sweep",
            SyntheticKind::OverlapSweep { .. } => "overlap-sweep",
            SyntheticKind::RelationCorpus => "relation-corpus",
        }
    }

    /// Default parameters for a generator name.
    pub fn by_name(name: &str) -> Result<Self> {
        Ok(match name {
            "planted-blocks" => Self::planted_blocks(),
            "popularity-skew" => Self::popularity_skew(),
            "density-sweep" => Self::density_sweep(),
            "overlap-sweep" => Self::overlap_sweep(),
            "relation-corpus" => SyntheticKind::RelationCorpus,
            other => {
                return Err(Error::InvalidSynthetic(format!(
                    "unknown generator `{other}`; expected planted-blocks, popularity-skew, density-sweep, overlap-sweep or relation-corpus"
                )))
            }
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    #[serde(flatten)]
    pub kind: SyntheticKind,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PredicateTruth {
    pub predicate: String,
    pub subjects: usize,
    pub objects: usize,
    pub edges: usize,
    pub detail: serde_json::Value,
}

/// Generated triples plus a description of the planted structure.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SyntheticData {
    #[serde(skip)]
    pub triples: Vec<Triple>,
    pub spec: SyntheticSpec,
    pub predicates: Vec<PredicateTruth>,
}

impl SyntheticData {
    /// Triples as TSV, lines sorted.
    pub fn write_tsv<W: Write>(&self, mut out: W) -> Result<()> {
        let mut lines: Vec<String> =
            self.triples.iter().map(|t| format!("{}\t{}\t{}", t.subject, t.predicate, t.object)).collect();
        lines.sort();
        for line in lines {
            writeln!(out, "{line}")?;
        }
        Ok(())
    }

    /// Writes `path` and the sidecar `<path>.truth.json`; returns the sidecar path.
    pub fn write_files(&self, path: &Path) -> Result<PathBuf> {
        let mut out = BufWriter::new(File::create(path)?);
        self.write_tsv(&mut out)?;
        out.flush()?;
        let sidecar = truth_path(path);
        let mut side = BufWriter::new(File::create(&sidecar)?);
        serde_json::to_writer_pretty(&mut side, self)?;
        side.write_all(b"\n")?;
        side.flush()?;
        Ok(sidecar)
    }
}

pub fn truth_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".truth.json");
    PathBuf::from(s)
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidSynthetic(msg.into())
}

fn check_prob(name: &str, p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(invalid(format!("{name} must be in [0, 1], got {p}")));
    }
    Ok(())
}

fn check_blocks(subjects: usize, objects: usize, blocks: usize) -> Result<()> {
    if subjects == 0 || objects == 0 || blocks == 0 {
        return Err(invalid("subjects, objects and blocks must be positive"));
    }
    if blocks > subjects || blocks > objects {
        return Err(invalid(format!("{blocks} blocks do not fit {subjects} subjects and {objects} objects")));
    }
    Ok(())
}

fn block_of(i: usize, count: usize, blocks: usize) -> usize {
    i * blocks / count
}

/// Accumulates distinct `(subject, object)` label pairs for one predicate.
struct Builder {
    predicate: String,
    pairs: Vec<(String, String)>,
    seen: HashSet<(String, String)>,
}

impl Builder {
    fn new(predicate: &str) -> Self {
        Builder { predicate: predicate.to_owned(), pairs: Vec::new(), seen: HashSet::new() }
    }

    fn add(&mut self, s: String, o: String) -> bool {
        if self.seen.insert((s.clone(), o.clone())) {
            self.pairs.push((s, o));
            true
        } else {
            false
        }
    }

    fn finish(self, triples: &mut Vec<Triple>, detail: serde_json::Value) -> PredicateTruth {
        let subjects: HashSet<&str> = self.pairs.iter().map(|(s, _)| s.as_str()).collect();
        let objects: HashSet<&str> = self.pairs.iter().map(|(_, o)| o.as_str()).collect();
        let truth = PredicateTruth {
            predicate: self.predicate.clone(),
            subjects: subjects.len(),
            objects: objects.len(),
            edges: self.pairs.len(),
            detail,
        };
        triples.extend(self.pairs.into_iter().map(|(subject, object)| Triple {
            subject,
            predicate: self.predicate.clone(),
            object,
        }));
        truth
    }
}

pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<SyntheticData> {
    let root = Seed(spec.seed);
    let mut triples = Vec::new();
    let mut predicates = Vec::new();
    match spec.kind {
        SyntheticKind::PlantedBlocks { subjects, objects, blocks, p_within, p_across } => {
            check_blocks(subjects, objects, blocks)?;
            check_prob("p_within", p_within)?;
            check_prob("p_across", p_across)?;
            let mut rng = root.child("planted").rng();
            let mut b = Builder::new("planted");
            for s in 0..subjects {
                for o in 0..objects {
                    let same = block_of(s, subjects, blocks) == block_of(o, objects, blocks);
                    let p = if same { p_within } else { p_across };
                    if rng.random::<f64>() < p {
                        b.add(format!("s{s:05}"), format!("o{o:05}"));
                    }
                }
            }
            let detail = json!({
                "block_rule": "block(i) = i * blocks / count over label index",
                "blocks": blocks,
                "p_within": p_within,
                "p_across": p_across,
            });
            predicates.push(b.finish(&mut triples, detail));
        }
        SyntheticKind::PopularitySkew { subjects, objects, mean_degree, zipf_exponent } => {
            if subjects == 0 || objects < 2 || mean_degree < 2 {
                return Err(invalid("popularity-skew needs subjects >= 1, objects >= 2, mean_degree >= 2"));
            }
            if zipf_exponent.is_nan() || zipf_exponent <= 0.0 {
                return Err(invalid("zipf_exponent must be positive"));
            }
            let zipf = Zipf::new(objects as f64, zipf_exponent).map_err(|e| invalid(e.to_string()))?;
            let mut rng = root.child("popular").rng();
            let mut b = Builder::new("popular");
            for s in 0..subjects {
                let degree = (2 + rng.random_range(0..=2 * (mean_degree - 2))).min(objects);
                let mut linked = HashSet::new();
                while linked.len() < degree {
                    let rank = zipf.sample(&mut rng) as usize;
                    linked.insert(rank - 1);
                }
                let mut linked: Vec<usize> = linked.into_iter().collect();
                linked.sort_unstable();
                for o in linked {
                    b.add(format!("s{s:05}"), format!("o{o:05}"));
                }
            }
            let detail = json!({ "popularity_rule": "object o has Zipf rank o + 1", "zipf_exponent": zipf_exponent });
            predicates.push(b.finish(&mut triples, detail));
        }
        SyntheticKind::DensitySweep { predicates: k, subjects, objects, blocks, p_min, p_max } => {
            check_blocks(subjects, objects, blocks)?;
            check_prob("p_min", p_min)?;
            check_prob("p_max", p_max)?;
            if k < 2 || p_min.is_nan() || p_max.is_nan() || p_min >= p_max {
                return Err(invalid("density-sweep needs at least 2 predicates and p_min < p_max"));
            }
            let mut rng = root.child("density-sweep").rng();
            let draws: Vec<f64> = (0..subjects * objects).map(|_| rng.random()).collect();
            let anchors = block_anchors(subjects, objects, blocks);
            let mut last_edges = 0;
            for i in 0..k {
                let p = p_min + (p_max - p_min) * i as f64 / (k - 1) as f64;
                let name = format!("density_{:02}", i + 1);
                let mut b = Builder::new(&name);
                for &(s, o) in &anchors {
                    b.add(format!("s{s:05}"), format!("o{o:05}"));
                }
                for s in 0..subjects {
                    for o in 0..objects {
                        if block_of(s, subjects, blocks) == block_of(o, objects, blocks) && draws[s * objects + o] < p {
                            b.add(format!("s{s:05}"), format!("o{o:05}"));
                        }
                    }
                }
                if i > 0 && b.pairs.len() <= last_edges {
                    return Err(invalid(format!("density did not increase at {name}; widen p_min..p_max")));
                }
                last_edges = b.pairs.len();
                predicates.push(b.finish(&mut triples, json!({ "p_within": p, "blocks": blocks })));
            }
        }
        SyntheticKind::OverlapSweep { predicates: k, subjects, objects, blocks, p_within, max_overlap } => {
            check_blocks(subjects, objects, blocks)?;
            check_prob("p_within", p_within)?;
            if k < 2 || !(0.0..1.0).contains(&max_overlap) {
                return Err(invalid("overlap-sweep needs at least 2 predicates and max_overlap in [0, 1)"));
            }
            for i in 0..k {
                let name = format!("overlap_{:02}", i + 1);
                let fraction = max_overlap * i as f64 / (k - 1) as f64;
                let mut rng = root.child(&name).rng();
                let truth =
                    overlap_predicate(&name, subjects, objects, blocks, p_within, fraction, &mut rng, &mut triples)?;
                predicates.push(truth);
            }
        }
        SyntheticKind::RelationCorpus => {
            for &(name, m, n, e, shared) in &CORPUS_RELATIONS {
                let mut rng = root.child(name).rng();
                predicates.push(exact_predicate(name, m, n, e, shared, &mut rng, &mut triples)?);
            }
        }
    }
    Ok(SyntheticData { triples, spec: spec.clone(), predicates })
}

/// One edge per subject and per object inside its own block.
fn block_anchors(subjects: usize, objects: usize, blocks: usize) -> Vec<(usize, usize)> {
    let start = |b: usize, count: usize| (b * count).div_ceil(blocks);
    let size = |b: usize, count: usize| start(b + 1, count) - start(b, count);
    let mut anchors = Vec::with_capacity(subjects + objects);
    for s in 0..subjects {
        let b = block_of(s, subjects, blocks);
        anchors.push((s, start(b, objects) + (s - start(b, subjects)) % size(b, objects)));
    }
    for o in 0..objects {
        let b = block_of(o, objects, blocks);
        anchors.push((start(b, subjects) + (o - start(b, objects)) % size(b, subjects), o));
    }
    anchors
}

#[allow(clippy::too_many_arguments)]
fn overlap_predicate(
    name: &str,
    subjects: usize,
    objects: usize,
    blocks: usize,
    p_within: f64,
    fraction: f64,
    rng: &mut ChaCha8Rng,
    triples: &mut Vec<Triple>,
) -> Result<PredicateTruth> {
    let pool = (fraction * subjects as f64).round() as usize;
    let block_subjects = subjects - pool;
    if block_subjects < blocks {
        return Err(invalid(format!("{name}: overlap leaves fewer block subjects than blocks")));
    }
    let mut b = Builder::new(name);
    for s in 0..block_subjects {
        for o in 0..objects {
            if block_of(s, block_subjects, blocks) == block_of(o, objects, blocks) && rng.random::<f64>() < p_within {
                b.add(format!("s{s:05}"), format!("o{o:05}"));
            }
        }
    }
    // a pool node closes as many triangles as the mean block out-degree
    let mean_degree = p_within * objects as f64 / blocks as f64;
    let triangles = if pool >= 3 { (mean_degree * pool as f64 / 3.0).round() as usize } else { 0 };
    let mut nodes: Vec<usize> = (0..pool).collect();
    for _ in 0..triangles {
        let (picked, _) = nodes.partial_shuffle(rng, 3);
        let (x, y, z) = (picked[0], picked[1], picked[2]);
        let label = |v: usize| format!("e{v:05}");
        b.add(label(x), label(y));
        b.add(label(y), label(z));
        b.add(label(z), label(x));
    }
    let detail = json!({
        "overlap_fraction": fraction,
        "shared_pool": pool,
        "triangles": triangles,
        "p_within": p_within,
        "blocks": blocks,
    });
    Ok(b.finish(triples, detail))
}

/// A relation with exactly `m` subjects, `n` objects and `edges` facts:
/// a random covering matching first, then uniformly random extra pairs.
fn exact_predicate(
    name: &str,
    m: usize,
    n: usize,
    edges: usize,
    shared: bool,
    rng: &mut ChaCha8Rng,
    triples: &mut Vec<Triple>,
) -> Result<PredicateTruth> {
    if edges < m.max(n) || edges > m * n {
        return Err(invalid(format!("{name}: {edges} edges cannot cover {m} subjects and {n} objects")));
    }
    // shared namespaces overlap on half the subject range
    let offset = if shared { m / 2 } else { 0 };
    let subject_label = |i: usize| if shared { format!("{name}_e{i}") } else { format!("{name}_s{i}") };
    let object_label = |j: usize| if shared { format!("{name}_e{}", j + offset) } else { format!("{name}_o{j}") };
    let mut ps: Vec<usize> = (0..m).collect();
    let mut po: Vec<usize> = (0..n).collect();
    ps.shuffle(rng);
    po.shuffle(rng);
    let mut seen: HashSet<(usize, usize)> = HashSet::with_capacity(edges);
    let mut pairs = Vec::with_capacity(edges);
    for i in 0..m.max(n) {
        let pair = (ps[i % m], po[i % n]);
        seen.insert(pair);
        pairs.push(pair);
    }
    while pairs.len() < edges {
        let pair = (rng.random_range(0..m), rng.random_range(0..n));
        if seen.insert(pair) {
            pairs.push(pair);
        }
    }
    let mut b = Builder::new(name);
    for (s, o) in pairs {
        b.add(subject_label(s), object_label(o));
    }
    Ok(b.finish(triples, json!({ "shared_namespace": shared })))
}
