use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use log::{info, warn};
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use super::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::eval::{evaluate, make_split, write_eval_csv, EvalReport, Method};
use crate::kg::{extract_bipartite, parse_triples, KnowledgeGraph, ParseReport, SubgraphStats, TripleFormat};
use crate::seed::Seed;
use crate::topology::{topology_grid, write_regression_csv, write_scatter_csv, write_topology_csv, TopologyProfile};

/// CSV artifacts whose bytes depend only on input, config and seed.
pub const ARTIFACT_FILES: [&str; 3] = ["eval.csv", "topology.csv", "regression.csv"];

const SEED_DERIVATION: &str = "predicate = root.child(label); split(r) = predicate.index(r).child(\"split\"); \
     cell(r, method) = predicate.index(r).child(method); samples = cell.child(\"samples\"); \
     monitor = cell.child(\"monitor\"); init = cell";

pub fn predicate_seed(root: u64, predicate: &str) -> u64 {
    Seed(root).child(predicate).0
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Success,
    Partial,
    Failed,
}

impl RunStatus {
    /// 0 success, 1 total failure, 3 partial failure. (2 is reserved for invalid config.)
    pub fn exit_code(self) -> i32 {
        match self {
            RunStatus::Success => 0,
            RunStatus::Failed => 1,
            RunStatus::Partial => 3,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct MethodTiming {
    pub method: Method,
    pub wall_seconds: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct PredicateOutcome {
    pub predicate: String,
    pub seed: u64,
    pub stats: Option<SubgraphStats>,
    pub ineligible_subjects: Option<usize>,
    pub error: Option<String>,
    pub timings: Vec<MethodTiming>,
    #[serde(skip)]
    pub profile: Option<TopologyProfile>,
    #[serde(skip)]
    pub reports: Vec<EvalReport>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub status: RunStatus,
    pub seed: u64,
    pub seed_derivation: &'static str,
    pub config_sha256: String,
    pub input_path: String,
    pub input_sha256: String,
    pub workers: usize,
    pub parse: ParseReport,
    pub predicates: Vec<PredicateOutcome>,
    pub regression_methods: Vec<Method>,
    pub regression_failures: Vec<String>,
    pub wall_seconds: f64,
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub status: RunStatus,
    pub manifest: Manifest,
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn run_predicate(kg: &KnowledgeGraph, predicate: &str, cfg: &ExperimentConfig) -> PredicateOutcome {
    let seed = predicate_seed(cfg.seed, predicate);
    let mut outcome = PredicateOutcome {
        predicate: predicate.to_owned(),
        seed,
        stats: None,
        ineligible_subjects: None,
        error: None,
        timings: Vec::new(),
        profile: None,
        reports: Vec::new(),
    };
    let result = (|| -> Result<()> {
        let g = extract_bipartite(kg, predicate)?;
        outcome.stats = Some(g.stats());
        outcome.profile = Some(TopologyProfile::compute(&g)?);
        let split = make_split(&g, cfg.repeat_count, seed)?;
        outcome.ineligible_subjects = Some(split.ineligible_subjects);
        for &method in &cfg.methods {
            let start = Instant::now();
            let report = evaluate(method, &g, &split, &cfg.params(method).with_seed(seed))?;
            let wall_seconds = start.elapsed().as_secs_f64();
            info!("{predicate}/{method}: AUC {:.4} in {wall_seconds:.1}s", report.auc);
            outcome.timings.push(MethodTiming { method, wall_seconds });
            outcome.reports.push(report);
        }
        Ok(())
    })();
    if let Err(e) = result {
        warn!("predicate `{predicate}` failed: {e}");
        outcome.error = Some(e.to_string());
        outcome.reports.clear();
    }
    outcome
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

/// Runs split, train and evaluate for every (predicate, method) and writes
/// the artifacts into `cfg.output_dir`:
///
/// - `eval.csv`: one row per (predicate, method, repeat) plus a `mean` row;
/// - `topology.csv`: density, average degree and clustering coefficient;
/// - `regression.csv`: the 3x3 topology-vs-performance fits for the headline
///   method (`bpr` when present, else the first method), and
///   `regression_<method>.csv` for every method;
/// - `scatter/<method>/<x_metric>__<y_metric>.csv`: the points behind each fit;
/// - `config.resolved.toml` and `manifest.json`.
///
/// Failing predicates are recorded in the manifest and skipped.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    cfg.validate()?;
    let started = Instant::now();
    let bytes = fs::read(&cfg.input_path)?;
    let (kg, parse) = parse_triples(bytes.as_slice(), TripleFormat::Tsv)?;
    info!(
        "parsed {} triples ({} duplicates, {} malformed lines) from {}",
        kg.len(),
        parse.duplicates,
        parse.malformed.len(),
        cfg.input_path.display()
    );
    let predicates = cfg.predicates.resolve(kg.predicates());
    if predicates.is_empty() {
        return Err(Error::InvalidConfig(format!("{} contains no predicates", cfg.input_path.display())));
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("cannot start {} workers: {e}", cfg.workers)))?;
    let outcomes: Vec<PredicateOutcome> =
        pool.install(|| predicates.par_iter().map(|p| run_predicate(&kg, p, cfg)).collect());

    fs::create_dir_all(&cfg.output_dir)?;
    let out = &cfg.output_dir;

    let ok: Vec<&PredicateOutcome> = outcomes.iter().filter(|o| o.error.is_none()).collect();
    let reports: Vec<EvalReport> = ok.iter().flat_map(|o| o.reports.iter().cloned()).collect();
    let profiles: Vec<TopologyProfile> = ok.iter().filter_map(|o| o.profile.clone()).collect();

    let mut w = create(&out.join("eval.csv"))?;
    write_eval_csv(&reports, &mut w)?;
    w.flush()?;
    let mut w = create(&out.join("topology.csv"))?;
    write_topology_csv(&profiles, &mut w)?;
    w.flush()?;

    let headline = if cfg.methods.contains(&Method::Bpr) { Method::Bpr } else { cfg.methods[0] };
    let mut regression_failures = Vec::new();
    for &method in &cfg.methods {
        let method_reports: Vec<EvalReport> = reports.iter().filter(|r| r.method == method).cloned().collect();
        let cells = topology_grid(&profiles, &method_reports)?;
        for c in &cells {
            if let Err(e) = &c.fit {
                regression_failures.push(format!("{method}: {} vs {}: {e}", c.x_metric, c.y_metric));
            }
        }
        let mut names = vec![format!("regression_{method}.csv")];
        if method == headline {
            names.push("regression.csv".into());
        }
        for name in names {
            let mut w = create(&out.join(name))?;
            write_regression_csv(&cells, &mut w)?;
            w.flush()?;
        }
        let dir = out.join("scatter").join(method.as_str());
        fs::create_dir_all(&dir)?;
        for c in &cells {
            let mut w = create(&dir.join(format!("{}__{}.csv", c.x_metric, c.y_metric)))?;
            write_scatter_csv(c, &mut w)?;
            w.flush()?;
        }
    }

    let config_toml = cfg.to_toml()?;
    fs::write(out.join("config.resolved.toml"), &config_toml)?;

    let status = match ok.len() {
        0 => RunStatus::Failed,
        n if n == outcomes.len() => RunStatus::Success,
        _ => RunStatus::Partial,
    };
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        status,
        seed: cfg.seed,
        seed_derivation: SEED_DERIVATION,
        config_sha256: sha256_hex(config_toml.as_bytes()),
        input_path: cfg.input_path.display().to_string(),
        input_sha256: sha256_hex(&bytes),
        workers: pool.current_num_threads(),
        parse,
        predicates: outcomes,
        regression_methods: cfg.methods.clone(),
        regression_failures,
        wall_seconds: started.elapsed().as_secs_f64(),
    };
    let mut w = create(&out.join("manifest.json"))?;
    serde_json::to_writer_pretty(&mut w, &manifest)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(RunOutcome { status, manifest })
}
