use std::collections::BTreeSet;
use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use log::info;

use kglink::baselines::pointwise_mf_train;
use kglink::bpr::train;
use kglink::eval::{evaluate, make_split, read_eval_csv, reports_from_rows, write_eval_csv, Method};
use kglink::kg::{parse_triples, KnowledgeGraph, TripleFormat};
use kglink::pipeline::{
    predicate_seed, report_summary, run_experiment, ConfigFile, ConfigOverrides, ExperimentConfig, MethodParams,
    MethodParamsPatch, PredicateSelection, WORKERS_ENV,
};
use kglink::synth::{generate_synthetic, SyntheticKind, SyntheticSpec};
use kglink::topology::{topology_grid, write_regression_csv, write_topology_csv, TopologyProfile};
use kglink::{extract_bipartite, Error};

/// `println!` that returns the io error instead of panicking on a closed pipe.
macro_rules! outln {
    ($($t:tt)*) => { writeln!(io::stdout().lock(), $($t)*)? };
}

macro_rules! outw {
    ($($t:tt)*) => { write!(io::stdout().lock(), $($t)*)? };
}

const EXIT_FAILURE: u8 = 1;
const EXIT_INVALID_CONFIG: u8 = 2;

#[derive(Parser)]
#[command(name = "kglink", version, about = "Link recommendation on knowledge-graph predicates")]
struct Cli {
    /// More log output (-v info, -vv debug). RUST_LOG overrides.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a triple file and print per-predicate sizes.
    Ingest(IngestArgs),
    /// Train a latent factor model on one predicate and write it out.
    Train(TrainArgs),
    /// Leave-one-out evaluation of one predicate.
    Evaluate(EvaluateArgs),
    /// Topology profiles, and regressions against an evaluation CSV.
    Analyze(AnalyzeArgs),
    /// Full pipeline over every selected predicate and method.
    Run(RunArgs),
    /// Generate a synthetic triple file and its ground-truth sidecar.
    Synth(SynthArgs),
    /// Print the summary tables of a finished run.
    Report(ReportArgs),
}

/// Hyperparameter flags shared by train, evaluate and run.
#[derive(Args, Clone, Default)]
struct HyperFlags {
    #[arg(long)]
    factors: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    learning_rate: Option<f64>,
    /// Sets all three regularisation weights.
    #[arg(long, allow_negative_numbers = true)]
    lambda: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    lambda_subject: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    lambda_positive: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    lambda_negative: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    top_n: Option<usize>,
}

impl HyperFlags {
    fn patch(&self) -> MethodParamsPatch {
        MethodParamsPatch {
            factors: self.factors,
            learning_rate: self.learning_rate,
            lambda: self.lambda,
            lambda_subject: self.lambda_subject,
            lambda_positive: self.lambda_positive,
            lambda_negative: self.lambda_negative,
            epochs: self.epochs,
            top_n: self.top_n,
        }
    }

    /// Defaults with these flags applied, validated.
    fn resolve(&self, method: Method, seed: u64) -> Result<kglink::HyperParams, Error> {
        let overrides = ConfigOverrides {
            input_path: Some(PathBuf::new()),
            output_dir: Some(PathBuf::new()),
            methods: Some(vec![method.to_string()]),
            workers: Some(1),
            hyperparams: self.patch(),
            ..Default::default()
        };
        let cfg = ExperimentConfig::resolve(ConfigFile::default(), overrides)?;
        let params: &MethodParams = cfg.params(method);
        Ok(params.with_seed(seed))
    }
}

#[derive(Args)]
struct IngestArgs {
    input: PathBuf,
    /// Write the (subject, object) pairs of this predicate as TSV.
    #[arg(long, requires = "output")]
    predicate: Option<String>,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    predicate: String,
    /// bpr or mf.
    #[arg(long, default_value = "bpr")]
    method: Method,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Model dump (text format, exact round trip).
    #[arg(long)]
    output: PathBuf,
    #[command(flatten)]
    hyper: HyperFlags,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    predicate: String,
    /// Comma-separated subset of bpr, mf, mp, random.
    #[arg(long, value_delimiter = ',', default_value = "bpr,mf,mp,random")]
    methods: Vec<Method>,
    #[arg(long, default_value_t = kglink::eval::DEFAULT_REPEATS)]
    repeat_count: usize,
    /// Root seed; the predicate seed derives from it as in `run`.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Evaluation CSV; stdout when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
    #[command(flatten)]
    hyper: HyperFlags,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long)]
    input: PathBuf,
    /// `all` or a comma-separated list.
    #[arg(long, default_value = "all")]
    predicates: String,
    /// Evaluation CSV from `evaluate` or `run`; enables regressions.
    #[arg(long)]
    eval: Option<PathBuf>,
    #[arg(long)]
    output_dir: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    /// TOML config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    input: Option<PathBuf>,
    /// `all` or a comma-separated list.
    #[arg(long)]
    predicates: Option<String>,
    /// Comma-separated subset of bpr, mf, mp, random.
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<String>>,
    #[arg(long)]
    repeat_count: Option<usize>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (0 = one per core).
    #[arg(long, env = WORKERS_ENV)]
    workers: Option<usize>,
    #[command(flatten)]
    hyper: HyperFlags,
}

#[derive(Args)]
struct SynthArgs {
    /// planted-blocks, popularity-skew, density-sweep, overlap-sweep or relation-corpus.
    generator: Option<String>,
    /// TOML spec with a `kind` key and generator parameters; replaces GENERATOR.
    #[arg(long, conflicts_with = "generator")]
    spec: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    output_dir: PathBuf,
}

fn load_graph(path: &Path) -> Result<KnowledgeGraph> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let (kg, report) = parse_triples(BufReader::new(file), TripleFormat::Tsv)
        .with_context(|| format!("reading {}", path.display()))?;
    for bad in &report.malformed {
        log::warn!("{}:{}: {}", path.display(), bad.line, bad.reason);
    }
    info!("{} triples, {} duplicates, {} malformed", kg.len(), report.duplicates, report.malformed.len());
    Ok(kg)
}

fn ingest(args: IngestArgs) -> Result<u8> {
    let kg = load_graph(&args.input)?;
    outln!("{:<32} {:>9} {:>9} {:>9} {:>10}", "predicate", "subjects", "objects", "edges", "density");
    for pred in kg.predicates() {
        let g = extract_bipartite(&kg, pred)?;
        let s = g.stats();
        let density = s.edges as f64 / (s.subjects as f64 * s.objects as f64);
        outln!("{pred:<32} {:>9} {:>9} {:>9} {density:>10.6}", s.subjects, s.objects, s.edges);
    }
    if let (Some(pred), Some(out)) = (args.predicate, args.output) {
        let g = extract_bipartite(&kg, &pred)?;
        let mut w = BufWriter::new(File::create(&out)?);
        g.write_tsv(&mut w)?;
        w.flush()?;
        info!("wrote {}", out.display());
    }
    Ok(0)
}

fn train_cmd(args: TrainArgs) -> Result<u8> {
    let hp = args.hyper.resolve(args.method, args.seed)?;
    let kg = load_graph(&args.input)?;
    let g = extract_bipartite(&kg, &args.predicate)?;
    let (model, report) = match args.method {
        Method::Bpr => train(g.adjacency(), &hp)?,
        Method::Mf => pointwise_mf_train(g.adjacency(), &hp)?,
        other => anyhow::bail!("`{other}` has no trainable model; use bpr or mf"),
    };
    let mut w = BufWriter::new(File::create(&args.output)?);
    model.write_to(&mut w)?;
    w.flush()?;
    outln!(
        "{}: {} subjects x {} objects, {} samples, {} subjects skipped, final objective {:.6}",
        args.predicate,
        g.m(),
        g.n(),
        report.samples_processed,
        report.skipped_subjects,
        report.final_objective
    );
    Ok(0)
}

fn evaluate_cmd(args: EvaluateArgs) -> Result<u8> {
    if args.repeat_count == 0 {
        return Err(Error::InvalidConfig("repeat_count must be >= 1".into()).into());
    }
    let params: Vec<(Method, kglink::HyperParams)> =
        args.methods.iter().map(|&m| Ok((m, args.hyper.resolve(m, 0)?))).collect::<Result<_, Error>>()?;
    let kg = load_graph(&args.input)?;
    let g = extract_bipartite(&kg, &args.predicate)?;
    let seed = predicate_seed(args.seed, &args.predicate);
    let split = make_split(&g, args.repeat_count, seed)?;
    let mut reports = Vec::new();
    for (method, hp) in params {
        let report = evaluate(method, &g, &split, &kglink::HyperParams { seed, ..hp })?;
        eprintln!("{method:<8} HR {:.4}  ARHR {:.4}  AUC {:.4}", report.hr, report.arhr, report.auc);
        reports.push(report);
    }
    match args.output {
        Some(path) => {
            let mut w = BufWriter::new(File::create(&path)?);
            write_eval_csv(&reports, &mut w)?;
            w.flush()?;
        }
        None => write_eval_csv(&reports, io::stdout().lock())?,
    }
    Ok(0)
}

fn analyze(args: AnalyzeArgs) -> Result<u8> {
    let kg = load_graph(&args.input)?;
    let predicates = PredicateSelection::parse(&args.predicates).resolve(kg.predicates());
    let profiles = predicates
        .iter()
        .map(|p| TopologyProfile::compute(&extract_bipartite(&kg, p)?))
        .collect::<Result<Vec<_>, Error>>()?;
    fs::create_dir_all(&args.output_dir)?;
    let mut w = BufWriter::new(File::create(args.output_dir.join("topology.csv"))?);
    write_topology_csv(&profiles, &mut w)?;
    w.flush()?;
    for p in &profiles {
        outln!(
            "{:<32} density {:.6}  avg degree {:.4}  clustering {:.6}",
            p.predicate,
            p.density,
            p.average_degree,
            p.clustering_coefficient
        );
    }
    if let Some(eval) = args.eval {
        let rows = read_eval_csv(File::open(&eval).with_context(|| format!("opening {}", eval.display()))?)?;
        let reports = reports_from_rows(&rows)?;
        let methods: BTreeSet<Method> = reports.iter().map(|r| r.method).collect();
        for method in methods {
            let subset: Vec<_> = reports.iter().filter(|r| r.method == method).cloned().collect();
            let cells = topology_grid(&profiles, &subset)?;
            let path = args.output_dir.join(format!("regression_{method}.csv"));
            let mut w = BufWriter::new(File::create(&path)?);
            write_regression_csv(&cells, &mut w)?;
            w.flush()?;
            for c in &cells {
                match &c.fit {
                    Ok(f) => outln!("{method:<8} {:<24} {:<5} rvalue {:+.4}", c.x_metric, c.y_metric, f.rvalue),
                    Err(e) => outln!("{method:<8} {:<24} {:<5} no fit: {e}", c.x_metric, c.y_metric),
                }
            }
        }
    }
    Ok(0)
}

fn run_cmd(args: RunArgs) -> Result<u8> {
    let file = match &args.config {
        Some(path) => ConfigFile::load(path).with_context(|| format!("loading {}", path.display()))?,
        None => ConfigFile::default(),
    };
    let overrides = ConfigOverrides {
        input_path: args.input,
        predicates: args.predicates.as_deref().map(PredicateSelection::parse),
        methods: args.methods,
        repeat_count: args.repeat_count,
        output_dir: args.output_dir,
        seed: args.seed,
        workers: args.workers,
        hyperparams: args.hyper.patch(),
    };
    let cfg = ExperimentConfig::resolve(file, overrides)?;
    let outcome = run_experiment(&cfg)?;
    outln!("{}", report_summary(&cfg.output_dir)?.render());
    outln!("status: {:?}; artifacts in {}", outcome.status, cfg.output_dir.display());
    Ok(outcome.status.exit_code() as u8)
}

fn synth(args: SynthArgs) -> Result<u8> {
    let spec = match (&args.spec, &args.generator) {
        (Some(path), _) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let invalid = |e: toml::de::Error| Error::InvalidSynthetic(format!("{}: {e}", path.display()));
            let mut table: toml::Table = toml::from_str(&text).map_err(invalid)?;
            table.entry("seed").or_insert(toml::Value::Integer(args.seed as i64));
            table.try_into().map_err(invalid)?
        }
        (None, Some(name)) => SyntheticSpec { kind: SyntheticKind::by_name(name)?, seed: args.seed },
        (None, None) => anyhow::bail!(Error::InvalidSynthetic("give a generator name or --spec".into())),
    };
    let data = generate_synthetic(&spec)?;
    let sidecar = data.write_files(&args.output)?;
    for p in &data.predicates {
        outln!("{:<24} {:>7} subjects {:>7} objects {:>8} edges", p.predicate, p.subjects, p.objects, p.edges);
    }
    outln!("wrote {} and {}", args.output.display(), sidecar.display());
    Ok(0)
}

fn report(args: ReportArgs) -> Result<u8> {
    outw!("{}", report_summary(&args.output_dir)?.render());
    Ok(0)
}

fn exit_code_for(err: &anyhow::Error) -> u8 {
    let invalid = err.chain().any(|e| {
        matches!(
            e.downcast_ref::<Error>(),
            Some(
                Error::InvalidConfig(_) | Error::InvalidHyperParams(_) | Error::InvalidSynthetic(_) | Error::TomlDe(_)
            )
        ) || e.downcast_ref::<toml::de::Error>().is_some()
    });
    if invalid {
        EXIT_INVALID_CONFIG
    } else {
        EXIT_FAILURE
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let result = match cli.command {
        Command::Ingest(a) => ingest(a),
        Command::Train(a) => train_cmd(a),
        Command::Evaluate(a) => evaluate_cmd(a),
        Command::Analyze(a) => analyze(a),
        Command::Run(a) => run_cmd(a),
        Command::Synth(a) => synth(a),
        Command::Report(a) => report(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
