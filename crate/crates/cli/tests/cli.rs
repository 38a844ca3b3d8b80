use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn kglink(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kglink"))
        .current_dir(dir)
        .env_remove("KGLINK_WORKERS")
        .env_remove("RUST_LOG")
        .args(args)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

const FAST: [&str; 6] = ["--repeat-count", "2", "--epochs", "3", "--factors", "4"];

fn sweep(dir: &Path) {
    let o = kglink(dir, &["synth", "density-sweep", "--seed", "1", "--output", "sweep.tsv"]);
    assert!(o.status.success(), "{o:?}");
    assert!(dir.join("sweep.tsv.truth.json").is_file());
}

#[test]
fn ingest_lists_predicates() {
    let dir = tempfile::tempdir().unwrap();
    sweep(dir.path());
    let o = kglink(dir.path(), &["ingest", "sweep.tsv", "--predicate", "density_02", "--output", "d2.tsv"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert_eq!(text.lines().filter(|l| l.starts_with("density_")).count(), 8);
    assert!(!fs::read_to_string(dir.path().join("d2.tsv")).unwrap().is_empty());
}

#[test]
fn run_then_report() {
    let dir = tempfile::tempdir().unwrap();
    sweep(dir.path());
    let mut args = vec!["run", "--input", "sweep.tsv", "--output-dir", "out", "--seed", "9"];
    args.extend(FAST);
    let o = kglink(dir.path(), &args);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["eval.csv", "topology.csv", "regression.csv", "config.resolved.toml", "manifest.json"] {
        assert!(dir.path().join("out").join(f).is_file(), "{f}");
    }
    let o = kglink(dir.path(), &["report", "out"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("density_08"));

    // a single predicate re-evaluated alone reproduces the run's rows
    let mut args =
        vec!["evaluate", "--input", "sweep.tsv", "--predicate", "density_04", "--seed", "9", "--output", "one.csv"];
    args.extend(FAST);
    assert!(kglink(dir.path(), &args).status.success());
    let alone = fs::read_to_string(dir.path().join("one.csv")).unwrap();
    let full = fs::read_to_string(dir.path().join("out/eval.csv")).unwrap();
    let rows: Vec<&str> = full.lines().filter(|l| l.starts_with("density_04,")).collect();
    assert_eq!(alone.lines().skip(1).collect::<Vec<_>>(), rows);
}

#[test]
fn config_file_and_env_workers() {
    let dir = tempfile::tempdir().unwrap();
    sweep(dir.path());
    fs::write(
        dir.path().join("exp.toml"),
        "input_path = \"sweep.tsv\"\noutput_dir = \"cfg_out\"\npredicates = [\"density_01\", \"density_05\"]\nmethods = [\"mp\", \"random\"]\nrepeat_count = 2\n",
    )
    .unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_kglink"))
        .current_dir(dir.path())
        .env("KGLINK_WORKERS", "2")
        .args(["run", "--config", "exp.toml", "--seed", "4"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let resolved = fs::read_to_string(dir.path().join("cfg_out/config.resolved.toml")).unwrap();
    assert!(resolved.contains("seed = 4") && resolved.contains("workers = 2"));
    let eval = fs::read_to_string(dir.path().join("cfg_out/eval.csv")).unwrap();
    assert!(eval.lines().skip(1).all(|l| l.contains(",mp,") || l.contains(",random,")));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    sweep(dir.path());
    let run = |extra: &[&str]| {
        let mut args = vec!["run", "--input", "sweep.tsv"];
        args.extend(extra);
        args.extend(FAST);
        kglink(dir.path(), &args).status.code()
    };
    assert_eq!(run(&["--output-dir", "a", "--methods", "bpr,svd"]), Some(2));
    assert_eq!(run(&["--output-dir", "b", "--predicates", "density_01,absent"]), Some(3));
    assert_eq!(run(&["--output-dir", "c", "--predicates", "absent"]), Some(1));
    assert_eq!(run(&["--output-dir", "d", "--learning-rate", "-0.1"]), Some(2));
    assert_eq!(kglink(dir.path(), &["report", "nowhere"]).status.code(), Some(1));
    assert_eq!(kglink(dir.path(), &["synth", "no-such-generator", "--output", "x.tsv"]).status.code(), Some(2));
}

#[test]
fn train_writes_loadable_model() {
    let dir = tempfile::tempdir().unwrap();
    sweep(dir.path());
    let o = kglink(
        dir.path(),
        &[
            "train",
            "--input",
            "sweep.tsv",
            "--predicate",
            "density_03",
            "--method",
            "mf",
            "--factors",
            "5",
            "--epochs",
            "2",
            "--output",
            "m.txt",
        ],
    );
    assert!(o.status.success(), "{o:?}");
    let file = fs::File::open(dir.path().join("m.txt")).unwrap();
    let model = kglink::model::EmbeddingModel::read_from(std::io::BufReader::new(file)).unwrap();
    assert_eq!((model.m(), model.n(), model.factors()), (200, 100, 5));
    let o = kglink(
        dir.path(),
        &["train", "--input", "sweep.tsv", "--predicate", "density_03", "--method", "mp", "--output", "x.txt"],
    );
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn analyze_with_evaluation() {
    let dir = tempfile::tempdir().unwrap();
    sweep(dir.path());
    let mut args = vec!["run", "--input", "sweep.tsv", "--output-dir", "out", "--methods", "mp"];
    args.extend(FAST);
    assert!(kglink(dir.path(), &args).status.success());
    let o = kglink(dir.path(), &["analyze", "--input", "sweep.tsv", "--eval", "out/eval.csv", "--output-dir", "an"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(
        fs::read(dir.path().join("an/topology.csv")).unwrap(),
        fs::read(dir.path().join("out/topology.csv")).unwrap()
    );
    assert_eq!(
        fs::read(dir.path().join("an/regression_mp.csv")).unwrap(),
        fs::read(dir.path().join("out/regression_mp.csv")).unwrap()
    );
}
