use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_topicpref"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn topicpref")
}

fn run_ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn demo_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/demo")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn no_arguments_prints_usage_and_exits_2() {
    let out = run(&[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("Usage"));
}

#[test]
fn unknown_subcommand_or_flag_exits_2() {
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(run(&["train", "--bogus"]).status.code(), Some(2));
}

#[test]
fn train_with_missing_matrix_dir_names_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("no-such-matrix");
    let out = run(&[
        "train",
        "--matrix",
        s(&missing),
        "--out",
        s(&dir.path().join("m.bin")),
    ]);
    assert_eq!(out.status.code(), Some(1));
    let err = stderr(&out);
    assert_eq!(err.lines().count(), 1, "{err}");
    assert!(err.starts_with("error\tstage=train\t"), "{err}");
    assert!(err.contains(s(&missing)), "{err}");
}

#[test]
fn bad_pattern_file_is_a_patterns_stage_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.tsv");
    fs::write(&path, "pro\tI support {A}.\ncon\tno slot here\n").unwrap();
    let out = run(&["patterns", "load", "--check", s(&path)]);
    assert_eq!(out.status.code(), Some(1));
    let err = stderr(&out);
    assert!(
        err.starts_with("error\tstage=patterns\t") && err.contains(":2:"),
        "{err}"
    );
}

#[test]
fn bundled_patterns_check() {
    let out = run_ok(&[
        "patterns",
        "load",
        "--check",
        s(&demo_dir().join("curated.tsv")),
    ]);
    assert_eq!(out, "pro\t3\ncon\t3\n");
}

const PIPELINE_ARTIFACTS: &[&str] = &[
    "corpus_stats.tsv",
    "candidates.tsv",
    "topics.txt",
    "matrix/instances.tsv",
    "matrix/matrix.tsv",
    "matrix/users.tsv",
    "matrix/topics.tsv",
    "model.bin",
    "trace.tsv",
    "holdout.tsv",
];

#[test]
fn demo_pipeline_writes_all_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = demo_dir().join("demo.cfg");
    let stdout = run_ok(&["pipeline", "--config", s(&cfg), "--out", s(dir.path())]);
    for name in PIPELINE_ARTIFACTS {
        let path = dir.path().join(name);
        assert!(
            fs::metadata(&path).map(|m| m.len() > 0).unwrap_or(false),
            "{name} missing or empty"
        );
    }
    let summary = stdout.lines().last().unwrap();
    assert!(summary.starts_with("summary\t"), "{stdout}");
    let holdout = fs::read_to_string(dir.path().join("holdout.tsv")).unwrap();
    assert!(holdout.starts_with("theta\tmodel_accuracy\t"));
}

#[test]
fn pipeline_is_byte_reproducible_and_flags_override() {
    let cfg = demo_dir().join("demo.cfg");
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let c = tempfile::tempdir().unwrap();
    run_ok(&["pipeline", "--config", s(&cfg), "--out", s(a.path())]);
    run_ok(&["pipeline", "--config", s(&cfg), "--out", s(b.path())]);
    run_ok(&[
        "pipeline",
        "--config",
        s(&cfg),
        "--out",
        s(c.path()),
        "--seed",
        "2",
    ]);
    for name in PIPELINE_ARTIFACTS {
        assert_eq!(
            fs::read(a.path().join(name)).unwrap(),
            fs::read(b.path().join(name)).unwrap(),
            "{name} differs between identical runs"
        );
    }
    assert_ne!(
        fs::read(a.path().join("model.bin")).unwrap(),
        fs::read(c.path().join("model.bin")).unwrap()
    );
}

#[test]
fn pipeline_validates_inputs_before_running() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("x.cfg");
    fs::write(
        &cfg,
        "corpus = nowhere.tsv\npatterns = p.tsv\nrules = r.tsv\nout = out\n",
    )
    .unwrap();
    let out = run(&["pipeline", "--config", s(&cfg)]);
    assert_eq!(out.status.code(), Some(1));
    let err = stderr(&out);
    assert!(
        err.starts_with("error\tstage=config\t") && err.contains("nowhere.tsv"),
        "{err}"
    );
    assert!(!dir.path().join("out").exists());
}

/// Runs synth, harvest, extract and train in `dir`; returns the paths used.
fn chain(dir: &Path, seed: &str) -> (PathBuf, PathBuf) {
    let corpus = dir.join("corpus.tsv");
    let rules = dir.join("rules.tsv");
    let curated = dir.join("curated.tsv");
    let topics = dir.join("topics.txt");
    let matrix = dir.join("matrix");
    let model = dir.join("model.bin");
    run_ok(&[
        "corpus",
        "synth",
        "--users",
        "60",
        "--topics",
        "12",
        "--rank",
        "2",
        "--density",
        "0.4",
        "--seed",
        seed,
        "--out",
        s(&corpus),
        "--truth-out",
        s(&dir.join("truth.tsv")),
        "--rules-out",
        s(&rules),
        "--patterns-out",
        s(&curated),
    ]);
    run_ok(&[
        "patterns",
        "harvest",
        "--corpus",
        s(&corpus),
        "--rules",
        s(&rules),
        "--out",
        s(&dir.join("candidates.tsv")),
        "--topics-out",
        s(&topics),
    ]);
    run_ok(&[
        "extract",
        "--corpus",
        s(&corpus),
        "--patterns",
        s(&curated),
        "--topics",
        s(&topics),
        "--min-count",
        "1",
        "--out",
        s(&matrix),
    ]);
    run_ok(&[
        "train",
        "--matrix",
        s(&matrix),
        "--k",
        "4",
        "--epochs",
        "30",
        "--seed",
        seed,
        "--out",
        s(&model),
        "--trace",
        s(&dir.join("trace.tsv")),
    ]);
    (matrix, model)
}

#[test]
fn seeded_stage_commands_are_byte_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let (ma, mod_a) = chain(a.path(), "5");
    let (_, mod_b) = chain(b.path(), "5");
    for name in [
        "corpus.tsv",
        "truth.tsv",
        "candidates.tsv",
        "topics.txt",
        "matrix/matrix.tsv",
        "matrix/instances.tsv",
        "model.bin",
        "trace.tsv",
    ] {
        assert_eq!(
            fs::read(a.path().join(name)).unwrap(),
            fs::read(b.path().join(name)).unwrap(),
            "{name}"
        );
    }
    let holdout = |m: &Path, out: &Path| {
        run_ok(&[
            "eval",
            "holdout",
            "--matrix",
            s(m),
            "--fraction",
            "0.1",
            "--k",
            "4",
            "--epochs",
            "20",
            "--seed",
            "3",
            "--thetas",
            "0,2",
            "--out",
            s(out),
        ])
    };
    let h1 = holdout(&ma, &a.path().join("h1.tsv"));
    let h2 = holdout(&ma, &a.path().join("h2.tsv"));
    assert_eq!(h1, h2);
    assert_eq!(
        fs::read(a.path().join("h1.tsv")).unwrap(),
        fs::read(a.path().join("h2.tsv")).unwrap()
    );
    let pairs = |m: &Path| {
        run_ok(&[
            "topics",
            "pairs",
            "--model",
            s(m),
            "--bands",
            "-1:0,0:1",
            "--per-band",
            "5",
            "--seed",
            "9",
            "--tsv",
        ])
    };
    assert_eq!(pairs(&mod_a), pairs(&mod_b));
}

#[test]
fn query_commands_on_a_trained_model() {
    let dir = tempfile::tempdir().unwrap();
    let (matrix, model) = chain(dir.path(), "1");

    let rmse = run_ok(&["rmse", "--model", s(&model), "--matrix", s(&matrix)]);
    let value: f64 = rmse.trim().strip_prefix("rmse\t").unwrap().parse().unwrap();
    let trace = fs::read_to_string(dir.path().join("trace.tsv")).unwrap();
    let last: f64 = trace
        .lines()
        .last()
        .unwrap()
        .split('\t')
        .nth(1)
        .unwrap()
        .parse()
        .unwrap();
    assert!((value - last).abs() < 1e-8, "{value} vs {last}");

    let near = run_ok(&[
        "topics",
        "near",
        "--model",
        s(&model),
        "--topic",
        "topic00",
        "-n",
        "3",
        "--tsv",
    ]);
    let lines: Vec<&str> = near.lines().collect();
    assert_eq!(lines[0], "topic\tcosine");
    assert_eq!(lines.len(), 4);
    assert!(!near.contains("topic00\t"));

    let table = run_ok(&[
        "topics",
        "near",
        "--model",
        s(&model),
        "--topic",
        "topic00",
        "-n",
        "3",
    ]);
    assert!(table.starts_with("topic "));

    let report = run_ok(&[
        "user",
        "report",
        "--model",
        s(&model),
        "--matrix",
        s(&matrix),
        "--user",
        "user00",
        "--tsv",
    ]);
    assert!(report.starts_with("section\ttopic\tscore\n"));
    assert!(report.lines().skip(1).all(|l| l.split('\t').count() == 3));

    let judgements = dir.path().join("judgements.tsv");
    fs::write(
        &judgements,
        "topic00\ttopic01\t1\ntopic02\ttopic03\t-1\ntopic04\ttopic05\t0\ntopic06\ttopic07\t0.5\n",
    )
    .unwrap();
    let rho = run_ok(&[
        "eval",
        "spearman",
        "--model",
        s(&model),
        "--judgements",
        s(&judgements),
    ]);
    assert!(rho.starts_with("pairs\t4\nrho\t"), "{rho}");

    let variance = run_ok(&[
        "eval",
        "variance",
        "--matrix",
        s(&matrix),
        "--thetas",
        "0,1000",
    ]);
    assert!(variance.ends_with("1000\tNA\n"), "{variance}");

    let unknown = run(&["topics", "near", "--model", s(&model), "--topic", "nope"]);
    assert_eq!(unknown.status.code(), Some(1));
    assert!(stderr(&unknown).starts_with("error\tstage=topics\t"));
}

const SUBCOMMANDS: &[&[&str]] = &[
    &["corpus", "stats"],
    &["corpus", "synth"],
    &["patterns", "harvest"],
    &["patterns", "load"],
    &["extract"],
    &["train"],
    &["rmse"],
    &["eval", "holdout"],
    &["eval", "spearman"],
    &["eval", "variance"],
    &["topics", "near"],
    &["topics", "pairs"],
    &["user", "report"],
    &["pipeline"],
];

/// Every flag is described, and every optional flag that takes a value
/// states its default.
#[test]
fn help_documents_every_flag_and_default() {
    for sub in SUBCOMMANDS {
        let mut args = sub.to_vec();
        args.push("--help");
        let help = run_ok(&args);
        let usage = help
            .lines()
            .find(|l| l.starts_with("Usage:"))
            .unwrap()
            .to_string();
        let options: Vec<&str> = help
            .lines()
            .skip_while(|l| *l != "Options:")
            .skip(1)
            .collect();
        let mut blocks: Vec<(String, String)> = Vec::new();
        for line in options {
            let trimmed = line.trim_start();
            if trimmed.starts_with('-') {
                let flag_end = trimmed.find("  ").unwrap_or(trimmed.len());
                let (flag, rest) = trimmed.split_at(flag_end);
                blocks.push((flag.to_string(), rest.trim().to_string()));
            } else if let Some(last) = blocks.last_mut() {
                last.1.push(' ');
                last.1.push_str(trimmed);
            }
        }
        for (flag, text) in blocks {
            if flag.contains("--help") || flag.contains("--version") {
                continue;
            }
            let name = flag
                .split_whitespace()
                .find(|w| w.starts_with("--"))
                .unwrap();
            let name = name.trim_end_matches(',');
            let description = text.split("[default:").next().unwrap().trim();
            assert!(
                !description.is_empty(),
                "{sub:?}: {flag} has no description"
            );
            let takes_value = flag.contains('<');
            let required = usage.contains(&format!("{name} <"));
            if takes_value && !required {
                assert!(
                    text.contains("[default:"),
                    "{sub:?}: {flag} lacks a default"
                );
            }
        }
    }
}
