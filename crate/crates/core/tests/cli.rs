//! The `rolecraft` binary end to end: verbs, stage files and exit codes.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

use serde_json::Value;
use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_rolecraft");

fn rolecraft(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = rolecraft(args);
    assert!(
        out.status.success(),
        "rolecraft {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn code(args: &[&str]) -> i32 {
    rolecraft(args).status.code().expect("exit code")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// A small synthetic corpus, a config and a trained model in a temp dir.
struct Workspace {
    dir: TempDir,
}

impl Workspace {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        ok(&["synth", "--output-dir", s(dir.path()), "--sentences", "120", "--seed", "7"]);
        let ws = Workspace { dir };
        ws.write_config("rolecraft.toml", "");
        ok(&["train", "-c", s(&ws.config()), "--summary", s(&ws.path("summary.json"))]);
        ws
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn config(&self) -> PathBuf {
        self.path("rolecraft.toml")
    }

    /// Base config plus `extra` lines appended to the top level.
    fn write_config(&self, name: &str, extra: &str) -> PathBuf {
        let text = format!(
            "version = 1\nlambda = 3.0\n{extra}\n[paths]\nframes = \"frames.jsonl\"\ntrain = \"train.jsonl\"\ndev = \"dev.jsonl\"\ncorpus = \"test.jsonl\"\nmodel = \"model.json\"\noutput = \"out/predictions.jsonl\"\nreport = \"out/report.json\"\nintermediates = \"out/stages\"\n"
        );
        let path = self.path(name);
        fs::write(&path, text).unwrap();
        path
    }

    fn predict(&self, extra: &[&str]) -> Vec<u8> {
        let out = self.path("out/predictions.jsonl");
        let _ = fs::remove_file(&out);
        let config = self.config();
        let mut args = vec!["predict", "-c", s(&config)];
        args.extend_from_slice(extra);
        ok(&args);
        fs::read(out).unwrap()
    }
}

#[test]
fn train_predict_evaluate_round_trip() {
    let ws = Workspace::new();
    let summary: Value = serde_json::from_slice(&fs::read(ws.path("summary.json")).unwrap()).unwrap();
    assert!(summary["tuning"]["lambda"].as_f64().unwrap() > 0.0);

    let out = ok(&["predict", "-c", s(&ws.config()), "--json"]);
    let printed: Value = serde_json::from_slice(&out.stdout).unwrap();
    let written: Value = serde_json::from_slice(&fs::read(ws.path("out/report.json")).unwrap()).unwrap();
    assert_eq!(printed, written);
    assert!(printed["arguments"]["f1"].as_f64().unwrap() > 0.5);

    // evaluate agrees with the report written by predict
    let eval = ok(&[
        "evaluate",
        "--gold",
        s(&ws.path("test.jsonl")),
        "--pred",
        s(&ws.path("out/predictions.jsonl")),
        "--frames",
        s(&ws.path("frames.jsonl")),
        "--json",
    ]);
    let eval: Value = serde_json::from_slice(&eval.stdout).unwrap();
    assert_eq!(eval["arguments"], written["arguments"]);
    assert_eq!(eval["sense"], written["sense"]);

    for name in ["senses.jsonl", "roles.jsonl", "queries.jsonl"] {
        assert!(ws.path("out/stages").join(name).exists(), "{name} missing");
    }
}

#[test]
fn worker_count_does_not_change_output() {
    let ws = Workspace::new();
    let one = ws.predict(&["--workers", "1"]);
    let four = ws.predict(&["--workers", "4"]);
    assert!(!one.is_empty());
    assert_eq!(one, four);
}

#[test]
fn stages_can_be_rerun_from_files() {
    let ws = Workspace::new();
    let full = ws.predict(&[]);
    let stages = ws.path("saved");
    fs::rename(ws.path("out/stages"), &stages).unwrap();
    let senses = stages.join("senses.jsonl");
    let roles = stages.join("roles.jsonl");
    let reused = ws.predict(&["--senses", s(&senses), "--roles", s(&roles)]);
    assert_eq!(full, reused);

    // standalone stage verbs produce the same files
    let d = ws.path("disamb.jsonl");
    ok(&["disambiguate", "-c", s(&ws.config()), "--output", s(&d)]);
    assert_eq!(fs::read(&d).unwrap(), fs::read(&senses).unwrap());
    let f = ws.path("filter.jsonl");
    ok(&["filter-roles", "-c", s(&ws.config()), "--output", s(&f)]);
    assert_eq!(fs::read(&f).unwrap(), fs::read(&roles).unwrap());
    let q = ws.path("queries.jsonl");
    ok(&[
        "dump-queries",
        "-c",
        s(&ws.config()),
        "--senses",
        s(&senses),
        "--roles",
        s(&roles),
        "--output",
        s(&q),
    ]);
    assert_eq!(fs::read(&q).unwrap(), fs::read(stages.join("queries.jsonl")).unwrap());
}

#[test]
fn label_only_queries_differ_only_in_text() {
    let ws = Workspace::new();
    let dump = |style: &str| -> Vec<Value> {
        let out = ok(&["dump-queries", "-c", s(&ws.config()), "--style", style]);
        String::from_utf8(out.stdout)
            .unwrap()
            .lines()
            .map(|l| serde_json::from_str(l).unwrap())
            .collect()
    };
    let semantic = dump("semantic");
    let label = dump("label-only");
    assert_eq!(semantic.len(), label.len());
    assert!(!semantic.is_empty());
    for (a, b) in semantic.iter().zip(&label) {
        let strip = |v: &Value| {
            let mut v = v.clone();
            v.as_object_mut().unwrap().remove("query");
            v
        };
        assert_eq!(strip(a), strip(b));
        assert_ne!(a["query"], b["query"]);
    }
}

#[test]
fn exec_scorer_matches_in_process_model() {
    let ws = Workspace::new();
    let reference = ws.predict(&[]);
    let spec = format!("exec:{BIN} serve --model {}", s(&ws.path("model.json")));
    ok(&["check-scorer", "--scorer", &spec, "--timeout-secs", "20"]);
    // an external role head cannot name its universe, so pass the trained one
    let summary: Value = serde_json::from_slice(&fs::read(ws.path("summary.json")).unwrap()).unwrap();
    let roles = summary["universe"].to_string();
    let cfg = ws.write_config("exec.toml", &format!("roles = {roles}\n[scorers]\ndefault = {spec:?}\n"));
    let out = ws.path("out/predictions.jsonl");
    fs::remove_file(&out).unwrap();
    ok(&["predict", "-c", s(&cfg)]);
    assert_eq!(fs::read(out).unwrap(), reference);
}

#[test]
fn empty_corpus_is_fine() {
    let ws = Workspace::new();
    fs::write(ws.path("empty.jsonl"), "").unwrap();
    let cfg = ws.path("empty.toml");
    let text = fs::read_to_string(ws.config()).unwrap().replace("test.jsonl", "empty.jsonl");
    fs::write(&cfg, text).unwrap();
    ok(&["predict", "-c", s(&cfg)]);
    assert_eq!(fs::read(ws.path("out/predictions.jsonl")).unwrap(), b"");
}

#[test]
fn decode_reads_a_lattice_from_stdin() {
    let lattice = r#"{"lattice":[
        {"role":"A1","rows":[[0.7,0,0,0,0,0,0.3],[0,0.6,0,0,0,0,0.4],[0,0,0,0,0,0,1]]},
        {"role":"TMP","rows":[[0.2,0,0,0,0,0,0.8],[0.05,0.05,0,0,0,0,0.9],[0.55,0,0,0,0,0,0.45]]}
    ]}"#;
    let mut child = Command::new(BIN)
        .args(["decode"])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(lattice.as_bytes()).unwrap();
    let out = child.wait_with_output().unwrap();
    assert!(out.status.success());
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    let text = v.to_string();
    assert!(text.contains("A1"), "{text}");
    assert!(text.contains("TMP"), "{text}");
}

#[test]
fn synth_is_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        ok(&["synth", "--output-dir", s(d.path()), "--sentences", "40"]);
    }
    for name in ["frames.jsonl", "train.jsonl", "dev.jsonl", "test.jsonl"] {
        assert_eq!(fs::read(a.path().join(name)).unwrap(), fs::read(b.path().join(name)).unwrap());
    }
}

#[test]
fn exit_codes() {
    let ws = tempfile::tempdir().unwrap();
    // usage errors
    assert_eq!(code(&["no-such-verb"]), 1);
    assert_eq!(code(&["predict"]), 1);
    assert_eq!(code(&["--help"]), 0);
    // bad config contents
    let both = ws.path().join("both.toml");
    fs::write(&both, "version = 1\nlambda = 2.0\nthreshold = 0.5\n[paths]\nframes = \"f\"\ncorpus = \"c\"\n").unwrap();
    assert_eq!(code(&["predict", "-c", s(&both)]), 1);
    let unknown = ws.path().join("unknown.toml");
    fs::write(&unknown, "version = 1\nlambda = 2.0\nbogus = 3\n").unwrap();
    assert_eq!(code(&["predict", "-c", s(&unknown)]), 1);
    // missing files
    assert_eq!(code(&["predict", "-c", s(&ws.path().join("absent.toml"))]), 2);
    assert_eq!(
        code(&["evaluate", "--gold", s(&ws.path().join("g")), "--pred", s(&ws.path().join("p"))]),
        2
    );
    // a scorer process that never answers the handshake
    assert_eq!(code(&["check-scorer", "--scorer", "exec:true", "--timeout-secs", "5"]), 3);
}
