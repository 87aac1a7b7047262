use std::fs;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

use tempfile::TempDir;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_streamlda"));
    c.env("RUST_LOG", "warn");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// A small synthetic corpus written through the `synth` command.
fn corpus(dir: &TempDir) -> (PathBuf, PathBuf) {
    let out = dir.path().join("data");
    let o = run(&[
        "synth", "--docs", "60", "--topics", "3", "--vocab-size", "40", "--doc-length", "30", "--seed", "4", "--out",
        s(&out),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    (out.join("docword.txt"), out.join("vocab.txt"))
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    let text = fs::read_to_string(path).unwrap();
    text.lines().skip(1).map(|l| l.split(',').map(str::to_string).collect()).collect()
}

#[test]
fn help_and_usage_exit_codes() {
    assert_eq!(code(&run(&["--help"])), 0);
    assert_eq!(code(&run(&["--version"])), 0);
    assert_eq!(code(&run(&[])), 1);
    assert_eq!(code(&run(&["train-cgs", "--bogus"])), 1);
}

#[test]
fn missing_docword_names_the_path() {
    let dir = TempDir::new().unwrap();
    let missing = dir.path().join("nope.txt");
    let o = run(&["train-cgs", "--docword", s(&missing), "--out", s(&dir.path().join("o"))]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("nope.txt"));
}

#[test]
fn decay_zero_is_rejected() {
    let dir = TempDir::new().unwrap();
    let (dw, _) = corpus(&dir);
    let o = run(&["train-sgs", "--docword", s(&dw), "--decay", "0", "--out", s(&dir.path().join("o"))]);
    assert_eq!(code(&o), 1);
}

#[test]
fn cgs_is_deterministic_and_writes_artifacts() {
    let dir = TempDir::new().unwrap();
    let (dw, vocab) = corpus(&dir);
    let train = |name: &str| {
        let out = dir.path().join(name);
        let o = run(&[
            "train-cgs", "--docword", s(&dw), "--vocab", s(&vocab), "--topics", "3", "--iters", "20", "--seed", "7",
            "--out", s(&out),
        ]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        out
    };
    let a = train("a");
    let b = train("b");
    let model = fs::read(a.join("model.txt")).unwrap();
    assert_eq!(model, fs::read(b.join("model.txt")).unwrap());
    assert!(String::from_utf8_lossy(&model).starts_with("3 40 0.1 0.03\n"));
    for f in ["eval.csv", "metrics.csv", "metrics.jsonl", "manifest.json"] {
        assert!(a.join(f).exists(), "{f}");
    }
    let manifest: serde_json::Value = serde_json::from_slice(&fs::read(a.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 7);
    assert_eq!(manifest["corpus"]["docs"], 60);
    assert_eq!(manifest["corpus"]["sha256"].as_str().unwrap().len(), 64);
    assert_eq!(manifest["command"]["train-cgs"]["model"]["alpha"], 0.1);
    assert!(manifest["end_unix_ms"].as_u64() >= manifest["start_unix_ms"].as_u64());
}

#[test]
fn sgs_with_one_full_batch_reproduces_cgs() {
    let dir = TempDir::new().unwrap();
    let (dw, _) = corpus(&dir);
    let common = ["--docword", s(&dw), "--topics", "3", "--seed", "2", "--test-fraction", "0.2"];
    let cgs = dir.path().join("cgs");
    let sgs = dir.path().join("sgs");
    let o = run(&[&["train-cgs"][..], &common, &["--iters", "15", "--out", s(&cgs)]].concat());
    assert_eq!(code(&o), 0);
    let o = run(&[
        &["train-sgs"][..],
        &common,
        &["--decay", "1.0", "--batch-size", "48", "--max-iters", "15", "--patience", "0", "--out", s(&sgs)],
    ]
    .concat());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(fs::read(cgs.join("model.txt")).unwrap(), fs::read(sgs.join("model.txt")).unwrap());
    assert_eq!(fs::read(cgs.join("eval.csv")).unwrap(), fs::read(sgs.join("eval.csv")).unwrap());
}

#[test]
fn sgs_writes_one_metrics_row_per_batch() {
    let dir = TempDir::new().unwrap();
    let (dw, _) = corpus(&dir);
    let out = dir.path().join("o");
    // 60 docs, 20% held out -> 48 training docs -> batches of 10, 10, 10, 10, 8.
    let o = run(&[
        "train-sgs", "--docword", s(&dw), "--topics", "3", "--batch-size", "10", "--decay", "0.8", "--batch-eval",
        "--out", s(&out),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let rows = csv_rows(&out.join("metrics.csv"));
    assert_eq!(rows.len(), 5);
    assert!(rows.iter().all(|r| !r[3].is_empty()), "held-out column filled");
    assert_eq!(fs::read_to_string(out.join("metrics.jsonl")).unwrap().lines().count(), 5);
}

#[test]
fn cdf_uses_the_same_metrics_schema() {
    let dir = TempDir::new().unwrap();
    let (dw, _) = corpus(&dir);
    let header = |out: &Path| fs::read_to_string(out.join("metrics.csv")).unwrap().lines().next().unwrap().to_string();
    let (a, b, c) = (dir.path().join("a"), dir.path().join("b"), dir.path().join("c"));
    for out in [&a, &b] {
        let o = run(&["train-cdf", "--docword", s(&dw), "--topics", "3", "--batch-size", "16", "--seed", "1", "--out", s(out)]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    assert_eq!(fs::read(a.join("model.txt")).unwrap(), fs::read(b.join("model.txt")).unwrap());
    let o = run(&["train-sgs", "--docword", s(&dw), "--topics", "3", "--batch-size", "16", "--out", s(&c)]);
    assert_eq!(code(&o), 0);
    assert_eq!(header(&a), header(&c));
    assert_eq!(header(&a), "t,iterations,train_perplexity,heldout_perplexity,wall_ms,tokens_per_sec");
}

#[test]
fn eval_of_uniform_checkpoint_is_v() {
    let dir = TempDir::new().unwrap();
    let (dw, _) = corpus(&dir);
    let model = dir.path().join("uniform.txt");
    fs::write(&model, "3 40 0.1 0.03\n").unwrap();
    let out = dir.path().join("o");
    let o = run(&["eval", "--model", s(&model), "--docword", s(&dw), "--out", s(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let rows = csv_rows(&out.join("eval.csv"));
    let corpus_row = rows.iter().find(|r| r[0] == "corpus").unwrap();
    assert!((corpus_row[2].parse::<f64>().unwrap() - 40.0).abs() < 1e-9);
    assert_eq!(
        fs::read_to_string(out.join("eval.csv")).unwrap().lines().next(),
        Some("doc_id,heldout_tokens,perplexity")
    );

    let o = run(&["eval", "--model", s(&dir.path().join("none.txt")), "--docword", s(&dw), "--out", s(&out)]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("none.txt"));
}

#[test]
fn bench_reports_ideal_scaling() {
    let dir = TempDir::new().unwrap();
    let (dw, _) = corpus(&dir);
    let out = dir.path().join("o");
    let o = run(&[
        "bench", "--docword", s(&dw), "--topics", "3", "--workers", "1,2", "--batch-size", "10", "--iters", "5",
        "--out", s(&out),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let rows = csv_rows(&out.join("bench.csv"));
    assert_eq!(rows.len(), 2);
    let single: f64 = rows[0][3].parse().unwrap();
    let ideal: f64 = rows[1][4].parse().unwrap();
    assert!(single > 0.0);
    assert!((ideal - 2.0 * single).abs() < 1e-6 * ideal);
}

#[test]
fn serve_and_worker_processes() {
    let dir = TempDir::new().unwrap();
    let (dw, _) = corpus(&dir);
    let srv_out = dir.path().join("srv");
    let mut server = bin()
        .args([
            "serve", "--bind", "127.0.0.1:0", "--topics", "3", "--vocab", "40", "--decay", "1.0", "--max-pushes", "3",
            "--out", s(&srv_out),
        ])
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    let mut line = String::new();
    BufReader::new(server.stdout.take().unwrap()).read_line(&mut line).unwrap();
    let addr = line.trim().strip_prefix("listening on ").unwrap().to_string();

    let o = run(&[
        "worker", "--server", &addr, "--data", s(&dw), "--batch-size", "20", "--topics", "3", "--max-iters", "10",
        "--out", s(&dir.path().join("w")),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(server.wait().unwrap().success());

    let model = fs::read_to_string(srv_out.join("model.txt")).unwrap();
    let mass: f64 = model.lines().skip(1).map(|l| l.split(' ').nth(2).unwrap().parse::<f64>().unwrap()).sum();
    let tokens: usize = fs::read_to_string(&dw)
        .unwrap()
        .lines()
        .skip(3)
        .map(|l| l.split(' ').nth(2).unwrap().parse::<usize>().unwrap())
        .sum();
    assert_eq!(mass, tokens as f64);
    assert_eq!(csv_rows(&dir.path().join("w").join("metrics.csv")).len(), 3);
}
