//! End-to-end checks of the command-line surface: golden extraction output,
//! checkpoint/resume identity, the simulate-fit-eval pipeline and exit codes.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_vsoframes"))
}

fn run_ok(cmd: &mut Command) -> Output {
    let out = cmd.output().expect("spawn vsoframes");
    assert!(
        out.status.success(),
        "command failed\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/data")
        .join(name)
}

#[test]
fn extract_matches_golden_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("tuples.tsv");
    let output = run_ok(
        bin()
            .arg("extract")
            .arg(data("sample.conllu"))
            .args(["--out", out.to_str().unwrap()]),
    );
    let got = std::fs::read_to_string(&out).unwrap();
    let want = std::fs::read_to_string(data("expected_tuples.tsv")).unwrap();
    assert_eq!(got, want);
    assert!(
        out.with_extension("tsv.vocab.tsv").exists() || {
            // default vocab path is <out>.vocab.tsv
            dir.path().join("tuples.tsv.vocab.tsv").exists()
        }
    );

    // The shape statistics line partitions all tuples.
    let stdout = String::from_utf8(output.stdout).unwrap();
    let stats = stdout
        .lines()
        .find(|l| l.starts_with("vso="))
        .expect("stats line");
    let total: f64 = stats
        .split_whitespace()
        .map(|kv| kv.split('=').nth(1).unwrap().trim_end_matches('%'))
        .map(|v| v.parse::<f64>().unwrap())
        .sum();
    assert!((total - 100.0).abs() < 0.2, "{stats}");
}

#[test]
fn extract_empty_input_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.conllu");
    std::fs::write(&empty, "").unwrap();
    let out = dir.path().join("tuples.tsv");
    run_ok(
        bin()
            .arg("extract")
            .arg(&empty)
            .args(["--out", out.to_str().unwrap()]),
    );
    assert_eq!(std::fs::read_to_string(&out).unwrap(), "");
}

fn simulate_small(dir: &Path) -> (PathBuf, PathBuf, PathBuf) {
    let corpus = dir.join("synth.tsv");
    run_ok(bin().args([
        "simulate",
        "--model",
        "1",
        "--frames",
        "4",
        "--docs",
        "30",
        "--tuples-per-doc",
        "20",
        "--alpha",
        "0.3",
        "--planted-words",
        "10",
        "--seed",
        "11",
        "--out",
        corpus.to_str().unwrap(),
    ]));
    let vocab = dir.join("synth.tsv.vocab.tsv");
    let lexicon = dir.join("synth.tsv.lexicon.tsv");
    assert!(corpus.exists() && vocab.exists() && lexicon.exists());
    (corpus, vocab, lexicon)
}

#[test]
fn fit_plus_resume_equals_longer_fit() {
    let dir = tempfile::tempdir().unwrap();
    let (corpus, vocab, _) = simulate_small(dir.path());

    let fit = |iters: &str, ckpt: &Path| {
        run_ok(bin().args([
            "fit",
            "--input",
            corpus.to_str().unwrap(),
            "--vocab",
            vocab.to_str().unwrap(),
            "--model",
            "1",
            "--frames",
            "4",
            "--iters",
            iters,
            "--seed",
            "7",
            "--hyper-burnin",
            "20",
            "--hyper-interval",
            "15",
            "--checkpoint",
            ckpt.to_str().unwrap(),
        ]));
    };
    let full = dir.path().join("full.ckpt");
    fit("80", &full);

    let head = dir.path().join("head.ckpt");
    fit("35", &head);
    let resumed = dir.path().join("resumed.ckpt");
    run_ok(bin().args([
        "resume",
        head.to_str().unwrap(),
        "--input",
        corpus.to_str().unwrap(),
        "--vocab",
        vocab.to_str().unwrap(),
        "--iters",
        "45",
        "--hyper-burnin",
        "20",
        "--hyper-interval",
        "15",
        "--out",
        resumed.to_str().unwrap(),
    ]));

    let full_bytes = std::fs::read(&full).unwrap();
    let resumed_bytes = std::fs::read(&resumed).unwrap();
    assert_eq!(full_bytes, resumed_bytes, "fit(80) != resume(fit(35), 45)");
}

#[test]
fn fit_zero_iterations_checkpoints_the_initialization() {
    let dir = tempfile::tempdir().unwrap();
    let (corpus, vocab, _) = simulate_small(dir.path());
    let ckpt = dir.path().join("init.ckpt");
    run_ok(bin().args([
        "fit",
        "--input",
        corpus.to_str().unwrap(),
        "--vocab",
        vocab.to_str().unwrap(),
        "--frames",
        "4",
        "--iters",
        "0",
        "--seed",
        "3",
        "--checkpoint",
        ckpt.to_str().unwrap(),
    ]));
    let text = std::fs::read_to_string(&ckpt).unwrap();
    assert!(text.contains("\"iteration\":0"));
    // Trace exists and holds only the header.
    let trace = std::fs::read_to_string(dir.path().join("init.ckpt.trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), 1);
    // Provenance config round-trips.
    let config = dir.path().join("init.ckpt.config");
    assert!(std::fs::read_to_string(&config)
        .unwrap()
        .contains("config_version = 1"));
}

#[test]
fn fit_traces_every_iteration() {
    let dir = tempfile::tempdir().unwrap();
    let (corpus, vocab, _) = simulate_small(dir.path());
    let ckpt = dir.path().join("run.ckpt");
    run_ok(bin().args([
        "fit",
        "--input",
        corpus.to_str().unwrap(),
        "--vocab",
        vocab.to_str().unwrap(),
        "--frames",
        "4",
        "--iters",
        "25",
        "--checkpoint",
        ckpt.to_str().unwrap(),
    ]));
    let trace = std::fs::read_to_string(dir.path().join("run.ckpt.trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), 26); // header + one row per iteration
}

#[test]
fn simulate_fit_eval_recovers_planted_verbsets() {
    let dir = tempfile::tempdir().unwrap();
    let (corpus, vocab, lexicon) = simulate_small(dir.path());

    // Keep only the verb sets as the reference lexicon.
    let verbs_only: String = std::fs::read_to_string(&lexicon)
        .unwrap()
        .lines()
        .filter(|l| l.contains("_verb"))
        .map(|l| format!("{l}\n"))
        .collect();
    let verb_lexicon = dir.path().join("verbs.tsv");
    std::fs::write(&verb_lexicon, verbs_only).unwrap();

    let ckpt = dir.path().join("run.ckpt");
    run_ok(bin().args([
        "fit",
        "--input",
        corpus.to_str().unwrap(),
        "--vocab",
        vocab.to_str().unwrap(),
        "--frames",
        "4",
        "--alpha",
        "0.3",
        "--beta",
        "0.1",
        "--iters",
        "300",
        "--seed",
        "5",
        "--hyper-burnin",
        "50",
        "--hyper-interval",
        "25",
        "--checkpoint",
        ckpt.to_str().unwrap(),
    ]));

    let report = dir.path().join("match.tsv");
    let out = run_ok(bin().args([
        "eval",
        "--checkpoint",
        ckpt.to_str().unwrap(),
        "--input",
        corpus.to_str().unwrap(),
        "--vocab",
        vocab.to_str().unwrap(),
        "--lexicon",
        verb_lexicon.to_str().unwrap(),
        "--threshold",
        "5",
        "--position",
        "verb",
        "--min-verbs",
        "3",
        "--out",
        report.to_str().unwrap(),
    ]));
    let stdout = String::from_utf8(out.stdout).unwrap();
    // Desk-scale recovery: at least 3 of 4 planted verbsets matched at >= 0.8.
    let good = stdout
        .lines()
        .filter(|l| l.contains("dice="))
        .filter(|l| {
            let d: f64 = l
                .split("dice=")
                .nth(1)
                .unwrap()
                .split_whitespace()
                .next()
                .unwrap()
                .parse()
                .unwrap();
            d >= 0.8
        })
        .count();
    assert!(
        good >= 3,
        "only {good} planted verbsets recovered:\n{stdout}"
    );

    let report_text = std::fs::read_to_string(&report).unwrap();
    assert!(report_text.starts_with("ref_name\t"));

    // The report lists planted words: on this one-hot synthetic model every
    // verb line must lead with a planted verb token (prefix "v"), and every
    // cumulative mass annotation must fall in (0, 1].
    let out = run_ok(bin().args([
        "report",
        "--checkpoint",
        ckpt.to_str().unwrap(),
        "--input",
        corpus.to_str().unwrap(),
        "--vocab",
        vocab.to_str().unwrap(),
    ]));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("frame 0"));
    let mut verb_lines = 0;
    for line in text.lines() {
        if let Some(rest) = line.trim_start().strip_prefix("verb: ") {
            let first = rest.split_whitespace().next().unwrap();
            assert!(first.starts_with('v'), "unexpected top verb {first:?}");
            verb_lines += 1;
        }
        if let Some(mass) = line.rsplit_once('(').and_then(|(_, tail)| {
            tail.strip_suffix(" mass)").and_then(|v| v.parse::<f64>().ok())
        }) {
            assert!(mass > 0.0 && mass <= 1.0 + 1e-9, "mass {mass} out of range");
        }
    }
    assert_eq!(verb_lines, 4);

    // Diagnose renders; on this tiny separable corpus the chain freezes
    // early, so the correlation is either negative or undefined (constant
    // change counts over the logged iterations).
    let out = run_ok(bin().args([
        "diagnose",
        dir.path().join("run.ckpt.trace.csv").to_str().unwrap(),
        "--burnin",
        "50",
    ]));
    let text = String::from_utf8(out.stdout).unwrap();
    let corr_line = text
        .lines()
        .find(|l| l.starts_with("corr_log_joint_changes"))
        .unwrap();
    let raw = corr_line.split('=').nth(1).unwrap().trim();
    if raw != "undefined" {
        let value: f64 = raw.parse().unwrap();
        assert!(value <= 0.0, "{corr_line}");
    }
}

#[test]
fn masked_fit_resumes_with_labels() {
    let dir = tempfile::tempdir().unwrap();
    let (corpus, vocab, _) = simulate_small(dir.path());

    // Two labels over six frames: {0,1,2} and {3,4,5}; documents alternate.
    let mask_path = dir.path().join("mask.txt");
    std::fs::write(&mask_path, "1,1,1,0,0,0\n0,0,0,1,1,1\n").unwrap();
    let labels_path = dir.path().join("labels.tsv");
    let mut labels = String::new();
    for d in 0..30 {
        let bits = if d % 2 == 0 { "1,0" } else { "0,1" };
        labels.push_str(&format!("synth{d:04}\t{bits}\n"));
    }
    std::fs::write(&labels_path, labels).unwrap();

    let ckpt = dir.path().join("masked.ckpt");
    run_ok(bin().args([
        "fit",
        "--input",
        corpus.to_str().unwrap(),
        "--vocab",
        vocab.to_str().unwrap(),
        "--frames",
        "6",
        "--iters",
        "15",
        "--labels",
        labels_path.to_str().unwrap(),
        "--label-mask",
        mask_path.to_str().unwrap(),
        "--checkpoint",
        ckpt.to_str().unwrap(),
    ]));

    // Resume without labels is refused; with labels it continues.
    let out = bin()
        .args([
            "resume",
            ckpt.to_str().unwrap(),
            "--input",
            corpus.to_str().unwrap(),
            "--vocab",
            vocab.to_str().unwrap(),
            "--iters",
            "5",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    run_ok(bin().args([
        "resume",
        ckpt.to_str().unwrap(),
        "--input",
        corpus.to_str().unwrap(),
        "--vocab",
        vocab.to_str().unwrap(),
        "--labels",
        labels_path.to_str().unwrap(),
        "--iters",
        "5",
    ]));

    // Mask soundness is visible in the checkpointed assignments: even-doc
    // tuples sit in frames 0-2, odd-doc tuples in 3-5.
    let text = std::fs::read_to_string(&ckpt).unwrap();
    let ckpt_json: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(ckpt_json["iteration"], 20);
    let frames: Vec<u64> = ckpt_json["state"]["frame_of"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_u64().unwrap())
        .collect();
    // 30 docs x 20 tuples, contiguous by doc.
    for (i, f) in frames.iter().enumerate() {
        let doc = i / 20;
        if doc % 2 == 0 {
            assert!(*f < 3, "tuple {i} in even doc got frame {f}");
        } else {
            assert!(*f >= 3, "tuple {i} in odd doc got frame {f}");
        }
    }
}

#[test]
fn multi_worker_fit_adds_barrier_column() {
    let dir = tempfile::tempdir().unwrap();
    let (corpus, vocab, _) = simulate_small(dir.path());
    let ckpt = dir.path().join("par.ckpt");
    run_ok(bin().args([
        "fit",
        "--input",
        corpus.to_str().unwrap(),
        "--vocab",
        vocab.to_str().unwrap(),
        "--frames",
        "4",
        "--iters",
        "10",
        "--workers",
        "2",
        "--checkpoint",
        ckpt.to_str().unwrap(),
    ]));
    let trace = std::fs::read_to_string(dir.path().join("par.ckpt.trace.csv")).unwrap();
    let header = trace.lines().next().unwrap();
    assert!(header.ends_with(",barrier_ms"), "{header}");
    assert_eq!(trace.lines().count(), 11);
}

#[test]
fn diagnose_reports_undefined_on_constant_trace() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("flat.csv");
    let mut text =
        String::from("iter,changes,log_joint,pseudo_ll,alpha,beta,gamma1,gamma2,gamma3,wall_ms\n");
    for i in 1..=5 {
        text.push_str(&format!("{i},3,-10,-5,1,1,1,1,1,0\n"));
    }
    std::fs::write(&trace, text).unwrap();
    let out = run_ok(bin().args(["diagnose", trace.to_str().unwrap()]));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("corr_log_joint_changes = undefined"));
}

#[test]
fn exit_codes_distinguish_usage_and_data_errors() {
    // Unknown flag: usage error, code 1.
    let out = bin().args(["fit", "--no-such-flag"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));

    // Missing input file: data error, code 2.
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args([
            "fit",
            "--input",
            dir.path().join("missing.tsv").to_str().unwrap(),
            "--checkpoint",
            dir.path().join("x.ckpt").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));

    // Malformed tuple line: data error with the line number named.
    let bad = dir.path().join("bad.tsv");
    std::fs::write(&bad, "d1\tarrest\tpolice\t-\nd1\tbroken\n").unwrap();
    let out = bin()
        .args([
            "fit",
            "--input",
            bad.to_str().unwrap(),
            "--checkpoint",
            dir.path().join("x.ckpt").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains(":2"));
}

#[test]
fn checkpoint_refuses_mismatched_corpus() {
    let dir = tempfile::tempdir().unwrap();
    let (corpus, vocab, _) = simulate_small(dir.path());
    let ckpt = dir.path().join("run.ckpt");
    run_ok(bin().args([
        "fit",
        "--input",
        corpus.to_str().unwrap(),
        "--vocab",
        vocab.to_str().unwrap(),
        "--frames",
        "4",
        "--iters",
        "5",
        "--checkpoint",
        ckpt.to_str().unwrap(),
    ]));
    // Tamper with the corpus.
    let other = dir.path().join("other.tsv");
    let mut text = std::fs::read_to_string(&corpus).unwrap();
    text.push_str("zzz\textra\tword\t-\n");
    std::fs::write(&other, text).unwrap();
    let out = bin()
        .args([
            "resume",
            ckpt.to_str().unwrap(),
            "--input",
            other.to_str().unwrap(),
            "--vocab",
            vocab.to_str().unwrap(),
            "--iters",
            "1",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("does not match"));
}
