//! End-to-end tests that drive the installed binary the way a user would:
//! real config files, real artifacts, subprocess exit codes.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use pairforge::synth::read_pairs_tsv;
use pairforge_testkit::mock::MockMtServer;
use sha2::{Digest, Sha256};

const NOUNS: [(&str, &str); 4] =
    [("gato", "cat"), ("perro", "dog"), ("casa", "house"), ("luna", "moon")];
const VERBS: [(&str, &str); 3] = [("corre", "runs"), ("salta", "jumps"), ("duerme", "sleeps")];

const BASE_CONFIG: &str = r#"
[paths]
parallel_corpus = "train.tsv"
dev_corpus = "dev.tsv"
monolingual = "mono.txt"
gec_seed = "gec_seed.tsv"
output_dir = "out"

[mert]
outer_iters = 2
nbest_size = 20
"#;

fn corpus_lines() -> Vec<(String, String)> {
    let mut lines = Vec::new();
    for (ns, nt) in NOUNS {
        for (vs, vt) in VERBS {
            lines.push((format!("{ns} {vs}"), format!("the {nt} {vt}")));
        }
    }
    lines
}

fn write_fixtures(dir: &Path) {
    let lines = corpus_lines();
    let mut train = String::new();
    for (src, tgt) in &lines {
        // repetition keeps the toy phrase statistics stable
        for _ in 0..5 {
            train.push_str(&format!("{src}\t{tgt}\n"));
        }
    }
    fs::write(dir.join("train.tsv"), train).unwrap();

    let mut dev = String::new();
    for (src, tgt) in lines.iter().take(6) {
        dev.push_str(&format!("{src}\t{tgt}\n"));
    }
    fs::write(dir.join("dev.tsv"), dev).unwrap();

    let mono: String = lines.iter().map(|(src, _)| format!("{src}\n")).collect();
    fs::write(dir.join("mono.txt"), mono).unwrap();

    // poor<TAB>good seed pairs: the poor side lost its determiner
    let mut seed = String::new();
    for (_, tgt) in &lines {
        let poor = tgt.strip_prefix("the ").unwrap();
        seed.push_str(&format!("{poor}\t{tgt}\n"));
    }
    fs::write(dir.join("gec_seed.tsv"), seed).unwrap();
}

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pairforge"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("spawn pairforge")
}

fn run_ok(dir: &Path, args: &[&str]) {
    let out = run(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn train_artifacts(dir: &Path) {
    for cmd in ["train-lm", "align", "phrases", "tune"] {
        run_ok(dir, &["--config", "cfg.toml", cmd]);
    }
}

fn report_json(dir: &Path) -> serde_json::Value {
    let text = fs::read_to_string(dir.join("out/synth_report.json")).unwrap();
    serde_json::from_str(&text).unwrap()
}

#[test]
fn full_toy_pipeline_produces_filtered_pairs() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    write_fixtures(dir);
    fs::write(dir.join("cfg.toml"), BASE_CONFIG).unwrap();
    train_artifacts(dir);
    run_ok(dir, &["--config", "cfg.toml", "synthesize"]);

    let records = read_pairs_tsv(dir.join("out/pairs.tsv")).unwrap();
    assert!(!records.is_empty());
    // both default generators ran: gold pairs plus provider pairs
    assert!(records.iter().any(|r| r.generator.name() == "SMT_GOLD"));
    assert!(records.iter().any(|r| r.generator.name() == "SMT_NMT"));
    for r in &records {
        assert!(r.edit_rate <= 0.6, "retained pair above threshold: {r:?}");
    }

    let report = report_json(dir);
    assert_eq!(report["retained"].as_u64().unwrap(), records.len() as u64);
    assert_eq!(
        report["total"].as_u64().unwrap(),
        report["retained"].as_u64().unwrap() + report["dropped"].as_u64().unwrap()
    );

    let poor = fs::read_to_string(dir.join("out/poor.txt")).unwrap();
    let good = fs::read_to_string(dir.join("out/good.txt")).unwrap();
    assert_eq!(poor.lines().count(), records.len());
    assert_eq!(good.lines().count(), records.len());
    assert!(dir.join("out/pairs.m2").is_file());
    assert!(dir.join("out/synthesize.manifest.json").is_file());

    run_ok(dir, &["--config", "cfg.toml", "evaluate"]);
    let eval: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("out/evaluation.json")).unwrap())
            .unwrap();
    assert!(eval["bleu"]["tuned"].as_f64().unwrap() > 0.0);
    assert!(eval["perplexity"]["degraded"].as_f64().unwrap() >= 1.0);

    run_ok(dir, &["--config", "cfg.toml", "profile"]);
    assert!(dir.join("out/profile.json").is_file());
}

#[test]
fn decode_without_tuned_weights_exits_one_naming_the_file() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    write_fixtures(dir);
    fs::write(dir.join("cfg.toml"), BASE_CONFIG).unwrap();
    // build everything except the weights
    for cmd in ["train-lm", "align", "phrases"] {
        run_ok(dir, &["--config", "cfg.toml", cmd]);
    }
    let out = run(dir, &["--config", "cfg.toml", "decode"]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("weights.json"), "stderr: {stderr}");
}

#[test]
fn unknown_config_key_exits_one_naming_the_key() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    fs::write(dir.join("cfg.toml"), "beam_siz = 4\n").unwrap();
    let out = run(dir, &["--config", "cfg.toml", "profile"]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("beam_siz"), "stderr: {stderr}");
}

#[test]
fn invalid_field_value_exits_one_naming_the_field() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    fs::write(dir.join("cfg.toml"), "edit_rate_threshold = 0.0\n").unwrap();
    let out = run(dir, &["--config", "cfg.toml", "profile"]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("edit_rate_threshold"), "stderr: {stderr}");
}

fn dir_checksums(dir: &Path) -> Vec<(String, String)> {
    let mut sums = Vec::new();
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let mut hasher = Sha256::new();
        hasher.update(fs::read(&path).unwrap());
        let mut hex = String::new();
        for byte in hasher.finalize() {
            hex.push_str(&format!("{byte:02x}"));
        }
        sums.push((path.file_name().unwrap().to_string_lossy().into_owned(), hex));
    }
    sums.sort();
    sums
}

#[test]
fn identical_config_and_seed_reproduce_identical_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    write_fixtures(dir);
    fs::write(dir.join("cfg.toml"), BASE_CONFIG).unwrap();
    let all = ["train-lm", "align", "phrases", "tune", "decode", "synthesize", "evaluate", "profile"];
    for cmd in all {
        run_ok(dir, &["--config", "cfg.toml", cmd]);
    }
    let first = dir_checksums(&dir.join("out"));
    for cmd in all {
        run_ok(dir, &["--config", "cfg.toml", cmd]);
    }
    let second = dir_checksums(&dir.join("out"));
    assert_eq!(first, second);
}

#[test]
fn external_provider_pairs_against_the_service_response() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    write_fixtures(dir);
    fs::write(dir.join("cfg.toml"), BASE_CONFIG).unwrap();
    train_artifacts(dir);

    // the mock service echoes its input, so the good side must equal the
    // source text; the filter would drop such cross-language pairs
    // top-level keys must precede the first table section
    let config = format!(
        "filter_enabled = false\n{BASE_CONFIG}\n[provider]\nkind = \"external\"\n[generators]\nsmt_nmt = 1.0\n"
    );
    fs::write(dir.join("ext.toml"), config).unwrap();
    let server = MockMtServer::spawn();
    let out = Command::new(env!("CARGO_BIN_EXE_pairforge"))
        .current_dir(dir)
        .env("PAIRFORGE_MT_ENDPOINT", server.endpoint())
        .args(["--config", "ext.toml", "synthesize"])
        .output()
        .expect("spawn pairforge");
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));

    let records = read_pairs_tsv(dir.join("out/pairs.tsv")).unwrap();
    let mono = fs::read_to_string(dir.join("mono.txt")).unwrap();
    let sources: Vec<&str> = mono.lines().collect();
    assert_eq!(records.len(), sources.len());
    for (r, src) in records.iter().zip(&sources) {
        assert_eq!(r.generator.name(), "SMT_NMT");
        assert_eq!(r.good.detokenize(), *src);
    }
    assert!(server.requests() > 0);
}

#[test]
fn corruption_and_roundtrip_generators_fill_the_mix() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    write_fixtures(dir);
    fs::write(dir.join("cfg.toml"), BASE_CONFIG).unwrap();
    train_artifacts(dir);

    let config = format!(
        "{BASE_CONFIG}\n[generators]\ncorruption = 1.0\nround_trip = 0.2\nback_translation = 0.2\n"
    );
    fs::write(dir.join("alt.toml"), config).unwrap();
    run_ok(dir, &["--config", "alt.toml", "synthesize"]);

    let report = report_json(dir);
    let retained = &report["retained_by_generator"];
    let dropped = &report["dropped_by_generator"];
    for gen in ["CORRUPTION", "ROUND_TRIP", "BACK_TRANSLATION"] {
        let count = retained[gen].as_u64().unwrap_or(0) + dropped[gen].as_u64().unwrap_or(0);
        assert!(count > 0, "no records from {gen}: {report}");
    }
    // 0.2 of the 60 target sentences
    let rt = retained["ROUND_TRIP"].as_u64().unwrap_or(0)
        + dropped["ROUND_TRIP"].as_u64().unwrap_or(0);
    assert_eq!(rt, 12);
}

#[test]
fn threshold_flag_overrides_the_config_value() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    write_fixtures(dir);
    // tight threshold: any single edit in a three-token sentence is over it
    let config =
        format!("edit_rate_threshold = 0.05\n{BASE_CONFIG}\n[generators]\ncorruption = 1.0\n");
    fs::write(dir.join("cfg.toml"), config).unwrap();
    train_artifacts(dir);

    run_ok(dir, &["--config", "cfg.toml", "synthesize"]);
    let strict = report_json(dir);
    assert!(strict["dropped"].as_u64().unwrap() > 0);

    run_ok(dir, &["--config", "cfg.toml", "--threshold", "10.0", "synthesize"]);
    let loose = report_json(dir);
    assert_eq!(loose["dropped"].as_u64().unwrap(), 0);
    assert_eq!(loose["retained"], loose["total"]);
}
