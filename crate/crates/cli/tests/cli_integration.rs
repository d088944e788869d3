//! CLI behavior: exit codes, error wording, fallback paths, and file
//! outputs.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn workspace_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../..")
        .canonicalize()
        .unwrap()
}

fn kgrag() -> Command {
    Command::new(env!("CARGO_BIN_EXE_kgrag"))
}

fn write_config(dir: &Path, corpus: &Path, generation: Option<serde_json::Value>) -> PathBuf {
    let mut config = serde_json::json!({
        "paths": {
            "corpus_dir": corpus,
            "records_file": dir.join("records.jsonl"),
            "graph_file": dir.join("graph.json"),
            "index_file": dir.join("index.bin"),
        },
        "log_level": "warn",
    });
    if let Some(generation) = generation {
        config["generation"] = generation;
    }
    let path = dir.join("config.json");
    std::fs::write(&path, serde_json::to_string_pretty(&config).unwrap()).unwrap();
    path
}

fn fixture_corpus() -> PathBuf {
    workspace_root().join("fixtures/corpus")
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("spawn kgrag")
}

fn stdout(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

fn stderr(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).into_owned()
}

#[test]
fn ingest_on_empty_corpus_succeeds_with_empty_records() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("empty");
    std::fs::create_dir_all(&corpus).unwrap();
    let config = write_config(dir.path(), &corpus, None);
    let output = run(kgrag().args(["--config", config.to_str().unwrap(), "ingest"]));
    assert!(output.status.success(), "{}", stderr(&output));
    let records = std::fs::read_to_string(dir.path().join("records.jsonl")).unwrap();
    assert!(records.is_empty());
}

#[test]
fn query_before_ingest_names_the_producing_command() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), &fixture_corpus(), None);
    let output = run(kgrag().args([
        "--config",
        config.to_str().unwrap(),
        "query",
        "Why porosity?",
        "--no-llm",
    ]));
    assert!(!output.status.success());
    assert!(stderr(&output).contains("ingest"), "{}", stderr(&output));
}

#[test]
fn verify_detects_corrupted_evidence_and_names_the_edge() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), &fixture_corpus(), None);
    for sub in ["ingest", "build"] {
        let output = run(kgrag().args(["--config", config.to_str().unwrap(), sub]));
        assert!(output.status.success(), "{}", stderr(&output));
    }

    // Hand-corrupt one evidence chunk_id in the graph file.
    let graph_path = dir.path().join("graph.json");
    let graph = std::fs::read_to_string(&graph_path).unwrap();
    let corrupted = graph.replacen("keyhole_power::c0", "keyhole_power::c99", 1);
    assert_ne!(graph, corrupted, "expected evidence id not found");
    std::fs::write(&graph_path, corrupted).unwrap();

    let output = run(kgrag().args(["--config", config.to_str().unwrap(), "verify"]));
    assert!(!output.status.success(), "verify must fail");
    let report = stdout(&output);
    assert!(report.contains("keyhole_power::c99"), "{report}");
    // The first occurrence in file order sits on the keyhole instability
    // edge; the violation must name it.
    assert!(
        report.contains("keyhole instability -[causes]-> porosity"),
        "violation must name the edge: {report}"
    );
}

#[test]
fn export_graph_prints_the_graph_file() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), &fixture_corpus(), None);
    for sub in ["ingest", "build"] {
        run(kgrag().args(["--config", config.to_str().unwrap(), sub]));
    }
    let output = run(kgrag().args(["--config", config.to_str().unwrap(), "export-graph"]));
    assert!(output.status.success());
    let file = std::fs::read_to_string(dir.path().join("graph.json")).unwrap();
    assert_eq!(stdout(&output), file);
}

#[test]
fn mode_and_k_overrides_apply() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), &fixture_corpus(), None);
    for sub in ["ingest", "build"] {
        run(kgrag().args(["--config", config.to_str().unwrap(), sub]));
    }
    let output = run(kgrag().args([
        "--config",
        config.to_str().unwrap(),
        "query",
        "Why does high laser power lead to keyhole porosity in LPBF?",
        "--mode",
        "text",
        "--k",
        "2",
        "--no-llm",
    ]));
    assert!(output.status.success(), "{}", stderr(&output));
    let text = stdout(&output);
    assert!(text.contains("mode=text k=2"), "{text}");
    assert_eq!(text.matches("origin=Text").count(), 2, "{text}");
}

#[test]
fn unreachable_generation_endpoint_falls_back_to_template() {
    let dir = tempfile::tempdir().unwrap();
    let generation = serde_json::json!({
        "endpoint": {"url": "http://127.0.0.1:1/generate", "timeout_ms": 200}
    });
    let config = write_config(dir.path(), &fixture_corpus(), Some(generation));
    for sub in ["ingest", "build"] {
        run(kgrag().args(["--config", config.to_str().unwrap(), sub]));
    }
    // No --no-llm: the endpoint is tried, fails, and the template answers.
    let output = run(kgrag().args([
        "--config",
        config.to_str().unwrap(),
        "query",
        "Why does high laser power lead to keyhole porosity in LPBF?",
    ]));
    assert!(output.status.success(), "{}", stderr(&output));
    let text = stdout(&output);
    assert!(text.contains("Answer [Template]"), "{text}");
    assert!(text.contains("laser power → keyhole instability → porosity"), "{text}");
}

#[test]
fn jsonl_corpus_ingests_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus");
    std::fs::create_dir_all(&corpus).unwrap();
    std::fs::write(
        corpus.join("docs.jsonl"),
        concat!(
            "{\"doc_id\":\"j1\",\"text\":\"High laser power leads to keyhole porosity.\"}\n",
            "{\"doc_id\":\"j2\",\"text\":\"Keyhole instability results in porosity.\"}\n",
        ),
    )
    .unwrap();
    let config = write_config(dir.path(), &corpus, None);
    for sub in ["ingest", "build"] {
        let output = run(kgrag().args(["--config", config.to_str().unwrap(), sub]));
        assert!(output.status.success(), "{}", stderr(&output));
    }
    let records = std::fs::read_to_string(dir.path().join("records.jsonl")).unwrap();
    assert_eq!(records.lines().count(), 2);
    assert!(records.contains("\"j1::c0\""));
}

#[test]
fn custom_vocab_flag_is_honored() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus");
    std::fs::create_dir_all(&corpus).unwrap();
    std::fs::write(
        corpus.join("frob.txt"),
        "High frobnication pressure leads to widget pitting. Widget pitting was seen twice.",
    )
    .unwrap();
    // A vocabulary the builtin one knows nothing about.
    let vocab_path = dir.path().join("vocab.json");
    std::fs::write(
        &vocab_path,
        serde_json::json!({
            "parameter": {"frobnication pressure": []},
            "defect": {"widget pitting": ["pitting"]},
            "mechanism": {},
            "consequence": {}
        })
        .to_string(),
    )
    .unwrap();
    let config = write_config(dir.path(), &corpus, None);
    for sub in ["ingest", "build"] {
        let output = run(kgrag().args([
            "--config",
            config.to_str().unwrap(),
            "--vocab",
            vocab_path.to_str().unwrap(),
            sub,
        ]));
        assert!(output.status.success(), "{}", stderr(&output));
    }
    let graph = std::fs::read_to_string(dir.path().join("graph.json")).unwrap();
    assert!(graph.contains("frobnication pressure"), "{graph}");
    assert!(graph.contains("widget pitting"), "{graph}");
}

#[test]
fn invalid_config_field_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("config.json");
    std::fs::write(&path, r#"{"chunking": {"target_words": 10, "overlap_words": 50}}"#).unwrap();
    let output = run(kgrag().args(["--config", path.to_str().unwrap(), "ingest"]));
    assert!(!output.status.success());
    assert!(
        stderr(&output).contains("chunking.overlap_words"),
        "{}",
        stderr(&output)
    );
}

#[test]
fn eval_writes_report_files() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), &fixture_corpus(), None);
    for sub in ["ingest", "build"] {
        run(kgrag().args(["--config", config.to_str().unwrap(), sub]));
    }
    let benchmark = workspace_root().join("fixtures/benchmark.json");
    let out = dir.path().join("report");
    let output = run(kgrag().args([
        "--config",
        config.to_str().unwrap(),
        "eval",
        "--benchmark",
        benchmark.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--parallel",
    ]));
    assert!(output.status.success(), "{}", stderr(&output));
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(json["per_query"].as_array().unwrap().len(), 10);
    assert!(json["means"]["recall"].as_f64().unwrap() > 0.9);
    let table = std::fs::read_to_string(out.join("report.txt")).unwrap();
    assert!(table.lines().count() >= 12);
    assert!(stdout(&output).contains("Mean"));
}
