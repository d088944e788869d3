//! `kgrag` — build and query an evidence-linked knowledge graph over a
//! plain-text corpus.
//!
//! Commands mirror the pipeline stages: `ingest` turns a corpus directory
//! into chunk records, `build` derives the graph and semantic index,
//! `query` answers a question, `eval` runs a benchmark file, `verify`
//! checks cross-artifact integrity, and `export-graph` dumps the graph
//! JSON to stdout. Logs go to stderr; data goes to files or stdout.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};

use kgrag_core::eval::{load_benchmark, run_benchmark, BenchmarkOptions};
use kgrag_core::fsio::atomic_write;
use kgrag_core::pipeline::{ingest_corpus, load_cues, load_vocab, verify_artifacts, Pipeline};
use kgrag_core::{
    write_records, KnowledgeGraph, PipelineConfig, RetrievalMode, VectorIndex,
};

#[derive(Parser)]
#[command(name = "kgrag", version, about = "Knowledge-graph retrieval over process-defect literature")]
struct Cli {
    /// Pipeline config file (JSON). Defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Vocabulary file override (JSON {category: {canonical: [synonyms]}}).
    #[arg(long, global = true)]
    vocab: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load, clean, segment, chunk, and extract the corpus into records.
    Ingest {
        /// Corpus directory override.
        #[arg(long)]
        corpus: Option<PathBuf>,
    },
    /// Build the knowledge graph and the semantic index from records.
    Build,
    /// Answer a question over the built artifacts.
    Query {
        question: String,
        /// Retrieval mode override: text, graph, or hybrid.
        #[arg(long)]
        mode: Option<String>,
        /// Number of evidence chunks to retrieve.
        #[arg(long)]
        k: Option<usize>,
        /// Skip the generation endpoint and use the deterministic template.
        #[arg(long)]
        no_llm: bool,
    },
    /// Run a benchmark file and write report.json / report.txt.
    Eval {
        #[arg(long)]
        benchmark: PathBuf,
        /// Output directory for the report files.
        #[arg(long)]
        out: PathBuf,
        /// Run queries concurrently (latency still reported per query).
        #[arg(long)]
        parallel: bool,
        /// Report latency as 0.0 so report files are byte-reproducible.
        #[arg(long)]
        fixed_latency: bool,
    },
    /// Check referential integrity between records, graph, and index.
    Verify,
    /// Print the graph JSON to stdout.
    ExportGraph,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}

fn load_config(cli: &Cli) -> anyhow::Result<PipelineConfig> {
    let mut config = match &cli.config {
        Some(path) => PipelineConfig::load(path)
            .with_context(|| format!("loading config {}", path.display()))?,
        None => PipelineConfig::default(),
    };
    if let Some(vocab) = &cli.vocab {
        config.paths.vocab_file = Some(vocab.clone());
    }
    Ok(config)
}

fn init_logging(config: &PipelineConfig) {
    let level = config.log_level.as_deref().unwrap_or("info");
    let env = env_logger::Env::default().default_filter_or(level);
    let _ = env_logger::Builder::from_env(env)
        .format_timestamp(None)
        .try_init();
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    let mut config = load_config(&cli)?;

    match cli.command {
        Command::Ingest { corpus } => {
            if let Some(dir) = corpus {
                config.paths.corpus_dir = dir;
            }
            init_logging(&config);
            config.validate()?;
            let vocab = load_vocab(&config)?;
            let cues = load_cues(&config)?;
            let output = ingest_corpus(&config.paths.corpus_dir, &vocab, &cues, &config.chunking)?;
            for issue in &output.issues {
                log::warn!("skipped {}: {}", issue.source, issue.message);
            }
            if output.records.is_empty() {
                log::warn!(
                    "no records produced from {}",
                    config.paths.corpus_dir.display()
                );
            }
            if let Some(parent) = config.paths.records_file.parent() {
                std::fs::create_dir_all(parent)
                    .with_context(|| format!("creating {}", parent.display()))?;
            }
            write_records(&config.paths.records_file, &output.records)?;
            log::info!(
                "ingested {} documents into {} records -> {}",
                output.document_count,
                output.records.len(),
                config.paths.records_file.display()
            );
            Ok(ExitCode::SUCCESS)
        }

        Command::Build => {
            init_logging(&config);
            config.validate()?;
            if !config.paths.records_file.exists() {
                bail!(
                    "missing records file {}; run `ingest` first",
                    config.paths.records_file.display()
                );
            }
            let records = kgrag_core::read_records(&config.paths.records_file)?;
            let graph = KnowledgeGraph::build(&records);
            for path in [&config.paths.graph_file, &config.paths.index_file] {
                if let Some(parent) = path.parent() {
                    std::fs::create_dir_all(parent)
                        .with_context(|| format!("creating {}", parent.display()))?;
                }
            }
            graph.save(&config.paths.graph_file)?;
            let embedder = kgrag_core::HashEmbedder;
            let index = VectorIndex::build(
                records
                    .iter()
                    .map(|r| (r.chunk.chunk_id.as_str(), r.chunk.text.as_str())),
                &embedder,
            )?;
            index.save(&config.paths.index_file)?;
            log::info!(
                "built graph ({} nodes, {} edges) and index ({} vectors)",
                graph.node_count(),
                graph.edge_count(),
                index.len()
            );
            Ok(ExitCode::SUCCESS)
        }

        Command::Query {
            question,
            mode,
            k,
            no_llm,
        } => {
            init_logging(&config);
            let mode = mode
                .map(|m| m.parse::<RetrievalMode>())
                .transpose()?;
            let pipeline = Pipeline::load(config)?;
            let outcome = pipeline.run_query(&question, mode, k)?;
            let answer = pipeline.answer(&outcome, no_llm)?;

            let stdout = std::io::stdout();
            let mut out = stdout.lock();
            writeln!(out, "Question: {question}")?;
            writeln!(
                out,
                "Plan: type={} mode={} k={} depth={}",
                outcome.plan.query_type, outcome.plan.mode, outcome.plan.k, outcome.plan.depth
            )?;
            writeln!(out)?;
            writeln!(out, "Evidence:")?;
            if outcome.items.is_empty() {
                writeln!(out, "  (none)")?;
            }
            for item in &outcome.items {
                writeln!(
                    out,
                    "  {:<24} score={:.4} origin={:?}",
                    item.chunk_id, item.score, item.origin
                )?;
            }
            writeln!(out)?;
            match &outcome.chain {
                Some(chain) => writeln!(
                    out,
                    "Reasoning chain ({:?}): {}",
                    chain.source,
                    chain.render()
                )?,
                None => writeln!(out, "Reasoning chain: (none)")?,
            }
            writeln!(
                out,
                "Confidence: {} ({})",
                answer.confidence.band, answer.confidence.rationale
            )?;
            writeln!(out)?;
            writeln!(out, "Answer [{:?}]:", answer.generator)?;
            writeln!(out, "{}", answer.text)?;
            if !answer.citations.is_empty() {
                writeln!(out, "Citations: {}", answer.citations.join(", "))?;
            }
            Ok(ExitCode::SUCCESS)
        }

        Command::Eval {
            benchmark,
            out,
            parallel,
            fixed_latency,
        } => {
            init_logging(&config);
            let pipeline = Pipeline::load(config)?;
            let items = load_benchmark(&benchmark, &pipeline.vocab)?;
            let report = run_benchmark(
                &items,
                &pipeline,
                BenchmarkOptions {
                    parallel,
                    fixed_latency,
                },
            )?;
            std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
            atomic_write(&out.join("report.json"), report.to_json()?.as_bytes())?;
            let table = report.render_table();
            atomic_write(&out.join("report.txt"), table.as_bytes())?;
            print!("{table}");
            Ok(ExitCode::SUCCESS)
        }

        Command::Verify => {
            init_logging(&config);
            let pipeline = Pipeline::load(config)?;
            let violations = verify_artifacts(&pipeline.records, &pipeline.graph, &pipeline.index);
            if violations.is_empty() {
                println!(
                    "ok: {} records, {} nodes, {} edges, {} vectors — no violations",
                    pipeline.records.len(),
                    pipeline.graph.node_count(),
                    pipeline.graph.edge_count(),
                    pipeline.index.len()
                );
                Ok(ExitCode::SUCCESS)
            } else {
                for violation in &violations {
                    println!("violation: {violation}");
                }
                eprintln!("verify failed with {} violation(s)", violations.len());
                Ok(ExitCode::FAILURE)
            }
        }

        Command::ExportGraph => {
            init_logging(&config);
            if !config.paths.graph_file.exists() {
                bail!(
                    "missing graph file {}; run `build` first",
                    config.paths.graph_file.display()
                );
            }
            let raw = std::fs::read_to_string(&config.paths.graph_file)?;
            print!("{raw}");
            Ok(ExitCode::SUCCESS)
        }
    }
}
