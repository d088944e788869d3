//! Literature-grounded knowledge-graph retrieval for process-defect
//! reasoning.
//!
//! The pipeline turns a plain-text corpus into chunk records (overlapping
//! sentence-aligned segments with extracted entities and relation triples),
//! folds the triples into an evidence-linked directed graph, embeds the
//! chunks into a deterministic semantic index, and answers queries with
//! text, graph-assisted, or hybrid retrieval under a lightweight agent
//! layer (query classification, evidence aggregation, reasoning chains,
//! confidence bands). An evaluation harness reports per-query and mean
//! precision / recall / F1 / accuracy / latency.

pub mod agent;
pub mod answer;
pub mod chunk;
pub mod config;
pub mod embed;
pub mod error;
pub mod eval;
pub mod extract;
pub mod fsio;
pub mod graph;
pub mod index;
pub mod ingest;
mod phrase;
pub mod pipeline;
pub mod remote;
pub mod retrieval;
pub mod vocab;

pub use agent::{
    aggregate_evidence, build_reasoning_chain, classify_query, estimate_confidence, plan,
    AggregatedEvidence, Band, ChainSource, ConfidenceBand, QueryPlan, QueryType, ReasoningChain,
    RetrievalMode,
};
pub use answer::{generate_llm, generate_template, render_prompt, Answer, AnswerRequest, Generator};
pub use chunk::{chunk_document, Chunk, ChunkingConfig};
pub use config::{EmbedderConfig, GenerationConfig, PathsConfig, PipelineConfig};
pub use embed::{Embedder, EmbeddingVector, HashEmbedder, EMBED_DIM};
pub use error::{Error, Result};
pub use eval::{
    compute_label_metrics, load_benchmark, run_benchmark, BenchmarkItem, BenchmarkOptions,
    BenchmarkReport, QueryMetrics, QueryRow,
};
pub use extract::{
    build_chunk_record, extract_relations, read_records, write_records, ChunkRecord, CueSet,
    Predicate, RecordStore, RelationTriple,
};
pub use graph::{Direction, Edge, GraphPath, KnowledgeGraph};
pub use index::VectorIndex;
pub use ingest::{clean_text, load_corpus, split_sentences, Document, Sentence};
pub use pipeline::{ingest_corpus, verify_artifacts, Pipeline, QueryOutcome};
pub use retrieval::{merge_passes, EvidenceItem, Origin, RetrievalConfig, Retriever};
pub use vocab::{Category, EntityMention, Vocabulary};
