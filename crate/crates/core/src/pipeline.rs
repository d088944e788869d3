//! End-to-end wiring: ingest, artifact build, query execution, and
//! integrity verification.

use std::path::Path;

use crate::agent::{
    aggregate_evidence, build_reasoning_chain, estimate_confidence, plan, AggregatedEvidence,
    ConfidenceBand, QueryPlan, ReasoningChain, RetrievalMode,
};
use crate::answer::{generate_llm, generate_template, Answer, AnswerRequest};
use crate::chunk::{chunk_document, ChunkingConfig};
use crate::config::{EmbedderConfig, PipelineConfig};
use crate::embed::{Embedder, HashEmbedder};
use crate::error::{Error, Result};
use crate::extract::{build_chunk_record, ChunkRecord, CueSet, RecordStore};
use crate::graph::KnowledgeGraph;
use crate::index::VectorIndex;
use crate::ingest::{load_corpus, split_sentences, IngestIssue};
use crate::remote::{FallbackEmbedder, RemoteEmbedder};
use crate::retrieval::{EvidenceItem, Retriever};
use crate::vocab::{Category, Vocabulary};

/// Result of turning a corpus directory into chunk records.
#[derive(Debug)]
pub struct IngestOutput {
    pub records: Vec<ChunkRecord>,
    pub issues: Vec<IngestIssue>,
    pub document_count: usize,
}

/// Load, clean, segment, chunk, and extract a corpus directory.
pub fn ingest_corpus(
    corpus_dir: &Path,
    vocab: &Vocabulary,
    cues: &CueSet,
    chunking: &ChunkingConfig,
) -> Result<IngestOutput> {
    chunking.validate()?;
    let load = load_corpus(corpus_dir)?;
    let mut records = Vec::new();
    for document in &load.documents {
        let sentences = split_sentences(&document.cleaned_text, &document.doc_id);
        for chunk in chunk_document(&sentences, chunking)? {
            let (first, last) = chunk.sentence_span;
            records.push(build_chunk_record(
                &chunk,
                &sentences[first..=last],
                vocab,
                cues,
            ));
        }
    }
    Ok(IngestOutput {
        records,
        issues: load.issues,
        document_count: load.documents.len(),
    })
}

/// Load the vocabulary named in the config, or the builtin default.
pub fn load_vocab(config: &PipelineConfig) -> Result<Vocabulary> {
    match &config.paths.vocab_file {
        Some(path) => Vocabulary::load(path),
        None => Ok(Vocabulary::builtin_default()),
    }
}

/// Load the cue inventory named in the config, or the builtin default.
pub fn load_cues(config: &PipelineConfig) -> Result<CueSet> {
    match &config.paths.cues_file {
        Some(path) => CueSet::load(path),
        None => Ok(CueSet::builtin_default()),
    }
}

fn make_embedder(config: &PipelineConfig) -> Box<dyn Embedder> {
    match &config.embedder {
        EmbedderConfig::Builtin => Box::new(HashEmbedder),
        EmbedderConfig::Remote { endpoint, dim } => Box::new(FallbackEmbedder::new(
            RemoteEmbedder::new(endpoint.clone(), *dim),
            HashEmbedder,
        )),
    }
}

/// Everything a query needs, loaded once and immutable afterwards.
pub struct Pipeline {
    pub config: PipelineConfig,
    pub vocab: Vocabulary,
    pub cues: CueSet,
    pub records: RecordStore,
    pub graph: KnowledgeGraph,
    pub index: VectorIndex,
    embedder: Box<dyn Embedder>,
}

/// Everything produced for one query short of answer generation.
#[derive(Debug, Clone)]
pub struct QueryOutcome {
    pub plan: QueryPlan,
    pub items: Vec<EvidenceItem>,
    pub aggregated: AggregatedEvidence,
    pub chain: Option<ReasoningChain>,
    pub confidence: ConfidenceBand,
}

impl Pipeline {
    /// Load records, graph, and index per the config. Missing artifacts
    /// name the command that produces them.
    pub fn load(config: PipelineConfig) -> Result<Pipeline> {
        config.validate()?;
        let vocab = load_vocab(&config)?;
        let cues = load_cues(&config)?;
        let need = |path: &Path, producer: &str| {
            if path.exists() {
                Ok(())
            } else {
                Err(Error::MissingInput {
                    path: path.to_path_buf(),
                    producer: producer.to_string(),
                })
            }
        };
        need(&config.paths.records_file, "ingest")?;
        need(&config.paths.graph_file, "build")?;
        need(&config.paths.index_file, "build")?;

        let records = RecordStore::load(&config.paths.records_file)?;
        let graph = KnowledgeGraph::load(&config.paths.graph_file)?;
        let index = VectorIndex::load(&config.paths.index_file)?;
        let embedder = make_embedder(&config);
        if embedder.id() != index.embedder_id() {
            return Err(Error::EmbedderMismatch {
                index: index.embedder_id().to_string(),
                query: embedder.id().to_string(),
            });
        }
        Ok(Pipeline {
            config,
            vocab,
            cues,
            records,
            graph,
            index,
            embedder,
        })
    }

    /// Build a pipeline directly from in-memory records (tests, one-shot
    /// runs).
    pub fn from_records(config: PipelineConfig, records: Vec<ChunkRecord>) -> Result<Pipeline> {
        config.validate()?;
        let vocab = load_vocab(&config)?;
        let cues = load_cues(&config)?;
        let graph = KnowledgeGraph::build(&records);
        let embedder = make_embedder(&config);
        let index = VectorIndex::build(
            records
                .iter()
                .map(|r| (r.chunk.chunk_id.as_str(), r.chunk.text.as_str())),
            embedder.as_ref(),
        )?;
        Ok(Pipeline {
            config,
            vocab,
            cues,
            records: RecordStore::new(records)?,
            graph,
            index,
            embedder,
        })
    }

    pub fn retriever(&self) -> Result<Retriever<'_>> {
        Retriever::new(&self.vocab, &self.graph, &self.index, self.embedder.as_ref())
    }

    /// Plan, retrieve, aggregate, chain, and estimate confidence.
    pub fn run_query(
        &self,
        question: &str,
        mode_override: Option<RetrievalMode>,
        k_override: Option<usize>,
    ) -> Result<QueryOutcome> {
        let mut query_plan = plan(question, &self.config.retrieval);
        if let Some(mode) = mode_override {
            query_plan.mode = mode;
        }
        if let Some(k) = k_override {
            if k < 1 {
                return Err(Error::InvalidArgument("k must be >= 1".into()));
            }
            query_plan.k = k;
        }

        let retriever = self.retriever()?;
        let items = match query_plan.mode {
            RetrievalMode::Text => retriever.retrieve_text(question, query_plan.k)?,
            RetrievalMode::Graph => {
                retriever.retrieve_graph(question, query_plan.k, query_plan.depth)?
            }
            RetrievalMode::Hybrid => {
                let mut config = self.config.retrieval;
                config.k = query_plan.k;
                retriever.retrieve_hybrid(question, &config, query_plan.depth)?
            }
        };

        let aggregated = aggregate_evidence(&items, &self.records)?;
        let chain = build_reasoning_chain(&aggregated, &self.graph);
        let confidence = estimate_confidence(chain.as_ref(), &aggregated);
        Ok(QueryOutcome {
            plan: query_plan,
            items,
            aggregated,
            chain,
            confidence,
        })
    }

    /// Assemble the answer request for an outcome and generate the answer.
    pub fn answer(&self, outcome: &QueryOutcome, no_llm: bool) -> Result<Answer> {
        let evidence: Vec<(String, String)> = outcome
            .items
            .iter()
            .map(|item| {
                let record = self.records.get(&item.chunk_id).ok_or_else(|| {
                    Error::Integrity(format!(
                        "retrieved chunk `{}` not present in the record store",
                        item.chunk_id
                    ))
                })?;
                Ok((item.chunk_id.clone(), record.chunk.text.clone()))
            })
            .collect::<Result<_>>()?;
        let retained = Category::ALL
            .iter()
            .map(|&category| {
                (
                    category,
                    outcome.aggregated.retained_terms(category).to_vec(),
                )
            })
            .collect();
        let mut request = AnswerRequest::new(
            outcome.plan.query.clone(),
            evidence,
            outcome.chain.clone(),
            retained,
            outcome.confidence.clone(),
        );
        if let Some(generation) = &self.config.generation {
            request.temperature = generation.temperature;
            request.max_tokens = generation.max_tokens;
            if !no_llm {
                return Ok(generate_llm(&request, &generation.endpoint, &generation.fields));
            }
        }
        Ok(generate_template(&request))
    }
}

/// Cross-artifact referential integrity: graph evidence against records,
/// and index entries against records, both directions.
pub fn verify_artifacts(
    records: &RecordStore,
    graph: &KnowledgeGraph,
    index: &VectorIndex,
) -> Vec<String> {
    let mut violations = graph.violations(&|chunk_id| records.contains(chunk_id));
    for chunk_id in index.chunk_ids() {
        if !records.contains(chunk_id) {
            violations.push(format!("index entry `{chunk_id}` has no chunk record"));
        }
    }
    for record in records.iter() {
        if !index.contains(&record.chunk.chunk_id) {
            violations.push(format!(
                "chunk record `{}` missing from the index",
                record.chunk.chunk_id
            ));
        }
        for triple in &record.triples {
            let has = |canonical: &str| record.mentions.iter().any(|m| m.canonical == canonical);
            if !has(&triple.subject.1) || !has(&triple.object.1) {
                violations.push(format!(
                    "record `{}` has a triple endpoint without a mention",
                    record.chunk.chunk_id
                ));
            }
        }
    }
    violations
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::Band;
    use crate::answer::Generator;

    fn write_fixture_corpus(dir: &Path) {
        let docs = [
            ("power_keyhole", "High laser power leads to keyhole porosity. Excessive laser power induces keyhole instability."),
            ("keyhole_pores", "Keyhole instability results in porosity. Porosity was found near the melt track."),
            ("speed_lof", "High scan speed causes insufficient melting. Insufficient melting leads to lack of fusion."),
        ];
        for (name, text) in docs {
            std::fs::write(dir.join(format!("{name}.txt")), text).unwrap();
        }
    }

    fn config_for(dir: &Path) -> PipelineConfig {
        let mut config = PipelineConfig::default();
        config.paths.corpus_dir = dir.join("corpus");
        config.paths.records_file = dir.join("build/records.jsonl");
        config.paths.graph_file = dir.join("build/graph.json");
        config.paths.index_file = dir.join("build/index.bin");
        config
    }

    fn build_pipeline(dir: &Path) -> Pipeline {
        std::fs::create_dir_all(dir.join("corpus")).unwrap();
        std::fs::create_dir_all(dir.join("build")).unwrap();
        write_fixture_corpus(&dir.join("corpus"));
        let config = config_for(dir);
        let vocab = load_vocab(&config).unwrap();
        let cues = load_cues(&config).unwrap();
        let output = ingest_corpus(&config.paths.corpus_dir, &vocab, &cues, &config.chunking).unwrap();
        Pipeline::from_records(config, output.records).unwrap()
    }

    #[test]
    fn end_to_end_query_produces_chain_and_answer() {
        let dir = tempfile::tempdir().unwrap();
        let pipeline = build_pipeline(dir.path());
        let outcome = pipeline
            .run_query("Why does high laser power lead to keyhole porosity?", None, None)
            .unwrap();
        assert_eq!(outcome.plan.mode, RetrievalMode::Hybrid);
        assert!(!outcome.items.is_empty());
        let answer = pipeline.answer(&outcome, true).unwrap();
        assert_eq!(answer.generator, Generator::Template);
        assert!(!answer.text.is_empty());
        for citation in &answer.citations {
            assert!(outcome.items.iter().any(|i| &i.chunk_id == citation));
        }
    }

    #[test]
    fn refusal_on_no_evidence() {
        let dir = tempfile::tempdir().unwrap();
        let pipeline = build_pipeline(dir.path());
        let empty = QueryOutcome {
            plan: crate::agent::plan("anything", &pipeline.config.retrieval),
            items: vec![],
            aggregated: AggregatedEvidence::default(),
            chain: None,
            confidence: ConfidenceBand {
                band: Band::Low,
                rationale: "no evidence".into(),
            },
        };
        let answer = pipeline.answer(&empty, true).unwrap();
        assert_eq!(answer.text, crate::answer::REFUSAL_TEXT);
        assert!(answer.citations.is_empty());
    }

    #[test]
    fn missing_artifacts_name_producer() {
        let dir = tempfile::tempdir().unwrap();
        let config = config_for(dir.path());
        let Err(err) = Pipeline::load(config) else {
            panic!("load must fail without artifacts");
        };
        assert!(err.to_string().contains("ingest"), "{err}");
    }

    #[test]
    fn verify_passes_on_consistent_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        let pipeline = build_pipeline(dir.path());
        let violations = verify_artifacts(&pipeline.records, &pipeline.graph, &pipeline.index);
        assert!(violations.is_empty(), "{violations:?}");
    }

    #[test]
    fn verify_flags_dangling_graph_evidence() {
        let dir = tempfile::tempdir().unwrap();
        let pipeline = build_pipeline(dir.path());
        let mut graph = pipeline.graph.clone();
        graph.upsert_triple(
            &(Category::Parameter, "laser power".into()),
            crate::extract::Predicate::Causes,
            &(Category::Defect, "cracking".into()),
            "ghost::c7",
        );
        let violations = verify_artifacts(&pipeline.records, &graph, &pipeline.index);
        assert_eq!(violations.len(), 1);
        assert!(violations[0].contains("ghost::c7"));
    }
}
