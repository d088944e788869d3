//! Cross-module flow: ingest a small corpus, persist every artifact,
//! reload, and query — checking the persisted forms behave exactly like
//! the in-memory ones.

use kgrag_core::embed::HashEmbedder;
use kgrag_core::extract::{read_records, write_records, RecordStore};
use kgrag_core::graph::KnowledgeGraph;
use kgrag_core::index::VectorIndex;
use kgrag_core::pipeline::{ingest_corpus, verify_artifacts};
use kgrag_core::retrieval::{RetrievalConfig, Retriever};
use kgrag_core::{ChunkingConfig, CueSet, Vocabulary};

#[test]
fn artifacts_round_trip_and_query_identically() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus");
    std::fs::create_dir_all(&corpus).unwrap();
    std::fs::write(
        corpus.join("a.txt"),
        "High laser power leads to keyhole porosity. Excessive laser power induces keyhole instability.",
    )
    .unwrap();
    std::fs::write(
        corpus.join("b.jsonl"),
        "{\"doc_id\":\"b\",\"text\":\"Keyhole instability results in porosity. Porosity appeared near the melt track.\"}\n",
    )
    .unwrap();

    let vocab = Vocabulary::builtin_default();
    let cues = CueSet::builtin_default();
    let output = ingest_corpus(&corpus, &vocab, &cues, &ChunkingConfig::default()).unwrap();
    assert_eq!(output.document_count, 2);
    assert!(output.issues.is_empty());

    // Records JSONL round trip.
    let records_path = dir.path().join("records.jsonl");
    write_records(&records_path, &output.records).unwrap();
    let reloaded = read_records(&records_path).unwrap();
    assert_eq!(reloaded, output.records);

    // Graph and index round trips.
    let graph = KnowledgeGraph::build(&output.records);
    let graph_path = dir.path().join("graph.json");
    graph.save(&graph_path).unwrap();
    let graph2 = KnowledgeGraph::load(&graph_path).unwrap();
    assert_eq!(graph, graph2);

    let index = VectorIndex::build(
        output
            .records
            .iter()
            .map(|r| (r.chunk.chunk_id.as_str(), r.chunk.text.as_str())),
        &HashEmbedder,
    )
    .unwrap();
    let index_path = dir.path().join("index.bin");
    index.save(&index_path).unwrap();
    let index2 = VectorIndex::load(&index_path).unwrap();
    assert_eq!(index, index2);

    let store = RecordStore::new(output.records).unwrap();
    assert!(verify_artifacts(&store, &graph2, &index2).is_empty());

    // Queries over reloaded artifacts match queries over the originals.
    let r1 = Retriever::new(&vocab, &graph, &index, &HashEmbedder).unwrap();
    let r2 = Retriever::new(&vocab, &graph2, &index2, &HashEmbedder).unwrap();
    let config = RetrievalConfig { k: 3, ..Default::default() };
    for query in [
        "Why does laser power cause porosity?",
        "keyhole instability",
        "something entirely unrelated to the corpus",
    ] {
        assert_eq!(
            r1.retrieve_hybrid(query, &config, 2).unwrap(),
            r2.retrieve_hybrid(query, &config, 2).unwrap()
        );
        assert_eq!(
            r1.retrieve_graph(query, 3, 1).unwrap(),
            r2.retrieve_graph(query, 3, 1).unwrap()
        );
    }
}
