//! Text, graph-assisted, and hybrid retrieval.
//!
//! The graph pass normalizes the query against the vocabulary, walks the
//! neighborhood of the matched nodes, and re-scores the chunks referenced
//! by those edges with query cosine. When no node or candidate exists it
//! reverts to plain text retrieval. Hybrid retrieval merges both passes
//! with a convex weighted sum that favors graph-derived evidence.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use serde::{Deserialize, Serialize};

use crate::embed::{Embedder, EmbeddingVector};
use crate::error::{Error, Result};
use crate::graph::{Direction, KnowledgeGraph};
use crate::index::VectorIndex;
use crate::vocab::{normalize_surface, Vocabulary};

/// Where a retrieved chunk came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    Text,
    Graph,
    Both,
}

/// A scored chunk hit. `matched_nodes` is empty exactly when the hit is
/// purely text-derived.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvidenceItem {
    pub chunk_id: String,
    pub score: f64,
    pub origin: Origin,
    pub matched_nodes: Vec<String>,
}

/// Retrieval weights and depths. The shipped defaults prioritize
/// graph-derived evidence (`w_graph > w_text`); `validate` enforces that
/// for configs loaded from files, while tests may construct degenerate
/// weights directly.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct RetrievalConfig {
    pub k: usize,
    pub w_graph: f64,
    pub w_text: f64,
    pub depth_default: usize,
    pub depth_explanation: usize,
}

impl Default for RetrievalConfig {
    fn default() -> Self {
        RetrievalConfig {
            k: 5,
            w_graph: 0.6,
            w_text: 0.4,
            depth_default: 1,
            depth_explanation: 2,
        }
    }
}

impl RetrievalConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k < 1 {
            return Err(Error::config("retrieval.k", "k must be >= 1"));
        }
        if (self.w_graph + self.w_text - 1.0).abs() > 1e-9 {
            return Err(Error::config(
                "retrieval.w_graph",
                format!("weights must sum to 1, got {}", self.w_graph + self.w_text),
            ));
        }
        if !(0.0..=1.0).contains(&self.w_graph) {
            return Err(Error::config("retrieval.w_graph", "must be in [0, 1]"));
        }
        if self.w_graph <= self.w_text {
            return Err(Error::config(
                "retrieval.w_graph",
                "graph weight must exceed text weight (graph evidence is prioritized)",
            ));
        }
        if self.depth_default < 1 || self.depth_explanation < 1 {
            return Err(Error::config("retrieval.depth", "depths must be >= 1"));
        }
        Ok(())
    }
}

/// The graph pass before merging: which nodes matched and the scored
/// candidate chunks. `None` means no vocabulary match or no candidate
/// evidence (the fallback condition).
#[derive(Debug, Clone)]
pub struct GraphPass {
    pub matched_nodes: Vec<String>,
    pub items: Vec<EvidenceItem>,
}

/// Read-only retrieval facade over an immutable graph, index, and
/// vocabulary.
pub struct Retriever<'a> {
    pub vocab: &'a Vocabulary,
    pub graph: &'a KnowledgeGraph,
    pub index: &'a VectorIndex,
    pub embedder: &'a dyn Embedder,
}

impl<'a> Retriever<'a> {
    pub fn new(
        vocab: &'a Vocabulary,
        graph: &'a KnowledgeGraph,
        index: &'a VectorIndex,
        embedder: &'a dyn Embedder,
    ) -> Result<Retriever<'a>> {
        if embedder.id() != index.embedder_id() {
            return Err(Error::EmbedderMismatch {
                index: index.embedder_id().to_string(),
                query: embedder.id().to_string(),
            });
        }
        Ok(Retriever {
            vocab,
            graph,
            index,
            embedder,
        })
    }

    fn embed_query(&self, query: &str) -> Result<Option<EmbeddingVector>> {
        if normalize_surface(query).is_empty() {
            return Err(Error::InvalidArgument("empty query".into()));
        }
        let vector = self.embedder.embed(query)?;
        // Zero-vector queries carry no signal; signal "no evidence".
        Ok(if vector.is_zero() { None } else { Some(vector) })
    }

    /// Pure semantic top-k.
    pub fn retrieve_text(&self, query: &str, k: usize) -> Result<Vec<EvidenceItem>> {
        let Some(vector) = self.embed_query(query)? else {
            return Ok(Vec::new());
        };
        let hits = self.index.search(&vector, k)?;
        let mut items: Vec<EvidenceItem> = hits
            .into_iter()
            .map(|(chunk_id, score)| EvidenceItem {
                chunk_id,
                score: score.clamp(0.0, 1.0),
                origin: Origin::Text,
                matched_nodes: Vec::new(),
            })
            .collect();
        // Clamping can flatten negative cosines to 0; re-sort so reported
        // scores and ranking always agree.
        sort_items(&mut items);
        Ok(items)
    }

    /// Graph node matches for a query: vocabulary terms found in the query
    /// that exist as graph nodes, ascending.
    pub fn match_query_nodes(&self, query: &str) -> Vec<String> {
        let normalized = normalize_surface(query);
        let mut nodes: BTreeSet<String> = BTreeSet::new();
        for (_, _, _, canonical) in self.vocab.scan_text(&normalized) {
            if self.graph.contains_node(&canonical) {
                nodes.insert(canonical);
            }
        }
        nodes.into_iter().collect()
    }

    /// The graph-constrained scoring pass. Returns `None` when there is no
    /// node match or no candidate chunk.
    pub fn graph_pass(&self, query: &str, k: usize, depth: usize) -> Result<Option<GraphPass>> {
        let matched_nodes = self.match_query_nodes(query);
        if matched_nodes.is_empty() {
            return Ok(None);
        }
        let mut candidates: HashSet<String> = HashSet::new();
        for node in &matched_nodes {
            let sub = self.graph.neighbors(node, depth, Direction::Both);
            for edge in sub.edges() {
                candidates.extend(edge.evidence);
            }
        }
        // Evidence may reference chunks absent from the index only if the
        // artifacts are inconsistent; verify catches that, retrieval just
        // scores what it can.
        candidates.retain(|id| self.index.contains(id));
        if candidates.is_empty() {
            return Ok(None);
        }
        let Some(vector) = self.embed_query(query)? else {
            return Ok(None);
        };
        let hits = self.index.search_subset(&vector, k, &candidates)?;
        let mut items: Vec<EvidenceItem> = hits
            .into_iter()
            .map(|(chunk_id, score)| EvidenceItem {
                chunk_id,
                score: score.clamp(0.0, 1.0),
                origin: Origin::Graph,
                matched_nodes: matched_nodes.clone(),
            })
            .collect();
        sort_items(&mut items);
        Ok(Some(GraphPass {
            matched_nodes,
            items,
        }))
    }

    /// Graph-assisted retrieval with text fallback.
    pub fn retrieve_graph(&self, query: &str, k: usize, depth: usize) -> Result<Vec<EvidenceItem>> {
        match self.graph_pass(query, k, depth)? {
            Some(pass) => Ok(pass.items),
            None => self.retrieve_text(query, k),
        }
    }

    /// Weighted merge of the graph pass (fallback disabled) and the text
    /// pass.
    pub fn retrieve_hybrid(
        &self,
        query: &str,
        config: &RetrievalConfig,
        depth: usize,
    ) -> Result<Vec<EvidenceItem>> {
        let graph_items = self
            .graph_pass(query, config.k, depth)?
            .map(|p| p.items)
            .unwrap_or_default();
        let text_items = self.retrieve_text(query, config.k)?;
        Ok(merge_passes(&graph_items, &text_items, config))
    }
}

fn sort_items(items: &mut [EvidenceItem]) {
    items.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.chunk_id.cmp(&b.chunk_id)));
}

/// Merge per-chunk scores as `w_graph * g + w_text * s` and keep the top k
/// by (score desc, chunk_id asc).
pub fn merge_passes(
    graph_items: &[EvidenceItem],
    text_items: &[EvidenceItem],
    config: &RetrievalConfig,
) -> Vec<EvidenceItem> {
    #[derive(Default)]
    struct Partial {
        graph: Option<f64>,
        text: Option<f64>,
        nodes: Vec<String>,
    }
    let mut merged: BTreeMap<String, Partial> = BTreeMap::new();
    for item in graph_items {
        let slot = merged.entry(item.chunk_id.clone()).or_default();
        slot.graph = Some(item.score);
        slot.nodes = item.matched_nodes.clone();
    }
    for item in text_items {
        merged.entry(item.chunk_id.clone()).or_default().text = Some(item.score);
    }
    let mut items: Vec<EvidenceItem> = merged
        .into_iter()
        .map(|(chunk_id, partial)| {
            let g = partial.graph.unwrap_or(0.0);
            let s = partial.text.unwrap_or(0.0);
            let origin = match (partial.graph.is_some(), partial.text.is_some()) {
                (true, true) => Origin::Both,
                (true, false) => Origin::Graph,
                _ => Origin::Text,
            };
            EvidenceItem {
                chunk_id,
                score: config.w_graph * g + config.w_text * s,
                origin,
                matched_nodes: partial.nodes,
            }
        })
        .collect();
    sort_items(&mut items);
    items.truncate(config.k);
    items
}
