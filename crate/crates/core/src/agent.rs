//! Query coordination: classification, strategy selection, evidence
//! aggregation, reasoning-chain construction, and confidence estimation.
//!
//! Everything here is a pure function over retrieval output, so query
//! handling stays deterministic and testable. Labels are only retained
//! when at least two distinct retrieved chunks support them.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extract::RecordStore;
use crate::graph::KnowledgeGraph;
use crate::retrieval::{EvidenceItem, RetrievalConfig};
use crate::vocab::Category;

/// Query categories recognized by the cue-rule classifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QueryType {
    Lookup,
    Comparison,
    Explanation,
    General,
}

impl QueryType {
    pub fn as_str(&self) -> &'static str {
        match self {
            QueryType::Lookup => "lookup",
            QueryType::Comparison => "comparison",
            QueryType::Explanation => "explanation",
            QueryType::General => "general",
        }
    }
}

impl fmt::Display for QueryType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for QueryType {
    type Err = Error;
    fn from_str(s: &str) -> Result<QueryType> {
        match s.trim().to_lowercase().as_str() {
            "lookup" => Ok(QueryType::Lookup),
            "comparison" => Ok(QueryType::Comparison),
            "explanation" => Ok(QueryType::Explanation),
            "general" => Ok(QueryType::General),
            other => Err(Error::InvalidArgument(format!("unknown query type `{other}`"))),
        }
    }
}

/// Retrieval mode chosen for a query.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RetrievalMode {
    Text,
    Graph,
    Hybrid,
}

impl fmt::Display for RetrievalMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RetrievalMode::Text => "text",
            RetrievalMode::Graph => "graph",
            RetrievalMode::Hybrid => "hybrid",
        })
    }
}

impl std::str::FromStr for RetrievalMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<RetrievalMode> {
        match s.trim().to_lowercase().as_str() {
            "text" => Ok(RetrievalMode::Text),
            "graph" => Ok(RetrievalMode::Graph),
            "hybrid" => Ok(RetrievalMode::Hybrid),
            other => Err(Error::InvalidArgument(format!("unknown mode `{other}`"))),
        }
    }
}

/// The resolved strategy for one query.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryPlan {
    pub query: String,
    pub query_type: QueryType,
    pub mode: RetrievalMode,
    pub k: usize,
    pub depth: usize,
}

/// First-match-wins cue rules, checked in the order comparison,
/// explanation, lookup.
pub fn classify_query(query: &str) -> QueryType {
    let q = query.trim().to_lowercase();
    if ["compare", "versus", " vs ", "difference between"]
        .iter()
        .any(|cue| q.contains(cue))
    {
        return QueryType::Comparison;
    }
    if q.starts_with("why") || q.starts_with("how") || q.contains("explain") || q.contains("mechanism")
    {
        return QueryType::Explanation;
    }
    if ["what", "which", "list", "name"].iter().any(|cue| q.starts_with(cue)) {
        return QueryType::Lookup;
    }
    QueryType::General
}

/// Map a classified query onto mode, k, and traversal depth.
pub fn plan(query: &str, config: &RetrievalConfig) -> QueryPlan {
    let query_type = classify_query(query);
    let (mode, depth) = match query_type {
        QueryType::Explanation => (RetrievalMode::Hybrid, config.depth_explanation),
        QueryType::Comparison => (RetrievalMode::Hybrid, config.depth_default),
        QueryType::Lookup => (RetrievalMode::Graph, config.depth_default),
        QueryType::General => (RetrievalMode::Text, config.depth_default),
    };
    QueryPlan {
        query: query.to_string(),
        query_type,
        mode,
        k: config.k,
        depth,
    }
}

/// Per-category label statistics over the retrieved chunks.
///
/// `counts` counts distinct supporting chunks per canonical; `retained`
/// keeps only canonicals with at least two, ordered by (count desc,
/// canonical asc); `support` records which chunks back each canonical.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct AggregatedEvidence {
    pub counts: BTreeMap<Category, BTreeMap<String, usize>>,
    pub retained: BTreeMap<Category, Vec<String>>,
    pub support: BTreeMap<Category, BTreeMap<String, BTreeSet<String>>>,
}

impl AggregatedEvidence {
    pub fn retained_terms(&self, category: Category) -> &[String] {
        self.retained.get(&category).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Highest-count retained canonical of a category, with its count.
    pub fn top_retained(&self, category: Category) -> Option<(&str, usize)> {
        let term = self.retained.get(&category)?.first()?;
        Some((term.as_str(), self.counts[&category][term]))
    }
}

/// Count distinct supporting chunks per canonical and retain those with
/// two or more. Unresolvable chunk ids are a fatal integrity error.
pub fn aggregate_evidence(items: &[EvidenceItem], records: &RecordStore) -> Result<AggregatedEvidence> {
    let mut agg = AggregatedEvidence::default();
    for item in items {
        let record = records.get(&item.chunk_id).ok_or_else(|| {
            Error::Integrity(format!(
                "retrieved chunk `{}` not present in the record store",
                item.chunk_id
            ))
        })?;
        for category in Category::ALL {
            for canonical in record.terms(category) {
                agg.support
                    .entry(category)
                    .or_default()
                    .entry(canonical.clone())
                    .or_default()
                    .insert(item.chunk_id.clone());
            }
        }
    }
    for (category, terms) in &agg.support {
        let counts = agg.counts.entry(*category).or_default();
        for (canonical, chunks) in terms {
            counts.insert(canonical.clone(), chunks.len());
        }
        let mut retained: Vec<String> = terms
            .iter()
            .filter(|(_, chunks)| chunks.len() >= 2)
            .map(|(canonical, _)| canonical.clone())
            .collect();
        retained.sort_by(|a, b| {
            terms[b]
                .len()
                .cmp(&terms[a].len())
                .then_with(|| a.cmp(b))
        });
        agg.retained.insert(*category, retained);
    }
    Ok(agg)
}

/// How a reasoning chain was built.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChainSource {
    GraphPath,
    Frequency,
}

/// An ordered parameter (→ mechanism) → defect pathway.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReasoningChain {
    pub nodes: Vec<(Category, String)>,
    pub source: ChainSource,
    pub supporting_chunks: Vec<String>,
}

impl ReasoningChain {
    /// Render as `a → b → c`.
    pub fn render(&self) -> String {
        self.nodes
            .iter()
            .map(|(_, canonical)| canonical.as_str())
            .collect::<Vec<_>>()
            .join(" → ")
    }
}

/// Build a chain from the top retained parameter and defect: prefer a
/// graph path between them, fall back to a frequency chain through the top
/// retained mechanism.
pub fn build_reasoning_chain(
    agg: &AggregatedEvidence,
    graph: &KnowledgeGraph,
) -> Option<ReasoningChain> {
    let (parameter, _) = agg.top_retained(Category::Parameter)?;
    let (defect, _) = agg.top_retained(Category::Defect)?;

    let paths = graph.find_paths(parameter, defect, 3);
    if let Some(best) = paths.first() {
        let mut supporting: BTreeSet<String> = BTreeSet::new();
        for edge in &best.edges {
            supporting.extend(edge.evidence.iter().cloned());
        }
        let nodes = best
            .nodes
            .iter()
            .map(|id| {
                let category = graph.node_category(id).expect("path nodes exist");
                (category, id.clone())
            })
            .collect();
        return Some(ReasoningChain {
            nodes,
            source: ChainSource::GraphPath,
            supporting_chunks: supporting.into_iter().collect(),
        });
    }

    let mut nodes = vec![(Category::Parameter, parameter.to_string())];
    let mut supporting: BTreeSet<String> = BTreeSet::new();
    let extend_support = |category: Category, term: &str, set: &mut BTreeSet<String>| {
        if let Some(chunks) = agg.support.get(&category).and_then(|m| m.get(term)) {
            set.extend(chunks.iter().cloned());
        }
    };
    extend_support(Category::Parameter, parameter, &mut supporting);
    if let Some((mechanism, _)) = agg.top_retained(Category::Mechanism) {
        nodes.push((Category::Mechanism, mechanism.to_string()));
        extend_support(Category::Mechanism, mechanism, &mut supporting);
    }
    nodes.push((Category::Defect, defect.to_string()));
    extend_support(Category::Defect, defect, &mut supporting);
    Some(ReasoningChain {
        nodes,
        source: ChainSource::Frequency,
        supporting_chunks: supporting.into_iter().collect(),
    })
}

/// Confidence bands derived purely from evidence statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Band {
    Low,
    Medium,
    High,
}

impl fmt::Display for Band {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Band::Low => "low",
            Band::Medium => "medium",
            Band::High => "high",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfidenceBand {
    pub band: Band,
    pub rationale: String,
}

/// High: graph-path chain with the top defect in 3+ chunks. Medium: any
/// chain with the top defect in 2+ chunks. Low otherwise.
pub fn estimate_confidence(chain: Option<&ReasoningChain>, agg: &AggregatedEvidence) -> ConfidenceBand {
    let top_defect_count = agg
        .top_retained(Category::Defect)
        .map(|(_, count)| count)
        .unwrap_or(0);
    match chain {
        Some(c) if c.source == ChainSource::GraphPath && top_defect_count >= 3 => ConfidenceBand {
            band: Band::High,
            rationale: format!(
                "graph-path chain with top defect supported by {top_defect_count} chunks"
            ),
        },
        Some(c) if top_defect_count >= 2 => ConfidenceBand {
            band: Band::Medium,
            rationale: format!(
                "{} chain with top defect supported by {top_defect_count} chunks",
                match c.source {
                    ChainSource::GraphPath => "graph-path",
                    ChainSource::Frequency => "frequency",
                }
            ),
        },
        _ => ConfidenceBand {
            band: Band::Low,
            rationale: "no reasoning chain could be constructed".into(),
        },
    }
}
