//! Evidence-linked directed knowledge graph.
//!
//! Nodes are canonical entities; an edge `(src, dst, predicate)` carries an
//! occurrence weight (one per extraction event) and the set of chunk ids
//! whose text supports it. Weight counts events while evidence deduplicates
//! chunks, so `weight >= |evidence|` always holds.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extract::{ChunkRecord, Predicate};
use crate::vocab::Category;

/// Traversal direction for neighborhood queries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Out,
    In,
    Both,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct EdgeData {
    weight: u64,
    evidence: BTreeSet<String>,
}

/// A materialized edge as exposed by queries and the JSON file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub src: String,
    pub dst: String,
    pub predicate: Predicate,
    pub weight: u64,
    pub evidence: Vec<String>,
}

/// A simple directed path between two nodes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GraphPath {
    pub nodes: Vec<String>,
    pub edges: Vec<Edge>,
    pub total_weight: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KnowledgeGraph {
    nodes: BTreeMap<String, Category>,
    edges: BTreeMap<(String, String, Predicate), EdgeData>,
}

#[derive(Serialize, Deserialize)]
struct NodeRow {
    id: String,
    category: Category,
}

#[derive(Serialize, Deserialize)]
struct GraphFile {
    nodes: Vec<NodeRow>,
    edges: Vec<Edge>,
}

impl KnowledgeGraph {
    pub fn new() -> Self {
        Self::default()
    }

    /// Fold extracted triples into nodes and weighted edges.
    pub fn build(records: &[ChunkRecord]) -> KnowledgeGraph {
        let mut graph = KnowledgeGraph::new();
        for record in records {
            for triple in &record.triples {
                graph.upsert_triple(
                    &triple.subject,
                    triple.predicate,
                    &triple.object,
                    &triple.chunk_id,
                );
            }
        }
        graph
    }

    /// One extraction event: bump the edge weight and aggregate the chunk id.
    pub fn upsert_triple(
        &mut self,
        subject: &(Category, String),
        predicate: Predicate,
        object: &(Category, String),
        chunk_id: &str,
    ) {
        if subject.1 == object.1 {
            return; // no self-loops
        }
        self.nodes.entry(subject.1.clone()).or_insert(subject.0);
        self.nodes.entry(object.1.clone()).or_insert(object.0);
        let data = self
            .edges
            .entry((subject.1.clone(), object.1.clone(), predicate))
            .or_insert(EdgeData {
                weight: 0,
                evidence: BTreeSet::new(),
            });
        data.weight += 1;
        data.evidence.insert(chunk_id.to_string());
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn contains_node(&self, node_id: &str) -> bool {
        self.nodes.contains_key(node_id)
    }

    pub fn node_category(&self, node_id: &str) -> Option<Category> {
        self.nodes.get(node_id).copied()
    }

    /// All node ids, ascending.
    pub fn node_ids(&self) -> impl Iterator<Item = &str> {
        self.nodes.keys().map(String::as_str)
    }

    /// All edges, ordered by `(src, dst, predicate)`.
    pub fn edges(&self) -> Vec<Edge> {
        self.edges
            .iter()
            .map(|((src, dst, predicate), data)| Edge {
                src: src.clone(),
                dst: dst.clone(),
                predicate: *predicate,
                weight: data.weight,
                evidence: data.evidence.iter().cloned().collect(),
            })
            .collect()
    }

    pub fn edge(&self, src: &str, dst: &str, predicate: Predicate) -> Option<Edge> {
        self.edges
            .get(&(src.to_string(), dst.to_string(), predicate))
            .map(|data| Edge {
                src: src.to_string(),
                dst: dst.to_string(),
                predicate,
                weight: data.weight,
                evidence: data.evidence.iter().cloned().collect(),
            })
    }

    /// Sum of edge weights == total extraction events folded in.
    pub fn total_weight(&self) -> u64 {
        self.edges.values().map(|d| d.weight).sum()
    }

    /// Breadth-first closure around `node_id` up to `depth` hops. Unknown
    /// nodes yield an empty subgraph (the caller falls back, it is not an
    /// error).
    pub fn neighbors(&self, node_id: &str, depth: usize, direction: Direction) -> KnowledgeGraph {
        let mut sub = KnowledgeGraph::new();
        if !self.nodes.contains_key(node_id) || depth == 0 {
            return sub;
        }
        let mut dist: BTreeMap<String, usize> = BTreeMap::new();
        dist.insert(node_id.to_string(), 0);
        sub.nodes.insert(node_id.to_string(), self.nodes[node_id]);
        let mut queue = VecDeque::new();
        queue.push_back(node_id.to_string());

        while let Some(current) = queue.pop_front() {
            let d = dist[&current];
            if d >= depth {
                continue;
            }
            for ((src, dst, predicate), data) in &self.edges {
                let next = if *src == current && matches!(direction, Direction::Out | Direction::Both)
                {
                    dst
                } else if *dst == current && matches!(direction, Direction::In | Direction::Both) {
                    src
                } else {
                    continue;
                };
                sub.nodes.insert(src.clone(), self.nodes[src]);
                sub.nodes.insert(dst.clone(), self.nodes[dst]);
                sub.edges
                    .entry((src.clone(), dst.clone(), *predicate))
                    .or_insert_with(|| data.clone());
                if !dist.contains_key(next) {
                    dist.insert(next.clone(), d + 1);
                    queue.push_back(next.clone());
                }
            }
        }
        sub
    }

    /// All simple directed paths from `src` to `dst` of at most `max_len`
    /// edges, ordered by (length asc, total weight desc, node sequence,
    /// predicate sequence). `src == dst` yields nothing.
    pub fn find_paths(&self, src: &str, dst: &str, max_len: usize) -> Vec<GraphPath> {
        let mut paths = Vec::new();
        if src == dst || !self.contains_node(src) || !self.contains_node(dst) {
            return paths;
        }
        let mut nodes = vec![src.to_string()];
        let mut edges = Vec::new();
        self.dfs_paths(src, dst, max_len, &mut nodes, &mut edges, &mut paths);
        paths.sort_by(|a, b| {
            a.edges
                .len()
                .cmp(&b.edges.len())
                .then_with(|| b.total_weight.cmp(&a.total_weight))
                .then_with(|| a.nodes.cmp(&b.nodes))
                .then_with(|| {
                    let pa: Vec<_> = a.edges.iter().map(|e| e.predicate).collect();
                    let pb: Vec<_> = b.edges.iter().map(|e| e.predicate).collect();
                    pa.cmp(&pb)
                })
        });
        paths
    }

    fn dfs_paths(
        &self,
        current: &str,
        dst: &str,
        remaining: usize,
        nodes: &mut Vec<String>,
        edges: &mut Vec<Edge>,
        out: &mut Vec<GraphPath>,
    ) {
        if remaining == 0 {
            return;
        }
        for ((s, d, predicate), data) in &self.edges {
            if s != current || nodes.contains(d) {
                continue;
            }
            let edge = Edge {
                src: s.clone(),
                dst: d.clone(),
                predicate: *predicate,
                weight: data.weight,
                evidence: data.evidence.iter().cloned().collect(),
            };
            nodes.push(d.clone());
            edges.push(edge);
            if d == dst {
                out.push(GraphPath {
                    nodes: nodes.clone(),
                    edges: edges.clone(),
                    total_weight: edges.iter().map(|e| e.weight).sum(),
                });
            } else {
                self.dfs_paths(d, dst, remaining - 1, nodes, edges, out);
            }
            nodes.pop();
            edges.pop();
        }
    }

    /// Serialize to the graph JSON file (`{nodes: [...], edges: [...]}`,
    /// evidence as sorted arrays).
    pub fn save(&self, path: &Path) -> Result<()> {
        let file = GraphFile {
            nodes: self
                .nodes
                .iter()
                .map(|(id, category)| NodeRow {
                    id: id.clone(),
                    category: *category,
                })
                .collect(),
            edges: self.edges(),
        };
        let mut bytes = serde_json::to_vec_pretty(&file)
            .map_err(|e| Error::parse(path, None, e.to_string()))?;
        bytes.push(b'\n');
        crate::fsio::atomic_write(path, &bytes)
    }

    pub fn load(path: &Path) -> Result<KnowledgeGraph> {
        let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: GraphFile = serde_json::from_str(&raw).map_err(|e| {
            Error::parse(
                path,
                Some(format!("line {}, column {}", e.line(), e.column())),
                e.to_string(),
            )
        })?;
        let mut graph = KnowledgeGraph::new();
        for node in file.nodes {
            graph.nodes.insert(node.id, node.category);
        }
        for edge in file.edges {
            if !graph.nodes.contains_key(&edge.src) || !graph.nodes.contains_key(&edge.dst) {
                return Err(Error::parse(
                    path,
                    None,
                    format!("edge {} -> {} references unknown node", edge.src, edge.dst),
                ));
            }
            graph.edges.insert(
                (edge.src, edge.dst, edge.predicate),
                EdgeData {
                    weight: edge.weight,
                    evidence: edge.evidence.into_iter().collect(),
                },
            );
        }
        Ok(graph)
    }

    /// Structural violations in the graph itself plus dangling evidence
    /// references against `known_chunk` (chunk_id -> exists).
    pub fn violations(&self, known_chunk: &dyn Fn(&str) -> bool) -> Vec<String> {
        let mut out = Vec::new();
        for ((src, dst, predicate), data) in &self.edges {
            let label = format!("{src} -[{predicate}]-> {dst}");
            if src == dst {
                out.push(format!("self-loop on {label}"));
            }
            if !self.nodes.contains_key(src) || !self.nodes.contains_key(dst) {
                out.push(format!("dangling endpoint on {label}"));
            }
            if data.evidence.is_empty() {
                out.push(format!("empty evidence on {label}"));
            }
            if data.weight < data.evidence.len() as u64 {
                out.push(format!(
                    "weight {} < evidence count {} on {label}",
                    data.weight,
                    data.evidence.len()
                ));
            }
            for chunk_id in &data.evidence {
                if !known_chunk(chunk_id) {
                    out.push(format!("unknown evidence chunk `{chunk_id}` on {label}"));
                }
            }
        }
        out
    }
}
