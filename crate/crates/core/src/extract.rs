//! Cue-phrase relation extraction and chunk record assembly.
//!
//! Relations are extracted per sentence: for every cue occurrence the
//! nearest mention ending before the cue becomes the subject and the
//! nearest mention starting after it the object. Only four entity pairings
//! are admitted, and a negation token within the three words before the cue
//! vetoes the triple.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::chunk::Chunk;
use crate::error::{Error, Result};
use crate::ingest::Sentence;
use crate::phrase::PhraseScanner;
use crate::vocab::{Category, EntityMention, Vocabulary};

/// Relation predicates carried by graph edges.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Predicate {
    Causes,
    Increases,
    Decreases,
    Influences,
}

impl Predicate {
    pub fn as_str(&self) -> &'static str {
        match self {
            Predicate::Causes => "causes",
            Predicate::Increases => "increases",
            Predicate::Decreases => "decreases",
            Predicate::Influences => "influences",
        }
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Entity pairings a triple may connect, in (subject, object) order.
pub const ALLOWED_PAIRINGS: [(Category, Category); 4] = [
    (Category::Parameter, Category::Defect),
    (Category::Parameter, Category::Mechanism),
    (Category::Mechanism, Category::Defect),
    (Category::Defect, Category::Consequence),
];

/// A typed relation between two canonical entities, traced to the sentence
/// and cue that produced it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationTriple {
    pub subject: (Category, String),
    pub predicate: Predicate,
    pub object: (Category, String),
    pub chunk_id: String,
    pub sentence_index: usize,
    pub pattern_id: String,
}

/// Cue phrase inventory, loaded from JSON so it can be audited and edited
/// without a rebuild. The file maps each predicate name to its cue phrases
/// plus a `negation` token list.
#[derive(Debug, Clone)]
pub struct CueSet {
    by_predicate: BTreeMap<Predicate, Vec<String>>,
    negation: BTreeSet<String>,
    scanner: PhraseScanner<(Predicate, String)>,
}

#[derive(Deserialize)]
struct CueFile {
    causes: Vec<String>,
    increases: Vec<String>,
    decreases: Vec<String>,
    influences: Vec<String>,
    negation: Vec<String>,
}

const DEFAULT_CUES_JSON: &str = include_str!("../data/cues.default.json");

impl CueSet {
    /// The cue inventory shipped with the crate (`data/cues.default.json`).
    pub fn builtin_default() -> CueSet {
        CueSet::from_json(DEFAULT_CUES_JSON, Path::new("<builtin cues>"))
            .expect("builtin cue file must parse")
    }

    pub fn load(path: &Path) -> Result<CueSet> {
        let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        CueSet::from_json(&raw, path)
    }

    fn from_json(raw: &str, path: &Path) -> Result<CueSet> {
        let file: CueFile = serde_json::from_str(raw).map_err(|e| {
            Error::parse(
                path,
                Some(format!("line {}, column {}", e.line(), e.column())),
                e.to_string(),
            )
        })?;
        let mut by_predicate = BTreeMap::new();
        by_predicate.insert(Predicate::Causes, file.causes);
        by_predicate.insert(Predicate::Increases, file.increases);
        by_predicate.insert(Predicate::Decreases, file.decreases);
        by_predicate.insert(Predicate::Influences, file.influences);
        for cues in by_predicate.values_mut() {
            for cue in cues.iter_mut() {
                *cue = cue.to_lowercase();
            }
        }
        let scanner = PhraseScanner::new(by_predicate.iter().flat_map(|(pred, cues)| {
            cues.iter().map(move |c| (c.clone(), (*pred, c.clone())))
        }));
        Ok(CueSet {
            by_predicate,
            negation: file.negation.into_iter().map(|t| t.to_lowercase()).collect(),
            scanner,
        })
    }

    pub fn phrases(&self, predicate: Predicate) -> &[String] {
        self.by_predicate
            .get(&predicate)
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }
}

/// Extract relation triples from one sentence given its mentions.
pub fn extract_relations(
    sentence: &Sentence,
    mentions: &[EntityMention],
    cues: &CueSet,
) -> Vec<RelationTriple> {
    if mentions.len() < 2 {
        return Vec::new();
    }
    let mut triples = Vec::new();
    let mut seen: BTreeSet<(String, Predicate, String)> = BTreeSet::new();

    for hit in cues.scanner.find_all(&sentence.text) {
        let (predicate, cue) = hit.value;
        if negated(&sentence.text[..hit.start], &cues.negation) {
            continue;
        }
        let subject = mentions
            .iter()
            .filter(|m| m.char_span.1 <= hit.start)
            .max_by_key(|m| m.char_span.1);
        let object = mentions
            .iter()
            .filter(|m| m.char_span.0 >= hit.end)
            .min_by_key(|m| m.char_span.0);
        let (Some(subject), Some(object)) = (subject, object) else {
            continue;
        };
        if !ALLOWED_PAIRINGS.contains(&(subject.category, object.category)) {
            continue;
        }
        if subject.canonical == object.canonical {
            continue;
        }
        if seen.insert((subject.canonical.clone(), predicate, object.canonical.clone())) {
            triples.push(RelationTriple {
                subject: (subject.category, subject.canonical.clone()),
                predicate,
                object: (object.category, object.canonical.clone()),
                chunk_id: subject.chunk_id.clone(),
                sentence_index: sentence.index,
                pattern_id: format!("{predicate}:{cue}"),
            });
        }
    }
    triples
}

/// Whether a negation token occurs within the 3 words immediately before
/// the cue.
fn negated(before_cue: &str, negation: &BTreeSet<String>) -> bool {
    before_cue
        .split_whitespace()
        .rev()
        .take(3)
        .map(|w| w.trim_matches(|c: char| !c.is_alphanumeric()).to_lowercase())
        .any(|w| negation.contains(&w))
}

/// A chunk plus everything extracted from it — the on-disk JSONL unit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChunkRecord {
    pub chunk: Chunk,
    pub mentions: Vec<EntityMention>,
    pub triples: Vec<RelationTriple>,
    pub defect_terms: Vec<String>,
    pub parameters: Vec<String>,
    pub mechanisms: Vec<String>,
    pub consequences: Vec<String>,
}

impl ChunkRecord {
    /// Deduplicated canonicals of one category, ascending.
    pub fn terms(&self, category: Category) -> &[String] {
        match category {
            Category::Defect => &self.defect_terms,
            Category::Parameter => &self.parameters,
            Category::Mechanism => &self.mechanisms,
            Category::Consequence => &self.consequences,
        }
    }
}

/// Run mention matching and relation extraction over a chunk's sentences.
///
/// `sentences` must be exactly the chunk's sentence span, in order.
pub fn build_chunk_record(
    chunk: &Chunk,
    sentences: &[Sentence],
    vocab: &Vocabulary,
    cues: &CueSet,
) -> ChunkRecord {
    let mut mentions = Vec::new();
    let mut triples = Vec::new();
    for sentence in sentences {
        let sentence_mentions = vocab.match_terms(sentence, &chunk.chunk_id);
        triples.extend(extract_relations(sentence, &sentence_mentions, cues));
        mentions.extend(sentence_mentions);
    }

    let mut by_category: BTreeMap<Category, BTreeSet<String>> = BTreeMap::new();
    for m in &mentions {
        by_category
            .entry(m.category)
            .or_default()
            .insert(m.canonical.clone());
    }
    let take = |cat: Category, map: &mut BTreeMap<Category, BTreeSet<String>>| {
        map.remove(&cat).map(|s| s.into_iter().collect()).unwrap_or_default()
    };

    ChunkRecord {
        chunk: chunk.clone(),
        mentions,
        triples,
        defect_terms: take(Category::Defect, &mut by_category),
        parameters: take(Category::Parameter, &mut by_category),
        mechanisms: take(Category::Mechanism, &mut by_category),
        consequences: take(Category::Consequence, &mut by_category),
    }
}

/// Write chunk records as JSONL, one record per line (atomic).
pub fn write_records(path: &Path, records: &[ChunkRecord]) -> Result<()> {
    let mut out = Vec::new();
    for record in records {
        serde_json::to_writer(&mut out, record)
            .map_err(|e| Error::parse(path, None, e.to_string()))?;
        out.push(b'\n');
    }
    crate::fsio::atomic_write(path, &out)
}

/// Read a JSONL chunk-record file.
pub fn read_records(path: &Path) -> Result<Vec<ChunkRecord>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let mut records = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: ChunkRecord = serde_json::from_str(&line).map_err(|e| {
            Error::parse(path, Some(format!("line {}", lineno + 1)), e.to_string())
        })?;
        records.push(record);
    }
    Ok(records)
}

/// In-memory record lookup used by aggregation and the verifier.
#[derive(Debug, Default)]
pub struct RecordStore {
    records: Vec<ChunkRecord>,
    by_id: HashMap<String, usize>,
}

impl RecordStore {
    pub fn new(records: Vec<ChunkRecord>) -> Result<RecordStore> {
        let mut by_id = HashMap::with_capacity(records.len());
        for (i, record) in records.iter().enumerate() {
            if by_id.insert(record.chunk.chunk_id.clone(), i).is_some() {
                return Err(Error::Integrity(format!(
                    "duplicate chunk_id `{}` in records",
                    record.chunk.chunk_id
                )));
            }
        }
        Ok(RecordStore { records, by_id })
    }

    pub fn load(path: &Path) -> Result<RecordStore> {
        RecordStore::new(read_records(path)?)
    }

    pub fn get(&self, chunk_id: &str) -> Option<&ChunkRecord> {
        self.by_id.get(chunk_id).map(|&i| &self.records[i])
    }

    pub fn contains(&self, chunk_id: &str) -> bool {
        self.by_id.contains_key(chunk_id)
    }

    pub fn iter(&self) -> impl Iterator<Item = &ChunkRecord> {
        self.records.iter()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

// An extra `write!`-style sink would be overkill here; records are small.

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chunk::{chunk_document, ChunkingConfig};
    use crate::ingest::split_sentences;

    fn vocab() -> Vocabulary {
        Vocabulary::builtin_default()
    }

    fn cues() -> CueSet {
        CueSet::builtin_default()
    }

    fn sent(text: &str) -> Sentence {
        Sentence {
            doc_id: "d".into(),
            index: 0,
            text: text.into(),
            word_count: text.split_whitespace().count(),
        }
    }

    fn extract(text: &str) -> Vec<RelationTriple> {
        let s = sent(text);
        let mentions = vocab().match_terms(&s, "d::c0");
        extract_relations(&s, &mentions, &cues())
    }

    #[test]
    fn causal_cue_produces_triple() {
        let triples = extract("High laser power leads to keyhole porosity.");
        assert_eq!(triples.len(), 1);
        let t = &triples[0];
        assert_eq!(t.subject, (Category::Parameter, "laser power".into()));
        assert_eq!(t.predicate, Predicate::Causes);
        assert_eq!(t.object, (Category::Defect, "keyhole porosity".into()));
        assert_eq!(t.pattern_id, "causes:leads to");
    }

    #[test]
    fn no_cue_no_triples() {
        assert!(extract("Porosity was measured at three locations.").is_empty());
    }

    #[test]
    fn negation_vetoes_triple() {
        assert!(extract("Hatch spacing does not lead to cracking.").is_empty());
        assert!(extract("Hatch spacing never will not cause cracking.").is_empty());
        // Negation further than 3 words back does not veto.
        assert_eq!(
            extract("It is not true that hatch spacing leads to cracking.").len(),
            1
        );
    }

    #[test]
    fn disallowed_pairings_are_dropped() {
        // defect -> defect
        assert!(extract("Residual stress leads to cracking.").is_empty());
        // mechanism -> mechanism
        assert!(extract("Recoil pressure promotes keyhole instability.").is_empty());
        // parameter -> parameter
        assert!(extract("Laser power increases energy density.").is_empty());
    }

    #[test]
    fn increase_and_decrease_map_to_distinct_predicates() {
        let inc = extract("High scan speed promotes balling.");
        assert_eq!(inc[0].predicate, Predicate::Increases);
        let dec = extract("Low hatch spacing reduces lack of fusion.");
        assert_eq!(dec[0].predicate, Predicate::Decreases);
        let inf = extract("Layer thickness influences porosity.");
        assert_eq!(inf[0].predicate, Predicate::Influences);
    }

    #[test]
    fn duplicate_triples_within_sentence_deduplicated() {
        let triples =
            extract("Laser power causes porosity and laser power leads to porosity.");
        assert_eq!(triples.len(), 1);
    }

    #[test]
    fn record_closure_and_category_lists() {
        let cleaned = "High laser power leads to keyhole porosity. Keyhole instability results in porosity.";
        let sentences = split_sentences(cleaned, "d");
        let chunks = chunk_document(&sentences, &ChunkingConfig::default()).unwrap();
        assert_eq!(chunks.len(), 1);
        let record = build_chunk_record(&chunks[0], &sentences, &vocab(), &cues());

        assert_eq!(record.triples.len(), 2);
        let ids: Vec<_> = record.triples.iter().map(|t| t.sentence_index).collect();
        assert_eq!(ids, vec![0, 1]);
        for t in &record.triples {
            assert!(record.mentions.iter().any(|m| m.canonical == t.subject.1));
            assert!(record.mentions.iter().any(|m| m.canonical == t.object.1));
        }
        assert_eq!(record.defect_terms, vec!["keyhole porosity", "porosity"]);
        assert_eq!(record.parameters, vec!["laser power"]);
        assert_eq!(record.mechanisms, vec!["keyhole instability"]);
        assert!(record.consequences.is_empty());
    }

    #[test]
    fn chunk_without_mentions_gives_empty_record() {
        let cleaned = "Nothing of note happened here.";
        let sentences = split_sentences(cleaned, "d");
        let chunks = chunk_document(&sentences, &ChunkingConfig::default()).unwrap();
        let record = build_chunk_record(&chunks[0], &sentences, &vocab(), &cues());
        assert!(record.mentions.is_empty());
        assert!(record.triples.is_empty());
        assert!(record.defect_terms.is_empty());
    }

    #[test]
    fn same_triple_in_two_sentences_kept_with_distinct_indices() {
        let cleaned =
            "High laser power causes keyhole porosity. Again laser power leads to keyhole porosity.";
        let sentences = split_sentences(cleaned, "d");
        let chunks = chunk_document(&sentences, &ChunkingConfig::default()).unwrap();
        let record = build_chunk_record(&chunks[0], &sentences, &vocab(), &cues());
        assert_eq!(record.triples.len(), 2);
        assert_ne!(record.triples[0].sentence_index, record.triples[1].sentence_index);
    }

    #[test]
    fn records_round_trip_jsonl() {
        let cleaned = "High laser power leads to keyhole porosity.";
        let sentences = split_sentences(cleaned, "d");
        let chunks = chunk_document(&sentences, &ChunkingConfig::default()).unwrap();
        let record = build_chunk_record(&chunks[0], &sentences, &vocab(), &cues());

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("records.jsonl");
        write_records(&path, std::slice::from_ref(&record)).unwrap();
        let back = read_records(&path).unwrap();
        assert_eq!(back, vec![record]);
    }
}
