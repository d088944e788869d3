//! Corpus loading, text cleaning, and sentence segmentation.
//!
//! Input is a directory of UTF-8 `.txt` files (doc_id = filename stem) or
//! `.jsonl` files with one `{"doc_id": ..., "text": ...}` object per line.
//! Cleaning strips bracketed numeric citation markers and control
//! characters and normalizes whitespace; segmentation is rule-based so the
//! whole pipeline stays bit-reproducible.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A corpus document before chunking.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub source_path: String,
    pub raw_text: String,
    pub cleaned_text: String,
}

/// One segmented sentence. `index` is the order within the document and
/// `word_count` counts whitespace-delimited tokens.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub doc_id: String,
    pub index: usize,
    pub text: String,
    pub word_count: usize,
}

/// A non-fatal problem encountered while loading one file or line.
#[derive(Debug, Clone)]
pub struct IngestIssue {
    pub source: String,
    pub message: String,
}

/// Result of a corpus load: documents ordered by doc_id plus any per-file
/// issues that did not stop the run.
#[derive(Debug, Default)]
pub struct CorpusLoad {
    pub documents: Vec<Document>,
    pub issues: Vec<IngestIssue>,
}

/// Abbreviations that never end a sentence.
const PROTECTED_ABBREVIATIONS: &[&str] = &[
    "fig.", "figs.", "et al.", "e.g.", "i.e.", "vs.", "al.", "no.", "approx.",
];

#[derive(Deserialize)]
struct JsonlLine {
    doc_id: String,
    text: String,
}

/// Load every `.txt` and `.jsonl` document under `directory`.
///
/// Unreadable files and malformed JSONL lines are collected as issues and
/// the load continues; a duplicate doc_id is fatal.
pub fn load_corpus(directory: &Path) -> Result<CorpusLoad> {
    if !directory.is_dir() {
        return Err(Error::MissingInput {
            path: directory.to_path_buf(),
            producer: "provide a corpus directory".into(),
        });
    }
    let mut names: Vec<_> = std::fs::read_dir(directory)
        .map_err(|e| Error::io(directory, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .collect();
    names.sort();

    let mut by_id: BTreeMap<String, Document> = BTreeMap::new();
    let mut issues = Vec::new();

    let add = |doc: Document, by_id: &mut BTreeMap<String, Document>| -> Result<()> {
        if let Some(existing) = by_id.get(&doc.doc_id) {
            return Err(Error::DuplicateDocId {
                doc_id: doc.doc_id.clone(),
                first: existing.source_path.clone(),
                second: doc.source_path.clone(),
            });
        }
        by_id.insert(doc.doc_id.clone(), doc);
        Ok(())
    };

    for path in names {
        let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
        match ext {
            "txt" => {
                let stem = path
                    .file_stem()
                    .and_then(|s| s.to_str())
                    .unwrap_or_default()
                    .to_string();
                match std::fs::read_to_string(&path) {
                    Ok(raw) => {
                        let cleaned = clean_text(&raw);
                        add(
                            Document {
                                doc_id: stem,
                                source_path: path.display().to_string(),
                                raw_text: raw,
                                cleaned_text: cleaned,
                            },
                            &mut by_id,
                        )?;
                    }
                    Err(e) => issues.push(IngestIssue {
                        source: path.display().to_string(),
                        message: e.to_string(),
                    }),
                }
            }
            "jsonl" => match std::fs::read_to_string(&path) {
                Ok(raw) => {
                    for (lineno, line) in raw.lines().enumerate() {
                        if line.trim().is_empty() {
                            continue;
                        }
                        match serde_json::from_str::<JsonlLine>(line) {
                            Ok(rec) if !rec.doc_id.is_empty() => {
                                let cleaned = clean_text(&rec.text);
                                add(
                                    Document {
                                        doc_id: rec.doc_id,
                                        source_path: format!("{}:{}", path.display(), lineno + 1),
                                        raw_text: rec.text,
                                        cleaned_text: cleaned,
                                    },
                                    &mut by_id,
                                )?;
                            }
                            Ok(_) => issues.push(IngestIssue {
                                source: format!("{}:{}", path.display(), lineno + 1),
                                message: "empty doc_id".into(),
                            }),
                            Err(e) => issues.push(IngestIssue {
                                source: format!("{}:{}", path.display(), lineno + 1),
                                message: e.to_string(),
                            }),
                        }
                    }
                }
                Err(e) => issues.push(IngestIssue {
                    source: path.display().to_string(),
                    message: e.to_string(),
                }),
            },
            _ => {}
        }
    }

    Ok(CorpusLoad {
        documents: by_id.into_values().collect(),
        issues,
    })
}

fn citation_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\[\s*\d+(?:\s*[,;\-–]\s*\d+)*\s*\]").unwrap())
}

/// Remove bracketed numeric citation markers and control characters, and
/// normalize whitespace. Newlines are kept; tabs collapse like spaces.
/// Total and idempotent.
pub fn clean_text(raw: &str) -> String {
    let no_cites = citation_regex().replace_all(raw, "");

    let mut kept = String::with_capacity(no_cites.len());
    for ch in no_cites.chars() {
        match ch {
            '\n' => kept.push('\n'),
            '\t' => kept.push(' '),
            c if c.is_control() => {}
            c => kept.push(c),
        }
    }

    let cleaned: Vec<String> = kept
        .split('\n')
        .map(|line| line.split_whitespace().collect::<Vec<_>>().join(" "))
        .collect();
    cleaned.join("\n").trim_matches('\n').to_string()
}

/// Split cleaned text into sentences.
///
/// A split happens after `.`, `!` or `?` followed by whitespace and an
/// uppercase letter or digit, except after protected abbreviations and
/// between two digits. Zero-word fragments are dropped.
pub fn split_sentences(cleaned: &str, doc_id: &str) -> Vec<Sentence> {
    let mut sentences = Vec::new();
    let mut start = 0usize;
    let mut prev: Option<char> = None;

    let push = |start: usize, end: usize, sentences: &mut Vec<Sentence>| {
        let text = cleaned[start..end].trim();
        if !text.is_empty() {
            let word_count = text.split_whitespace().count();
            if word_count > 0 {
                sentences.push(Sentence {
                    doc_id: doc_id.to_string(),
                    index: sentences.len(),
                    text: text.to_string(),
                    word_count,
                });
            }
        }
    };

    for (i, ch) in cleaned.char_indices() {
        if matches!(ch, '.' | '!' | '?') {
            let rest = &cleaned[i + 1..];
            let mut chars = rest.chars();
            let next = chars.next();
            if next.is_some_and(|c| c.is_whitespace()) {
                let following = rest.trim_start_matches(|c: char| c.is_whitespace());
                if let Some(first) = following.chars().next() {
                    let splits_here = (first.is_uppercase() || first.is_ascii_digit())
                        && !(prev.is_some_and(|p| p.is_ascii_digit()) && first.is_ascii_digit())
                        && !(ch == '.' && ends_with_abbreviation(&cleaned[..=i]));
                    if splits_here {
                        push(start, i + 1, &mut sentences);
                        start = i + 1;
                    }
                }
            }
        }
        prev = Some(ch);
    }
    push(start, cleaned.len(), &mut sentences);
    sentences
}

fn ends_with_abbreviation(prefix: &str) -> bool {
    PROTECTED_ABBREVIATIONS.iter().any(|abbr| {
        if prefix.len() < abbr.len() {
            return false;
        }
        let tail_start = prefix.len() - abbr.len();
        if !prefix.is_char_boundary(tail_start) {
            return false;
        }
        if !prefix[tail_start..].eq_ignore_ascii_case(abbr) {
            return false;
        }
        // The abbreviation must start at a word boundary ("config." is not "fig.").
        prefix[..tail_start]
            .chars()
            .next_back()
            .is_none_or(|c| !c.is_alphanumeric())
    })
}
