//! Controlled vocabularies and entity mention matching.
//!
//! The vocabulary maps lowercase canonical terms (and their synonyms) to one
//! of four entity categories. Matching is exact-phrase at word boundaries —
//! no stemming — so every mention is traceable to a vocabulary entry.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::Sentence;
use crate::phrase::PhraseScanner;

/// Entity categories recognized by the extraction rules.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    Defect,
    Parameter,
    Mechanism,
    Consequence,
}

impl Category {
    pub const ALL: [Category; 4] = [
        Category::Defect,
        Category::Parameter,
        Category::Mechanism,
        Category::Consequence,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Category::Defect => "defect",
            Category::Parameter => "parameter",
            Category::Mechanism => "mechanism",
            Category::Consequence => "consequence",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A vocabulary term occurrence inside one sentence. `char_span` holds byte
/// offsets into the sentence text, end exclusive.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityMention {
    pub chunk_id: String,
    pub sentence_index: usize,
    pub category: Category,
    pub canonical: String,
    pub surface: String,
    pub char_span: (usize, usize),
}

/// Controlled vocabulary: per category, canonical term -> synonyms.
///
/// Canonical terms are unique across all categories and every surface form
/// (canonical or synonym) resolves to exactly one `(category, canonical)`
/// pair.
#[derive(Debug, Clone)]
pub struct Vocabulary {
    entries: BTreeMap<Category, BTreeMap<String, Vec<String>>>,
    lookup: BTreeMap<String, (Category, String)>,
    scanner: PhraseScanner<(Category, String)>,
}

/// On-disk shape: `{"defect": {"porosity": ["pores", ...], ...}, ...}`.
type VocabFile = BTreeMap<Category, BTreeMap<String, Vec<String>>>;

const DEFAULT_VOCAB_JSON: &str = include_str!("../data/vocab.default.json");

impl Vocabulary {
    /// The vocabulary shipped with the crate (`data/vocab.default.json`).
    pub fn builtin_default() -> Vocabulary {
        Vocabulary::from_json(DEFAULT_VOCAB_JSON, Path::new("<builtin vocab>"))
            .expect("builtin vocabulary must validate")
    }

    /// Load and validate a vocabulary file.
    pub fn load(path: &Path) -> Result<Vocabulary> {
        let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Vocabulary::from_json(&raw, path)
    }

    fn from_json(raw: &str, path: &Path) -> Result<Vocabulary> {
        let file: VocabFile = serde_json::from_str(raw).map_err(|e| {
            Error::parse(
                path,
                Some(format!("line {}, column {}", e.line(), e.column())),
                e.to_string(),
            )
        })?;
        Vocabulary::from_entries(file)
    }

    /// Build a vocabulary from category maps, normalizing surface forms and
    /// rejecting collisions.
    pub fn from_entries(raw: VocabFile) -> Result<Vocabulary> {
        let mut entries: BTreeMap<Category, BTreeMap<String, Vec<String>>> = BTreeMap::new();
        let mut lookup: BTreeMap<String, (Category, String)> = BTreeMap::new();

        let insert = |surface: &str, category: Category, canonical: &str, lookup: &mut BTreeMap<String, (Category, String)>| -> Result<()> {
            if surface.is_empty() {
                return Err(Error::Vocabulary(format!(
                    "empty term under {category}/{canonical}"
                )));
            }
            match lookup.get(surface) {
                None => {
                    lookup.insert(surface.to_string(), (category, canonical.to_string()));
                    Ok(())
                }
                Some((c, t)) if *c == category && t == canonical => Ok(()),
                Some((c, t)) => Err(Error::Vocabulary(format!(
                    "`{surface}` maps to both {c}/{t} and {category}/{canonical}"
                ))),
            }
        };

        for (category, terms) in raw {
            let slot = entries.entry(category).or_default();
            for (canonical, synonyms) in terms {
                let canonical = normalize_surface(&canonical);
                insert(&canonical, category, &canonical, &mut lookup)?;
                let mut normed_syns = Vec::new();
                for syn in synonyms {
                    let syn = normalize_surface(&syn);
                    insert(&syn, category, &canonical, &mut lookup)?;
                    if syn != canonical {
                        normed_syns.push(syn);
                    }
                }
                slot.insert(canonical, normed_syns);
            }
        }

        let scanner = PhraseScanner::new(lookup.iter().map(|(s, v)| (s.clone(), v.clone())));
        Ok(Vocabulary {
            entries,
            lookup,
            scanner,
        })
    }

    /// Canonical terms of one category, ascending.
    pub fn canonicals(&self, category: Category) -> Vec<&str> {
        self.entries
            .get(&category)
            .map(|m| m.keys().map(String::as_str).collect())
            .unwrap_or_default()
    }

    /// Total number of canonical terms across categories.
    pub fn canonical_count(&self) -> usize {
        self.entries.values().map(|m| m.len()).sum()
    }

    /// Category of a canonical term, if it is one.
    pub fn category_of(&self, canonical: &str) -> Option<Category> {
        self.entries
            .iter()
            .find(|(_, m)| m.contains_key(canonical))
            .map(|(c, _)| *c)
    }

    /// Whether `canonical` is a canonical term in any category.
    pub fn is_canonical(&self, canonical: &str) -> bool {
        self.category_of(canonical).is_some()
    }

    /// Normalize a free-form surface to `(category, canonical)`: lowercase,
    /// trim, collapse internal whitespace, then exact lookup over canonicals
    /// and synonyms.
    pub fn normalize_term(&self, surface: &str) -> Option<(Category, String)> {
        self.lookup.get(&normalize_surface(surface)).cloned()
    }

    /// All vocabulary occurrences in arbitrary text, longest match first,
    /// word-boundary aligned, overlaps suppressed.
    pub fn scan_text(&self, text: &str) -> Vec<(usize, usize, Category, String)> {
        self.scanner
            .find_all(text)
            .into_iter()
            .map(|h| (h.start, h.end, h.value.0, h.value.1))
            .collect()
    }

    /// Vocabulary mentions in one sentence, ordered by span start.
    pub fn match_terms(&self, sentence: &Sentence, chunk_id: &str) -> Vec<EntityMention> {
        self.scan_text(&sentence.text)
            .into_iter()
            .map(|(start, end, category, canonical)| EntityMention {
                chunk_id: chunk_id.to_string(),
                sentence_index: sentence.index,
                category,
                canonical,
                surface: sentence.text[start..end].to_string(),
                char_span: (start, end),
            })
            .collect()
    }
}

/// Lowercase, trim, collapse internal whitespace.
pub fn normalize_surface(surface: &str) -> String {
    surface
        .split_whitespace()
        .map(|w| w.to_lowercase())
        .collect::<Vec<_>>()
        .join(" ")
}
