//! Word-boundary phrase scanning shared by vocabulary matching and cue
//! detection.
//!
//! Patterns are lowercase ASCII phrases. Matching is case-insensitive,
//! anchored to word boundaries on both sides, and longest-match-first at
//! each start position. Once a phrase matches, scanning resumes after its
//! end, so overlapping shorter matches are suppressed.

/// A phrase occurrence in the scanned text. `start`/`end` are byte offsets,
/// end exclusive.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct PhraseHit<T> {
    pub start: usize,
    pub end: usize,
    pub value: T,
}

#[derive(Debug, Clone)]
pub(crate) struct PhraseScanner<T> {
    // Patterns bucketed by lowercase first byte, longest first within a bucket.
    buckets: [Vec<(String, T)>; 256],
}

impl<T: Clone> PhraseScanner<T> {
    /// Build a scanner from `(phrase, value)` pairs. Phrases are expected
    /// lowercase; empty phrases are ignored.
    pub fn new(patterns: impl IntoIterator<Item = (String, T)>) -> Self {
        let mut buckets: [Vec<(String, T)>; 256] = std::array::from_fn(|_| Vec::new());
        for (phrase, value) in patterns {
            if phrase.is_empty() {
                continue;
            }
            let b = phrase.as_bytes()[0].to_ascii_lowercase() as usize;
            buckets[b].push((phrase, value));
        }
        for bucket in buckets.iter_mut() {
            bucket.sort_by(|a, b| b.0.len().cmp(&a.0.len()).then_with(|| a.0.cmp(&b.0)));
        }
        Self { buckets }
    }

    /// All non-overlapping hits in `text`, in start order.
    pub fn find_all(&self, text: &str) -> Vec<PhraseHit<T>> {
        let mut hits = Vec::new();
        let mut prev_alnum = false;
        let mut skip_until = 0usize;
        for (i, ch) in text.char_indices() {
            let alnum = ch.is_alphanumeric();
            let word_start = alnum && !prev_alnum;
            prev_alnum = alnum;
            if !word_start || i < skip_until {
                continue;
            }
            let bucket = &self.buckets[text.as_bytes()[i].to_ascii_lowercase() as usize];
            for (phrase, value) in bucket {
                let end = i + phrase.len();
                let Some(slice) = text.get(i..end) else {
                    continue;
                };
                if !slice.eq_ignore_ascii_case(phrase) {
                    continue;
                }
                if text[end..].chars().next().is_some_and(|c| c.is_alphanumeric()) {
                    continue;
                }
                hits.push(PhraseHit {
                    start: i,
                    end,
                    value: value.clone(),
                });
                skip_until = end;
                break;
            }
        }
        hits
    }
}
