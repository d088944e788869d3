//! Sentence-aligned overlapping chunking.
//!
//! Chunks accumulate whole sentences until the word target is reached; the
//! next chunk re-starts at the shortest trailing run of sentences whose
//! word total covers the configured overlap. Sentence integrity always wins
//! over exact word counts.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::Sentence;

/// Chunk sizing. `target_words` is a lower bound a chunk stops growing at;
/// `overlap_words` is the minimum carried over between consecutive chunks.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct ChunkingConfig {
    pub target_words: usize,
    pub overlap_words: usize,
}

impl Default for ChunkingConfig {
    fn default() -> Self {
        ChunkingConfig {
            target_words: 220,
            overlap_words: 40,
        }
    }
}

impl ChunkingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.overlap_words >= self.target_words {
            return Err(Error::config(
                "chunking.overlap_words",
                format!(
                    "overlap_words ({}) must be < target_words ({})",
                    self.overlap_words, self.target_words
                ),
            ));
        }
        Ok(())
    }
}

/// An overlapping text segment with stable identifier
/// `"{doc_id}::c{position_index}"`. `sentence_span` is inclusive on both
/// ends.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chunk {
    pub chunk_id: String,
    pub doc_id: String,
    pub position_index: usize,
    pub text: String,
    pub word_count: usize,
    pub sentence_span: (usize, usize),
}

/// Greedily pack ordered sentences into overlapping chunks.
pub fn chunk_document(sentences: &[Sentence], config: &ChunkingConfig) -> Result<Vec<Chunk>> {
    config.validate()?;
    if sentences.is_empty() {
        return Ok(Vec::new());
    }
    let doc_id = sentences[0].doc_id.clone();
    let words: Vec<usize> = sentences.iter().map(|s| s.word_count).collect();
    let n = sentences.len();

    let mut chunks = Vec::new();
    let mut start = 0usize;
    let mut prev_end: Option<usize> = None;

    loop {
        let mut end = start;
        let mut count = words[start];
        while count < config.target_words && end + 1 < n {
            end += 1;
            count += words[end];
        }
        // Each chunk must cover at least one sentence the previous one did not.
        if let Some(pe) = prev_end {
            while end <= pe && end + 1 < n {
                end += 1;
                count += words[end];
            }
        }

        let text = sentences[start..=end]
            .iter()
            .map(|s| s.text.as_str())
            .collect::<Vec<_>>()
            .join(" ");
        let position_index = chunks.len();
        chunks.push(Chunk {
            chunk_id: format!("{doc_id}::c{position_index}"),
            doc_id: doc_id.clone(),
            position_index,
            text,
            word_count: count,
            sentence_span: (start, end),
        });

        if end == n - 1 {
            break;
        }

        // Shortest trailing run of whole sentences covering the overlap.
        let mut s = end + 1;
        let mut carried = 0usize;
        while carried < config.overlap_words && s > start {
            s -= 1;
            carried += words[s];
        }
        prev_end = Some(end);
        start = s;
    }

    Ok(chunks)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sentences(word_counts: &[usize]) -> Vec<Sentence> {
        word_counts
            .iter()
            .enumerate()
            .map(|(i, &wc)| Sentence {
                doc_id: "d".into(),
                index: i,
                text: (0..wc).map(|w| format!("w{i}t{w}")).collect::<Vec<_>>().join(" "),
                word_count: wc,
            })
            .collect()
    }

    #[test]
    fn empty_input_gives_empty_output() {
        let cfg = ChunkingConfig::default();
        assert!(chunk_document(&[], &cfg).unwrap().is_empty());
    }

    #[test]
    fn short_document_is_one_chunk() {
        let cfg = ChunkingConfig::default();
        let chunks = chunk_document(&sentences(&[40, 60]), &cfg).unwrap();
        assert_eq!(chunks.len(), 1);
        assert_eq!(chunks[0].word_count, 100);
        assert_eq!(chunks[0].sentence_span, (0, 1));
    }

    // Hand-simulated greedy rule: 10 sentences x 50 words, target 220 /
    // overlap 40. Chunk 1 takes s0..s4 (250 words); s4 alone covers the
    // overlap, so chunk 2 starts there and takes s4..s8 (250); chunk 3 is
    // the s8..s9 remainder (100).
    #[test]
    fn fifty_word_sentences_produce_expected_spans() {
        let cfg = ChunkingConfig::default();
        let chunks = chunk_document(&sentences(&[50; 10]), &cfg).unwrap();
        let spans: Vec<_> = chunks.iter().map(|c| c.sentence_span).collect();
        let counts: Vec<_> = chunks.iter().map(|c| c.word_count).collect();
        assert_eq!(spans, vec![(0, 4), (4, 8), (8, 9)]);
        assert_eq!(counts, vec![250, 250, 100]);
    }

    #[test]
    fn chunk_ids_are_stable() {
        let cfg = ChunkingConfig::default();
        let chunks = chunk_document(&sentences(&[50; 10]), &cfg).unwrap();
        assert_eq!(chunks[0].chunk_id, "d::c0");
        assert_eq!(chunks[2].chunk_id, "d::c2");
    }

    #[test]
    fn word_count_matches_text_tokens() {
        let cfg = ChunkingConfig::default();
        for chunk in chunk_document(&sentences(&[50; 10]), &cfg).unwrap() {
            assert_eq!(chunk.word_count, chunk.text.split_whitespace().count());
        }
    }

    #[test]
    fn oversized_single_sentences_still_advance() {
        let cfg = ChunkingConfig::default();
        let chunks = chunk_document(&sentences(&[400, 300, 500]), &cfg).unwrap();
        // Every consecutive pair makes progress on at least one bound.
        for w in chunks.windows(2) {
            let (a, b) = (w[0].sentence_span, w[1].sentence_span);
            assert!(b.0 > a.0 || b.1 > a.1, "{a:?} -> {b:?}");
        }
        let last = chunks.last().unwrap();
        assert_eq!(last.sentence_span.1, 2);
    }

    #[test]
    fn zero_overlap_produces_disjoint_chunks() {
        let cfg = ChunkingConfig {
            target_words: 100,
            overlap_words: 0,
        };
        let chunks = chunk_document(&sentences(&[60; 6]), &cfg).unwrap();
        for w in chunks.windows(2) {
            assert_eq!(w[1].sentence_span.0, w[0].sentence_span.1 + 1);
        }
    }

    #[test]
    fn invalid_config_is_rejected() {
        let cfg = ChunkingConfig {
            target_words: 40,
            overlap_words: 40,
        };
        assert!(chunk_document(&sentences(&[10]), &cfg).is_err());
    }
}
