//! Constrained prompt rendering, generation-endpoint calls, and the
//! deterministic template fallback.
//!
//! The generation endpoint speaks a minimal JSON contract whose field
//! names are remappable in config, keeping the core vendor-neutral. When
//! the endpoint is unreachable (or `--no-llm` is set) the template path
//! produces a byte-deterministic answer from the reasoning chain and
//! retained labels.

use std::collections::BTreeSet;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::agent::{ConfidenceBand, ReasoningChain};
use crate::remote::{EndpointConfig, FieldMap};
use crate::vocab::Category;

/// Fixed refusal text used whenever there is no evidence to answer from.
pub const REFUSAL_TEXT: &str = "insufficient evidence in corpus";

/// Everything needed to produce an answer for one query.
#[derive(Debug, Clone)]
pub struct AnswerRequest {
    pub question: String,
    /// `(chunk_id, chunk text)` in retrieval score order.
    pub evidence: Vec<(String, String)>,
    pub chain: Option<ReasoningChain>,
    /// Retained labels per category, for the label-listing template path.
    pub retained: Vec<(Category, Vec<String>)>,
    pub confidence: ConfidenceBand,
    pub temperature: f64,
    pub max_tokens: u32,
}

impl AnswerRequest {
    pub fn new(
        question: impl Into<String>,
        evidence: Vec<(String, String)>,
        chain: Option<ReasoningChain>,
        retained: Vec<(Category, Vec<String>)>,
        confidence: ConfidenceBand,
    ) -> AnswerRequest {
        AnswerRequest {
            question: question.into(),
            evidence,
            chain,
            retained,
            confidence,
            temperature: 0.1,
            max_tokens: 400,
        }
    }
}

/// How an answer was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Generator {
    Llm,
    Template,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Answer {
    pub text: String,
    pub citations: Vec<String>,
    pub confidence: ConfidenceBand,
    pub generator: Generator,
}

/// Render the constrained prompt: instruction, numbered evidence blocks,
/// question, citation instruction. Byte-deterministic. Returns `None` for
/// empty evidence (the refusal path renders no prompt).
pub fn render_prompt(request: &AnswerRequest) -> Option<String> {
    if request.evidence.is_empty() {
        return None;
    }
    let mut prompt = String::new();
    prompt.push_str(
        "Answer the question based solely on the provided evidence. \
         If the evidence does not contain the answer, say so.\n\n",
    );
    prompt.push_str("Evidence:\n");
    for (i, (chunk_id, text)) in request.evidence.iter().enumerate() {
        prompt.push_str(&format!(
            "[E{}] (chunk {}) {}\n",
            i + 1,
            chunk_id,
            escape_evidence(text)
        ));
    }
    prompt.push_str(&format!("\nQuestion: {}\n", request.question));
    prompt.push_str("\nCite the evidence blocks you used by number, e.g. [E1].\n");
    Some(prompt)
}

/// Keep evidence text from opening a fake block: a line may not start with
/// `[E`.
fn escape_evidence(text: &str) -> String {
    let mut out = text.replace("\n[E", "\n[ E");
    if out.starts_with("[E") {
        out.insert(1, ' ');
    }
    out
}

fn citation_marker_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\[E(\d+)\]").unwrap())
}

/// Map `[En]` markers in generated text back to evidence chunk ids,
/// deduplicated in first-use order. Out-of-range markers are ignored.
pub fn parse_citations(text: &str, evidence: &[(String, String)]) -> Vec<String> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for cap in citation_marker_regex().captures_iter(text) {
        let Ok(n) = cap[1].parse::<usize>() else { continue };
        if n >= 1 && n <= evidence.len() {
            let chunk_id = &evidence[n - 1].0;
            if seen.insert(chunk_id.clone()) {
                out.push(chunk_id.clone());
            }
        }
    }
    out
}

/// Call the generation endpoint; on any failure fall back to the template
/// path with a warning.
pub fn generate_llm(request: &AnswerRequest, endpoint: &EndpointConfig, fields: &FieldMap) -> Answer {
    let Some(prompt) = render_prompt(request) else {
        return generate_template(request);
    };
    let mut payload = serde_json::Map::new();
    payload.insert(fields.prompt.clone(), serde_json::Value::from(prompt));
    payload.insert(
        fields.temperature.clone(),
        serde_json::Value::from(request.temperature),
    );
    payload.insert(
        fields.max_tokens.clone(),
        serde_json::Value::from(request.max_tokens),
    );
    let payload = serde_json::Value::Object(payload);
    match crate::remote::post_json(endpoint, &payload)
        .and_then(|response| crate::remote::extract_string(&response, &fields.response_text))
    {
        Ok(text) => {
            let citations = parse_citations(&text, &request.evidence);
            Answer {
                text,
                citations,
                confidence: request.confidence.clone(),
                generator: Generator::Llm,
            }
        }
        Err(err) => {
            log::warn!("generation endpoint failed ({err}); falling back to template answer");
            generate_template(request)
        }
    }
}

/// Deterministic offline answer: chain rendering when a chain exists,
/// retained-label listing otherwise, fixed refusal with no evidence.
pub fn generate_template(request: &AnswerRequest) -> Answer {
    if request.evidence.is_empty() {
        return Answer {
            text: REFUSAL_TEXT.to_string(),
            citations: Vec::new(),
            confidence: request.confidence.clone(),
            generator: Generator::Template,
        };
    }
    let citations: Vec<String> = request
        .evidence
        .iter()
        .take(3)
        .map(|(chunk_id, _)| chunk_id.clone())
        .collect();

    let text = if let Some(chain) = &request.chain {
        format!(
            "Evidence indicates {}. Supported by {} retrieved passages.",
            chain.render(),
            request.evidence.len()
        )
    } else {
        let mut lines = vec!["Retained labels from the retrieved evidence:".to_string()];
        let mut any = false;
        for (category, labels) in &request.retained {
            if !labels.is_empty() {
                any = true;
                lines.push(format!("- {category}: {}", labels.join(", ")));
            }
        }
        if !any {
            lines.push("- none met the two-chunk support threshold".to_string());
        }
        lines.join("\n")
    };

    Answer {
        text,
        citations,
        confidence: request.confidence.clone(),
        generator: Generator::Template,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::{Band, ChainSource};

    fn confidence() -> ConfidenceBand {
        ConfidenceBand {
            band: Band::Medium,
            rationale: "test".into(),
        }
    }

    fn request(evidence: Vec<(String, String)>, chain: Option<ReasoningChain>) -> AnswerRequest {
        AnswerRequest::new("Why does porosity form?", evidence, chain, vec![], confidence())
    }

    fn chain() -> ReasoningChain {
        ReasoningChain {
            nodes: vec![
                (Category::Parameter, "laser power".into()),
                (Category::Mechanism, "keyhole instability".into()),
                (Category::Defect, "porosity".into()),
            ],
            source: ChainSource::GraphPath,
            supporting_chunks: vec!["a::c0".into()],
        }
    }

    #[test]
    fn prompt_contains_numbered_blocks_in_order() {
        let req = request(
            vec![
                ("a::c0".into(), "First chunk.".into()),
                ("b::c1".into(), "Second chunk.".into()),
            ],
            None,
        );
        let prompt = render_prompt(&req).unwrap();
        let e1 = prompt.find("[E1] (chunk a::c0)").unwrap();
        let e2 = prompt.find("[E2] (chunk b::c1)").unwrap();
        assert!(e1 < e2);
        assert!(!prompt.contains("[E3]"));
        assert!(prompt.contains("based solely on the provided evidence"));
    }

    #[test]
    fn prompt_is_byte_deterministic() {
        let req = request(vec![("a::c0".into(), "Chunk text.".into())], Some(chain()));
        assert_eq!(render_prompt(&req), render_prompt(&req));
    }

    #[test]
    fn evidence_containing_block_marker_is_escaped() {
        let req = request(
            vec![(
                "a::c0".into(),
                "[E9] fake block\n[E10] another".into(),
            )],
            None,
        );
        let prompt = render_prompt(&req).unwrap();
        // Exactly one line still *starts* with a block marker.
        let markers = prompt
            .lines()
            .filter(|l| citation_marker_regex().find(l).is_some_and(|m| m.start() == 0))
            .count();
        assert_eq!(markers, 1);
    }

    #[test]
    fn empty_evidence_renders_no_prompt_and_refuses() {
        let req = request(vec![], None);
        assert!(render_prompt(&req).is_none());
        let answer = generate_template(&req);
        assert_eq!(answer.text, REFUSAL_TEXT);
        assert!(answer.citations.is_empty());
        assert_eq!(answer.generator, Generator::Template);
    }

    #[test]
    fn template_renders_chain_and_cites_top_three() {
        let evidence: Vec<(String, String)> = (0..5)
            .map(|i| (format!("d{i}::c0"), format!("text {i}")))
            .collect();
        let answer = generate_template(&request(evidence, Some(chain())));
        assert!(answer
            .text
            .contains("laser power → keyhole instability → porosity"));
        assert!(answer.text.contains("5 retrieved passages"));
        assert_eq!(answer.citations, vec!["d0::c0", "d1::c0", "d2::c0"]);
    }

    #[test]
    fn template_without_chain_lists_retained_labels() {
        let mut req = request(vec![("a::c0".into(), "text".into())], None);
        req.retained = vec![
            (Category::Defect, vec!["porosity".into()]),
            (Category::Parameter, vec![]),
        ];
        let answer = generate_template(&req);
        assert!(answer.text.contains("defect: porosity"));
        assert!(!answer.citations.is_empty());
    }

    #[test]
    fn citations_parse_and_dedupe_in_order() {
        let evidence = vec![
            ("a::c0".into(), String::new()),
            ("b::c0".into(), String::new()),
        ];
        let cites = parse_citations("See [E2], then [E1], then [E2] again, and [E7].", &evidence);
        assert_eq!(cites, vec!["b::c0", "a::c0"]);
    }

    #[test]
    fn llm_path_maps_reply_and_citations() {
        let reply = "Keyhole collapse traps gas [E2], see also [E1].";
        let (url, rx) = crate::remote::serve_once_capturing(
            serde_json::json!({ "text": reply }).to_string(),
        );
        let req = request(
            vec![
                ("a::c0".into(), "First chunk.".into()),
                ("b::c0".into(), "Second chunk.".into()),
            ],
            None,
        );
        let endpoint = EndpointConfig::new(url, "KGRAG_LLM_KEY");
        let answer = generate_llm(&req, &endpoint, &FieldMap::default());
        assert_eq!(answer.generator, Generator::Llm);
        assert_eq!(answer.text, reply);
        assert_eq!(answer.citations, vec!["b::c0", "a::c0"]);
        // The request payload carried the rendered prompt and knobs.
        let sent = rx.recv().unwrap();
        let body = &sent[sent.find("\r\n\r\n").unwrap() + 4..];
        let payload: serde_json::Value = serde_json::from_str(body).unwrap();
        assert!(payload["prompt"]
            .as_str()
            .unwrap()
            .contains("based solely on the provided evidence"));
        assert_eq!(payload["temperature"].as_f64().unwrap(), 0.1);
        assert_eq!(payload["max_tokens"].as_u64().unwrap(), 400);
    }
}
