//! Premium-subset selection and LLM rewriting of web documents.
//!
//! Selection keys on an educational-quality score (0..=5) with a
//! year-dependent bar: crawls from recent years get a more tolerant
//! threshold than older ones, where quality is sparser. Selected documents
//! are then rewritten by an LLM; the pre-rewrite text always survives in the
//! emitted record as provenance.

use crate::document::Document;
use crate::llm::{ChatClient, ChatRequest, LlmError};
use crate::prompt::PromptLibrary;
use crate::synth::SynthRecord;

/// Flag set when the educational scorer failed; the document is dropped.
pub const FLAG_EDU_SCORE_FAILED: &str = "edu_score_failed";
/// Flag set when the rewrite call failed after retries; text kept as-is.
pub const FLAG_REFINE_FAILED: &str = "refine_failed";
/// Flag set when the model replied with empty text; text kept as-is.
pub const FLAG_REFINE_EMPTY: &str = "refine_empty";

/// Anything that can rate a document's educational quality on a 0..=5 scale.
pub trait EduScorer: Send + Sync {
    fn score(&self, text: &str) -> Result<u8, LlmError>;
}

/// Scorer returning one fixed value; for tests and dry runs.
pub struct FixedEduScorer(pub u8);

impl EduScorer for FixedEduScorer {
    fn score(&self, _text: &str) -> Result<u8, LlmError> {
        Ok(self.0)
    }
}

/// LLM-backed scorer: fills the given 0..=5 rubric prompt with the document
/// text at temperature 0 and parses the last `Score: N` line of the reply.
pub struct LlmEduScorer<'a> {
    pub client: &'a dyn ChatClient,
    pub prompts: &'a PromptLibrary,
    /// Name of the rubric template to fill (must score 0..=5).
    pub template: &'a str,
}

impl EduScorer for LlmEduScorer<'_> {
    fn score(&self, text: &str) -> Result<u8, LlmError> {
        let template = self
            .prompts
            .get(self.template)
            .map_err(|e| LlmError::BadResponse(e.to_string()))?;
        let reply = self
            .client
            .complete(&ChatRequest::new(template.fill(text)).with_temperature(0.0))?;
        crate::coderecall::parse_score(&reply)
            .ok_or_else(|| LlmError::BadResponse(format!("no parseable score in {reply:?}")))
    }
}

/// Year-dependent score bars for [`pro_filter`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProThresholds {
    /// First year considered "recent".
    pub recent_year: i32,
    /// Minimum score for documents from `recent_year` onward.
    pub recent_min: u8,
    /// Minimum score for older documents.
    pub strict_min: u8,
}

impl Default for ProThresholds {
    fn default() -> Self {
        ProThresholds {
            recent_year: 2023,
            recent_min: 3,
            strict_min: 4,
        }
    }
}

/// Decide whether a document enters the premium subset, recording its score.
///
/// Keeps iff the score clears the bar for the document's crawl year. A
/// scorer failure drops the document and flags it.
pub fn pro_filter(
    doc: &mut Document,
    year: i32,
    scorer: &dyn EduScorer,
    thresholds: &ProThresholds,
) -> bool {
    let text = doc.text.clone().unwrap_or_default();
    match scorer.score(&text) {
        Ok(score) => {
            doc.edu_score = Some(score);
            let bar = if year >= thresholds.recent_year {
                thresholds.recent_min
            } else {
                thresholds.strict_min
            };
            score >= bar
        }
        Err(_) => {
            doc.flags.insert(FLAG_EDU_SCORE_FAILED.to_string());
            false
        }
    }
}

/// A rewrite attempt: the document to carry forward, plus the provenance
/// record when the rewrite succeeded.
#[derive(Debug)]
pub struct ProRefineOutcome {
    pub doc: Document,
    /// Present only on success; retains the original text.
    pub record: Option<SynthRecord>,
    /// Present only on failure.
    pub flag: Option<&'static str>,
}

/// Rewrite one selected document's text with the refinement prompt.
///
/// On success the document's text is replaced by the reply and a
/// provenance record (original and refined text) is returned alongside. On
/// an empty reply or a failed call the document is returned unmodified,
/// flagged.
pub fn pro_refine(
    mut doc: Document,
    client: &dyn ChatClient,
    prompts: &PromptLibrary,
) -> ProRefineOutcome {
    let template = prompts.get("web_refine").expect("builtin rewrite template");
    let text = doc.text.clone().unwrap_or_default();
    match client.complete(&ChatRequest::new(template.fill(&text))) {
        Ok(reply) => {
            let refined = reply.trim();
            if refined.is_empty() {
                doc.flags.insert(FLAG_REFINE_EMPTY.to_string());
                return ProRefineOutcome {
                    doc,
                    record: None,
                    flag: Some(FLAG_REFINE_EMPTY),
                };
            }
            let record = SynthRecord::pro_refined(
                doc.doc_id,
                client.name(),
                text,
                refined.to_string(),
            );
            doc.text = Some(refined.to_string());
            ProRefineOutcome {
                doc,
                record: Some(record),
                flag: None,
            }
        }
        Err(_) => {
            doc.flags.insert(FLAG_REFINE_FAILED.to_string());
            ProRefineOutcome {
                doc,
                record: None,
                flag: Some(FLAG_REFINE_FAILED),
            }
        }
    }
}
