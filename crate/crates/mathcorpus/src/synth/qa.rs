//! Question–answer extraction from web documents, and answer refinement.
//!
//! Extraction fills the QA-extraction prompt with the document text and
//! parses the reply's `Question:` / `Answer:` sections; a document with
//! nothing extractable comes back as the prompt's decline sentinel. Every
//! pair found is retained. Refinement re-asks one pair in one of three
//! styles and replaces only the answer — the question is preserved
//! byte-for-byte, whatever the model replies.

use serde::{Deserialize, Serialize};

use crate::llm::{ChatClient, ChatRequest, LlmError};
use crate::prompt::{PromptLibrary, RefineStyle};

/// Flag set on a document whose extraction reply was unparseable.
pub const FLAG_QA_PARSE_FAILED: &str = "qa_parse_failed";
/// Flag set when a refinement reply could not be parsed; the original pair
/// is kept.
pub const FLAG_QA_REFINE_FAILED: &str = "qa_refine_failed";

/// One extracted question, with its answer when the source provided one.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QaPair {
    pub question: String,
    /// Absent when the source document poses the question without answering.
    pub answer: Option<String>,
}

/// Result of one extraction call.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum QaExtraction {
    /// At least one pair, in document order.
    Pairs(Vec<QaPair>),
    /// The model declined with the sentinel: nothing to extract.
    NoQa,
    /// Neither sentinel nor any `Question:` line; raw reply kept for logs.
    ParseFailed { raw: String },
}

/// Parse every `Question:` / `Answer:` section of a reply, in order.
///
/// A line whose trimmed form starts with `Question:` begins a new pair;
/// `Answer:` switches the current pair to its answer. Later lines accumulate
/// into the active section. Pairs with an empty question are dropped; an
/// empty answer section means "no answer".
pub fn parse_qa_pairs(text: &str) -> Vec<QaPair> {
    enum Section {
        None,
        Question,
        Answer,
    }
    struct Partial {
        question: String,
        answer: String,
    }

    let mut pairs: Vec<Partial> = Vec::new();
    let mut section = Section::None;

    let append = |buf: &mut String, line: &str| {
        if !buf.is_empty() {
            buf.push('\n');
        }
        buf.push_str(line);
    };

    for line in text.lines() {
        let trimmed = line.trim_start();
        if let Some(rest) = trimmed.strip_prefix("Question:") {
            pairs.push(Partial {
                question: rest.trim().to_string(),
                answer: String::new(),
            });
            section = Section::Question;
        } else if let Some(rest) = trimmed.strip_prefix("Answer:") {
            if let Some(current) = pairs.last_mut() {
                if !rest.trim().is_empty() {
                    append(&mut current.answer, rest.trim());
                }
                section = Section::Answer;
            }
        } else if let Some(current) = pairs.last_mut() {
            match section {
                Section::Question => append(&mut current.question, line.trim()),
                Section::Answer => append(&mut current.answer, line.trim()),
                Section::None => {}
            }
        }
    }

    pairs
        .into_iter()
        .filter(|p| !p.question.trim().is_empty())
        .map(|p| {
            let answer = p.answer.trim().to_string();
            QaPair {
                question: p.question.trim().to_string(),
                answer: (!answer.is_empty()).then_some(answer),
            }
        })
        .collect()
}

/// Ask the client to extract QA pairs from one document's text.
pub fn extract_qa(
    doc_text: &str,
    client: &dyn ChatClient,
    prompts: &PromptLibrary,
) -> Result<QaExtraction, LlmError> {
    let template = prompts.get("qa_extract").expect("builtin QA template");
    let reply = client.complete(&ChatRequest::new(template.fill(doc_text)))?;
    if template.is_sentinel(&reply) {
        return Ok(QaExtraction::NoQa);
    }
    let pairs = parse_qa_pairs(&reply);
    if pairs.is_empty() {
        Ok(QaExtraction::ParseFailed { raw: reply })
    } else {
        Ok(QaExtraction::Pairs(pairs))
    }
}

/// Result of one refinement call.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RefineOutcome {
    /// The answer was replaced; the question is byte-identical to the input.
    Refined { pair: QaPair, style: RefineStyle },
    /// Reply unparseable (or it lost the answer); original pair unchanged.
    Failed {
        original: QaPair,
        flag: &'static str,
    },
}

impl RefineOutcome {
    /// The pair to carry forward either way.
    pub fn pair(&self) -> &QaPair {
        match self {
            RefineOutcome::Refined { pair, .. } => pair,
            RefineOutcome::Failed { original, .. } => original,
        }
    }
}

/// Refine one pair's answer in the given style.
///
/// The reply is parsed with the same `Question:` / `Answer:` grammar as
/// extraction. Only the parsed answer is used; the output question is always
/// the input question, byte for byte. A reply that parses to no pair — or
/// that drops the answer of a pair that had one — fails the refinement and
/// the original pair is returned.
pub fn refine_qa(
    pair: &QaPair,
    client: &dyn ChatClient,
    prompts: &PromptLibrary,
    style: RefineStyle,
) -> Result<RefineOutcome, LlmError> {
    let template = prompts
        .get(style.template_name())
        .expect("builtin refinement template");
    let example = match &pair.answer {
        Some(answer) => format!("Question: {}\nAnswer: {}", pair.question, answer),
        None => format!("Question: {}", pair.question),
    };
    let reply = client.complete(&ChatRequest::new(template.fill(&example)))?;

    let failed = RefineOutcome::Failed {
        original: pair.clone(),
        flag: FLAG_QA_REFINE_FAILED,
    };
    let Some(parsed) = parse_qa_pairs(&reply).into_iter().next() else {
        return Ok(failed);
    };
    if pair.answer.is_some() && parsed.answer.is_none() {
        return Ok(failed);
    }
    Ok(RefineOutcome::Refined {
        pair: QaPair {
            question: pair.question.clone(),
            answer: parsed.answer,
        },
        style,
    })
}
