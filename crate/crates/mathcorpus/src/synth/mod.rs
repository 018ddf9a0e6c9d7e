//! LLM-backed synthesis over curated documents and code.
//!
//! Four product kinds, one record envelope:
//! - question–answer pairs extracted from web documents and optionally
//!   refined in one of three styles ([`qa`]),
//! - non-Python code snippets translated to Python ([`translate`]),
//! - interleaved text-and-code block samples, statically screened and
//!   verified by execution ([`blocks`] atop [`safety`] and [`exec`]),
//! - premium-subset documents rewritten by an LLM ([`pro`]).
//!
//! Every generated artifact is wrapped in a [`SynthRecord`] carrying the
//! source document id and the producing model's name, and is serialized as
//! JSON Lines with a kind-discriminated payload.

pub mod blocks;
pub mod exec;
pub mod pro;
pub mod qa;
pub mod safety;
pub mod translate;

use serde::{Deserialize, Serialize};

pub use blocks::{BlockSample, VerifiedBlock};
pub use exec::{ExecLimits, ExecOutcome};
pub use qa::QaPair;
pub use safety::{SafetyTables, SafetyVerdict, ViolationCategory};

/// Kind-specific content of a [`SynthRecord`]. Serialized adjacently tagged:
/// `{"kind": "...", "payload": {...}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "snake_case")]
pub enum SynthPayload {
    /// An extracted (and possibly refined) question–answer pair.
    Qa {
        question: String,
        answer: Option<String>,
        /// Refinement style label when the pair was refined; absent for raw
        /// extractions.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        style: Option<String>,
    },
    /// A snippet translated into Python from another language.
    TranslatedCode {
        /// Source language of the original snippet.
        language: String,
        python: String,
    },
    /// Interleaved text-and-code blocks packed into one training sample.
    TextCodeBlock {
        packed: String,
        blocks: Vec<VerifiedBlock>,
    },
    /// A document rewrite; the pre-rewrite text rides along as provenance.
    ProRefined {
        original_text: String,
        refined_text: String,
    },
}

/// Envelope for one synthesized artifact.
///
/// `verified` means "passed this kind's strongest check": every block
/// executed successfully (text-code blocks), or the code passed the static
/// safety screen (translations). QA pairs and rewrites carry no machine
/// check and are always `verified = false`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthRecord {
    /// Identifier of the document the artifact was synthesized from.
    #[serde(with = "crate::document::u128_hex")]
    pub source_doc: u128,
    /// Name of the model (client) that produced the artifact.
    pub model_name: String,
    pub verified: bool,
    #[serde(flatten)]
    pub payload: SynthPayload,
}

impl SynthRecord {
    /// Wrap an extracted or refined QA pair.
    pub fn qa(source_doc: u128, model_name: &str, pair: &QaPair, style: Option<&str>) -> Self {
        SynthRecord {
            source_doc,
            model_name: model_name.to_string(),
            verified: false,
            payload: SynthPayload::Qa {
                question: pair.question.clone(),
                answer: pair.answer.clone(),
                style: style.map(str::to_string),
            },
        }
    }

    /// Wrap a completed translation (already safety-screened).
    pub fn translated(source_doc: u128, model_name: &str, language: &str, python: String) -> Self {
        SynthRecord {
            source_doc,
            model_name: model_name.to_string(),
            verified: true,
            payload: SynthPayload::TranslatedCode {
                language: language.to_string(),
                python,
            },
        }
    }

    /// Wrap a block sample. `verified` is true only when every block carries
    /// an execution output (nothing ran in safety-only mode).
    pub fn text_code_block(source_doc: u128, model_name: &str, sample: &BlockSample) -> Self {
        SynthRecord {
            source_doc,
            model_name: model_name.to_string(),
            verified: sample.fully_executed(),
            payload: SynthPayload::TextCodeBlock {
                packed: sample.pack(),
                blocks: sample.blocks.clone(),
            },
        }
    }

    /// Wrap a document rewrite, keeping the original text as provenance.
    pub fn pro_refined(
        source_doc: u128,
        model_name: &str,
        original_text: String,
        refined_text: String,
    ) -> Self {
        SynthRecord {
            source_doc,
            model_name: model_name.to_string(),
            verified: false,
            payload: SynthPayload::ProRefined {
                original_text,
                refined_text,
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn record_round_trips_through_json() {
        let records = vec![
            SynthRecord::qa(
                7,
                "mock",
                &QaPair {
                    question: "What is 2+2?".into(),
                    answer: Some("4".into()),
                },
                Some("eli5"),
            ),
            SynthRecord::translated(8, "mock", "Java", "print(1)\n".into()),
            SynthRecord::pro_refined(9, "mock", "raw".into(), "clean".into()),
        ];
        for record in records {
            let json = serde_json::to_string(&record).unwrap();
            let back: SynthRecord = serde_json::from_str(&json).unwrap();
            assert_eq!(back, record);
        }
    }

    #[test]
    fn kind_tags_are_stable() {
        let record = SynthRecord::translated(1, "m", "Go", String::new());
        let json = serde_json::to_string(&record).unwrap();
        assert!(json.contains("\"kind\":\"translated_code\""), "{json}");
        assert!(json.contains("\"payload\":"), "{json}");

        let record = SynthRecord::qa(
            1,
            "m",
            &QaPair {
                question: "q".into(),
                answer: None,
            },
            None,
        );
        let json = serde_json::to_string(&record).unwrap();
        assert!(json.contains("\"kind\":\"qa\""), "{json}");
        // Unset style is omitted entirely.
        assert!(!json.contains("style"), "{json}");
    }
}
