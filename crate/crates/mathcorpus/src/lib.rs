//! Curation pipeline for building math-focused pretraining corpora from web
//! crawl archives.
//!
//! The library is organized around the lifecycle of a document:
//!
//! 1. [`ingest`] — stream WARC archives, filter URLs and language.
//! 2. [`mathhtml`] — rewrite math markup (MathML, KaTeX, sub/sup, entities)
//!    into LaTeX before any text extraction can destroy it.
//! 3. [`extract`] — two extraction profiles: a cheap first pass and a
//!    boilerplate-pruning quality pass.
//! 4. [`classifier`] — seeded, deterministic text classifier used for both
//!    language ID and math scoring.
//! 5. [`dedup`] — MinHash/LSH near-duplicate clustering.
//! 6. [`decontam`] — exact n-gram benchmark decontamination.
//! 7. [`coderecall`] — recover math-relevant code from source corpora.
//! 8. [`synth`] — LLM-backed synthesis (QA, code translation, verified
//!    text-and-code blocks) with a static-analysis safety gate.
//! 9. [`pipeline`] — config-driven orchestration with a reproducible
//!    manifest.

pub mod classifier;
pub mod coderecall;
pub mod decontam;
pub mod dedup;
pub mod document;
pub mod extract;
pub mod hash;
pub mod html;
pub mod ingest;
pub mod jsonl;
pub mod llm;
pub mod mathhtml;
pub mod pipeline;
pub mod prompt;
pub mod synth;
pub mod testkit;
pub mod unionfind;

pub use classifier::{normalize_text, NormalizationRules};
pub use document::{Document, Stage};
