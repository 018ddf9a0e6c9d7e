//! Recall math-relevant code from a source-code corpus: language selection,
//! LLM scoring on two rubrics, dual-threshold filtering, and code/text
//! mixture planning.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::llm::{ChatClient, ChatRequest};
use crate::prompt::PromptLibrary;

/// Snippets longer than this are rejected before any scoring call.
pub const MAX_SNIPPET_CHARS: usize = 100_000;

/// One code snippet flowing through the recall pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodeSnippet {
    #[serde(with = "crate::document::u128_hex")]
    pub snippet_id: u128,
    pub language: String,
    pub content: String,
    /// Educational-value score, 0..=5.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s_edu: Option<u8>,
    /// Math-relevance score, 0..=5.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s_math: Option<u8>,
    pub source: String,
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    pub flags: BTreeSet<String>,
}

impl CodeSnippet {
    pub fn new(
        snippet_id: u128,
        language: impl Into<String>,
        content: impl Into<String>,
        source: impl Into<String>,
    ) -> Self {
        CodeSnippet {
            snippet_id,
            language: language.into(),
            content: content.into(),
            s_edu: None,
            s_math: None,
            source: source.into(),
            flags: BTreeSet::new(),
        }
    }

    pub fn flag(&mut self, f: &str) {
        self.flags.insert(f.to_string());
    }

    pub fn has_flag(&self, f: &str) -> bool {
        self.flags.contains(f)
    }
}

/// The eleven retained languages, in canonical spelling.
pub const RETAINED_LANGUAGES: [&str; 11] = [
    "C",
    "C#",
    "C++",
    "Go",
    "Java",
    "JavaScript",
    "Python",
    "R",
    "Rust",
    "Shell",
    "SQL",
];

/// Canonical retained-language name for a raw label, if retained.
/// Case-insensitive, with common aliases ("cpp", "golang", "bash", …).
pub fn canonical_language(raw: &str) -> Option<&'static str> {
    match raw.trim().to_ascii_lowercase().as_str() {
        "c" => Some("C"),
        "c#" | "csharp" | "cs" => Some("C#"),
        "c++" | "cpp" | "cxx" | "cplusplus" => Some("C++"),
        "go" | "golang" => Some("Go"),
        "java" => Some("Java"),
        "javascript" | "js" | "node" | "nodejs" => Some("JavaScript"),
        "python" | "py" | "python3" | "python2" => Some("Python"),
        "r" => Some("R"),
        "rust" | "rs" => Some("Rust"),
        "shell" | "sh" | "bash" | "zsh" | "shellscript" => Some("Shell"),
        "sql" => Some("SQL"),
        _ => None,
    }
}

/// Keep only snippets in a retained language, normalizing the language
/// field to its canonical spelling. Idempotent.
pub fn select_languages(snippets: Vec<CodeSnippet>) -> Vec<CodeSnippet> {
    snippets
        .into_iter()
        .filter_map(|mut s| {
            canonical_language(&s.language).map(|canon| {
                s.language = canon.to_string();
                s
            })
        })
        .collect()
}

/// Parse the final "Score: N" line of a rubric response. Models often
/// restate the rubric, so the last occurrence wins; values outside 0..=5
/// are rejected.
pub fn parse_score(response: &str) -> Option<u8> {
    let mut found = None;
    let mut rest = response;
    while let Some(pos) = rest.find("Score:") {
        let after = rest[pos + "Score:".len()..].trim_start();
        let digits: String = after.chars().take_while(|c| c.is_ascii_digit()).collect();
        if !digits.is_empty() {
            if let Ok(v) = digits.parse::<u8>() {
                if v <= 5 {
                    found = Some(v);
                }
            }
        }
        rest = &rest[pos + "Score:".len()..];
    }
    found
}

/// Score one snippet on both rubrics: the math-relevance prompt first, then
/// the educational-value prompt (which carries the language). Unparseable
/// responses leave the score absent and set `score_parse_failed`; transport
/// failures (after the client's own retries) set `scoring_failed`. Snippets
/// over [`MAX_SNIPPET_CHARS`] are flagged `too_long` without any call.
pub fn score_snippet(
    mut snippet: CodeSnippet,
    scorer: &dyn ChatClient,
    prompts: &PromptLibrary,
) -> CodeSnippet {
    if snippet.content.chars().count() > MAX_SNIPPET_CHARS {
        snippet.flag("too_long");
        return snippet;
    }
    let math_prompt = prompts
        .get("code_math_score")
        .expect("builtin template")
        .fill(&snippet.content);
    let edu_prompt = prompts
        .get("code_edu_score")
        .expect("builtin template")
        .fill_with_code_type(&snippet.content, &snippet.language);

    // Scoring requests are deterministic judgments; sample at temperature 0.
    for (prompt, slot) in [(math_prompt, 0usize), (edu_prompt, 1usize)] {
        let request = ChatRequest::new(prompt).with_temperature(0.0);
        match scorer.complete(&request) {
            Ok(response) => match parse_score(&response) {
                Some(v) => {
                    if slot == 0 {
                        snippet.s_math = Some(v);
                    } else {
                        snippet.s_edu = Some(v);
                    }
                }
                None => snippet.flag("score_parse_failed"),
            },
            Err(e) => {
                log::warn!("scoring failed for {:032x}: {e}", snippet.snippet_id);
                snippet.flag("scoring_failed");
            }
        }
    }
    snippet
}

/// Dual-threshold gate: keep iff `s_edu ≥ min_edu` AND `s_math ≥ min_math`.
/// Returns `(kept, dropped)`; unscored snippets land in `dropped` with an
/// `unscored` flag.
pub fn threshold_filter(
    snippets: Vec<CodeSnippet>,
    min_edu: u8,
    min_math: u8,
) -> (Vec<CodeSnippet>, Vec<CodeSnippet>) {
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    for mut s in snippets {
        match (s.s_edu, s.s_math) {
            (Some(edu), Some(math)) if edu >= min_edu && math >= min_math => kept.push(s),
            (Some(_), Some(_)) => dropped.push(s),
            _ => {
                s.flag("unscored");
                dropped.push(s);
            }
        }
    }
    (kept, dropped)
}

/// Token allocation across sources with a cap on the code share.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixturePlan {
    pub code_fraction: f64,
    pub text_fraction: f64,
    pub per_source_tokens: BTreeMap<String, u64>,
}

#[derive(Debug, thiserror::Error)]
pub enum MixtureError {
    #[error("code_cap {0} outside [0,1]")]
    BadCap(f64),
    #[error("no text source present")]
    NoTextSource,
}

/// Sources named `code` (or namespaced `code:...` / `code/...`) count
/// against the code cap; everything else is text.
pub fn is_code_source(name: &str) -> bool {
    name == "code" || name.starts_with("code:") || name.starts_with("code/")
}

/// Plan the corpus mixture: text sources are taken in full; code tokens are
/// capped so the final code share never exceeds `code_cap`. With text
/// tokens `T` fixed, the largest admissible code count is
/// `C ≤ cap·(C + T)`, i.e. `C = cap/(1−cap) · T`, clamped to availability.
/// Multiple code sources fill greedily in name order.
pub fn plan_mixture(
    available: &BTreeMap<String, u64>,
    code_cap: f64,
) -> Result<MixturePlan, MixtureError> {
    if !(0.0..=1.0).contains(&code_cap) || code_cap.is_nan() {
        return Err(MixtureError::BadCap(code_cap));
    }
    if !available.keys().any(|k| !is_code_source(k)) {
        return Err(MixtureError::NoTextSource);
    }
    let text_total: u64 = available
        .iter()
        .filter(|(k, _)| !is_code_source(k))
        .map(|(_, v)| *v)
        .sum();
    let code_available: u64 = available
        .iter()
        .filter(|(k, _)| is_code_source(k))
        .map(|(_, v)| *v)
        .sum();
    let code_budget = if code_cap >= 1.0 {
        code_available
    } else {
        let max_code = (code_cap / (1.0 - code_cap) * text_total as f64).floor() as u64;
        code_available.min(max_code)
    };

    let mut per_source_tokens = BTreeMap::new();
    let mut remaining_code = code_budget;
    for (source, &tokens) in available {
        let allocated = if is_code_source(source) {
            let take = tokens.min(remaining_code);
            remaining_code -= take;
            take
        } else {
            tokens
        };
        per_source_tokens.insert(source.clone(), allocated);
    }

    let total = text_total + code_budget;
    let (code_fraction, text_fraction) = if total == 0 {
        (0.0, 1.0)
    } else {
        let cf = code_budget as f64 / total as f64;
        (cf, 1.0 - cf)
    };
    Ok(MixturePlan {
        code_fraction,
        text_fraction,
        per_source_tokens,
    })
}
