//! Prompt templates for every LLM-backed operation.
//!
//! Template bodies ship compiled into the binary and can be overridden from
//! a directory at runtime. Placeholders are literal `<EXAMPLE>` and
//! `<CODE_TYPE>` markers; validation pins each template's expected
//! placeholder usage so a broken override fails fast, not mid-run.

use std::collections::BTreeMap;
use std::path::Path;

pub const EXAMPLE_PLACEHOLDER: &str = "<EXAMPLE>";
pub const CODE_TYPE_PLACEHOLDER: &str = "<CODE_TYPE>";

/// QA-refinement style variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RefineStyle {
    /// Teacher-voice refinement.
    Vanilla,
    /// Explain-like-I'm-five phrasing.
    Eli5,
    /// ELI5 plus an explicit information-completeness requirement.
    Eli5Ic,
}

impl RefineStyle {
    pub const ALL: [RefineStyle; 3] = [RefineStyle::Vanilla, RefineStyle::Eli5, RefineStyle::Eli5Ic];

    pub fn template_name(&self) -> &'static str {
        match self {
            RefineStyle::Vanilla => "qa_refine_vanilla",
            RefineStyle::Eli5 => "qa_refine_eli5",
            RefineStyle::Eli5Ic => "qa_refine_eli5_ic",
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            RefineStyle::Vanilla => "vanilla",
            RefineStyle::Eli5 => "eli5",
            RefineStyle::Eli5Ic => "eli5_ic",
        }
    }
}

/// Static registry: template name → (needs `<CODE_TYPE>`, sentinel reply).
/// The sentinel is the exact string a model returns to decline the task.
const REGISTRY: [(&str, bool, Option<&str>); 10] = [
    ("web_math_score", false, None),
    ("web_refine", false, None),
    ("code_math_score", false, None),
    ("code_edu_score", true, None),
    ("qa_extract", false, Some("[NO QA]")),
    ("qa_refine_vanilla", false, None),
    ("qa_refine_eli5", false, None),
    ("qa_refine_eli5_ic", false, None),
    ("code_translate", false, Some("[Untranslatable]")),
    ("block_generate", false, None),
];

const BUILTIN_BODIES: [(&str, &str); 10] = [
    ("web_math_score", include_str!("../data/prompts/web_math_score.txt")),
    ("web_refine", include_str!("../data/prompts/web_refine.txt")),
    ("code_math_score", include_str!("../data/prompts/code_math_score.txt")),
    ("code_edu_score", include_str!("../data/prompts/code_edu_score.txt")),
    ("qa_extract", include_str!("../data/prompts/qa_extract.txt")),
    ("qa_refine_vanilla", include_str!("../data/prompts/qa_refine_vanilla.txt")),
    ("qa_refine_eli5", include_str!("../data/prompts/qa_refine_eli5.txt")),
    ("qa_refine_eli5_ic", include_str!("../data/prompts/qa_refine_eli5_ic.txt")),
    ("code_translate", include_str!("../data/prompts/code_translate.txt")),
    ("block_generate", include_str!("../data/prompts/block_generate.txt")),
];

#[derive(Debug, thiserror::Error)]
pub enum PromptError {
    #[error("unknown template name {0:?}")]
    UnknownName(String),
    #[error("template {name:?}: placeholder {placeholder} occurs {found} times, expected {expected}")]
    BadPlaceholder {
        name: String,
        placeholder: &'static str,
        found: usize,
        expected: &'static str,
    },
    #[error("i/o error on {0}: {1}")]
    Io(std::path::PathBuf, std::io::Error),
}

/// One prompt template with its placeholder contract.
#[derive(Debug, Clone)]
pub struct PromptTemplate {
    pub name: String,
    pub body: String,
    /// Exact model reply that means "nothing to produce".
    pub sentinel: Option<String>,
    needs_code_type: bool,
}

impl PromptTemplate {
    fn validated(
        name: &str,
        body: String,
        needs_code_type: bool,
        sentinel: Option<&str>,
    ) -> Result<Self, PromptError> {
        let examples = body.matches(EXAMPLE_PLACEHOLDER).count();
        if examples != 1 {
            return Err(PromptError::BadPlaceholder {
                name: name.to_string(),
                placeholder: EXAMPLE_PLACEHOLDER,
                found: examples,
                expected: "exactly 1",
            });
        }
        // The shipped code-edu body repeats <CODE_TYPE>, so the contract is
        // "at least once" rather than exactly once.
        if needs_code_type && !body.contains(CODE_TYPE_PLACEHOLDER) {
            return Err(PromptError::BadPlaceholder {
                name: name.to_string(),
                placeholder: CODE_TYPE_PLACEHOLDER,
                found: 0,
                expected: "at least 1",
            });
        }
        Ok(PromptTemplate {
            name: name.to_string(),
            body,
            sentinel: sentinel.map(str::to_string),
            needs_code_type,
        })
    }

    /// Whether this template expects a `<CODE_TYPE>` substitution.
    pub fn needs_code_type(&self) -> bool {
        self.needs_code_type
    }

    /// Substitute the example text (and nothing else).
    pub fn fill(&self, example: &str) -> String {
        self.body.replace(EXAMPLE_PLACEHOLDER, example)
    }

    /// Substitute a language name into every `<CODE_TYPE>` marker, then the
    /// example. Order matters: example text is user data and must never be
    /// re-scanned for placeholders.
    pub fn fill_with_code_type(&self, example: &str, code_type: &str) -> String {
        self.body
            .replace(CODE_TYPE_PLACEHOLDER, code_type)
            .replace(EXAMPLE_PLACEHOLDER, example)
    }

    /// True when a model reply is this template's decline sentinel.
    pub fn is_sentinel(&self, reply: &str) -> bool {
        match &self.sentinel {
            Some(s) => {
                let trimmed = reply.trim();
                trimmed == s || trimmed == format!("`{s}`") || trimmed == format!("\"{s}\"")
            }
            None => false,
        }
    }
}

/// All templates, keyed by name.
#[derive(Debug, Clone)]
pub struct PromptLibrary {
    templates: BTreeMap<String, PromptTemplate>,
}

impl PromptLibrary {
    /// The compiled-in template set.
    pub fn builtin() -> Self {
        let bodies: BTreeMap<&str, &str> = BUILTIN_BODIES.iter().copied().collect();
        let templates = REGISTRY
            .iter()
            .map(|(name, needs_ct, sentinel)| {
                let body = bodies[name].to_string();
                let t = PromptTemplate::validated(name, body, *needs_ct, *sentinel)
                    .expect("builtin templates are valid");
                (name.to_string(), t)
            })
            .collect();
        PromptLibrary { templates }
    }

    /// Builtin set with bodies overridden from `<name>.txt` files in `dir`.
    /// Only known template names may be overridden; each override is
    /// validated against the same placeholder contract.
    pub fn with_overrides(dir: &Path) -> Result<Self, PromptError> {
        let mut lib = Self::builtin();
        let entries = std::fs::read_dir(dir).map_err(|e| PromptError::Io(dir.into(), e))?;
        for entry in entries {
            let path = entry.map_err(|e| PromptError::Io(dir.into(), e))?.path();
            if path.extension().and_then(|e| e.to_str()) != Some("txt") {
                continue;
            }
            let name = path
                .file_stem()
                .and_then(|s| s.to_str())
                .unwrap_or_default()
                .to_string();
            let reg = REGISTRY
                .iter()
                .find(|(n, _, _)| *n == name)
                .ok_or_else(|| PromptError::UnknownName(name.clone()))?;
            let body =
                std::fs::read_to_string(&path).map_err(|e| PromptError::Io(path.clone(), e))?;
            let template = PromptTemplate::validated(&name, body, reg.1, reg.2)?;
            lib.templates.insert(name, template);
        }
        Ok(lib)
    }

    pub fn get(&self, name: &str) -> Result<&PromptTemplate, PromptError> {
        self.templates
            .get(name)
            .ok_or_else(|| PromptError::UnknownName(name.to_string()))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.templates.keys().map(String::as_str)
    }
}
