//! Translation of non-Python code snippets into Python.
//!
//! The translation prompt carries the source snippet and its language; the
//! reply must contain exactly one fenced Python block, which is then put
//! through the static safety screen before being emitted. A snippet the
//! model declines comes back as the `[Untranslatable]` sentinel.

use crate::coderecall::CodeSnippet;
use crate::llm::{ChatClient, ChatRequest, LlmError};
use crate::prompt::PromptLibrary;
use crate::synth::safety::{safety_filter, SafetyTables, SafetyVerdict};

/// Flag for replies with zero or several fenced blocks.
pub const FLAG_TRANSLATE_PARSE_FAILED: &str = "translate_parse_failed";
/// Flag for translations rejected by the safety screen.
pub const FLAG_TRANSLATE_UNSAFE: &str = "translate_unsafe";

/// Result of one translation call.
#[derive(Debug, Clone)]
pub enum TranslateOutcome {
    /// Python source that passed the safety screen.
    Translated(String),
    /// The model declined with the sentinel.
    Untranslatable,
    /// Reply carried zero or more than one fenced Python block.
    ParseFailed { fenced_blocks: usize },
    /// The extracted code failed the safety screen; verdict retained.
    Unsafe(SafetyVerdict),
}

/// Extract the bodies of all ```python fenced blocks, in order.
///
/// A fence opens with ```python (or ```py) alone on a line and closes with
/// ``` alone on a line; an unclosed fence yields no block.
pub fn extract_python_fences(text: &str) -> Vec<String> {
    let mut blocks = Vec::new();
    let mut current: Option<String> = None;
    for line in text.lines() {
        let trimmed = line.trim();
        match &mut current {
            None => {
                let info = trimmed.strip_prefix("```").map(str::trim);
                if matches!(info, Some("python") | Some("py")) {
                    current = Some(String::new());
                }
            }
            Some(body) => {
                if trimmed == "```" {
                    blocks.push(std::mem::take(body));
                    current = None;
                } else {
                    if !body.is_empty() {
                        body.push('\n');
                    }
                    body.push_str(line);
                }
            }
        }
    }
    blocks
}

/// Translate one snippet to Python. Call only for `language != "Python"`;
/// the pipeline orders Python snippets around translation entirely.
pub fn translate_code(
    snippet: &CodeSnippet,
    client: &dyn ChatClient,
    prompts: &PromptLibrary,
    tables: &SafetyTables,
) -> Result<TranslateOutcome, LlmError> {
    debug_assert_ne!(snippet.language, "Python", "translating Python is a no-op");
    let template = prompts
        .get("code_translate")
        .expect("builtin translation template");
    let filled = template.fill_with_code_type(&snippet.content, &snippet.language);
    let reply = client.complete(&ChatRequest::new(filled))?;

    if template.is_sentinel(&reply) {
        return Ok(TranslateOutcome::Untranslatable);
    }
    let mut fences = extract_python_fences(&reply);
    if fences.len() != 1 {
        return Ok(TranslateOutcome::ParseFailed {
            fenced_blocks: fences.len(),
        });
    }
    let code = fences.pop().expect("exactly one block");
    let verdict = safety_filter(&code, tables);
    if !verdict.allowed() {
        return Ok(TranslateOutcome::Unsafe(verdict));
    }
    Ok(TranslateOutcome::Translated(code))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::MockChatClient;
    use crate::synth::safety::ViolationCategory;

    fn snippet() -> CodeSnippet {
        CodeSnippet::new(
            1,
            "Java",
            "class A { public static void main(String[] a) { System.out.println(1); } }",
            "code",
        )
    }

    fn translate(reply: &str) -> TranslateOutcome {
        let client = MockChatClient::replies([reply]);
        translate_code(
            &snippet(),
            &client,
            &PromptLibrary::builtin(),
            SafetyTables::builtin(),
        )
        .unwrap()
    }

    #[test]
    fn sentinel_reply_is_untranslatable() {
        assert!(matches!(
            translate("[Untranslatable]"),
            TranslateOutcome::Untranslatable
        ));
        assert!(matches!(
            translate("`[Untranslatable]`"),
            TranslateOutcome::Untranslatable
        ));
    }

    #[test]
    fn single_fenced_block_is_extracted() {
        let out = translate("Here you go:\n```python\nprint(1)\n```\nEnjoy!");
        match out {
            TranslateOutcome::Translated(code) => assert_eq!(code, "print(1)"),
            other => panic!("expected translation, got {other:?}"),
        }
    }

    #[test]
    fn unsafe_translation_is_rejected_with_verdict() {
        let out = translate("```python\nimport socket\nprint(1)\n```");
        match out {
            TranslateOutcome::Unsafe(verdict) => {
                assert!(verdict.has_category(ViolationCategory::Network));
            }
            other => panic!("expected safety rejection, got {other:?}"),
        }
    }

    #[test]
    fn zero_or_multiple_fences_fail_parsing() {
        assert!(matches!(
            translate("no code at all"),
            TranslateOutcome::ParseFailed { fenced_blocks: 0 }
        ));
        let two = "```python\nprint(1)\n```\n```python\nprint(2)\n```";
        assert!(matches!(
            translate(two),
            TranslateOutcome::ParseFailed { fenced_blocks: 2 }
        ));
    }

    #[test]
    fn unclosed_fence_counts_as_no_block() {
        assert!(matches!(
            translate("```python\nprint(1)"),
            TranslateOutcome::ParseFailed { fenced_blocks: 0 }
        ));
    }

    #[test]
    fn fence_interior_is_verbatim_including_indentation() {
        let reply = "```python\ndef f():\n    return 2\n\nprint(f())\n```";
        let fences = extract_python_fences(reply);
        assert_eq!(fences, vec!["def f():\n    return 2\n\nprint(f())"]);
    }

    #[test]
    fn prompt_carries_language_and_content() {
        let client = MockChatClient::replies(["```python\nprint(1)\n```"]);
        translate_code(
            &snippet(),
            &client,
            &PromptLibrary::builtin(),
            SafetyTables::builtin(),
        )
        .unwrap();
        let calls = client.calls();
        assert!(calls[0].prompt.contains("System.out.println"));
    }
}
