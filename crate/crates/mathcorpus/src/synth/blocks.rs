//! Generation of interleaved text-and-code block samples.
//!
//! The block prompt asks the model to mine a document for computations and
//! emit each one as four labeled sections — conditions, a LaTeX expression,
//! the stated result, and a fenced Python snippet. Each parsed block must
//! pass the static safety screen and (when an interpreter is available)
//! execute successfully; blocks failing either check are dropped. Survivors
//! are packed into one training sample in their original order.

use serde::{Deserialize, Serialize};

use crate::llm::{ChatClient, ChatRequest, LlmError};
use crate::prompt::PromptLibrary;
use crate::synth::exec::{execute_verified, ExecError, ExecLimits};
use crate::synth::safety::{safety_filter, SafetyTables};

/// Flag for replies in which no block could be recognized.
pub const FLAG_BLOCKS_PARSE_FAILED: &str = "blocks_parse_failed";

/// One block as parsed from a model reply, before any verification.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawBlock {
    pub conditions: Vec<String>,
    pub expression: String,
    pub result: String,
    pub code: String,
}

/// A block whose code passed the safety screen; `execution_output` is the
/// captured stdout when it also ran successfully, and absent in safety-only
/// mode.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerifiedBlock {
    pub conditions: Vec<String>,
    pub expression: String,
    pub result: String,
    pub code: String,
    pub execution_output: Option<String>,
}

/// An ordered, non-empty set of verified blocks from one document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockSample {
    pub blocks: Vec<VerifiedBlock>,
}

impl BlockSample {
    /// True when every block carries an execution output — the sample was
    /// verified end to end, not merely screened.
    pub fn fully_executed(&self) -> bool {
        self.blocks.iter().all(|b| b.execution_output.is_some())
    }

    /// Pack the blocks into one training-sample string: the four labeled
    /// sections per block, blocks separated by blank lines, with the
    /// captured output appended to each snippet as `# Output:` comments.
    pub fn pack(&self) -> String {
        let mut parts = Vec::with_capacity(self.blocks.len());
        for block in &self.blocks {
            let mut s = String::new();
            s.push_str("Conditions Needed:\n");
            for (i, cond) in block.conditions.iter().enumerate() {
                s.push_str(&format!("{}. {}\n", i + 1, cond));
            }
            s.push_str("\nComputation Expression:\n");
            s.push_str(&block.expression);
            s.push_str("\n\nComputation Result:\n");
            s.push_str(&block.result);
            s.push_str("\n\nPython Code Snippet:\n```python\n");
            s.push_str(&block.code);
            if let Some(output) = &block.execution_output {
                for line in output.trim_end_matches('\n').lines() {
                    s.push_str("\n# Output: ");
                    s.push_str(line);
                }
            }
            s.push_str("\n```");
            parts.push(s);
        }
        parts.join("\n\n")
    }
}

/// Tallies from one generation call, for pipeline accounting.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BlockGenReport {
    /// Blocks recognized in the reply.
    pub parsed: usize,
    /// Blocks dropped by the safety screen.
    pub safety_dropped: usize,
    /// Blocks dropped for failing execution.
    pub exec_dropped: usize,
    /// Set when the reply contained no recognizable block.
    pub flag: Option<&'static str>,
}

/// Whether generated code is executed after screening, or only screened
/// (interpreter unavailable).
#[derive(Debug)]
pub enum ExecPolicy<'a> {
    Execute(&'a ExecLimits),
    SafetyOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Label {
    Conditions,
    Expression,
    Result,
    Code,
}

/// Recognize a section label at the start of a (possibly decorated) line,
/// returning it plus any same-line content after the colon.
fn label_line(line: &str) -> Option<(Label, &str)> {
    let stripped = line
        .trim_start()
        .trim_start_matches(['#', '*', '-', ' ', '\t']);
    for (label, text) in [
        (Label::Conditions, "Conditions Needed:"),
        (Label::Expression, "Computation Expression:"),
        (Label::Result, "Computation Result:"),
        (Label::Code, "Python Code Snippet:"),
    ] {
        if let Some(rest) = stripped.strip_prefix(text) {
            return Some((label, rest.trim_matches('*').trim()));
        }
    }
    None
}

/// Strip a leading `1.` / `-` / `*` bullet from a condition line.
fn strip_bullet(line: &str) -> &str {
    let t = line.trim();
    if let Some(rest) = t.strip_prefix(['-', '*']) {
        return rest.trim();
    }
    let digits = t.chars().take_while(char::is_ascii_digit).count();
    if digits > 0 {
        if let Some(rest) = t[digits..].strip_prefix('.') {
            return rest.trim();
        }
    }
    t
}

/// Parse every recognizable four-part block from a reply, in order. A block
/// missing its expression, result, or code is dropped as unrecognizable.
pub fn parse_blocks(reply: &str) -> Vec<RawBlock> {
    #[derive(Default)]
    struct Partial {
        conditions: Vec<String>,
        expression: String,
        result: String,
        code_section: String,
    }

    let mut raw_parts: Vec<Partial> = Vec::new();
    let mut section: Option<Label> = None;
    let mut in_fence = false;

    for line in reply.lines() {
        // Fences guard the code section against label-like lines inside code.
        if !in_fence {
            if let Some((label, rest)) = label_line(line) {
                if label == Label::Conditions || raw_parts.is_empty() {
                    raw_parts.push(Partial::default());
                }
                section = Some(label);
                let current = raw_parts.last_mut().expect("pushed above");
                if !rest.is_empty() {
                    match label {
                        Label::Conditions => current.conditions.push(strip_bullet(rest).to_string()),
                        Label::Expression => current.expression.push_str(rest),
                        Label::Result => current.result.push_str(rest),
                        Label::Code => {}
                    }
                }
                continue;
            }
        }
        let Some(current) = raw_parts.last_mut() else {
            continue;
        };
        match section {
            Some(Label::Conditions) => {
                let item = strip_bullet(line);
                if !item.is_empty() {
                    current.conditions.push(item.to_string());
                }
            }
            Some(Label::Expression) => {
                if !line.trim().is_empty() {
                    if !current.expression.is_empty() {
                        current.expression.push('\n');
                    }
                    current.expression.push_str(line.trim());
                }
            }
            Some(Label::Result) => {
                if !line.trim().is_empty() {
                    if !current.result.is_empty() {
                        current.result.push('\n');
                    }
                    current.result.push_str(line.trim());
                }
            }
            Some(Label::Code) => {
                if line.trim().starts_with("```") {
                    in_fence = !in_fence;
                }
                current.code_section.push_str(line);
                current.code_section.push('\n');
            }
            None => {}
        }
    }

    raw_parts
        .into_iter()
        .filter_map(|p| {
            let code = crate::synth::translate::extract_python_fences(&p.code_section)
                .into_iter()
                .next()?;
            if p.expression.is_empty() || p.result.is_empty() || code.trim().is_empty() {
                return None;
            }
            Some(RawBlock {
                conditions: p.conditions,
                expression: p.expression,
                result: p.result,
                code,
            })
        })
        .collect()
}

/// Mine one document for computations and return the verified sample, plus
/// the drop tallies.
pub fn generate_blocks(
    doc_text: &str,
    client: &dyn ChatClient,
    prompts: &PromptLibrary,
    tables: &SafetyTables,
    policy: &ExecPolicy<'_>,
) -> Result<(Option<BlockSample>, BlockGenReport), LlmError> {
    let template = prompts
        .get("block_generate")
        .expect("builtin block template");
    let reply = client.complete(&ChatRequest::new(template.fill(doc_text)))?;

    let raw = parse_blocks(&reply);
    let mut report = BlockGenReport {
        parsed: raw.len(),
        ..BlockGenReport::default()
    };
    if raw.is_empty() {
        report.flag = Some(FLAG_BLOCKS_PARSE_FAILED);
        return Ok((None, report));
    }

    let mut survivors = Vec::new();
    for block in raw {
        if !safety_filter(&block.code, tables).allowed() {
            report.safety_dropped += 1;
            continue;
        }
        let execution_output = match policy {
            ExecPolicy::Execute(limits) => match execute_verified(&block.code, tables, limits) {
                Ok(outcome) if outcome.ok => Some(outcome.stdout),
                // Interpreter vanished mid-run: degrade to safety-only for
                // this block rather than losing it.
                Err(ExecError::InterpreterUnavailable(_)) => None,
                Ok(_) | Err(_) => {
                    report.exec_dropped += 1;
                    continue;
                }
            },
            ExecPolicy::SafetyOnly => None,
        };
        survivors.push(VerifiedBlock {
            conditions: block.conditions,
            expression: block.expression,
            result: block.result,
            code: block.code,
            execution_output,
        });
    }

    let sample = (!survivors.is_empty()).then_some(BlockSample { blocks: survivors });
    Ok((sample, report))
}
