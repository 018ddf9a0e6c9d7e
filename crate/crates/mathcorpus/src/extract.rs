//! Main-content text extraction with two profiles: a permissive fast pass
//! and a boilerplate-pruning quality pass.
//!
//! One rule-based extractor serves both profiles; they differ only in which
//! subtrees are pruned and whether link-heavy blocks are dropped. Because
//! every quality-only pruned tag is itself a block boundary, the quality
//! output is always a subsequence of the fast output's blocks — the
//! coarse-to-fine contract the pipeline relies on.

use std::collections::BTreeSet;

use rayon::prelude::*;

use crate::document::{Document, Stage};
use crate::html::{decode_entities, is_void_element, Token, Tokenizer};

/// Which extraction pass a profile implements.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtractionMode {
    Fast,
    Quality,
}

/// Tunable extraction behaviour. Build via [`ExtractionProfile::fast`] /
/// [`ExtractionProfile::quality`] and adjust fields as needed.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ExtractionProfile {
    pub mode: ExtractionMode,
    /// Documents whose extracted text is shorter than this are flagged
    /// `too_short` by [`stage_extract`] and not advanced.
    pub min_text_block_chars: usize,
    /// Quality mode drops blocks whose anchored-character fraction exceeds
    /// this.
    pub max_link_density: f64,
    /// Tag names whose entire subtrees are dropped.
    pub prune_tags: BTreeSet<String>,
}

/// Subtrees no profile should ever emit text from.
const BASE_PRUNE_TAGS: [&str; 6] = ["script", "style", "noscript", "template", "head", "iframe"];
/// Boilerplate subtrees pruned only by the quality profile. All of these are
/// block-level, which keeps quality blocks a subsequence of fast blocks.
const QUALITY_PRUNE_TAGS: [&str; 4] = ["nav", "footer", "aside", "form"];

impl ExtractionProfile {
    pub fn fast() -> Self {
        ExtractionProfile {
            mode: ExtractionMode::Fast,
            min_text_block_chars: 25,
            max_link_density: 1.0, // never drops a block
            prune_tags: BASE_PRUNE_TAGS.iter().map(|s| s.to_string()).collect(),
        }
    }

    pub fn quality() -> Self {
        let mut prune_tags: BTreeSet<String> =
            BASE_PRUNE_TAGS.iter().map(|s| s.to_string()).collect();
        prune_tags.extend(QUALITY_PRUNE_TAGS.iter().map(|s| s.to_string()));
        ExtractionProfile {
            mode: ExtractionMode::Quality,
            min_text_block_chars: 25,
            max_link_density: 0.5,
            prune_tags,
        }
    }

    /// The stage a document reaches after this profile's extraction pass.
    pub fn target_stage(&self) -> Stage {
        match self.mode {
            ExtractionMode::Fast => Stage::Stage1Extracted,
            ExtractionMode::Quality => Stage::Stage2Extracted,
        }
    }

    /// True when `self` prunes at least everything `coarser` prunes, so its
    /// output blocks form a subsequence of the coarser profile's blocks.
    pub fn refines(&self, coarser: &ExtractionProfile) -> bool {
        coarser.prune_tags.is_subset(&self.prune_tags)
            && self.max_link_density <= coarser.max_link_density
    }
}

/// Tags that terminate the current text block.
fn is_block_tag(name: &str) -> bool {
    matches!(
        name,
        "address" | "article" | "aside" | "blockquote" | "br" | "caption" | "dd" | "details"
            | "div" | "dl" | "dt" | "fieldset" | "figcaption" | "figure" | "footer" | "form"
            | "h1" | "h2" | "h3" | "h4" | "h5" | "h6" | "header" | "hr" | "li" | "main" | "nav"
            | "ol" | "p" | "pre" | "section" | "summary" | "table" | "tbody" | "td" | "tfoot"
            | "th" | "thead" | "tr" | "ul"
    )
}

#[derive(Default)]
struct BlockAccum {
    text: String,
    total_chars: usize,
    anchored_chars: usize,
}

impl BlockAccum {
    fn push_text(&mut self, decoded: &str, anchored: bool) {
        self.text.push_str(decoded);
        self.text.push(' '); // token soup; collapsed at flush
        let n = decoded.chars().filter(|c| !c.is_whitespace()).count();
        self.total_chars += n;
        if anchored {
            self.anchored_chars += n;
        }
    }

    /// Finish the block: whitespace-collapse and apply the link-density
    /// gate. Returns the block text if it survives.
    fn flush(&mut self, profile: &ExtractionProfile) -> Option<String> {
        let collapsed = self.text.split_whitespace().collect::<Vec<_>>().join(" ");
        let (total, anchored) = (self.total_chars, self.anchored_chars);
        *self = BlockAccum::default();
        if collapsed.is_empty() {
            return None;
        }
        if profile.mode == ExtractionMode::Quality
            && total > 0
            && anchored as f64 / total as f64 > profile.max_link_density
        {
            return None;
        }
        Some(collapsed)
    }
}

/// Extract main-content blocks in document order. Building block on which
/// [`extract_text`] and the subsequence invariant tests sit.
pub fn extract_blocks(html: &str, profile: &ExtractionProfile) -> Vec<String> {
    let mut blocks = Vec::new();
    let mut current = BlockAccum::default();
    // Stack of open elements: (name, subtree is pruned).
    let mut stack: Vec<(String, bool)> = Vec::new();
    let mut anchor_depth = 0usize;

    let flush = |current: &mut BlockAccum, blocks: &mut Vec<String>| {
        if let Some(block) = current.flush(profile) {
            blocks.push(block);
        }
    };

    for token in Tokenizer::new(html) {
        match token {
            Token::Open(tag) => {
                let pruned_here = profile.prune_tags.contains(tag.name.as_str());
                let parent_pruned = stack.last().is_some_and(|(_, p)| *p);
                if is_block_tag(&tag.name) {
                    flush(&mut current, &mut blocks);
                }
                if tag.self_closing || is_void_element(&tag.name) {
                    continue;
                }
                if tag.name == "a" {
                    anchor_depth += 1;
                }
                stack.push((tag.name, pruned_here || parent_pruned));
            }
            Token::Close { name, .. } => {
                if is_block_tag(&name) {
                    flush(&mut current, &mut blocks);
                }
                // Lenient unwind: pop to the matching open tag if present.
                if let Some(pos) = stack.iter().rposition(|(n, _)| *n == name) {
                    for (popped, _) in stack.drain(pos..) {
                        if popped == "a" {
                            anchor_depth = anchor_depth.saturating_sub(1);
                        }
                    }
                }
            }
            Token::Text { raw, .. } => {
                let pruned = stack.last().is_some_and(|(_, p)| *p);
                if pruned || raw.trim().is_empty() {
                    continue;
                }
                current.push_text(&decode_entities(raw), anchor_depth > 0);
            }
            Token::Comment { .. } | Token::Decl { .. } => {}
        }
    }
    flush(&mut current, &mut blocks);
    blocks
}

/// Main-content plain text with paragraph breaks as blank lines. Degenerate
/// or text-free input yields the empty string; never panics.
pub fn extract_text(html: &str, profile: &ExtractionProfile) -> String {
    extract_blocks(html, profile).join("\n\n")
}

/// Run one extraction pass over a document batch: fills `text`, advances the
/// stage per the profile mode, and flags `extract_empty` / `too_short`
/// documents instead of advancing them. Already-advanced documents pass
/// through untouched, so reruns are idempotent.
pub fn stage_extract(mut docs: Vec<Document>, profile: &ExtractionProfile) -> Vec<Document> {
    let target = profile.target_stage();
    docs.par_iter_mut().for_each(|doc| {
        if doc.stage >= target {
            return;
        }
        let html = doc.html_optimized.as_deref().unwrap_or("");
        let text = extract_text(html, profile);
        if text.is_empty() {
            doc.text = Some(text);
            doc.flag("extract_empty");
        } else if text.chars().count() < profile.min_text_block_chars {
            doc.text = Some(text);
            doc.flag("too_short");
        } else {
            doc.text = Some(text);
            doc.advance(target);
        }
    });
    docs
}
