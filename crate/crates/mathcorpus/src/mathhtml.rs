//! Math-HTML optimization: rewrite math-bearing markup into LaTeX text
//! *before* main-content extraction, so the extractor cannot destroy it.
//!
//! Generic extractors treat `<math>` subtrees, KaTeX render spans, and
//! sup/sub markup as boilerplate or flatten them to digit soup ("x2" for
//! x²). This pass walks the raw HTML and splices LaTeX replacements over the
//! math spans while copying every non-math byte through untouched:
//!
//! * MathML subtrees → their TeX annotation when present, else a structural
//!   conversion of presentation MathML; unconvertible subtrees stay in place
//!   and are counted, never dropped.
//! * KaTeX render spans → the source LaTeX embedded in their annotation.
//! * `<sup>`/`<sub>` → `^{...}` / `_{...}`; `intbl` fraction spans →
//!   `\frac{numerator}{denominator}`.
//! * Math Unicode characters and HTML entities → LaTeX commands via a
//!   shipped W3C-derived table.
//! * Style-only LaTeX commands (`\displaystyle`, colors, sizes) stripped
//!   from extracted annotations.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::OnceLock;

use serde::Serialize;

use crate::html::{decode_entities, read_subtree, Element, Node, Token, Tokenizer};

/// Counters for each rewrite class, plus failures (math left in place).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct MathRewriteReport {
    pub mathml_converted: u64,
    pub katex_converted: u64,
    /// sup/sub tags and `intbl` fraction spans.
    pub supsub_converted: u64,
    pub unicode_mapped: u64,
    pub entities_mapped: u64,
    pub failures: u64,
}

impl MathRewriteReport {
    pub fn total_conversions(&self) -> u64 {
        self.mathml_converted + self.katex_converted + self.supsub_converted
    }

    fn merge(&mut self, other: &MathRewriteReport) {
        self.mathml_converted += other.mathml_converted;
        self.katex_converted += other.katex_converted;
        self.supsub_converted += other.supsub_converted;
        self.unicode_mapped += other.unicode_mapped;
        self.entities_mapped += other.entities_mapped;
        self.failures += other.failures;
    }
}

#[derive(Debug, thiserror::Error)]
pub enum TableError {
    #[error("i/o error on {0}: {1}")]
    Io(std::path::PathBuf, std::io::Error),
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

/// The Unicode→LaTeX mapping, loaded from a two-column TSV
/// (`U+XXXX<TAB>command`).
#[derive(Debug, Clone)]
pub struct UnicodeMathTable {
    map: BTreeMap<char, String>,
}

impl UnicodeMathTable {
    pub fn from_tsv_str(tsv: &str) -> Result<Self, TableError> {
        let mut map = BTreeMap::new();
        for (idx, line) in tsv.lines().enumerate() {
            let line_no = idx + 1;
            let trimmed = line.trim_end();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let (cp_str, latex) =
                trimmed
                    .split_once('\t')
                    .ok_or_else(|| TableError::Parse {
                        line: line_no,
                        reason: "expected two tab-separated columns".into(),
                    })?;
            let hex = cp_str
                .strip_prefix("U+")
                .ok_or_else(|| TableError::Parse {
                    line: line_no,
                    reason: format!("codepoint {cp_str:?} must start with U+"),
                })?;
            let code = u32::from_str_radix(hex, 16).map_err(|_| TableError::Parse {
                line: line_no,
                reason: format!("bad hex codepoint {cp_str:?}"),
            })?;
            let ch = char::from_u32(code).ok_or_else(|| TableError::Parse {
                line: line_no,
                reason: format!("U+{code:04X} is not a Unicode scalar"),
            })?;
            if latex.is_empty() {
                return Err(TableError::Parse {
                    line: line_no,
                    reason: "empty LaTeX column".into(),
                });
            }
            if map.insert(ch, latex.to_string()).is_some() {
                return Err(TableError::Parse {
                    line: line_no,
                    reason: format!("duplicate mapping for U+{code:04X}"),
                });
            }
        }
        Ok(UnicodeMathTable { map })
    }

    pub fn from_file(path: &Path) -> Result<Self, TableError> {
        let tsv =
            std::fs::read_to_string(path).map_err(|e| TableError::Io(path.into(), e))?;
        Self::from_tsv_str(&tsv)
    }

    pub fn get(&self, ch: char) -> Option<&str> {
        self.map.get(&ch).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// The table committed with the crate.
    pub fn builtin() -> &'static UnicodeMathTable {
        static TABLE: OnceLock<UnicodeMathTable> = OnceLock::new();
        TABLE.get_or_init(|| {
            UnicodeMathTable::from_tsv_str(include_str!("../data/unicode_math.tsv"))
                .expect("shipped unicode_math.tsv must parse")
        })
    }
}

/// LaTeX command for a single math character, from the builtin table.
pub fn map_unicode_math(ch: char) -> Option<&'static str> {
    UnicodeMathTable::builtin().get(ch)
}

/// Rewrite math markup in `html` into LaTeX using the builtin mapping table.
pub fn optimize_math_html(html: &str) -> (String, MathRewriteReport) {
    optimize_math_html_with(html, UnicodeMathTable::builtin())
}

/// Commands that affect only presentation; stripped from annotation LaTeX.
/// `\color`-family commands also swallow their argument group.
const STYLE_COMMANDS: [&str; 16] = [
    "displaystyle",
    "textstyle",
    "scriptstyle",
    "scriptscriptstyle",
    "tiny",
    "scriptsize",
    "footnotesize",
    "small",
    "normalsize",
    "large",
    "Large",
    "LARGE",
    "huge",
    "Huge",
    "boldmath",
    "unboldmath",
];
const STYLE_COMMANDS_WITH_ARG: [&str; 3] = ["color", "textcolor", "pagecolor"];

/// Remove style-only commands and normalize whitespace. Annotation content
/// passed through this carries exactly the annotation's math, with no
/// presentation noise.
pub fn strip_style_commands(latex: &str) -> String {
    let bytes = latex.as_bytes();
    let mut out = String::with_capacity(latex.len());
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'\\' {
            let name_start = i + 1;
            let mut j = name_start;
            while j < bytes.len() && bytes[j].is_ascii_alphabetic() {
                j += 1;
            }
            let name = &latex[name_start..j];
            if STYLE_COMMANDS.contains(&name) {
                i = j;
                continue;
            }
            if STYLE_COMMANDS_WITH_ARG.contains(&name) {
                i = skip_brace_group(latex, j);
                continue;
            }
            out.push_str(&latex[i..j.max(i + 1)]);
            i = j.max(i + 1);
        } else {
            let ch_end = i + utf8_char_len(bytes[i]);
            out.push_str(&latex[i..ch_end]);
            i = ch_end;
        }
    }
    out.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn utf8_char_len(first: u8) -> usize {
    match first {
        b if b < 0x80 => 1,
        b if b >> 5 == 0b110 => 2,
        b if b >> 4 == 0b1110 => 3,
        _ => 4,
    }
}

/// Skip whitespace then one balanced `{...}` group starting at `i`, if any.
fn skip_brace_group(s: &str, mut i: usize) -> usize {
    let bytes = s.as_bytes();
    while i < bytes.len() && bytes[i].is_ascii_whitespace() {
        i += 1;
    }
    if i >= bytes.len() || bytes[i] != b'{' {
        return i;
    }
    let mut depth = 0usize;
    while i < bytes.len() {
        match bytes[i] {
            b'{' => depth += 1,
            b'}' => {
                depth -= 1;
                if depth == 0 {
                    return i + 1;
                }
            }
            _ => {}
        }
        i += 1;
    }
    i
}

/// Output writer that inserts a separating space when a LaTeX command ending
/// in a letter would otherwise fuse with following alphanumeric text
/// (`a≤b` must become `a\leq b`, not `a\leqb`).
struct Writer {
    out: String,
    guard: bool,
}

impl Writer {
    fn new(capacity: usize) -> Self {
        Writer {
            out: String::with_capacity(capacity),
            guard: false,
        }
    }

    fn push_raw(&mut self, s: &str) {
        if s.is_empty() {
            return;
        }
        self.apply_guard(s);
        self.out.push_str(s);
        self.guard = false;
    }

    fn push_latex(&mut self, s: &str) {
        if s.is_empty() {
            return;
        }
        self.apply_guard(s);
        self.out.push_str(s);
        self.guard = s.ends_with(|c: char| c.is_ascii_alphabetic())
            && s.rfind('\\').is_some_and(|i| {
                s[i + 1..].chars().all(|c| c.is_ascii_alphabetic())
            });
    }

    fn apply_guard(&mut self, next: &str) {
        if self.guard && next.starts_with(|c: char| c.is_alphanumeric()) {
            self.out.push(' ');
        }
    }
}

/// Rewrite math markup in `html` into LaTeX using the given table. Returns
/// the optimized HTML and the per-class rewrite counts. Lenient: any markup
/// the pass does not understand is copied through byte-for-byte.
pub fn optimize_math_html_with(
    html: &str,
    table: &UnicodeMathTable,
) -> (String, MathRewriteReport) {
    let mut report = MathRewriteReport::default();
    let mut w = Writer::new(html.len() + html.len() / 16);
    let mut tok = Tokenizer::new(html);
    // Inside <script>/<style>/... content: copy text without symbol mapping.
    let mut raw_depth: Vec<String> = Vec::new();

    while let Some(token) = tok.next() {
        match token {
            Token::Text { raw, .. } => {
                if raw_depth.is_empty() {
                    map_text(raw, table, &mut w, &mut report);
                } else {
                    w.push_raw(raw);
                }
            }
            Token::Open(tag) => {
                if !raw_depth.is_empty() {
                    w.push_raw(&html[tag.start..tag.end]);
                    continue;
                }
                let name = local_name(&tag.name).to_string();
                match name.as_str() {
                    "script" | "style" | "textarea" | "xmp" if !tag.self_closing => {
                        raw_depth.push(name);
                        w.push_raw(&html[tag.start..tag.end]);
                    }
                    "math" => {
                        let el = read_subtree(&mut tok, tag);
                        rewrite_mathml(&el, html, table, &mut w, &mut report);
                    }
                    "sup" | "sub" if !tag.self_closing => {
                        let sigil = if name == "sup" { "^" } else { "_" };
                        let el = read_subtree(&mut tok, tag);
                        let (inner, sub_report) = map_plain(&el.text(), table);
                        let inner = inner.trim();
                        if inner.is_empty() {
                            w.push_raw(&html[el.start..el.end]);
                        } else {
                            report.merge(&sub_report);
                            report.supsub_converted += 1;
                            w.push_latex(&format!("{sigil}{{{inner}}}"));
                        }
                    }
                    "span" | "div"
                        if tag.has_class("katex") || tag.has_class("katex-display") =>
                    {
                        let display = tag.has_class("katex-display");
                        let el = read_subtree(&mut tok, tag);
                        match find_tex_annotation(&el) {
                            Some(latex) => {
                                let latex = strip_style_commands(&latex);
                                report.katex_converted += 1;
                                w.push_latex(&wrap_math(&latex, display));
                            }
                            None => {
                                report.failures += 1;
                                w.push_raw(&html[el.start..el.end]);
                            }
                        }
                    }
                    "span" if tag.has_class("intbl") => {
                        let el = read_subtree(&mut tok, tag);
                        let cells: Vec<String> = el
                            .child_elements()
                            .map(|c| map_plain(&c.text(), table).0.trim().to_string())
                            .filter(|t| !t.is_empty())
                            .collect();
                        if cells.len() == 2 {
                            report.supsub_converted += 1;
                            w.push_latex(&format!("\\frac{{{}}}{{{}}}", cells[0], cells[1]));
                        } else {
                            report.failures += 1;
                            w.push_raw(&html[el.start..el.end]);
                        }
                    }
                    _ => w.push_raw(&html[tag.start..tag.end]),
                }
            }
            Token::Close { name, start, end } => {
                if raw_depth.last().map(String::as_str) == Some(local_name(&name)) {
                    raw_depth.pop();
                }
                w.push_raw(&html[start..end]);
            }
            Token::Comment { start, end } | Token::Decl { start, end } => {
                w.push_raw(&html[start..end]);
            }
        }
    }
    (w.out, report)
}

fn local_name(name: &str) -> &str {
    name.rsplit(':').next().unwrap_or(name)
}

fn wrap_math(latex: &str, display: bool) -> String {
    let latex = latex.trim();
    if latex.is_empty() {
        return String::new();
    }
    if display {
        format!("$${latex}$$")
    } else {
        format!("${latex}$")
    }
}

/// Handle one captured `<math>` subtree: annotation first, structural
/// conversion second, untouched original on failure.
fn rewrite_mathml(
    el: &Element,
    html: &str,
    table: &UnicodeMathTable,
    w: &mut Writer,
    report: &mut MathRewriteReport,
) {
    let display = el
        .attr("display")
        .map(|v| v.eq_ignore_ascii_case("block"))
        .unwrap_or(false)
        || el
            .attr("mode")
            .map(|v| v.eq_ignore_ascii_case("display"))
            .unwrap_or(false);
    let latex = match find_tex_annotation(el) {
        Some(annotation) => Ok(strip_style_commands(&annotation)),
        None => convert_presentation(el, table),
    };
    match latex {
        Ok(latex) => {
            report.mathml_converted += 1;
            w.push_latex(&wrap_math(&latex, display));
        }
        Err(reason) => {
            log::debug!("mathml conversion failed ({reason}); leaving subtree in place");
            report.failures += 1;
            w.push_raw(&html[el.start..el.end]);
        }
    }
}

/// Find `<annotation encoding="...tex...">` anywhere in the subtree.
fn find_tex_annotation(el: &Element) -> Option<String> {
    el.find(&|e| {
        local_name(&e.name) == "annotation"
            && e.attr("encoding")
                .map(|enc| enc.to_ascii_lowercase().contains("tex"))
                .unwrap_or(false)
    })
    .map(|a| a.text())
    .filter(|t| !t.trim().is_empty())
}

/// Map math characters in already-decoded plain text. Returns the mapped text
/// and the count of replacements (as unicode_mapped).
fn map_plain(text: &str, table: &UnicodeMathTable) -> (String, MathRewriteReport) {
    let mut report = MathRewriteReport::default();
    let mut w = Writer::new(text.len());
    for ch in text.chars() {
        match table.get(ch) {
            Some(latex) => {
                report.unicode_mapped += 1;
                w.push_latex(latex);
            }
            None => {
                let mut buf = [0u8; 4];
                w.push_raw(ch.encode_utf8(&mut buf));
            }
        }
    }
    (w.out, report)
}

/// Map math characters and math entities in *raw* text (entities undecoded).
/// Only entities that resolve to a mapped math character are rewritten; all
/// other bytes — including unknown or non-math entities — pass through
/// verbatim, preserving non-math content exactly.
fn map_text(raw: &str, table: &UnicodeMathTable, w: &mut Writer, report: &mut MathRewriteReport) {
    let bytes = raw.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'&' {
            if let Some((decoded, consumed)) = decode_entity_at(&raw[i..]) {
                if decoded.chars().count() == 1 {
                    let ch = decoded.chars().next().unwrap();
                    if let Some(latex) = table.get(ch) {
                        report.entities_mapped += 1;
                        w.push_latex(latex);
                        i += consumed;
                        continue;
                    }
                }
            }
            w.push_raw("&");
            i += 1;
            continue;
        }
        let ch_len = utf8_char_len(bytes[i]);
        let ch_str = &raw[i..i + ch_len];
        let ch = ch_str.chars().next().unwrap();
        match table.get(ch) {
            Some(latex) => {
                report.unicode_mapped += 1;
                w.push_latex(latex);
            }
            None => w.push_raw(ch_str),
        }
        i += ch_len;
    }
}

/// Decode one entity at the start of `s` (which begins with `&`), reusing the
/// html module's tables via a tiny shim.
fn decode_entity_at(s: &str) -> Option<(String, usize)> {
    let semi = s[1..].find(';').map(|i| i + 2)?; // bytes consumed incl. ';'
    if semi > 34 {
        return None;
    }
    let candidate = &s[..semi];
    let decoded = decode_entities(candidate);
    if decoded == candidate {
        None
    } else {
        Some((decoded, semi))
    }
}

/// Structural conversion of presentation MathML. Returns Err for any element
/// the converter does not understand — the caller leaves the subtree alone.
fn convert_presentation(el: &Element, table: &UnicodeMathTable) -> Result<String, String> {
    match local_name(&el.name) {
        "math" | "mrow" | "mstyle" | "mpadded" | "semantics" | "merror" | "menclose" => {
            join_children(el, table)
        }
        "mi" | "mn" | "mo" | "mtext" | "ms" => Ok(map_plain(&el.text(), table).0.trim().to_string()),
        "msup" => {
            let (base, script) = two_children(el, table)?;
            Ok(format!("{}^{{{}}}", brace(&base), script))
        }
        "msub" => {
            let (base, script) = two_children(el, table)?;
            Ok(format!("{}_{{{}}}", brace(&base), script))
        }
        "msubsup" | "munderover" => {
            let (base, under, over) = three_children(el, table)?;
            Ok(format!("{}_{{{}}}^{{{}}}", brace(&base), under, over))
        }
        "munder" => {
            let (base, script) = two_children(el, table)?;
            Ok(format!("{}_{{{}}}", brace(&base), script))
        }
        "mover" => {
            let (base, script) = two_children(el, table)?;
            Ok(format!("{}^{{{}}}", brace(&base), script))
        }
        "mfrac" => {
            let (num, den) = two_children(el, table)?;
            Ok(format!("\\frac{{{num}}}{{{den}}}"))
        }
        "msqrt" => Ok(format!("\\sqrt{{{}}}", join_children(el, table)?)),
        "mroot" => {
            let (radicand, index) = two_children(el, table)?;
            Ok(format!("\\sqrt[{index}]{{{radicand}}}"))
        }
        "mfenced" => {
            let open = el.attr("open").unwrap_or("(");
            let close = el.attr("close").unwrap_or(")");
            let parts: Result<Vec<String>, String> = el
                .child_elements()
                .map(|c| convert_presentation(c, table))
                .collect();
            Ok(format!("{open}{}{close}", parts?.join(", ")))
        }
        "mspace" => Ok(" ".to_string()),
        "mphantom" | "none" | "mprescripts" => Ok(String::new()),
        other => Err(format!("unsupported MathML element <{other}>")),
    }
}

/// Convert all children in order (annotations skipped), joining with a space
/// only where two alphanumeric runs would otherwise fuse.
fn join_children(el: &Element, table: &UnicodeMathTable) -> Result<String, String> {
    let mut out = String::new();
    let push = |piece: &str, out: &mut String| {
        let piece = piece.trim();
        if piece.is_empty() {
            return;
        }
        // "sin"+"x" must not fuse into "sinx", and "\leq"+"b" must not
        // fuse into "\leqb".
        if out.ends_with(|c: char| c.is_alphanumeric())
            && piece.starts_with(|c: char| c.is_alphanumeric())
        {
            out.push(' ');
        }
        out.push_str(piece);
    };
    for child in &el.children {
        match child {
            Node::Text(t) => {
                let decoded = decode_entities(t);
                let (mapped, _) = map_plain(&decoded, table);
                push(&mapped, &mut out);
            }
            Node::Element(e) => {
                let local = local_name(&e.name);
                if local == "annotation" || local == "annotation-xml" {
                    continue;
                }
                let converted = convert_presentation(e, table)?;
                push(&converted, &mut out);
            }
        }
    }
    Ok(out)
}

/// Exactly two element children, converted.
fn two_children(el: &Element, table: &UnicodeMathTable) -> Result<(String, String), String> {
    let children: Vec<&Element> = el.child_elements().collect();
    if children.len() != 2 {
        return Err(format!(
            "<{}> expects 2 children, found {}",
            el.name,
            children.len()
        ));
    }
    Ok((
        convert_presentation(children[0], table)?,
        convert_presentation(children[1], table)?,
    ))
}

fn three_children(
    el: &Element,
    table: &UnicodeMathTable,
) -> Result<(String, String, String), String> {
    let children: Vec<&Element> = el.child_elements().collect();
    if children.len() != 3 {
        return Err(format!(
            "<{}> expects 3 children, found {}",
            el.name,
            children.len()
        ));
    }
    Ok((
        convert_presentation(children[0], table)?,
        convert_presentation(children[1], table)?,
        convert_presentation(children[2], table)?,
    ))
}

/// Wrap a multi-character base in braces so scripts bind to all of it.
/// Single characters, already-braced groups, and lone LaTeX commands
/// (`\int`, `\sum`) are atomic and stay bare.
fn brace(s: &str) -> String {
    let atomic = s.chars().count() <= 1
        || (s.starts_with('{') && s.ends_with('}'))
        || (s.len() > 1
            && s.starts_with('\\')
            && s[1..].chars().all(|c| c.is_ascii_alphabetic()));
    if atomic {
        s.to_string()
    } else {
        format!("{{{s}}}")
    }
}
