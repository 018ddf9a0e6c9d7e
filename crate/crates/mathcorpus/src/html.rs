//! Lenient HTML tokenizer with byte-offset spans, plus a small DOM for
//! captured subtrees.
//!
//! Real crawl HTML is malformed more often than not, and the math optimizer
//! must splice replacements into the *original byte stream* without disturbing
//! anything it does not understand. A parse→serialize round trip through a
//! conforming parser would normalize attribute quoting, whitespace, and tag
//! soup, destroying that guarantee. So this module scans tags with their exact
//! byte spans and never throws: any construct it cannot parse is yielded as
//! plain text.

/// One scanned token. `start`/`end` are byte offsets into the original input;
/// `end` is exclusive.
#[derive(Debug, Clone, PartialEq)]
pub enum Token<'a> {
    /// Raw text between tags (entities not decoded).
    Text { raw: &'a str, start: usize },
    /// An opening tag, e.g. `<div class="x">`.
    Open(Tag),
    /// A closing tag, e.g. `</div>`.
    Close {
        name: String,
        start: usize,
        end: usize,
    },
    /// `<!-- ... -->`.
    Comment { start: usize, end: usize },
    /// `<!doctype ...>`, `<![CDATA[...]]>`, `<?xml ...?>` and friends.
    Decl { start: usize, end: usize },
}

impl Token<'_> {
    /// Byte span of this token in the original input.
    pub fn span(&self) -> (usize, usize) {
        match self {
            Token::Text { raw, start } => (*start, *start + raw.len()),
            Token::Open(t) => (t.start, t.end),
            Token::Close { start, end, .. } => (*start, *end),
            Token::Comment { start, end } => (*start, *end),
            Token::Decl { start, end } => (*start, *end),
        }
    }
}

/// A scanned opening tag. Names and attribute names are lowercased; attribute
/// values keep their raw (undecoded) text.
#[derive(Debug, Clone, PartialEq)]
pub struct Tag {
    pub name: String,
    pub attrs: Vec<(String, String)>,
    pub self_closing: bool,
    pub start: usize,
    pub end: usize,
}

impl Tag {
    /// First value of the named attribute, if present.
    pub fn attr(&self, name: &str) -> Option<&str> {
        self.attrs
            .iter()
            .find(|(k, _)| k == name)
            .map(|(_, v)| v.as_str())
    }

    /// Whether the space-separated `class` attribute contains `cls`.
    pub fn has_class(&self, cls: &str) -> bool {
        self.attr("class")
            .map(|v| v.split_ascii_whitespace().any(|c| c == cls))
            .unwrap_or(false)
    }
}

/// Elements whose content model is raw text: everything up to the matching
/// close tag is one text token, with no tag scanning inside.
const RAW_TEXT_ELEMENTS: [&str; 4] = ["script", "style", "textarea", "xmp"];

/// Void elements never take children and need no close tag.
pub fn is_void_element(name: &str) -> bool {
    matches!(
        name,
        "area"
            | "base"
            | "br"
            | "col"
            | "embed"
            | "hr"
            | "img"
            | "input"
            | "link"
            | "meta"
            | "source"
            | "track"
            | "wbr"
    )
}

/// Streaming tokenizer. Iterate to receive [`Token`]s covering every byte of
/// the input exactly once, in order.
pub struct Tokenizer<'a> {
    input: &'a str,
    pos: usize,
    /// When set, the next token is raw text running to this close tag.
    pending_raw_close: Option<&'static str>,
}

impl<'a> Tokenizer<'a> {
    pub fn new(input: &'a str) -> Self {
        Tokenizer {
            input,
            pos: 0,
            pending_raw_close: None,
        }
    }

    /// Remaining unscanned input (used by subtree capture).
    pub fn position(&self) -> usize {
        self.pos
    }

    fn bytes(&self) -> &'a [u8] {
        self.input.as_bytes()
    }

    /// Scan a tag name starting at `i`; returns (lowercased name, next index).
    fn scan_name(&self, mut i: usize) -> (String, usize) {
        let b = self.bytes();
        let start = i;
        while i < b.len() && (b[i].is_ascii_alphanumeric() || b[i] == b'-' || b[i] == b':') {
            i += 1;
        }
        (self.input[start..i].to_ascii_lowercase(), i)
    }

    /// Scan attributes from `i` until `>`; returns (attrs, self_closing, index
    /// just past `>`), or None if the tag never terminates (caller falls back
    /// to text).
    fn scan_attrs(&self, mut i: usize) -> Option<(Vec<(String, String)>, bool, usize)> {
        let b = self.bytes();
        let mut attrs = Vec::new();
        loop {
            while i < b.len() && b[i].is_ascii_whitespace() {
                i += 1;
            }
            if i >= b.len() {
                return None;
            }
            match b[i] {
                b'>' => return Some((attrs, false, i + 1)),
                b'/' => {
                    // `/>` or a stray slash; only the former self-closes.
                    if i + 1 < b.len() && b[i + 1] == b'>' {
                        return Some((attrs, true, i + 2));
                    }
                    i += 1;
                }
                _ => {
                    // Attribute name.
                    let name_start = i;
                    while i < b.len()
                        && !b[i].is_ascii_whitespace()
                        && b[i] != b'='
                        && b[i] != b'>'
                        && b[i] != b'/'
                    {
                        i += 1;
                    }
                    if i == name_start {
                        // Unexpected byte (e.g. a quote); skip it leniently.
                        i += 1;
                        continue;
                    }
                    let name = self.input[name_start..i].to_ascii_lowercase();
                    while i < b.len() && b[i].is_ascii_whitespace() {
                        i += 1;
                    }
                    let mut value = String::new();
                    if i < b.len() && b[i] == b'=' {
                        i += 1;
                        while i < b.len() && b[i].is_ascii_whitespace() {
                            i += 1;
                        }
                        if i < b.len() && (b[i] == b'"' || b[i] == b'\'') {
                            let quote = b[i];
                            i += 1;
                            let vstart = i;
                            while i < b.len() && b[i] != quote {
                                i += 1;
                            }
                            if i >= b.len() {
                                return None; // unterminated quoted value
                            }
                            value = self.input[vstart..i].to_string();
                            i += 1;
                        } else {
                            let vstart = i;
                            while i < b.len() && !b[i].is_ascii_whitespace() && b[i] != b'>' {
                                i += 1;
                            }
                            value = self.input[vstart..i].to_string();
                        }
                    }
                    attrs.push((name, value));
                }
            }
        }
    }
}

impl<'a> Iterator for Tokenizer<'a> {
    type Item = Token<'a>;

    fn next(&mut self) -> Option<Token<'a>> {
        let b = self.bytes();
        if self.pos >= b.len() {
            return None;
        }

        // Inside <script>/<style>/...: emit everything up to the close tag as
        // one text token, without interpreting `<` in the content.
        if let Some(close_name) = self.pending_raw_close {
            let needle = format!("</{close_name}");
            let rest = &self.input[self.pos..];
            let end_rel = rest
                .as_bytes()
                .windows(needle.len())
                .position(|w| w.eq_ignore_ascii_case(needle.as_bytes()))
                .unwrap_or(rest.len());
            self.pending_raw_close = None;
            if end_rel > 0 {
                let start = self.pos;
                self.pos += end_rel;
                return Some(Token::Text {
                    raw: &self.input[start..start + end_rel],
                    start,
                });
            }
            // Fall through: the close tag is immediate.
        }

        let start = self.pos;
        if b[start] != b'<' {
            // Text run up to the next `<`.
            let end = self.input[start..]
                .find('<')
                .map(|i| start + i)
                .unwrap_or(b.len());
            self.pos = end;
            return Some(Token::Text {
                raw: &self.input[start..end],
                start,
            });
        }

        // At a `<`. Decide what it introduces.
        let next = b.get(start + 1).copied();
        match next {
            Some(c) if c.is_ascii_alphabetic() => {
                let (name, i) = self.scan_name(start + 1);
                match self.scan_attrs(i) {
                    Some((attrs, self_closing, end)) => {
                        self.pos = end;
                        if !self_closing {
                            if let Some(raw) =
                                RAW_TEXT_ELEMENTS.iter().find(|&&r| r == name.as_str())
                            {
                                self.pending_raw_close = Some(raw);
                            }
                        }
                        Some(Token::Open(Tag {
                            name,
                            attrs,
                            self_closing,
                            start,
                            end,
                        }))
                    }
                    None => {
                        // Unterminated tag: the rest of the input is text.
                        self.pos = b.len();
                        Some(Token::Text {
                            raw: &self.input[start..],
                            start,
                        })
                    }
                }
            }
            Some(b'/') => {
                let (name, i) = self.scan_name(start + 2);
                let end = self.input[i..].find('>').map(|j| i + j + 1);
                match (name.is_empty(), end) {
                    (false, Some(end)) => {
                        self.pos = end;
                        Some(Token::Close { name, start, end })
                    }
                    (true, Some(end)) => {
                        // `</ p>`, `</>`: browsers treat these as bogus
                        // comments running to the next `>`.
                        self.pos = end;
                        Some(Token::Comment { start, end })
                    }
                    (_, None) => {
                        self.pos = b.len();
                        Some(Token::Text {
                            raw: &self.input[start..],
                            start,
                        })
                    }
                }
            }
            Some(b'!') => {
                if self.input[start..].starts_with("<!--") {
                    let end = self.input[start + 4..]
                        .find("-->")
                        .map(|i| start + 4 + i + 3)
                        .unwrap_or(b.len());
                    self.pos = end;
                    Some(Token::Comment { start, end })
                } else {
                    let end = self.input[start..]
                        .find('>')
                        .map(|i| start + i + 1)
                        .unwrap_or(b.len());
                    self.pos = end;
                    Some(Token::Decl { start, end })
                }
            }
            Some(b'?') => {
                let end = self.input[start..]
                    .find('>')
                    .map(|i| start + i + 1)
                    .unwrap_or(b.len());
                self.pos = end;
                Some(Token::Decl { start, end })
            }
            _ => {
                // Literal `<` (or trailing `<` at EOF): one-byte text token.
                self.pos = start + 1;
                Some(Token::Text {
                    raw: &self.input[start..start + 1],
                    start,
                })
            }
        }
    }
}

/// A captured element subtree. `end` is the byte offset just past the closing
/// tag (or EOF if the document ended first), so `input[start..end]` is the
/// exact original markup of the subtree.
#[derive(Debug, Clone)]
pub struct Element {
    pub name: String,
    pub attrs: Vec<(String, String)>,
    pub children: Vec<Node>,
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone)]
pub enum Node {
    Element(Element),
    /// Raw text (entities not decoded).
    Text(String),
}

impl Element {
    pub fn attr(&self, name: &str) -> Option<&str> {
        self.attrs
            .iter()
            .find(|(k, _)| k == name)
            .map(|(_, v)| v.as_str())
    }

    pub fn has_class(&self, cls: &str) -> bool {
        self.attr("class")
            .map(|v| v.split_ascii_whitespace().any(|c| c == cls))
            .unwrap_or(false)
    }

    /// Child elements only (text nodes skipped).
    pub fn child_elements(&self) -> impl Iterator<Item = &Element> {
        self.children.iter().filter_map(|n| match n {
            Node::Element(e) => Some(e),
            Node::Text(_) => None,
        })
    }

    /// Concatenated descendant text, entities decoded, without any separators.
    pub fn text(&self) -> String {
        let mut out = String::new();
        self.collect_text(&mut out);
        out
    }

    fn collect_text(&self, out: &mut String) {
        for child in &self.children {
            match child {
                Node::Text(t) => out.push_str(&decode_entities(t)),
                Node::Element(e) => e.collect_text(out),
            }
        }
    }

    /// Depth-first search for the first descendant (including self) matching
    /// the predicate.
    pub fn find<'e>(&'e self, pred: &dyn Fn(&Element) -> bool) -> Option<&'e Element> {
        if pred(self) {
            return Some(self);
        }
        for child in self.child_elements() {
            if let Some(found) = child.find(pred) {
                return Some(found);
            }
        }
        None
    }
}

/// Consume tokens from `tok` until the close tag matching `open`, building the
/// subtree. Mismatched close tags unwind leniently (unclosed intermediates are
/// auto-closed); stray closes that match nothing are dropped. At EOF all open
/// elements close at the input's end.
pub fn read_subtree(tok: &mut Tokenizer<'_>, open: Tag) -> Element {
    let mut stack: Vec<Element> = vec![Element {
        name: open.name,
        attrs: open.attrs,
        children: Vec::new(),
        start: open.start,
        end: open.end,
    }];
    if open.self_closing || is_void_element(&stack[0].name) {
        return stack.pop().unwrap();
    }

    /// Fold the top of the stack into its parent, recording its end offset.
    fn close_top(stack: &mut Vec<Element>, end: usize) -> Option<Element> {
        let mut top = stack.pop().unwrap();
        top.end = end;
        match stack.last_mut() {
            Some(parent) => {
                parent.children.push(Node::Element(top));
                None
            }
            None => Some(top),
        }
    }

    let input_len = tok.input.len();
    while let Some(token) = tok.next() {
        match token {
            Token::Text { raw, .. } => {
                if let Some(top) = stack.last_mut() {
                    top.children.push(Node::Text(raw.to_string()));
                }
            }
            Token::Open(tag) => {
                if tag.self_closing || is_void_element(&tag.name) {
                    let end = tag.end;
                    stack.last_mut().unwrap().children.push(Node::Element(Element {
                        name: tag.name,
                        attrs: tag.attrs,
                        children: Vec::new(),
                        start: tag.start,
                        end,
                    }));
                } else {
                    stack.push(Element {
                        name: tag.name,
                        attrs: tag.attrs,
                        children: Vec::new(),
                        start: tag.start,
                        end: tag.end,
                    });
                }
            }
            Token::Close { name, end, .. } => {
                if stack.iter().any(|e| e.name == name) {
                    // Unwind to (and through) the matching element.
                    loop {
                        let matches = stack.last().unwrap().name == name;
                        if let Some(done) = close_top(&mut stack, end) {
                            return done;
                        }
                        if matches {
                            break;
                        }
                    }
                }
                // Otherwise: stray close tag, ignore.
            }
            Token::Comment { .. } | Token::Decl { .. } => {}
        }
    }
    // EOF with elements still open.
    loop {
        if let Some(done) = close_top(&mut stack, input_len) {
            return done;
        }
    }
}

/// Decode HTML character references: numeric (`&#955;`, `&#x3bb;`) and a
/// compact named set covering the entities that matter for math and common
/// prose. Unknown references pass through verbatim — crawl text is full of
/// bare ampersands.
pub fn decode_entities(s: &str) -> String {
    if !s.contains('&') {
        return s.to_string();
    }
    let mut out = String::with_capacity(s.len());
    let bytes = s.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'&' {
            if let Some((ch, consumed)) = decode_one_entity(&s[i..]) {
                out.push_str(&ch);
                i += consumed;
                continue;
            }
        }
        // Advance one full UTF-8 scalar.
        let ch_len = utf8_len(bytes[i]);
        out.push_str(&s[i..i + ch_len]);
        i += ch_len;
    }
    out
}

fn utf8_len(first_byte: u8) -> usize {
    match first_byte {
        b if b < 0x80 => 1,
        b if b >> 5 == 0b110 => 2,
        b if b >> 4 == 0b1110 => 3,
        _ => 4,
    }
}

/// Try to decode one `&...;` reference at the start of `s` (which begins with
/// `&`). Returns the decoded string and bytes consumed.
fn decode_one_entity(s: &str) -> Option<(String, usize)> {
    let semi = s[1..].find(';').map(|i| i + 1)?;
    if semi > 32 {
        return None; // implausibly long; treat as literal ampersand
    }
    let body = &s[1..semi];
    if let Some(num) = body.strip_prefix('#') {
        let code = if let Some(hex) = num.strip_prefix('x').or_else(|| num.strip_prefix('X')) {
            u32::from_str_radix(hex, 16).ok()?
        } else {
            num.parse::<u32>().ok()?
        };
        let ch = char::from_u32(code)?;
        return Some((ch.to_string(), semi + 1));
    }
    let named = NAMED_ENTITIES
        .iter()
        .find(|(name, _)| *name == body)
        .map(|(_, v)| *v)?;
    Some((named.to_string(), semi + 1))
}

/// Named entities worth decoding: structural HTML ones, plus the HTML4 math,
/// Greek, and arrow sets that appear in crawl-era math markup. (The full HTML5
/// table has ~2200 names; the long tail never shows up in practice and numeric
/// references cover it anyway.)
static NAMED_ENTITIES: &[(&str, &str)] = &[
    ("amp", "&"),
    ("lt", "<"),
    ("gt", ">"),
    ("quot", "\""),
    ("apos", "'"),
    ("nbsp", "\u{a0}"),
    ("shy", "\u{ad}"),
    ("ndash", "–"),
    ("mdash", "—"),
    ("lsquo", "\u{2018}"),
    ("rsquo", "\u{2019}"),
    ("ldquo", "\u{201c}"),
    ("rdquo", "\u{201d}"),
    ("hellip", "…"),
    ("deg", "°"),
    ("plusmn", "±"),
    ("sup1", "¹"),
    ("sup2", "²"),
    ("sup3", "³"),
    ("frac14", "¼"),
    ("frac12", "½"),
    ("frac34", "¾"),
    ("times", "×"),
    ("divide", "÷"),
    ("micro", "µ"),
    ("middot", "·"),
    ("alpha", "α"),
    ("beta", "β"),
    ("gamma", "γ"),
    ("delta", "δ"),
    ("epsilon", "ε"),
    ("zeta", "ζ"),
    ("eta", "η"),
    ("theta", "θ"),
    ("iota", "ι"),
    ("kappa", "κ"),
    ("lambda", "λ"),
    ("mu", "μ"),
    ("nu", "ν"),
    ("xi", "ξ"),
    ("pi", "π"),
    ("rho", "ρ"),
    ("sigma", "σ"),
    ("sigmaf", "ς"),
    ("tau", "τ"),
    ("upsilon", "υ"),
    ("phi", "φ"),
    ("chi", "χ"),
    ("psi", "ψ"),
    ("omega", "ω"),
    ("Alpha", "Α"),
    ("Beta", "Β"),
    ("Gamma", "Γ"),
    ("Delta", "Δ"),
    ("Epsilon", "Ε"),
    ("Theta", "Θ"),
    ("Lambda", "Λ"),
    ("Pi", "Π"),
    ("Sigma", "Σ"),
    ("Phi", "Φ"),
    ("Psi", "Ψ"),
    ("Omega", "Ω"),
    ("forall", "∀"),
    ("part", "∂"),
    ("exist", "∃"),
    ("empty", "∅"),
    ("nabla", "∇"),
    ("isin", "∈"),
    ("notin", "∉"),
    ("ni", "∋"),
    ("prod", "∏"),
    ("sum", "∑"),
    ("minus", "−"),
    ("lowast", "∗"),
    ("radic", "√"),
    ("prop", "∝"),
    ("infin", "∞"),
    ("ang", "∠"),
    ("and", "∧"),
    ("or", "∨"),
    ("cap", "∩"),
    ("cup", "∪"),
    ("int", "∫"),
    ("there4", "∴"),
    ("sim", "∼"),
    ("cong", "≅"),
    ("asymp", "≈"),
    ("ne", "≠"),
    ("equiv", "≡"),
    ("le", "≤"),
    ("ge", "≥"),
    ("sub", "⊂"),
    ("sup", "⊃"),
    ("nsub", "⊄"),
    ("sube", "⊆"),
    ("supe", "⊇"),
    ("oplus", "⊕"),
    ("otimes", "⊗"),
    ("perp", "⊥"),
    ("sdot", "⋅"),
    ("larr", "←"),
    ("uarr", "↑"),
    ("rarr", "→"),
    ("darr", "↓"),
    ("harr", "↔"),
    ("lArr", "⇐"),
    ("rArr", "⇒"),
    ("hArr", "⇔"),
    ("prime", "′"),
    ("Prime", "″"),
    ("lceil", "⌈"),
    ("rceil", "⌉"),
    ("lfloor", "⌊"),
    ("rfloor", "⌋"),
    ("lang", "⟨"),
    ("rang", "⟩"),
];
