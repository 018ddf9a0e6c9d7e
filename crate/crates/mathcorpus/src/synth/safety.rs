//! Static safety screen for Python snippets, run before any execution.
//!
//! The screen is purely syntactic. A snippet is parsed to an abstract syntax
//! tree, import aliases are collected in a first pass, and a second pass
//! checks imports, calls, and `with` items against prohibited-API tables
//! (file operations, concurrency, network). Tables live in data files so the
//! screened surface can grow without code changes.
//!
//! Scope: direct and import-aliased references. Rebinding a prohibited
//! callable through an ordinary assignment (`f = open`) is out of scope, as
//! is anything hidden behind `eval`/`getattr` — execution still happens in an
//! isolated subprocess (see [`crate::synth::exec`]).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::Path;
use std::sync::OnceLock;

use rustpython_ast::Visitor;
use rustpython_parser::{ast, Parse};
use serde::Serialize;

use crate::coderecall::MAX_SNIPPET_CHARS;

/// Why a snippet (or part of it) was rejected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum ViolationCategory {
    /// File I/O, path manipulation, serialization to disk.
    FileOps,
    /// Thread/process creation and async runtimes.
    Concurrency,
    /// Sockets, HTTP clients, protocol libraries.
    Network,
    /// Snippet exceeds the character ceiling; never parsed.
    TooLong,
    /// Snippet does not parse as Python.
    SyntaxError,
}

impl fmt::Display for ViolationCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ViolationCategory::FileOps => "file-ops",
            ViolationCategory::Concurrency => "concurrency",
            ViolationCategory::Network => "network",
            ViolationCategory::TooLong => "too-long",
            ViolationCategory::SyntaxError => "syntax-error",
        };
        f.write_str(s)
    }
}

/// One rejected construct: what kind, and which construct triggered it.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct Violation {
    pub category: ViolationCategory,
    pub detail: String,
}

/// Outcome of the safety screen. `allowed()` is true exactly when no
/// violation was found; the fields are private so the equivalence cannot be
/// broken from outside.
#[derive(Debug, Clone, Serialize)]
pub struct SafetyVerdict {
    allowed: bool,
    violations: Vec<Violation>,
}

impl SafetyVerdict {
    fn from_violations(violations: BTreeSet<Violation>) -> Self {
        let violations: Vec<Violation> = violations.into_iter().collect();
        SafetyVerdict {
            allowed: violations.is_empty(),
            violations,
        }
    }

    pub fn allowed(&self) -> bool {
        self.allowed
    }

    pub fn violations(&self) -> &[Violation] {
        &self.violations
    }

    /// True when at least one violation has the given category.
    pub fn has_category(&self, category: ViolationCategory) -> bool {
        self.violations.iter().any(|v| v.category == category)
    }
}

impl fmt::Display for SafetyVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.allowed {
            return f.write_str("allowed");
        }
        write!(f, "rejected:")?;
        for v in &self.violations {
            write!(f, " [{}] {};", v.category, v.detail)?;
        }
        Ok(())
    }
}

/// A table-file problem: unreadable file or a line with an unknown prefix.
#[derive(Debug)]
pub enum SafetyTableError {
    BadEntry { line: usize, entry: String },
    Io(std::io::Error),
}

impl fmt::Display for SafetyTableError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SafetyTableError::BadEntry { line, entry } => {
                write!(f, "line {line}: expected module:/call:/method: prefix, got {entry:?}")
            }
            SafetyTableError::Io(e) => write!(f, "table file unreadable: {e}"),
        }
    }
}

impl std::error::Error for SafetyTableError {}

impl From<std::io::Error> for SafetyTableError {
    fn from(e: std::io::Error) -> Self {
        SafetyTableError::Io(e)
    }
}

/// Prohibited names for one category, split by how they are matched.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ProhibitedTable {
    /// Module roots (or dotted prefixes): imports of them and calls through
    /// them are violations.
    pub modules: BTreeSet<String>,
    /// Bare function names: a call `name(...)` is a violation.
    pub calls: BTreeSet<String>,
    /// Attribute names: a call `anything.name(...)` is a violation.
    pub methods: BTreeSet<String>,
}

impl ProhibitedTable {
    /// Parse the `module:`/`call:`/`method:` line format. `#` starts a
    /// comment; blank lines are skipped.
    pub fn parse(text: &str) -> Result<Self, SafetyTableError> {
        let mut table = ProhibitedTable::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let dest = match line.split_once(':') {
                Some(("module", name)) => table.modules.insert(name.trim().to_string()),
                Some(("call", name)) => table.calls.insert(name.trim().to_string()),
                Some(("method", name)) => table.methods.insert(name.trim().to_string()),
                _ => {
                    return Err(SafetyTableError::BadEntry {
                        line: idx + 1,
                        entry: line.to_string(),
                    })
                }
            };
            let _ = dest;
        }
        Ok(table)
    }

    /// True when `path` (a resolved dotted name) is rooted at one of this
    /// table's modules.
    fn module_hit(&self, path: &str) -> Option<&str> {
        self.modules
            .iter()
            .find(|m| {
                path == m.as_str()
                    || path
                        .strip_prefix(m.as_str())
                        .is_some_and(|rest| rest.starts_with('.'))
            })
            .map(String::as_str)
    }
}

/// The three category tables the screen checks against.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SafetyTables {
    pub file_ops: ProhibitedTable,
    pub concurrency: ProhibitedTable,
    pub network: ProhibitedTable,
}

impl SafetyTables {
    /// Tables compiled into the binary from `data/prohibited/`.
    pub fn builtin() -> &'static SafetyTables {
        static TABLES: OnceLock<SafetyTables> = OnceLock::new();
        TABLES.get_or_init(|| SafetyTables {
            file_ops: ProhibitedTable::parse(include_str!("../../data/prohibited/file_ops.txt"))
                .expect("bundled file-ops table parses"),
            concurrency: ProhibitedTable::parse(include_str!(
                "../../data/prohibited/concurrency.txt"
            ))
            .expect("bundled concurrency table parses"),
            network: ProhibitedTable::parse(include_str!("../../data/prohibited/network.txt"))
                .expect("bundled network table parses"),
        })
    }

    /// Load `file_ops.txt`, `concurrency.txt`, `network.txt` from a
    /// directory, replacing the bundled tables wholesale.
    pub fn from_dir(dir: &Path) -> Result<Self, SafetyTableError> {
        let read = |name: &str| -> Result<ProhibitedTable, SafetyTableError> {
            ProhibitedTable::parse(&fs::read_to_string(dir.join(name))?)
        };
        Ok(SafetyTables {
            file_ops: read("file_ops.txt")?,
            concurrency: read("concurrency.txt")?,
            network: read("network.txt")?,
        })
    }

    fn categories(&self) -> [(ViolationCategory, &ProhibitedTable); 3] {
        [
            (ViolationCategory::FileOps, &self.file_ops),
            (ViolationCategory::Concurrency, &self.concurrency),
            (ViolationCategory::Network, &self.network),
        ]
    }
}

/// First pass: record what every imported name refers to.
///
/// `import x.y` binds `x`; `import x.y as z` binds `z` to `x.y`;
/// `from a import b as c` binds `c` to `a.b`. Relative imports refer to
/// snippet-local names and are skipped.
#[derive(Default)]
struct ImportCollector {
    /// bound name → the dotted module path it refers to.
    aliases: BTreeMap<String, String>,
    /// Every module path named by an import statement.
    imported: BTreeSet<String>,
}

impl Visitor for ImportCollector {
    fn visit_stmt_import(&mut self, node: ast::StmtImport) {
        for alias in &node.names {
            let full = alias.name.as_str();
            self.imported.insert(full.to_string());
            match &alias.asname {
                Some(bound) => {
                    self.aliases.insert(bound.to_string(), full.to_string());
                }
                None => {
                    let root = full.split('.').next().unwrap_or(full);
                    self.aliases.insert(root.to_string(), root.to_string());
                }
            }
        }
        self.generic_visit_stmt_import(node);
    }

    fn visit_stmt_import_from(&mut self, node: ast::StmtImportFrom) {
        let relative = node.level.map_or(false, |l| l.to_u32() > 0);
        if let (Some(module), false) = (&node.module, relative) {
            for alias in &node.names {
                if alias.name.as_str() == "*" {
                    self.imported.insert(module.to_string());
                    continue;
                }
                let full = format!("{}.{}", module, alias.name);
                self.imported.insert(full.clone());
                let bound = alias
                    .asname
                    .as_ref()
                    .map_or_else(|| alias.name.to_string(), ToString::to_string);
                self.aliases.insert(bound, full);
            }
        }
        self.generic_visit_stmt_import_from(node);
    }
}

/// Second pass: check calls and `with` items against the tables, resolving
/// call targets through the collected import aliases.
struct RefChecker<'a> {
    tables: &'a SafetyTables,
    aliases: &'a BTreeMap<String, String>,
    violations: BTreeSet<Violation>,
}

/// `a.b.c` → `["a", "b", "c"]` when the chain is rooted at a plain name.
fn dotted_path(expr: &ast::Expr) -> Option<Vec<String>> {
    match expr {
        ast::Expr::Name(name) => Some(vec![name.id.to_string()]),
        ast::Expr::Attribute(attr) => {
            let mut path = dotted_path(&attr.value)?;
            path.push(attr.attr.to_string());
            Some(path)
        }
        _ => None,
    }
}

impl RefChecker<'_> {
    fn push(&mut self, category: ViolationCategory, detail: String) {
        self.violations.insert(Violation { category, detail });
    }

    /// Rewrite the root of `path` through the alias map, yielding the dotted
    /// name the reference really points at.
    fn resolve(&self, path: &[String]) -> String {
        let mut resolved = match self.aliases.get(&path[0]) {
            Some(real) => real.clone(),
            None => path[0].clone(),
        };
        for segment in &path[1..] {
            resolved.push('.');
            resolved.push_str(segment);
        }
        resolved
    }

    fn check_call_target(&mut self, func: &ast::Expr) {
        match dotted_path(func) {
            Some(path) => {
                let resolved = self.resolve(&path);
                let root = resolved.split('.').next().unwrap_or(&resolved);
                for (category, table) in self.tables.categories() {
                    if let Some(module) = table.module_hit(root).or(table.module_hit(&resolved)) {
                        self.push(
                            category,
                            format!("call into prohibited module {module}: {resolved}(...)"),
                        );
                    }
                    if path.len() == 1 && table.calls.contains(&resolved) {
                        self.push(category, format!("prohibited call: {resolved}(...)"));
                    }
                    if path.len() > 1 {
                        let method = path.last().expect("non-empty path");
                        if table.methods.contains(method) {
                            self.push(category, format!("prohibited method call: .{method}(...)"));
                        }
                    }
                }
            }
            // Receiver is not a plain dotted chain (subscript, call result,
            // ...): the attribute name is still checkable.
            None => {
                if let ast::Expr::Attribute(attr) = func {
                    let method = attr.attr.as_str();
                    for (category, table) in self.tables.categories() {
                        if table.methods.contains(method) {
                            self.push(category, format!("prohibited method call: .{method}(...)"));
                        }
                    }
                }
            }
        }
    }

    /// `with open(...) as f:` gets its own check (and detail) on top of the
    /// ordinary call check, so file handles opened as context managers are
    /// reported even if the call-site logic ever changes.
    fn check_with_items(&mut self, items: &[ast::WithItem]) {
        for item in items {
            if let ast::Expr::Call(call) = &item.context_expr {
                if let Some(path) = dotted_path(&call.func) {
                    let resolved = self.resolve(&path);
                    let is_open = (path.len() == 1 && self.tables.file_ops.calls.contains(&resolved))
                        || path
                            .last()
                            .is_some_and(|m| self.tables.file_ops.methods.contains(m));
                    if is_open {
                        self.push(
                            ViolationCategory::FileOps,
                            format!("with-statement wraps a file operation: {resolved}(...)"),
                        );
                    }
                }
            }
        }
    }
}

impl Visitor for RefChecker<'_> {
    fn visit_expr_call(&mut self, node: ast::ExprCall) {
        self.check_call_target(&node.func);
        self.generic_visit_expr_call(node);
    }

    fn visit_stmt_with(&mut self, node: ast::StmtWith) {
        self.check_with_items(&node.items);
        self.generic_visit_stmt_with(node);
    }

    fn visit_stmt_async_with(&mut self, node: ast::StmtAsyncWith) {
        self.check_with_items(&node.items);
        self.generic_visit_stmt_async_with(node);
    }
}

/// Screen a Python snippet. Never panics and never executes the code; every
/// problem comes back as a violation in the verdict.
pub fn safety_filter(code: &str, tables: &SafetyTables) -> SafetyVerdict {
    let mut violations = BTreeSet::new();

    // Byte length bounds character count from above, so only count
    // characters when the cheap check trips.
    if code.len() > MAX_SNIPPET_CHARS && code.chars().count() > MAX_SNIPPET_CHARS {
        violations.insert(Violation {
            category: ViolationCategory::TooLong,
            detail: format!(
                "snippet is {} characters (limit {MAX_SNIPPET_CHARS})",
                code.chars().count()
            ),
        });
        return SafetyVerdict::from_violations(violations);
    }

    let suite = match ast::Suite::parse(code, "<snippet>") {
        Ok(suite) => suite,
        Err(err) => {
            violations.insert(Violation {
                category: ViolationCategory::SyntaxError,
                detail: err.to_string(),
            });
            return SafetyVerdict::from_violations(violations);
        }
    };

    // Pass 1: imports. The visitor consumes nodes, so walk a clone and keep
    // the original for pass 2.
    let mut imports = ImportCollector::default();
    for stmt in suite.clone() {
        imports.visit_stmt(stmt);
    }

    for full in &imports.imported {
        for (category, table) in tables.categories() {
            if let Some(module) = table.module_hit(full) {
                violations.insert(Violation {
                    category,
                    detail: format!("import of prohibited module {module}: {full}"),
                });
            }
        }
    }

    // Pass 2: calls and with-items, resolved through the alias map.
    let mut checker = RefChecker {
        tables,
        aliases: &imports.aliases,
        violations,
    };
    for stmt in suite {
        checker.visit_stmt(stmt);
    }

    SafetyVerdict::from_violations(checker.violations)
}
