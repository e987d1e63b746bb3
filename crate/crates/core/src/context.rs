//! Prompt context: the smallest syntactic unit around an issue plus one
//! layer of referenced definitions.

use std::collections::{BTreeMap, HashSet};

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::issue::{LintIssue, Span};
use crate::syntax::{dir_of, Decl, DeclKind, Grammar, GrammarRegistry, ImportSpec, Outline, RefKind, Reference};
use crate::workspace::{line_count, Workspace, WorkspaceError};

pub const DEFAULT_FALLBACK_WINDOW: usize = 20;

/// 1-based inclusive line range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LineRange {
    pub start: usize,
    pub end: usize,
}

impl LineRange {
    pub fn new(start: usize, end: usize) -> Self {
        Self { start, end }
    }

    pub fn contains(&self, other: LineRange) -> bool {
        self.start <= other.start && other.end <= self.end
    }

    pub fn len(&self) -> usize {
        self.end + 1 - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end < self.start
    }

    pub fn of_span(span: &Span) -> Self {
        Self::new(span.start_line, span.end_line)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UnitKind {
    Function,
    Declaration,
    File,
    /// Line window used when the file cannot be parsed.
    Window,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EnclosingUnit {
    pub range: LineRange,
    pub kind: UnitKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SymbolKind {
    Function,
    Type,
    Constant,
    Variable,
    Import,
}

impl From<DeclKind> for SymbolKind {
    fn from(k: DeclKind) -> Self {
        match k {
            DeclKind::Function | DeclKind::Method => Self::Function,
            DeclKind::Type => Self::Type,
            DeclKind::Const => Self::Constant,
            DeclKind::Var => Self::Variable,
            DeclKind::Import => Self::Import,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SymbolDef {
    pub name: String,
    pub file: String,
    pub def_text: String,
    pub kind: SymbolKind,
    pub start_line: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodeContext {
    pub focal_file: String,
    pub focal_span: LineRange,
    pub focal_text: String,
    pub unit_kind: UnitKind,
    pub dependencies: Vec<SymbolDef>,
    pub budget_used: usize,
}

#[derive(Debug, Error)]
pub enum ContextError {
    #[error(transparent)]
    Workspace(#[from] WorkspaceError),
    #[error("span {span:?} lies outside `{file}` ({lines} lines)")]
    SpanOutOfRange { file: String, span: Span, lines: usize },
    #[error("budget must be positive")]
    ZeroBudget,
    #[error("budget of {budget} tokens cannot hold the issue lines ({needed} tokens)")]
    BudgetTooSmall { budget: usize, needed: usize },
}

#[derive(Debug, Clone)]
pub struct ContextConfig {
    pub budget: usize,
    pub fallback_window: usize,
    pub grammars: GrammarRegistry,
}

impl Default for ContextConfig {
    fn default() -> Self {
        Self {
            budget: 4096,
            fallback_window: DEFAULT_FALLBACK_WINDOW,
            grammars: GrammarRegistry::default(),
        }
    }
}

impl ContextConfig {
    pub fn with_budget(budget: usize) -> Self {
        Self {
            budget,
            ..Self::default()
        }
    }
}

/// Token estimate: `ceil(bytes / 4)`.
pub fn estimate_tokens(text: &str) -> usize {
    text.len().div_ceil(4)
}

/// Lines `range` of `source`, each terminated by `\n`.
pub fn slice_lines(source: &str, range: LineRange) -> String {
    source
        .lines()
        .skip(range.start - 1)
        .take(range.len())
        .map(|l| format!("{l}\n"))
        .collect()
}

fn window(span: LineRange, total: usize, n: usize) -> LineRange {
    LineRange::new(
        span.start.saturating_sub(n).max(1),
        (span.end + n).min(total.max(1)),
    )
}

/// Smallest enclosing function, else smallest enclosing top-level
/// declaration, else the whole file. Unparseable sources and unknown
/// languages get a `±fallback_window` line window.
pub fn enclosing_unit(
    source: &str,
    span: LineRange,
    grammar: Option<&dyn Grammar>,
    fallback_window: usize,
) -> Result<EnclosingUnit, LineRange> {
    let total = line_count(source);
    if span.start == 0 || span.end < span.start || span.end > total {
        return Err(span);
    }
    let outline = grammar.and_then(|g| g.outline(source).ok());
    let Some(outline) = outline else {
        return Ok(EnclosingUnit {
            range: window(span, total, fallback_window),
            kind: UnitKind::Window,
        });
    };
    let smallest = |pred: &dyn Fn(&Decl) -> bool| {
        outline
            .decls
            .iter()
            .filter(|d| pred(d) && d.contains_lines(span.start, span.end))
            .min_by_key(|d| d.end_line - d.start_line)
            .map(|d| LineRange::new(d.start_line, d.end_line))
    };
    if let Some(range) = smallest(&|d| d.is_function()) {
        return Ok(EnclosingUnit { range, kind: UnitKind::Function });
    }
    if let Some(range) = smallest(&|_| true) {
        return Ok(EnclosingUnit { range, kind: UnitKind::Declaration });
    }
    Ok(EnclosingUnit {
        range: LineRange::new(1, total),
        kind: UnitKind::File,
    })
}

struct IndexedDecl {
    file: String,
    dir: String,
    decl: Decl,
}

/// Top-level definitions of every parseable file, for name resolution.
struct SymbolIndex {
    decls: Vec<IndexedDecl>,
    by_name: BTreeMap<String, Vec<usize>>,
    dirs: HashSet<String>,
}

impl SymbolIndex {
    fn build(ws: &Workspace, grammars: &GrammarRegistry) -> (Self, BTreeMap<String, Outline>) {
        let mut decls = Vec::new();
        let mut by_name: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        let mut outlines = BTreeMap::new();
        let mut dirs = HashSet::new();
        for (path, src) in ws.files() {
            let Some(g) = grammars.for_path(path) else { continue };
            let Ok(outline) = g.outline(src) else { continue };
            dirs.insert(dir_of(path).to_string());
            for d in &outline.decls {
                if d.kind == DeclKind::Import {
                    continue;
                }
                for name in &d.names {
                    by_name.entry(name.clone()).or_default().push(decls.len());
                }
                decls.push(IndexedDecl {
                    file: path.clone(),
                    dir: dir_of(path).to_string(),
                    decl: d.clone(),
                });
            }
            outlines.insert(path.clone(), outline);
        }
        (Self { decls, by_name, dirs }, outlines)
    }

    /// In-repo directory an import path refers to (longest suffix match).
    fn repo_dir_for_import(&self, import_path: &str) -> Option<&str> {
        self.dirs
            .iter()
            .filter(|d| !d.is_empty())
            .filter(|d| import_path == d.as_str() || import_path.ends_with(&format!("/{d}")))
            .max_by_key(|d| d.len())
            .map(String::as_str)
    }

    /// Same-directory match first, then a workspace-wide unique match.
    /// Ambiguous names resolve to nothing.
    fn resolve(&self, name: &str, dir: &str, accept: impl Fn(&Decl) -> bool) -> Option<&IndexedDecl> {
        let candidates: Vec<&IndexedDecl> = self
            .by_name
            .get(name)?
            .iter()
            .map(|&i| &self.decls[i])
            .filter(|d| accept(&d.decl))
            .collect();
        let local: Vec<_> = candidates.iter().filter(|d| d.dir == dir).collect();
        match (local.as_slice(), candidates.as_slice()) {
            ([one], _) => Some(one),
            ([], [one]) => Some(one),
            _ => None,
        }
    }

    fn resolve_in_dir(&self, name: &str, dir: &str) -> Option<&IndexedDecl> {
        let hits: Vec<_> = self
            .by_name
            .get(name)?
            .iter()
            .map(|&i| &self.decls[i])
            .filter(|d| d.dir == dir && d.decl.kind != DeclKind::Method)
            .collect();
        match hits.as_slice() {
            [one] => Some(one),
            _ => None,
        }
    }
}

fn lexical_references(text: &str) -> Vec<Reference> {
    let re = Regex::new(r"\b([A-Za-z_][A-Za-z0-9_]*)(?:\.([A-Za-z_][A-Za-z0-9_]*))?").expect("static regex");
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for cap in re.captures_iter(text) {
        let r = match cap.get(2) {
            Some(field) => Reference {
                name: field.as_str().to_string(),
                qualifier: Some(cap[1].to_string()),
                kind: RefKind::Selector,
                called: false,
            },
            None => Reference {
                name: cap[1].to_string(),
                qualifier: None,
                kind: RefKind::Value,
                called: false,
            },
        };
        if seen.insert(r.clone()) {
            out.push(r);
        }
    }
    out
}

/// Resolves every identifier referenced in the focal unit to at most one
/// definition in the workspace. Only one layer is collected. Imported
/// third-party packages contribute their import statement.
pub fn collect_dependencies(
    ws: &Workspace,
    focal_file: &str,
    focal: LineRange,
    grammars: &GrammarRegistry,
) -> Vec<SymbolDef> {
    let Some(source) = ws.get(focal_file) else {
        return Vec::new();
    };
    let grammar = grammars.for_path(focal_file);
    let refs = grammar
        .and_then(|g| g.references(source, focal.start, focal.end).ok())
        .unwrap_or_else(|| lexical_references(&slice_lines(source, focal)));
    let (index, outlines) = SymbolIndex::build(ws, grammars);
    let imports: Vec<ImportSpec> = outlines
        .get(focal_file)
        .map(|o| o.imports.clone())
        .unwrap_or_default();
    let dir = dir_of(focal_file);

    let mut out: Vec<SymbolDef> = Vec::new();
    let mut taken: HashSet<(String, usize)> = HashSet::new();
    let mut push = |d: &IndexedDecl, name: &str, source_of: &dyn Fn(&str) -> Option<String>| {
        let overlaps_focal = d.file == focal_file
            && d.decl.start_line <= focal.end
            && focal.start <= d.decl.end_line;
        if overlaps_focal || !taken.insert((d.file.clone(), d.decl.start_line)) {
            return;
        }
        let Some(text) = source_of(&d.file) else { return };
        out.push(SymbolDef {
            name: name.to_string(),
            file: d.file.clone(),
            def_text: text[d.decl.start_byte..d.decl.end_byte].to_string(),
            kind: d.decl.kind.into(),
            start_line: d.decl.start_line,
        });
    };
    let source_of = |file: &str| ws.get(file).map(str::to_string);
    let mut import_defs: Vec<SymbolDef> = Vec::new();

    for r in &refs {
        match (&r.qualifier, r.kind) {
            (Some(q), RefKind::Selector | RefKind::Type) => {
                if let Some(spec) = imports.iter().find(|s| &s.local_name() == q) {
                    match index.repo_dir_for_import(&spec.path) {
                        Some(repo_dir) => {
                            if let Some(d) = index.resolve_in_dir(&r.name, repo_dir) {
                                push(d, &r.name, &source_of);
                            }
                        }
                        None => {
                            if !import_defs.iter().any(|d| &d.name == q) {
                                import_defs.push(SymbolDef {
                                    name: q.clone(),
                                    file: focal_file.to_string(),
                                    def_text: source[spec.start_byte..spec.end_byte].to_string(),
                                    kind: SymbolKind::Import,
                                    start_line: spec.line,
                                });
                            }
                        }
                    }
                } else if let Some(d) = index.resolve(&r.name, dir, |d| d.kind == DeclKind::Method) {
                    push(d, &r.name, &source_of);
                }
            }
            _ => {
                if let Some(d) = index.resolve(&r.name, dir, |d| d.kind != DeclKind::Method) {
                    push(d, &r.name, &source_of);
                }
            }
        }
    }
    out.extend(import_defs);
    out.sort_by(|a, b| (&a.file, a.start_line, &a.name).cmp(&(&b.file, b.start_line, &b.name)));
    out
}

fn context_tokens(focal_text: &str, deps: &[SymbolDef]) -> usize {
    estimate_tokens(focal_text) + deps.iter().map(|d| estimate_tokens(&d.def_text)).sum::<usize>()
}

/// Grows a window around `issue` inside `unit` while it fits `budget`.
fn issue_window(source: &str, unit: LineRange, issue: LineRange, budget: usize) -> Result<LineRange, ContextError> {
    let tokens = |r: LineRange| estimate_tokens(&slice_lines(source, r));
    let mut r = LineRange::new(issue.start.max(unit.start), issue.end.min(unit.end));
    let needed = tokens(r);
    if needed > budget {
        return Err(ContextError::BudgetTooSmall { budget, needed });
    }
    let mut grow_up = true;
    loop {
        let up = (r.start > unit.start).then(|| LineRange::new(r.start - 1, r.end));
        let down = (r.end < unit.end).then(|| LineRange::new(r.start, r.end + 1));
        let order = if grow_up { [up, down] } else { [down, up] };
        let next = order.into_iter().flatten().find(|c| tokens(*c) <= budget);
        match next {
            Some(c) => r = c,
            None => return Ok(r),
        }
        grow_up = !grow_up;
    }
}

/// Enclosing unit plus dependencies, trimmed to the token budget.
///
/// Dependencies are dropped from the end until the context fits. If the unit
/// alone exceeds the budget, an issue-centered window of it is kept and no
/// dependencies are included.
pub fn extract_context(ws: &Workspace, issue: &LintIssue, cfg: &ContextConfig) -> Result<CodeContext, ContextError> {
    if cfg.budget == 0 {
        return Err(ContextError::ZeroBudget);
    }
    let source = ws.read(&issue.file)?;
    let grammar = cfg.grammars.for_path(&issue.file);
    let issue_lines = LineRange::of_span(&issue.span);
    let unit = enclosing_unit(source, issue_lines, grammar, cfg.fallback_window).map_err(|_| {
        ContextError::SpanOutOfRange {
            file: issue.file.clone(),
            span: issue.span,
            lines: line_count(source),
        }
    })?;
    let focal_text = slice_lines(source, unit.range);
    if estimate_tokens(&focal_text) > cfg.budget {
        let range = issue_window(source, unit.range, issue_lines, cfg.budget)?;
        let focal_text = slice_lines(source, range);
        return Ok(CodeContext {
            focal_file: issue.file.clone(),
            focal_span: range,
            budget_used: estimate_tokens(&focal_text),
            focal_text,
            unit_kind: UnitKind::Window,
            dependencies: Vec::new(),
        });
    }
    let mut deps = collect_dependencies(ws, &issue.file, unit.range, &cfg.grammars);
    while context_tokens(&focal_text, &deps) > cfg.budget {
        deps.pop();
    }
    Ok(CodeContext {
        focal_file: issue.file.clone(),
        focal_span: unit.range,
        budget_used: context_tokens(&focal_text, &deps),
        focal_text,
        unit_kind: unit.kind,
        dependencies: deps,
    })
}
