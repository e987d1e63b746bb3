//! Per-language syntax services: parse checks, top-level outlines and
//! identifier references. Grammars are looked up by file extension.

pub mod go;

use std::collections::BTreeMap;
use std::sync::Arc;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("source could not be parsed as {language}")]
pub struct ParseFailure {
    pub language: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum DeclKind {
    Function,
    Method,
    Type,
    Const,
    Var,
    Import,
}

/// A top-level declaration. Lines are 1-based inclusive.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Decl {
    pub kind: DeclKind,
    pub names: Vec<String>,
    /// Receiver base type for methods.
    pub receiver: Option<String>,
    pub start_line: usize,
    pub end_line: usize,
    pub start_byte: usize,
    pub end_byte: usize,
}

impl Decl {
    pub fn contains_lines(&self, start: usize, end: usize) -> bool {
        self.start_line <= start && end <= self.end_line
    }

    pub fn text<'a>(&self, source: &'a str) -> &'a str {
        &source[self.start_byte..self.end_byte]
    }

    pub fn is_function(&self) -> bool {
        matches!(self.kind, DeclKind::Function | DeclKind::Method)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImportSpec {
    /// Explicit alias, if any (`_` and `.` included).
    pub alias: Option<String>,
    pub path: String,
    pub line: usize,
    pub start_byte: usize,
    pub end_byte: usize,
}

impl ImportSpec {
    /// Name the package is referenced by in code.
    pub fn local_name(&self) -> String {
        if let Some(a) = &self.alias {
            return a.clone();
        }
        let mut segs = self.path.rsplit('/');
        let last = segs.next().unwrap_or(&self.path);
        let is_version = last.len() > 1
            && last.starts_with('v')
            && last[1..].chars().all(|c| c.is_ascii_digit());
        match (is_version, segs.next()) {
            (true, Some(prev)) => prev.to_string(),
            _ => last.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Outline {
    pub package: Option<String>,
    /// Line of the package clause.
    pub package_line: Option<usize>,
    pub imports: Vec<ImportSpec>,
    pub decls: Vec<Decl>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RefKind {
    /// Plain value identifier.
    Value,
    Type,
    /// `x.name` where `x` is the qualifier.
    Selector,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Reference {
    pub name: String,
    pub qualifier: Option<String>,
    pub kind: RefKind,
    /// `true` when the reference is the callee of a call expression.
    pub called: bool,
}

pub trait Grammar: Send + Sync {
    fn language(&self) -> &'static str;

    /// `true` when the source parses without syntax errors.
    fn check(&self, source: &str) -> bool;

    fn outline(&self, source: &str) -> Result<Outline, ParseFailure>;

    /// Identifiers referenced within the 1-based inclusive line range, in
    /// first-occurrence order without duplicates.
    fn references(
        &self,
        source: &str,
        start_line: usize,
        end_line: usize,
    ) -> Result<Vec<Reference>, ParseFailure>;
}

#[derive(Clone)]
pub struct GrammarRegistry {
    by_ext: BTreeMap<String, Arc<dyn Grammar>>,
}

impl Default for GrammarRegistry {
    fn default() -> Self {
        let mut reg = Self::empty();
        reg.register("go", Arc::new(go::GoGrammar));
        reg
    }
}

impl std::fmt::Debug for GrammarRegistry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_set().entries(self.by_ext.keys()).finish()
    }
}

impl GrammarRegistry {
    pub fn empty() -> Self {
        Self {
            by_ext: BTreeMap::new(),
        }
    }

    pub fn register(&mut self, ext: &str, grammar: Arc<dyn Grammar>) {
        self.by_ext.insert(ext.to_string(), grammar);
    }

    pub fn for_path(&self, path: &str) -> Option<&dyn Grammar> {
        let name = path.rsplit('/').next().unwrap_or(path);
        let (_, ext) = name.rsplit_once('.')?;
        self.by_ext.get(ext).map(|g| g.as_ref())
    }
}

/// Directory part of a repo-relative path (`""` for top-level files).
pub fn dir_of(path: &str) -> &str {
    path.rsplit_once('/').map(|(d, _)| d).unwrap_or("")
}
