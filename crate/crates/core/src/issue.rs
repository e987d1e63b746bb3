use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::workspace::{validate_rel_path, Workspace, WorkspaceError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
    Info,
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Severity::Error => "error",
            Severity::Warning => "warning",
            Severity::Info => "info",
        })
    }
}

/// 1-based inclusive source range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Span {
    pub start_line: usize,
    pub start_col: usize,
    pub end_line: usize,
    pub end_col: usize,
}

impl Span {
    pub fn point(line: usize, col: usize) -> Self {
        Self {
            start_line: line,
            start_col: col,
            end_line: line,
            end_col: col,
        }
    }

    pub fn lines(start_line: usize, end_line: usize) -> Self {
        Self {
            start_line,
            start_col: 1,
            end_line,
            end_col: 1,
        }
    }

    pub fn is_valid(&self) -> bool {
        self.start_line >= 1
            && self.start_col >= 1
            && self.end_line >= 1
            && self.end_col >= 1
            && (self.start_line, self.start_col) <= (self.end_line, self.end_col)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IssueError {
    #[error("span {0:?} is not a valid 1-based range")]
    InvalidSpan(Span),
    #[error("rule id must be nonempty")]
    EmptyRule,
    #[error("invalid issue path `{0}`")]
    InvalidPath(String),
}

/// One static-analysis finding.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LintIssue {
    pub issue_id: String,
    pub rule_id: String,
    pub file: String,
    pub span: Span,
    pub message: String,
    pub severity: Severity,
    pub category: String,
}

impl LintIssue {
    /// Creates an issue with a derived id (`file:line:col:rule`) and the rule as category.
    pub fn new(
        rule_id: impl Into<String>,
        file: impl Into<String>,
        span: Span,
        message: impl Into<String>,
        severity: Severity,
    ) -> Self {
        let rule_id = rule_id.into();
        let file = file.into();
        Self {
            issue_id: derive_issue_id(&file, &span, &rule_id),
            category: rule_id.clone(),
            rule_id,
            file,
            span,
            message: message.into(),
            severity,
        }
    }

    pub fn validate(&self) -> Result<(), IssueError> {
        if self.rule_id.is_empty() {
            return Err(IssueError::EmptyRule);
        }
        if !self.span.is_valid() {
            return Err(IssueError::InvalidSpan(self.span));
        }
        validate_rel_path(&self.file).map_err(|_| IssueError::InvalidPath(self.file.clone()))
    }

    pub fn sort_key(&self) -> (&str, usize, usize, &str) {
        (&self.file, self.span.start_line, self.span.start_col, &self.rule_id)
    }
}

pub fn derive_issue_id(file: &str, span: &Span, rule_id: &str) -> String {
    format!("{}:{}:{}:{}", file, span.start_line, span.start_col, rule_id)
}

/// Collapses whitespace runs to one space and trims the ends.
pub fn normalize_ws(line: &str) -> String {
    line.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Shift-stable identity of a finding: hash of rule, file and the
/// whitespace-normalized text of the issue's first line.
pub fn issue_fingerprint(issue: &LintIssue, ws: &Workspace) -> Result<String, WorkspaceError> {
    let text = ws.read(&issue.file)?;
    let line = text
        .lines()
        .nth(issue.span.start_line.saturating_sub(1))
        .unwrap_or("");
    Ok(fingerprint_parts(&issue.rule_id, &issue.file, line))
}

pub(crate) fn fingerprint_parts(rule_id: &str, file: &str, line: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(rule_id.as_bytes());
    hasher.update([0u8]);
    hasher.update(file.as_bytes());
    hasher.update([0u8]);
    hasher.update(normalize_ws(line).as_bytes());
    hex::encode(&hasher.finalize()[..12])
}
