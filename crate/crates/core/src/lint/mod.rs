//! Linter adapters: a built-in toy linter for Go fixtures and an external
//! command adapter that parses a configured report format.

mod external;
pub mod report;
pub mod toy;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::issue::LintIssue;
use crate::workspace::Workspace;

pub use report::{parse_lint_report, render_lint_report, ReportFormat};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum LinterKind {
    #[default]
    Toy,
    External,
}

/// Linter selection. An empty `enabled_rules` set enables every rule.
///
/// External commands are argv templates; `{root}` is replaced with the
/// directory the workspace is materialized into, which is also the working
/// directory of the process.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct LinterConfig {
    pub kind: LinterKind,
    #[serde(default)]
    pub command: Vec<String>,
    #[serde(default)]
    pub report_format: ReportFormat,
    #[serde(default)]
    pub enabled_rules: BTreeSet<String>,
}

impl LinterConfig {
    pub fn toy() -> Self {
        Self::default()
    }

    pub fn toy_with_rules<I: IntoIterator<Item = S>, S: Into<String>>(rules: I) -> Self {
        Self {
            enabled_rules: rules.into_iter().map(Into::into).collect(),
            ..Self::default()
        }
    }

    pub fn external(command: Vec<String>, report_format: ReportFormat) -> Self {
        Self {
            kind: LinterKind::External,
            command,
            report_format,
            enabled_rules: BTreeSet::new(),
        }
    }

    pub fn validate(&self) -> Result<(), LintError> {
        if self.kind == LinterKind::External && self.command.is_empty() {
            return Err(LintError::InvalidConfig(
                "external linter requires a nonempty command".into(),
            ));
        }
        Ok(())
    }

    pub fn rule_enabled(&self, rule: &str) -> bool {
        self.enabled_rules.is_empty() || self.enabled_rules.contains(rule)
    }
}

#[derive(Debug, Error)]
pub enum LintError {
    #[error("invalid linter config: {0}")]
    InvalidConfig(String),
    #[error("linter command failed ({status}): {stderr}")]
    CommandFailed { status: String, stderr: String },
    #[error(transparent)]
    Report(#[from] report::ReportParseError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Workspace(#[from] crate::workspace::WorkspaceError),
}

/// Scans the workspace and returns findings sorted by
/// `(file, start_line, start_col, rule_id)`.
pub fn run_linter(ws: &Workspace, cfg: &LinterConfig) -> Result<Vec<LintIssue>, LintError> {
    cfg.validate()?;
    let mut issues = match cfg.kind {
        LinterKind::Toy => toy::scan(ws, cfg),
        LinterKind::External => external::run(ws, cfg)?,
    };
    issues.retain(|i| cfg.rule_enabled(&i.rule_id));
    issues.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()).then_with(|| a.message.cmp(&b.message)));
    issues.dedup();
    Ok(issues)
}
