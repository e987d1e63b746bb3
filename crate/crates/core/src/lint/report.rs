use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::issue::{derive_issue_id, LintIssue, Severity, Span};

/// Registered lint report schemas.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    /// `file:line:col:rule:message`, one finding per line.
    #[default]
    Line,
    /// One JSON object per line with `LintIssue` field names.
    Jsonl,
}

impl FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "line" => Ok(Self::Line),
            "jsonl" | "json" => Ok(Self::Jsonl),
            other => Err(format!("unknown report format `{other}`")),
        }
    }
}

impl fmt::Display for ReportFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Line => "line",
            Self::Jsonl => "jsonl",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("report record {record} (line {line}): {reason}")]
pub struct ReportParseError {
    /// 0-based index of the offending record.
    pub record: usize,
    /// 1-based line in the raw report.
    pub line: usize,
    pub reason: String,
}

#[derive(Deserialize)]
struct StructuredRecord {
    issue_id: Option<String>,
    rule_id: String,
    file: String,
    span: Span,
    message: String,
    severity: Option<Severity>,
    category: Option<String>,
}

fn parse_line_record(raw: &str) -> Result<LintIssue, String> {
    let mut parts = raw.splitn(5, ':');
    let mut field = |name: &str| {
        parts
            .next()
            .ok_or_else(|| format!("missing field `{name}`"))
    };
    let file = field("file")?.trim();
    let line = field("line")?.trim();
    let col = field("col")?.trim();
    let rule = field("rule")?.trim();
    let message = field("message")?.trim();
    let line: usize = line.parse().map_err(|_| format!("bad line `{line}`"))?;
    let col: usize = col.parse().map_err(|_| format!("bad column `{col}`"))?;
    let issue = LintIssue::new(rule, file, Span::point(line, col), message, Severity::Warning);
    issue.validate().map_err(|e| e.to_string())?;
    Ok(issue)
}

fn parse_structured_record(raw: &str) -> Result<LintIssue, String> {
    let rec: StructuredRecord = serde_json::from_str(raw).map_err(|e| e.to_string())?;
    let issue = LintIssue {
        issue_id: rec
            .issue_id
            .unwrap_or_else(|| derive_issue_id(&rec.file, &rec.span, &rec.rule_id)),
        category: rec.category.unwrap_or_else(|| rec.rule_id.clone()),
        rule_id: rec.rule_id,
        file: rec.file,
        span: rec.span,
        message: rec.message,
        severity: rec.severity.unwrap_or(Severity::Warning),
    };
    issue.validate().map_err(|e| e.to_string())?;
    Ok(issue)
}

/// Parses a raw report. Blank lines are skipped; the first invalid record
/// aborts the parse.
pub fn parse_lint_report(raw: &str, format: ReportFormat) -> Result<Vec<LintIssue>, ReportParseError> {
    let parse = match format {
        ReportFormat::Line => parse_line_record,
        ReportFormat::Jsonl => parse_structured_record,
    };
    raw.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .enumerate()
        .map(|(record, (idx, text))| {
            parse(text).map_err(|reason| ReportParseError {
                record,
                line: idx + 1,
                reason,
            })
        })
        .collect()
}

/// Renders issues in the given schema, one record per line.
pub fn render_lint_report(issues: &[LintIssue], format: ReportFormat) -> String {
    let mut out = String::new();
    for issue in issues {
        match format {
            ReportFormat::Line => {
                let msg = issue.message.replace(['\n', '\r'], " ");
                out.push_str(&format!(
                    "{}:{}:{}:{}:{}\n",
                    issue.file, issue.span.start_line, issue.span.start_col, issue.rule_id, msg
                ));
            }
            ReportFormat::Jsonl => {
                out.push_str(&serde_json::to_string(issue).expect("issue serializes"));
                out.push('\n');
            }
        }
    }
    out
}
