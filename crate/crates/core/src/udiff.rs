//! Unified diff generation, parsing and application.
//!
//! Generation groups line edits from `similar` into hunks with three lines of
//! context and writes GNU-style headers (`@@ -l,c +l,c @@`, with the count
//! omitted when it is 1).

use std::collections::BTreeMap;
use std::fmt::Write as _;

use similar::{ChangeTag, TextDiff};
use thiserror::Error;

use crate::issue::normalize_ws;
use crate::patch::{find_line_windows, ApplyMode};
use crate::workspace::Workspace;

pub const CONTEXT_LINES: usize = 3;
const NO_NEWLINE: &str = "\\ No newline at end of file";

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DiffLine {
    Context(String),
    Added(String),
    Removed(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Hunk {
    pub old_start: usize,
    pub old_len: usize,
    pub new_start: usize,
    pub new_len: usize,
    pub lines: Vec<DiffLine>,
}

impl Hunk {
    pub fn old_lines(&self) -> Vec<&str> {
        self.lines
            .iter()
            .filter_map(|l| match l {
                DiffLine::Context(s) | DiffLine::Removed(s) => Some(s.as_str()),
                DiffLine::Added(_) => None,
            })
            .collect()
    }

    pub fn new_lines(&self) -> Vec<&str> {
        self.lines
            .iter()
            .filter_map(|l| match l {
                DiffLine::Context(s) | DiffLine::Added(s) => Some(s.as_str()),
                DiffLine::Removed(_) => None,
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FileDiff {
    /// Path without the `a/` prefix; `None` for `/dev/null`.
    pub old_path: Option<String>,
    pub new_path: Option<String>,
    pub hunks: Vec<Hunk>,
    /// `true` when the new side ends without a newline.
    pub new_missing_newline: bool,
}

impl FileDiff {
    pub fn path(&self) -> &str {
        self.new_path
            .as_deref()
            .or(self.old_path.as_deref())
            .unwrap_or("")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unified diff line {line}: {reason}")]
pub struct DiffParseError {
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DiffApplyError {
    #[error("diff touches `{0}`, which is not in the workspace")]
    UnknownFile(String),
    #[error("hunk {hunk} of `{file}` does not match the workspace")]
    HunkMismatch { file: String, hunk: usize },
}

fn range(start: usize, len: usize) -> String {
    // GNU diff names the line before an empty range
    match len {
        0 => format!("{},0", start.saturating_sub(1)),
        1 => format!("{start}"),
        n => format!("{start},{n}"),
    }
}

/// Unified diff for one file; empty string when the texts are equal.
pub fn diff_texts(path: &str, old: &str, new: &str) -> String {
    if old == new {
        return String::new();
    }
    let diff = TextDiff::from_lines(old, new);
    let mut out = format!("--- a/{path}\n+++ b/{path}\n");
    for group in diff.grouped_ops(CONTEXT_LINES) {
        let (Some(first), Some(last)) = (group.first(), group.last()) else {
            continue;
        };
        let old_r = first.old_range().start..last.old_range().end;
        let new_r = first.new_range().start..last.new_range().end;
        let _ = writeln!(
            out,
            "@@ -{} +{} @@",
            range(old_r.start + 1, old_r.len()),
            range(new_r.start + 1, new_r.len())
        );
        for op in &group {
            for change in diff.iter_changes(op) {
                let sign = match change.tag() {
                    ChangeTag::Equal => ' ',
                    ChangeTag::Delete => '-',
                    ChangeTag::Insert => '+',
                };
                let value = change.value();
                out.push(sign);
                out.push_str(value.strip_suffix('\n').unwrap_or(value));
                out.push('\n');
                if !value.ends_with('\n') {
                    out.push_str(NO_NEWLINE);
                    out.push('\n');
                }
            }
        }
    }
    out
}

/// Concatenated per-file diffs, in path order, for files that differ.
pub fn diff_workspaces(before: &Workspace, after: &Workspace) -> String {
    let mut out = String::new();
    for (path, new) in after.files() {
        let old = before.get(path).unwrap_or("");
        out.push_str(&diff_texts(path, old, new));
    }
    out
}

fn strip_prefix_path(raw: &str) -> Option<String> {
    let p = raw.split('\t').next().unwrap_or(raw).trim();
    if p == "/dev/null" {
        return None;
    }
    let p = p
        .strip_prefix("a/")
        .or_else(|| p.strip_prefix("b/"))
        .unwrap_or(p);
    Some(p.to_string())
}

fn parse_range(text: &str, line: usize) -> Result<(usize, usize), DiffParseError> {
    let err = || DiffParseError {
        line,
        reason: format!("bad hunk range `{text}`"),
    };
    let (start, len) = match text.split_once(',') {
        Some((s, l)) => (s, l.parse().map_err(|_| err())?),
        None => (text, 1),
    };
    Ok((start.parse().map_err(|_| err())?, len))
}

/// Parses unified diff text. Lines before the first `---` header (such as
/// `diff --git` or `index` lines) are ignored.
pub fn parse_unified_diff(text: &str) -> Result<Vec<FileDiff>, DiffParseError> {
    let lines: Vec<&str> = text.lines().collect();
    let mut files = Vec::new();
    let mut i = 0;
    while i < lines.len() {
        let Some(old) = lines[i].strip_prefix("--- ") else {
            i += 1;
            continue;
        };
        let new = lines
            .get(i + 1)
            .and_then(|l| l.strip_prefix("+++ "))
            .ok_or_else(|| DiffParseError {
                line: i + 2,
                reason: "expected `+++` header".into(),
            })?;
        let mut file = FileDiff {
            old_path: strip_prefix_path(old),
            new_path: strip_prefix_path(new),
            hunks: Vec::new(),
            new_missing_newline: false,
        };
        i += 2;
        while i < lines.len() && lines[i].starts_with("@@") {
            let header = lines[i];
            let inner = header
                .strip_prefix("@@ ")
                .and_then(|h| h.split(" @@").next())
                .ok_or_else(|| DiffParseError {
                    line: i + 1,
                    reason: "malformed hunk header".into(),
                })?;
            let mut parts = inner.split_whitespace();
            let (old_start, old_len) = parts
                .next()
                .and_then(|p| p.strip_prefix('-'))
                .ok_or_else(|| DiffParseError { line: i + 1, reason: "missing old range".into() })
                .and_then(|p| parse_range(p, i + 1))?;
            let (new_start, new_len) = parts
                .next()
                .and_then(|p| p.strip_prefix('+'))
                .ok_or_else(|| DiffParseError { line: i + 1, reason: "missing new range".into() })
                .and_then(|p| parse_range(p, i + 1))?;
            i += 1;
            let mut hunk = Hunk { old_start, old_len, new_start, new_len, lines: Vec::new() };
            let (mut seen_old, mut seen_new) = (0, 0);
            while seen_old < old_len || seen_new < new_len {
                let Some(line) = lines.get(i) else {
                    return Err(DiffParseError { line: i + 1, reason: "hunk truncated".into() });
                };
                let (tag, body) = match line.chars().next() {
                    Some(c @ (' ' | '+' | '-')) => (c, &line[1..]),
                    // some tools drop the space on empty context lines
                    None => (' ', ""),
                    Some('\\') => {
                        if matches!(hunk.lines.last(), Some(DiffLine::Added(_) | DiffLine::Context(_))) {
                            file.new_missing_newline = true;
                        }
                        i += 1;
                        continue;
                    }
                    Some(_) => {
                        return Err(DiffParseError {
                            line: i + 1,
                            reason: format!("unexpected line in hunk: `{line}`"),
                        })
                    }
                };
                match tag {
                    ' ' => {
                        seen_old += 1;
                        seen_new += 1;
                        hunk.lines.push(DiffLine::Context(body.to_string()));
                    }
                    '-' => {
                        seen_old += 1;
                        hunk.lines.push(DiffLine::Removed(body.to_string()));
                    }
                    _ => {
                        seen_new += 1;
                        hunk.lines.push(DiffLine::Added(body.to_string()));
                    }
                }
                i += 1;
            }
            if seen_old != old_len || seen_new != new_len {
                return Err(DiffParseError {
                    line: i,
                    reason: "hunk line counts do not match header".into(),
                });
            }
            while lines.get(i).is_some_and(|l| l.starts_with('\\')) {
                if matches!(hunk.lines.last(), Some(DiffLine::Added(_) | DiffLine::Context(_))) {
                    file.new_missing_newline = true;
                }
                i += 1;
            }
            file.hunks.push(hunk);
        }
        files.push(file);
    }
    Ok(files)
}

/// Polarity-tagged, whitespace-normalized changed line.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ChangedLine {
    Added(String),
    Removed(String),
}

/// Multiset of changed lines, keyed by file then line, with multiplicities.
pub type ChangedLines = BTreeMap<String, BTreeMap<ChangedLine, usize>>;

/// Context lines are ignored; only `+`/`-` lines count.
pub fn changed_lines(files: &[FileDiff]) -> ChangedLines {
    let mut out: ChangedLines = BTreeMap::new();
    for f in files {
        let entry = out.entry(f.path().to_string()).or_default();
        for h in &f.hunks {
            for l in &h.lines {
                let key = match l {
                    DiffLine::Added(s) => ChangedLine::Added(normalize_ws(s)),
                    DiffLine::Removed(s) => ChangedLine::Removed(normalize_ws(s)),
                    DiffLine::Context(_) => continue,
                };
                *entry.entry(key).or_default() += 1;
            }
        }
    }
    out
}

/// Applies one file's hunks to `old`. Each hunk is tried at its stated
/// position (adjusted by earlier hunks) and otherwise at a unique exact
/// match of its old side.
pub fn apply_file_diff(old: &str, diff: &FileDiff) -> Result<String, DiffApplyError> {
    let mut lines: Vec<String> = old.lines().map(str::to_string).collect();
    let mut offset: isize = 0;
    for (idx, hunk) in diff.hunks.iter().enumerate() {
        let old_side = hunk.old_lines();
        let new_side: Vec<String> = hunk.new_lines().into_iter().map(str::to_string).collect();
        let stated = if hunk.old_len == 0 {
            hunk.old_start as isize + offset
        } else {
            hunk.old_start as isize - 1 + offset
        };
        let view: Vec<&str> = lines.iter().map(String::as_str).collect();
        let at_stated = stated >= 0
            && (stated as usize) + old_side.len() <= view.len()
            && view[stated as usize..stated as usize + old_side.len()] == old_side[..];
        let start = if at_stated {
            stated as usize
        } else {
            match find_line_windows(&view, &old_side, ApplyMode::Strict).as_slice() {
                [only] => *only,
                _ => {
                    return Err(DiffApplyError::HunkMismatch {
                        file: diff.path().to_string(),
                        hunk: idx,
                    })
                }
            }
        };
        lines.splice(start..start + old_side.len(), new_side.iter().cloned());
        offset += new_side.len() as isize - old_side.len() as isize;
    }
    let mut out = lines.join("\n");
    if !lines.is_empty() && !diff.new_missing_newline {
        out.push('\n');
    }
    Ok(out)
}

/// Applies a parsed diff to a workspace. Every touched file must exist.
pub fn apply_diff_to_workspace(ws: &Workspace, files: &[FileDiff]) -> Result<Workspace, DiffApplyError> {
    let mut out = ws.clone();
    for f in files {
        let (Some(old_path), Some(new_path)) = (&f.old_path, &f.new_path) else {
            return Err(DiffApplyError::UnknownFile(f.path().to_string()));
        };
        if old_path != new_path {
            return Err(DiffApplyError::UnknownFile(new_path.clone()));
        }
        let old = out
            .get(old_path)
            .ok_or_else(|| DiffApplyError::UnknownFile(old_path.clone()))?;
        let new = apply_file_diff(old, f)?;
        out.set_file(old_path.clone(), new);
    }
    Ok(out)
}
