//! Search/replace patch wire format.
//!
//! ```text
//! ### path/to/file.go
//! <<<<<<< SEARCH
//! old lines
//! =======
//! new lines
//! >>>>>>> REPLACE
//! ```
//!
//! Parsing is total: broken fences are counted in `malformed_count` rather
//! than reported as errors, because reward scoring charges for them.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::udiff;
use crate::workspace::Workspace;

pub const HEADER_PREFIX: &str = "### ";
pub const SEARCH_FENCE: &str = "<<<<<<< SEARCH";
pub const DIVIDER: &str = "=======";
pub const REPLACE_FENCE: &str = ">>>>>>> REPLACE";

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SearchReplaceBlock {
    pub file: String,
    /// Whole lines, each terminated by `\n`.
    pub search: String,
    /// Whole lines, each terminated by `\n`; empty means deletion.
    pub replace: String,
}

impl SearchReplaceBlock {
    pub fn new(file: impl Into<String>, search: &str, replace: &str) -> Self {
        Self {
            file: file.into(),
            search: terminate_lines(search),
            replace: terminate_lines(replace),
        }
    }
}

fn terminate_lines(text: &str) -> String {
    if text.is_empty() || text.ends_with('\n') {
        text.to_string()
    } else {
        format!("{text}\n")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct FixPatch {
    pub blocks: Vec<SearchReplaceBlock>,
    pub raw: String,
    pub malformed_count: usize,
}

impl FixPatch {
    pub fn from_blocks(blocks: Vec<SearchReplaceBlock>) -> Self {
        let mut patch = Self {
            blocks,
            raw: String::new(),
            malformed_count: 0,
        };
        patch.raw = render_patch(&patch).unwrap_or_default();
        patch
    }

    /// Equality on parsed structure, ignoring the raw text.
    pub fn structurally_eq(&self, other: &Self) -> bool {
        self.blocks == other.blocks && self.malformed_count == other.malformed_count
    }

    /// Text of the raw generation outside headers and fenced blocks.
    pub fn prose(&self) -> String {
        let mut out = Vec::new();
        let mut in_block = false;
        for line in self.raw.lines() {
            let l = line.trim_end();
            if l == SEARCH_FENCE {
                in_block = true;
            } else if l == REPLACE_FENCE {
                in_block = false;
            } else if !in_block && !l.starts_with(HEADER_PREFIX) && !l.starts_with("```") {
                out.push(line);
            }
        }
        out.join("\n").trim().to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PatchError {
    #[error("patch has {0} malformed block(s) and cannot be rendered")]
    MalformedPatch(usize),
    #[error("block for `{0}` contains a fence marker line and cannot be rendered")]
    FenceInContent(String),
    #[error("patch is not applicable: {0}")]
    NotApplicable(String),
}

enum State {
    Outside,
    Search(Vec<String>),
    Replace(Vec<String>, Vec<String>),
}

fn join_lines(lines: &[String]) -> String {
    let mut s = String::new();
    for l in lines {
        s.push_str(l);
        s.push('\n');
    }
    s
}

/// Parses generated text into a patch. Never fails.
pub fn parse_patch(text: &str) -> FixPatch {
    let normalized = crate::workspace::normalize_line_endings(text);
    let mut blocks = Vec::new();
    let mut malformed = 0usize;
    let mut path: Option<String> = None;
    let mut state = State::Outside;

    for line in normalized.lines() {
        let fence = line.trim_end();
        state = match state {
            State::Outside => {
                if let Some(p) = fence.strip_prefix(HEADER_PREFIX) {
                    let p = p.trim();
                    path = (!p.is_empty()).then(|| p.to_string());
                    State::Outside
                } else if fence == SEARCH_FENCE {
                    State::Search(Vec::new())
                } else {
                    State::Outside
                }
            }
            State::Search(search) => {
                if fence == DIVIDER {
                    State::Replace(search, Vec::new())
                } else if fence == SEARCH_FENCE {
                    malformed += 1;
                    State::Search(Vec::new())
                } else if fence == REPLACE_FENCE {
                    malformed += 1;
                    State::Outside
                } else if let Some(p) = fence.strip_prefix(HEADER_PREFIX) {
                    malformed += 1;
                    let p = p.trim();
                    path = (!p.is_empty()).then(|| p.to_string());
                    State::Outside
                } else {
                    let mut search = search;
                    search.push(line.to_string());
                    State::Search(search)
                }
            }
            State::Replace(search, replace) => {
                if fence == REPLACE_FENCE {
                    match &path {
                        Some(file) if !search.is_empty() => blocks.push(SearchReplaceBlock {
                            file: file.clone(),
                            search: join_lines(&search),
                            replace: join_lines(&replace),
                        }),
                        _ => malformed += 1,
                    }
                    State::Outside
                } else if fence == SEARCH_FENCE {
                    malformed += 1;
                    State::Search(Vec::new())
                } else if let Some(p) = fence.strip_prefix(HEADER_PREFIX) {
                    malformed += 1;
                    let p = p.trim();
                    path = (!p.is_empty()).then(|| p.to_string());
                    State::Outside
                } else {
                    let mut replace = replace;
                    replace.push(line.to_string());
                    State::Replace(search, replace)
                }
            }
        };
    }
    if !matches!(state, State::Outside) {
        malformed += 1;
    }

    FixPatch {
        blocks,
        raw: text.to_string(),
        malformed_count: malformed,
    }
}

fn is_fence_line(line: &str) -> bool {
    let l = line.trim_end();
    l == SEARCH_FENCE || l == DIVIDER || l == REPLACE_FENCE || l.starts_with(HEADER_PREFIX)
}

/// Emits canonical wire text. A header is written whenever the file changes.
pub fn render_patch(patch: &FixPatch) -> Result<String, PatchError> {
    if patch.malformed_count > 0 {
        return Err(PatchError::MalformedPatch(patch.malformed_count));
    }
    let mut out = String::new();
    let mut current: Option<&str> = None;
    for block in &patch.blocks {
        if block.search.lines().chain(block.replace.lines()).any(is_fence_line) {
            return Err(PatchError::FenceInContent(block.file.clone()));
        }
        if current != Some(block.file.as_str()) {
            out.push_str(HEADER_PREFIX);
            out.push_str(&block.file);
            out.push('\n');
            current = Some(&block.file);
        }
        out.push_str(SEARCH_FENCE);
        out.push('\n');
        out.push_str(&terminate_lines(&block.search));
        out.push_str(DIVIDER);
        out.push('\n');
        out.push_str(&terminate_lines(&block.replace));
        out.push_str(REPLACE_FENCE);
        out.push('\n');
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ApplyMode {
    Strict,
    /// Lines compare equal after stripping trailing whitespace.
    #[default]
    TrimTrailing,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockStatus {
    Applied,
    SearchNotFound,
    Ambiguous,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ApplyReport {
    pub per_block: Vec<BlockStatus>,
    /// Input workspace with every applied block, in order.
    pub result: Workspace,
    pub unapplied_count: usize,
}

impl ApplyReport {
    pub fn all_applied(&self) -> bool {
        self.unapplied_count == 0
    }

    pub fn applied_count(&self) -> usize {
        self.per_block.len() - self.unapplied_count
    }
}

/// Splits into lines and whether the text ended with a newline.
fn split_lines(text: &str) -> (Vec<&str>, bool) {
    (text.lines().collect(), text.ends_with('\n'))
}

fn lines_match(a: &str, b: &str, mode: ApplyMode) -> bool {
    match mode {
        ApplyMode::Strict => a == b,
        ApplyMode::TrimTrailing => a.trim_end() == b.trim_end(),
    }
}

/// Start indices of every window of `hay` equal to `needle`.
pub(crate) fn find_line_windows(hay: &[&str], needle: &[&str], mode: ApplyMode) -> Vec<usize> {
    if needle.is_empty() || needle.len() > hay.len() {
        return Vec::new();
    }
    (0..=hay.len() - needle.len())
        .filter(|&i| {
            hay[i..i + needle.len()]
                .iter()
                .zip(needle)
                .all(|(a, b)| lines_match(a, b, mode))
        })
        .collect()
}

/// Applies one block to file text.
pub fn apply_block_to_text(
    text: &str,
    block: &SearchReplaceBlock,
    mode: ApplyMode,
) -> Result<String, BlockStatus> {
    let (lines, trailing_nl) = split_lines(text);
    let needle: Vec<&str> = block.search.lines().collect();
    let hits = find_line_windows(&lines, &needle, mode);
    match hits.as_slice() {
        [] => Err(BlockStatus::SearchNotFound),
        [start] => {
            let mut out: Vec<&str> = Vec::with_capacity(lines.len());
            out.extend_from_slice(&lines[..*start]);
            out.extend(block.replace.lines());
            out.extend_from_slice(&lines[start + needle.len()..]);
            let mut joined = out.join("\n");
            if !out.is_empty() && trailing_nl {
                joined.push('\n');
            }
            Ok(joined)
        }
        _ => Err(BlockStatus::Ambiguous),
    }
}

/// Applies blocks sequentially; later blocks see earlier replacements.
pub fn apply_patch(ws: &Workspace, patch: &FixPatch, mode: ApplyMode) -> ApplyReport {
    let mut result = ws.clone();
    let mut per_block = Vec::with_capacity(patch.blocks.len());
    for block in &patch.blocks {
        let status = match result.get(&block.file) {
            None => BlockStatus::SearchNotFound,
            Some(text) => match apply_block_to_text(text, block, mode) {
                Ok(updated) => {
                    result.set_file(block.file.clone(), updated);
                    BlockStatus::Applied
                }
                Err(status) => status,
            },
        };
        per_block.push(status);
    }
    let unapplied_count = per_block
        .iter()
        .filter(|s| **s != BlockStatus::Applied)
        .count();
    ApplyReport {
        per_block,
        result,
        unapplied_count,
    }
}

/// Unified diff (3 lines of context) between `ws` and the patched workspace.
pub fn patch_to_unified_diff(
    ws: &Workspace,
    patch: &FixPatch,
    mode: ApplyMode,
) -> Result<String, PatchError> {
    let report = apply_patch(ws, patch, mode);
    if !report.all_applied() {
        let failed: Vec<String> = patch
            .blocks
            .iter()
            .zip(&report.per_block)
            .filter(|(_, s)| **s != BlockStatus::Applied)
            .map(|(b, s)| format!("{} ({s:?})", b.file))
            .collect();
        return Err(PatchError::NotApplicable(failed.join(", ")));
    }
    Ok(udiff::diff_workspaces(ws, &report.result))
}
