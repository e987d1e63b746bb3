//! Training-sample construction.
//!
//! Cold-start samples are cut out of a repository: the focal file is trimmed
//! to the unit containing the finding, one layer of in-repo definitions is
//! copied along, and third-party imports are replaced by generated stubs.
//! A sample is kept only if the trimmed workspace passes the compile check
//! and the finding still reproduces on it. Feedback samples come from
//! accepted fixes and carry a golden patch.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use regex::Regex;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use similar::TextDiff;
use thiserror::Error;

use crate::context::{collect_dependencies, enclosing_unit, extract_context, CodeContext, ContextConfig, ContextError, LineRange, SymbolKind, UnitKind};
use crate::issue::{derive_issue_id, issue_fingerprint, LintIssue, Span};
use crate::lint::{run_linter, LintError, LinterConfig};
use crate::orchestrator::backend::GenerationBackend;
use crate::orchestrator::{fix_issue, CompileCheck, CompileError, FixConfig, FixError, GenerationRequest};
use crate::patch::{apply_patch, find_line_windows, ApplyMode, FixPatch, SearchReplaceBlock};
use crate::syntax::{dir_of, DeclKind, GrammarRegistry, ImportSpec, Outline, RefKind};
use crate::udiff::{apply_diff_to_workspace, parse_unified_diff};
use crate::workspace::{Workspace, WorkspaceError};

pub const DEFAULT_CLASSIFY_ATTEMPTS: usize = 8;
pub const DEFAULT_CATEGORY_CAP: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleKind {
    ColdStart,
    Feedback,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingSample {
    pub sample_id: String,
    pub kind: SampleKind,
    /// The finding, located in `workspace` coordinates.
    pub issue: LintIssue,
    pub context: CodeContext,
    pub workspace: Workspace,
    #[serde(default)]
    pub golden_patch: Option<FixPatch>,
    /// Number of successful repair attempts during classification.
    #[serde(default)]
    pub difficulty: Option<usize>,
    pub category: String,
}

impl TrainingSample {
    pub fn band(&self) -> Option<DifficultyBand> {
        self.difficulty.map(DifficultyBand::of)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DifficultyBand {
    Hard,
    Medium,
    Easy,
}

impl DifficultyBand {
    /// 0-2 successes are hard, 3-5 medium, 6 or more easy.
    pub fn of(successes: usize) -> Self {
        match successes {
            0..=2 => Self::Hard,
            3..=5 => Self::Medium,
            _ => Self::Easy,
        }
    }
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("stub generation failed for `{import}`: {reason}")]
    StubGenerationFailed { import: String, reason: String },
    #[error("minimal workspace for {0} does not pass the compile check")]
    NotCompilable(String),
    #[error("issue {0} does not lie in a parseable file")]
    Unlocatable(String),
    #[error("linter failure: {0}")]
    Linter(#[from] LintError),
    #[error("compile check failure: {0}")]
    Compile(#[from] CompileError),
    #[error(transparent)]
    Workspace(#[from] WorkspaceError),
    #[error(transparent)]
    Context(#[from] ContextError),
    #[error(transparent)]
    Fix(#[from] FixError),
}

// ---------------------------------------------------------------------------
// Stubs

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StubOrigin {
    Template,
    PluggableGenerator,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UsageKind {
    Type,
    Func,
    Value,
}

/// A name the trimmed code uses from an external package.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct StubUsage {
    pub name: String,
    pub kind: UsageKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StubSpec {
    pub import_path: String,
    pub package: String,
    /// Workspace path the stub is written to.
    pub path: String,
    pub text: String,
    pub origin: StubOrigin,
}

pub trait StubGenerator: Send + Sync {
    /// Source text of a stub package exposing `usages`.
    fn generate(&self, import_path: &str, package: &str, usages: &[StubUsage]) -> Result<(String, StubOrigin), String>;
}

/// Emits one permissive declaration per used name.
#[derive(Debug, Clone, Copy, Default)]
pub struct TemplateStubGenerator;

impl StubGenerator for TemplateStubGenerator {
    fn generate(&self, import_path: &str, package: &str, usages: &[StubUsage]) -> Result<(String, StubOrigin), String> {
        let mut out = format!("// Stub for \"{import_path}\".\npackage {package}\n");
        for u in usages {
            out.push('\n');
            match u.kind {
                UsageKind::Type => out.push_str(&format!("type {} struct{{}}\n", u.name)),
                UsageKind::Func => out.push_str(&format!("func {}(args ...any) any {{\n\treturn nil\n}}\n", u.name)),
                UsageKind::Value => out.push_str(&format!("var {} any\n", u.name)),
            }
        }
        Ok((out, StubOrigin::Template))
    }
}

/// Asks a generation backend to write the stub. The answer may be fenced;
/// it must parse on its own.
pub struct BackendStubGenerator<'a> {
    pub backend: &'a dyn GenerationBackend,
    pub issue: &'a LintIssue,
}

impl StubGenerator for BackendStubGenerator<'_> {
    fn generate(&self, import_path: &str, package: &str, usages: &[StubUsage]) -> Result<(String, StubOrigin), String> {
        let mut prompt = format!(
            "Write a minimal Go package `{package}` (import path \"{import_path}\") that declares:\n"
        );
        for u in usages {
            prompt.push_str(&format!("- {:?} {}\n", u.kind, u.name).to_lowercase());
        }
        prompt.push_str("Answer with the Go source only.\n");
        let ws = Workspace::new("stub");
        let ctx = CodeContext {
            focal_file: format!("vendor/{import_path}/{package}.go"),
            focal_span: LineRange::new(1, 1),
            focal_text: String::new(),
            unit_kind: UnitKind::File,
            dependencies: Vec::new(),
            budget_used: 0,
        };
        let req = GenerationRequest {
            prompt: &prompt,
            issue: self.issue,
            context: &ctx,
            workspace: &ws,
            attempt: 1,
        };
        let raw = self.backend.generate(&req).map_err(|e| e.to_string())?;
        let text: String = raw
            .lines()
            .filter(|l| !l.trim_start().starts_with("```"))
            .map(|l| format!("{l}\n"))
            .collect();
        Ok((text, StubOrigin::PluggableGenerator))
    }
}

// ---------------------------------------------------------------------------
// Minimal workspaces

#[derive(Debug, Clone)]
pub struct BuildConfig {
    pub linter: LinterConfig,
    pub compile: CompileCheck,
    pub context: ContextConfig,
}

impl Default for BuildConfig {
    fn default() -> Self {
        Self {
            linter: LinterConfig::toy(),
            compile: CompileCheck::SyntaxParse,
            context: ContextConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MinimalWorkspace {
    pub workspace: Workspace,
    /// The input issue relocated to the trimmed focal file.
    pub issue: LintIssue,
    pub stubs: Vec<StubSpec>,
}

/// Kept line ranges of one file and where each lands in the trimmed output.
struct Trimmed {
    text: String,
    /// (original start, new start, length)
    placements: Vec<(usize, usize, usize)>,
}

impl Trimmed {
    fn map_line(&self, line: usize) -> Option<usize> {
        self.placements
            .iter()
            .find(|(o, _, len)| *o <= line && line < o + len)
            .map(|(o, n, _)| n + (line - o))
    }
}

fn uses_package(text: &str, name: &str) -> bool {
    Regex::new(&format!(r"\b{}\.", regex::escape(name)))
        .expect("escaped name")
        .is_match(text)
}

fn merge_ranges(mut ranges: Vec<LineRange>) -> Vec<LineRange> {
    ranges.sort_by_key(|r| (r.start, r.end));
    let mut out: Vec<LineRange> = Vec::new();
    for r in ranges {
        match out.last_mut() {
            Some(last) if r.start <= last.end + 1 => last.end = last.end.max(r.end),
            _ => out.push(r),
        }
    }
    out
}

/// Package clause, the imports the kept text needs, then the kept ranges.
fn trim_file(source: &str, outline: &Outline, keep: Vec<LineRange>) -> Option<Trimmed> {
    let package_line = outline.package_line?;
    let lines: Vec<&str> = source.lines().collect();
    let keep = merge_ranges(keep);
    let kept_text: String = keep
        .iter()
        .flat_map(|r| lines[r.start - 1..r.end].iter().map(|l| format!("{l}\n")))
        .collect();
    let keeps_import_decl = outline
        .decls
        .iter()
        .any(|d| d.kind == DeclKind::Import && keep.iter().any(|r| r.start <= d.start_line && d.end_line <= r.end));

    let mut text = format!("{}\n", lines[package_line - 1]);
    if !keeps_import_decl {
        let needed: Vec<&ImportSpec> = outline
            .imports
            .iter()
            .filter(|s| !matches!(s.alias.as_deref(), Some("_") | Some(".")))
            .filter(|s| uses_package(&kept_text, &s.local_name()))
            .collect();
        if !needed.is_empty() {
            text.push_str("\nimport (\n");
            for spec in needed {
                text.push('\t');
                text.push_str(&source[spec.start_byte..spec.end_byte]);
                text.push('\n');
            }
            text.push_str(")\n");
        }
    }
    let mut placements = Vec::new();
    for r in &keep {
        text.push('\n');
        let new_start = text.lines().count() + 1;
        for l in &lines[r.start - 1..r.end] {
            text.push_str(l);
            text.push('\n');
        }
        placements.push((r.start, new_start, r.len()));
    }
    Some(Trimmed { text, placements })
}

/// Directory of the workspace an import path refers to, by longest suffix.
fn repo_dir_for_import<'a>(dirs: &'a BTreeSet<String>, import_path: &str) -> Option<&'a str> {
    dirs.iter()
        .filter(|d| !d.is_empty())
        .filter(|d| import_path == d.as_str() || import_path.ends_with(&format!("/{d}")))
        .max_by_key(|d| d.len())
        .map(String::as_str)
}

fn external_usages(
    ws: &Workspace,
    grammars: &GrammarRegistry,
    repo_dirs: &BTreeSet<String>,
) -> BTreeMap<(String, String), BTreeMap<String, UsageKind>> {
    let mut out: BTreeMap<(String, String), BTreeMap<String, UsageKind>> = BTreeMap::new();
    for (path, text) in ws.files() {
        let Some(g) = grammars.for_path(path) else { continue };
        let Ok(outline) = g.outline(text) else { continue };
        let externals: BTreeMap<String, &ImportSpec> = outline
            .imports
            .iter()
            .filter(|s| !matches!(s.alias.as_deref(), Some("_") | Some(".")))
            .filter(|s| repo_dir_for_import(repo_dirs, &s.path).is_none())
            .map(|s| (s.local_name(), s))
            .collect();
        if externals.is_empty() {
            continue;
        }
        let total = text.lines().count().max(1);
        let Ok(refs) = g.references(text, 1, total) else { continue };
        for r in refs {
            let Some(spec) = r.qualifier.as_ref().and_then(|q| externals.get(q)) else { continue };
            let kind = match (r.kind, r.called) {
                (RefKind::Type, _) => UsageKind::Type,
                (_, true) => UsageKind::Func,
                _ => UsageKind::Value,
            };
            let slot = out
                .entry((spec.path.clone(), spec.local_name()))
                .or_default()
                .entry(r.name.clone())
                .or_insert(kind);
            *slot = (*slot).min(kind);
        }
        for spec in externals.values() {
            out.entry((spec.path.clone(), spec.local_name())).or_default();
        }
    }
    out
}

/// Cuts the finding's enclosing unit, its one-layer in-repo dependencies and
/// stubs for external packages out of `repo`.
pub fn build_minimal_workspace(
    repo: &Workspace,
    issue: &LintIssue,
    stubs: &dyn StubGenerator,
    cfg: &BuildConfig,
) -> Result<MinimalWorkspace, DatasetError> {
    let grammars = &cfg.context.grammars;
    let source = repo.read(&issue.file)?;
    let grammar = grammars
        .for_path(&issue.file)
        .ok_or_else(|| DatasetError::Unlocatable(issue.issue_id.clone()))?;
    grammar
        .outline(source)
        .map_err(|_| DatasetError::Unlocatable(issue.issue_id.clone()))?;
    let span = LineRange::of_span(&issue.span);
    let unit = enclosing_unit(source, span, Some(grammar), cfg.context.fallback_window)
        .map_err(|_| DatasetError::Unlocatable(issue.issue_id.clone()))?;

    let mut keep: BTreeMap<String, Vec<LineRange>> = BTreeMap::new();
    let mut out = Workspace::new(repo.root.clone());
    let relocated;
    if unit.kind == UnitKind::File {
        out = out.with_file(&issue.file, source)?;
        relocated = issue.clone();
    } else {
        keep.entry(issue.file.clone()).or_default().push(unit.range);
        for dep in collect_dependencies(repo, &issue.file, unit.range, grammars) {
            if dep.kind == SymbolKind::Import {
                continue;
            }
            let end = dep.start_line + dep.def_text.lines().count().max(1) - 1;
            keep.entry(dep.file.clone()).or_default().push(LineRange::new(dep.start_line, end));
        }
        let mut focal_map = None;
        for (path, ranges) in keep {
            let text = repo.read(&path)?;
            let Some(file_outline) = grammars.for_path(&path).and_then(|g| g.outline(text).ok()) else {
                out = out.with_file(&path, text)?;
                continue;
            };
            let Some(trimmed) = trim_file(text, &file_outline, ranges) else {
                out = out.with_file(&path, text)?;
                continue;
            };
            out = out.with_file(&path, &trimmed.text)?;
            if path == issue.file {
                focal_map = Some(trimmed);
            }
        }
        let map = focal_map.ok_or_else(|| DatasetError::Unlocatable(issue.issue_id.clone()))?;
        let start = map.map_line(issue.span.start_line).expect("issue inside kept unit");
        let end = map.map_line(issue.span.end_line).unwrap_or(start);
        let mut moved = issue.clone();
        moved.span = Span {
            start_line: start,
            end_line: end,
            ..issue.span
        };
        moved.issue_id = derive_issue_id(&moved.file, &moved.span, &moved.rule_id);
        relocated = moved;
    }

    let repo_dirs: BTreeSet<String> = repo.paths().map(|p| dir_of(p).to_string()).collect();
    let mut specs = Vec::new();
    for ((import_path, package), usages) in external_usages(&out, grammars, &repo_dirs) {
        let usages: Vec<StubUsage> = usages
            .into_iter()
            .map(|(name, kind)| StubUsage { name, kind })
            .collect();
        let (text, origin) = stubs
            .generate(&import_path, &package, &usages)
            .map_err(|reason| DatasetError::StubGenerationFailed { import: import_path.clone(), reason })?;
        let path = format!("vendor/{import_path}/{package}.go");
        let parses = grammars.for_path(&path).is_none_or(|g| g.check(&text));
        if !parses {
            return Err(DatasetError::StubGenerationFailed {
                import: import_path,
                reason: "stub does not parse".into(),
            });
        }
        out = out.with_file(&path, &text)?;
        specs.push(StubSpec { import_path, package, path, text, origin });
    }

    if !cfg.compile.run(&out)? {
        return Err(DatasetError::NotCompilable(issue.issue_id.clone()));
    }
    Ok(MinimalWorkspace {
        workspace: out,
        issue: relocated,
        stubs: specs,
    })
}

// ---------------------------------------------------------------------------
// Reproduction

/// `true` when scanning `after` finds the issue's fingerprint, taken in `before`.
pub fn issue_persists(before: &Workspace, after: &Workspace, issue: &LintIssue, linter: &LinterConfig) -> Result<bool, LintError> {
    let target = issue_fingerprint(issue, before)?;
    let found = run_linter(after, linter)?;
    Ok(found
        .iter()
        .any(|i| issue_fingerprint(i, after).is_ok_and(|f| f == target)))
}

/// Re-runs the linter on `ws` and looks for the same finding.
pub fn reproduce_issue(ws: &Workspace, issue: &LintIssue, linter: &LinterConfig) -> Result<bool, LintError> {
    issue_persists(ws, ws, issue, linter)
}

fn short_hash(parts: &[&str]) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update(p.as_bytes());
        h.update([0u8]);
    }
    hex::encode(&h.finalize()[..6])
}

#[derive(Debug, Default)]
pub struct BuildSummary {
    pub samples: Vec<TrainingSample>,
    /// (issue id, reason) for every issue that did not become a sample.
    pub rejected: Vec<(String, String)>,
}

/// One cold-start sample, or the reason it was rejected.
pub fn build_cold_start_sample(
    repo: &Workspace,
    issue: &LintIssue,
    stubs: &dyn StubGenerator,
    cfg: &BuildConfig,
) -> Result<Result<TrainingSample, String>, DatasetError> {
    let minimal = match build_minimal_workspace(repo, issue, stubs, cfg) {
        Ok(m) => m,
        Err(e @ (DatasetError::NotCompilable(_) | DatasetError::StubGenerationFailed { .. } | DatasetError::Unlocatable(_))) => {
            return Ok(Err(e.to_string()))
        }
        Err(e) => return Err(e),
    };
    if !reproduce_issue(&minimal.workspace, &minimal.issue, &cfg.linter)? {
        return Ok(Err("issue does not reproduce on the minimal workspace".into()));
    }
    let context = extract_context(&minimal.workspace, &minimal.issue, &cfg.context)?;
    Ok(Ok(TrainingSample {
        sample_id: format!("cs-{}", short_hash(&[&repo.root, &issue.issue_id])),
        kind: SampleKind::ColdStart,
        category: minimal.issue.category.clone(),
        issue: minimal.issue,
        context,
        workspace: minimal.workspace,
        golden_patch: None,
        difficulty: None,
    }))
}

/// Builds cold-start samples for every issue, keeping only those whose
/// minimal workspace compiles and reproduces the finding.
pub fn build_dataset(
    repo: &Workspace,
    issues: &[LintIssue],
    stubs: &dyn StubGenerator,
    cfg: &BuildConfig,
) -> Result<BuildSummary, DatasetError> {
    let mut summary = BuildSummary::default();
    for issue in issues {
        match build_cold_start_sample(repo, issue, stubs, cfg)? {
            Ok(sample) => summary.samples.push(sample),
            Err(reason) => summary.rejected.push((issue.issue_id.clone(), reason)),
        }
    }
    Ok(summary)
}

// ---------------------------------------------------------------------------
// Difficulty and selection

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Classification {
    /// Every attempt succeeded; the sample is too easy to keep.
    Discard { successes: usize },
    Keep { successes: usize, band: DifficultyBand },
}

/// Runs `attempts` independent single-shot repairs and counts successes.
pub fn classify_difficulty(
    sample: &TrainingSample,
    backend: &dyn GenerationBackend,
    attempts: usize,
    fix_cfg: &FixConfig,
) -> Result<Classification, DatasetError> {
    let single = FixConfig {
        max_retries: 0,
        ..fix_cfg.clone()
    };
    let mut successes = 0;
    for _ in 0..attempts {
        let run = fix_issue(&sample.workspace, &sample.issue, backend, &single)?;
        if run.outcome.is_fixed() {
            successes += 1;
        }
    }
    Ok(if successes == attempts {
        Classification::Discard { successes }
    } else {
        Classification::Keep {
            successes,
            band: DifficultyBand::of(successes),
        }
    })
}

/// Per category, up to `cap` samples taken round-robin over the hard,
/// medium and easy bands (then unclassified samples), each band in
/// `sample_id` order.
pub fn select_samples(pool: &[TrainingSample], cap: usize) -> Vec<TrainingSample> {
    let mut by_category: BTreeMap<&str, BTreeMap<Option<DifficultyBand>, Vec<&TrainingSample>>> = BTreeMap::new();
    for s in pool {
        by_category
            .entry(s.category.as_str())
            .or_default()
            .entry(s.band())
            .or_default()
            .push(s);
    }
    let mut out = Vec::new();
    for (_, mut buckets) in by_category {
        // `None` sorts first in Option's ordering; move unclassified last.
        let mut order: Vec<Option<DifficultyBand>> = buckets.keys().copied().filter(Option::is_some).collect();
        if buckets.contains_key(&None) {
            order.push(None);
        }
        for b in buckets.values_mut() {
            b.sort_by(|a, b| a.sample_id.cmp(&b.sample_id));
        }
        let mut taken = 0;
        let mut round = 0;
        while taken < cap {
            let mut progressed = false;
            for key in &order {
                if taken == cap {
                    break;
                }
                if let Some(s) = buckets[key].get(round) {
                    out.push((*s).clone());
                    taken += 1;
                    progressed = true;
                }
            }
            if !progressed {
                break;
            }
            round += 1;
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Feedback samples

#[derive(Debug, Error)]
pub enum FeedbackError {
    #[error("accepted diff does not parse: {0}")]
    DiffParse(String),
    #[error("accepted diff does not apply to the workspace: {0}")]
    DiffNotApplicable(String),
    #[error("accepted diff leaves the original finding in place")]
    GoldenDoesNotResolve,
    #[error("linter failure: {0}")]
    Linter(#[from] LintError),
    #[error(transparent)]
    Context(#[from] ContextError),
    #[error("feedback store: {0}")]
    Io(#[from] std::io::Error),
    #[error("feedback store record {line}: {reason}")]
    Corrupt { line: usize, reason: String },
}

#[derive(Debug, Clone)]
pub struct FeedbackConfig {
    pub linter: LinterConfig,
    pub apply_mode: ApplyMode,
    pub context: ContextConfig,
    /// Reject accepted diffs that do not remove the finding.
    pub require_resolution: bool,
}

impl Default for FeedbackConfig {
    fn default() -> Self {
        Self {
            linter: LinterConfig::toy(),
            apply_mode: ApplyMode::default(),
            context: ContextConfig::default(),
            require_resolution: true,
        }
    }
}

/// Search/replace blocks that turn `old` into `new`, one per changed region,
/// each widened with neighbouring lines until its search text is unique at
/// the point it is applied.
pub fn blocks_between(path: &str, old: &str, new: &str, mode: ApplyMode) -> Vec<SearchReplaceBlock> {
    let diff = TextDiff::from_lines(old, new);
    let new_lines: Vec<&str> = new.lines().collect();
    let mut current: Vec<String> = old.lines().map(str::to_string).collect();
    let mut offset: isize = 0;
    let mut blocks = Vec::new();
    for group in diff.grouped_ops(0) {
        let (Some(first), Some(last)) = (group.first(), group.last()) else { continue };
        let old_range = first.old_range().start..last.old_range().end;
        let new_range = first.new_range().start..last.new_range().end;
        let pos = (old_range.start as isize + offset) as usize;
        let old_len = old_range.len();
        let (mut s, mut e) = (pos, pos + old_len);
        loop {
            let window: Vec<&str> = current[s..e].iter().map(String::as_str).collect();
            let hay: Vec<&str> = current.iter().map(String::as_str).collect();
            if e > s && find_line_windows(&hay, &window, mode).len() == 1 {
                break;
            }
            if e < current.len() {
                e += 1;
            } else if s > 0 {
                s -= 1;
            } else {
                break;
            }
        }
        let replacement: Vec<String> = new_range
            .clone()
            .filter_map(|i| new_lines.get(i).map(|l| l.to_string()))
            .collect();
        let mut search = String::new();
        let mut replace = String::new();
        for l in &current[s..pos] {
            search.push_str(l);
            search.push('\n');
            replace.push_str(l);
            replace.push('\n');
        }
        for l in &current[pos..pos + old_len] {
            search.push_str(l);
            search.push('\n');
        }
        for l in &replacement {
            replace.push_str(l);
            replace.push('\n');
        }
        for l in &current[pos + old_len..e] {
            search.push_str(l);
            search.push('\n');
            replace.push_str(l);
            replace.push('\n');
        }
        current.splice(pos..pos + old_len, replacement.iter().cloned());
        offset += replacement.len() as isize - old_len as isize;
        if !search.is_empty() {
            blocks.push(SearchReplaceBlock {
                file: path.to_string(),
                search,
                replace,
            });
        }
    }
    blocks
}

/// Turns an accepted fix into a feedback sample whose golden patch
/// reproduces the accepted diff on `ws`.
pub fn record_feedback(
    suggestion: &FixPatch,
    issue: &LintIssue,
    ws: &Workspace,
    accepted_diff: &str,
    cfg: &FeedbackConfig,
) -> Result<TrainingSample, FeedbackError> {
    let files = parse_unified_diff(accepted_diff).map_err(|e| FeedbackError::DiffParse(e.to_string()))?;
    let committed = apply_diff_to_workspace(ws, &files).map_err(|e| FeedbackError::DiffNotApplicable(e.to_string()))?;

    let suggested = apply_patch(ws, suggestion, cfg.apply_mode);
    let golden = if suggested.all_applied() && suggested.result == committed {
        suggestion.clone()
    } else {
        let mut blocks = Vec::new();
        for (path, new_text) in committed.files() {
            let old_text = ws.get(path).unwrap_or_default();
            if old_text != new_text {
                blocks.extend(blocks_between(path, old_text, new_text, cfg.apply_mode));
            }
        }
        FixPatch::from_blocks(blocks)
    };

    if cfg.require_resolution && issue_persists(ws, &committed, issue, &cfg.linter)? {
        return Err(FeedbackError::GoldenDoesNotResolve);
    }
    let context = extract_context(ws, issue, &cfg.context)?;
    Ok(TrainingSample {
        sample_id: format!("fb-{}", short_hash(&[&issue.issue_id, accepted_diff])),
        kind: SampleKind::Feedback,
        category: issue.category.clone(),
        issue: issue.clone(),
        context,
        workspace: ws.clone(),
        golden_patch: Some(golden),
        difficulty: None,
    })
}

/// Append-only JSON-lines file of feedback samples.
#[derive(Debug, Clone)]
pub struct FeedbackStore {
    path: PathBuf,
}

impl FeedbackStore {
    pub fn open(path: impl AsRef<Path>) -> Result<Self, FeedbackError> {
        let path = path.as_ref().to_path_buf();
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir)?;
        }
        OpenOptions::new().create(true).append(true).open(&path)?;
        Ok(Self { path })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn append(&self, sample: &TrainingSample) -> Result<(), FeedbackError> {
        let mut line = serde_json::to_string(sample).expect("samples serialize");
        line.push('\n');
        let mut f = OpenOptions::new().append(true).open(&self.path)?;
        f.write_all(line.as_bytes())?;
        Ok(())
    }

    pub fn load(&self) -> Result<Vec<TrainingSample>, FeedbackError> {
        let f = fs::File::open(&self.path)?;
        let mut out = Vec::new();
        for (n, line) in BufReader::new(f).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            out.push(serde_json::from_str(&line).map_err(|e| FeedbackError::Corrupt {
                line: n + 1,
                reason: e.to_string(),
            })?);
        }
        Ok(out)
    }
}
