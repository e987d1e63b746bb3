//! Generate, validate and retry loop for single findings.

pub mod backend;
pub mod oracle;
pub mod prompt;

use std::collections::{BTreeMap, BTreeSet};
use std::process::Command;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::context::{extract_context, CodeContext, ContextConfig, ContextError};
use crate::issue::{fingerprint_parts, issue_fingerprint, LintIssue};
use crate::lint::{run_linter, LintError, LinterConfig};
use crate::patch::{apply_patch, parse_patch, ApplyMode, FixPatch};
use crate::syntax::GrammarRegistry;
use crate::udiff;
use crate::workspace::{Workspace, WorkspaceError};

pub use backend::{BackendError, BackendSpec, GenerationBackend, GenerationRequest};
pub use prompt::build_prompt;

pub const DEFAULT_MAX_RETRIES: usize = 3;

/// Compilability check run on a patched workspace.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CompileCheck {
    /// Every file with a registered grammar parses without error nodes.
    #[default]
    SyntaxParse,
    /// Command run inside a materialized copy of the workspace; exit 0 passes.
    Command { argv: Vec<String> },
}

#[derive(Debug, Error)]
pub enum CompileError {
    #[error("compile command is empty")]
    EmptyCommand,
    #[error("cannot run compile command: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Workspace(#[from] WorkspaceError),
}

impl CompileCheck {
    pub fn run(&self, ws: &Workspace) -> Result<bool, CompileError> {
        match self {
            Self::SyntaxParse => {
                let grammars = GrammarRegistry::default();
                Ok(ws.files().iter().all(|(path, text)| {
                    grammars.for_path(path).is_none_or(|g| g.check(text))
                }))
            }
            Self::Command { argv } => {
                let (prog, args) = argv.split_first().ok_or(CompileError::EmptyCommand)?;
                let dir = tempfile::tempdir()?;
                ws.write_to(dir.path())?;
                let status = Command::new(prog)
                    .args(args)
                    .current_dir(dir.path())
                    .stdout(std::process::Stdio::null())
                    .stderr(std::process::Stdio::null())
                    .status()?;
                Ok(status.success())
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct FixConfig {
    pub linter: LinterConfig,
    /// `None` skips the compile step.
    pub compile: Option<CompileCheck>,
    pub apply_mode: ApplyMode,
    /// Also fail validation when the patch introduces findings that were
    /// not present before.
    pub deny_new_issues: bool,
    pub max_retries: usize,
    pub context: ContextConfig,
}

impl Default for FixConfig {
    fn default() -> Self {
        Self {
            linter: LinterConfig::toy(),
            compile: Some(CompileCheck::SyntaxParse),
            apply_mode: ApplyMode::default(),
            deny_new_issues: false,
            max_retries: DEFAULT_MAX_RETRIES,
            context: ContextConfig::default(),
        }
    }
}

impl FixConfig {
    pub fn max_attempts(&self) -> usize {
        1 + self.max_retries
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub applied: bool,
    pub compiled: Option<bool>,
    pub issue_resolved: bool,
    pub residual_issues: Vec<LintIssue>,
    pub attempt_index: usize,
    /// Residual findings whose fingerprint was absent before the patch.
    #[serde(default)]
    pub new_issue_count: usize,
}

impl ValidationReport {
    fn not_applied(attempt_index: usize) -> Self {
        Self {
            applied: false,
            compiled: None,
            issue_resolved: false,
            residual_issues: Vec::new(),
            attempt_index,
            new_issue_count: 0,
        }
    }
}

#[derive(Debug, Error)]
pub enum FixError {
    #[error("linter failure: {0}")]
    Linter(#[from] LintError),
    #[error("compile check failure: {0}")]
    Compile(#[from] CompileError),
    #[error(transparent)]
    Workspace(#[from] WorkspaceError),
    #[error(transparent)]
    Context(#[from] ContextError),
}

fn fingerprints(ws: &Workspace, issues: &[LintIssue]) -> BTreeSet<String> {
    issues
        .iter()
        .map(|i| issue_fingerprint(i, ws).unwrap_or_else(|_| fingerprint_parts(&i.rule_id, &i.file, "")))
        .collect()
}

/// Applies `patch`, optionally compile-checks, and re-scans. The issue is
/// resolved when no post-patch finding shares its fingerprint.
pub fn validate_fix(
    ws: &Workspace,
    issue: &LintIssue,
    patch: &FixPatch,
    cfg: &FixConfig,
    attempt_index: usize,
) -> Result<ValidationReport, FixError> {
    let report = apply_patch(ws, patch, cfg.apply_mode);
    let applied = !patch.blocks.is_empty() && patch.malformed_count == 0 && report.all_applied();
    if !applied {
        return Ok(ValidationReport::not_applied(attempt_index));
    }
    let patched = report.result;
    let compiled = match &cfg.compile {
        Some(check) => Some(check.run(&patched)?),
        None => None,
    };
    let residual = run_linter(&patched, &cfg.linter)?;
    let original = issue_fingerprint(issue, ws)?;
    let after = fingerprints(&patched, &residual);
    let new_issue_count = if cfg.deny_new_issues {
        let before = fingerprints(ws, &run_linter(ws, &cfg.linter)?);
        after.iter().filter(|f| !before.contains(*f)).count()
    } else {
        0
    };
    let issue_resolved = compiled != Some(false)
        && !after.contains(&original)
        && (!cfg.deny_new_issues || new_issue_count == 0);
    Ok(ValidationReport {
        applied,
        compiled,
        issue_resolved,
        residual_issues: residual,
        attempt_index,
        new_issue_count,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FixStatus {
    Fixed,
    Exhausted,
    BackendError,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Attempt {
    pub raw: String,
    pub report: ValidationReport,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixOutcome {
    pub issue_id: String,
    pub status: FixStatus,
    pub final_patch: Option<FixPatch>,
    /// Diff of the final patch against the input workspace.
    pub unified_diff: Option<String>,
    pub attempts: Vec<Attempt>,
    /// Includes transport-level repeats.
    pub backend_calls: usize,
    pub error: Option<String>,
}

impl FixOutcome {
    pub fn is_fixed(&self) -> bool {
        self.status == FixStatus::Fixed
    }
}

/// Everything the pipeline knows about one attempt loop, including the
/// context it was given.
pub struct FixRun {
    pub outcome: FixOutcome,
    pub context: CodeContext,
    pub prompt: String,
}

/// Generates with up to `1 + max_retries` backend calls, reusing the same
/// prompt, and stops at the first validated patch.
pub fn fix_issue(
    ws: &Workspace,
    issue: &LintIssue,
    backend: &dyn GenerationBackend,
    cfg: &FixConfig,
) -> Result<FixRun, FixError> {
    let context = extract_context(ws, issue, &cfg.context)?;
    let prompt = build_prompt(&context, issue);
    let mut outcome = FixOutcome {
        issue_id: issue.issue_id.clone(),
        status: FixStatus::Exhausted,
        final_patch: None,
        unified_diff: None,
        attempts: Vec::new(),
        backend_calls: 0,
        error: None,
    };

    for attempt in 1..=cfg.max_attempts() {
        let request = GenerationRequest {
            prompt: &prompt,
            issue,
            context: &context,
            workspace: ws,
            attempt,
        };
        let mut result = backend.generate(&request);
        outcome.backend_calls += 1;
        if let Err(BackendError::Transport(e)) = &result {
            log::warn!("{}: transport error on attempt {attempt}, retrying once: {e}", issue.issue_id);
            result = backend.generate(&request);
            outcome.backend_calls += 1;
        }
        let raw = match result {
            Ok(raw) => raw,
            Err(err) => {
                outcome.attempts.push(Attempt {
                    raw: String::new(),
                    report: ValidationReport::not_applied(attempt),
                });
                outcome.status = FixStatus::BackendError;
                outcome.error = Some(err.to_string());
                break;
            }
        };
        let patch = parse_patch(&raw);
        let report = validate_fix(ws, issue, &patch, cfg, attempt)?;
        let resolved = report.issue_resolved;
        log::debug!(
            "{}: attempt {attempt} applied={} compiled={:?} resolved={resolved}",
            issue.issue_id,
            report.applied,
            report.compiled
        );
        outcome.attempts.push(Attempt { raw, report });
        if resolved {
            let applied = apply_patch(ws, &patch, cfg.apply_mode);
            outcome.unified_diff = Some(udiff::diff_workspaces(ws, &applied.result));
            outcome.final_patch = Some(patch);
            outcome.status = FixStatus::Fixed;
            break;
        }
    }
    Ok(FixRun {
        outcome,
        context,
        prompt,
    })
}

/// Line written to `outcomes.jsonl`: the outcome plus what a reviewer needs
/// to judge and later replay it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutcomeRecord {
    pub issue: LintIssue,
    pub outcome: FixOutcome,
    pub context_excerpt: String,
    /// Generation text outside the search/replace blocks.
    pub rationale: String,
    /// Pre-patch contents of every file the final patch touches.
    pub original_files: BTreeMap<String, String>,
}

impl OutcomeRecord {
    pub fn from_run(ws: &Workspace, issue: &LintIssue, run: &FixRun) -> Self {
        let mut original_files = BTreeMap::new();
        let mut rationale = String::new();
        if let Some(patch) = &run.outcome.final_patch {
            for block in &patch.blocks {
                if let Some(text) = ws.get(&block.file) {
                    original_files.insert(block.file.clone(), text.to_string());
                }
            }
            rationale = patch.prose();
        }
        Self {
            issue: issue.clone(),
            outcome: run.outcome.clone(),
            context_excerpt: run.context.focal_text.clone(),
            rationale,
            original_files,
        }
    }
}

/// Runs `fix_issue` for every issue on `threads` workers. Results come back
/// in input order.
pub fn fix_all(
    ws: &Workspace,
    issues: &[LintIssue],
    backend: &dyn GenerationBackend,
    cfg: &FixConfig,
    threads: usize,
) -> Vec<Result<OutcomeRecord, FixError>> {
    let threads = threads.max(1).min(issues.len().max(1));
    let chunk = issues.len().div_ceil(threads).max(1);
    std::thread::scope(|scope| {
        let handles: Vec<_> = issues
            .chunks(chunk)
            .map(|part| {
                scope.spawn(move || {
                    part.iter()
                        .map(|issue| {
                            fix_issue(ws, issue, backend, cfg)
                                .map(|run| OutcomeRecord::from_run(ws, issue, &run))
                        })
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("fix worker panicked"))
            .collect()
    })
}
