//! Rule-based reward for scoring candidate generations against verifiable
//! samples. All component functions are pure; `score_rollout` composes
//! them with patch application, the compile check and the linter.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{issue_persists, SampleKind, TrainingSample};
use crate::lint::{LintError, LinterConfig};
use crate::orchestrator::{CompileCheck, CompileError};
use crate::patch::{apply_patch, parse_patch, ApplyMode, ApplyReport, FixPatch};
use crate::udiff::{self, changed_lines, ChangedLines};

pub const FORMAT_PENALTY: f64 = 0.1;
pub const COMPILE_REWARD: f64 = 0.3;
pub const CORRECTNESS_REWARD: f64 = 0.7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub r_f: f64,
    pub r_p: f64,
    pub r_c: f64,
    pub total: f64,
    pub i_malformed: usize,
    pub j_unapplied: usize,
    pub k_redundant: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CorrectnessEvidence {
    ColdStartFailToPass { passed: bool },
    FeedbackSimilarity { f_beta: f64 },
}

#[derive(Debug, Error)]
pub enum RewardError {
    #[error("golden diff has no changed lines")]
    EmptyGolden,
    #[error("reproduction harness failed: {0}")]
    HarnessFailure(String),
    #[error("feedback sample has no golden patch")]
    MissingGolden,
}

impl From<LintError> for RewardError {
    fn from(e: LintError) -> Self {
        Self::HarnessFailure(e.to_string())
    }
}

impl From<CompileError> for RewardError {
    fn from(e: CompileError) -> Self {
        Self::HarnessFailure(e.to_string())
    }
}

/// Penalty counts `(i, j, k)`: malformed blocks, well-formed blocks that did
/// not apply, and well-formed blocks beyond `expected_errors`.
pub fn format_counts(patch: &FixPatch, report: &ApplyReport, expected_errors: usize) -> (usize, usize, usize) {
    let i = patch.malformed_count;
    let j = report.unapplied_count;
    let k = patch.blocks.len().saturating_sub(expected_errors);
    (i, j, k)
}

pub fn format_reward_from_counts(i: usize, j: usize, k: usize) -> f64 {
    -FORMAT_PENALTY * (i + j + k) as f64
}

pub fn format_reward(patch: &FixPatch, report: &ApplyReport, expected_errors: usize) -> f64 {
    let (i, j, k) = format_counts(patch, report, expected_errors);
    format_reward_from_counts(i, j, k)
}

pub fn compile_reward(compiled: bool) -> f64 {
    if compiled {
        COMPILE_REWARD
    } else {
        0.0
    }
}

fn multiset_size(lines: &ChangedLines) -> usize {
    lines.values().flat_map(|m| m.values()).sum()
}

fn multiset_overlap(a: &ChangedLines, b: &ChangedLines) -> usize {
    a.iter()
        .filter_map(|(file, la)| b.get(file).map(|lb| (la, lb)))
        .map(|(la, lb)| {
            la.iter()
                .map(|(line, n)| (*n).min(lb.get(line).copied().unwrap_or(0)))
                .sum::<usize>()
        })
        .sum()
}

/// F-score of generated against golden changed lines; lines are matched per
/// file with multiplicity.
pub fn f_beta_score(generated: &ChangedLines, golden: &ChangedLines, beta: f64) -> Result<f64, RewardError> {
    let t = multiset_size(golden);
    if t == 0 {
        return Err(RewardError::EmptyGolden);
    }
    let g = multiset_size(generated);
    let hit = multiset_overlap(generated, golden);
    if hit == 0 || g == 0 {
        return Ok(0.0);
    }
    let p = hit as f64 / g as f64;
    let r = hit as f64 / t as f64;
    let b2 = beta * beta;
    Ok((1.0 + b2) * p * r / (b2 * p + r))
}

pub fn correctness_reward(evidence: CorrectnessEvidence) -> f64 {
    match evidence {
        CorrectnessEvidence::ColdStartFailToPass { passed } => {
            if passed {
                CORRECTNESS_REWARD
            } else {
                0.0
            }
        }
        CorrectnessEvidence::FeedbackSimilarity { f_beta } => CORRECTNESS_REWARD * f_beta.clamp(0.0, 1.0),
    }
}

/// `clamp(r_f + r_p + [r_p > 0] * r_c, 0, 1)`.
pub fn total_reward(r_f: f64, r_p: f64, r_c: f64) -> f64 {
    let gated = if r_p > 0.0 { r_c } else { 0.0 };
    (r_f + r_p + gated).clamp(0.0, 1.0)
}

pub fn breakdown(i: usize, j: usize, k: usize, compiled: bool, evidence: CorrectnessEvidence) -> RewardBreakdown {
    let r_f = format_reward_from_counts(i, j, k);
    let r_p = compile_reward(compiled);
    let r_c = correctness_reward(evidence);
    RewardBreakdown {
        r_f,
        r_p,
        r_c,
        total: total_reward(r_f, r_p, r_c),
        i_malformed: i,
        j_unapplied: j,
        k_redundant: k,
    }
}

#[derive(Debug, Clone)]
pub struct RewardConfig {
    pub linter: LinterConfig,
    pub compile: CompileCheck,
    pub apply_mode: ApplyMode,
    pub beta: f64,
    /// Errors a sample is expected to fix; each sample carries one issue.
    pub expected_errors: usize,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            linter: LinterConfig::toy(),
            compile: CompileCheck::SyntaxParse,
            apply_mode: ApplyMode::default(),
            beta: 1.0,
            expected_errors: 1,
        }
    }
}

/// Changed lines between `sample.workspace` and the result of applying `patch`.
pub fn patch_changed_lines(sample: &TrainingSample, patch: &FixPatch, mode: ApplyMode) -> ChangedLines {
    let applied = apply_patch(&sample.workspace, patch, mode);
    let diff = udiff::diff_workspaces(&sample.workspace, &applied.result);
    changed_lines(&udiff::parse_unified_diff(&diff).expect("generated diffs parse"))
}

/// Scores one candidate generation for a sample.
pub fn score_rollout(sample: &TrainingSample, candidate: &str, cfg: &RewardConfig) -> Result<RewardBreakdown, RewardError> {
    let patch = parse_patch(candidate);
    let report = apply_patch(&sample.workspace, &patch, cfg.apply_mode);
    let (i, j, k) = format_counts(&patch, &report, cfg.expected_errors);
    let compiled = report.applied_count() > 0 && cfg.compile.run(&report.result)?;

    let evidence = match sample.kind {
        SampleKind::ColdStart => {
            if !issue_persists(&sample.workspace, &sample.workspace, &sample.issue, &cfg.linter)? {
                return Err(RewardError::HarnessFailure(format!(
                    "issue {} does not reproduce on the sample workspace",
                    sample.issue.issue_id
                )));
            }
            let passed = !issue_persists(&sample.workspace, &report.result, &sample.issue, &cfg.linter)?;
            CorrectnessEvidence::ColdStartFailToPass { passed }
        }
        SampleKind::Feedback => {
            let golden = sample.golden_patch.as_ref().ok_or(RewardError::MissingGolden)?;
            let golden_lines = patch_changed_lines(sample, golden, cfg.apply_mode);
            let diff = udiff::diff_workspaces(&sample.workspace, &report.result);
            let generated = changed_lines(&udiff::parse_unified_diff(&diff).expect("generated diffs parse"));
            CorrectnessEvidence::FeedbackSimilarity {
                f_beta: f_beta_score(&generated, &golden_lines, cfg.beta)?,
            }
        }
    };
    Ok(breakdown(i, j, k, compiled, evidence))
}
