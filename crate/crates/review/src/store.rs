//! Append-only review store.
//!
//! A store directory holds four JSON Lines files:
//!
//! * `suggestions.jsonl`: one record per ingested suggestion, never rewritten
//! * `events.jsonl`: reviewer actions in the order they were accepted
//! * `feedback.jsonl`: golden-patch training samples produced by commits
//! * `adoptions.jsonl`: adoption verdicts for commits
//!
//! Current suggestion state is not stored. Opening a store replays
//! `events.jsonl` over the ingested suggestions.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use chrono::{DateTime, Utc};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use lintfix_core::dataset::{record_feedback, FeedbackConfig, FeedbackError, TrainingSample};
use lintfix_core::metrics::{AdoptionRecord, Verdict};
use lintfix_core::orchestrator::{FixStatus, OutcomeRecord};
use lintfix_core::{FixPatch, LintIssue, Workspace};

pub const SUGGESTIONS_FILE: &str = "suggestions.jsonl";
pub const EVENTS_FILE: &str = "events.jsonl";
pub const FEEDBACK_FILE: &str = "feedback.jsonl";
pub const ADOPTIONS_FILE: &str = "adoptions.jsonl";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SuggestionState {
    Pending,
    Staged,
    Copied,
    Rejected,
    Committed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Stage,
    Copy,
    Reject,
    Commit,
}

impl fmt::Display for SuggestionState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).ok();
        f.write_str(s.as_ref().and_then(|v| v.as_str()).unwrap_or("?"))
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).ok();
        f.write_str(s.as_ref().and_then(|v| v.as_str()).unwrap_or("?"))
    }
}

impl SuggestionState {
    /// State after `action`, or `None` when the transition is not allowed.
    pub fn after(self, action: Action) -> Option<Self> {
        use Action::*;
        use SuggestionState::*;
        match (self, action) {
            (Pending, Stage) => Some(Staged),
            (Pending, Copy) => Some(Copied),
            (Pending, Reject) => Some(Rejected),
            (Staged, Commit) => Some(Committed),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Suggestion {
    pub suggestion_id: String,
    pub issue: LintIssue,
    pub context_excerpt: String,
    pub patch: FixPatch,
    pub unified_diff: String,
    pub rationale: String,
    pub state: SuggestionState,
    pub created_at: DateTime<Utc>,
    /// Pre-patch contents of the files the patch touches; commits are
    /// replayed against these.
    pub original_files: BTreeMap<String, String>,
}

/// List-view projection of a suggestion.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuggestionSummary {
    pub suggestion_id: String,
    pub rule_id: String,
    pub file: String,
    pub line: usize,
    pub message: String,
    pub state: SuggestionState,
    pub created_at: DateTime<Utc>,
}

impl From<&Suggestion> for SuggestionSummary {
    fn from(s: &Suggestion) -> Self {
        Self {
            suggestion_id: s.suggestion_id.clone(),
            rule_id: s.issue.rule_id.clone(),
            file: s.issue.file.clone(),
            line: s.issue.span.start_line,
            message: s.issue.message.clone(),
            state: s.state,
            created_at: s.created_at,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeedbackEvent {
    pub suggestion_id: String,
    pub action: Action,
    pub timestamp: DateTime<Utc>,
    pub adopter: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub committed_diff: Option<String>,
}

/// Body of an action request.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionRequest {
    pub action: Action,
    #[serde(default)]
    pub committed_diff: Option<String>,
    #[serde(default)]
    pub adopter: Option<String>,
}

impl ActionRequest {
    pub fn new(action: Action) -> Self {
        Self {
            action,
            committed_diff: None,
            adopter: None,
        }
    }

    pub fn commit(diff: impl Into<String>) -> Self {
        Self {
            action: Action::Commit,
            committed_diff: Some(diff.into()),
            adopter: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActResult {
    pub suggestion: Suggestion,
    pub event: FeedbackEvent,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adoption: Option<AdoptionRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feedback_sample_id: Option<String>,
}

#[derive(Debug, Default, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestSummary {
    pub added: usize,
    /// Already present from an earlier ingest.
    pub duplicates: usize,
    /// Outcomes whose status is not `fixed`.
    pub not_fixed: usize,
    /// Fixed outcomes without a final patch or diff.
    pub missing_patch: usize,
}

#[derive(Debug, Error)]
pub enum ReviewError {
    #[error("unknown suggestion `{0}`")]
    UnknownSuggestion(String),
    #[error("cannot {action} a suggestion in state {from}")]
    IllegalTransition { from: SuggestionState, action: Action },
    #[error("commit requires a committed_diff")]
    MissingCommittedDiff,
    #[error("committed diff rejected: {0}")]
    Feedback(#[from] FeedbackError),
    #[error("{file}:{line}: {reason}")]
    Parse { file: String, line: usize, reason: String },
    #[error("store i/o: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Default)]
struct State {
    suggestions: BTreeMap<String, Suggestion>,
    /// Ids in ingest order.
    order: Vec<String>,
}

pub struct ReviewStore {
    dir: PathBuf,
    feedback: FeedbackConfig,
    state: Mutex<State>,
}

fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, ReviewError> {
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(e.into()),
    };
    let mut out = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let value = serde_json::from_str(&line).map_err(|e| ReviewError::Parse {
            file: path.display().to_string(),
            line: n + 1,
            reason: e.to_string(),
        })?;
        out.push(value);
    }
    Ok(out)
}

fn append_jsonl<T: Serialize>(path: &Path, value: &T) -> Result<(), ReviewError> {
    let mut line = serde_json::to_string(value).expect("store records serialize");
    line.push('\n');
    let mut f = OpenOptions::new().create(true).append(true).open(path)?;
    f.write_all(line.as_bytes())?;
    f.flush()?;
    Ok(())
}

/// Stable id for a fix: hash of the issue id and the patch blocks.
pub fn suggestion_id(issue: &LintIssue, patch: &FixPatch) -> String {
    let mut h = Sha256::new();
    h.update(issue.issue_id.as_bytes());
    for b in &patch.blocks {
        for part in [&b.file, &b.search, &b.replace] {
            h.update([0u8]);
            h.update(part.as_bytes());
        }
    }
    format!("sg-{}", &hex::encode(h.finalize())[..12])
}

impl ReviewStore {
    /// Opens (creating if needed) a store directory and replays its logs.
    pub fn open(dir: impl AsRef<Path>, feedback: FeedbackConfig) -> Result<Self, ReviewError> {
        let dir = dir.as_ref().to_path_buf();
        fs::create_dir_all(&dir)?;
        let mut state = State::default();
        for s in read_jsonl::<Suggestion>(&dir.join(SUGGESTIONS_FILE))? {
            if !state.suggestions.contains_key(&s.suggestion_id) {
                state.order.push(s.suggestion_id.clone());
                state.suggestions.insert(s.suggestion_id.clone(), s);
            }
        }
        for (n, ev) in read_jsonl::<FeedbackEvent>(&dir.join(EVENTS_FILE))?.into_iter().enumerate() {
            let corrupt = |reason: String| ReviewError::Parse {
                file: dir.join(EVENTS_FILE).display().to_string(),
                line: n + 1,
                reason,
            };
            let s = state
                .suggestions
                .get_mut(&ev.suggestion_id)
                .ok_or_else(|| corrupt(format!("event for unknown suggestion {}", ev.suggestion_id)))?;
            s.state = s
                .state
                .after(ev.action)
                .ok_or_else(|| corrupt(format!("illegal {} from {}", ev.action, s.state)))?;
        }
        Ok(Self {
            dir,
            feedback,
            state: Mutex::new(state),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, State> {
        self.state.lock().unwrap_or_else(|p| p.into_inner())
    }

    /// Pending suggestions, newest first.
    pub fn list_pending(&self) -> Vec<SuggestionSummary> {
        self.list(Some(SuggestionState::Pending))
    }

    /// Suggestions in `state` (all when `None`), newest first.
    pub fn list(&self, state: Option<SuggestionState>) -> Vec<SuggestionSummary> {
        let st = self.lock();
        let mut out: Vec<(usize, &Suggestion)> = st
            .order
            .iter()
            .enumerate()
            .map(|(n, id)| (n, &st.suggestions[id]))
            .filter(|(_, s)| state.is_none_or(|want| s.state == want))
            .collect();
        out.sort_by(|a, b| b.1.created_at.cmp(&a.1.created_at).then(b.0.cmp(&a.0)));
        out.into_iter().map(|(_, s)| s.into()).collect()
    }

    pub fn get(&self, id: &str) -> Result<Suggestion, ReviewError> {
        self.lock()
            .suggestions
            .get(id)
            .cloned()
            .ok_or_else(|| ReviewError::UnknownSuggestion(id.to_string()))
    }

    pub fn events(&self) -> Result<Vec<FeedbackEvent>, ReviewError> {
        read_jsonl(&self.dir.join(EVENTS_FILE))
    }

    pub fn feedback_samples(&self) -> Result<Vec<TrainingSample>, ReviewError> {
        read_jsonl(&self.dir.join(FEEDBACK_FILE))
    }

    pub fn adoptions(&self) -> Result<Vec<AdoptionRecord>, ReviewError> {
        read_jsonl(&self.dir.join(ADOPTIONS_FILE))
    }

    /// Adds one suggestion. Returns false if the id is already present.
    pub fn insert(&self, suggestion: Suggestion) -> Result<bool, ReviewError> {
        let mut st = self.lock();
        if st.suggestions.contains_key(&suggestion.suggestion_id) {
            return Ok(false);
        }
        let mut s = suggestion;
        s.state = SuggestionState::Pending;
        append_jsonl(&self.dir.join(SUGGESTIONS_FILE), &s)?;
        st.order.push(s.suggestion_id.clone());
        st.suggestions.insert(s.suggestion_id.clone(), s);
        Ok(true)
    }

    /// Adds a suggestion for every fixed outcome in a JSON Lines file of
    /// outcome records.
    pub fn ingest_outcomes(&self, path: &Path) -> Result<IngestSummary, ReviewError> {
        let records: Vec<OutcomeRecord> = read_jsonl(path)?;
        self.ingest_records(records, Utc::now())
    }

    pub fn ingest_records(
        &self,
        records: impl IntoIterator<Item = OutcomeRecord>,
        now: DateTime<Utc>,
    ) -> Result<IngestSummary, ReviewError> {
        let mut summary = IngestSummary::default();
        for rec in records {
            if rec.outcome.status != FixStatus::Fixed {
                summary.not_fixed += 1;
                continue;
            }
            let (Some(patch), Some(diff)) = (rec.outcome.final_patch, rec.outcome.unified_diff) else {
                log::warn!("{}: fixed outcome without a final patch; skipped", rec.issue.issue_id);
                summary.missing_patch += 1;
                continue;
            };
            let suggestion = Suggestion {
                suggestion_id: suggestion_id(&rec.issue, &patch),
                issue: rec.issue,
                context_excerpt: rec.context_excerpt,
                patch,
                unified_diff: diff,
                rationale: rec.rationale,
                state: SuggestionState::Pending,
                created_at: now,
                original_files: rec.original_files,
            };
            if self.insert(suggestion)? {
                summary.added += 1;
            } else {
                summary.duplicates += 1;
            }
        }
        Ok(summary)
    }

    pub fn act(&self, id: &str, req: ActionRequest) -> Result<ActResult, ReviewError> {
        self.act_at(id, req, Utc::now())
    }

    /// Applies one reviewer action. A commit also records a feedback sample
    /// and an adoption verdict; if the committed diff cannot produce a
    /// feedback sample nothing is written.
    pub fn act_at(&self, id: &str, req: ActionRequest, now: DateTime<Utc>) -> Result<ActResult, ReviewError> {
        // Holding the lock for the whole action serializes writers.
        let mut st = self.lock();
        let current = st
            .suggestions
            .get(id)
            .ok_or_else(|| ReviewError::UnknownSuggestion(id.to_string()))?;
        let next = current.state.after(req.action).ok_or(ReviewError::IllegalTransition {
            from: current.state,
            action: req.action,
        })?;
        let adopter = req.adopter.clone().unwrap_or_else(|| "anonymous".to_string());
        let committed_diff = match req.action {
            Action::Commit => Some(req.committed_diff.clone().ok_or(ReviewError::MissingCommittedDiff)?),
            _ => None,
        };

        let mut adoption = None;
        let mut feedback_sample_id = None;
        if let Some(diff) = &committed_diff {
            let ws = Workspace::from_files("review", current.original_files.clone())
                .map_err(|e| FeedbackError::DiffNotApplicable(e.to_string()))?;
            let sample = record_feedback(&current.patch, &current.issue, &ws, diff, &self.feedback)?;
            let record = AdoptionRecord::evaluate(id, current.unified_diff.clone(), diff.clone(), adopter.clone(), now)
                .map_err(|e| FeedbackError::DiffParse(e.to_string()))?;
            if record.verdict == Verdict::NotAdopted {
                log::info!("{id}: committed diff does not contain the suggestion");
            }
            append_jsonl(&self.dir.join(FEEDBACK_FILE), &sample)?;
            append_jsonl(&self.dir.join(ADOPTIONS_FILE), &record)?;
            feedback_sample_id = Some(sample.sample_id);
            adoption = Some(record);
        }

        let event = FeedbackEvent {
            suggestion_id: id.to_string(),
            action: req.action,
            timestamp: now,
            adopter,
            committed_diff,
        };
        append_jsonl(&self.dir.join(EVENTS_FILE), &event)?;
        let s = st.suggestions.get_mut(id).expect("checked above");
        s.state = next;
        Ok(ActResult {
            suggestion: s.clone(),
            event,
            adoption,
            feedback_sample_id,
        })
    }
}
