//! Automated lint-error remediation.
//!
//! The online loop scans a workspace, extracts a minimal context around each
//! finding, asks a generation backend for a search/replace patch, applies it
//! and re-scans to confirm the original finding is gone. The same machinery
//! builds verifiable training samples, scores candidate generations with a
//! rule-based reward and computes fix-quality and adoption metrics.

pub mod context;
pub mod dataset;
pub mod issue;
pub mod lint;
pub mod metrics;
pub mod orchestrator;
pub mod patch;
pub mod reward;
pub mod syntax;
pub mod udiff;
pub mod workspace;

pub use context::{CodeContext, SymbolDef, SymbolKind};
pub use issue::{LintIssue, Severity, Span};
pub use lint::{LinterConfig, LinterKind};
pub use patch::{ApplyMode, ApplyReport, BlockStatus, FixPatch, SearchReplaceBlock};
pub use workspace::Workspace;
