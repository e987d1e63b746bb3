#![allow(dead_code)]

use std::path::{Path, PathBuf};

use lintfix_core::lint::{run_linter, LinterConfig};
use lintfix_core::orchestrator::backend::{OracleBackend, Script, ScriptStep, ScriptedBackend};
use lintfix_core::orchestrator::{fix_all, FixConfig, OutcomeRecord};
use lintfix_core::{LintIssue, Workspace};

pub fn core_fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures")
}

pub fn corpus() -> Workspace {
    Workspace::load_dir(&core_fixtures().join("corpus")).unwrap()
}

pub fn issues(ws: &Workspace) -> Vec<LintIssue> {
    run_linter(ws, &LinterConfig::toy()).unwrap()
}

/// Outcome records for the first `fixed` issues (oracle) followed by
/// `exhausted` issues (always garbage).
pub fn outcomes(fixed: usize, exhausted: usize) -> Vec<OutcomeRecord> {
    let ws = corpus();
    let all = issues(&ws);
    let cfg = FixConfig { max_retries: 0, ..FixConfig::default() };
    let mut out: Vec<OutcomeRecord> = fix_all(&ws, &all[..fixed], &OracleBackend::default(), &cfg, 2)
        .into_iter()
        .map(Result::unwrap)
        .collect();
    let garbage = ScriptedBackend::new(Script::uniform(vec![ScriptStep::Garbage]));
    out.extend(
        fix_all(&ws, &all[fixed..fixed + exhausted], &garbage, &cfg, 1)
            .into_iter()
            .map(Result::unwrap),
    );
    out
}

pub fn write_outcomes(path: &Path, records: &[OutcomeRecord]) {
    let text: String = records.iter().map(|r| serde_json::to_string(r).unwrap() + "\n").collect();
    std::fs::write(path, text).unwrap();
}
