use std::process::Command;

use super::{parse_lint_report, LintError, LinterConfig};
use crate::issue::LintIssue;
use crate::workspace::Workspace;

pub(super) fn run(ws: &Workspace, cfg: &LinterConfig) -> Result<Vec<LintIssue>, LintError> {
    let dir = tempfile::tempdir()?;
    ws.write_to(dir.path())?;
    let root = dir.path().to_string_lossy().into_owned();
    let argv: Vec<String> = cfg
        .command
        .iter()
        .map(|a| a.replace("{root}", &root))
        .collect();
    let output = Command::new(&argv[0])
        .args(&argv[1..])
        .current_dir(dir.path())
        .output()?;
    let prefix = format!("{root}/");
    let stdout = String::from_utf8_lossy(&output.stdout).replace(&prefix, "");
    let stderr = String::from_utf8_lossy(&output.stderr).trim().to_string();

    // Linters conventionally exit nonzero when they report findings, so a
    // nonzero status only fails when there is no parseable report.
    let parsed = parse_lint_report(&stdout, cfg.report_format);
    let issues = match parsed {
        Ok(issues) if output.status.success() || !issues.is_empty() => issues,
        Ok(_) => {
            return Err(LintError::CommandFailed {
                status: output.status.to_string(),
                stderr,
            })
        }
        Err(e) if output.status.success() => return Err(e.into()),
        Err(_) => {
            return Err(LintError::CommandFailed {
                status: output.status.to_string(),
                stderr,
            })
        }
    };

    Ok(issues
        .into_iter()
        .map(|mut i| {
            if let Some(rel) = i.file.strip_prefix("./") {
                i.file = rel.to_string();
            }
            i
        })
        .filter(|i| ws.contains(&i.file))
        .collect())
}
