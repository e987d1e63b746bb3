//! Compares generated unified diffs with the system `diff -u`. Skipped when
//! `diff` is not installed.

use std::path::Path;
use std::process::Command;

use lintfix_core::orchestrator::oracle::synthesize_fix;
use lintfix_core::patch::{apply_patch, ApplyMode};
use lintfix_core::udiff::{apply_file_diff, changed_lines, diff_texts, parse_unified_diff};
use lintfix_core::Workspace;

fn gnu_diff(old: &str, new: &str) -> Option<String> {
    let dir = tempfile::tempdir().ok()?;
    let a = dir.path().join("old");
    let b = dir.path().join("new");
    std::fs::write(&a, old).ok()?;
    std::fs::write(&b, new).ok()?;
    let out = Command::new("diff")
        .args(["-u", "--label", "a/f.go", "--label", "b/f.go"])
        .arg(&a)
        .arg(&b)
        .output()
        .ok()?;
    // Exit status 1 means "files differ".
    (out.status.code() == Some(1)).then(|| String::from_utf8_lossy(&out.stdout).into_owned())
}

fn corpus() -> Workspace {
    Workspace::load_dir(&Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/corpus")).unwrap()
}

fn pairs() -> Vec<(String, String)> {
    let ws = corpus();
    let issues = lintfix_core::lint::run_linter(&ws, &lintfix_core::lint::LinterConfig::toy()).unwrap();
    let mut out = Vec::new();
    for issue in &issues {
        let patch = synthesize_fix(&ws, issue).unwrap();
        let after = apply_patch(&ws, &patch, ApplyMode::default()).result;
        out.push((ws.get(&issue.file).unwrap().to_string(), after.get(&issue.file).unwrap().to_string()));
    }
    // Edits at the file edges and without a trailing newline.
    let text = ws.get("sched/scheduler.go").unwrap().to_string();
    out.push((text.clone(), format!("// header\n{text}")));
    out.push((text.clone(), format!("{text}// footer\n")));
    out.push((text.clone(), text.trim_end().to_string()));
    out.push((text.clone(), text.replacen("package sched\n", "", 1)));
    out.push(("a\nb\nc\n".into(), "a\nc\n".into()));
    out.push(("".into(), "x\ny\n".into()));
    out
}

#[test]
fn hunks_and_changed_lines_match_gnu_diff() {
    if Command::new("diff").arg("--version").output().is_err() {
        eprintln!("diff not installed; skipping");
        return;
    }
    for (old, new) in pairs() {
        let Some(theirs) = gnu_diff(&old, &new) else {
            panic!("diff failed");
        };
        let ours = diff_texts("f.go", &old, &new);
        let ours_p = parse_unified_diff(&ours).unwrap();
        let theirs_p = parse_unified_diff(&theirs).unwrap();
        assert_eq!(changed_lines(&ours_p), changed_lines(&theirs_p), "ours:\n{ours}\ntheirs:\n{theirs}");
        let headers = |fs: &[lintfix_core::udiff::FileDiff]| {
            fs[0].hunks.iter().map(|h| (h.old_start, h.old_len, h.new_start, h.new_len)).collect::<Vec<_>>()
        };
        assert_eq!(headers(&ours_p), headers(&theirs_p), "ours:\n{ours}\ntheirs:\n{theirs}");
        assert_eq!(apply_file_diff(&old, &theirs_p[0]).unwrap(), new);
        assert_eq!(apply_file_diff(&old, &ours_p[0]).unwrap(), new);
    }
}
