use std::fmt::Write as _;

use crate::context::CodeContext;
use crate::issue::LintIssue;
use crate::patch::{DIVIDER, HEADER_PREFIX, REPLACE_FENCE, SEARCH_FENCE};

/// Deterministic prompt: finding, focal code, referenced definitions, then
/// output-format instructions.
pub fn build_prompt(ctx: &CodeContext, issue: &LintIssue) -> String {
    let mut p = String::new();
    let _ = writeln!(p, "Fix the following lint finding with a minimal edit.");
    let _ = writeln!(p);
    let _ = writeln!(p, "Rule: {}", issue.rule_id);
    let _ = writeln!(p, "Message: {}", issue.message);
    let _ = writeln!(p, "Severity: {}", issue.severity);
    let _ = writeln!(
        p,
        "Location: {} line {}, column {}",
        issue.file, issue.span.start_line, issue.span.start_col
    );
    let _ = writeln!(p);
    let _ = writeln!(
        p,
        "File: {} (lines {}-{})",
        ctx.focal_file, ctx.focal_span.start, ctx.focal_span.end
    );
    let _ = writeln!(p, "```");
    p.push_str(&ctx.focal_text);
    if !ctx.focal_text.ends_with('\n') {
        p.push('\n');
    }
    let _ = writeln!(p, "```");

    if !ctx.dependencies.is_empty() {
        let _ = writeln!(p);
        let _ = writeln!(p, "Referenced definitions:");
        for dep in &ctx.dependencies {
            let kind = serde_json::to_value(dep.kind)
                .ok()
                .and_then(|v| v.as_str().map(str::to_string))
                .unwrap_or_default();
            let _ = writeln!(p, "// {}:{} ({} {})", dep.file, dep.start_line, kind, dep.name);
            p.push_str(&dep.def_text);
            if !dep.def_text.ends_with('\n') {
                p.push('\n');
            }
        }
    }

    let _ = writeln!(p);
    let _ = writeln!(
        p,
        "Answer with one search/replace block per edit, using exactly these marker lines:"
    );
    let _ = writeln!(p, "{HEADER_PREFIX}<repo-relative path>");
    let _ = writeln!(p, "{SEARCH_FENCE}");
    let _ = writeln!(p, "<existing lines, copied exactly>");
    let _ = writeln!(p, "{DIVIDER}");
    let _ = writeln!(p, "<replacement lines>");
    let _ = writeln!(p, "{REPLACE_FENCE}");
    let _ = writeln!(
        p,
        "The SEARCH lines must occur exactly once in the file. Change only what the finding requires."
    );
    p
}
