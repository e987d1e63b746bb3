//! Deterministic Go rules used by fixtures and end-to-end tests.
//!
//! | rule | finding |
//! |------|---------|
//! | `missing-recover-in-goroutine` | `go f(...)`, or a goroutine / `x.Go(func...)` literal without `recover()` |
//! | `unchecked-type-assertion` | `x.(T)` not in the two-value `v, ok :=` form |
//! | `integer-overflow-conversion` | `strconv.Atoi` result later converted to `int16`/`int32` in the same function |
//! | `unused-import` | imported package never referenced |

use std::collections::HashSet;

use tree_sitter::Node;

use super::LinterConfig;
use crate::issue::{LintIssue, Severity, Span};
use crate::syntax::go::{self, node_text, walk_named};
use crate::workspace::Workspace;

pub const MISSING_RECOVER: &str = "missing-recover-in-goroutine";
pub const UNCHECKED_ASSERTION: &str = "unchecked-type-assertion";
pub const INT_OVERFLOW: &str = "integer-overflow-conversion";
pub const UNUSED_IMPORT: &str = "unused-import";

pub const RULES: [&str; 4] = [MISSING_RECOVER, UNCHECKED_ASSERTION, INT_OVERFLOW, UNUSED_IMPORT];

pub(super) fn scan(ws: &Workspace, cfg: &LinterConfig) -> Vec<LintIssue> {
    ws.files()
        .iter()
        .filter(|(path, _)| path.ends_with(".go"))
        .flat_map(|(path, src)| scan_file(path, src, cfg))
        .collect()
}

/// Runs every enabled rule over one Go source file.
pub fn scan_file(path: &str, source: &str, cfg: &LinterConfig) -> Vec<LintIssue> {
    let tree = go::parse(source);
    let root = tree.root_node();
    let mut out = Vec::new();
    if cfg.rule_enabled(MISSING_RECOVER) {
        missing_recover(root, source, path, &mut out);
    }
    if cfg.rule_enabled(UNCHECKED_ASSERTION) {
        unchecked_assertion(root, source, path, &mut out);
    }
    if cfg.rule_enabled(INT_OVERFLOW) {
        int_overflow(root, source, path, &mut out);
    }
    if cfg.rule_enabled(UNUSED_IMPORT) {
        unused_import(root, source, path, &mut out);
    }
    out
}

fn span_of(node: Node<'_>) -> Span {
    let s = node.start_position();
    let e = node.end_position();
    let end_col = e.column.max(1);
    let span = Span {
        start_line: s.row + 1,
        start_col: s.column + 1,
        end_line: e.row + 1,
        end_col,
    };
    if span.is_valid() {
        span
    } else {
        Span::point(s.row + 1, s.column + 1)
    }
}

fn finding(rule: &str, path: &str, node: Node<'_>, message: String, severity: Severity) -> LintIssue {
    LintIssue::new(rule, path, span_of(node), message, severity)
}

fn func_literal_arg(call: Node<'_>) -> Option<Node<'_>> {
    let args = call.child_by_field_name("arguments")?;
    let mut cursor = args.walk();
    let found = args
        .named_children(&mut cursor)
        .find(|n| n.kind() == "func_literal");
    found
}

fn missing_recover(root: Node<'_>, src: &str, path: &str, out: &mut Vec<LintIssue>) {
    walk_named(root, |n| match n.kind() {
        "go_statement" => {
            let mut cursor = n.walk();
            let Some(call) = n.named_children(&mut cursor).find(|c| c.kind() == "call_expression")
            else {
                return;
            };
            let guarded = call
                .child_by_field_name("function")
                .filter(|f| f.kind() == "func_literal")
                .map(|f| node_text(f, src).contains("recover()"))
                .unwrap_or(false);
            if !guarded {
                out.push(finding(
                    MISSING_RECOVER,
                    path,
                    n,
                    "goroutine started without a deferred recover; a panic will crash the process".into(),
                    Severity::Error,
                ));
            }
        }
        "call_expression" => {
            let is_group_go = n
                .child_by_field_name("function")
                .filter(|f| f.kind() == "selector_expression")
                .and_then(|f| f.child_by_field_name("field"))
                .map(|field| node_text(field, src) == "Go")
                .unwrap_or(false);
            if !is_group_go {
                return;
            }
            if let Some(lit) = func_literal_arg(n) {
                if !node_text(lit, src).contains("recover()") {
                    out.push(finding(
                        MISSING_RECOVER,
                        path,
                        n,
                        "goroutine function passed to Go() has no deferred recover".into(),
                        Severity::Error,
                    ));
                }
            }
        }
        _ => {}
    });
}

/// `true` when the assertion is the sole right-hand side of a two-value
/// assignment, i.e. the comma-ok form.
fn is_comma_ok(assertion: Node<'_>) -> bool {
    let Some(list) = assertion.parent().filter(|p| p.kind() == "expression_list") else {
        return false;
    };
    if list.named_child_count() != 1 {
        return false;
    }
    let Some(stmt) = list.parent() else {
        return false;
    };
    match stmt.kind() {
        "short_var_declaration" | "assignment_statement" => stmt
            .child_by_field_name("left")
            .map(|l| l.named_child_count() == 2)
            .unwrap_or(false),
        "var_spec" => {
            let mut cursor = stmt.walk();
            stmt.children_by_field_name("name", &mut cursor).count() == 2
        }
        _ => false,
    }
}

fn unchecked_assertion(root: Node<'_>, src: &str, path: &str, out: &mut Vec<LintIssue>) {
    walk_named(root, |n| {
        if n.kind() != "type_assertion_expression" || is_comma_ok(n) {
            return;
        }
        let ty = n
            .child_by_field_name("type")
            .map(|t| node_text(t, src))
            .unwrap_or("?");
        out.push(finding(
            UNCHECKED_ASSERTION,
            path,
            n,
            format!("unchecked type assertion to {ty} panics when the dynamic type differs"),
            Severity::Error,
        ));
    });
}

fn statement_of(mut n: Node<'_>) -> Node<'_> {
    while let Some(p) = n.parent() {
        if matches!(p.kind(), "short_var_declaration" | "assignment_statement" | "var_spec") {
            return p;
        }
        if matches!(p.kind(), "block" | "statement_list" | "source_file") {
            break;
        }
        n = p;
    }
    n
}

fn int_overflow(root: Node<'_>, src: &str, path: &str, out: &mut Vec<LintIssue>) {
    let mut cursor = root.walk();
    for func in root.named_children(&mut cursor) {
        if !matches!(func.kind(), "function_declaration" | "method_declaration") {
            continue;
        }
        // variables assigned from strconv.Atoi, with their statements
        let mut atoi = Vec::new();
        let mut narrowed = HashSet::new();
        walk_named(func, |n| {
            if n.kind() != "call_expression" {
                return;
            }
            let Some(callee) = n.child_by_field_name("function") else {
                return;
            };
            let callee_text = node_text(callee, src);
            if callee_text == "strconv.Atoi" {
                let stmt = statement_of(n);
                if let Some(first) = stmt
                    .child_by_field_name("left")
                    .and_then(|l| l.named_child(0))
                    .or_else(|| stmt.child_by_field_name("name"))
                {
                    atoi.push((node_text(first, src).to_string(), stmt));
                }
            } else if matches!(callee_text, "int32" | "int16") {
                if let Some(arg) = n
                    .child_by_field_name("arguments")
                    .and_then(|a| a.named_child(0))
                    .filter(|a| a.kind() == "identifier")
                {
                    narrowed.insert(node_text(arg, src).to_string());
                }
            }
        });
        for (var, stmt) in atoi {
            if narrowed.contains(&var) {
                out.push(finding(
                    INT_OVERFLOW,
                    path,
                    stmt,
                    format!("strconv.Atoi result `{var}` converted to int16/int32 may overflow"),
                    Severity::Warning,
                ));
            }
        }
    }
}

fn unused_import(root: Node<'_>, src: &str, path: &str, out: &mut Vec<LintIssue>) {
    let mut used = HashSet::new();
    walk_named(root, |n| {
        let qualifier = match n.kind() {
            "selector_expression" => n.child_by_field_name("operand"),
            "qualified_type" => n.child_by_field_name("package"),
            _ => None,
        };
        if let Some(q) = qualifier {
            used.insert(node_text(q, src).to_string());
        }
    });
    let mut cursor = root.walk();
    for decl in root
        .named_children(&mut cursor)
        .filter(|d| d.kind() == "import_declaration")
    {
        walk_named(decl, |spec| {
            if spec.kind() != "import_spec" {
                return;
            }
            let info = go::import_spec(spec, src);
            let name = info.local_name();
            if name == "_" || name == "." || used.contains(&name) {
                return;
            }
            out.push(finding(
                UNUSED_IMPORT,
                path,
                spec,
                format!("\"{}\" imported and not used", info.path),
                Severity::Warning,
            ));
        });
    }
}
