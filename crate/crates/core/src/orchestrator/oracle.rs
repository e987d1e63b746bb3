//! Rule-template fixes for the toy linter. Backs the mock-oracle backend and
//! the adversarial variants of the scripted backend.

use regex::Regex;
use tree_sitter::Node;

use crate::issue::LintIssue;
use crate::lint::toy;
use crate::patch::{find_line_windows, ApplyMode, FixPatch, SearchReplaceBlock};
use crate::syntax::go::{self, node_text, walk_named};
use crate::workspace::Workspace;

fn indent_of(line: &str) -> &str {
    &line[..line.len() - line.trim_start().len()]
}

/// Builds a block rewriting line `idx` (0-based) into `replacement`, adding
/// following (then preceding) lines as context until the search is unique.
pub fn unique_block(path: &str, lines: &[&str], idx: usize, replacement: &[String]) -> Option<SearchReplaceBlock> {
    let (mut start, mut end) = (idx, idx);
    loop {
        let window = &lines[start..=end];
        if find_line_windows(lines, window, ApplyMode::TrimTrailing).len() == 1 {
            let mut search = String::new();
            let mut replace = String::new();
            for l in &lines[start..idx] {
                search.push_str(l);
                search.push('\n');
                replace.push_str(l);
                replace.push('\n');
            }
            search.push_str(lines[idx]);
            search.push('\n');
            for r in replacement {
                replace.push_str(r);
                replace.push('\n');
            }
            for l in &lines[idx + 1..=end] {
                search.push_str(l);
                search.push('\n');
                replace.push_str(l);
                replace.push('\n');
            }
            return Some(SearchReplaceBlock {
                file: path.to_string(),
                search,
                replace,
            });
        }
        if end + 1 < lines.len() {
            end += 1;
        } else if start > 0 {
            start -= 1;
        } else {
            return None;
        }
    }
}

fn recover_guard(indent: &str) -> Vec<String> {
    vec![
        format!("{indent}defer func() {{"),
        format!("{indent}\tif r := recover(); r != nil {{"),
        format!("{indent}\t\tprintln(\"recovered from panic:\", r)"),
        format!("{indent}\t}}"),
        format!("{indent}}}()"),
    ]
}

fn fix_missing_recover(line: &str) -> Option<Vec<String>> {
    let indent = indent_of(line);
    let trimmed = line.trim();
    if let Some(call) = trimmed.strip_prefix("go ").filter(|c| !c.starts_with("func(")) {
        let inner = format!("{indent}\t");
        let mut out = vec![format!("{indent}go func() {{")];
        out.extend(recover_guard(&inner));
        out.push(format!("{inner}{call}"));
        out.push(format!("{indent}}}()"));
        return Some(out);
    }
    if trimmed.ends_with('{') && trimmed.contains("func(") {
        let mut out = vec![line.to_string()];
        out.extend(recover_guard(&format!("{indent}\t")));
        return Some(out);
    }
    None
}

fn zero_value(ty: &str) -> String {
    let ty = ty.trim();
    let numeric = [
        "int", "int8", "int16", "int32", "int64", "uint", "uint8", "uint16", "uint32", "uint64",
        "uintptr", "float32", "float64", "byte", "rune",
    ];
    if numeric.contains(&ty) {
        "0".into()
    } else if ty == "string" {
        "\"\"".into()
    } else if ty == "bool" {
        "false".into()
    } else if ty.starts_with('*')
        || ty.starts_with("[]")
        || ty.starts_with("map[")
        || ty.starts_with("chan ")
        || ty.starts_with("func")
        || ty.starts_with("interface")
        || matches!(ty, "any" | "error")
    {
        "nil".into()
    } else {
        format!("{ty}{{}}")
    }
}

fn enclosing_function<'t>(root: Node<'t>, row: usize) -> Option<Node<'t>> {
    let mut cursor = root.walk();
    let found = root.named_children(&mut cursor).find(|n| {
        matches!(n.kind(), "function_declaration" | "method_declaration")
            && n.start_position().row <= row
            && row <= n.end_position().row
    });
    found
}

fn result_types(func: Node<'_>, src: &str) -> Vec<String> {
    let Some(result) = func.child_by_field_name("result") else {
        return Vec::new();
    };
    if result.kind() != "parameter_list" {
        return vec![node_text(result, src).to_string()];
    }
    let mut out = Vec::new();
    let mut cursor = result.walk();
    for p in result.named_children(&mut cursor) {
        if let Some(t) = p.child_by_field_name("type") {
            let mut c = p.walk();
            let n = p.children_by_field_name("name", &mut c).count().max(1);
            for _ in 0..n {
                out.push(node_text(t, src).to_string());
            }
        }
    }
    out
}

fn imports_package(root: Node<'_>, src: &str, path: &str) -> bool {
    let mut found = false;
    walk_named(root, |n| {
        if n.kind() == "import_spec" && go::import_spec(n, src).path == path {
            found = true;
        }
    });
    found
}

fn fix_unchecked_assertion(src: &str, row: usize, line: &str) -> Option<Vec<String>> {
    let re = Regex::new(r"^(\s*)([A-Za-z_]\w*)\s*:=\s*(([A-Za-z_][\w.]*)\.\((\*?[\w.]+)\))\s*$").expect("static regex");
    let cap = re.captures(line)?;
    let (indent, var, expr, operand, ty) = (&cap[1], &cap[2], &cap[3], &cap[4], &cap[5]);
    let tree = go::parse(src);
    let root = tree.root_node();
    let func = enclosing_function(root, row)?;
    let results = result_types(func, src);
    let msg = format!("type assertion failed: {operand} is not of type {ty}");
    let err_expr = if imports_package(root, src, "fmt") {
        Some(format!("fmt.Errorf(\"{msg}\")"))
    } else if imports_package(root, src, "errors") {
        Some(format!("errors.New(\"{msg}\")"))
    } else {
        None
    };
    let ret = match results.split_last() {
        None => "return".to_string(),
        Some((last, init)) if last == "error" && err_expr.is_some() => {
            let mut vals: Vec<String> = init.iter().map(|t| zero_value(t)).collect();
            vals.push(err_expr.expect("checked"));
            format!("return {}", vals.join(", "))
        }
        Some(_) if results.iter().all(|t| t != "error") => {
            let vals: Vec<String> = results.iter().map(|t| zero_value(t)).collect();
            format!("return {}", vals.join(", "))
        }
        Some(_) => format!("panic(\"{msg}\")"),
    };
    Some(vec![
        format!("{indent}{var}, ok := {expr}"),
        format!("{indent}if !ok {{"),
        format!("{indent}\t{ret}"),
        format!("{indent}}}"),
    ])
}

fn fix_int_overflow(line: &str) -> Option<Vec<String>> {
    let re = Regex::new(r"^(\s*)([A-Za-z_]\w*)\s*,\s*([A-Za-z_]\w*)\s*(:=|=)\s*strconv\.Atoi\((.*)\)\s*$").expect("static regex");
    let cap = re.captures(line)?;
    let (indent, var, err, op, arg) = (&cap[1], &cap[2], &cap[3], &cap[4], &cap[5]);
    let wide = format!("{var}64");
    Some(vec![
        format!("{indent}{wide}, {err} := strconv.ParseInt({arg}, 10, 32)"),
        format!("{indent}{var} {op} int({wide})"),
    ])
}

/// Replacement lines for the issue's first line, if the rule has a template.
pub fn template_fix(ws: &Workspace, issue: &LintIssue) -> Option<Vec<String>> {
    let src = ws.get(&issue.file)?;
    let row = issue.span.start_line.checked_sub(1)?;
    let line = src.lines().nth(row)?;
    match issue.rule_id.as_str() {
        toy::MISSING_RECOVER => fix_missing_recover(line),
        toy::UNCHECKED_ASSERTION => fix_unchecked_assertion(src, row, line),
        toy::INT_OVERFLOW => fix_int_overflow(line),
        toy::UNUSED_IMPORT => {
            let t = line.trim();
            (t.starts_with("import ") || t.starts_with('"') || t.split_whitespace().nth(1).is_some_and(|p| p.starts_with('"')))
                .then(Vec::new)
        }
        _ => None,
    }
}

/// Minimal single-block fix for a toy-linter finding.
pub fn synthesize_fix(ws: &Workspace, issue: &LintIssue) -> Option<FixPatch> {
    let replacement = template_fix(ws, issue)?;
    let src = ws.get(&issue.file)?;
    let lines: Vec<&str> = src.lines().collect();
    let block = unique_block(&issue.file, &lines, issue.span.start_line - 1, &replacement)?;
    Some(FixPatch::from_blocks(vec![block]))
}

/// A block that applies but changes nothing: the issue line replaced by itself.
pub fn noop_block(ws: &Workspace, issue: &LintIssue) -> Option<SearchReplaceBlock> {
    let src = ws.get(&issue.file)?;
    let lines: Vec<&str> = src.lines().collect();
    let idx = issue.span.start_line.checked_sub(1)?;
    let same = vec![lines.get(idx)?.to_string()];
    unique_block(&issue.file, &lines, idx, &same)
}

/// A harmless extra edit elsewhere in the file: rewrites the package clause
/// line with a trailing comment.
pub fn redundant_block(ws: &Workspace, issue: &LintIssue) -> Option<SearchReplaceBlock> {
    let src = ws.get(&issue.file)?;
    let lines: Vec<&str> = src.lines().collect();
    let idx = lines.iter().position(|l| l.starts_with("package "))?;
    let replacement = vec![format!("{} // reviewed", lines[idx])];
    unique_block(&issue.file, &lines, idx, &replacement)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lint::{run_linter, LinterConfig};
    use crate::patch::apply_patch;
    use crate::syntax::Grammar;

    fn fixes_everything(src: &str) {
        let ws = Workspace::from_files("r", [("p/a.go", src)]).unwrap();
        let issues = run_linter(&ws, &LinterConfig::toy()).unwrap();
        assert!(!issues.is_empty());
        for issue in &issues {
            let patch = synthesize_fix(&ws, issue).unwrap_or_else(|| panic!("no fix for {issue:?}"));
            let report = apply_patch(&ws, &patch, ApplyMode::default());
            assert!(report.all_applied());
            let after = report.result.get("p/a.go").unwrap();
            assert!(go::GoGrammar.check(after), "fix broke syntax:\n{after}");
            let remaining = run_linter(&report.result, &LinterConfig::toy()).unwrap();
            assert_eq!(remaining.len(), issues.len() - 1, "{after}");
        }
    }

    #[test]
    fn goroutine_templates() {
        fixes_everything("package p\n\nfunc (s *S) Start(ctx C) {\n\tgo s.run(ctx)\n\terrg.Go(func() error {\n\t\treturn s.init(ctx)\n\t})\n}\n");
    }

    #[test]
    fn assertion_templates() {
        fixes_everything("package p\n\nimport \"fmt\"\n\nfunc a(e any) error {\n\tv := e.(Thing)\n\tfmt.Println(v)\n\treturn nil\n}\n\nfunc b(e any) (int, string) {\n\tw := e.(*Other)\n\t_ = w\n\treturn 1, \"\"\n}\n\nfunc c(e any) {\n\tu := e.(int)\n\t_ = u\n}\n");
    }

    #[test]
    fn overflow_and_import_templates() {
        fixes_everything("package p\n\nimport (\n\t\"strconv\"\n\t\"strings\"\n)\n\nfunc w(s string) int32 {\n\tn, err := strconv.Atoi(s)\n\tif err != nil {\n\t\treturn 0\n\t}\n\treturn int32(n)\n}\n");
    }

    #[test]
    fn unique_block_extends_context() {
        let lines = ["a", "x", "b", "x", "c"];
        let b = unique_block("f", &lines, 1, &["y".to_string()]).unwrap();
        assert_eq!(b.search, "x\nb\n");
        assert_eq!(b.replace, "y\nb\n");
    }
}
