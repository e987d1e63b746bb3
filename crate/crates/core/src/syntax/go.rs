use std::collections::HashSet;

use tree_sitter::{Node, Parser, Tree};

use super::{Decl, DeclKind, Grammar, ImportSpec, Outline, ParseFailure, RefKind, Reference};

/// Go support backed by tree-sitter.
#[derive(Debug, Clone, Copy, Default)]
pub struct GoGrammar;

/// Parses Go source. The returned tree may contain error nodes.
pub fn parse(source: &str) -> Tree {
    let mut parser = Parser::new();
    parser
        .set_language(&tree_sitter_go::LANGUAGE.into())
        .expect("bundled Go grammar is compatible");
    parser.parse(source, None).expect("parser has a language")
}

fn failure() -> ParseFailure {
    ParseFailure {
        language: "go".into(),
    }
}

fn parse_clean(source: &str) -> Result<Tree, ParseFailure> {
    let tree = parse(source);
    if tree.root_node().has_error() {
        Err(failure())
    } else {
        Ok(tree)
    }
}

pub fn node_text<'a>(node: Node<'_>, source: &'a str) -> &'a str {
    &source[node.byte_range()]
}

/// 1-based first and last line of a node.
pub fn node_lines(node: Node<'_>) -> (usize, usize) {
    (node.start_position().row + 1, node.end_position().row + 1)
}

/// Pre-order traversal of every named node under `root`.
pub fn walk_named<'t>(root: Node<'t>, mut visit: impl FnMut(Node<'t>)) {
    let mut cursor = root.walk();
    let mut stack = vec![root];
    while let Some(node) = stack.pop() {
        visit(node);
        let children: Vec<_> = node.named_children(&mut cursor).collect();
        stack.extend(children.into_iter().rev());
    }
}

fn unquote(lit: &str) -> String {
    lit.trim_matches(|c| c == '"' || c == '`').to_string()
}

fn receiver_type(method: Node<'_>, source: &str) -> Option<String> {
    let recv = method.child_by_field_name("receiver")?;
    let mut found = None;
    walk_named(recv, |n| {
        if found.is_none() && n.kind() == "type_identifier" {
            found = Some(node_text(n, source).to_string());
        }
    });
    found
}

fn spec_names(decl: Node<'_>, source: &str) -> Vec<String> {
    let mut names = Vec::new();
    walk_named(decl, |n| {
        if matches!(n.kind(), "type_spec" | "type_alias" | "const_spec" | "var_spec") {
            let mut cursor = n.walk();
            for name in n.children_by_field_name("name", &mut cursor) {
                names.push(node_text(name, source).to_string());
            }
        }
    });
    names
}

pub fn import_spec(n: Node<'_>, source: &str) -> ImportSpec {
    let path = n
        .child_by_field_name("path")
        .map(|p| unquote(node_text(p, source)))
        .unwrap_or_default();
    let alias = n
        .child_by_field_name("name")
        .map(|a| node_text(a, source).to_string());
    ImportSpec {
        alias,
        path,
        line: n.start_position().row + 1,
        start_byte: n.start_byte(),
        end_byte: n.end_byte(),
    }
}

fn import_specs(decl: Node<'_>, source: &str, out: &mut Vec<ImportSpec>) {
    walk_named(decl, |n| {
        if n.kind() == "import_spec" {
            out.push(import_spec(n, source));
        }
    });
}

/// Builds an outline from a tree even if it contains errors.
pub fn outline_of(tree: &Tree, source: &str) -> Outline {
    let root = tree.root_node();
    let mut out = Outline::default();
    let mut cursor = root.walk();
    for node in root.named_children(&mut cursor) {
        let (start_line, end_line) = node_lines(node);
        let decl = |kind, names, receiver| Decl {
            kind,
            names,
            receiver,
            start_line,
            end_line,
            start_byte: node.start_byte(),
            end_byte: node.end_byte(),
        };
        match node.kind() {
            "package_clause" => {
                let mut c = node.walk();
                out.package = node
                    .named_children(&mut c)
                    .find(|n| n.kind() == "package_identifier")
                    .map(|n| node_text(n, source).to_string());
                out.package_line = Some(start_line);
            }
            "import_declaration" => {
                import_specs(node, source, &mut out.imports);
                out.decls.push(decl(DeclKind::Import, Vec::new(), None));
            }
            "function_declaration" => {
                let name = node
                    .child_by_field_name("name")
                    .map(|n| node_text(n, source).to_string())
                    .into_iter()
                    .collect();
                out.decls.push(decl(DeclKind::Function, name, None));
            }
            "method_declaration" => {
                let name = node
                    .child_by_field_name("name")
                    .map(|n| node_text(n, source).to_string())
                    .into_iter()
                    .collect();
                let recv = receiver_type(node, source);
                out.decls.push(decl(DeclKind::Method, name, recv));
            }
            "type_declaration" => out
                .decls
                .push(decl(DeclKind::Type, spec_names(node, source), None)),
            "const_declaration" => out
                .decls
                .push(decl(DeclKind::Const, spec_names(node, source), None)),
            "var_declaration" => out
                .decls
                .push(decl(DeclKind::Var, spec_names(node, source), None)),
            _ => {}
        }
    }
    out
}

fn push_ref(out: &mut Vec<Reference>, seen: &mut HashSet<Reference>, r: Reference) {
    if seen.insert(r.clone()) {
        out.push(r);
    }
}

fn is_callee(node: Node<'_>) -> bool {
    node.parent()
        .filter(|p| p.kind() == "call_expression")
        .and_then(|p| p.child_by_field_name("function"))
        .map(|f| f.id() == node.id())
        .unwrap_or(false)
}

/// Collects references from nodes starting inside the line range.
pub fn references_in(tree: &Tree, source: &str, start_line: usize, end_line: usize) -> Vec<Reference> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    let in_range = |n: Node<'_>| {
        let line = n.start_position().row + 1;
        start_line <= line && line <= end_line
    };
    walk_named(tree.root_node(), |n| {
        if !in_range(n) {
            return;
        }
        match n.kind() {
            "selector_expression" => {
                let operand = n.child_by_field_name("operand");
                let field = n.child_by_field_name("field");
                if let (Some(op), Some(field)) = (operand, field) {
                    if op.kind() == "identifier" {
                        push_ref(
                            &mut out,
                            &mut seen,
                            Reference {
                                name: node_text(field, source).to_string(),
                                qualifier: Some(node_text(op, source).to_string()),
                                kind: RefKind::Selector,
                                called: is_callee(n),
                            },
                        );
                    }
                }
            }
            "qualified_type" => {
                let pkg = n.child_by_field_name("package");
                let name = n.child_by_field_name("name");
                if let (Some(pkg), Some(name)) = (pkg, name) {
                    push_ref(
                        &mut out,
                        &mut seen,
                        Reference {
                            name: node_text(name, source).to_string(),
                            qualifier: Some(node_text(pkg, source).to_string()),
                            kind: RefKind::Type,
                            called: false,
                        },
                    );
                }
            }
            "identifier" => {
                let in_qualified = n
                    .parent()
                    .map(|p| p.kind() == "qualified_type")
                    .unwrap_or(false);
                if !in_qualified {
                    push_ref(
                        &mut out,
                        &mut seen,
                        Reference {
                            name: node_text(n, source).to_string(),
                            qualifier: None,
                            kind: RefKind::Value,
                            called: is_callee(n),
                        },
                    );
                }
            }
            "type_identifier" => {
                let in_qualified = n
                    .parent()
                    .map(|p| p.kind() == "qualified_type")
                    .unwrap_or(false);
                if !in_qualified {
                    push_ref(
                        &mut out,
                        &mut seen,
                        Reference {
                            name: node_text(n, source).to_string(),
                            qualifier: None,
                            kind: RefKind::Type,
                            called: false,
                        },
                    );
                }
            }
            _ => {}
        }
    });
    out
}

impl Grammar for GoGrammar {
    fn language(&self) -> &'static str {
        "go"
    }

    fn check(&self, source: &str) -> bool {
        !parse(source).root_node().has_error()
    }

    fn outline(&self, source: &str) -> Result<Outline, ParseFailure> {
        let tree = parse_clean(source)?;
        Ok(outline_of(&tree, source))
    }

    fn references(
        &self,
        source: &str,
        start_line: usize,
        end_line: usize,
    ) -> Result<Vec<Reference>, ParseFailure> {
        let tree = parse_clean(source)?;
        Ok(references_in(&tree, source, start_line, end_line))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SRC: &str = "package sched

import (
\t\"context\"
\tlogs \"example.com/kit/logs\"
)

type SchedulerImpl struct{ interval int }

const DefaultInterval = 5

func (s *SchedulerImpl) Start(ctx context.Context) {
\tgo s.run(ctx)
\tlogs.CtxInfo(ctx, \"started\", DefaultInterval)
}
";

    #[test]
    fn outline_lists_top_level_decls() {
        let o = GoGrammar.outline(SRC).unwrap();
        assert_eq!(o.package.as_deref(), Some("sched"));
        assert_eq!(o.imports.len(), 2);
        assert_eq!(o.imports[1].local_name(), "logs");
        let kinds: Vec<_> = o.decls.iter().map(|d| d.kind).collect();
        assert_eq!(
            kinds,
            [DeclKind::Import, DeclKind::Type, DeclKind::Const, DeclKind::Method]
        );
        let m = &o.decls[3];
        assert_eq!(m.names, ["Start"]);
        assert_eq!(m.receiver.as_deref(), Some("SchedulerImpl"));
        assert_eq!((m.start_line, m.end_line), (12, 15));
    }

    #[test]
    fn references_in_method_body() {
        let refs = GoGrammar.references(SRC, 13, 14).unwrap();
        let sel: Vec<_> = refs
            .iter()
            .filter(|r| r.kind == RefKind::Selector)
            .map(|r| (r.qualifier.clone().unwrap(), r.name.clone(), r.called))
            .collect();
        assert!(sel.contains(&("s".into(), "run".into(), true)));
        assert!(sel.contains(&("logs".into(), "CtxInfo".into(), true)));
        assert!(refs.iter().any(|r| r.name == "DefaultInterval"));
    }

    #[test]
    fn check_detects_syntax_errors() {
        assert!(GoGrammar.check(SRC));
        assert!(!GoGrammar.check("package x\nfunc {{{"));
        assert!(GoGrammar.outline("package x\nfunc {{{").is_err());
    }
}
