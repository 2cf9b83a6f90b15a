//! Simplified def-use graph agreement.
//!
//! Edges are (abstract variable id, use ordinal) pairs: variables are
//! numbered by first-definition order, and each use after a variable's first
//! definition contributes one edge. The abstraction makes the score invariant
//! under renaming and under swapping independent definitions.

use crate::codeparse::wrap_snippet;
use crate::lang::Language;
use std::collections::{HashMap, HashSet};
use tree_sitter::{Node, Parser};

/// One def-use edge: (variable number by first definition, use ordinal).
pub type DataflowEdge = (usize, usize);

fn ts_language(language: Language) -> tree_sitter::Language {
    match language {
        Language::C => tree_sitter_c::LANGUAGE.into(),
        Language::Java => tree_sitter_java::LANGUAGE.into(),
        Language::Python => tree_sitter_python::LANGUAGE.into(),
        Language::Rust => tree_sitter_rust::LANGUAGE.into(),
    }
}

/// Extracts def-use edges; `None` when the source does not parse cleanly.
pub fn dataflow_edges(source: &str, language: Language) -> Option<Vec<DataflowEdge>> {
    let wrapped = wrap_snippet(source, language);
    let mut parser = Parser::new();
    parser.set_language(&ts_language(language)).ok()?;
    let tree = parser.parse(&wrapped, None)?;
    if tree.root_node().has_error() {
        return None;
    }

    // Byte ranges of identifier nodes that sit in a defining position.
    let mut def_sites: HashSet<(usize, usize)> = HashSet::new();
    collect_def_sites(tree.root_node(), language, &mut def_sites);

    // All identifier occurrences in byte order.
    let mut occurrences: Vec<(usize, String, bool)> = Vec::new();
    collect_identifiers(tree.root_node(), &wrapped, &def_sites, &mut occurrences);
    occurrences.sort_by_key(|(pos, _, _)| *pos);

    let mut var_ids: HashMap<String, usize> = HashMap::new();
    let mut defined_at: HashMap<String, usize> = HashMap::new();
    let mut use_counts: HashMap<String, usize> = HashMap::new();
    let mut edges = Vec::new();
    for (pos, name, is_def) in occurrences {
        if is_def {
            let next = var_ids.len();
            var_ids.entry(name.clone()).or_insert(next);
            defined_at.entry(name).or_insert(pos);
        } else if let (Some(&var), Some(&def_pos)) = (var_ids.get(&name), defined_at.get(&name)) {
            if pos > def_pos {
                let ordinal = use_counts.entry(name).or_insert(0);
                edges.push((var, *ordinal));
                *ordinal += 1;
            }
        }
    }
    Some(edges)
}

fn collect_def_sites(node: Node, language: Language, out: &mut HashSet<(usize, usize)>) {
    let kind = node.kind();
    let mut mark = |n: Node| mark_pattern_identifiers(n, out);
    match language {
        Language::Rust => match kind {
            "let_declaration" | "for_expression" => {
                if let Some(p) = node.child_by_field_name("pattern") {
                    mark(p);
                }
            }
            "parameter" => {
                if let Some(p) = node.child_by_field_name("pattern") {
                    mark(p);
                }
            }
            "assignment_expression" | "compound_assignment_expr" => {
                if let Some(l) = node.child_by_field_name("left") {
                    if l.kind() == "identifier" {
                        mark(l);
                    }
                }
            }
            _ => {}
        },
        Language::C => match kind {
            "init_declarator" | "parameter_declaration" | "declaration" => {
                // Declarations may carry several declarators: `int a, b;`.
                let mut cursor = node.walk();
                let declarators: Vec<Node> = node
                    .children_by_field_name("declarator", &mut cursor)
                    .collect();
                for d in declarators {
                    mark_c_declarator(d, out);
                }
            }
            "assignment_expression" => {
                if let Some(l) = node.child_by_field_name("left") {
                    if l.kind() == "identifier" {
                        mark(l);
                    }
                }
            }
            _ => {}
        },
        Language::Java => match kind {
            "variable_declarator" => {
                if let Some(n) = node.child_by_field_name("name") {
                    mark(n);
                }
            }
            "formal_parameter" => {
                if let Some(n) = node.child_by_field_name("name") {
                    mark(n);
                }
            }
            "assignment_expression" => {
                if let Some(l) = node.child_by_field_name("left") {
                    if l.kind() == "identifier" {
                        mark(l);
                    }
                }
            }
            _ => {}
        },
        Language::Python => match kind {
            "assignment" | "augmented_assignment" => {
                if let Some(l) = node.child_by_field_name("left") {
                    mark(l);
                }
            }
            "parameters" => mark(node),
            "for_statement" => {
                if let Some(l) = node.child_by_field_name("left") {
                    mark(l);
                }
            }
            _ => {}
        },
    }
    let mut cursor = node.walk();
    for child in node.children(&mut cursor) {
        collect_def_sites(child, language, out);
    }
}

/// Marks every identifier leaf under a binding pattern as a def site.
fn mark_pattern_identifiers(node: Node, out: &mut HashSet<(usize, usize)>) {
    if node.kind() == "identifier" {
        out.insert((node.start_byte(), node.end_byte()));
        return;
    }
    let mut cursor = node.walk();
    for child in node.children(&mut cursor) {
        mark_pattern_identifiers(child, out);
    }
}

/// C declarators nest (pointers, arrays); the defined name is the innermost
/// identifier, while identifiers in initializers are uses.
fn mark_c_declarator(node: Node, out: &mut HashSet<(usize, usize)>) {
    match node.kind() {
        "identifier" => {
            out.insert((node.start_byte(), node.end_byte()));
        }
        "init_declarator" => {
            if let Some(d) = node.child_by_field_name("declarator") {
                mark_c_declarator(d, out);
            }
        }
        _ => {
            if let Some(d) = node.child_by_field_name("declarator") {
                mark_c_declarator(d, out);
            }
        }
    }
}

fn collect_identifiers(
    node: Node,
    source: &str,
    def_sites: &HashSet<(usize, usize)>,
    out: &mut Vec<(usize, String, bool)>,
) {
    if node.kind() == "identifier" {
        let range = (node.start_byte(), node.end_byte());
        out.push((
            range.0,
            source[range.0..range.1].to_string(),
            def_sites.contains(&range),
        ));
        return;
    }
    let mut cursor = node.walk();
    for child in node.children(&mut cursor) {
        collect_identifiers(child, source, def_sites, out);
    }
}

/// Def-use agreement: matched edges over reference edges. `Some(1.0)` when
/// both sides have no edges; `None` when the reference has none but the
/// candidate does (the caller excludes the term and renormalizes); parse
/// failure on either side scores 0.
pub fn dataflow_match(candidate: &str, reference: &str, language: Language) -> Option<f64> {
    let (Some(cand_edges), Some(ref_edges)) = (
        dataflow_edges(candidate, language),
        dataflow_edges(reference, language),
    ) else {
        return Some(0.0);
    };
    if ref_edges.is_empty() {
        return if cand_edges.is_empty() {
            Some(1.0)
        } else {
            None
        };
    }
    let mut ref_counts: HashMap<DataflowEdge, usize> = HashMap::new();
    for e in &ref_edges {
        *ref_counts.entry(*e).or_insert(0) += 1;
    }
    let mut matched = 0usize;
    for e in &cand_edges {
        if let Some(count) = ref_counts.get_mut(e) {
            if *count > 0 {
                *count -= 1;
                matched += 1;
            }
        }
    }
    Some(matched as f64 / ref_edges.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_code_scores_one() {
        let code = "fn f(a: u32) -> u32 { let b = a + 1; b + a }";
        assert_eq!(dataflow_match(code, code, Language::Rust), Some(1.0));
    }

    #[test]
    fn no_variables_on_both_sides_scores_one() {
        let a = "fn f() { g(); }";
        let b = "fn h() { k(); }";
        assert_eq!(dataflow_match(a, b, Language::Rust), Some(1.0));
    }

    #[test]
    fn reference_without_edges_excludes_term() {
        let cand = "fn f(a: u32) -> u32 { a + a }";
        let refr = "fn f() { g(); }";
        assert_eq!(dataflow_match(cand, refr, Language::Rust), None);
    }

    #[test]
    fn swapped_independent_definitions_still_match() {
        let a = "fn f() { let a = 1; let b = 2; use_it(a); use_it(b); }";
        let b = "fn f() { let b = 2; let a = 1; use_it(a); use_it(b); }";
        assert_eq!(dataflow_match(a, b, Language::Rust), Some(1.0));
    }

    #[test]
    fn rename_invariance() {
        let a = "fn f() { let total = 1; emit(total); }";
        let b = "fn f() { let sum = 1; emit(sum); }";
        assert_eq!(dataflow_match(a, b, Language::Rust), Some(1.0));
    }

    #[test]
    fn missing_dataflow_scores_below_one() {
        let refr = "fn f() { let a = seed(); mix(a); mix(a); }";
        let cand = "fn f() { let a = seed(); mix(1); mix(2); }";
        let score = dataflow_match(cand, refr, Language::Rust).unwrap();
        assert!(score < 1.0, "{score}");
    }

    #[test]
    fn unparseable_side_scores_zero() {
        let good = "fn f() { let a = 1; g(a); }";
        let bad = "fn f( { let a = ;";
        assert_eq!(dataflow_match(bad, good, Language::Rust), Some(0.0));
    }

    #[test]
    fn c_and_python_edges_exist() {
        let c = "int f(int a) { int b = a + 1; return b + a; }";
        assert!(!dataflow_edges(c, Language::C).unwrap().is_empty());
        let py = "def f(a):\n    b = a + 1\n    return b + a\n";
        assert!(!dataflow_edges(py, Language::Python).unwrap().is_empty());
        let java = "int f(int a) { int b = a + 1; return b + a; }";
        assert!(!dataflow_edges(java, Language::Java).unwrap().is_empty());
    }

    #[test]
    fn c_multi_declarator_marks_all_names() {
        // Both `a` and `b` are definitions; the only uses are in the return.
        let code = "int f(void) { int a = 1, b = 2; return a + b; }";
        let edges = dataflow_edges(code, Language::C).unwrap();
        assert_eq!(edges.len(), 2, "one use edge per variable: {edges:?}");
    }
}
