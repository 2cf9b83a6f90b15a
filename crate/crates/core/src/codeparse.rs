//! Language-aware syntax analysis over tree-sitter grammars.
//!
//! Provides function extraction, call/execution statement extraction, and
//! AST subtree fingerprinting. Each registered language contributes a grammar
//! plus node-kind mappings for function definitions, call expressions, and
//! statement blocks; everything else is language-independent tree walking.

use crate::hashing::fnv1a64;
use crate::lang::Language;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use thiserror::Error;
use tree_sitter::{Node, Parser, Tree};

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("grammar failed to load: {0}")]
    Grammar(String),
}

/// Per-language node-kind mappings. Adding a language means adding a grammar
/// and filling in these four lists.
struct GrammarSpec {
    ts: fn() -> tree_sitter::Language,
    /// Node kinds that define a function (including closures/lambdas).
    function_kinds: &'static [&'static str],
    /// Node kinds that are call expressions.
    call_kinds: &'static [&'static str],
    /// Statement containers; direct named children of these are statements.
    block_kinds: &'static [&'static str],
    /// Named containers contributing to the scope path (modules, classes).
    container_kinds: &'static [&'static str],
}

const COMMENT_KINDS: &[&str] = &["comment", "line_comment", "block_comment"];

fn spec_for(language: Language) -> &'static GrammarSpec {
    match language {
        Language::C => &GrammarSpec {
            ts: || tree_sitter_c::LANGUAGE.into(),
            function_kinds: &["function_definition"],
            call_kinds: &["call_expression"],
            block_kinds: &["compound_statement"],
            container_kinds: &[],
        },
        Language::Java => &GrammarSpec {
            ts: || tree_sitter_java::LANGUAGE.into(),
            function_kinds: &[
                "method_declaration",
                "constructor_declaration",
                "lambda_expression",
            ],
            call_kinds: &["method_invocation"],
            block_kinds: &["block", "constructor_body"],
            container_kinds: &[
                "class_declaration",
                "interface_declaration",
                "enum_declaration",
            ],
        },
        Language::Python => &GrammarSpec {
            ts: || tree_sitter_python::LANGUAGE.into(),
            function_kinds: &["function_definition", "lambda"],
            call_kinds: &["call"],
            block_kinds: &["block"],
            container_kinds: &["class_definition"],
        },
        Language::Rust => &GrammarSpec {
            ts: || tree_sitter_rust::LANGUAGE.into(),
            function_kinds: &["function_item", "closure_expression"],
            call_kinds: &["call_expression"],
            block_kinds: &["block"],
            container_kinds: &["mod_item"],
        },
    }
}

fn parse_tree(source: &str, language: Language) -> Result<Tree, ParseError> {
    let spec = spec_for(language);
    let mut parser = Parser::new();
    parser
        .set_language(&(spec.ts)())
        .map_err(|e| ParseError::Grammar(e.to_string()))?;
    parser
        .parse(source, None)
        .ok_or_else(|| ParseError::Grammar(format!("{language}: parser returned no tree")))
}

/// One function definition, in file byte coordinates.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunctionDef {
    pub name: String,
    /// Module/namespace path of the enclosing containers within the file.
    pub scope: String,
    pub signature_text: String,
    pub body_text: String,
    pub byte_range: (usize, usize),
    pub language: Language,
}

impl FunctionDef {
    /// Full definition text; `signature_text` and `body_text` tile the range.
    pub fn definition_text(&self) -> String {
        format!("{}{}", self.signature_text, self.body_text)
    }
}

/// A call expression found inside a function body.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CallStatement {
    pub callee_name: String,
    /// Text of the whole enclosing statement.
    pub statement_text: String,
    /// Byte offset of the callee identifier; strictly increasing in output.
    pub byte_offset: usize,
    /// Offset of the enclosing statement itself.
    pub statement_offset: usize,
    pub enclosing_function: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseDiagnostic {
    pub byte_offset: usize,
    pub message: String,
}

/// Functions recovered from a source text plus diagnostics for any regions
/// the grammar could not make sense of.
#[derive(Debug, Clone, Default)]
pub struct ParseReport {
    pub functions: Vec<FunctionDef>,
    pub diagnostics: Vec<ParseDiagnostic>,
}

/// Extracts every function definition (top-level and nested, including bound
/// closures) in source order.
pub fn parse_functions(source: &str, language: Language) -> Result<ParseReport, ParseError> {
    let tree = parse_tree(source, language)?;
    let spec = spec_for(language);
    let mut report = ParseReport::default();
    collect_functions(
        tree.root_node(),
        source,
        language,
        spec,
        &mut report.functions,
    );
    collect_diagnostics(tree.root_node(), source, &mut report.diagnostics);
    Ok(report)
}

fn collect_functions(
    node: Node,
    source: &str,
    language: Language,
    spec: &GrammarSpec,
    out: &mut Vec<FunctionDef>,
) {
    if spec.function_kinds.contains(&node.kind()) {
        if let Some(def) = function_def(node, source, language, spec) {
            out.push(def);
        }
    }
    let mut cursor = node.walk();
    for child in node.children(&mut cursor) {
        collect_functions(child, source, language, spec, out);
    }
}

fn function_def(
    node: Node,
    source: &str,
    language: Language,
    spec: &GrammarSpec,
) -> Option<FunctionDef> {
    let body = node.child_by_field_name("body")?;
    let start = node.start_byte();
    let end = node.end_byte();
    let name = function_name(node, source).unwrap_or_else(|| format!("closure@{start}"));
    Some(FunctionDef {
        name,
        scope: scope_path(node, source, spec),
        signature_text: source[start..body.start_byte()].to_string(),
        body_text: source[body.start_byte()..end].to_string(),
        byte_range: (start, end),
        language,
    })
}

fn function_name(node: Node, source: &str) -> Option<String> {
    if let Some(name) = node.child_by_field_name("name") {
        return Some(text_of(name, source));
    }
    // C routes the name through the declarator chain.
    if let Some(declarator) = node.child_by_field_name("declarator") {
        if let Some(fd) = find_kind(declarator, "function_declarator") {
            if let Some(inner) = fd.child_by_field_name("declarator") {
                if let Some(id) = find_kind(inner, "identifier") {
                    return Some(text_of(id, source));
                }
                return Some(text_of(inner, source));
            }
        }
    }
    // Closures and lambdas: use the binding name when directly bound.
    binding_name(node, source)
}

fn binding_name(node: Node, source: &str) -> Option<String> {
    let parent = node.parent()?;
    match parent.kind() {
        "let_declaration" => parent
            .child_by_field_name("pattern")
            .filter(|p| p.kind() == "identifier")
            .map(|p| text_of(p, source)),
        "variable_declarator" => parent
            .child_by_field_name("name")
            .map(|p| text_of(p, source)),
        "assignment" => parent
            .child_by_field_name("left")
            .filter(|p| p.kind() == "identifier")
            .map(|p| text_of(p, source)),
        _ => None,
    }
}

fn scope_path(node: Node, source: &str, spec: &GrammarSpec) -> String {
    let mut parts = Vec::new();
    let mut current = node.parent();
    while let Some(n) = current {
        if spec.container_kinds.contains(&n.kind()) {
            if let Some(name) = n.child_by_field_name("name") {
                parts.push(text_of(name, source));
            }
        }
        current = n.parent();
    }
    parts.reverse();
    parts.join("::")
}

fn find_kind<'a>(node: Node<'a>, kind: &str) -> Option<Node<'a>> {
    if node.kind() == kind {
        return Some(node);
    }
    let mut cursor = node.walk();
    for child in node.children(&mut cursor) {
        if let Some(found) = find_kind(child, kind) {
            return Some(found);
        }
    }
    None
}

fn collect_diagnostics(node: Node, source: &str, out: &mut Vec<ParseDiagnostic>) {
    if node.is_error() {
        out.push(ParseDiagnostic {
            byte_offset: node.start_byte(),
            message: format!(
                "unparseable region: {}",
                truncate(&text_of(node, source), 60)
            ),
        });
        return;
    }
    if node.is_missing() {
        out.push(ParseDiagnostic {
            byte_offset: node.start_byte(),
            message: format!("missing {}", node.kind()),
        });
        return;
    }
    if !node.has_error() {
        return;
    }
    let mut cursor = node.walk();
    for child in node.children(&mut cursor) {
        collect_diagnostics(child, source, out);
    }
}

fn truncate(s: &str, max: usize) -> String {
    if s.len() <= max {
        s.to_string()
    } else {
        let mut end = max;
        while !s.is_char_boundary(end) {
            end -= 1;
        }
        format!("{}...", &s[..end])
    }
}

fn text_of(node: Node, source: &str) -> String {
    source[node.start_byte()..node.end_byte()].to_string()
}

/// Re-parse context for a definition extracted from a larger file. Java
/// snippets need a class wrapper to parse standalone; offsets are rebased so
/// results stay in the original file's coordinates.
struct Reparsed {
    tree: Tree,
    source: String,
    /// Subtract this from parsed offsets, then add the definition start.
    prefix_len: usize,
    base: usize,
}

fn reparse_definition(def: &FunctionDef) -> Result<Reparsed, ParseError> {
    let text = def.definition_text();
    let (source, prefix_len) = match def.language {
        Language::Java => (format!("class __W {{ {text} }}"), "class __W { ".len()),
        _ => (text, 0),
    };
    let tree = parse_tree(&source, def.language)?;
    Ok(Reparsed {
        tree,
        source,
        prefix_len,
        base: def.byte_range.0,
    })
}

impl Reparsed {
    fn rebase(&self, byte: usize) -> usize {
        byte - self.prefix_len + self.base
    }
}

/// Extracts every call expression in the function body, in source order.
/// Offsets point at the callee identifier, which keeps them strictly
/// increasing even for chained calls.
pub fn extract_call_statements(def: &FunctionDef) -> Result<Vec<CallStatement>, ParseError> {
    let spec = spec_for(def.language);
    let re = reparse_definition(def)?;
    let mut calls = Vec::new();
    collect_calls(re.tree.root_node(), &re, spec, &def.name, &mut calls);
    calls.sort_by_key(|c| c.byte_offset);
    calls.dedup_by(|a, b| a.byte_offset == b.byte_offset && a.callee_name == b.callee_name);
    Ok(calls)
}

fn collect_calls(
    node: Node,
    re: &Reparsed,
    spec: &GrammarSpec,
    default_fn: &str,
    out: &mut Vec<CallStatement>,
) {
    if spec.call_kinds.contains(&node.kind()) {
        if let Some((callee, name_node)) = callee_name(node, &re.source) {
            let stmt = enclosing_statement(node, spec);
            out.push(CallStatement {
                callee_name: callee,
                statement_text: text_of(stmt, &re.source),
                byte_offset: re.rebase(name_node.start_byte()),
                statement_offset: re.rebase(stmt.start_byte()),
                enclosing_function: enclosing_function_name(node, re, spec)
                    .unwrap_or_else(|| default_fn.to_string()),
            });
        }
    }
    let mut cursor = node.walk();
    for child in node.children(&mut cursor) {
        collect_calls(child, re, spec, default_fn, out);
    }
}

/// The called name and the node that carries it: `a.b(c)` yields `b`,
/// `mod::f(x)` yields `f`.
fn callee_name<'a>(call: Node<'a>, source: &str) -> Option<(String, Node<'a>)> {
    if let Some(name) = call.child_by_field_name("name") {
        return Some((text_of(name, source), name));
    }
    let callee = call.child_by_field_name("function")?;
    let node = match callee.kind() {
        "field_expression" => callee.child_by_field_name("field"),
        "attribute" => callee.child_by_field_name("attribute"),
        "scoped_identifier" => callee.child_by_field_name("name"),
        _ => None,
    }
    .or_else(|| rightmost_identifier(callee))
    .unwrap_or(callee);
    Some((text_of(node, source), node))
}

fn rightmost_identifier(node: Node) -> Option<Node> {
    if node.named_child_count() == 0 {
        if node.kind().contains("identifier") {
            return Some(node);
        }
        return None;
    }
    let mut best = None;
    let mut cursor = node.walk();
    for child in node.children(&mut cursor) {
        if let Some(found) = rightmost_identifier(child) {
            best = Some(found);
        }
    }
    best
}

fn enclosing_statement<'a>(node: Node<'a>, spec: &GrammarSpec) -> Node<'a> {
    let mut current = node;
    while let Some(parent) = current.parent() {
        if spec.block_kinds.contains(&parent.kind()) {
            return current;
        }
        current = parent;
    }
    node
}

fn enclosing_function_name(node: Node, re: &Reparsed, spec: &GrammarSpec) -> Option<String> {
    let mut current = node.parent();
    while let Some(n) = current {
        if spec.function_kinds.contains(&n.kind()) {
            return function_name(n, &re.source);
        }
        current = n.parent();
    }
    None
}

/// All top-level statements of the function body in source order, as
/// (statement text, file byte offset) pairs.
pub fn extract_execution_statements(def: &FunctionDef) -> Result<Vec<(String, usize)>, ParseError> {
    let spec = spec_for(def.language);
    let re = reparse_definition(def)?;
    let Some(fn_node) = first_function_node(re.tree.root_node(), spec) else {
        return Ok(Vec::new());
    };
    let Some(body) = fn_node.child_by_field_name("body") else {
        return Ok(Vec::new());
    };
    let mut out = Vec::new();
    if spec.block_kinds.contains(&body.kind()) {
        let mut cursor = body.walk();
        for child in body.named_children(&mut cursor) {
            if COMMENT_KINDS.contains(&child.kind()) {
                continue;
            }
            out.push((text_of(child, &re.source), re.rebase(child.start_byte())));
        }
    } else {
        // Expression-bodied closures: the body is the single statement.
        out.push((text_of(body, &re.source), re.rebase(body.start_byte())));
    }
    Ok(out)
}

fn first_function_node<'a>(node: Node<'a>, spec: &GrammarSpec) -> Option<Node<'a>> {
    if spec.function_kinds.contains(&node.kind()) {
        return Some(node);
    }
    let mut cursor = node.walk();
    for child in node.children(&mut cursor) {
        if let Some(found) = first_function_node(child, spec) {
            return Some(found);
        }
    }
    None
}

/// Structural fingerprint of one AST subtree. Identifier leaves are
/// abstracted to a placeholder so the fingerprint is rename-invariant;
/// literal leaves keep their text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SubtreeFingerprint {
    pub hash: u64,
    pub depth: u32,
}

/// Multiset of subtree fingerprints.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SubtreeMultiset {
    counts: HashMap<SubtreeFingerprint, usize>,
    total: usize,
}

impl SubtreeMultiset {
    fn insert(&mut self, fp: SubtreeFingerprint) {
        *self.counts.entry(fp).or_insert(0) += 1;
        self.total += 1;
    }

    pub fn total(&self) -> usize {
        self.total
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    pub fn count(&self, fp: &SubtreeFingerprint) -> usize {
        self.counts.get(fp).copied().unwrap_or(0)
    }

    /// Size of the multiset intersection.
    pub fn intersection_total(&self, other: &SubtreeMultiset) -> usize {
        self.counts
            .iter()
            .map(|(fp, n)| (*n).min(other.count(fp)))
            .sum()
    }

    /// True when every fingerprint of `self` occurs at least as often in
    /// `other`.
    pub fn is_subset_of(&self, other: &SubtreeMultiset) -> bool {
        self.counts.iter().all(|(fp, n)| other.count(fp) >= *n)
    }

    /// Removes one instance of the deepest fingerprint (the file wrapper).
    pub fn without_root(mut self) -> SubtreeMultiset {
        if let Some(root) = self.counts.keys().max_by_key(|fp| fp.depth).copied() {
            let n = self.counts.get_mut(&root).expect("present");
            *n -= 1;
            if *n == 0 {
                self.counts.remove(&root);
            }
            self.total -= 1;
        }
        self
    }
}

pub const DEFAULT_MIN_DEPTH: u32 = 2;

/// Fingerprints of all subtrees with depth >= `min_depth` (leaves have
/// depth 1). Deterministic: no randomized hash seeds.
pub fn ast_subtrees(
    source: &str,
    language: Language,
    min_depth: u32,
) -> Result<SubtreeMultiset, ParseError> {
    let tree = parse_tree(source, language)?;
    let mut set = SubtreeMultiset::default();
    fingerprint(tree.root_node(), source, min_depth, &mut set);
    Ok(set)
}

/// True when the grammar recognized the whole input without error nodes.
pub fn parses_cleanly(source: &str, language: Language) -> bool {
    match parse_tree(source, language) {
        Ok(tree) => !tree.root_node().has_error(),
        Err(_) => false,
    }
}

/// Completes a bare function snippet into a standalone compilation unit.
/// Java methods need a class wrapper; everything else parses as-is.
pub fn wrap_snippet(source: &str, language: Language) -> String {
    match language {
        Language::Java
            if !source.trim_start().starts_with("class")
                && !source.trim_start().starts_with("public class") =>
        {
            format!("class __W {{ {source} }}")
        }
        _ => source.to_string(),
    }
}

/// [`parses_cleanly`] over a wrapped snippet.
pub fn snippet_parses(source: &str, language: Language) -> bool {
    parses_cleanly(&wrap_snippet(source, language), language)
}

/// Checks that a function signature is well-formed by completing it into a
/// minimal definition and parsing that probe.
pub fn signature_parses(signature: &str, language: Language) -> bool {
    let sig = signature.trim();
    if sig.is_empty() {
        return false;
    }
    let probe = match language {
        Language::Rust | Language::C => format!("{sig} {{ }}"),
        Language::Java => format!("class __W {{ {sig} {{ }} }}"),
        Language::Python => format!("{sig}\n    pass\n"),
    };
    parses_cleanly(&probe, language)
}

fn fingerprint(node: Node, source: &str, min_depth: u32, out: &mut SubtreeMultiset) -> (u64, u32) {
    let kind = node.kind();
    let mut payload: Vec<u8> = Vec::new();
    let mut depth = 1u32;
    let mut has_named_child = false;

    let mut cursor = node.walk();
    for child in node.children(&mut cursor) {
        if COMMENT_KINDS.contains(&child.kind()) {
            continue;
        }
        if child.is_named() {
            has_named_child = true;
            let (h, d) = fingerprint(child, source, min_depth, out);
            payload.extend_from_slice(&h.to_le_bytes());
            depth = depth.max(d + 1);
        } else {
            // Anonymous tokens (operators, keywords) shape the subtree too.
            payload.extend_from_slice(child.kind().as_bytes());
            payload.push(0x1e);
        }
    }

    if !has_named_child {
        if kind.contains("identifier") {
            payload.extend_from_slice(b"<id>");
        } else {
            payload.extend_from_slice(&source.as_bytes()[node.start_byte()..node.end_byte()]);
        }
    }

    let mut bytes = Vec::with_capacity(kind.len() + 1 + payload.len());
    bytes.extend_from_slice(kind.as_bytes());
    bytes.push(0x1f);
    bytes.extend_from_slice(&payload);
    let hash = fnv1a64(&bytes);

    if node.is_named() && !COMMENT_KINDS.contains(&kind) && depth >= min_depth {
        out.insert(SubtreeFingerprint { hash, depth });
    }
    (hash, depth)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_functions_in_order() {
        let src = "fn f() { 1; }\nfn g() { 2; }\n";
        let report = parse_functions(src, Language::Rust).unwrap();
        let names: Vec<&str> = report.functions.iter().map(|f| f.name.as_str()).collect();
        assert_eq!(names, ["f", "g"]);
        assert!(report.diagnostics.is_empty());
    }

    #[test]
    fn empty_file_has_no_functions() {
        let report = parse_functions("", Language::Rust).unwrap();
        assert!(report.functions.is_empty());
    }

    #[test]
    fn nested_closure_is_reported_separately() {
        let src = "fn outer() {\n    let add = |x: i32| x + 1;\n    add(2);\n}\n";
        let report = parse_functions(src, Language::Rust).unwrap();
        let names: Vec<&str> = report.functions.iter().map(|f| f.name.as_str()).collect();
        assert_eq!(names, ["outer", "add"]);
        // Nested range is inside the parent's.
        let outer = &report.functions[0];
        let inner = &report.functions[1];
        assert!(outer.byte_range.0 < inner.byte_range.0);
        assert!(inner.byte_range.1 < outer.byte_range.1);
    }

    #[test]
    fn sibling_ranges_do_not_overlap() {
        let src = "fn f() { 1; }\nfn g() { 2; }\n";
        let fns = parse_functions(src, Language::Rust).unwrap().functions;
        assert!(fns[0].byte_range.1 <= fns[1].byte_range.0);
    }

    #[test]
    fn c_function_name_via_declarator() {
        let src = "static unsigned int *hash_init(int n) { return 0; }\n";
        let fns = parse_functions(src, Language::C).unwrap().functions;
        assert_eq!(fns[0].name, "hash_init");
        assert!(fns[0].signature_text.contains("hash_init"));
    }

    #[test]
    fn java_method_and_scope() {
        let src = "class Digest { void update(int b) { feed(b); } }";
        let fns = parse_functions(src, Language::Java).unwrap().functions;
        assert_eq!(fns[0].name, "update");
        assert_eq!(fns[0].scope, "Digest");
    }

    #[test]
    fn python_nested_def_and_scope() {
        let src = "class Hasher:\n    def digest(self):\n        def inner():\n            return 1\n        return inner()\n";
        let fns = parse_functions(src, Language::Python).unwrap().functions;
        let names: Vec<&str> = fns.iter().map(|f| f.name.as_str()).collect();
        assert_eq!(names, ["digest", "inner"]);
        assert_eq!(fns[0].scope, "Hasher");
    }

    #[test]
    fn rust_mod_scope() {
        let src = "mod hash {\n    mod core {\n        fn mix() {}\n    }\n}\n";
        let fns = parse_functions(src, Language::Rust).unwrap().functions;
        assert_eq!(fns[0].scope, "hash::core");
    }

    #[test]
    fn body_text_matches_byte_range() {
        let src = "fn f(a: u32) -> u32 { a + 1 }\n";
        let fns = parse_functions(src, Language::Rust).unwrap().functions;
        let f = &fns[0];
        assert_eq!(f.definition_text(), &src[f.byte_range.0..f.byte_range.1]);
        assert!(f.signature_text.starts_with("fn f"));
        assert!(f.body_text.starts_with('{'));
    }

    #[test]
    fn broken_input_reports_diagnostics_and_recovers() {
        let src = "fn ok() { 1; }\nfn broken( { \nfn also_ok() { 2; }\n";
        let report = parse_functions(src, Language::Rust).unwrap();
        assert!(!report.diagnostics.is_empty());
        assert!(report.functions.iter().any(|f| f.name == "ok"));
    }

    fn single_fn(src: &str, lang: Language) -> FunctionDef {
        parse_functions(src, lang).unwrap().functions.remove(0)
    }

    #[test]
    fn calls_in_source_order() {
        let def = single_fn("fn f() { g(1); h(x.y); }", Language::Rust);
        let calls = extract_call_statements(&def).unwrap();
        let names: Vec<&str> = calls.iter().map(|c| c.callee_name.as_str()).collect();
        assert_eq!(names, ["g", "h"]);
        assert_eq!(calls[0].statement_text, "g(1);");
        assert_eq!(calls[1].statement_text, "h(x.y);");
        assert!(calls[0].byte_offset < calls[1].byte_offset);
    }

    #[test]
    fn no_calls_empty_result() {
        let def = single_fn("fn f() { let a = 1; }", Language::Rust);
        assert!(extract_call_statements(&def).unwrap().is_empty());
    }

    #[test]
    fn chained_calls_yield_both_callees() {
        let def = single_fn("fn f() { a.b(c).d(e); }", Language::Rust);
        let calls = extract_call_statements(&def).unwrap();
        let names: Vec<&str> = calls.iter().map(|c| c.callee_name.as_str()).collect();
        assert_eq!(names, ["b", "d"]);
        let offsets: Vec<usize> = calls.iter().map(|c| c.byte_offset).collect();
        assert!(offsets[0] < offsets[1], "offsets: {offsets:?}");
        // Both calls share the statement.
        assert_eq!(calls[0].statement_text, "a.b(c).d(e);");
    }

    #[test]
    fn call_offsets_are_file_relative() {
        let src = "fn pre() {}\nfn f() { update_state(ctx, 64); }";
        let fns = parse_functions(src, Language::Rust).unwrap().functions;
        let calls = extract_call_statements(&fns[1]).unwrap();
        let off = calls[0].byte_offset;
        assert_eq!(&src[off..off + "update_state".len()], "update_state");
        assert!(off >= fns[1].byte_range.0 && off < fns[1].byte_range.1);
    }

    #[test]
    fn java_call_extraction_rebases_offsets() {
        let src = "class A { void f() { feed(1); sink.drain(2); } }";
        let fns = parse_functions(src, Language::Java).unwrap().functions;
        let calls = extract_call_statements(&fns[0]).unwrap();
        let names: Vec<&str> = calls.iter().map(|c| c.callee_name.as_str()).collect();
        assert_eq!(names, ["feed", "drain"]);
        let off = calls[0].byte_offset;
        assert_eq!(&src[off..off + 4], "feed");
    }

    #[test]
    fn scoped_call_name() {
        let def = single_fn("fn f() { hash::mix(1); }", Language::Rust);
        let calls = extract_call_statements(&def).unwrap();
        assert_eq!(calls[0].callee_name, "mix");
    }

    #[test]
    fn execution_statements_in_order() {
        let def = single_fn("fn f() { let a = 1; CONF.apply(a); }", Language::Rust);
        let stmts = extract_execution_statements(&def).unwrap();
        assert_eq!(stmts.len(), 2);
        assert_eq!(stmts[0].0, "let a = 1;");
        assert!(stmts[1].0.contains("CONF"));
        assert!(stmts[0].1 < stmts[1].1);
    }

    #[test]
    fn empty_body_has_no_statements() {
        let def = single_fn("fn f() {}", Language::Rust);
        assert!(extract_execution_statements(&def).unwrap().is_empty());
    }

    #[test]
    fn subtrees_deterministic_and_rename_invariant() {
        let a = ast_subtrees("fn f() { let x = 1; g(x); }", Language::Rust, 2).unwrap();
        let b = ast_subtrees("fn f() { let x = 1; g(x); }", Language::Rust, 2).unwrap();
        assert_eq!(a, b);
        let renamed = ast_subtrees("fn q() { let y = 1; h(y); }", Language::Rust, 2).unwrap();
        assert_eq!(a, renamed);
    }

    #[test]
    fn subtrees_distinguish_operators() {
        let plus = ast_subtrees("fn f() { let c = a + b; }", Language::Rust, 2).unwrap();
        let times = ast_subtrees("fn f() { let c = a * b; }", Language::Rust, 2).unwrap();
        assert_ne!(plus, times);
    }

    #[test]
    fn subtrees_keep_literals_verbatim() {
        let one = ast_subtrees("fn f() { g(1); }", Language::Rust, 2).unwrap();
        let two = ast_subtrees("fn f() { g(2); }", Language::Rust, 2).unwrap();
        assert_ne!(one, two);
    }

    #[test]
    fn subtrees_of_member_appear_in_containing_file() {
        let f = "fn f(a: u32) -> u32 { let b = a + 1; b }";
        let host = format!("fn other() {{ let q = 9; }}\n{f}\n");
        let part = ast_subtrees(f, Language::Rust, 2).unwrap().without_root();
        let whole = ast_subtrees(&host, Language::Rust, 2).unwrap();
        assert!(part.is_subset_of(&whole));
    }

    #[test]
    fn all_grammars_load() {
        for lang in Language::ALL {
            assert!(parse_tree("", lang).is_ok());
        }
    }

    #[test]
    fn signature_probe() {
        assert!(signature_parses("fn f(x: u32) -> u32", Language::Rust));
        assert!(signature_parses(
            "static int mix(int a, int b)",
            Language::C
        ));
        assert!(signature_parses("public int update(int b)", Language::Java));
        assert!(signature_parses("def digest(self):", Language::Python));
        assert!(!signature_parses("fn f(((", Language::Rust));
        assert!(!signature_parses("", Language::Rust));
    }
}
