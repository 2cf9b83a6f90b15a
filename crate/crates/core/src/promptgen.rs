//! Deterministic prompt construction and response code extraction.
//!
//! The translation prompt is markdown with a fixed section order:
//! instructions, chain-of-thought steps, the three knowledge sections,
//! source function, target signature, target dependencies. Section order is
//! part of the stable contract so runs stay comparable across versions.

use crate::lang::Language;
use crate::retrieval::KnowledgeBundle;
use crate::task::TranslationTask;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

/// Bumped whenever the rendered layout changes.
pub const TEMPLATE_VERSION: u32 = 1;

/// Default byte budget for error output embedded in repair prompts.
pub const DEFAULT_ERROR_BUDGET: usize = 8 * 1024;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PromptError {
    #[error("error text is empty")]
    EmptyErrorText,
    #[error("no content")]
    NoContent,
}

/// Rendered prompt plus a map from section name to byte range in `text`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptText {
    pub text: String,
    pub section_map: BTreeMap<String, (usize, usize)>,
}

impl PromptText {
    pub fn section(&self, name: &str) -> Option<&str> {
        self.section_map
            .get(name)
            .map(|&(start, end)| &self.text[start..end])
    }
}

/// A model reply; `extracted_code` is filled by [`extract_code`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LlmResponse {
    pub raw_text: String,
    pub extracted_code: Option<String>,
    pub finish_reason: String,
}

struct SectionWriter {
    text: String,
    map: BTreeMap<String, (usize, usize)>,
}

impl SectionWriter {
    fn new() -> Self {
        SectionWriter {
            text: String::new(),
            map: BTreeMap::new(),
        }
    }

    fn section(&mut self, name: &str, body: &str) {
        let start = self.text.len();
        self.text.push_str(body);
        if !body.ends_with('\n') {
            self.text.push('\n');
        }
        self.text.push('\n');
        self.map.insert(name.to_string(), (start, self.text.len()));
    }

    fn finish(self) -> PromptText {
        PromptText {
            text: self.text,
            section_map: self.map,
        }
    }
}

fn fence(language_tag: &str, code: &str) -> String {
    let trimmed = code.trim_end_matches('\n');
    format!("```{language_tag}\n{trimmed}\n```")
}

/// Builds the knowledge-augmented translation prompt for one task.
/// Deterministic: identical inputs render byte-identical prompts.
pub fn build_translation_prompt(task: &TranslationTask, bundle: &KnowledgeBundle) -> PromptText {
    let src = task.source_language.tag();
    let dst = task.target_language.tag();
    let mut w = SectionWriter::new();

    w.section(
        "instructions",
        &format!(
            "# Repository-Level Code Translation\n\
             \n\
             You are an expert {src}-to-{dst} software engineer migrating one function \
             into an existing {dst} repository.\n\
             Do not perform a simple one-to-one translation; instead, consider the \
             functional consistency of the code.\n\
             The translated function must integrate with the repository context given \
             below: use the listed dependencies exactly as declared there.\n\
             Return the complete translated function as a single fenced ```{dst}``` \
             code block at the end of your reply."
        ),
    );

    w.section(
        "steps",
        &format!(
            "## Translation Steps\n\
             \n\
             Translate the function step by step:\n\
             1. Confirm the functionality to be implemented by the current function.\n\
             2. Enumerate all used dependencies and local variables, and recite how each one \
             is used.\n\
             3. Distinguish the syntax differences between {src} and {dst} that affect this \
             function; drop checks the target language makes redundant.\n\
             4. Translate the function so it fits the target signature and repository context."
        ),
    );

    let mut dep_section = String::from("## Dependency Usage Examples\n");
    if bundle.dependency_examples.is_empty() {
        dep_section.push_str("\nnone\n");
    } else {
        for (i, example) in bundle.dependency_examples.iter().enumerate() {
            dep_section.push_str(&format!("\n### Dependency {}\n", i + 1));
            dep_section.push_str(&fence(dst, &example.dependency_code));
            dep_section.push('\n');
            if example.has_usage() {
                dep_section.push_str("usage:\n");
                dep_section.push_str(&fence(dst, &example.usage_example));
                dep_section.push('\n');
            } else {
                dep_section.push_str("usage: none available\n");
            }
        }
    }
    w.section("dependency_usage_examples", &dep_section);

    let mut samples_section = format!("## {dst} Code Samples\n");
    if bundle.code_samples.is_empty() {
        samples_section.push_str("\nnone available\n");
    } else {
        for (i, sample) in bundle.code_samples.iter().enumerate() {
            samples_section.push_str(&format!(
                "\n### Sample {} ({} / {})\n",
                i + 1,
                sample.project_name,
                sample.file_path
            ));
            samples_section.push_str(&fence(dst, &sample.function_text));
            samples_section.push('\n');
        }
    }
    w.section("code_samples", &samples_section);

    let mut pair_section = String::from("## Verified Translation Pair\n");
    match &bundle.translation_pair {
        Some(pair) => {
            pair_section.push_str(&format!("\nsource ({}):\n", pair.source_language));
            pair_section.push_str(&fence(pair.source_language.tag(), &pair.source_function));
            pair_section.push_str(&format!("\ntarget ({}):\n", pair.target_language));
            pair_section.push_str(&fence(pair.target_language.tag(), &pair.target_function));
            pair_section.push('\n');
        }
        None => pair_section.push_str("\nnone available\n"),
    }
    w.section("translation_pair", &pair_section);

    w.section(
        "source_function",
        &format!(
            "## Source Function ({src})\n\n{}",
            fence(src, &task.source_code)
        ),
    );

    w.section(
        "target_signature",
        &format!(
            "## Target Function Signature ({dst})\n\n{}",
            fence(dst, &task.target_signature)
        ),
    );

    let mut deps_section = String::from("## Target Dependencies\n\n");
    if task.dependencies.is_empty() {
        deps_section.push_str("none\n");
    } else {
        for dep in &task.dependencies {
            let scope = if dep.scope.is_empty() {
                "(project root)"
            } else {
                &dep.scope
            };
            deps_section.push_str(&format!("- {:?} `{}` in {}\n", dep.kind, dep.name, scope));
        }
    }
    w.section("target_dependencies", &deps_section);

    w.finish()
}

/// Which kind of failure the repair round is fixing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureKind {
    Compile,
    Test,
}

impl FailureKind {
    fn label(&self) -> &'static str {
        match self {
            FailureKind::Compile => "compilation error",
            FailureKind::Test => "functional failure (tests did not pass)",
        }
    }
}

/// Builds the self-debug prompt: the failed candidate, the verbatim error
/// output (tail-preserving within `budget_bytes`), the target signature, and
/// the dependency list. The knowledge bundle is omitted by default;
/// `bundle` re-attaches it.
pub fn build_repair_prompt(
    task: &TranslationTask,
    failed_code: &str,
    error_text: &str,
    kind: FailureKind,
    budget_bytes: usize,
    bundle: Option<&KnowledgeBundle>,
) -> Result<PromptText, PromptError> {
    if error_text.trim().is_empty() {
        return Err(PromptError::EmptyErrorText);
    }
    let dst = task.target_language.tag();
    let mut w = SectionWriter::new();

    w.section(
        "instructions",
        &format!(
            "# Code Repair\n\
             \n\
             The following {dst} function failed verification with a {}.\n\
             Use the error output to fix it. Keep the given target signature and \
             dependencies; do not change anything else in the repository.\n\
             Return the complete corrected function as a single fenced ```{dst}``` \
             code block.",
            kind.label()
        ),
    );

    w.section(
        "failed_candidate",
        &format!("## Failed Candidate\n\n{}", fence(dst, failed_code)),
    );

    w.section(
        "error_output",
        &format!(
            "## Error Output ({})\n\n{}",
            kind.label(),
            fence("", &truncate_tail(error_text, budget_bytes))
        ),
    );

    if let Some(bundle) = bundle {
        let reattached = build_translation_prompt(task, bundle);
        for name in [
            "dependency_usage_examples",
            "code_samples",
            "translation_pair",
        ] {
            if let Some(body) = reattached.section(name) {
                w.section(name, body.trim_end_matches('\n'));
            }
        }
    }

    w.section(
        "target_signature",
        &format!(
            "## Target Function Signature ({dst})\n\n{}",
            fence(dst, &task.target_signature)
        ),
    );

    let mut deps_section = String::from("## Target Dependencies\n\n");
    if task.dependencies.is_empty() {
        deps_section.push_str("none\n");
    } else {
        for dep in &task.dependencies {
            deps_section.push_str(&format!("- {:?} `{}`\n", dep.kind, dep.name));
            deps_section.push_str(&fence(dst, &dep.code));
            deps_section.push('\n');
        }
    }
    w.section("target_dependencies", &deps_section);

    Ok(w.finish())
}

/// Keeps the final `budget` bytes of the text; compiler summaries end with
/// the most actionable diagnostics.
fn truncate_tail(text: &str, budget: usize) -> String {
    if text.len() <= budget {
        return text.to_string();
    }
    let mut start = text.len() - budget;
    while !text.is_char_boundary(start) {
        start += 1;
    }
    format!("[... first {} bytes elided ...]\n{}", start, &text[start..])
}

/// Which fenced block to treat as the answer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtractMode {
    /// Chain-of-thought replies emit intermediate snippets; the final block
    /// is the answer by convention.
    #[default]
    LastBlock,
    /// For terse models that answer first and explain after.
    FirstBlock,
}

/// Pulls the candidate code out of a model reply: the last fenced block
/// tagged with the target language, else the last untagged fenced block,
/// else the whole reply trimmed.
pub fn extract_code(
    response_text: &str,
    target_language: Language,
    mode: ExtractMode,
) -> Result<String, PromptError> {
    if response_text.trim().is_empty() {
        return Err(PromptError::NoContent);
    }
    let blocks = fenced_blocks(response_text);
    let tagged: Vec<&FencedBlock> = blocks
        .iter()
        .filter(|b| {
            b.tag
                .as_deref()
                .map(|t| Language::from_tag(t).ok() == Some(target_language))
                .unwrap_or(false)
        })
        .collect();
    let untagged: Vec<&FencedBlock> = blocks.iter().filter(|b| b.tag.is_none()).collect();

    let pick = |list: &[&FencedBlock]| -> Option<String> {
        let chosen = match mode {
            ExtractMode::LastBlock => list.last(),
            ExtractMode::FirstBlock => list.first(),
        };
        chosen.map(|b| b.body.clone())
    };

    Ok(pick(&tagged)
        .or_else(|| pick(&untagged))
        .unwrap_or_else(|| response_text.trim().to_string()))
}

struct FencedBlock {
    tag: Option<String>,
    body: String,
}

fn fenced_blocks(text: &str) -> Vec<FencedBlock> {
    let mut blocks = Vec::new();
    let mut open: Option<(Option<String>, Vec<&str>)> = None;
    for line in text.lines() {
        let trimmed = line.trim_start();
        if trimmed.starts_with("```") {
            match open.take() {
                Some((tag, body_lines)) => {
                    blocks.push(FencedBlock {
                        tag,
                        body: body_lines.join("\n"),
                    });
                }
                None => {
                    let info = trimmed.trim_start_matches('`').trim();
                    let tag = info
                        .split_whitespace()
                        .next()
                        .map(|s| s.to_string())
                        .filter(|s| !s.is_empty());
                    open = Some((tag, Vec::new()));
                }
            }
            continue;
        }
        if let Some((_, body_lines)) = open.as_mut() {
            body_lines.push(line);
        }
    }
    // Truncated replies often end inside a fence; salvage the open block.
    if let Some((tag, body_lines)) = open {
        if !body_lines.is_empty() {
            blocks.push(FencedBlock {
                tag,
                body: body_lines.join("\n"),
            });
        }
    }
    blocks
}
