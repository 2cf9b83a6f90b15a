//! Evaluation formulas: CodeBLEU and its components, plus the
//! execution-based suite (Compilation@k, Pass@k, DSR@k, Repairable Ratio)
//! and aggregate reporting.

mod bleu;
mod dataflow;

pub use bleu::{bleu, code_tokens, weighted_bleu};
pub use dataflow::{dataflow_edges, dataflow_match, DataflowEdge};

use crate::codeparse::{ast_subtrees, wrap_snippet, DEFAULT_MIN_DEPTH};
use crate::lang::Language;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("argument out of range: {0}")]
    ArgRange(String),
    #[error("unsupported k = {0}: the pipeline records one generation round")]
    UnsupportedK(u64),
    #[error("empty record set")]
    EmptyRecords,
    #[error("repairable ratio undefined: nothing failed initially")]
    NotApplicable,
    #[error("invalid weights: {0}")]
    InvalidWeights(String),
    #[error("reference does not parse")]
    UnparseableReference,
    #[error("invalid record {task_id}: {message}")]
    InvalidRecord { task_id: String, message: String },
}

/// CodeBLEU component weights; non-negative and summing to one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CodeBleuWeights {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
}

impl Default for CodeBleuWeights {
    fn default() -> Self {
        CodeBleuWeights {
            alpha: 0.25,
            beta: 0.25,
            gamma: 0.25,
            delta: 0.25,
        }
    }
}

impl CodeBleuWeights {
    pub fn validate(&self) -> Result<(), MetricsError> {
        let parts = [self.alpha, self.beta, self.gamma, self.delta];
        if parts.iter().any(|w| *w < 0.0 || !w.is_finite()) {
            return Err(MetricsError::InvalidWeights(
                "components must be non-negative".to_string(),
            ));
        }
        let sum: f64 = parts.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(MetricsError::InvalidWeights(format!("sum is {sum}, not 1")));
        }
        Ok(())
    }
}

/// Per-task evaluation inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskRecord {
    pub task_id: String,
    pub language: Language,
    /// Samples generated for the task.
    pub n: u64,
    /// Samples passing all tests.
    pub c: u64,
    pub compiled_first: bool,
    pub passed_first: bool,
    pub passed_after_debug: bool,
    pub candidate_code: String,
    #[serde(default)]
    pub reference_code: Option<String>,
}

impl TaskRecord {
    fn validate(&self) -> Result<(), MetricsError> {
        let fail = |message: &str| MetricsError::InvalidRecord {
            task_id: self.task_id.clone(),
            message: message.to_string(),
        };
        if self.n < 1 {
            return Err(fail("n must be at least 1"));
        }
        if self.c > self.n {
            return Err(fail("c exceeds n"));
        }
        if self.passed_first && !self.compiled_first {
            return Err(fail("passed_first requires compiled_first"));
        }
        if self.passed_first && !self.passed_after_debug {
            return Err(fail("debug never un-passes a task"));
        }
        Ok(())
    }
}

/// Pass@k = 1 - C(n-c, k)/C(n, k). Exact binomial arithmetic when the
/// binomials fit in u128; the stable product form beyond that.
pub fn pass_at_k(n: u64, c: u64, k: u64) -> Result<f64, MetricsError> {
    if c > n {
        return Err(MetricsError::ArgRange(format!("c = {c} > n = {n}")));
    }
    if k < 1 || k > n {
        return Err(MetricsError::ArgRange(format!("k = {k} outside 1..={n}")));
    }
    if n - c < k {
        return Ok(1.0);
    }
    if let (Some(fail), Some(total)) = (binomial(n - c, k), binomial(n, k)) {
        return Ok(1.0 - fail as f64 / total as f64);
    }
    // Product form: 1 - prod_{i=0..k-1} (n-c-i)/(n-i).
    let mut ratio = 1.0f64;
    for i in 0..k {
        ratio *= (n - c - i) as f64 / (n - i) as f64;
    }
    Ok(1.0 - ratio)
}

fn binomial(n: u64, k: u64) -> Option<u128> {
    let k = k.min(n - k.min(n));
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.checked_mul((n - i) as u128)?;
        acc /= (i + 1) as u128;
    }
    Some(acc)
}

/// Fraction of tasks whose first candidate compiles. Only k = 1 is
/// supported: the pipeline records a single generation round.
pub fn compilation_at_k(records: &[TaskRecord], k: u64) -> Result<f64, MetricsError> {
    if k != 1 {
        return Err(MetricsError::UnsupportedK(k));
    }
    if records.is_empty() {
        return Err(MetricsError::EmptyRecords);
    }
    let compiled = records.iter().filter(|r| r.compiled_first).count();
    Ok(compiled as f64 / records.len() as f64)
}

/// Fraction of tasks passing at round zero or within k debug rounds.
pub fn dsr_at_k(records: &[TaskRecord], k: u64) -> Result<f64, MetricsError> {
    if k != 1 {
        return Err(MetricsError::UnsupportedK(k));
    }
    if records.is_empty() {
        return Err(MetricsError::EmptyRecords);
    }
    let succeeded = records
        .iter()
        .filter(|r| r.passed_first || r.passed_after_debug)
        .count();
    Ok(succeeded as f64 / records.len() as f64)
}

/// (DSR@1 - Pass@1) / (1 - Pass@1): the share of initially failing tasks
/// that self-debugging recovers. Undefined when nothing failed initially.
pub fn repairable_ratio(dsr1: f64, pass1: f64) -> Result<f64, MetricsError> {
    if !(0.0..=1.0).contains(&pass1) || !(0.0..=1.0).contains(&dsr1) || pass1 > dsr1 {
        return Err(MetricsError::ArgRange(format!(
            "need 0 <= pass1 <= dsr1 <= 1, got pass1 = {pass1}, dsr1 = {dsr1}"
        )));
    }
    if pass1 >= 1.0 {
        return Err(MetricsError::NotApplicable);
    }
    Ok((dsr1 - pass1) / (1.0 - pass1))
}

/// AST subtree agreement: |intersection| / |reference subtrees| over
/// rename-abstracted fingerprints. An unparseable candidate scores 0.
pub fn match_ast(
    candidate: &str,
    reference: &str,
    language: Language,
) -> Result<f64, MetricsError> {
    let ref_wrapped = wrap_snippet(reference, language);
    let ref_set = ast_subtrees(&ref_wrapped, language, DEFAULT_MIN_DEPTH)
        .map_err(|_| MetricsError::UnparseableReference)?;
    if !crate::codeparse::parses_cleanly(&ref_wrapped, language) {
        return Err(MetricsError::UnparseableReference);
    }
    let cand_wrapped = wrap_snippet(candidate, language);
    if !crate::codeparse::parses_cleanly(&cand_wrapped, language) {
        return Ok(0.0);
    }
    let cand_set = ast_subtrees(&cand_wrapped, language, DEFAULT_MIN_DEPTH)
        .map_err(|_| MetricsError::UnparseableReference)?;
    if ref_set.total() == 0 {
        return Ok(1.0);
    }
    Ok(cand_set.intersection_total(&ref_set) as f64 / ref_set.total() as f64)
}

/// CodeBLEU: alpha*BLEU + beta*weighted-BLEU + gamma*Match_ast +
/// delta*Match_df. When the dataflow term is excluded (reference has no
/// edges but the candidate does) the remaining weights renormalize.
pub fn codebleu(
    candidate: &str,
    reference: &str,
    language: Language,
    weights: &CodeBleuWeights,
) -> Result<f64, MetricsError> {
    weights.validate()?;
    let cand_tokens = code_tokens(candidate);
    let ref_tokens = code_tokens(reference);
    let bleu_score = bleu(&cand_tokens, &ref_tokens);
    let weighted_score = weighted_bleu(&cand_tokens, &ref_tokens, language);
    let ast_score = match_ast(candidate, reference, language)?;
    let df = dataflow_match(candidate, reference, language);

    let score = match df {
        Some(df_score) => {
            weights.alpha * bleu_score
                + weights.beta * weighted_score
                + weights.gamma * ast_score
                + weights.delta * df_score
        }
        None => {
            let remaining = weights.alpha + weights.beta + weights.gamma;
            if remaining <= 0.0 {
                0.0
            } else {
                (weights.alpha * bleu_score
                    + weights.beta * weighted_score
                    + weights.gamma * ast_score)
                    / remaining
            }
        }
    };
    Ok(score.clamp(0.0, 1.0))
}

/// Per-task breakdown inside a [`MetricsReport`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskScore {
    pub task_id: String,
    pub pass_at_1: f64,
    pub compiled_first: bool,
    pub passed_after_debug: bool,
    pub codebleu: Option<f64>,
    pub match_ast: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub diagnostics: Vec<String>,
}

/// Aggregate metrics over a task set. Match-based means cover the tasks
/// that carry a reference; `None` when no task does. The repairable ratio
/// is `None` when nothing failed initially.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub tasks: usize,
    pub compilation_at_1: f64,
    pub pass_at_1: f64,
    pub dsr_at_1: f64,
    pub repairable_ratio: Option<f64>,
    pub codebleu: Option<f64>,
    pub match_ast: Option<f64>,
    pub per_task: Vec<TaskScore>,
}

/// Aggregates every metric over the records; corpus CodeBLEU and Match_ast
/// are unweighted per-task means.
pub fn report(
    records: &[TaskRecord],
    weights: &CodeBleuWeights,
) -> Result<MetricsReport, MetricsError> {
    if records.is_empty() {
        return Err(MetricsError::EmptyRecords);
    }
    weights.validate()?;
    for r in records {
        r.validate()?;
    }

    let mut per_task = Vec::with_capacity(records.len());
    let mut pass_sum = 0.0;
    let mut cb_values = Vec::new();
    let mut ast_values = Vec::new();
    for r in records {
        let pass1 = pass_at_k(r.n, r.c, 1)?;
        pass_sum += pass1;
        let mut diagnostics = Vec::new();
        let (cb, ast) = match &r.reference_code {
            Some(reference) => {
                let cb = match codebleu(&r.candidate_code, reference, r.language, weights) {
                    Ok(v) => Some(v),
                    Err(e) => {
                        diagnostics.push(format!("codebleu: {e}"));
                        None
                    }
                };
                let ast = match match_ast(&r.candidate_code, reference, r.language) {
                    Ok(v) => Some(v),
                    Err(e) => {
                        diagnostics.push(format!("match_ast: {e}"));
                        None
                    }
                };
                (cb, ast)
            }
            None => {
                diagnostics.push("no reference; match-based metrics skipped".to_string());
                (None, None)
            }
        };
        if let Some(v) = cb {
            cb_values.push(v);
        }
        if let Some(v) = ast {
            ast_values.push(v);
        }
        per_task.push(TaskScore {
            task_id: r.task_id.clone(),
            pass_at_1: pass1,
            compiled_first: r.compiled_first,
            passed_after_debug: r.passed_first || r.passed_after_debug,
            codebleu: cb,
            match_ast: ast,
            diagnostics,
        });
    }

    let pass_at_1 = pass_sum / records.len() as f64;
    let dsr_at_1 = dsr_at_k(records, 1)?;
    let repairable = match repairable_ratio(dsr_at_1, pass_at_1) {
        Ok(v) => Some(v),
        Err(MetricsError::NotApplicable) => None,
        Err(e) => return Err(e),
    };
    let mean = |values: &[f64]| {
        if values.is_empty() {
            None
        } else {
            Some(values.iter().sum::<f64>() / values.len() as f64)
        }
    };

    Ok(MetricsReport {
        tasks: records.len(),
        compilation_at_1: compilation_at_k(records, 1)?,
        pass_at_1,
        dsr_at_1,
        repairable_ratio: repairable,
        codebleu: mean(&cb_values),
        match_ast: mean(&ast_values),
        per_task,
    })
}

/// Renders the aggregate row as an aligned text table, one technique row.
pub fn render_table(report: &MetricsReport) -> String {
    let fmt_pct = |v: f64| format!("{:.1}%", v * 100.0);
    let fmt_opt_pct = |v: Option<f64>| v.map(fmt_pct).unwrap_or_else(|| "n/a".to_string());
    let fmt_opt = |v: Option<f64>| {
        v.map(|x| format!("{x:.3}"))
            .unwrap_or_else(|| "n/a".to_string())
    };
    let headers = [
        "Compilation@1",
        "Pass@1",
        "DSR@1",
        "RR",
        "CodeBLEU",
        "Match_ast",
    ];
    let values = [
        fmt_pct(report.compilation_at_1),
        fmt_pct(report.pass_at_1),
        fmt_pct(report.dsr_at_1),
        fmt_opt_pct(report.repairable_ratio),
        fmt_opt(report.codebleu),
        fmt_opt(report.match_ast),
    ];
    let widths: Vec<usize> = headers
        .iter()
        .zip(&values)
        .map(|(h, v)| h.len().max(v.len()))
        .collect();
    let mut out = String::new();
    for (h, w) in headers.iter().zip(&widths) {
        out.push_str(&format!("{h:>w$}  ", w = w));
    }
    out.push('\n');
    for (v, w) in values.iter().zip(&widths) {
        out.push_str(&format!("{v:>w$}  ", w = w));
    }
    out.push('\n');
    out
}
