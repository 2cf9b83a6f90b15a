//! Language tags and per-language token tables.

use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

/// The languages with registered grammars.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Language {
    C,
    Java,
    Python,
    Rust,
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("unregistered language: {0}")]
pub struct UnknownLanguage(pub String);

impl Language {
    pub const ALL: [Language; 4] = [
        Language::C,
        Language::Java,
        Language::Python,
        Language::Rust,
    ];

    pub fn tag(&self) -> &'static str {
        match self {
            Language::C => "c",
            Language::Java => "java",
            Language::Python => "python",
            Language::Rust => "rust",
        }
    }

    /// Parses a language tag; common filename-style aliases are accepted.
    pub fn from_tag(tag: &str) -> Result<Language, UnknownLanguage> {
        match tag.to_ascii_lowercase().as_str() {
            "c" => Ok(Language::C),
            "java" => Ok(Language::Java),
            "python" | "py" => Ok(Language::Python),
            "rust" | "rs" => Ok(Language::Rust),
            other => Err(UnknownLanguage(other.to_string())),
        }
    }

    /// Source file extensions scanned when ingesting a project tree.
    pub fn extensions(&self) -> &'static [&'static str] {
        match self {
            Language::C => &["c", "h"],
            Language::Java => &["java"],
            Language::Python => &["py"],
            Language::Rust => &["rs"],
        }
    }

    pub fn from_extension(ext: &str) -> Option<Language> {
        Language::ALL
            .iter()
            .copied()
            .find(|l| l.extensions().contains(&ext))
    }

    /// Reserved words; these are the retrieval stop words and the tokens
    /// up-weighted by the keyword-weighted n-gram metric.
    pub fn keywords(&self) -> &'static [&'static str] {
        match self {
            Language::C => C_KEYWORDS,
            Language::Java => JAVA_KEYWORDS,
            Language::Python => PYTHON_KEYWORDS,
            Language::Rust => RUST_KEYWORDS,
        }
    }

    pub fn is_keyword(&self, token: &str) -> bool {
        self.keywords().contains(&token)
    }
}

impl fmt::Display for Language {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

static C_KEYWORDS: &[&str] = &[
    "auto", "break", "case", "char", "const", "continue", "default", "do", "double", "else",
    "enum", "extern", "float", "for", "goto", "if", "inline", "int", "long", "register",
    "restrict", "return", "short", "signed", "sizeof", "static", "struct", "switch", "typedef",
    "union", "unsigned", "void", "volatile", "while",
];

static JAVA_KEYWORDS: &[&str] = &[
    "abstract",
    "assert",
    "boolean",
    "break",
    "byte",
    "case",
    "catch",
    "char",
    "class",
    "const",
    "continue",
    "default",
    "do",
    "double",
    "else",
    "enum",
    "extends",
    "false",
    "final",
    "finally",
    "float",
    "for",
    "goto",
    "if",
    "implements",
    "import",
    "instanceof",
    "int",
    "interface",
    "long",
    "native",
    "new",
    "null",
    "package",
    "private",
    "protected",
    "public",
    "return",
    "short",
    "static",
    "strictfp",
    "super",
    "switch",
    "synchronized",
    "this",
    "throw",
    "throws",
    "transient",
    "true",
    "try",
    "var",
    "void",
    "volatile",
    "while",
];

static PYTHON_KEYWORDS: &[&str] = &[
    "and", "as", "assert", "async", "await", "break", "class", "continue", "def", "del", "elif",
    "else", "except", "False", "finally", "for", "from", "global", "if", "import", "in", "is",
    "lambda", "None", "nonlocal", "not", "or", "pass", "raise", "return", "True", "try", "while",
    "with", "yield",
];

static RUST_KEYWORDS: &[&str] = &[
    "as", "async", "await", "break", "const", "continue", "crate", "dyn", "else", "enum", "extern",
    "false", "fn", "for", "if", "impl", "in", "let", "loop", "match", "mod", "move", "mut", "pub",
    "ref", "return", "self", "Self", "static", "struct", "super", "trait", "true", "type",
    "unsafe", "use", "where", "while",
];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tag_round_trip() {
        for lang in Language::ALL {
            assert_eq!(Language::from_tag(lang.tag()).unwrap(), lang);
        }
        assert_eq!(Language::from_tag("rs").unwrap(), Language::Rust);
        assert!(Language::from_tag("cobol").is_err());
    }

    #[test]
    fn keywords_cover_spec_samples() {
        assert!(Language::Rust.is_keyword("fn"));
        assert!(Language::C.is_keyword("sizeof"));
        assert!(Language::Python.is_keyword("lambda"));
        assert!(!Language::Rust.is_keyword("update"));
    }

    #[test]
    fn extension_lookup() {
        assert_eq!(Language::from_extension("rs"), Some(Language::Rust));
        assert_eq!(Language::from_extension("h"), Some(Language::C));
        assert_eq!(Language::from_extension("txt"), None);
    }
}
