//! Controlled-natural-language interpreter and synthesizer.
//!
//! Interpretation runs in stages: tokenization, lexical lookup against the
//! KB dictionary (multi-word keywords by longest match), grammar matching
//! over keyword roles and typed slots, sense disambiguation (thematic domain
//! first, grammatical slot second) and concept identification. Synthesis
//! realizes fixed per-language templates with dictionary surface forms.

mod grammar;
mod lexicon;
mod synth;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use grammar::{parse_utterance, SlotKind, LAST_DECISION};
pub use lexicon::{disambiguate, lexical_lookup, tokenize, Candidate, LexicalUnit, Token};
pub use synth::{
    echo, surface_form, synthesize, Clarification, PlanLine, Response, TermDegree, SYNTH_LANGUAGES,
};

/// Confidence when the thematic domain alone leaves one sense.
pub const CONFIDENCE_DOMAIN: f64 = 1.0;
/// Confidence when the grammatical slot was needed to pick the sense.
pub const CONFIDENCE_SLOT: f64 = 0.8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("unsupported language `{0}`")]
    UnsupportedLanguage(String),
    #[error("unknown words: {}", .0.join(", "))]
    LexicalGap(Vec<String>),
    #[error("`{surface}` is ambiguous between {}", .senses.join(", "))]
    Ambiguous { surface: String, senses: Vec<String> },
    #[error("no grammar production matches")]
    NoParse,
    #[error("concept `{concept}` has no surface form in `{language}`")]
    MissingSurfaceForm { concept: String, language: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum DialogKind {
    Assert,
    Query,
    Why,
    Decide,
    Plan,
    Command,
}

impl fmt::Display for DialogKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DialogKind::Assert => "ASSERT",
            DialogKind::Query => "QUERY",
            DialogKind::Why => "WHY",
            DialogKind::Decide => "DECIDE",
            DialogKind::Plan => "PLAN",
            DialogKind::Command => "COMMAND",
        })
    }
}

/// Parsed proposition. Arguments hold concept ids, never surface forms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DialogAct {
    pub kind: DialogKind,
    pub arguments: BTreeMap<String, String>,
    pub confidence: f64,
    pub language: String,
}

impl DialogAct {
    pub fn new(kind: DialogKind, language: impl Into<String>) -> Self {
        Self { kind, arguments: BTreeMap::new(), confidence: 1.0, language: language.into() }
    }

    pub fn arg(mut self, role: &str, value: impl Into<String>) -> Self {
        self.arguments.insert(role.to_string(), value.into());
        self
    }

    pub fn get(&self, role: &str) -> Option<&str> {
        self.arguments.get(role).map(String::as_str)
    }

    /// Kind and arguments agree, confidence and language aside.
    pub fn same_meaning(&self, other: &DialogAct) -> bool {
        self.kind == other.kind && self.arguments == other.arguments
    }
}

/// Dialog state the interpreter may consult.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DialogContext {
    /// Active thematic domain used for prior sense filtering.
    pub domain: String,
}

impl DialogContext {
    pub fn new(domain: impl Into<String>) -> Self {
        Self { domain: domain.into() }
    }
}
