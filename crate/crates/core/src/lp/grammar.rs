//! Controlled grammar. Productions are fixed; only keyword surfaces are
//! localized (they live in the dictionary with a `role` attribute).
//!
//! ```text
//! utterance  := assert | query | why | decide | plan | command
//! assert     := SET var TO term
//! query      := WHAT IS var
//! why        := WHY (LAST DECISION | decision-id)
//! decide     := DECIDE | WHAT SHOULD I DO
//! plan       := PLAN NUMBER STEPS
//! command    := APPLY act-id
//! ```

use serde::{Deserialize, Serialize};

use super::lexicon::{disambiguate, lexical_lookup, tokenize, Candidate, LexicalUnit};
use super::{DialogAct, DialogContext, DialogKind, LpError};
use crate::kb::KnowledgeBase;

/// Argument value standing for the session's most recent decision.
pub const LAST_DECISION: &str = "$last";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlotKind {
    Variable,
    Term,
    Act,
    Decision,
    Number,
}

impl SlotKind {
    /// Whether `concept` belongs to this slot's grammatical category.
    pub fn accepts(self, concept: &str, kb: &KnowledgeBase) -> bool {
        match self {
            SlotKind::Variable => kb.variable(concept).is_some(),
            SlotKind::Term => kb.is_term(concept),
            SlotKind::Act => kb.act(concept).is_some(),
            SlotKind::Decision => concept.split('+').all(|p| kb.act(p).is_some()),
            SlotKind::Number => false,
        }
    }

    fn accepts_unit(self, unit: &LexicalUnit, kb: &KnowledgeBase) -> bool {
        match &unit.candidate {
            Candidate::Keyword { .. } => false,
            Candidate::Senses { senses } => senses.iter().any(|s| self.accepts(&s.concept, kb)),
            Candidate::Number { .. } => self == SlotKind::Number,
            Candidate::Identifier { id } => match self {
                SlotKind::Act => kb.act(id).is_some(),
                SlotKind::Decision => true,
                _ => false,
            },
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Sym {
    Kw(&'static str),
    Slot(SlotKind, &'static str),
}

use Sym::{Kw, Slot};

const PRODUCTIONS: &[(DialogKind, &[Sym])] = &[
    (DialogKind::Assert, &[Kw("SET"), Slot(SlotKind::Variable, "variable"), Kw("TO"), Slot(SlotKind::Term, "term")]),
    (DialogKind::Query, &[Kw("WHAT"), Kw("IS"), Slot(SlotKind::Variable, "variable")]),
    (DialogKind::Why, &[Kw("WHY"), Kw("LAST"), Kw("DECISION")]),
    (DialogKind::Why, &[Kw("WHY"), Slot(SlotKind::Decision, "decision")]),
    (DialogKind::Decide, &[Kw("DECIDE")]),
    (DialogKind::Decide, &[Kw("WHAT_SHOULD_I_DO")]),
    (DialogKind::Plan, &[Kw("PLAN"), Slot(SlotKind::Number, "horizon"), Kw("STEPS")]),
    (DialogKind::Command, &[Kw("APPLY"), Slot(SlotKind::Act, "act")]),
];

fn matches(pattern: &[Sym], units: &[LexicalUnit], kb: &KnowledgeBase) -> bool {
    pattern.len() == units.len()
        && pattern.iter().zip(units).all(|(sym, unit)| match sym {
            Kw(role) => unit.role() == Some(role),
            Slot(kind, _) => kind.accepts_unit(unit, kb),
        })
}

/// Full interpretation pipeline: tokenize, look up, match a production,
/// disambiguate the slot fillers and identify their concepts.
pub fn parse_utterance(
    utterance: &str,
    language: &str,
    kb: &KnowledgeBase,
    context: &DialogContext,
) -> Result<DialogAct, LpError> {
    let tokens = tokenize(utterance, language, kb)?;
    if tokens.is_empty() {
        return Err(LpError::NoParse);
    }
    let units = lexical_lookup(&tokens, language, kb)?;
    let (kind, pattern) = PRODUCTIONS.iter().find(|(_, p)| matches(p, &units, kb)).ok_or(LpError::NoParse)?;

    let mut act = DialogAct::new(*kind, language);
    if *kind == DialogKind::Why && pattern.len() == 3 {
        act.arguments.insert("decision".into(), LAST_DECISION.into());
    }
    for (sym, unit) in pattern.iter().zip(&units) {
        let Slot(slot, role) = sym else { continue };
        let (value, confidence) = match &unit.candidate {
            Candidate::Senses { senses } => disambiguate(&unit.surface, senses, *slot, context, kb)?,
            Candidate::Number { value } => (value.to_string(), 1.0),
            Candidate::Identifier { id } => (id.clone(), 1.0),
            Candidate::Keyword { .. } => unreachable!("keywords never fill slots"),
        };
        act.confidence = act.confidence.min(confidence);
        act.arguments.insert((*role).to_string(), value);
    }
    Ok(act)
}
