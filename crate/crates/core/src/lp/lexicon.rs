use serde::{Deserialize, Serialize};

use super::grammar::SlotKind;
use super::{DialogContext, LpError, CONFIDENCE_DOMAIN, CONFIDENCE_SLOT};
use crate::kb::{DictionaryEntry, KnowledgeBase, Sense};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub surface: String,
    pub position: usize,
    pub language: String,
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || matches!(c, '_' | '+' | '-')
}

fn split_words(text: &str) -> Vec<String> {
    text.split(|c: char| !is_word_char(c)).filter(|w| !w.is_empty()).map(str::to_lowercase).collect()
}

/// Splits on whitespace and punctuation and lowercases. `_`, `+` and `-`
/// stay inside tokens so identifiers survive.
pub fn tokenize(utterance: &str, language: &str, kb: &KnowledgeBase) -> Result<Vec<Token>, LpError> {
    if !kb.supports_language(language) {
        return Err(LpError::UnsupportedLanguage(language.to_string()));
    }
    Ok(split_words(utterance)
        .into_iter()
        .enumerate()
        .map(|(position, surface)| Token { surface, position, language: language.to_string() })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Candidate {
    /// Grammar keyword role such as `SET` or `WHAT_SHOULD_I_DO`.
    Keyword { role: String },
    /// Content word with every sense the dictionary lists for it.
    Senses { senses: Vec<Sense> },
    Number { value: u32 },
    /// Act id, or `+`-joined act ids, written literally.
    Identifier { id: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LexicalUnit {
    pub surface: String,
    pub start: usize,
    pub len: usize,
    pub candidate: Candidate,
}

impl LexicalUnit {
    pub fn role(&self) -> Option<&str> {
        match &self.candidate {
            Candidate::Keyword { role } => Some(role),
            _ => None,
        }
    }
}

fn is_identifier(token: &str, kb: &KnowledgeBase) -> bool {
    token.split('+').all(|part| kb.act(part).is_some())
}

/// Maps tokens to dictionary candidates, longest multi-word match first.
///
/// Unknown content tokens are collected into [`LpError::LexicalGap`].
pub fn lexical_lookup(tokens: &[Token], language: &str, kb: &KnowledgeBase) -> Result<Vec<LexicalUnit>, LpError> {
    let entries: Vec<(Vec<String>, &DictionaryEntry)> = kb
        .dictionary
        .iter()
        .filter(|e| e.language == language)
        .map(|e| (split_words(&e.surface), e))
        .filter(|(words, _)| !words.is_empty())
        .collect();
    let words: Vec<&str> = tokens.iter().map(|t| t.surface.as_str()).collect();

    let mut units = Vec::new();
    let mut gaps: Vec<String> = Vec::new();
    let mut i = 0;
    while i < words.len() {
        let matched: Vec<&(Vec<String>, &DictionaryEntry)> = entries
            .iter()
            .filter(|(w, _)| w.len() <= words.len() - i && w.iter().zip(&words[i..]).all(|(a, b)| a == b))
            .collect();
        let longest = matched.iter().map(|(w, _)| w.len()).max().unwrap_or(0);
        if longest > 0 {
            let hits: Vec<&DictionaryEntry> =
                matched.iter().filter(|(w, _)| w.len() == longest).map(|(_, e)| *e).collect();
            let candidate = match hits.iter().find_map(|e| e.role()) {
                Some(role) => Candidate::Keyword { role: role.to_string() },
                None => {
                    let mut senses: Vec<Sense> = Vec::new();
                    for s in hits.iter().flat_map(|e| &e.senses) {
                        if !senses.contains(s) {
                            senses.push(s.clone());
                        }
                    }
                    Candidate::Senses { senses }
                }
            };
            units.push(LexicalUnit { surface: words[i..i + longest].join(" "), start: i, len: longest, candidate });
            i += longest;
            continue;
        }
        let word = words[i];
        let candidate = if let Ok(value) = word.parse::<u32>() {
            Some(Candidate::Number { value })
        } else if is_identifier(word, kb) {
            Some(Candidate::Identifier { id: word.to_string() })
        } else {
            None
        };
        match candidate {
            Some(candidate) => units.push(LexicalUnit { surface: word.to_string(), start: i, len: 1, candidate }),
            None => {
                if !gaps.iter().any(|g| g == word) {
                    gaps.push(word.to_string());
                }
            }
        }
        i += 1;
    }
    if gaps.is_empty() {
        Ok(units)
    } else {
        Err(LpError::LexicalGap(gaps))
    }
}

/// Picks one sense for a word filling `slot`.
///
/// Senses from the active thematic domain are preferred; if that alone
/// leaves a single slot-compatible sense the confidence is 1.0. Otherwise
/// the slot's grammatical category decides, with confidence 0.8.
pub fn disambiguate(
    surface: &str,
    senses: &[Sense],
    slot: SlotKind,
    context: &DialogContext,
    kb: &KnowledgeBase,
) -> Result<(String, f64), LpError> {
    let fits = |s: &&Sense| slot.accepts(&s.concept, kb);
    if let [only] = senses {
        return if fits(&only) { Ok((only.concept.clone(), CONFIDENCE_DOMAIN)) } else { Err(LpError::NoParse) };
    }
    let in_domain: Vec<&Sense> = senses.iter().filter(|s| s.domain == context.domain).collect();
    let prior: Vec<&Sense> = if in_domain.is_empty() { senses.iter().collect() } else { in_domain };
    if let [only] = prior.as_slice() {
        if fits(only) {
            return Ok((only.concept.clone(), CONFIDENCE_DOMAIN));
        }
    }
    let mut fitting: Vec<&Sense> = prior.iter().copied().filter(fits).collect();
    if fitting.is_empty() {
        fitting = senses.iter().filter(fits).collect();
    }
    let mut concepts: Vec<String> = Vec::new();
    for s in fitting {
        if !concepts.contains(&s.concept) {
            concepts.push(s.concept.clone());
        }
    }
    match concepts.len() {
        0 => Err(LpError::NoParse),
        1 => Ok((concepts.remove(0), CONFIDENCE_SLOT)),
        _ => Err(LpError::Ambiguous { surface: surface.to_string(), senses: concepts }),
    }
}
