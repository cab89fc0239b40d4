use serde::{Deserialize, Serialize};

use super::grammar::LAST_DECISION;
use super::{DialogAct, DialogKind, LpError};
use crate::kb::{Effect, ImpactRule, KnowledgeBase};
use crate::reasoning::Policy;

/// Languages with synthesis templates.
pub const SYNTH_LANGUAGES: &[&str] = &["en", "es"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermDegree {
    pub term: String,
    pub degree: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanLine {
    pub decision: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "code", rename_all = "snake_case")]
pub enum Clarification {
    UnknownWords { words: Vec<String> },
    Ambiguous { surface: String, options: Vec<String> },
    NoParse,
    UnknownTerm { variable: String, term: String },
    UnknownDecision { decision: String },
    NoDecisionYet,
    NoAlternatives,
    UnsupportedLanguage { language: String },
    Unavailable { detail: String },
}

/// Structured content to be realized as text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Response {
    Ack { variable: String, term: String },
    Answer { variable: String, degrees: Vec<TermDegree>, value: Option<f64> },
    Decision { decision: String, score: f64, impacts: Vec<ImpactRule>, policy: Policy },
    Plan { steps: Vec<PlanLine> },
    Explanation { decision: String, lines: Vec<String> },
    Command { act: String, conformity: f64 },
    /// Canonical utterance for a dialog act.
    Echo { act: DialogAct },
    Clarification(Clarification),
}

struct Templates {
    ack: &'static str,
    answer: &'static str,
    answer_unknown: &'static str,
    decision: &'static str,
    plan: &'static str,
    plan_empty: &'static str,
    explanation: &'static str,
    command: &'static str,
    no_impacts: &'static str,
    unknown_words: &'static str,
    ambiguous: &'static str,
    no_parse: &'static str,
    unknown_term: &'static str,
    unknown_decision: &'static str,
    no_decision_yet: &'static str,
    no_alternatives: &'static str,
    unsupported_language: &'static str,
    unavailable: &'static str,
}

const EN: Templates = Templates {
    ack: "Noted: {} is {}.",
    answer: "{}: {}; crisp value {}.",
    answer_unknown: "{} has no value yet.",
    decision: "Decision: {} ({}), score {}.",
    plan: "Plan for {} steps: {}.",
    plan_empty: "Plan for 0 steps: nothing to do.",
    explanation: "Explanation of {}:",
    command: "Applying {} at conformity {}; it takes effect on the next tick.",
    no_impacts: "no change",
    unknown_words: "I do not know the words: {}. Please rephrase.",
    ambiguous: "Which meaning of \"{}\" do you intend: {}?",
    no_parse: "I could not understand that. Try: set demand to high, what is stock, decide, plan 3 steps, why last decision.",
    unknown_term: "{} has no term {}.",
    unknown_decision: "There is no decision {}.",
    no_decision_yet: "No decision has been made yet.",
    no_alternatives: "No elementary act is available for this situation.",
    unsupported_language: "Language {} is not supported.",
    unavailable: "That request could not be completed: {}.",
};

const ES: Templates = Templates {
    ack: "Entendido: {} es {}.",
    answer: "{}: {}; valor nítido {}.",
    answer_unknown: "{} todavía no tiene valor.",
    decision: "Decisión: {} ({}), puntuación {}.",
    plan: "Plan de {} pasos: {}.",
    plan_empty: "Plan de 0 pasos: nada que hacer.",
    explanation: "Explicación de {}:",
    command: "Aplicando {} con conformidad {}; surte efecto en el próximo ciclo.",
    no_impacts: "sin cambios",
    unknown_words: "No conozco las palabras: {}. Por favor, reformule.",
    ambiguous: "¿Qué significado de \"{}\" quiere decir: {}?",
    no_parse: "No entendí. Pruebe: fija demanda a alta, cuál es existencias, decide, planifica 3 pasos, por qué última decisión.",
    unknown_term: "{} no tiene el término {}.",
    unknown_decision: "No existe la decisión {}.",
    no_decision_yet: "Todavía no se ha tomado ninguna decisión.",
    no_alternatives: "No hay ningún acto elemental disponible para esta situación.",
    unsupported_language: "El idioma {} no está soportado.",
    unavailable: "No se pudo completar la petición: {}.",
};

fn templates(language: &str) -> Option<&'static Templates> {
    match language {
        "en" => Some(&EN),
        "es" => Some(&ES),
        _ => None,
    }
}

/// Substitutes `{}` placeholders left to right.
fn fill(template: &str, args: &[&str]) -> String {
    let mut out = String::with_capacity(template.len() + 32);
    let mut args = args.iter();
    let mut rest = template;
    while let Some(pos) = rest.find("{}") {
        out.push_str(&rest[..pos]);
        out.push_str(args.next().copied().unwrap_or_default());
        rest = &rest[pos + 2..];
    }
    out.push_str(rest);
    out
}

fn missing(concept: &str, language: &str) -> LpError {
    LpError::MissingSurfaceForm { concept: concept.to_string(), language: language.to_string() }
}

/// Preferred surface form of a content concept in `language`: entries whose
/// primary concept it is come first, then less ambiguous ones, then
/// document order.
pub fn surface_form(concept: &str, language: &str, kb: &KnowledgeBase) -> Result<String, LpError> {
    kb.dictionary
        .iter()
        .enumerate()
        .filter(|(_, e)| e.language == language && e.role().is_none())
        .filter(|(_, e)| e.senses.iter().any(|s| s.concept == concept))
        .min_by_key(|(i, e)| (e.concept != concept, e.senses.len(), *i))
        .map(|(_, e)| e.surface.clone())
        .ok_or_else(|| missing(concept, language))
}

fn keyword_form(role: &str, language: &str, kb: &KnowledgeBase) -> Result<String, LpError> {
    kb.dictionary
        .iter()
        .find(|e| e.language == language && e.role() == Some(role))
        .map(|e| e.surface.clone())
        .ok_or_else(|| missing(role, language))
}

fn decision_form(decision: &str, language: &str, kb: &KnowledgeBase) -> Result<String, LpError> {
    decision
        .split('+')
        .map(|id| surface_form(id, language, kb))
        .collect::<Result<Vec<_>, _>>()
        .map(|parts| parts.join(" + "))
}

/// Canonical utterance that parses back to `act`.
pub fn echo(act: &DialogAct, language: &str, kb: &KnowledgeBase) -> Result<String, LpError> {
    let kw = |role: &str| keyword_form(role, language, kb);
    let arg = |role: &str| act.get(role).ok_or(LpError::NoParse);
    let words = match act.kind {
        DialogKind::Assert => vec![
            kw("SET")?,
            surface_form(arg("variable")?, language, kb)?,
            kw("TO")?,
            surface_form(arg("term")?, language, kb)?,
        ],
        DialogKind::Query => vec![kw("WHAT")?, kw("IS")?, surface_form(arg("variable")?, language, kb)?],
        DialogKind::Why => match arg("decision")? {
            LAST_DECISION => vec![kw("WHY")?, kw("LAST")?, kw("DECISION")?],
            id if id.contains('+') => vec![kw("WHY")?, id.to_string()],
            id => vec![kw("WHY")?, surface_form(id, language, kb)?],
        },
        DialogKind::Decide => vec![kw("DECIDE")?],
        DialogKind::Plan => vec![kw("PLAN")?, arg("horizon")?.to_string(), kw("STEPS")?],
        DialogKind::Command => vec![kw("APPLY")?, surface_form(arg("act")?, language, kb)?],
    };
    Ok(words.join(" "))
}

fn impacts_form(impacts: &[ImpactRule], t: &Templates, language: &str, kb: &KnowledgeBase) -> String {
    if impacts.is_empty() {
        return t.no_impacts.to_string();
    }
    impacts
        .iter()
        .map(|i| {
            // plant variables without a lexicon entry keep their id
            let name = surface_form(&i.target, language, kb).unwrap_or_else(|_| i.target.clone());
            match i.effect {
                Effect::Delta(d) => format!("{name} {d:+}"),
                Effect::Set(s) => format!("{name} = {s}"),
            }
        })
        .collect::<Vec<_>>()
        .join(", ")
}

/// Realizes `response` in `language`.
pub fn synthesize(response: &Response, language: &str, kb: &KnowledgeBase) -> Result<String, LpError> {
    let t = templates(language)
        .filter(|_| kb.supports_language(language))
        .ok_or_else(|| LpError::UnsupportedLanguage(language.to_string()))?;
    let form = |concept: &str| surface_form(concept, language, kb);
    Ok(match response {
        Response::Ack { variable, term } => fill(t.ack, &[&form(variable)?, &form(term)?]),
        Response::Answer { variable, degrees, value } => match value {
            Some(v) => {
                let parts = degrees
                    .iter()
                    .map(|d| Ok(format!("{} {:.2}", form(&d.term)?, d.degree)))
                    .collect::<Result<Vec<_>, LpError>>()?;
                fill(t.answer, &[&form(variable)?, &parts.join(", "), &format!("{v:.2}")])
            }
            None => fill(t.answer_unknown, &[&form(variable)?]),
        },
        Response::Decision { decision, score, impacts, .. } => fill(
            t.decision,
            &[&decision_form(decision, language, kb)?, &impacts_form(impacts, t, language, kb), &format!("{score:.2}")],
        ),
        Response::Plan { steps } if steps.is_empty() => t.plan_empty.to_string(),
        Response::Plan { steps } => {
            let items = steps
                .iter()
                .enumerate()
                .map(|(n, s)| Ok(format!("{}. {} ({:.2})", n + 1, decision_form(&s.decision, language, kb)?, s.score)))
                .collect::<Result<Vec<_>, LpError>>()?;
            fill(t.plan, &[&steps.len().to_string(), &items.join("; ")])
        }
        Response::Explanation { decision, lines } => {
            let mut text = fill(t.explanation, &[&decision_form(decision, language, kb)?]);
            for line in lines {
                text.push('\n');
                text.push_str(line);
            }
            text
        }
        Response::Command { act, conformity } => fill(t.command, &[&form(act)?, &format!("{conformity:.2}")]),
        Response::Echo { act } => echo(act, language, kb)?,
        Response::Clarification(c) => match c {
            Clarification::UnknownWords { words } => fill(t.unknown_words, &[&words.join(", ")]),
            Clarification::Ambiguous { surface, options } => {
                // options may come from other thematic bases without a local form
                let shown: Vec<String> =
                    options.iter().map(|o| form(o).map(|f| format!("{f} ({o})")).unwrap_or_else(|_| o.clone())).collect();
                fill(t.ambiguous, &[surface, &shown.join(", ")])
            }
            Clarification::NoParse => t.no_parse.to_string(),
            Clarification::UnknownTerm { variable, term } => fill(t.unknown_term, &[variable, term]),
            Clarification::UnknownDecision { decision } => fill(t.unknown_decision, &[decision]),
            Clarification::NoDecisionYet => t.no_decision_yet.to_string(),
            Clarification::NoAlternatives => t.no_alternatives.to_string(),
            Clarification::UnsupportedLanguage { language } => fill(t.unsupported_language, &[language]),
            Clarification::Unavailable { detail } => fill(t.unavailable, &[detail]),
        },
    })
}
