use std::fmt;

use serde::{Deserialize, Serialize};

use super::{Decision, SituationError};
use crate::kb::Situation;
use crate::reasoning::Policy;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepKind {
    SituationMatch,
    RuleActivation,
    ActApplication,
    Merge,
    EvidenceCombination,
    Decision,
}

impl fmt::Display for StepKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StepKind::SituationMatch => "situation-match",
            StepKind::RuleActivation => "rule-activation",
            StepKind::ActApplication => "act-application",
            StepKind::Merge => "merge",
            StepKind::EvidenceCombination => "evidence-combination",
            StepKind::Decision => "decision",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub kind: StepKind,
    pub reference: String,
    pub degree: f64,
    pub text: String,
}

/// Inputs needed to replay the computation that produced a trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "via", rename_all = "snake_case")]
pub enum TraceOrigin {
    Generalize { situation: Situation, threshold: f64 },
    Alternatives { situation: Situation, policy: Policy, mu_d: f64, theta: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplanationTrace {
    pub id: String,
    pub steps: Vec<TraceStep>,
    pub final_decision: String,
    pub origin: TraceOrigin,
}

impl ExplanationTrace {
    pub(crate) fn push(&mut self, kind: StepKind, reference: impl Into<String>, degree: f64, text: impl Into<String>) {
        self.steps.push(TraceStep { kind, reference: reference.into(), degree, text: text.into() });
    }

    /// Forward order, one line per step.
    pub fn render(&self) -> Vec<String> {
        render_steps(self.steps.iter())
    }
}

pub fn render_steps<'a>(steps: impl Iterator<Item = &'a TraceStep>) -> Vec<String> {
    steps
        .enumerate()
        .map(|(n, s)| format!("step {}: {} {} degree={:.4} - {}", n + 1, s.kind, s.reference, s.degree, s.text))
        .collect()
}

/// A decision together with the trace that justified it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoggedDecision {
    pub decision: Decision,
    pub trace: ExplanationTrace,
}

/// Append-only record of the decisions taken in a session.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DecisionLog {
    entries: Vec<LoggedDecision>,
}

impl DecisionLog {
    pub fn record(&mut self, decision: Decision, trace: ExplanationTrace) {
        self.entries.push(LoggedDecision { decision, trace });
    }

    /// Most recent entry for `decision_id`.
    pub fn find(&self, decision_id: &str) -> Option<&LoggedDecision> {
        self.entries.iter().rev().find(|e| e.decision.id == decision_id)
    }

    pub fn last(&self) -> Option<&LoggedDecision> {
        self.entries.last()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Explanation replays generalization backwards: final decision first, raw matches last.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Explanation {
    pub decision_id: String,
    pub steps: Vec<TraceStep>,
    pub lines: Vec<String>,
}

pub fn explain(decision_id: &str, log: &DecisionLog) -> Result<Explanation, SituationError> {
    let entry = log.find(decision_id).ok_or_else(|| SituationError::UnknownDecision(decision_id.to_string()))?;
    let steps: Vec<TraceStep> = entry.trace.steps.iter().rev().cloned().collect();
    Ok(Explanation { decision_id: decision_id.to_string(), lines: render_steps(steps.iter()), steps })
}
