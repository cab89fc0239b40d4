use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::ServiceError;
use crate::inference::{defuzzify, infer, possibility, DefuzzMethod, PremiseVector};
use crate::kb::{FuzzySet, KnowledgeBase, Situation};
use crate::lp::{
    parse_utterance, synthesize, Clarification, DialogAct, DialogContext, DialogKind, LpError, PlanLine, Response,
    TermDegree, LAST_DECISION, SYNTH_LANGUAGES,
};
use crate::reasoning::{plan, select, Policy, ReasoningContext, ReasoningError};
use crate::sim::{observe, ClosedLoop, DisturbanceProfile, EnvironmentState, FullSituation, LoopConfig, TickRecord};
use crate::situational::{act_conformity, explain, Decision, DecisionLog, Explanation, DEFAULT_THRESHOLD};

/// Longest plan a single PLAN turn may request.
pub const MAX_PLAN_HORIZON: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SessionConfig {
    pub language: String,
    pub policy: Policy,
    pub theta: f64,
    pub disturbance: DisturbanceProfile,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            language: "en".into(),
            policy: Policy::Wisdom,
            theta: DEFAULT_THRESHOLD,
            disturbance: DisturbanceProfile::None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResponseKind {
    Answer,
    Decision,
    Plan,
    Explanation,
    Clarification,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnResponse {
    pub kind: ResponseKind,
    pub payload: Value,
    pub text: String,
    /// Dialog estimate used for this turn; 0 when the utterance did not parse.
    #[serde(rename = "mu_D")]
    pub mu_d: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub utterance: String,
    pub act: Option<DialogAct>,
    pub response: TurnResponse,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TickEvent {
    Tick {
        record: Box<TickRecord>,
        /// Same fields as this tick's row of the trajectory CSV.
        csv: Vec<String>,
    },
    Summary {
        ticks: usize,
        state: EnvironmentState,
        last_decision: Option<String>,
        /// Whether the setpoint variable ended inside its band.
        in_setpoint: Option<bool>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StateSnapshot {
    pub session: String,
    pub kb: String,
    pub kb_version: String,
    pub config: SessionConfig,
    pub state: EnvironmentState,
    pub situation: Situation,
    /// Operator assertions, variable to term.
    pub premises: BTreeMap<String, String>,
    pub last_decision: Option<Decision>,
    pub pending_override: Option<String>,
    pub history_len: usize,
    pub history: Vec<HistoryEntry>,
}

enum Outcome {
    Reply(ResponseKind, Response, Value),
    Clarify(Clarification),
}

fn clarify_lp(error: LpError) -> Clarification {
    match error {
        LpError::LexicalGap(words) => Clarification::UnknownWords { words },
        LpError::Ambiguous { surface, senses } => Clarification::Ambiguous { surface, options: senses },
        LpError::NoParse => Clarification::NoParse,
        LpError::UnsupportedLanguage(language) => Clarification::UnsupportedLanguage { language },
        e @ LpError::MissingSurfaceForm { .. } => Clarification::Unavailable { detail: e.to_string() },
    }
}

fn unavailable(error: impl ToString) -> Outcome {
    Outcome::Clarify(Clarification::Unavailable { detail: error.to_string() })
}

/// One operator conversation bound to a pinned KB snapshot and its own plant.
pub struct Session {
    id: String,
    kb_id: String,
    kb: Arc<KnowledgeBase>,
    config: SessionConfig,
    context: DialogContext,
    premises: BTreeMap<String, String>,
    sim: ClosedLoop,
    history: Vec<HistoryEntry>,
    decisions: DecisionLog,
}

impl Session {
    pub fn new(
        id: impl Into<String>,
        kb_id: impl Into<String>,
        kb: Arc<KnowledgeBase>,
        config: SessionConfig,
    ) -> Result<Self, ServiceError> {
        if !kb.supports_language(&config.language) || !SYNTH_LANGUAGES.contains(&config.language.as_str()) {
            return Err(ServiceError::UnsupportedLanguage(config.language));
        }
        if !(0.0..=1.0).contains(&config.theta) {
            return Err(ServiceError::InvalidOption(format!("theta {} outside [0, 1]", config.theta)));
        }
        let loop_config =
            LoopConfig { policy: config.policy, theta: config.theta, disturbance: config.disturbance.clone() };
        let sim = ClosedLoop::new(kb.clone(), EnvironmentState::initial(&kb.plant), loop_config)?;
        Ok(Self {
            id: id.into(),
            kb_id: kb_id.into(),
            context: DialogContext::new(kb.plant.domain.clone()),
            kb,
            config,
            premises: BTreeMap::new(),
            sim,
            history: Vec::new(),
            decisions: DecisionLog::default(),
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn kb_id(&self) -> &str {
        &self.kb_id
    }

    pub fn kb(&self) -> &Arc<KnowledgeBase> {
        &self.kb
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    pub fn history(&self) -> &[HistoryEntry] {
        &self.history
    }

    pub fn decisions(&self) -> &DecisionLog {
        &self.decisions
    }

    pub fn plant_state(&self) -> &EnvironmentState {
        self.sim.state()
    }

    /// Observed plant situation with operator assertions laid over it.
    pub fn current(&self) -> Result<FullSituation, ServiceError> {
        let state = self.sim.state().clone();
        let mut situation = observe(&self.kb, &state)?;
        situation.id = format!("current@{}", state.tick);
        for (var, term) in &self.premises {
            if let Some(set) = self.kb.term_set(var, term) {
                situation.assignments.insert(var.clone(), set.clone());
            }
        }
        Ok(FullSituation { situation, timestamp: state.tick, environment: state })
    }

    pub fn snapshot(&self) -> Result<StateSnapshot, ServiceError> {
        Ok(StateSnapshot {
            session: self.id.clone(),
            kb: self.kb_id.clone(),
            kb_version: self.kb.version.clone(),
            config: self.config.clone(),
            state: self.sim.state().clone(),
            situation: self.current()?.situation,
            premises: self.premises.clone(),
            last_decision: self.decisions.last().map(|d| d.decision.clone()),
            pending_override: self.sim.pending_override().map(str::to_string),
            history_len: self.history.len(),
            history: self.history.clone(),
        })
    }

    pub fn explanation(&self, decision_id: &str) -> Result<Explanation, ServiceError> {
        let id = match decision_id {
            LAST_DECISION | "last" => self.decisions.last().map(|d| d.decision.id.clone()).unwrap_or_default(),
            id => id.to_string(),
        };
        explain(&id, &self.decisions).map_err(|_| ServiceError::UnknownDecision(decision_id.to_string()))
    }

    /// Interprets one utterance and answers it. Failures of any stage come
    /// back as clarification responses.
    pub fn dialog_turn(&mut self, utterance: &str) -> TurnResponse {
        let (act, outcome) = match parse_utterance(utterance, &self.config.language, &self.kb, &self.context) {
            Ok(act) => {
                let outcome = self.respond(&act);
                (Some(act), outcome)
            }
            Err(e) => (None, Outcome::Clarify(clarify_lp(e))),
        };
        let mu_d = act.as_ref().map_or(0.0, |a| a.confidence);
        let response = self.render(outcome, mu_d);
        self.history.push(HistoryEntry { utterance: utterance.to_string(), act, response: response.clone() });
        response
    }

    fn render(&self, outcome: Outcome, mu_d: f64) -> TurnResponse {
        let lang = &self.config.language;
        let clarification = |c: Clarification| {
            let text = synthesize(&Response::Clarification(c.clone()), lang, &self.kb).unwrap_or_else(|e| e.to_string());
            TurnResponse {
                kind: ResponseKind::Clarification,
                payload: serde_json::to_value(&c).expect("clarification serializes"),
                text,
                mu_d,
            }
        };
        match outcome {
            Outcome::Reply(kind, response, payload) => match synthesize(&response, lang, &self.kb) {
                Ok(text) => TurnResponse { kind, payload, text, mu_d },
                Err(e) => clarification(Clarification::Unavailable { detail: e.to_string() }),
            },
            Outcome::Clarify(c) => clarification(c),
        }
    }

    fn reasoning(&self, act: &DialogAct) -> ReasoningContext {
        ReasoningContext { mu_d: act.confidence, theta: self.config.theta }
    }

    fn respond(&mut self, act: &DialogAct) -> Outcome {
        let arg = |role: &str| act.get(role).unwrap_or_default().to_string();
        match act.kind {
            DialogKind::Assert => self.assert(&arg("variable"), &arg("term")),
            DialogKind::Query => self.query(&arg("variable")),
            DialogKind::Decide => self.decide(act),
            DialogKind::Why => self.why(&arg("decision")),
            DialogKind::Plan => self.plan(act, &arg("horizon")),
            DialogKind::Command => self.command(&arg("act")),
        }
    }

    fn assert(&mut self, variable: &str, term: &str) -> Outcome {
        let Some(set) = self.kb.term_set(variable, term) else {
            return Outcome::Clarify(Clarification::UnknownTerm { variable: variable.into(), term: term.into() });
        };
        let payload = json!({ "variable": variable, "term": term, "premise": set });
        self.premises.insert(variable.to_string(), term.to_string());
        Outcome::Reply(
            ResponseKind::Answer,
            Response::Ack { variable: variable.into(), term: term.into() },
            payload,
        )
    }

    fn query(&self, variable: &str) -> Outcome {
        let current = match self.current() {
            Ok(c) => c,
            Err(e) => return unavailable(e),
        };
        let (set, source): (Option<FuzzySet>, &str) = match current.situation.assignments.get(variable) {
            Some(set) if self.premises.contains_key(variable) => (Some(set.clone()), "premise"),
            Some(set) => (Some(set.clone()), "observed"),
            None => match infer(&PremiseVector(current.situation.assignments.clone()), &self.kb, None) {
                Ok(result) => (result.output.get(variable).cloned(), "inferred"),
                Err(e) => return unavailable(e),
            },
        };
        let (Some(var), Some(universe)) = (self.kb.variable(variable), self.kb.variable_universe(variable)) else {
            return unavailable(format!("unknown variable {variable}"));
        };
        let Some(set) = set else {
            let payload = json!({ "variable": variable, "source": "none", "degrees": [], "value": null });
            let response = Response::Answer { variable: variable.into(), degrees: vec![], value: None };
            return Outcome::Reply(ResponseKind::Answer, response, payload);
        };
        let mut degrees = Vec::with_capacity(var.terms.len());
        for term in &var.terms {
            match possibility(&set, &term.set) {
                Ok(degree) => degrees.push(TermDegree { term: term.label.clone(), degree }),
                Err(e) => return unavailable(e),
            }
        }
        let crisp = defuzzify(&set, universe, DefuzzMethod::Centroid);
        let payload = json!({
            "variable": variable,
            "source": source,
            "set": set,
            "degrees": degrees,
            "value": crisp.value,
            "degenerate": crisp.degenerate,
        });
        let response = Response::Answer { variable: variable.into(), degrees, value: Some(crisp.value) };
        Outcome::Reply(ResponseKind::Answer, response, payload)
    }

    fn decide(&mut self, act: &DialogAct) -> Outcome {
        let current = match self.current() {
            Ok(c) => c,
            Err(e) => return unavailable(e),
        };
        match select(self.config.policy, &current, &self.kb, &self.reasoning(act)) {
            Ok(alt) => {
                let payload = json!({
                    "decision": alt.decision,
                    "combined_score": alt.combined_score,
                    "evidence": alt.evidence,
                    "policy": self.config.policy,
                    "trace": alt.trace.id,
                });
                let response = Response::Decision {
                    decision: alt.decision.id.clone(),
                    score: alt.combined_score,
                    impacts: alt.decision.impacts.clone(),
                    policy: self.config.policy,
                };
                self.decisions.record(alt.decision, alt.trace);
                Outcome::Reply(ResponseKind::Decision, response, payload)
            }
            Err(ReasoningError::NoAlternatives) => Outcome::Clarify(Clarification::NoAlternatives),
            Err(e) => unavailable(e),
        }
    }

    fn why(&self, decision: &str) -> Outcome {
        if decision == LAST_DECISION && self.decisions.is_empty() {
            return Outcome::Clarify(Clarification::NoDecisionYet);
        }
        match self.explanation(decision) {
            Ok(exp) => {
                let response = Response::Explanation { decision: exp.decision_id.clone(), lines: exp.lines.clone() };
                let payload = serde_json::to_value(&exp).expect("explanation serializes");
                Outcome::Reply(ResponseKind::Explanation, response, payload)
            }
            Err(_) => Outcome::Clarify(Clarification::UnknownDecision { decision: decision.into() }),
        }
    }

    fn plan(&self, act: &DialogAct, horizon: &str) -> Outcome {
        let horizon = match horizon.parse::<usize>() {
            Ok(h) if h <= MAX_PLAN_HORIZON => h,
            _ => return unavailable(format!("plan horizon must be at most {MAX_PLAN_HORIZON}")),
        };
        let current = match self.current() {
            Ok(c) => c,
            Err(e) => return unavailable(e),
        };
        let (steps, stalled) = match plan(&current, horizon, &self.kb, &self.reasoning(act), self.config.policy) {
            Ok(p) => (p.steps, false),
            Err(ReasoningError::PlanningStalled(partial)) => (partial.steps, true),
            Err(e) => return unavailable(e),
        };
        let lines: Vec<PlanLine> =
            steps.iter().map(|s| PlanLine { decision: s.decision.id.clone(), score: s.decision.score }).collect();
        let payload = json!({
            "horizon": horizon,
            "stalled": stalled,
            "steps": steps.iter().map(|s| json!({
                "decision": s.decision.id,
                "score": s.decision.score,
                "impacts": s.decision.impacts,
                "state": s.state,
            })).collect::<Vec<_>>(),
        });
        Outcome::Reply(ResponseKind::Plan, Response::Plan { steps: lines }, payload)
    }

    fn command(&mut self, act_id: &str) -> Outcome {
        let Some(act) = self.kb.act(act_id) else {
            return unavailable(format!("unknown act {act_id}"));
        };
        let conformity = match self.current().map(|c| act_conformity(&c.situation, act)) {
            Ok(Ok(m)) => m.score,
            Ok(Err(e)) => return unavailable(e),
            Err(e) => return unavailable(e),
        };
        self.sim.set_override(act_id);
        let payload = json!({
            "act": act_id,
            "conformity": conformity,
            "effective_tick": self.sim.state().tick + 1,
        });
        Outcome::Reply(ResponseKind::Answer, Response::Command { act: act_id.into(), conformity }, payload)
    }

    /// Runs one control cycle of the session's plant.
    pub fn tick(&mut self) -> Result<TickEvent, ServiceError> {
        let record = self.sim.step()?;
        if let (Some(decision), Some(trace)) = (&record.decision, &record.trace) {
            self.decisions.record(decision.clone(), trace.clone());
        }
        let csv = record.csv_fields(&self.kb.plant);
        Ok(TickEvent::Tick { record: Box::new(record), csv })
    }

    pub fn summary(&self, ticks: usize) -> TickEvent {
        let state = self.sim.state().clone();
        let in_setpoint = self.kb.plant.setpoint.as_ref().map(|band| {
            let v = state.get(&band.variable);
            band.low <= v && v <= band.high
        });
        TickEvent::Summary {
            ticks,
            last_decision: self.decisions.last().map(|d| d.decision.id.clone()),
            state,
            in_setpoint,
        }
    }

    /// `steps` tick records followed by a summary.
    pub fn stream_ticks(&mut self, steps: usize) -> Result<Vec<TickEvent>, ServiceError> {
        let mut events = Vec::with_capacity(steps + 1);
        for _ in 0..steps {
            events.push(self.tick()?);
        }
        events.push(self.summary(steps));
        Ok(events)
    }
}
