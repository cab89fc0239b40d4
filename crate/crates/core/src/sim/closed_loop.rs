use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{observe_full, plant_model, DisturbanceProfile, DisturbanceSource, EnvironmentState, PlantModel, SimError};
use crate::kb::{KnowledgeBase, PlantSchema, Situation};
use crate::reasoning::{select, Policy, ReasoningContext, ReasoningError};
use crate::situational::{apply_elementary_act, Decision, ExplanationTrace, DEFAULT_THRESHOLD};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LoopConfig {
    pub policy: Policy,
    pub theta: f64,
    pub disturbance: DisturbanceProfile,
}

impl Default for LoopConfig {
    fn default() -> Self {
        Self { policy: Policy::Wisdom, theta: DEFAULT_THRESHOLD, disturbance: DisturbanceProfile::None }
    }
}

/// One committed control cycle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TickRecord {
    pub tick: u64,
    /// Plant state after the tick.
    pub state: EnvironmentState,
    /// Situation observed before deciding.
    pub situation: Situation,
    pub decision: Option<Decision>,
    pub trace: Option<ExplanationTrace>,
    pub policy: Policy,
    /// Set when an operator command replaced the policy decision.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub override_act: Option<String>,
}

impl TickRecord {
    pub fn decision_id(&self) -> Option<&str> {
        self.decision.as_ref().map(|d| d.id.as_str())
    }

    pub fn score(&self) -> Option<f64> {
        self.decision.as_ref().map(|d| d.score)
    }

    /// Fields of this tick's trajectory CSV row.
    pub fn csv_fields(&self, schema: &PlantSchema) -> Vec<String> {
        row(schema, &self.state, self.decision_id(), self.score())
    }
}

fn row(schema: &PlantSchema, state: &EnvironmentState, decision: Option<&str>, score: Option<f64>) -> Vec<String> {
    let mut fields = vec![state.tick.to_string()];
    fields.extend(schema.variables.iter().map(|v| state.get(&v.name).to_string()));
    fields.push(decision.unwrap_or_default().to_string());
    fields.push(score.map(|s| s.to_string()).unwrap_or_default());
    fields
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub initial: EnvironmentState,
    pub records: Vec<TickRecord>,
}

impl Trajectory {
    /// Initial state followed by the state after each tick.
    pub fn states(&self) -> impl Iterator<Item = &EnvironmentState> {
        std::iter::once(&self.initial).chain(self.records.iter().map(|r| &r.state))
    }
}

/// Trajectory as CSV: `tick,<plant variables...>,decision_id,score`, with a
/// tick-0 row for the initial state.
pub fn trajectory_csv(schema: &PlantSchema, trajectory: &Trajectory) -> Result<String, SimError> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["tick".to_string()];
    header.extend(schema.variables.iter().map(|v| v.name.clone()));
    header.extend(["decision_id".to_string(), "score".to_string()]);
    let csv_err = |e: csv::Error| SimError::Csv(e.to_string());
    writer.write_record(&header).map_err(csv_err)?;
    writer.write_record(row(schema, &trajectory.initial, None, None)).map_err(csv_err)?;
    for record in &trajectory.records {
        writer.write_record(record.csv_fields(schema)).map_err(csv_err)?;
    }
    let bytes = writer.into_inner().map_err(|e| SimError::Csv(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Incremental modelling -> decision -> control cycle over one plant instance.
pub struct ClosedLoop {
    kb: Arc<KnowledgeBase>,
    plant: Box<dyn PlantModel>,
    state: EnvironmentState,
    disturbance: DisturbanceSource,
    config: LoopConfig,
    pending_override: Option<String>,
}

impl ClosedLoop {
    pub fn new(kb: Arc<KnowledgeBase>, initial: EnvironmentState, config: LoopConfig) -> Result<Self, SimError> {
        let plant = plant_model(&kb.plant)?;
        Ok(Self {
            kb,
            plant,
            state: initial,
            disturbance: DisturbanceSource::new(config.disturbance.clone()),
            config,
            pending_override: None,
        })
    }

    pub fn state(&self) -> &EnvironmentState {
        &self.state
    }

    pub fn config(&self) -> &LoopConfig {
        &self.config
    }

    pub fn set_policy(&mut self, policy: Policy) {
        self.config.policy = policy;
    }

    pub fn set_theta(&mut self, theta: f64) {
        self.config.theta = theta;
    }

    /// Replaces the policy decision of the next tick with `act_id`.
    pub fn set_override(&mut self, act_id: impl Into<String>) {
        self.pending_override = Some(act_id.into());
    }

    pub fn pending_override(&self) -> Option<&str> {
        self.pending_override.as_deref()
    }

    pub fn step(&mut self) -> Result<TickRecord, SimError> {
        let kb = &*self.kb;
        let full = observe_full(kb, &self.state)?;
        let override_act = self.pending_override.take();
        let (decision, trace) = match &override_act {
            Some(act_id) => {
                let outcome = apply_elementary_act(&full, kb, act_id, 0.0)
                    .map_err(|e| SimError::Reasoning(Box::new(ReasoningError::Situation(e))))?;
                let decision = Decision {
                    id: act_id.clone(),
                    act_ref: act_id.clone(),
                    score: outcome.conformity,
                    impacts: outcome.impacts,
                    members: vec![(act_id.clone(), outcome.conformity)],
                    target: outcome.target,
                    rationale_trace: format!("override:{act_id}"),
                };
                (Some(decision), None)
            }
            None => {
                let ctx = ReasoningContext { mu_d: 1.0, theta: self.config.theta };
                match select(self.config.policy, &full, kb, &ctx) {
                    Ok(alt) => (Some(alt.decision), Some(alt.trace)),
                    // no-op tick, the loop stays live
                    Err(ReasoningError::NoAlternatives) => (None, None),
                    Err(e) => return Err(SimError::Reasoning(Box::new(e))),
                }
            }
        };
        let impacts = decision.as_ref().map(|d| d.impacts.as_slice()).unwrap_or_default();
        let w = self.disturbance.sample(self.state.tick);
        let next = self.plant.step(&self.state, impacts, &w)?;
        self.state = next.clone();
        Ok(TickRecord {
            tick: next.tick,
            state: next,
            situation: full.situation,
            decision,
            trace,
            policy: self.config.policy,
            override_act,
        })
    }
}

/// Runs `steps` control cycles from `initial`.
pub fn run_closed_loop(
    kb: Arc<KnowledgeBase>,
    initial: EnvironmentState,
    steps: usize,
    config: &LoopConfig,
) -> Result<Trajectory, SimError> {
    let mut cl = ClosedLoop::new(kb, initial.clone(), config.clone())?;
    let records = (0..steps).map(|_| cl.step()).collect::<Result<Vec<_>, _>>()?;
    Ok(Trajectory { initial, records })
}
