//! Evidence combination, alternative enumeration, decision selection and
//! greedy multi-step planning over the plant model.
//!
//! The combined score of an alternative is `max` over its supporting acts
//! of `min(mu_D, mu_T, mu_phi, conformity)`, where
//! - `mu_D` is the dialog estimate (parse confidence, 1 for system turns),
//! - `mu_T` is the generalization estimate of the act group,
//! - `mu_phi` is the act's conformity to the current situation,
//! - `conformity` is the possibility of the current situation against the
//!   α-cut (α = θ) of the act's trigger.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::inference::{possibility, InferenceError};
use crate::kb::{ElementaryAct, KnowledgeBase, Situation};
use crate::sim::{observe, plant_model, EnvironmentState, FullSituation, SimError};
use crate::situational::{
    generalization_estimate, generalize, group_by_impacts, impacts_text, match_text, merge_targets,
    rank_acts, Decision, ExplanationTrace, RankedAct, SituationError, StepKind, TraceOrigin,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReasoningError {
    #[error("no evidence bundles")]
    EmptyEvidence,
    #[error("no alternatives")]
    NoAlternatives,
    #[error("planning stalled after {} of {} steps", .0.steps.len(), .0.horizon)]
    PlanningStalled(Box<Plan>),
    #[error(transparent)]
    Inference(#[from] InferenceError),
    #[error(transparent)]
    Situation(#[from] SituationError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    /// Decide over every merged act group.
    #[default]
    Wisdom,
    /// Decide on the single best-matching act, without merging.
    Intuition,
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Policy::Wisdom => "wisdom",
            Policy::Intuition => "intuition",
        })
    }
}

impl FromStr for Policy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "wisdom" => Ok(Policy::Wisdom),
            "intuition" => Ok(Policy::Intuition),
            other => Err(format!("unknown policy `{other}` (expected wisdom or intuition)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvidenceBundle {
    #[serde(rename = "mu_D")]
    pub mu_d: f64,
    #[serde(rename = "mu_T")]
    pub mu_t: f64,
    pub mu_phi: f64,
    pub conformity: f64,
}

impl EvidenceBundle {
    pub fn new(mu_d: f64, mu_t: f64, mu_phi: f64, conformity: f64) -> Self {
        Self { mu_d, mu_t, mu_phi, conformity }
    }

    pub fn strength(&self) -> f64 {
        self.mu_d.min(self.mu_t).min(self.mu_phi).min(self.conformity)
    }
}

/// Disjunction over bundles of the conjunction of their four estimates.
pub fn combine_evidence(bundles: &[EvidenceBundle]) -> Result<f64, ReasoningError> {
    if bundles.is_empty() {
        return Err(ReasoningError::EmptyEvidence);
    }
    Ok(bundles.iter().map(EvidenceBundle::strength).fold(0.0, f64::max))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReasoningContext {
    /// Dialog estimate for this cycle.
    pub mu_d: f64,
    /// Applicability threshold θ, also the α of the trigger cut.
    pub theta: f64,
}

impl Default for ReasoningContext {
    fn default() -> Self {
        Self { mu_d: 1.0, theta: crate::situational::DEFAULT_THRESHOLD }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Alternative {
    pub decision: Decision,
    pub evidence: Vec<EvidenceBundle>,
    pub combined_score: f64,
    pub trace: ExplanationTrace,
}

/// Possibility of `current` against the α-cut of the act's trigger, minimised over shared variables.
fn cut_conformity(current: &Situation, act: &ElementaryAct, alpha: f64) -> Result<f64, InferenceError> {
    let mut degree: Option<f64> = None;
    for (name, stored) in &act.trigger.assignments {
        if let Some(set) = current.assignments.get(name) {
            let d = possibility(set, &stored.cut_indicator(alpha))?;
            degree = Some(degree.map_or(d, |x| x.min(d)));
        }
    }
    Ok(degree.unwrap_or(0.0))
}

fn build_alternative(
    current: &Situation,
    members: &[RankedAct<'_>],
    ctx: &ReasoningContext,
    policy: Policy,
) -> Result<Alternative, ReasoningError> {
    let alpha = if ctx.theta > 0.0 { ctx.theta.min(1.0) } else { f64::MIN_POSITIVE };
    let mu_t = generalization_estimate(members);
    let evidence = members
        .iter()
        .map(|m| Ok(EvidenceBundle::new(ctx.mu_d, mu_t, m.conformity(), cut_conformity(current, m.act, alpha)?)))
        .collect::<Result<Vec<_>, InferenceError>>()?;
    let combined_score = combine_evidence(&evidence)?;

    let leader = &members[0];
    let id = leader.act.id.clone();
    let mut trace = ExplanationTrace {
        id: format!("trace:{id}"),
        steps: Vec::new(),
        final_decision: id.clone(),
        origin: TraceOrigin::Alternatives { situation: current.clone(), policy, mu_d: ctx.mu_d, theta: ctx.theta },
    };
    for m in members {
        trace.push(StepKind::SituationMatch, &m.act.id, m.conformity(), match_text(m));
    }
    for m in members {
        trace.push(
            StepKind::ActApplication,
            &m.act.id,
            m.conformity(),
            format!("{} moves to {} with {}", m.act.id, m.act.target.id, impacts_text(&m.act.impacts)),
        );
    }
    let target = merge_targets(members);
    if members.len() > 1 {
        trace.push(StepKind::Merge, &target.id, mu_t, crate::situational::merge_text(members));
    }
    let best = evidence
        .iter()
        .copied()
        .max_by(|a, b| a.strength().total_cmp(&b.strength()))
        .expect("non-empty evidence");
    trace.push(
        StepKind::EvidenceCombination,
        &id,
        combined_score,
        format!(
            "max over {} bundle(s) of min(mu_D={:.4}, mu_T={:.4}, mu_phi={:.4}, conformity={:.4})",
            evidence.len(),
            best.mu_d,
            best.mu_t,
            best.mu_phi,
            best.conformity
        ),
    );
    trace.push(
        StepKind::Decision,
        &id,
        combined_score,
        format!("decide {id} under {policy}: {}", impacts_text(&leader.act.impacts)),
    );

    let decision = Decision {
        id: id.clone(),
        act_ref: id,
        score: combined_score,
        impacts: leader.act.impacts.clone(),
        members: members.iter().map(|m| (m.act.id.clone(), m.conformity())).collect(),
        target,
        rationale_trace: trace.id.clone(),
    };
    Ok(Alternative { decision, evidence, combined_score, trace })
}

fn sort_alternatives(alts: &mut [Alternative]) {
    alts.sort_by(|a, b| {
        b.combined_score.total_cmp(&a.combined_score).then_with(|| a.decision.id.cmp(&b.decision.id))
    });
}

pub(crate) fn alternatives_for(
    current: &Situation,
    kb: &KnowledgeBase,
    ctx: &ReasoningContext,
) -> Result<Vec<Alternative>, ReasoningError> {
    let groups = group_by_impacts(rank_acts(current, kb)?);
    let mut alts = groups
        .iter()
        .map(|members| build_alternative(current, members, ctx, Policy::Wisdom))
        .collect::<Result<Vec<_>, _>>()?;
    sort_alternatives(&mut alts);
    Ok(alts)
}

/// One alternative per group of acts sharing impact rules; every act takes
/// part regardless of threshold. Sorted by combined score, then id.
pub fn enumerate_alternatives(
    current: &FullSituation,
    kb: &KnowledgeBase,
    ctx: &ReasoningContext,
) -> Result<Vec<Alternative>, ReasoningError> {
    alternatives_for(&current.situation, kb, ctx)
}

pub(crate) fn intuition_for(
    current: &Situation,
    kb: &KnowledgeBase,
    ctx: &ReasoningContext,
) -> Result<Option<Alternative>, ReasoningError> {
    let mut ranked = rank_acts(current, kb)?;
    if ranked.is_empty() {
        return Ok(None);
    }
    ranked.truncate(1);
    Ok(Some(build_alternative(current, &ranked, ctx, Policy::Intuition)?))
}

/// Argmax of the combined score; ties go to the smaller decision id.
pub fn decide(alternatives: &[Alternative]) -> Result<&Alternative, ReasoningError> {
    alternatives
        .iter()
        .min_by(|a, b| {
            b.combined_score.total_cmp(&a.combined_score).then_with(|| a.decision.id.cmp(&b.decision.id))
        })
        .ok_or(ReasoningError::NoAlternatives)
}

pub(crate) fn select_for(
    policy: Policy,
    current: &Situation,
    kb: &KnowledgeBase,
    ctx: &ReasoningContext,
) -> Result<Alternative, ReasoningError> {
    match policy {
        Policy::Wisdom => decide(&alternatives_for(current, kb, ctx)?).cloned(),
        Policy::Intuition => intuition_for(current, kb, ctx)?.ok_or(ReasoningError::NoAlternatives),
    }
}

/// Runs the decision step of one control cycle under `policy`.
pub fn select(
    policy: Policy,
    current: &FullSituation,
    kb: &KnowledgeBase,
    ctx: &ReasoningContext,
) -> Result<Alternative, ReasoningError> {
    select_for(policy, &current.situation, kb, ctx)
}

/// Recomputes the decision a trace was produced from.
pub fn replay_trace(trace: &ExplanationTrace, kb: &KnowledgeBase) -> Result<Decision, ReasoningError> {
    match &trace.origin {
        TraceOrigin::Generalize { situation, threshold } => Ok(generalize(situation, kb, *threshold)?.decision),
        TraceOrigin::Alternatives { situation, policy, mu_d, theta } => {
            let ctx = ReasoningContext { mu_d: *mu_d, theta: *theta };
            Ok(select_for(*policy, situation, kb, &ctx)?.decision)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanStep {
    pub decision: Decision,
    pub situation: Situation,
    pub state: EnvironmentState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Plan {
    pub steps: Vec<PlanStep>,
    pub horizon: usize,
}

/// Greedy rollout: decide, apply the decision's impacts to a private copy
/// of the plant with zero disturbance, observe, repeat.
pub fn plan(
    current: &FullSituation,
    horizon: usize,
    kb: &KnowledgeBase,
    ctx: &ReasoningContext,
    policy: Policy,
) -> Result<Plan, ReasoningError> {
    let plant = plant_model(&kb.plant)?;
    let no_disturbance = Default::default();
    let mut situation = current.situation.clone();
    let mut state = current.environment.clone();
    let mut result = Plan { steps: Vec::with_capacity(horizon), horizon };
    for _ in 0..horizon {
        let chosen = match select_for(policy, &situation, kb, ctx) {
            Ok(alt) => alt,
            Err(ReasoningError::NoAlternatives) => return Err(ReasoningError::PlanningStalled(Box::new(result))),
            Err(e) => return Err(e),
        };
        state = plant.step(&state, &chosen.decision.impacts, &no_disturbance)?;
        situation = observe(kb, &state)?;
        result.steps.push(PlanStep { decision: chosen.decision, situation: situation.clone(), state: state.clone() });
    }
    Ok(result)
}
