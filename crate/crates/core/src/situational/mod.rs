//! Situational control: matching the current situation against stored
//! ones, elementary acts `S_i : Q_j => Q_l : I`, generalization of the
//! applicable acts into one target situation, and explanation traces.

mod trace;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::inference::{possibility, InferenceError};
use crate::kb::{ElementaryAct, Effect, ImpactRule, KnowledgeBase, Situation};
use crate::sim::FullSituation;

pub use trace::{
    explain, render_steps, DecisionLog, ExplanationTrace, Explanation, LoggedDecision, StepKind,
    TraceOrigin, TraceStep,
};

/// Applicability threshold used when a session does not set one.
pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SituationError {
    #[error("situation library is empty")]
    EmptyLibrary,
    #[error("conformity {0} below threshold")]
    BelowThreshold(f64),
    #[error("unknown act `{0}`")]
    UnknownAct(String),
    #[error("no applicable situation")]
    NoApplicableSituation,
    #[error("unknown decision `{0}`")]
    UnknownDecision(String),
    #[error(transparent)]
    Inference(#[from] InferenceError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SituationMatch {
    pub situation: String,
    pub score: f64,
    pub per_variable: BTreeMap<String, f64>,
}

/// Conformity of `current` to `stored` over their shared variables, or
/// `None` when they share none.
pub fn match_one(current: &Situation, stored: &Situation) -> Result<Option<SituationMatch>, InferenceError> {
    let mut per_variable = BTreeMap::new();
    for (name, set) in &current.assignments {
        if let Some(reference) = stored.assignments.get(name) {
            per_variable.insert(name.clone(), possibility(set, reference)?);
        }
    }
    if per_variable.is_empty() {
        return Ok(None);
    }
    let score = per_variable.values().copied().fold(1.0, f64::min);
    Ok(Some(SituationMatch { situation: stored.id.clone(), score, per_variable }))
}

fn rank_order(a: (f64, &str), b: (f64, &str)) -> std::cmp::Ordering {
    b.0.total_cmp(&a.0).then_with(|| a.1.cmp(b.1))
}

/// Matches `current` against every library situation sharing a variable
/// with it, best first (score descending, id ascending).
pub fn match_situation(current: &Situation, library: &[Situation]) -> Result<Vec<SituationMatch>, SituationError> {
    if library.is_empty() {
        return Err(SituationError::EmptyLibrary);
    }
    let mut matches = Vec::new();
    for stored in library {
        if let Some(m) = match_one(current, stored)? {
            matches.push(m);
        }
    }
    matches.sort_by(|a, b| rank_order((a.score, &a.situation), (b.score, &b.situation)));
    Ok(matches)
}

/// Conformity of the current situation to an act's trigger; zero when they share no variable.
pub fn act_conformity(current: &Situation, act: &ElementaryAct) -> Result<SituationMatch, InferenceError> {
    Ok(match_one(current, &act.trigger)?.unwrap_or_else(|| SituationMatch {
        situation: act.trigger.id.clone(),
        score: 0.0,
        per_variable: BTreeMap::new(),
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ActOutcome {
    pub target: Situation,
    pub impacts: Vec<ImpactRule>,
    pub conformity: f64,
}

fn vector_text(v: &BTreeMap<String, f64>) -> String {
    let items: Vec<String> = v.iter().map(|(k, x)| format!("{k}={x}")).collect();
    format!("{{{}}}", items.join(","))
}

/// Applies the elementary act `act_id` if the current situation conforms to
/// its trigger at least `threshold`.
pub fn apply_elementary_act(
    full: &FullSituation,
    kb: &KnowledgeBase,
    act_id: &str,
    threshold: f64,
) -> Result<ActOutcome, SituationError> {
    let act = kb.act(act_id).ok_or_else(|| SituationError::UnknownAct(act_id.to_string()))?;
    let conformity = act_conformity(&full.situation, act)?.score;
    if conformity < threshold {
        return Err(SituationError::BelowThreshold(conformity));
    }
    let mut target = act.target.clone();
    let note = format!("u={} w={}", vector_text(&act.control), vector_text(&act.disturbance));
    target.annotation = if target.annotation.is_empty() { note } else { format!("{}; {note}", target.annotation) };
    Ok(ActOutcome { target, impacts: act.impacts.clone(), conformity })
}

/// Decision `A^N`: the leading act of a group of acts sharing impact rules.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub id: String,
    pub act_ref: String,
    pub score: f64,
    pub impacts: Vec<ImpactRule>,
    /// Contributing acts with their conformity, leader first.
    pub members: Vec<(String, f64)>,
    pub target: Situation,
    pub rationale_trace: String,
}

#[derive(Debug, Clone)]
pub(crate) struct RankedAct<'a> {
    pub act: &'a ElementaryAct,
    pub matched: SituationMatch,
}

impl RankedAct<'_> {
    pub fn conformity(&self) -> f64 {
        self.matched.score
    }
}

/// All acts ranked by conformity to `current`.
pub(crate) fn rank_acts<'a>(current: &Situation, kb: &'a KnowledgeBase) -> Result<Vec<RankedAct<'a>>, InferenceError> {
    let mut ranked = kb
        .acts
        .iter()
        .map(|act| Ok(RankedAct { act, matched: act_conformity(current, act)? }))
        .collect::<Result<Vec<_>, InferenceError>>()?;
    ranked.sort_by(|a, b| rank_order((a.conformity(), &a.act.id), (b.conformity(), &b.act.id)));
    Ok(ranked)
}

type ImpactKey = Vec<(String, u8, u64)>;

fn impact_key(impacts: &[ImpactRule]) -> ImpactKey {
    let mut key: Vec<_> = impacts
        .iter()
        .map(|i| match i.effect {
            Effect::Delta(d) => (i.target.clone(), 0, d.to_bits()),
            Effect::Set(s) => (i.target.clone(), 1, s.to_bits()),
        })
        .collect();
    key.sort();
    key
}

/// Groups acts with identical impact rules, preserving rank order, so each
/// group's first member is its leader.
pub(crate) fn group_by_impacts(ranked: Vec<RankedAct<'_>>) -> Vec<Vec<RankedAct<'_>>> {
    let mut groups: Vec<(ImpactKey, Vec<RankedAct<'_>>)> = Vec::new();
    for r in ranked {
        let key = impact_key(&r.act.impacts);
        match groups.iter_mut().find(|(k, _)| *k == key) {
            Some((_, members)) => members.push(r),
            None => groups.push((key, vec![r])),
        }
    }
    groups.into_iter().map(|(_, g)| g).collect()
}

/// Pointwise maximum of the members' targets; a single member is returned verbatim.
pub(crate) fn merge_targets(members: &[RankedAct<'_>]) -> Situation {
    if let [only] = members {
        return only.act.target.clone();
    }
    let ids: Vec<&str> = members.iter().map(|m| m.act.id.as_str()).collect();
    let mut merged = Situation::new(format!("generalized({})", ids.join(",")));
    merged.level = members[0].act.target.level;
    merged.annotation = format!("merged from {}", ids.join(", "));
    for m in members {
        for (name, set) in &m.act.target.assignments {
            merged
                .assignments
                .entry(name.clone())
                .and_modify(|acc| *acc = acc.union(set))
                .or_insert_with(|| set.clone());
        }
    }
    merged
}

/// Generalization estimate of a group: over the variables every member
/// target assigns, the smallest height of the members' common part.
/// Mutually consistent targets score 1; disjoint ones score 0.
pub(crate) fn generalization_estimate(members: &[RankedAct<'_>]) -> f64 {
    let first = &members[0].act.target;
    first
        .assignments
        .iter()
        .filter(|(name, _)| members.iter().all(|m| m.act.target.assignments.contains_key(*name)))
        .map(|(name, set)| {
            members[1..]
                .iter()
                .fold(set.clone(), |acc, m| acc.intersection(&m.act.target.assignments[name]))
                .height()
        })
        .fold(1.0, f64::min)
}

pub(crate) fn match_text(r: &RankedAct<'_>) -> String {
    let parts: Vec<String> = r.matched.per_variable.iter().map(|(k, v)| format!("{k}={v:.4}")).collect();
    format!("trigger of {} conforms ({})", r.act.id, parts.join(", "))
}

pub(crate) fn merge_text(members: &[RankedAct<'_>]) -> String {
    let parts: Vec<String> = members.iter().map(|m| format!("{}({:.4})", m.act.id, m.conformity())).collect();
    format!("targets merged by pointwise maximum: {}", parts.join(" "))
}

pub(crate) fn impacts_text(impacts: &[ImpactRule]) -> String {
    let parts: Vec<String> = impacts
        .iter()
        .map(|i| match i.effect {
            Effect::Delta(d) => format!("{} {d:+}", i.target),
            Effect::Set(s) => format!("{} := {s}", i.target),
        })
        .collect();
    if parts.is_empty() {
        "no impacts".into()
    } else {
        parts.join(", ")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Generalization {
    pub target: Situation,
    pub decision: Decision,
    pub trace: ExplanationTrace,
}

/// Finds the target situation for `current`.
///
/// Acts are ranked by conformity; those at or above `threshold` are grouped
/// by identical impact rules and each group's targets are merged. The
/// decision is the group led by the best-conforming act.
pub fn generalize(current: &Situation, kb: &KnowledgeBase, threshold: f64) -> Result<Generalization, SituationError> {
    let ranked = rank_acts(current, kb)?;
    let mut trace = ExplanationTrace {
        id: String::new(),
        steps: Vec::new(),
        final_decision: String::new(),
        origin: TraceOrigin::Generalize { situation: current.clone(), threshold },
    };
    for r in &ranked {
        trace.push(StepKind::SituationMatch, &r.act.id, r.conformity(), match_text(r));
    }
    let applicable: Vec<RankedAct<'_>> = ranked.into_iter().filter(|r| r.conformity() >= threshold).collect();
    let groups = group_by_impacts(applicable);
    let Some(members) = groups.into_iter().next() else {
        return Err(SituationError::NoApplicableSituation);
    };

    for m in &members {
        trace.push(
            StepKind::ActApplication,
            &m.act.id,
            m.conformity(),
            format!("{} moves to {} with {}", m.act.id, m.act.target.id, impacts_text(&m.act.impacts)),
        );
    }
    let target = merge_targets(&members);
    if members.len() > 1 {
        trace.push(StepKind::Merge, &target.id, members[0].conformity(), merge_text(&members));
    }

    let leader = &members[0];
    let id = leader.act.id.clone();
    trace.id = format!("trace:{id}");
    trace.final_decision = id.clone();
    trace.push(
        StepKind::Decision,
        &id,
        leader.conformity(),
        format!("decide {id}: {}", impacts_text(&leader.act.impacts)),
    );
    let decision = Decision {
        id: id.clone(),
        act_ref: id,
        score: leader.conformity(),
        impacts: leader.act.impacts.clone(),
        members: members.iter().map(|m| (m.act.id.clone(), m.conformity())).collect(),
        target: target.clone(),
        rationale_trace: trace.id.clone(),
    };
    Ok(Generalization { target, decision, trace })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kb::FuzzySet;

    fn s(id: &str, pairs: &[(&str, &[f64])]) -> Situation {
        pairs.iter().fold(Situation::new(id), |acc, (v, mu)| acc.with(*v, FuzzySet::new(*v, mu.to_vec())))
    }

    #[test]
    fn identical_situation_ranks_first() {
        let cur = s("cur", &[("a", &[0.0, 1.0, 0.3])]);
        let lib = vec![s("z", &[("a", &[0.0, 1.0, 0.3])]), s("b", &[("a", &[1.0, 0.0, 0.0])])];
        let m = match_situation(&cur, &lib).unwrap();
        assert_eq!(m[0].situation, "z");
        assert_eq!(m[0].score, 1.0);
        assert_eq!(m[1].score, 0.0);
    }

    #[test]
    fn empty_library_is_error() {
        let cur = s("cur", &[("a", &[1.0])]);
        assert_eq!(match_situation(&cur, &[]), Err(SituationError::EmptyLibrary));
    }

    #[test]
    fn unrelated_situations_are_skipped() {
        let cur = s("cur", &[("a", &[1.0])]);
        let lib = vec![s("other", &[("b", &[1.0])])];
        assert!(match_situation(&cur, &lib).unwrap().is_empty());
    }

    #[test]
    fn score_is_min_over_shared_variables() {
        let cur = s("cur", &[("a", &[1.0, 0.0]), ("b", &[0.0, 1.0])]);
        let stored = s("st", &[("a", &[0.7, 0.0]), ("b", &[0.0, 0.4]), ("c", &[1.0])]);
        let m = match_one(&cur, &stored).unwrap().unwrap();
        assert_eq!(m.score, 0.4);
        assert_eq!(m.per_variable.len(), 2);
    }

    #[test]
    fn ordering_ties_break_on_id() {
        let cur = s("cur", &[("a", &[1.0, 1.0])]);
        let lib = vec![s("b", &[("a", &[0.5, 0.0])]), s("a", &[("a", &[0.0, 0.5])])];
        let ids: Vec<_> = match_situation(&cur, &lib).unwrap().into_iter().map(|m| m.situation).collect();
        assert_eq!(ids, ["a", "b"]);
    }
}
