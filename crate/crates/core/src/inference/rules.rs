use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{fuzzify, possibility, InferenceError};
use crate::kb::{FuzzySet, KnowledgeBase, MembershipSpec, RepresentationLevel, Rule};

/// How a premise is written in a premises file: a term label, a crisp
/// reading, or an explicit membership function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PremiseSpec {
    Term(String),
    Crisp(f64),
    Membership(MembershipSpec),
}

/// Observed input vector: one fuzzy value per variable.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PremiseVector(pub BTreeMap<String, FuzzySet>);

impl PremiseVector {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, variable: impl Into<String>, set: FuzzySet) -> Self {
        self.0.insert(variable.into(), set);
        self
    }

    pub fn get(&self, variable: &str) -> Option<&FuzzySet> {
        self.0.get(variable)
    }

    /// Resolves written premises against the KB's variables.
    pub fn resolve(specs: &BTreeMap<String, PremiseSpec>, kb: &KnowledgeBase) -> Result<Self, InferenceError> {
        let mut premises = Self::new();
        for (name, spec) in specs {
            let var = kb.variable(name).ok_or_else(|| InferenceError::UnknownVariable(name.clone()))?;
            let universe =
                kb.universe(&var.universe).ok_or_else(|| InferenceError::UnknownVariable(var.universe.clone()))?;
            let set = match spec {
                PremiseSpec::Term(label) => var.term(label).map(|t| t.set.clone()).ok_or_else(|| {
                    InferenceError::UnknownTerm { variable: name.clone(), term: label.clone() }
                })?,
                PremiseSpec::Crisp(value) => fuzzify(*value, var, universe)?.set,
                PremiseSpec::Membership(mf) => {
                    let set = mf.sample(universe).map_err(|_| InferenceError::UnknownVariable(name.clone()))?;
                    if set.mu.len() != universe.len() {
                        return Err(InferenceError::DimensionMismatch { expected: universe.len(), actual: set.mu.len() });
                    }
                    if let Some(&bad) = set.mu.iter().find(|m| !(0.0..=1.0).contains(*m)) {
                        return Err(InferenceError::Range { value: bad, min: 0.0, max: 1.0 });
                    }
                    set
                }
            };
            premises.0.insert(name.clone(), set);
        }
        Ok(premises)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InferenceResult {
    pub output: BTreeMap<String, FuzzySet>,
    pub rule_activations: BTreeMap<String, f64>,
    /// Variables a rule referenced that the premise vector did not supply;
    /// they contributed conformity 1.
    pub defaulted: BTreeMap<String, Vec<String>>,
    /// `None` when rules of every level were aggregated.
    pub level: Option<RepresentationLevel>,
}

fn premise_for<'a>(
    kb: &KnowledgeBase,
    premises: &'a PremiseVector,
    variable: &str,
) -> Result<Option<&'a FuzzySet>, InferenceError> {
    let universe = kb
        .variable_universe(variable)
        .ok_or_else(|| InferenceError::UnknownVariable(variable.to_string()))?;
    match premises.get(variable) {
        Some(set) if set.universe != universe.id => {
            Err(InferenceError::UniverseMismatch { left: set.universe.clone(), right: universe.id.clone() })
        }
        Some(set) if set.mu.len() != universe.len() => {
            Err(InferenceError::DimensionMismatch { expected: universe.len(), actual: set.mu.len() })
        }
        other => Ok(other),
    }
}

fn activation(
    rule: &Rule,
    premises: &PremiseVector,
    kb: &KnowledgeBase,
    defaulted: &mut Vec<String>,
) -> Result<f64, InferenceError> {
    let mut degree: f64 = 1.0;
    for prop in &rule.antecedent {
        let term = kb
            .term_set(&prop.variable, &prop.term)
            .ok_or_else(|| InferenceError::UnknownVariable(format!("{}.{}", prop.variable, prop.term)))?;
        match premise_for(kb, premises, &prop.variable)? {
            Some(set) => degree = degree.min(possibility(set, term)?),
            None => defaulted.push(prop.variable.clone()),
        }
    }
    for binding in &rule.bindings {
        match premise_for(kb, premises, &binding.variable)? {
            Some(set) => degree = degree.min(possibility(&binding.reference, set)?),
            None => defaulted.push(binding.variable.clone()),
        }
    }
    defaulted.sort();
    defaulted.dedup();
    Ok(degree)
}

/// Compositional rule of inference over the KB's rules.
///
/// Each rule fires with the minimum of its antecedent conformities and its
/// binding conformities; the output for each consequent variable is the
/// pointwise maximum over rules of the consequent term clipped at that
/// activation. `level` restricts the rule set; `None` aggregates all levels.
pub fn infer(
    premises: &PremiseVector,
    kb: &KnowledgeBase,
    level: Option<RepresentationLevel>,
) -> Result<InferenceResult, InferenceError> {
    for name in premises.0.keys() {
        premise_for(kb, premises, name)?;
    }
    let mut output: BTreeMap<String, FuzzySet> = BTreeMap::new();
    let mut rule_activations = BTreeMap::new();
    let mut defaulted = BTreeMap::new();

    for rule in kb.rules.iter().filter(|r| level.is_none_or(|l| r.level == l)) {
        let mut missing = Vec::new();
        let degree = activation(rule, premises, kb, &mut missing)?;
        if !missing.is_empty() {
            defaulted.insert(rule.id.clone(), missing);
        }
        rule_activations.insert(rule.id.clone(), degree);

        let consequent = &rule.consequent;
        let term = kb
            .term_set(&consequent.variable, &consequent.term)
            .ok_or_else(|| InferenceError::UnknownVariable(format!("{}.{}", consequent.variable, consequent.term)))?;
        let acc = output
            .entry(consequent.variable.clone())
            .or_insert_with(|| FuzzySet::new(term.universe.clone(), vec![0.0; term.mu.len()]));
        for (out, m) in acc.mu.iter_mut().zip(&term.mu) {
            *out = out.max(degree.min(*m));
        }
    }

    Ok(InferenceResult { output, rule_activations, defaulted, level })
}
