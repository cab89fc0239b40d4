//! Knowledge-base domain types: universes, fuzzy sets, linguistic variables,
//! rules, situations, elementary acts and the multilingual dictionary.
//!
//! A [`KnowledgeBase`] is immutable once loaded. Sessions hold it behind an
//! `Arc` and a replacement document produces a new value.

mod document;
mod validate;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use document::{
    load_knowledge_base, parse_document, serialize_knowledge_base, MembershipSpec,
    SCHEMA_VERSION,
};
pub use validate::{validate_knowledge_base, ValidationReport, Violation, ViolationCode};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KbError {
    #[error("schema error: {0}")]
    Schema(String),
    #[error("integrity error: dangling reference `{0}`")]
    Integrity(String),
    #[error("knowledge base invalid: {0}")]
    Invalid(ValidationReport),
    #[error("domain error: {0}")]
    Domain(String),
}

/// Ordered, strictly increasing set of sample points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Universe {
    pub id: String,
    pub points: Vec<f64>,
    #[serde(default)]
    pub unit: String,
}

impl Universe {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.points[0]
    }

    pub fn max(&self) -> f64 {
        self.points[self.points.len() - 1]
    }

    /// Midpoint of the covered interval.
    pub fn midpoint(&self) -> f64 {
        (self.min() + self.max()) / 2.0
    }

    /// Index of the grid point nearest to `value`; equidistant values go to the lower point.
    pub fn nearest_index(&self, value: f64) -> usize {
        let upper = self.points.partition_point(|p| *p < value);
        if upper == 0 {
            return 0;
        }
        if upper == self.points.len() {
            return self.points.len() - 1;
        }
        let below = value - self.points[upper - 1];
        let above = self.points[upper] - value;
        if above < below {
            upper
        } else {
            upper - 1
        }
    }
}

/// Membership function sampled on a discrete universe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FuzzySet {
    pub universe: String,
    pub mu: Vec<f64>,
}

impl FuzzySet {
    pub fn new(universe: impl Into<String>, mu: Vec<f64>) -> Self {
        Self { universe: universe.into(), mu }
    }

    pub fn empty(universe: &Universe) -> Self {
        Self::new(universe.id.clone(), vec![0.0; universe.len()])
    }

    /// Full membership at `index`, zero elsewhere.
    pub fn singleton(universe: &Universe, index: usize) -> Self {
        let mut mu = vec![0.0; universe.len()];
        mu[index] = 1.0;
        Self::new(universe.id.clone(), mu)
    }

    pub fn height(&self) -> f64 {
        self.mu.iter().copied().fold(0.0, f64::max)
    }

    pub fn is_normal(&self) -> bool {
        self.height() == 1.0
    }

    /// Pointwise maximum (fuzzy union). Both sets must share a universe.
    pub fn union(&self, other: &FuzzySet) -> FuzzySet {
        debug_assert_eq!(self.universe, other.universe);
        FuzzySet::new(
            self.universe.clone(),
            self.mu.iter().zip(&other.mu).map(|(a, b)| a.max(*b)).collect(),
        )
    }

    /// Pointwise minimum (fuzzy intersection).
    pub fn intersection(&self, other: &FuzzySet) -> FuzzySet {
        debug_assert_eq!(self.universe, other.universe);
        FuzzySet::new(
            self.universe.clone(),
            self.mu.iter().zip(&other.mu).map(|(a, b)| a.min(*b)).collect(),
        )
    }

    /// Crisp indicator of the α-cut.
    pub fn cut_indicator(&self, alpha: f64) -> FuzzySet {
        FuzzySet::new(
            self.universe.clone(),
            self.mu.iter().map(|m| if *m >= alpha { 1.0 } else { 0.0 }).collect(),
        )
    }
}

/// Points of `universe` whose membership in `set` is at least `alpha`, in universe order.
pub fn alpha_cut(set: &FuzzySet, universe: &Universe, alpha: f64) -> Result<Vec<f64>, KbError> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(KbError::Domain(format!("alpha {alpha} outside (0, 1]")));
    }
    if set.universe != universe.id || set.mu.len() != universe.len() {
        return Err(KbError::Domain(format!(
            "set on `{}` does not match universe `{}`",
            set.universe, universe.id
        )));
    }
    Ok(universe
        .points
        .iter()
        .zip(&set.mu)
        .filter(|(_, m)| **m >= alpha)
        .map(|(p, _)| *p)
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub label: String,
    pub set: FuzzySet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinguisticVariable {
    pub name: String,
    pub universe: String,
    pub terms: Vec<Term>,
    /// Opaque annotations: morphological, behavioural and similar aspects.
    #[serde(default)]
    pub facets: BTreeMap<String, String>,
}

impl LinguisticVariable {
    pub fn term(&self, label: &str) -> Option<&Term> {
        self.terms.iter().find(|t| t.label == label)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RepresentationLevel {
    #[serde(rename = "RX_CODES")]
    RxCodes,
    #[serde(rename = "USC")]
    Usc,
    #[serde(rename = "SEMANTIC_FRAMES")]
    #[default]
    SemanticFrames,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Proposition {
    pub variable: String,
    pub term: String,
}

/// Stored reference value checked for conformity against the premise of the same variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Binding {
    pub variable: String,
    pub reference: FuzzySet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rule {
    pub id: String,
    pub level: RepresentationLevel,
    pub antecedent: Vec<Proposition>,
    pub consequent: Proposition,
    pub bindings: Vec<Binding>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Situation {
    pub id: String,
    pub assignments: BTreeMap<String, FuzzySet>,
    #[serde(default)]
    pub level: RepresentationLevel,
    #[serde(default)]
    pub annotation: String,
}

impl Situation {
    pub fn new(id: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            assignments: BTreeMap::new(),
            level: RepresentationLevel::default(),
            annotation: String::new(),
        }
    }

    pub fn with(mut self, variable: impl Into<String>, set: FuzzySet) -> Self {
        self.assignments.insert(variable.into(), set);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Effect {
    Delta(f64),
    Set(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpactRule {
    pub target: String,
    pub effect: Effect,
    #[serde(default)]
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElementaryAct {
    pub id: String,
    pub trigger: Situation,
    pub target: Situation,
    pub impacts: Vec<ImpactRule>,
    /// Observed input vector x.
    #[serde(default)]
    pub inputs: BTreeMap<String, f64>,
    /// Control vector u.
    #[serde(default)]
    pub control: BTreeMap<String, f64>,
    /// Disturbance vector w.
    #[serde(default)]
    pub disturbance: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sense {
    pub concept: String,
    pub domain: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DictionaryEntry {
    pub surface: String,
    pub language: String,
    pub concept: String,
    #[serde(default)]
    pub grammar: BTreeMap<String, String>,
    pub senses: Vec<Sense>,
}

impl DictionaryEntry {
    /// Grammar keyword role (`SET`, `WHAT`, ...), if this entry is a keyword.
    pub fn role(&self) -> Option<&str> {
        self.grammar.get("role").map(String::as_str)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantVariable {
    pub name: String,
    pub min: f64,
    pub max: f64,
    pub initial: f64,
    /// Linguistic variable this reading is fuzzified into.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub linguistic: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetpointBand {
    pub variable: String,
    pub low: f64,
    pub high: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantSchema {
    pub model: String,
    pub variables: Vec<PlantVariable>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub setpoint: Option<SetpointBand>,
    /// Thematic domain active by default in dialog sessions.
    #[serde(default)]
    pub domain: String,
}

impl PlantSchema {
    pub fn variable(&self, name: &str) -> Option<&PlantVariable> {
        self.variables.iter().find(|v| v.name == name)
    }
}

/// Verbal labels of one variable paired with their numeric grids.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateMap {
    pub verbal_labels: Vec<String>,
    pub numeric_grid: BTreeMap<String, FuzzySet>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KnowledgeBase {
    pub version: String,
    pub universes: Vec<Universe>,
    pub variables: Vec<LinguisticVariable>,
    pub rules: Vec<Rule>,
    pub situations: Vec<Situation>,
    pub acts: Vec<ElementaryAct>,
    pub dictionary: Vec<DictionaryEntry>,
    pub plant: PlantSchema,
}

impl KnowledgeBase {
    pub fn universe(&self, id: &str) -> Option<&Universe> {
        self.universes.iter().find(|u| u.id == id)
    }

    pub fn variable(&self, name: &str) -> Option<&LinguisticVariable> {
        self.variables.iter().find(|v| v.name == name)
    }

    pub fn variable_universe(&self, name: &str) -> Option<&Universe> {
        self.variable(name).and_then(|v| self.universe(&v.universe))
    }

    pub fn term_set(&self, variable: &str, term: &str) -> Option<&FuzzySet> {
        self.variable(variable).and_then(|v| v.term(term)).map(|t| &t.set)
    }

    pub fn rule(&self, id: &str) -> Option<&Rule> {
        self.rules.iter().find(|r| r.id == id)
    }

    pub fn act(&self, id: &str) -> Option<&ElementaryAct> {
        self.acts.iter().find(|a| a.id == id)
    }

    pub fn is_term(&self, label: &str) -> bool {
        self.variables.iter().any(|v| v.term(label).is_some())
    }

    /// Languages that have at least one dictionary entry, sorted.
    pub fn languages(&self) -> Vec<String> {
        let mut langs: Vec<String> = self.dictionary.iter().map(|e| e.language.clone()).collect();
        langs.sort();
        langs.dedup();
        langs
    }

    pub fn supports_language(&self, language: &str) -> bool {
        self.dictionary.iter().any(|e| e.language == language)
    }

    pub fn estimate_map(&self, variable: &str) -> Option<EstimateMap> {
        let var = self.variable(variable)?;
        Some(EstimateMap {
            verbal_labels: var.terms.iter().map(|t| t.label.clone()).collect(),
            numeric_grid: var.terms.iter().map(|t| (t.label.clone(), t.set.clone())).collect(),
        })
    }
}
