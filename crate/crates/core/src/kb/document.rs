//! JSON document format for knowledge bases.
//!
//! Membership functions may be authored as parameterised shapes; they are
//! sampled onto the owning variable's universe at load time. Serialization
//! always writes sampled `points` so a reload reproduces the same grid values.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{
    validate_knowledge_base, Binding, DictionaryEntry, ElementaryAct, Effect, FuzzySet,
    ImpactRule, KbError, KnowledgeBase, LinguisticVariable, PlantSchema, Proposition,
    RepresentationLevel, Rule, Sense, Situation, Term, Universe,
};

pub const SCHEMA_VERSION: &str = "sitcon-kb/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "lowercase", deny_unknown_fields)]
pub enum MembershipSpec {
    Tri { params: [f64; 3] },
    Trap { params: [f64; 4] },
    Points { mu: Vec<f64> },
}

impl MembershipSpec {
    pub fn sample(&self, universe: &Universe) -> Result<FuzzySet, KbError> {
        let mu = match self {
            MembershipSpec::Tri { params: [a, b, c] } => {
                universe.points.iter().map(|x| trapezoid(*x, *a, *b, *b, *c)).collect()
            }
            MembershipSpec::Trap { params: [a, b, c, d] } => {
                universe.points.iter().map(|x| trapezoid(*x, *a, *b, *c, *d)).collect()
            }
            MembershipSpec::Points { mu } => mu.clone(),
        };
        Ok(FuzzySet::new(universe.id.clone(), mu))
    }
}

fn trapezoid(x: f64, a: f64, b: f64, c: f64, d: f64) -> f64 {
    if (b..=c).contains(&x) {
        1.0
    } else if x > a && x < b {
        (x - a) / (b - a)
    } else if x > c && x < d {
        (d - x) / (d - c)
    } else {
        0.0
    }
}

/// Either a term label of the variable or an explicit membership function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum AssignmentDoc {
    Term(String),
    Membership(MembershipSpec),
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TermDoc {
    label: String,
    mf: MembershipSpec,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct VariableDoc {
    name: String,
    universe: String,
    terms: Vec<TermDoc>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    facets: BTreeMap<String, String>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BindingDoc {
    variable: String,
    reference: AssignmentDoc,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RuleDoc {
    id: String,
    #[serde(default)]
    level: RepresentationLevel,
    #[serde(rename = "if")]
    antecedent: Vec<Proposition>,
    #[serde(rename = "then")]
    consequent: Proposition,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    bindings: Vec<BindingDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SituationDoc {
    #[serde(default)]
    id: Option<String>,
    #[serde(default)]
    level: RepresentationLevel,
    assignments: BTreeMap<String, AssignmentDoc>,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    annotation: String,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ImpactDoc {
    target: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    set: Option<f64>,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    description: String,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ActDoc {
    id: String,
    trigger: SituationDoc,
    target: SituationDoc,
    impacts: Vec<ImpactDoc>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    x: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    u: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    w: BTreeMap<String, f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EntryDoc {
    surface: String,
    language: String,
    #[serde(default)]
    concept: Option<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    grammar: BTreeMap<String, String>,
    senses: Vec<Sense>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct KbDoc {
    #[serde(rename = "$schema", default, skip_serializing_if = "Option::is_none")]
    schema: Option<String>,
    version: String,
    universes: Vec<Universe>,
    variables: Vec<VariableDoc>,
    rules: Vec<RuleDoc>,
    situations: Vec<SituationDoc>,
    acts: Vec<ActDoc>,
    dictionary: Vec<EntryDoc>,
    plant: PlantSchema,
}

/// Builds a knowledge base from a document without running validation.
///
/// Fails only when the document is malformed or a reference needed to
/// sample a membership function cannot be resolved.
pub fn parse_document(text: &str) -> Result<KnowledgeBase, KbError> {
    let doc: KbDoc = serde_json::from_str(text).map_err(|e| KbError::Schema(e.to_string()))?;
    if let Some(schema) = &doc.schema {
        if schema != SCHEMA_VERSION {
            return Err(KbError::Schema(format!("unsupported schema `{schema}`")));
        }
    }
    let universes = doc.universes;
    let find_universe = |id: &str| {
        universes.iter().find(|u| u.id == id).ok_or_else(|| KbError::Integrity(id.to_string()))
    };

    let mut variables = Vec::with_capacity(doc.variables.len());
    for v in doc.variables {
        let universe = find_universe(&v.universe)?;
        let terms = v
            .terms
            .into_iter()
            .map(|t| Ok(Term { label: t.label, set: t.mf.sample(universe)? }))
            .collect::<Result<Vec<_>, KbError>>()?;
        variables.push(LinguisticVariable {
            name: v.name,
            universe: v.universe,
            terms,
            facets: v.facets,
        });
    }

    let resolve = |variable: &str, value: &AssignmentDoc| -> Result<FuzzySet, KbError> {
        let var = variables
            .iter()
            .find(|v| v.name == variable)
            .ok_or_else(|| KbError::Integrity(variable.to_string()))?;
        match value {
            AssignmentDoc::Term(label) => var
                .term(label)
                .map(|t| t.set.clone())
                .ok_or_else(|| KbError::Integrity(format!("{variable}.{label}"))),
            AssignmentDoc::Membership(spec) => spec.sample(find_universe(&var.universe)?),
        }
    };
    let situation = |default_id: String, s: SituationDoc| -> Result<Situation, KbError> {
        let assignments = s
            .assignments
            .iter()
            .map(|(name, value)| Ok((name.clone(), resolve(name, value)?)))
            .collect::<Result<BTreeMap<_, _>, KbError>>()?;
        Ok(Situation {
            id: s.id.unwrap_or(default_id),
            assignments,
            level: s.level,
            annotation: s.annotation,
        })
    };

    let rules = doc
        .rules
        .into_iter()
        .map(|r| {
            let bindings = r
                .bindings
                .iter()
                .map(|b| {
                    Ok(Binding { variable: b.variable.clone(), reference: resolve(&b.variable, &b.reference)? })
                })
                .collect::<Result<Vec<_>, KbError>>()?;
            Ok(Rule {
                id: r.id,
                level: r.level,
                antecedent: r.antecedent,
                consequent: r.consequent,
                bindings,
            })
        })
        .collect::<Result<Vec<_>, KbError>>()?;

    let situations = doc
        .situations
        .into_iter()
        .enumerate()
        .map(|(i, s)| situation(format!("situation{i}"), s))
        .collect::<Result<Vec<_>, KbError>>()?;

    let acts = doc
        .acts
        .into_iter()
        .map(|a| {
            let impacts = a
                .impacts
                .into_iter()
                .map(|i| {
                    let effect = match (i.delta, i.set) {
                        (Some(d), None) => Effect::Delta(d),
                        (None, Some(s)) => Effect::Set(s),
                        _ => {
                            return Err(KbError::Schema(format!(
                                "impact on `{}` in act `{}` needs exactly one of `delta` or `set`",
                                i.target, a.id
                            )))
                        }
                    };
                    Ok(ImpactRule { target: i.target, effect, description: i.description })
                })
                .collect::<Result<Vec<_>, KbError>>()?;
            Ok(ElementaryAct {
                trigger: situation(format!("{}.trigger", a.id), a.trigger)?,
                target: situation(format!("{}.target", a.id), a.target)?,
                id: a.id,
                impacts,
                inputs: a.x,
                control: a.u,
                disturbance: a.w,
            })
        })
        .collect::<Result<Vec<_>, KbError>>()?;

    let dictionary = doc
        .dictionary
        .into_iter()
        .map(|e| DictionaryEntry {
            concept: e
                .concept
                .or_else(|| e.senses.first().map(|s| s.concept.clone()))
                .unwrap_or_default(),
            surface: e.surface,
            language: e.language,
            grammar: e.grammar,
            senses: e.senses,
        })
        .collect();

    Ok(KnowledgeBase {
        version: doc.version,
        universes,
        variables,
        rules,
        situations,
        acts,
        dictionary,
        plant: doc.plant,
    })
}

/// Parses and validates a knowledge-base document.
///
/// Dangling references surface as [`KbError::Integrity`] naming the first
/// missing id; any other violation returns the full report.
pub fn load_knowledge_base(text: &str) -> Result<KnowledgeBase, KbError> {
    if text.trim().is_empty() {
        return Err(KbError::Schema("empty document".into()));
    }
    let kb = parse_document(text)?;
    let report = validate_knowledge_base(&kb);
    if let Some(id) = report.first_dangling() {
        return Err(KbError::Integrity(id.to_string()));
    }
    if !report.is_empty() {
        return Err(KbError::Invalid(report));
    }
    Ok(kb)
}

fn points(set: &FuzzySet) -> AssignmentDoc {
    AssignmentDoc::Membership(MembershipSpec::Points { mu: set.mu.clone() })
}

fn situation_doc(s: &Situation) -> SituationDoc {
    SituationDoc {
        id: Some(s.id.clone()),
        level: s.level,
        assignments: s.assignments.iter().map(|(k, v)| (k.clone(), points(v))).collect(),
        annotation: s.annotation.clone(),
    }
}

pub fn serialize_knowledge_base(kb: &KnowledgeBase) -> String {
    let doc = KbDoc {
        schema: Some(SCHEMA_VERSION.to_string()),
        version: kb.version.clone(),
        universes: kb.universes.clone(),
        variables: kb
            .variables
            .iter()
            .map(|v| VariableDoc {
                name: v.name.clone(),
                universe: v.universe.clone(),
                terms: v
                    .terms
                    .iter()
                    .map(|t| TermDoc {
                        label: t.label.clone(),
                        mf: MembershipSpec::Points { mu: t.set.mu.clone() },
                    })
                    .collect(),
                facets: v.facets.clone(),
            })
            .collect(),
        rules: kb
            .rules
            .iter()
            .map(|r| RuleDoc {
                id: r.id.clone(),
                level: r.level,
                antecedent: r.antecedent.clone(),
                consequent: r.consequent.clone(),
                bindings: r
                    .bindings
                    .iter()
                    .map(|b| BindingDoc { variable: b.variable.clone(), reference: points(&b.reference) })
                    .collect(),
            })
            .collect(),
        situations: kb.situations.iter().map(situation_doc).collect(),
        acts: kb
            .acts
            .iter()
            .map(|a| ActDoc {
                id: a.id.clone(),
                trigger: situation_doc(&a.trigger),
                target: situation_doc(&a.target),
                impacts: a
                    .impacts
                    .iter()
                    .map(|i| {
                        let (delta, set) = match i.effect {
                            Effect::Delta(d) => (Some(d), None),
                            Effect::Set(s) => (None, Some(s)),
                        };
                        ImpactDoc { target: i.target.clone(), delta, set, description: i.description.clone() }
                    })
                    .collect(),
                x: a.inputs.clone(),
                u: a.control.clone(),
                w: a.disturbance.clone(),
            })
            .collect(),
        dictionary: kb
            .dictionary
            .iter()
            .map(|e| EntryDoc {
                surface: e.surface.clone(),
                language: e.language.clone(),
                concept: Some(e.concept.clone()),
                grammar: e.grammar.clone(),
                senses: e.senses.clone(),
            })
            .collect(),
        plant: kb.plant.clone(),
    };
    serde_json::to_string_pretty(&doc).expect("knowledge base serializes")
}
