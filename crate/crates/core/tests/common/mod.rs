//! Shared fixtures and independent oracles for the integration tests and the
//! acceptance runner. Nothing here calls into the engine's inference code.
#![allow(dead_code)]

pub mod checks;

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use sitcon::inference::FuzzyRelation;
use sitcon::kb::{
    load_knowledge_base, Binding, FuzzySet, KnowledgeBase, LinguisticVariable, PlantSchema, PlantVariable,
    Proposition, RepresentationLevel, Rule, Term, Universe,
};

pub const DEMO_KB: &str = include_str!("../../kb/inventory.kb.json");
pub const COARSE_KB: &str = include_str!("../../kb/coarse.kb.json");
pub const GOLDEN_TRAJECTORY: &str = include_str!("../golden/closed_loop.csv");
pub const GOLDEN_TRANSCRIPT: &str = include_str!("../golden/session_script.jsonl");

pub fn demo() -> KnowledgeBase {
    load_knowledge_base(DEMO_KB).expect("demo kb loads")
}

pub fn demo_arc() -> Arc<KnowledgeBase> {
    Arc::new(demo())
}

pub fn coarse() -> KnowledgeBase {
    load_knowledge_base(COARSE_KB).expect("coarse kb loads")
}

pub const LEVELS: [RepresentationLevel; 3] =
    [RepresentationLevel::RxCodes, RepresentationLevel::Usc, RepresentationLevel::SemanticFrames];

/// Membership degree drawn half the time from a coarse grid so ties and
/// exact zeros and ones are common.
pub fn degree(rng: &mut ChaCha8Rng) -> f64 {
    match rng.gen_range(0..4) {
        0 => 0.0,
        1 => rng.gen_range(0..=10) as f64 / 10.0,
        2 => 1.0,
        _ => rng.gen::<f64>(),
    }
}

pub fn mu_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| degree(rng)).collect()
}

pub fn random_set(rng: &mut ChaCha8Rng, universe: &str, n: usize) -> FuzzySet {
    FuzzySet::new(universe, mu_vec(rng, n))
}

pub fn random_relation(rng: &mut ChaCha8Rng, from: &str, to: &str, rows: usize, cols: usize) -> FuzzyRelation {
    FuzzyRelation::new(from, to, (0..rows).map(|_| mu_vec(rng, cols)).collect())
}

fn bare_plant() -> PlantSchema {
    PlantSchema {
        model: "inventory".into(),
        variables: vec![PlantVariable { name: "stock".into(), min: 0.0, max: 1.0, initial: 0.0, linguistic: None }],
        setpoint: None,
        domain: String::new(),
    }
}

/// Random KB with at most 4 variables, 6 rules and 6-point universes.
pub fn random_kb(rng: &mut ChaCha8Rng) -> KnowledgeBase {
    let n_vars = rng.gen_range(1..=4);
    let mut universes = Vec::new();
    let mut variables = Vec::new();
    for v in 0..n_vars {
        let len = rng.gen_range(1..=6);
        let uid = format!("u{v}");
        universes.push(Universe { id: uid.clone(), points: (0..len).map(|i| i as f64).collect(), unit: String::new() });
        let terms = (0..rng.gen_range(1..=3))
            .map(|t| Term { label: format!("t{t}"), set: random_set(rng, &uid, len) })
            .collect();
        variables.push(LinguisticVariable { name: format!("v{v}"), universe: uid, terms, facets: BTreeMap::new() });
    }
    let pick_prop = |rng: &mut ChaCha8Rng, var: &LinguisticVariable| Proposition {
        variable: var.name.clone(),
        term: var.terms.choose(rng).expect("terms").label.clone(),
    };
    let rules = (0..rng.gen_range(0..=6))
        .map(|r| {
            let mut antecedent_vars: Vec<&LinguisticVariable> = variables.iter().collect();
            antecedent_vars.shuffle(rng);
            antecedent_vars.truncate(rng.gen_range(1..=n_vars));
            let antecedent = antecedent_vars.iter().map(|v| pick_prop(rng, v)).collect();
            let consequent_var = variables.choose(rng).expect("variables");
            let consequent = pick_prop(rng, consequent_var);
            let bindings = (0..rng.gen_range(0..=1))
                .map(|_| {
                    let var = variables.choose(rng).expect("variables");
                    let len = universes.iter().find(|u| u.id == var.universe).expect("universe").len();
                    Binding { variable: var.name.clone(), reference: random_set(rng, &var.universe, len) }
                })
                .collect();
            Rule { id: format!("r{r}"), level: *LEVELS.choose(rng).expect("levels"), antecedent, consequent, bindings }
        })
        .collect();
    KnowledgeBase {
        version: "random".into(),
        universes,
        variables,
        rules,
        situations: Vec::new(),
        acts: Vec::new(),
        dictionary: Vec::new(),
        plant: bare_plant(),
    }
}

/// Premises for a random subset of the KB's variables.
pub fn random_premises(rng: &mut ChaCha8Rng, kb: &KnowledgeBase) -> BTreeMap<String, FuzzySet> {
    let mut premises = BTreeMap::new();
    for v in &kb.variables {
        if rng.gen_bool(0.75) {
            let len = kb.universe(&v.universe).expect("universe").len();
            premises.insert(v.name.clone(), random_set(rng, &v.universe, len));
        }
    }
    premises
}

/// Brute-force possibility: scan every point, keep the best pointwise minimum.
pub fn oracle_possibility(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let mut best = 0.0;
    for i in 0..a.len() {
        let m = if a[i] < b[i] { a[i] } else { b[i] };
        if m > best {
            best = m;
        }
    }
    best
}

pub fn oracle_compose(input: &[f64], matrix: &[Vec<f64>]) -> Vec<f64> {
    let cols = matrix.first().map_or(0, Vec::len);
    let mut out = vec![0.0; cols];
    for (x, row) in matrix.iter().enumerate() {
        for (y, r) in row.iter().enumerate() {
            let m = if input[x] < *r { input[x] } else { *r };
            if m > out[y] {
                out[y] = m;
            }
        }
    }
    out
}

pub fn oracle_relation_product(r: &[Vec<f64>], s: &[Vec<f64>]) -> Vec<Vec<f64>> {
    r.iter().map(|row| oracle_compose(row, s)).collect()
}

#[derive(Debug, PartialEq)]
pub struct OracleInference {
    pub output: BTreeMap<String, Vec<f64>>,
    pub activations: BTreeMap<String, f64>,
    pub defaulted: BTreeMap<String, Vec<String>>,
}

/// Rule inference by enumeration of every rule and every universe point.
/// A variable without a premise is treated as fully possible.
pub fn oracle_infer(
    kb: &KnowledgeBase,
    premises: &BTreeMap<String, FuzzySet>,
    level: Option<RepresentationLevel>,
) -> OracleInference {
    let term = |p: &Proposition| -> Vec<f64> {
        let var = kb.variables.iter().find(|v| v.name == p.variable).expect("variable");
        var.terms.iter().find(|t| t.label == p.term).expect("term").set.mu.clone()
    };
    let mut output: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut activations = BTreeMap::new();
    let mut defaulted = BTreeMap::new();
    for rule in &kb.rules {
        if level.is_some_and(|l| l != rule.level) {
            continue;
        }
        let mut act = 1.0f64;
        let mut missing = Vec::new();
        let mut conform = |variable: &str, reference: Vec<f64>| match premises.get(variable) {
            Some(p) => act = act.min(oracle_possibility(&p.mu, &reference)),
            None => missing.push(variable.to_string()),
        };
        for prop in &rule.antecedent {
            conform(&prop.variable, term(prop));
        }
        for b in &rule.bindings {
            conform(&b.variable, b.reference.mu.clone());
        }
        missing.sort();
        missing.dedup();
        if !missing.is_empty() {
            defaulted.insert(rule.id.clone(), missing);
        }
        activations.insert(rule.id.clone(), act);

        let cons = term(&rule.consequent);
        let out = output.entry(rule.consequent.variable.clone()).or_insert_with(|| vec![0.0; cons.len()]);
        for y in 0..cons.len() {
            let clipped = if act < cons[y] { act } else { cons[y] };
            if clipped > out[y] {
                out[y] = clipped;
            }
        }
    }
    OracleInference { output, activations, defaulted }
}

/// Max over bundles of the min of their four degrees.
pub fn oracle_combine(bundles: &[[f64; 4]]) -> f64 {
    let mut best = 0.0;
    for b in bundles {
        let mut m = 1.0;
        for x in b {
            if *x < m {
                m = *x;
            }
        }
        if m > best {
            best = m;
        }
    }
    best
}

/// Parallel English and Spanish utterances with the same meaning, one or
/// more per grammar production.
pub const PARALLEL: &[(&str, &str)] = &[
    ("set demand to high", "fija demanda a alta"),
    ("set stock to low", "fija existencias a baja"),
    ("set order to large", "fija pedido a grande"),
    ("what is demand", "cuál es demanda"),
    ("what is stock", "cuál es existencias"),
    ("why last decision", "por qué última decisión"),
    ("why restock_act", "por qué restock_act"),
    ("why hold", "por qué mantener"),
    ("decide", "decide"),
    ("what should i do", "qué debo hacer"),
    ("plan 3 steps", "planifica 3 pasos"),
    ("plan 1 step", "planifica 1 paso"),
    ("apply restock", "aplica reabastecer"),
    ("apply idle", "aplica esperar"),
];

/// The 20-turn operator script used for replay checks.
pub const SCRIPT: &[&str] = &[
    "what is stock",
    "set demand to high",
    "set stock to low",
    "what should i do",
    "why last decision",
    "what is order",
    "plan 3 steps",
    "frobnicate the flux",
    "set demand to stock",
    "set stock to ok",
    "decide",
    "why last decision",
    "apply hold",
    "what is demand",
    "set demand to low",
    "what should i do",
    "why restock_act",
    "plan 2 steps",
    "why nonexistent_act",
    "what is stock",
];
