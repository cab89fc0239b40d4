use std::collections::BTreeSet;
use std::fmt;

use serde::Serialize;

use super::{FuzzySet, KnowledgeBase, Situation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationCode {
    EmptyUniverse,
    UniverseOrder,
    MembershipOutOfRange,
    UniverseMismatch,
    DanglingReference,
    DuplicateId,
    NoTerms,
    EmptyAntecedent,
    EmptyAssignments,
    EmptySurface,
    NoSenses,
    PlantBounds,
    NotNormalized,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub code: ViolationCode,
    pub location: String,
    pub detail: String,
    /// Missing id for [`ViolationCode::DanglingReference`].
    #[serde(skip_serializing_if = "Option::is_none")]
    pub missing: Option<String>,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.location, self.detail)
    }
}

/// Violations make a knowledge base invalid; warnings do not.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    pub warnings: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn first_dangling(&self) -> Option<&str> {
        self.violations.iter().find_map(|v| v.missing.as_deref())
    }

    fn push(&mut self, code: ViolationCode, location: impl Into<String>, detail: impl Into<String>) {
        self.violations.push(Violation {
            code,
            location: location.into(),
            detail: detail.into(),
            missing: None,
        });
    }

    fn dangling(&mut self, location: impl Into<String>, missing: impl Into<String>) {
        let missing = missing.into();
        self.violations.push(Violation {
            code: ViolationCode::DanglingReference,
            location: location.into(),
            detail: format!("dangling reference `{missing}`"),
            missing: Some(missing),
        });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let lines: Vec<String> = self.violations.iter().map(ToString::to_string).collect();
        write!(f, "{}", lines.join("; "))
    }
}

fn duplicates<'a>(ids: impl Iterator<Item = &'a str>) -> Vec<&'a str> {
    let mut seen = BTreeSet::new();
    let mut dups = Vec::new();
    for id in ids {
        if !seen.insert(id) && !dups.contains(&id) {
            dups.push(id);
        }
    }
    dups
}

fn check_set(kb: &KnowledgeBase, report: &mut ValidationReport, location: &str, variable: &str, set: &FuzzySet) {
    let Some(var) = kb.variable(variable) else {
        report.dangling(location, variable);
        return;
    };
    match kb.universe(&var.universe) {
        Some(u) if set.universe == u.id && set.mu.len() == u.len() => {}
        Some(u) => report.push(
            ViolationCode::UniverseMismatch,
            location,
            format!("set on `{}` with {} values, expected `{}` with {}", set.universe, set.mu.len(), u.id, u.len()),
        ),
        // the variable itself reports the missing universe
        None => {}
    }
    if set.mu.iter().any(|m| !(0.0..=1.0).contains(m)) {
        report.push(ViolationCode::MembershipOutOfRange, location, "membership out of [0,1]");
    }
}

fn check_situation(kb: &KnowledgeBase, report: &mut ValidationReport, location: &str, s: &Situation) {
    if s.assignments.is_empty() {
        report.push(ViolationCode::EmptyAssignments, location, "situation has no assignments");
    }
    for (name, set) in &s.assignments {
        check_set(kb, report, &format!("{location}.{name}"), name, set);
    }
}

/// Lists every invariant violation in `kb`. The report is empty iff the KB is valid.
pub fn validate_knowledge_base(kb: &KnowledgeBase) -> ValidationReport {
    let mut report = ValidationReport::default();

    for id in duplicates(kb.universes.iter().map(|u| u.id.as_str())) {
        report.push(ViolationCode::DuplicateId, format!("universe {id}"), format!("duplicate universe id `{id}`"));
    }
    for u in &kb.universes {
        let loc = format!("universe {}", u.id);
        if u.points.is_empty() {
            report.push(ViolationCode::EmptyUniverse, &loc, "universe has no points");
        }
        if u.points.windows(2).any(|w| w[0] >= w[1] || w[0].is_nan() || w[1].is_nan()) || u.points.iter().any(|p| !p.is_finite()) {
            report.push(ViolationCode::UniverseOrder, &loc, "points not strictly increasing");
        }
    }

    for id in duplicates(kb.variables.iter().map(|v| v.name.as_str())) {
        report.push(ViolationCode::DuplicateId, format!("variable {id}"), format!("duplicate variable `{id}`"));
    }
    for v in &kb.variables {
        let loc = format!("variable {}", v.name);
        if kb.universe(&v.universe).is_none() {
            report.dangling(&loc, &v.universe);
        }
        if v.terms.is_empty() {
            report.push(ViolationCode::NoTerms, &loc, "variable has no terms");
        }
        for label in duplicates(v.terms.iter().map(|t| t.label.as_str())) {
            report.push(ViolationCode::DuplicateId, &loc, format!("duplicate term `{label}`"));
        }
        for t in &v.terms {
            let tloc = format!("{loc} term {}", t.label);
            check_set(kb, &mut report, &tloc, &v.name, &t.set);
            if !t.set.is_normal() {
                report.warnings.push(Violation {
                    code: ViolationCode::NotNormalized,
                    location: tloc,
                    detail: format!("height {} below 1", t.set.height()),
                    missing: None,
                });
            }
        }
    }

    for id in duplicates(kb.rules.iter().map(|r| r.id.as_str())) {
        report.push(ViolationCode::DuplicateId, format!("rule {id}"), format!("duplicate rule id `{id}`"));
    }
    for r in &kb.rules {
        let loc = format!("rule {}", r.id);
        if r.antecedent.is_empty() {
            report.push(ViolationCode::EmptyAntecedent, &loc, "antecedent is empty");
        }
        for p in r.antecedent.iter().chain(std::iter::once(&r.consequent)) {
            match kb.variable(&p.variable) {
                None => report.dangling(&loc, &p.variable),
                Some(v) if v.term(&p.term).is_none() => report.dangling(&loc, format!("{}.{}", p.variable, p.term)),
                Some(_) => {}
            }
        }
        for b in &r.bindings {
            check_set(kb, &mut report, &format!("{loc} binding {}", b.variable), &b.variable, &b.reference);
        }
    }

    for id in duplicates(kb.situations.iter().map(|s| s.id.as_str())) {
        report.push(ViolationCode::DuplicateId, format!("situation {id}"), format!("duplicate situation id `{id}`"));
    }
    for s in &kb.situations {
        check_situation(kb, &mut report, &format!("situation {}", s.id), s);
    }

    for id in duplicates(kb.acts.iter().map(|a| a.id.as_str())) {
        report.push(ViolationCode::DuplicateId, format!("act {id}"), format!("duplicate act id `{id}`"));
    }
    for a in &kb.acts {
        let loc = format!("act {}", a.id);
        check_situation(kb, &mut report, &format!("{loc} trigger"), &a.trigger);
        check_situation(kb, &mut report, &format!("{loc} target"), &a.target);
        for i in &a.impacts {
            if kb.plant.variable(&i.target).is_none() {
                report.dangling(format!("{loc} impact"), &i.target);
            }
        }
    }

    for (n, e) in kb.dictionary.iter().enumerate() {
        let loc = format!("dictionary[{n}]");
        if e.surface.trim().is_empty() {
            report.push(ViolationCode::EmptySurface, &loc, "empty surface form");
        }
        if e.senses.is_empty() {
            report.push(ViolationCode::NoSenses, &loc, format!("`{}` has no senses", e.surface));
        }
    }

    for id in duplicates(kb.plant.variables.iter().map(|v| v.name.as_str())) {
        report.push(ViolationCode::DuplicateId, format!("plant {id}"), format!("duplicate plant variable `{id}`"));
    }
    for v in &kb.plant.variables {
        let loc = format!("plant {}", v.name);
        if v.min.is_nan() || v.max.is_nan() || v.min > v.max || !(v.min..=v.max).contains(&v.initial) {
            report.push(ViolationCode::PlantBounds, &loc, "initial value outside [min, max]");
        }
        if let Some(lv) = &v.linguistic {
            if kb.variable(lv).is_none() {
                report.dangling(&loc, lv);
            }
        }
    }
    if let Some(band) = &kb.plant.setpoint {
        if kb.plant.variable(&band.variable).is_none() {
            report.dangling("plant setpoint", &band.variable);
        }
    }

    report
}
