use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::InferenceError;
use crate::kb::{FuzzySet, LinguisticVariable, Universe};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Fuzzified {
    pub set: FuzzySet,
    pub point: f64,
    /// Membership of the grid point in each term, in term order.
    pub degrees: Vec<(String, f64)>,
}

impl Fuzzified {
    pub fn degree_map(&self) -> BTreeMap<String, f64> {
        self.degrees.iter().cloned().collect()
    }
}

/// Crisp reading to a singleton on the nearest grid point (ties to the lower point).
pub fn fuzzify(value: f64, variable: &LinguisticVariable, universe: &Universe) -> Result<Fuzzified, InferenceError> {
    if variable.universe != universe.id {
        return Err(InferenceError::UniverseMismatch { left: variable.universe.clone(), right: universe.id.clone() });
    }
    if !(universe.min()..=universe.max()).contains(&value) {
        return Err(InferenceError::Range { value, min: universe.min(), max: universe.max() });
    }
    let index = universe.nearest_index(value);
    Ok(Fuzzified {
        set: FuzzySet::singleton(universe, index),
        point: universe.points[index],
        degrees: variable.terms.iter().map(|t| (t.label.clone(), t.set.mu[index])).collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DefuzzMethod {
    #[default]
    Centroid,
    MaxOfMaxima,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Defuzzified {
    pub value: f64,
    /// Set when the set carried no mass and the universe midpoint was returned.
    pub degenerate: bool,
}

pub fn defuzzify(set: &FuzzySet, universe: &Universe, method: DefuzzMethod) -> Defuzzified {
    let points = universe.points.iter().zip(&set.mu);
    let mass: f64 = set.mu.iter().sum();
    if mass <= 0.0 {
        return Defuzzified { value: universe.midpoint(), degenerate: true };
    }
    let value = match method {
        DefuzzMethod::Centroid => points.map(|(x, m)| x * m).sum::<f64>() / mass,
        DefuzzMethod::MaxOfMaxima => {
            let height = set.height();
            let maxima: Vec<f64> = points.filter(|(_, m)| **m == height).map(|(x, _)| *x).collect();
            (maxima[0] + maxima[maxima.len() - 1]) / 2.0
        }
    };
    Defuzzified { value, degenerate: false }
}
