//! Sup-min kernel: possibility measure, relational composition, rule
//! inference weighted by premise conformity, and the crisp bridges
//! (fuzzify / defuzzify).
//!
//! Conjunction is `min`, disjunction is `max`. Every function here is pure.

mod crisp;
mod rules;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kb::FuzzySet;

pub use crisp::{defuzzify, fuzzify, Defuzzified, DefuzzMethod, Fuzzified};
pub use rules::{infer, InferenceResult, PremiseSpec, PremiseVector};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InferenceError {
    #[error("universe mismatch: `{left}` vs `{right}`")]
    UniverseMismatch { left: String, right: String },
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("variable `{variable}` has no term `{term}`")]
    UnknownTerm { variable: String, term: String },
    #[error("value {value} outside [{min}, {max}]")]
    Range { value: f64, min: f64, max: f64 },
}

/// Sup-min possibility of `b` given `a`: `max_x min(a(x), b(x))`.
pub fn possibility(a: &FuzzySet, b: &FuzzySet) -> Result<f64, InferenceError> {
    if a.universe != b.universe {
        return Err(InferenceError::UniverseMismatch { left: a.universe.clone(), right: b.universe.clone() });
    }
    if a.mu.len() != b.mu.len() {
        return Err(InferenceError::DimensionMismatch { expected: a.mu.len(), actual: b.mu.len() });
    }
    Ok(a.mu.iter().zip(&b.mu).map(|(x, y)| x.min(*y)).fold(0.0, f64::max))
}

/// Fuzzy relation between two discrete universes, stored row-major (`|from| × |to|`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FuzzyRelation {
    pub from: String,
    pub to: String,
    pub matrix: Vec<Vec<f64>>,
}

impl FuzzyRelation {
    pub fn new(from: impl Into<String>, to: impl Into<String>, matrix: Vec<Vec<f64>>) -> Self {
        Self { from: from.into(), to: to.into(), matrix }
    }

    pub fn identity(universe: impl Into<String>, n: usize) -> Self {
        let u = universe.into();
        let matrix = (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
        Self::new(u.clone(), u, matrix)
    }

    pub fn rows(&self) -> usize {
        self.matrix.len()
    }

    pub fn cols(&self) -> usize {
        self.matrix.first().map_or(0, Vec::len)
    }

    fn check_shape(&self) -> Result<(), InferenceError> {
        let cols = self.cols();
        match self.matrix.iter().find(|row| row.len() != cols) {
            Some(row) => Err(InferenceError::DimensionMismatch { expected: cols, actual: row.len() }),
            None => Ok(()),
        }
    }

    /// Sup-min product `self ∘ other`.
    pub fn then(&self, other: &FuzzyRelation) -> Result<FuzzyRelation, InferenceError> {
        self.check_shape()?;
        other.check_shape()?;
        if self.to != other.from {
            return Err(InferenceError::UniverseMismatch { left: self.to.clone(), right: other.from.clone() });
        }
        if self.cols() != other.rows() {
            return Err(InferenceError::DimensionMismatch { expected: self.cols(), actual: other.rows() });
        }
        let matrix = self
            .matrix
            .iter()
            .map(|row| {
                (0..other.cols())
                    .map(|z| row.iter().enumerate().map(|(y, r)| r.min(other.matrix[y][z])).fold(0.0, f64::max))
                    .collect()
            })
            .collect();
        Ok(FuzzyRelation::new(self.from.clone(), other.to.clone(), matrix))
    }
}

/// Sup-min composition of a fuzzy set with a relation: `out(y) = max_x min(in(x), R(x, y))`.
pub fn compose(input: &FuzzySet, relation: &FuzzyRelation) -> Result<FuzzySet, InferenceError> {
    relation.check_shape()?;
    if input.universe != relation.from {
        return Err(InferenceError::UniverseMismatch { left: input.universe.clone(), right: relation.from.clone() });
    }
    if input.mu.len() != relation.rows() {
        return Err(InferenceError::DimensionMismatch { expected: relation.rows(), actual: input.mu.len() });
    }
    let mu = (0..relation.cols())
        .map(|y| input.mu.iter().zip(&relation.matrix).map(|(a, row)| a.min(row[y])).fold(0.0, f64::max))
        .collect();
    Ok(FuzzySet::new(relation.to.clone(), mu))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(mu: &[f64]) -> FuzzySet {
        FuzzySet::new("u", mu.to_vec())
    }

    #[test]
    fn possibility_of_identical_normal_sets_is_one() {
        let a = set(&[0.2, 1.0, 0.4]);
        assert_eq!(possibility(&a, &a).unwrap(), 1.0);
    }

    #[test]
    fn possibility_of_disjoint_supports_is_zero() {
        assert_eq!(possibility(&set(&[1.0, 0.0, 0.0]), &set(&[0.0, 0.0, 1.0])).unwrap(), 0.0);
    }

    #[test]
    fn possibility_two_point_example() {
        // min -> [0.3, 0.4], max -> 0.4
        assert_eq!(possibility(&set(&[0.3, 0.8]), &set(&[0.9, 0.4])).unwrap(), 0.4);
    }

    #[test]
    fn possibility_rejects_foreign_universe() {
        let b = FuzzySet::new("v", vec![1.0, 1.0]);
        assert!(matches!(possibility(&set(&[1.0, 0.0]), &b), Err(InferenceError::UniverseMismatch { .. })));
    }

    #[test]
    fn compose_with_identity() {
        let a = set(&[0.1, 0.7, 1.0]);
        assert_eq!(compose(&a, &FuzzyRelation::identity("u", 3)).unwrap(), a);
    }

    #[test]
    fn compose_singleton_projects_row() {
        let r = FuzzyRelation::new("u", "v", vec![vec![0.2, 0.9, 0.1], vec![0.5, 0.5, 1.0]]);
        let out = compose(&set(&[0.0, 1.0]), &r).unwrap();
        assert_eq!(out.mu, vec![0.5, 0.5, 1.0]);
        assert_eq!(out.universe, "v");
    }

    #[test]
    fn compose_two_by_two_example() {
        let r = FuzzyRelation::new("u", "v", vec![vec![1.0, 0.5], vec![0.3, 1.0]]);
        assert_eq!(compose(&set(&[0.2, 0.9]), &r).unwrap().mu, vec![0.3, 0.9]);
    }

    #[test]
    fn compose_dimension_mismatch() {
        let r = FuzzyRelation::new("u", "v", vec![vec![1.0, 0.5]]);
        assert!(matches!(compose(&set(&[0.2, 0.9]), &r), Err(InferenceError::DimensionMismatch { .. })));
        let ragged = FuzzyRelation::new("u", "v", vec![vec![1.0, 0.5], vec![1.0]]);
        assert!(matches!(compose(&set(&[0.2, 0.9]), &ragged), Err(InferenceError::DimensionMismatch { .. })));
    }
}
