//! The controlled organizational unit: a discrete-time plant driven by the
//! impact rules of the selected decision and a seeded disturbance source.

mod closed_loop;
mod plant;

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::inference::{fuzzify, InferenceError};
use crate::kb::{KnowledgeBase, PlantSchema, Situation};

pub use closed_loop::{
    run_closed_loop, trajectory_csv, ClosedLoop, LoopConfig, TickRecord, Trajectory,
};
pub use plant::{plant_model, InventoryPlant, PlantModel};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("schema error: {0}")]
    Schema(String),
    #[error("unsupported plant model `{0}`")]
    UnsupportedModel(String),
    #[error(transparent)]
    Inference(#[from] InferenceError),
    #[error("csv export failed: {0}")]
    Csv(String),
    #[error(transparent)]
    Reasoning(Box<crate::reasoning::ReasoningError>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvironmentState {
    pub variables: BTreeMap<String, f64>,
    pub tick: u64,
}

impl EnvironmentState {
    /// Initial plant state declared by the schema, at tick 0.
    pub fn initial(schema: &PlantSchema) -> Self {
        Self {
            variables: schema.variables.iter().map(|v| (v.name.clone(), v.initial)).collect(),
            tick: 0,
        }
    }

    pub fn get(&self, name: &str) -> f64 {
        self.variables.get(name).copied().unwrap_or(0.0)
    }

    pub fn with(mut self, name: impl Into<String>, value: f64) -> Self {
        self.variables.insert(name.into(), value);
        self
    }
}

/// Situation `S`: the fuzzy description plus the environment it was read from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FullSituation {
    pub situation: Situation,
    pub environment: EnvironmentState,
    pub timestamp: u64,
}

/// Fuzzifies every plant reading that is linked to a linguistic variable.
pub fn observe(kb: &KnowledgeBase, state: &EnvironmentState) -> Result<Situation, SimError> {
    let mut situation = Situation::new(format!("observed@{}", state.tick));
    for pv in &kb.plant.variables {
        let Some(lv_name) = &pv.linguistic else { continue };
        let var = kb
            .variable(lv_name)
            .ok_or_else(|| SimError::Schema(format!("unknown linguistic variable `{lv_name}`")))?;
        let universe = kb
            .universe(&var.universe)
            .ok_or_else(|| SimError::Schema(format!("unknown universe `{}`", var.universe)))?;
        let value = state.get(&pv.name).clamp(universe.min(), universe.max());
        situation.assignments.insert(var.name.clone(), fuzzify(value, var, universe)?.set);
    }
    Ok(situation)
}

pub fn observe_full(kb: &KnowledgeBase, state: &EnvironmentState) -> Result<FullSituation, SimError> {
    Ok(FullSituation { situation: observe(kb, state)?, environment: state.clone(), timestamp: state.tick })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DisturbanceProfile {
    #[default]
    None,
    /// Value for tick `t` is element `t` of each sequence; zero past the end.
    Sequence { values: BTreeMap<String, Vec<f64>> },
    /// Independent uniform draws per tick within `[low, high]`.
    Seeded { seed: u64, bounds: BTreeMap<String, (f64, f64)> },
}

/// Stateful sampler for a [`DisturbanceProfile`].
#[derive(Debug, Clone)]
pub struct DisturbanceSource {
    profile: DisturbanceProfile,
    rng: ChaCha8Rng,
}

impl DisturbanceSource {
    pub fn new(profile: DisturbanceProfile) -> Self {
        let seed = match &profile {
            DisturbanceProfile::Seeded { seed, .. } => *seed,
            _ => 0,
        };
        Self { profile, rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    pub fn profile(&self) -> &DisturbanceProfile {
        &self.profile
    }

    pub fn sample(&mut self, tick: u64) -> BTreeMap<String, f64> {
        match &self.profile {
            DisturbanceProfile::None => BTreeMap::new(),
            DisturbanceProfile::Sequence { values } => values
                .iter()
                .map(|(k, seq)| (k.clone(), seq.get(tick as usize).copied().unwrap_or(0.0)))
                .collect(),
            DisturbanceProfile::Seeded { bounds, .. } => bounds
                .iter()
                .map(|(k, (lo, hi))| {
                    let v = if lo < hi { self.rng.gen_range(*lo..=*hi) } else { *lo };
                    (k.clone(), v)
                })
                .collect(),
        }
    }
}
