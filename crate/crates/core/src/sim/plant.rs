use std::collections::BTreeMap;

use super::{EnvironmentState, SimError};
use crate::kb::{Effect, ImpactRule, PlantSchema};

/// Discrete-time plant dynamics.
pub trait PlantModel: Send + Sync {
    fn schema(&self) -> &PlantSchema;

    fn step(
        &self,
        state: &EnvironmentState,
        impacts: &[ImpactRule],
        disturbance: &BTreeMap<String, f64>,
    ) -> Result<EnvironmentState, SimError>;
}

pub fn plant_model(schema: &PlantSchema) -> Result<Box<dyn PlantModel>, SimError> {
    match schema.model.as_str() {
        "inventory" => Ok(Box::new(InventoryPlant::new(schema.clone())?)),
        other => Err(SimError::UnsupportedModel(other.to_string())),
    }
}

/// Single-stock inventory unit.
///
/// Per tick: the `order` flow restarts at zero and collects the impacts
/// aimed at it; impacts and disturbances on other variables are applied
/// directly; then `stock' = stock + order - demand_actual - w_stock`.
/// Every variable is clamped to its schema bounds.
#[derive(Debug, Clone)]
pub struct InventoryPlant {
    schema: PlantSchema,
}

pub const STOCK: &str = "stock";
pub const DEMAND: &str = "demand_actual";
pub const ORDER: &str = "order";

impl InventoryPlant {
    pub fn new(schema: PlantSchema) -> Result<Self, SimError> {
        if schema.variable(STOCK).is_none() {
            return Err(SimError::Schema("inventory plant needs a `stock` variable".into()));
        }
        Ok(Self { schema })
    }

    fn clamp(&self, name: &str, value: f64) -> f64 {
        match self.schema.variable(name) {
            Some(v) => value.clamp(v.min, v.max),
            None => value,
        }
    }
}

fn apply(effect: Effect, value: f64) -> f64 {
    match effect {
        Effect::Delta(d) => value + d,
        Effect::Set(s) => s,
    }
}

impl PlantModel for InventoryPlant {
    fn schema(&self) -> &PlantSchema {
        &self.schema
    }

    fn step(
        &self,
        state: &EnvironmentState,
        impacts: &[ImpactRule],
        disturbance: &BTreeMap<String, f64>,
    ) -> Result<EnvironmentState, SimError> {
        for name in impacts.iter().map(|i| &i.target).chain(disturbance.keys()) {
            if self.schema.variable(name).is_none() {
                return Err(SimError::Schema(format!("unknown plant variable `{name}`")));
            }
        }
        let mut next = state.clone();
        let mut order = 0.0;
        for impact in impacts {
            if impact.target == ORDER {
                order = apply(impact.effect, order);
            } else if impact.target != STOCK {
                let v = apply(impact.effect, next.get(&impact.target));
                next.variables.insert(impact.target.clone(), self.clamp(&impact.target, v));
            }
        }
        for (name, w) in disturbance {
            if name != STOCK && name != ORDER {
                let v = next.get(name) + w;
                next.variables.insert(name.clone(), self.clamp(name, v));
            }
        }
        let order = self.clamp(ORDER, order);
        if self.schema.variable(ORDER).is_some() {
            next.variables.insert(ORDER.to_string(), order);
        }

        let mut stock = state.get(STOCK) + order - next.get(DEMAND) - disturbance.get(STOCK).copied().unwrap_or(0.0);
        // direct stock impacts land after the flow update
        for impact in impacts.iter().filter(|i| i.target == STOCK) {
            stock = apply(impact.effect, stock);
        }
        next.variables.insert(STOCK.to_string(), self.clamp(STOCK, stock));
        next.tick = state.tick + 1;
        Ok(next)
    }
}
