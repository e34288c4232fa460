//! Scenario files: a plant, its state sets, the state processes and run settings.
//!
//! Scenarios are TOML. Every table rejects unknown keys. Plant field names
//! follow the usual symbols (`beta`, `alpha`, `price_set`, `D_max`, `A_max`,
//! `c_max`); states are referenced by id.

use std::path::Path;

use plant_core::controller::{ControllerError, ControllerParams};
use plant_core::model::{
    ConfigError, DemandFactorization, DemandState, Model, PlantConfig, SupplyState,
};
use plant_core::processes::{ProcessError, StateProcess};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid plant: {0}")]
    Validation(#[from] ConfigError),
    #[error("invalid scenario: {0}")]
    Reference(String),
    #[error("invalid process: {0}")]
    Process(#[from] ProcessError),
    #[error("invalid controller settings: {0}")]
    Controller(#[from] ControllerError),
}

impl ScenarioError {
    /// Whether the text was well-formed but described an invalid scenario.
    pub fn is_validation(&self) -> bool {
        !matches!(self, ScenarioError::Io { .. } | ScenarioError::Parse(_))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    plant: PlantTable,
    supply_states: Vec<SupplyTable>,
    demand_states: Vec<DemandTable>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    process_x: Option<ProcessTable>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    process_y: Option<ProcessTable>,
    #[serde(default)]
    controller: ControllerSettings,
    #[serde(default)]
    episode: EpisodeSettings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PlantTable {
    beta: Vec<Vec<u64>>,
    alpha: Vec<f64>,
    price_set: Vec<Vec<f64>>,
    #[serde(rename = "D_max")]
    d_max: Vec<u64>,
    #[serde(rename = "A_max")]
    a_max: Vec<u64>,
    c_max: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SupplyTable {
    id: String,
    unit_cost: Vec<u64>,
    available: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DemandTable {
    id: String,
    #[serde(rename = "F", default, skip_serializing_if = "Option::is_none")]
    f: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    h: Option<Vec<f64>>,
    #[serde(rename = "F_hat", default, skip_serializing_if = "Option::is_none")]
    f_hat: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase", deny_unknown_fields)]
enum ProcessTable {
    Iid {
        probs: Vec<f64>,
    },
    Markov {
        transition: Vec<Vec<f64>>,
        initial: String,
    },
    Trace {
        states: Vec<String>,
    },
}

/// Controller settings; command-line flags override them.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerSettings {
    #[serde(rename = "V", default, skip_serializing_if = "Option::is_none")]
    pub v: Option<f64>,
    #[serde(default)]
    pub placeholder: bool,
    #[serde(default)]
    pub demand_blind: bool,
    /// Explicit thresholds replacing the computed ones.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<Vec<f64>>,
    /// Accept thresholds below the safe minimum; queue bounds are then not enforced.
    #[serde(default)]
    pub unsafe_theta: bool,
}

impl ControllerSettings {
    pub fn params(&self, model: &Model) -> Result<ControllerParams, ScenarioError> {
        let v = self.v.ok_or_else(|| {
            ScenarioError::Reference("V is not set (use [controller] V or --V)".into())
        })?;
        let mut params = ControllerParams::new(model, v)?;
        if let Some(theta) = &self.theta {
            params = params.with_theta(model, theta.clone(), self.unsafe_theta)?;
        }
        Ok(params
            .demand_blind(self.demand_blind)
            .placeholder(self.placeholder))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpisodeSettings {
    #[serde(default = "default_horizon")]
    pub horizon: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_replications")]
    pub replications: u64,
}

fn default_horizon() -> u64 {
    100_000
}

fn default_replications() -> u64 {
    1
}

impl Default for EpisodeSettings {
    fn default() -> Self {
        Self {
            horizon: default_horizon(),
            seed: 0,
            replications: default_replications(),
        }
    }
}

/// A validated scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub model: Model,
    pub process_x: StateProcess,
    pub process_y: StateProcess,
    pub controller: ControllerSettings,
    pub episode: EpisodeSettings,
}

pub fn parse_scenario(path: impl AsRef<Path>) -> Result<Scenario, ScenarioError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_scenario_str(&text)
}

pub fn parse_scenario_str(text: &str) -> Result<Scenario, ScenarioError> {
    let file: ScenarioFile =
        toml::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))?;
    from_file(file)
}

fn from_file(file: ScenarioFile) -> Result<Scenario, ScenarioError> {
    let p = file.plant;
    let cfg = PlantConfig {
        beta: p.beta,
        alpha: p.alpha,
        price_sets: p.price_set,
        demand_caps: p.d_max,
        purchase_caps: p.a_max,
        budget: p.c_max,
    };
    let supply = file
        .supply_states
        .into_iter()
        .map(|s| SupplyState {
            id: s.id,
            unit_cost: s.unit_cost,
            available: s.available,
        })
        .collect();
    let demand = file
        .demand_states
        .into_iter()
        .map(demand_state)
        .collect::<Result<Vec<_>, _>>()?;
    let model = Model::new(cfg, supply, demand)?;

    let process_x = resolve_process(file.process_x, model.supply_states().len(), |id| {
        model.supply_index(id)
    })?;
    let process_y = resolve_process(file.process_y, model.demand_states().len(), |id| {
        model.demand_index(id)
    })?;
    process_x.validate(model.supply_states().len())?;
    process_y.validate(model.demand_states().len())?;
    if file.episode.horizon == 0 || file.episode.replications == 0 {
        return Err(ScenarioError::Reference(
            "episode horizon and replications must be at least 1".into(),
        ));
    }
    if file.controller.v.is_some() {
        file.controller.params(&model)?;
    }
    Ok(Scenario {
        model,
        process_x,
        process_y,
        controller: file.controller,
        episode: file.episode,
    })
}

fn demand_state(d: DemandTable) -> Result<DemandState, ScenarioError> {
    match (d.f, d.h, d.f_hat) {
        (expected, Some(scale), Some(base)) => {
            let mut state = DemandState::factorized(d.id, scale, base);
            if let Some(f) = expected {
                state.expected = f;
            }
            Ok(state)
        }
        (Some(expected), None, None) => Ok(DemandState {
            id: d.id,
            expected,
            factorization: None,
        }),
        (None, None, None) => Err(ScenarioError::Reference(format!(
            "demand state {:?} has no F table",
            d.id
        ))),
        _ => Err(ScenarioError::Reference(format!(
            "demand state {:?}: h and F_hat must be given together",
            d.id
        ))),
    }
}

fn resolve_process(
    table: Option<ProcessTable>,
    count: usize,
    index: impl Fn(&str) -> Option<usize>,
) -> Result<StateProcess, ScenarioError> {
    let lookup = |id: &str| {
        index(id).ok_or_else(|| ScenarioError::Reference(format!("unknown state id {id:?}")))
    };
    Ok(match table {
        None => StateProcess::Iid {
            probs: vec![1.0 / count as f64; count],
        },
        Some(ProcessTable::Iid { probs }) => StateProcess::Iid { probs },
        Some(ProcessTable::Markov {
            transition,
            initial,
        }) => StateProcess::Markov {
            transition,
            initial: lookup(&initial)?,
        },
        Some(ProcessTable::Trace { states }) => StateProcess::Trace {
            states: states.iter().map(|s| lookup(s)).collect::<Result<_, _>>()?,
        },
    })
}

fn process_table(process: &StateProcess, ids: &[String]) -> ProcessTable {
    match process {
        StateProcess::Iid { probs } => ProcessTable::Iid {
            probs: probs.clone(),
        },
        StateProcess::Markov {
            transition,
            initial,
        } => ProcessTable::Markov {
            transition: transition.clone(),
            initial: ids[*initial].clone(),
        },
        StateProcess::Trace { states } => ProcessTable::Trace {
            states: states.iter().map(|&s| ids[s].clone()).collect(),
        },
    }
}

/// Renders a scenario as TOML that parses back to an equal [`Scenario`].
pub fn to_toml(scenario: &Scenario) -> String {
    let model = &scenario.model;
    let cfg = model.cfg();
    let supply_ids: Vec<String> = model.supply_states().iter().map(|s| s.id.clone()).collect();
    let demand_ids: Vec<String> = model.demand_states().iter().map(|s| s.id.clone()).collect();
    let file = ScenarioFile {
        plant: PlantTable {
            beta: cfg.beta.clone(),
            alpha: cfg.alpha.clone(),
            price_set: cfg.price_sets.clone(),
            d_max: cfg.demand_caps.clone(),
            a_max: cfg.purchase_caps.clone(),
            c_max: cfg.budget,
        },
        supply_states: model
            .supply_states()
            .iter()
            .map(|s| SupplyTable {
                id: s.id.clone(),
                unit_cost: s.unit_cost.clone(),
                available: s.available.clone(),
            })
            .collect(),
        demand_states: model
            .demand_states()
            .iter()
            .map(|d| {
                let (h, f_hat) = match &d.factorization {
                    Some(DemandFactorization { scale, base }) => {
                        (Some(scale.clone()), Some(base.clone()))
                    }
                    None => (None, None),
                };
                DemandTable {
                    id: d.id.clone(),
                    f: Some(d.expected.clone()),
                    h,
                    f_hat,
                }
            })
            .collect(),
        process_x: Some(process_table(&scenario.process_x, &supply_ids)),
        process_y: Some(process_table(&scenario.process_y, &demand_ids)),
        controller: scenario.controller.clone(),
        episode: scenario.episode.clone(),
    };
    toml::to_string(&file).expect("scenario values are representable in TOML")
}
