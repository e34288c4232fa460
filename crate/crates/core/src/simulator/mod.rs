//! Seeded episodes of a policy against supply and demand state processes.
//!
//! Each episode owns two random streams: one drives the state processes, the
//! other draws demand and randomized policy choices. Episodes are therefore
//! reproducible bit for bit and independent across stream ids.

mod checks;
mod log;
mod metrics;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rayon::prelude::*;
use thiserror::Error;

use crate::controller::{
    compute_indicators, drift_constant, serve, slot_drift, Controller, ControllerError,
    ControllerParams, ControllerState,
};
use crate::model::{queue_update, Model, SlotDecision, SlotOutcome};
use crate::oracles::{OracleError, OraclePolicy};
use crate::processes::{ProcessError, RngStream, StateProcess};

pub use checks::{
    check_iid_bound, check_markov_bound, check_trace_bound, BoundReport, FrameReport,
    TraceBoundReport,
};
pub use log::{format_float, log_header, SlotRecord};
pub use metrics::{mean_and_se, Metrics, BATCHES};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("horizon must be at least 1")]
    EmptyHorizon,
    #[error("oracle policy does not match the model: {0}")]
    PolicyShape(String),
    #[error("initial inventory has {found} entries, expected {expected}")]
    InitialInventory { expected: usize, found: usize },
    #[error("trace has {len} slots, {needed} needed")]
    TraceTooShort { len: usize, needed: usize },
    #[error(transparent)]
    Controller(#[from] ControllerError),
    #[error(transparent)]
    Process(#[from] ProcessError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

/// Which policy drives the plant.
#[derive(Debug, Clone, PartialEq)]
pub enum PolicySpec {
    Jpp(ControllerParams),
    /// Replays a stationary randomized policy; demand is served as far as
    /// inventory allows.
    Oracle(OraclePolicy),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeConfig {
    pub horizon: u64,
    pub seed: u64,
    pub stream: u64,
    pub policy: PolicySpec,
    pub supply_process: StateProcess,
    pub demand_process: StateProcess,
    /// Real starting inventory. Defaults to `mu_max`, or zero in place-holder mode.
    pub initial_inventory: Option<Vec<u64>>,
    /// Sell from finished-product buffers and assemble during the slot.
    pub assembly_delay: bool,
    pub record_log: bool,
}

impl EpisodeConfig {
    pub fn jpp(params: ControllerParams, horizon: u64, seed: u64) -> Self {
        Self {
            horizon,
            seed,
            stream: 0,
            policy: PolicySpec::Jpp(params),
            supply_process: StateProcess::constant(),
            demand_process: StateProcess::constant(),
            initial_inventory: None,
            assembly_delay: false,
            record_log: false,
        }
    }

    pub fn with_stream(mut self, stream: u64) -> Self {
        self.stream = stream;
        self
    }

    pub fn with_processes(mut self, supply: StateProcess, demand: StateProcess) -> Self {
        self.supply_process = supply;
        self.demand_process = demand;
        self
    }

    pub fn with_log(mut self) -> Self {
        self.record_log = true;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeReport {
    pub metrics: Metrics,
    pub log: Vec<SlotRecord>,
}

fn sample(dist: &WeightedIndex<f64>, rng: &mut RngStream) -> usize {
    dist.sample(rng)
}

struct OraclePlayer<'a> {
    policy: &'a OraclePolicy,
    purchase: Vec<WeightedIndex<f64>>,
    price: Vec<Vec<WeightedIndex<f64>>>,
}

impl<'a> OraclePlayer<'a> {
    fn new(model: &Model, policy: &'a OraclePolicy) -> Result<Self, SimError> {
        let cfg = model.cfg();
        if policy.purchase_dist.len() != model.supply_states().len()
            || policy.price_dist.len() != cfg.products()
            || policy
                .price_dist
                .iter()
                .any(|r| r.len() != model.demand_states().len())
        {
            return Err(SimError::PolicyShape("state or product count".into()));
        }
        let weights =
            |w: Vec<f64>| WeightedIndex::new(w).map_err(|e| SimError::PolicyShape(e.to_string()));
        let purchase = policy
            .purchase_dist
            .iter()
            .map(|d| weights(d.iter().map(|(_, p)| *p).collect()))
            .collect::<Result<_, _>>()?;
        let price = policy
            .price_dist
            .iter()
            .map(|rows| {
                rows.iter()
                    .map(|d| weights(d.iter().map(|(_, p)| *p).collect()))
                    .collect::<Result<Vec<_>, _>>()
            })
            .collect::<Result<_, _>>()?;
        Ok(Self {
            policy,
            purchase,
            price,
        })
    }

    fn decide(&self, x: usize, y: usize, rng: &mut RngStream) -> SlotDecision {
        let a = sample(&self.purchase[x], rng);
        let purchase = self.policy.purchase_dist[x][a].0.clone();
        let offers = self
            .price
            .iter()
            .enumerate()
            .map(|(k, rows)| {
                let o = sample(&rows[y], rng);
                self.policy.price_dist[k][y][o].0.offer()
            })
            .collect();
        SlotDecision { purchase, offers }
    }
}

/// Runs one episode. With `assembly_delay` set this is [`run_assembly_delay`].
pub fn run_episode(model: &Model, ec: &EpisodeConfig) -> Result<EpisodeReport, SimError> {
    if ec.horizon == 0 {
        return Err(SimError::EmptyHorizon);
    }
    let cfg = model.cfg();
    let materials = cfg.materials();
    ec.supply_process.validate(model.supply_states().len())?;
    ec.demand_process.validate(model.demand_states().len())?;
    if let Some(q) = &ec.initial_inventory {
        if q.len() != materials {
            return Err(SimError::InitialInventory {
                expected: materials,
                found: q.len(),
            });
        }
    }

    let mut state_rng = RngStream::new(ec.seed, 2 * ec.stream);
    let mut rng = RngStream::new(ec.seed, 2 * ec.stream + 1);
    let mut xs = ec.supply_process.sampler()?;
    let mut ys = ec.demand_process.sampler()?;

    let (controller, oracle) = match &ec.policy {
        PolicySpec::Jpp(params) => (Some(Controller::new(model, params.clone())?), None),
        PolicySpec::Oracle(policy) => (None, Some(OraclePlayer::new(model, policy)?)),
    };

    let mut state = match &controller {
        Some(c) => {
            let actual = ec.initial_inventory.clone().unwrap_or_else(|| {
                if c.params().placeholder {
                    vec![0; materials]
                } else {
                    model.mu_max().to_vec()
                }
            });
            c.init(&actual)?
        }
        None => ControllerState {
            queue: ec
                .initial_inventory
                .clone()
                .unwrap_or_else(|| model.mu_max().to_vec()),
            fake: vec![0; materials],
            slot: 0,
        },
    };

    let (low, high) = match &controller {
        Some(c) => (
            model.mu_max().iter().map(|&m| m as f64).collect(),
            c.params().queue_ceiling(model),
        ),
        None => (
            vec![f64::NEG_INFINITY; materials],
            vec![f64::INFINITY; materials],
        ),
    };

    let b = drift_constant(model);
    let mut metrics = Metrics::new(ec.horizon, &state.queue, b);
    let mut log = Vec::new();
    let mut product_queue = cfg.demand_caps.clone();

    for t in 0..ec.horizon {
        let x = xs.next_state(t, &mut state_rng)?;
        let y = ys.next_state(t, &mut state_rng)?;

        if t == 0 && ec.assembly_delay {
            let x0 = model.supply(x);
            metrics.startup_cost = (0..cfg.products())
                .map(|k| {
                    let parts: f64 = (0..materials)
                        .map(|m| (cfg.beta[m][k] * x0.unit_cost[m]) as f64)
                        .sum();
                    cfg.demand_caps[k] as f64 * (cfg.alpha[k] + parts)
                })
                .sum();
        }
        if ec.assembly_delay && product_queue != cfg.demand_caps {
            metrics.product_queue_violations += 1;
        }

        let decision = match (&controller, &oracle) {
            (Some(c), _) => c.decide(&state, x, y),
            (None, Some(o)) => o.decide(x, y, &mut rng),
            _ => unreachable!(),
        };
        let outcome = serve(model, &state.queue, &decision, x, y, &mut rng);
        let SlotOutcome {
            demand,
            fulfilled,
            consumption: used,
            phi,
            phi_actual,
        } = outcome;
        if ec.assembly_delay {
            // customers take finished goods now; assembly refills the buffers
            // from the material queues by the end of the slot
            for (pq, d) in product_queue.iter_mut().zip(&fulfilled) {
                *pq -= d;
            }
            for (pq, d) in product_queue.iter_mut().zip(&fulfilled) {
                *pq += d;
            }
        }
        if let Some(c) = &controller {
            let blocked = compute_indicators(model, &state.queue);
            debug_assert!(decision
                .offers
                .iter()
                .zip(&blocked)
                .all(|(o, b)| !(*b && o.is_some())));
            for m in 0..materials {
                if state.queue[m] as f64 > c.params().theta[m] && decision.purchase[m] > 0 {
                    metrics.purchase_above_threshold += 1;
                }
            }
        }

        let inventory = if ec.record_log {
            state.actual()
        } else {
            Vec::new()
        };
        state.queue = queue_update(cfg, &state.queue, &fulfilled, &decision.purchase);
        state.slot += 1;

        metrics.record_slot(
            phi,
            phi_actual,
            slot_drift(&decision.purchase, &used),
            &state.queue,
            &low,
            &high,
        );

        if let Some(c) = &controller {
            if c.params().strict_bounds {
                if let Some(m) = (0..materials)
                    .find(|&m| (state.queue[m] as f64) < low[m] || state.queue[m] as f64 > high[m])
                {
                    return Err(ControllerError::InvariantViolation {
                        slot: state.slot,
                        material: m,
                        value: state.queue[m],
                        low: low[m],
                        high: high[m],
                    }
                    .into());
                }
            }
        }

        if ec.record_log {
            let cumulative = metrics.total_profit - metrics.startup_cost;
            log.push(SlotRecord {
                t,
                x,
                y,
                inventory,
                purchase: decision.purchase.clone(),
                offers: decision.offers.clone(),
                demand: demand.clone(),
                phi,
                phi_actual,
                cumulative_profit: cumulative,
                avg_phi: cumulative / (t + 1) as f64,
            });
        }
    }
    metrics.finish(&state.queue, &state.fake);
    Ok(EpisodeReport { metrics, log })
}

/// Episode in which finished products are sold from buffers holding `D_max`
/// units and assembled by the end of the slot. Decisions and material queues
/// are those of [`run_episode`]; profit is lower by the one-time cost of
/// filling the buffers.
pub fn run_assembly_delay(model: &Model, ec: &EpisodeConfig) -> Result<EpisodeReport, SimError> {
    let mut ec = ec.clone();
    ec.assembly_delay = true;
    run_episode(model, &ec)
}

/// Runs `replications` episodes on streams `ec.stream, ec.stream + 1, ...` in parallel.
pub fn run_replications(
    model: &Model,
    ec: &EpisodeConfig,
    replications: u64,
) -> Result<Vec<EpisodeReport>, SimError> {
    (0..replications)
        .into_par_iter()
        .map(|r| run_episode(model, &ec.clone().with_stream(ec.stream + r)))
        .collect()
}
