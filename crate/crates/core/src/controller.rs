//! Joint purchasing and pricing (JPP) controller.
//!
//! Every slot the controller observes the inventory `Q`, the supply state and
//! the demand state, and
//!
//! 1. buys the integer vector `A` minimizing `V * cost(A) + sum_m A_m (Q_m - theta_m)`
//!    within the per-slot caps and budget;
//! 2. for each product whose feeder queues all hold at least `mu_max`, picks the
//!    price maximizing `F(p) * (V (p - alpha_k) + sum_m beta_mk (Q_m - theta_m))`
//!    and offers it only when that maximum is strictly positive;
//! 3. serves every realized demand and updates the queues.
//!
//! With `theta` from [`compute_theta`] and `mu_max <= Q(0) <= theta + A_max`
//! the inventory stays inside `[mu_max, theta + A_max]` on every sample path,
//! so step 3 never runs short.

use thiserror::Error;

use crate::knapsack::bounded_knapsack;
use crate::model::{
    actual_profit, consumption, nominal_profit, purchase_cost, queue_update, schedule_fulfillment,
    Model, SlotDecision, SlotOutcome, SupplyState,
};
use crate::processes::{realize_demand, RngStream};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ControllerError {
    #[error("V must be positive and finite, got {0}")]
    InvalidV(f64),
    #[error("theta has {found} entries, expected {expected}")]
    ThetaLength { expected: usize, found: usize },
    #[error("theta[{material}] = {given} is below the safe value {required}")]
    ThetaTooSmall {
        material: usize,
        given: f64,
        required: f64,
    },
    #[error("demand-blind pricing needs a factorized table in every demand state")]
    MissingFactorization,
    #[error(
        "initial inventory of material {material} is {value}, allowed range is [{low}, {high}]"
    )]
    InitOutOfRange {
        material: usize,
        value: f64,
        low: f64,
        high: f64,
    },
    #[error("slot {slot}: queue {material} = {value} left [{low}, {high}]")]
    InvariantViolation {
        slot: u64,
        material: usize,
        value: u64,
        low: f64,
        high: f64,
    },
}

/// Per-material thresholds large enough for the deterministic queue bounds.
///
/// `theta_m = max_{k: beta_mk > 0} [ V (P_k,max - alpha_k) / beta_mk
///            + sum_{i != m} beta_ik A_i,max / beta_mk + 2 mu_m,max ]`.
/// Materials used by no product get 0.
pub fn compute_theta(model: &Model, v: f64) -> Vec<f64> {
    let cfg = model.cfg();
    let mu_max = model.mu_max();
    (0..cfg.materials())
        .map(|m| {
            (0..cfg.products())
                .filter(|&k| cfg.uses(m, k))
                .map(|k| {
                    let b = cfg.beta[m][k] as f64;
                    let others: f64 = (0..cfg.materials())
                        .filter(|&i| i != m)
                        .map(|i| (cfg.beta[i][k] * cfg.purchase_caps[i]) as f64)
                        .sum();
                    v * (cfg.max_price(k) - cfg.alpha[k]) / b + others / b + 2.0 * mu_max[m] as f64
                })
                .fold(None, |acc: Option<f64>, t| {
                    Some(acc.map_or(t, |a| a.max(t)))
                })
                .unwrap_or(0.0)
        })
        .collect()
}

/// `B = 1/2 sum_m max(A_max^2, mu_max^2)`, the per-slot drift constant.
pub fn drift_constant(model: &Model) -> f64 {
    let cfg = model.cfg();
    0.5 * (0..cfg.materials())
        .map(|m| {
            let a = cfg.purchase_caps[m] as f64;
            let mu = model.mu_max()[m] as f64;
            (a * a).max(mu * mu)
        })
        .sum::<f64>()
}

/// `B(t) = 1/2 sum_m (A_m - mu_m)^2` for one slot.
pub fn slot_drift(purchase: &[u64], consumption: &[u64]) -> f64 {
    0.5 * purchase
        .iter()
        .zip(consumption)
        .map(|(&a, &mu)| {
            let d = a as f64 - mu as f64;
            d * d
        })
        .sum::<f64>()
}

/// `L(Q) = 1/2 sum_m (Q_m - theta_m)^2`.
pub fn lyapunov(queue: &[u64], theta: &[f64]) -> f64 {
    0.5 * queue
        .iter()
        .zip(theta)
        .map(|(&q, t)| (q as f64 - t).powi(2))
        .sum::<f64>()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControllerParams {
    pub v: f64,
    pub theta: Vec<f64>,
    /// Price from the factorized base table, without looking at the demand state.
    pub demand_blind: bool,
    /// Start with `mu_max` fake units per queue.
    pub placeholder: bool,
    /// Return an error as soon as a queue leaves `[mu_max, theta + A_max]`.
    pub strict_bounds: bool,
}

impl ControllerParams {
    pub fn new(model: &Model, v: f64) -> Result<Self, ControllerError> {
        if !(v.is_finite() && v > 0.0) {
            return Err(ControllerError::InvalidV(v));
        }
        Ok(Self {
            v,
            theta: compute_theta(model, v),
            demand_blind: false,
            placeholder: false,
            strict_bounds: true,
        })
    }

    /// Replaces the thresholds. Values below [`compute_theta`] void the queue
    /// bounds and are refused unless `allow_unsafe` is set, in which case
    /// strict bound checking is switched off.
    pub fn with_theta(
        mut self,
        model: &Model,
        theta: Vec<f64>,
        allow_unsafe: bool,
    ) -> Result<Self, ControllerError> {
        let safe = compute_theta(model, self.v);
        if theta.len() != safe.len() {
            return Err(ControllerError::ThetaLength {
                expected: safe.len(),
                found: theta.len(),
            });
        }
        if let Some(m) = (0..safe.len()).find(|&m| theta[m] < safe[m]) {
            if !allow_unsafe {
                return Err(ControllerError::ThetaTooSmall {
                    material: m,
                    given: theta[m],
                    required: safe[m],
                });
            }
            self.strict_bounds = false;
        }
        self.theta = theta;
        Ok(self)
    }

    pub fn demand_blind(mut self, on: bool) -> Self {
        self.demand_blind = on;
        self
    }

    pub fn placeholder(mut self, on: bool) -> Self {
        self.placeholder = on;
        self
    }

    /// Upper inventory bound `theta_m + A_max[m]` per material.
    pub fn queue_ceiling(&self, model: &Model) -> Vec<f64> {
        self.theta
            .iter()
            .zip(&model.cfg().purchase_caps)
            .map(|(t, &a)| t + a as f64)
            .collect()
    }
}

/// Edge indicators: `true` for products with some feeder queue below `mu_max`.
pub fn compute_indicators(model: &Model, queue: &[u64]) -> Vec<bool> {
    let cfg = model.cfg();
    (0..cfg.products())
        .map(|k| (0..cfg.materials()).any(|m| cfg.uses(m, k) && queue[m] < model.mu_max()[m]))
        .collect()
}

/// Purchase vector minimizing `sum_m (V x_m + Q_m - theta_m) A_m` over the
/// feasible integer purchases.
pub fn decide_purchase(
    model: &Model,
    params: &ControllerParams,
    queue: &[u64],
    x: &SupplyState,
) -> Vec<u64> {
    let cfg = model.cfg();
    let weights: Vec<f64> = (0..cfg.materials())
        .map(|m| params.v * x.unit_cost[m] as f64 + queue[m] as f64 - params.theta[m])
        .collect();
    let bounds: Vec<u64> = (0..cfg.materials())
        .map(|m| {
            if weights[m] < 0.0 {
                x.purchase_limit(cfg, m)
            } else {
                0
            }
        })
        .collect();
    if purchase_cost(&bounds, x) <= cfg.budget {
        return bounds;
    }
    let values: Vec<f64> = weights.iter().map(|w| -w).collect();
    bounded_knapsack(&values, &x.unit_cost, &bounds, cfg.budget)
}

/// Per-product offers; `None` withholds the product from sale.
pub fn decide_pricing(
    model: &Model,
    params: &ControllerParams,
    queue: &[u64],
    y: usize,
) -> Vec<Option<usize>> {
    let cfg = model.cfg();
    let state = model.demand(y);
    let blocked = compute_indicators(model, queue);
    (0..cfg.products())
        .map(|k| {
            if blocked[k] {
                return None;
            }
            let pressure: f64 = (0..cfg.materials())
                .map(|m| cfg.beta[m][k] as f64 * (queue[m] as f64 - params.theta[m]))
                .sum();
            let table = if params.demand_blind {
                &state
                    .factorization
                    .as_ref()
                    .expect("checked when the controller was built")
                    .base[k]
            } else {
                &state.expected[k]
            };
            let mut best: Option<(usize, f64)> = None;
            for (i, &f) in table.iter().enumerate() {
                let g = f * (params.v * cfg.margin(k, i) + pressure);
                if best.is_none_or(|(_, top)| g > top) {
                    best = Some((i, g));
                }
            }
            best.filter(|&(_, g)| g > 0.0).map(|(i, _)| i)
        })
        .collect()
}

/// Inventory carried by the controller.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ControllerState {
    /// Total inventory used for control, fake units included.
    pub queue: Vec<u64>,
    /// Place-holder units per queue (zero unless in place-holder mode).
    pub fake: Vec<u64>,
    pub slot: u64,
}

impl ControllerState {
    /// Real inventory on hand.
    pub fn actual(&self) -> Vec<u64> {
        self.queue
            .iter()
            .zip(&self.fake)
            .map(|(q, f)| q - f)
            .collect()
    }
}

/// One controller step's decision and its outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub decision: SlotDecision,
    pub outcome: SlotOutcome,
}

/// JPP bound to a validated model.
#[derive(Debug, Clone)]
pub struct Controller<'a> {
    model: &'a Model,
    params: ControllerParams,
}

impl<'a> Controller<'a> {
    pub fn new(model: &'a Model, params: ControllerParams) -> Result<Self, ControllerError> {
        if params.theta.len() != model.cfg().materials() {
            return Err(ControllerError::ThetaLength {
                expected: model.cfg().materials(),
                found: params.theta.len(),
            });
        }
        if params.demand_blind && !model.is_demand_factorized() {
            return Err(ControllerError::MissingFactorization);
        }
        Ok(Self { model, params })
    }

    pub fn params(&self) -> &ControllerParams {
        &self.params
    }

    pub fn model(&self) -> &Model {
        self.model
    }

    /// Initial state from real inventory `actual`; fake units are added in
    /// place-holder mode.
    pub fn init(&self, actual: &[u64]) -> Result<ControllerState, ControllerError> {
        if self.params.placeholder {
            self.init_placeholder(actual)
        } else {
            self.init_direct(actual)
        }
    }

    /// Starts from `queue` with no fake units; requires `mu_max <= Q <= theta + A_max`.
    pub fn init_direct(&self, queue: &[u64]) -> Result<ControllerState, ControllerError> {
        let ceiling = self.params.queue_ceiling(self.model);
        for (m, &q) in queue.iter().enumerate() {
            let low = self.model.mu_max()[m] as f64;
            if (q as f64) < low || q as f64 > ceiling[m] {
                return Err(ControllerError::InitOutOfRange {
                    material: m,
                    value: q as f64,
                    low,
                    high: ceiling[m],
                });
            }
        }
        Ok(ControllerState {
            queue: queue.to_vec(),
            fake: vec![0; queue.len()],
            slot: 0,
        })
    }

    /// Place-holder start: `Q = actual + mu_max`, with `0 <= actual <= theta + A_max - mu_max`.
    pub fn init_placeholder(&self, actual: &[u64]) -> Result<ControllerState, ControllerError> {
        let ceiling = self.params.queue_ceiling(self.model);
        let mu_max = self.model.mu_max();
        for (m, &q) in actual.iter().enumerate() {
            let high = ceiling[m] - mu_max[m] as f64;
            if q as f64 > high {
                return Err(ControllerError::InitOutOfRange {
                    material: m,
                    value: q as f64,
                    low: 0.0,
                    high,
                });
            }
        }
        Ok(ControllerState {
            queue: actual.iter().zip(mu_max).map(|(a, mu)| a + mu).collect(),
            fake: mu_max.to_vec(),
            slot: 0,
        })
    }

    fn check_bounds(&self, state: &ControllerState) -> Result<(), ControllerError> {
        let ceiling = self.params.queue_ceiling(self.model);
        for (m, &q) in state.queue.iter().enumerate() {
            let low = self.model.mu_max()[m] as f64;
            if (q as f64) < low || q as f64 > ceiling[m] {
                return Err(ControllerError::InvariantViolation {
                    slot: state.slot,
                    material: m,
                    value: q,
                    low,
                    high: ceiling[m],
                });
            }
        }
        Ok(())
    }

    /// Control decision for the current slot, before demand is realized.
    pub fn decide(&self, state: &ControllerState, x: usize, y: usize) -> SlotDecision {
        SlotDecision {
            purchase: decide_purchase(self.model, &self.params, &state.queue, self.model.supply(x)),
            offers: decide_pricing(self.model, &self.params, &state.queue, y),
        }
    }

    /// Runs one slot: decide, draw demand, serve it and advance the queues.
    pub fn step(
        &self,
        state: &mut ControllerState,
        x: usize,
        y: usize,
        rng: &mut RngStream,
    ) -> Result<StepRecord, ControllerError> {
        if self.params.strict_bounds {
            self.check_bounds(state)?;
        }
        let decision = self.decide(state, x, y);
        let outcome = serve(self.model, &state.queue, &decision, x, y, rng);
        state.queue = queue_update(
            self.model.cfg(),
            &state.queue,
            &outcome.fulfilled,
            &decision.purchase,
        );
        state.slot += 1;
        if self.params.strict_bounds {
            self.check_bounds(state)?;
        }
        Ok(StepRecord { decision, outcome })
    }
}

/// Draws demand for every offered product and fulfils it from `queue`.
pub(crate) fn serve(
    model: &Model,
    queue: &[u64],
    decision: &SlotDecision,
    x: usize,
    y: usize,
    rng: &mut RngStream,
) -> SlotOutcome {
    let cfg = model.cfg();
    let demand: Vec<u64> = decision
        .offers
        .iter()
        .enumerate()
        .map(|(k, offer)| offer.map_or(0, |i| realize_demand(cfg, k, i, model.demand(y), rng)))
        .collect();
    let fulfilled = schedule_fulfillment(cfg, queue, &decision.offers, &demand);
    let supply = model.supply(x);
    SlotOutcome {
        phi: nominal_profit(cfg, decision, &demand, supply),
        phi_actual: actual_profit(cfg, decision, &fulfilled, supply),
        consumption: consumption(cfg, &fulfilled),
        demand,
        fulfilled,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances;
    use crate::model::{DemandState, PlantConfig};

    fn params(model: &Model, v: f64) -> ControllerParams {
        ControllerParams::new(model, v).unwrap()
    }

    #[test]
    fn theta_examples() {
        let model = instances::single_product();
        assert_eq!(compute_theta(&model, 10.0), vec![24.0]);
        assert_eq!(compute_theta(&model, 0.0), vec![4.0]);

        let cfg = PlantConfig {
            beta: vec![vec![1], vec![2]],
            alpha: vec![0.0],
            price_sets: vec![vec![3.0]],
            demand_caps: vec![2],
            purchase_caps: vec![2, 2],
            budget: 100,
        };
        let xs = vec![SupplyState {
            id: "x".into(),
            unit_cost: vec![1, 1],
            available: vec![2, 2],
        }];
        let ys = vec![DemandState {
            id: "y".into(),
            expected: vec![vec![1.0]],
            factorization: None,
        }];
        let model = Model::new(cfg, xs, ys).unwrap();
        assert_eq!(model.mu_max(), &[2, 4]);
        assert_eq!(compute_theta(&model, 10.0), vec![38.0, 24.0]);
    }

    #[test]
    fn unused_material_gets_zero_threshold() {
        let (mut cfg, mut xs, ys) = instances::single_product_parts();
        cfg.beta.push(vec![0]);
        cfg.purchase_caps.push(3);
        xs[0].unit_cost.push(1);
        xs[0].available.push(3);
        let model = Model::new(cfg, xs, ys).unwrap();
        assert_eq!(model.unused_materials(), vec![1]);
        assert_eq!(compute_theta(&model, 10.0), vec![24.0, 0.0]);
        let p = params(&model, 10.0);
        assert_eq!(
            decide_purchase(&model, &p, &[5, 0], model.supply(0)),
            vec![2, 0]
        );
    }

    #[test]
    fn indicator_examples() {
        let model = instances::single_product();
        assert_eq!(compute_indicators(&model, &[1]), vec![true]);
        assert_eq!(compute_indicators(&model, &[2]), vec![false]);

        // two materials feeding one product, mu_max = [2, 4]
        let cfg = PlantConfig {
            beta: vec![vec![1], vec![2]],
            alpha: vec![0.0],
            price_sets: vec![vec![5.0]],
            demand_caps: vec![2],
            purchase_caps: vec![2, 4],
            budget: 10,
        };
        let model = Model::new(
            cfg,
            vec![SupplyState {
                id: "x".into(),
                unit_cost: vec![1, 1],
                available: vec![2, 4],
            }],
            vec![DemandState {
                id: "y".into(),
                expected: vec![vec![1.0]],
                factorization: None,
            }],
        )
        .unwrap();
        assert_eq!(model.mu_max(), &[2, 4]);
        assert_eq!(compute_indicators(&model, &[10, 1]), vec![true]);
        assert_eq!(compute_indicators(&model, &[2, 4]), vec![false]);
    }

    #[test]
    fn purchase_examples() {
        let model = instances::single_product();
        let p = params(&model, 10.0);
        let x = model.supply(0);
        assert_eq!(decide_purchase(&model, &p, &[5], x), vec![2]);
        assert_eq!(decide_purchase(&model, &p, &[30], x), vec![0]);
        // w = 10 + 14 - 24 = 0 is not strictly negative
        assert_eq!(decide_purchase(&model, &p, &[14], x), vec![0]);
    }

    #[test]
    fn binding_budget_uses_the_knapsack() {
        let cfg = PlantConfig {
            beta: vec![vec![1], vec![1]],
            alpha: vec![0.0],
            price_sets: vec![vec![1.0]],
            demand_caps: vec![1],
            purchase_caps: vec![1, 1],
            budget: 1,
        };
        let xs = vec![SupplyState {
            id: "x".into(),
            unit_cost: vec![1, 1],
            available: vec![1, 1],
        }];
        let ys = vec![DemandState {
            id: "y".into(),
            expected: vec![vec![1.0]],
            factorization: None,
        }];
        let model = Model::new(cfg, xs, ys).unwrap();
        // w = 1 + Q - 20 = [-5, -3]
        let p = params(&model, 1.0)
            .with_theta(&model, vec![20.0, 20.0], false)
            .unwrap();
        let queue = [14, 16];
        assert_eq!(
            decide_purchase(&model, &p, &queue, model.supply(0)),
            vec![1, 0]
        );
    }

    #[test]
    fn pricing_examples() {
        let model = instances::single_product();
        let p = params(&model, 10.0);
        assert_eq!(decide_pricing(&model, &p, &[5], 0), vec![Some(1)]);
        assert_eq!(decide_pricing(&model, &p, &[4], 0), vec![None]);
        assert_eq!(decide_pricing(&model, &p, &[1], 0), vec![None]);
        // above theta the low price wins: g(1) = 2 (10 + 1) > g(2) = 20 + 1
        assert_eq!(decide_pricing(&model, &p, &[25], 0), vec![Some(0)]);
    }

    #[test]
    fn step_composes_purchase_pricing_and_update() {
        let model = instances::single_product();
        let controller = Controller::new(&model, params(&model, 10.0)).unwrap();
        let mut state = controller.init_direct(&[5]).unwrap();
        let decision = controller.decide(&state, 0, 0);
        assert_eq!(decision.purchase, vec![2]);
        assert_eq!(decision.offers, vec![Some(1)]);

        let mut rng = RngStream::new(42, 0);
        let record = controller.step(&mut state, 0, 0, &mut rng).unwrap();
        let d = record.outcome.demand[0];
        assert_eq!(record.outcome.fulfilled, vec![d]);
        assert_eq!(state.queue, vec![5 + 2 - d]);
        assert_eq!(record.outcome.phi, -2.0 + 2.0 * d as f64);
        assert_eq!(record.outcome.phi, record.outcome.phi_actual);
    }

    #[test]
    fn upper_corner_blocks_purchases() {
        let model = instances::single_product();
        let controller = Controller::new(&model, params(&model, 10.0)).unwrap();
        let state = controller.init_direct(&[26]).unwrap();
        assert_eq!(controller.decide(&state, 0, 0).purchase, vec![0]);
    }

    #[test]
    fn lower_corner_suppresses_sales() {
        let model = instances::single_product();
        let controller = Controller::new(&model, params(&model, 10.0)).unwrap();
        let mut state = controller.init_direct(&[2]).unwrap();
        let mut rng = RngStream::new(1, 0);
        let record = controller.step(&mut state, 0, 0, &mut rng).unwrap();
        assert_eq!(record.decision.offers, vec![None]);
        assert!(state.queue[0] >= 2);
    }

    #[test]
    fn placeholder_initialisation() {
        let model = instances::single_product();
        let p = params(&model, 10.0).placeholder(true);
        let controller = Controller::new(&model, p).unwrap();
        let state = controller.init(&[0]).unwrap();
        assert_eq!(state.queue, vec![2]);
        assert_eq!(state.actual(), vec![0]);
        assert_eq!(controller.init(&[24]).unwrap().queue, vec![26]);
        assert!(matches!(
            controller.init(&[25]),
            Err(ControllerError::InitOutOfRange { .. })
        ));
    }

    #[test]
    fn theta_override_rules() {
        let model = instances::single_product();
        let p = params(&model, 10.0);
        assert!(p.clone().with_theta(&model, vec![30.0], false).is_ok());
        assert!(matches!(
            p.clone().with_theta(&model, vec![10.0], false),
            Err(ControllerError::ThetaTooSmall { .. })
        ));
        let unsafe_params = p.with_theta(&model, vec![10.0], true).unwrap();
        assert!(!unsafe_params.strict_bounds);
    }

    #[test]
    fn demand_blind_requires_factorization() {
        let model = instances::single_product();
        let p = params(&model, 10.0).demand_blind(true);
        assert_eq!(
            Controller::new(&model, p).unwrap_err(),
            ControllerError::MissingFactorization
        );
    }

    #[test]
    fn drift_constant_and_lyapunov() {
        let model = instances::single_product();
        assert_eq!(drift_constant(&model), 2.0);
        assert_eq!(slot_drift(&[2], &[0]), 2.0);
        assert_eq!(lyapunov(&[2], &[24.0]), 242.0);
    }
}
