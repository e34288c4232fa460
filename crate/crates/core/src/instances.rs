//! Small reference plants used by tests, examples and the CLI fixtures.

use crate::model::{DemandState, Model, PlantConfig, SupplyState};

/// Parts of [`single_product`] before validation, for tests that perturb them.
pub fn single_product_parts() -> (PlantConfig, Vec<SupplyState>, Vec<DemandState>) {
    let cfg = PlantConfig {
        beta: vec![vec![1]],
        alpha: vec![0.0],
        price_sets: vec![vec![1.0, 2.0]],
        demand_caps: vec![2],
        purchase_caps: vec![2],
        budget: 2,
    };
    let supply = vec![SupplyState {
        id: "x".into(),
        unit_cost: vec![1],
        available: vec![2],
    }];
    let demand = vec![DemandState {
        id: "y".into(),
        expected: vec![vec![2.0, 1.0]],
        factorization: None,
    }];
    (cfg, supply, demand)
}

/// One material, one product sold at 1 or 2 with expected demand 2 or 1.
///
/// Material costs 1 per unit, at most 2 units per slot. The optimal time
/// average profit is 1: buy one unit per slot and sell it at price 2.
pub fn single_product() -> Model {
    let (cfg, xs, ys) = single_product_parts();
    Model::new(cfg, xs, ys).expect("reference instance is valid")
}

/// [`single_product`] with a second, weaker demand state (`F = [1, 0.5]`).
///
/// Used with a Markov-modulated demand process.
pub fn single_product_two_demand_states() -> Model {
    let (cfg, xs, mut ys) = single_product_parts();
    ys[0].id = "high".into();
    ys.push(DemandState {
        id: "low".into(),
        expected: vec![vec![1.0, 0.5]],
        factorization: None,
    });
    Model::new(cfg, xs, ys).expect("reference instance is valid")
}
