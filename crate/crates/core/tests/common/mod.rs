#![allow(dead_code)]

use plant_core::model::{DemandState, Model, PlantConfig, SupplyState};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random plant small enough for exhaustive search.
pub fn tiny_model(seed: u64, max_materials: usize) -> Model {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let materials = rng.random_range(1..=max_materials);
    let products = rng.random_range(1..=2);
    let mut beta = vec![vec![0u64; products]; materials];
    for k in 0..products {
        for row in beta.iter_mut() {
            row[k] = rng.random_range(0..=2);
        }
        let m = rng.random_range(0..materials);
        beta[m][k] = beta[m][k].max(1);
    }
    let alpha = (0..products)
        .map(|_| [0.0, 0.25, 0.5][rng.random_range(0..3)])
        .collect();
    let price_sets: Vec<Vec<f64>> = (0..products)
        .map(|_| {
            let mut grid: Vec<f64> = (1..=8).map(|i| i as f64 * 0.5).collect();
            let n = rng.random_range(1..=3);
            let mut picked = Vec::new();
            for _ in 0..n {
                let i = rng.random_range(0..grid.len());
                picked.push(grid.remove(i));
            }
            picked.sort_by(f64::total_cmp);
            picked
        })
        .collect();
    let demand_caps: Vec<u64> = (0..products).map(|_| rng.random_range(1..=3)).collect();
    let purchase_caps: Vec<u64> = (0..materials).map(|_| rng.random_range(1..=3)).collect();
    let cfg = PlantConfig {
        beta,
        alpha,
        price_sets: price_sets.clone(),
        demand_caps: demand_caps.clone(),
        purchase_caps: purchase_caps.clone(),
        budget: rng.random_range(0..=6),
    };
    let supply = (0..rng.random_range(1..=2))
        .map(|i| SupplyState {
            id: format!("x{i}"),
            unit_cost: (0..materials).map(|_| rng.random_range(0..=3)).collect(),
            available: purchase_caps
                .iter()
                .map(|&a| rng.random_range(0..=a))
                .collect(),
        })
        .collect();
    let demand = (0..rng.random_range(1..=2))
        .map(|i| DemandState {
            id: format!("y{i}"),
            expected: (0..products)
                .map(|k| {
                    let mut row: Vec<f64> = price_sets[k]
                        .iter()
                        .map(|_| rng.random_range(0.0..=demand_caps[k] as f64))
                        .collect();
                    row.sort_by(|a, b| b.total_cmp(a));
                    row
                })
                .collect(),
            factorization: None,
        })
        .collect();
    Model::new(cfg, supply, demand).expect("generated plant is valid")
}

/// Random probability vector of length `n`.
pub fn random_probs(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = w.iter().sum();
    let mut p: Vec<f64> = w.iter().map(|v| v / total).collect();
    let rest: f64 = p[..n - 1].iter().sum();
    p[n - 1] = 1.0 - rest;
    p
}

/// The reference plant with a second supply state that sells nothing and a
/// third demand state with no demand.
pub fn multi_state_model() -> Model {
    let (cfg, mut xs, mut ys) = plant_core::instances::single_product_parts();
    xs[0].id = "cheap".into();
    xs.push(SupplyState {
        id: "dry".into(),
        unit_cost: vec![1],
        available: vec![0],
    });
    xs.push(SupplyState {
        id: "pricey".into(),
        unit_cost: vec![2],
        available: vec![2],
    });
    ys[0].id = "high".into();
    ys.push(DemandState {
        id: "low".into(),
        expected: vec![vec![1.0, 0.5]],
        factorization: None,
    });
    ys.push(DemandState {
        id: "none".into(),
        expected: vec![vec![0.0, 0.0]],
        factorization: None,
    });
    Model::new(cfg, xs, ys).expect("valid plant")
}

/// Two materials, two products, demand `h(y) * base(p)` with dyadic `h`.
pub fn factorized_model() -> Model {
    let cfg = PlantConfig {
        beta: vec![vec![1, 2], vec![1, 0]],
        alpha: vec![0.5, 0.25],
        price_sets: vec![vec![2.0, 3.0, 4.0], vec![1.5, 2.5]],
        demand_caps: vec![2, 2],
        purchase_caps: vec![3, 2],
        budget: 5,
    };
    let xs = vec![
        SupplyState {
            id: "normal".into(),
            unit_cost: vec![1, 1],
            available: vec![3, 2],
        },
        SupplyState {
            id: "tight".into(),
            unit_cost: vec![2, 1],
            available: vec![1, 2],
        },
    ];
    let base = vec![vec![1.5, 1.0, 0.5], vec![1.0, 0.75]];
    let ys = vec![
        DemandState::factorized("peak", vec![1.0, 2.0], base.clone()),
        DemandState::factorized("normal", vec![0.5, 1.0], base.clone()),
        DemandState::factorized("slow", vec![0.25, 0.5], base),
    ];
    Model::new(cfg, xs, ys).expect("valid plant")
}
