//! Exhaustive search over stationary policies of tiny plants.
//!
//! Each supply state and each (product, demand state) pair is a decision unit
//! that picks one option. All pure assignments are enumerated; on top of that,
//! every assignment is tried with one unit mixing two of its options, with the
//! mixing weight taken from a fixed grid plus the exact weights at which a
//! material balance becomes tight. With one material that covers every vertex
//! of the feasible set, so the search is exact; otherwise it is a lower bound.

use crate::model::{purchase_cost, Model};

use super::{check_distribution, enumerate_actions, option_rates, OracleError, PriceOption};

/// Largest number of pure policies searched.
const MAX_PURE: usize = 2_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct BruteForceResult {
    pub value: f64,
    /// `true` when no randomized candidate beat the best pure policy.
    pub pure: bool,
}

/// One option of a decision unit: contribution to profit and to each
/// material's purchase-minus-consumption balance.
#[derive(Debug, Clone)]
struct Choice {
    profit: f64,
    balance: Vec<f64>,
}

fn units(
    model: &Model,
    supply_probs: &[f64],
    demand_probs: &[f64],
) -> Result<Vec<Vec<Choice>>, OracleError> {
    let cfg = model.cfg();
    let mut units = Vec::new();
    for (x, state) in model.supply_states().iter().enumerate() {
        let px = supply_probs[x];
        let choices = enumerate_actions(cfg, state, x)?
            .into_iter()
            .map(|a| Choice {
                profit: -px * purchase_cost(&a, state) as f64,
                balance: a.iter().map(|&u| px * u as f64).collect(),
            })
            .collect();
        units.push(choices);
    }
    for k in 0..cfg.products() {
        for (y, &py) in demand_probs.iter().enumerate() {
            let choices = PriceOption::all(cfg, k)
                .into_iter()
                .map(|o| {
                    let (d, r) = option_rates(cfg, k, model.demand(y), o);
                    Choice {
                        profit: py * r,
                        balance: (0..cfg.materials())
                            .map(|m| -py * cfg.beta[m][k] as f64 * d)
                            .collect(),
                    }
                })
                .collect();
            units.push(choices);
        }
    }
    Ok(units)
}

/// Best profit over pure policies and single-unit two-option mixtures.
///
/// `grid_step` is the spacing of the mixing-weight grid (e.g. 0.05).
pub fn brute_force_opt(
    model: &Model,
    supply_probs: &[f64],
    demand_probs: &[f64],
    grid_step: f64,
) -> Result<BruteForceResult, OracleError> {
    let cfg = model.cfg();
    if model.supply_states().len() > 2
        || model.demand_states().len() > 2
        || cfg.products() > 2
        || cfg.materials() > 2
        || cfg.price_sets.iter().any(|p| p.len() > 3)
    {
        return Err(OracleError::InstanceTooLarge(
            "at most 2 states per process, 2 products, 2 materials and 3 prices".into(),
        ));
    }
    check_distribution(
        supply_probs,
        model.supply_states().len(),
        "supply distribution",
    )?;
    check_distribution(
        demand_probs,
        model.demand_states().len(),
        "demand distribution",
    )?;
    let units = units(model, supply_probs, demand_probs)?;
    let pure_count = units
        .iter()
        .try_fold(1usize, |acc, u| acc.checked_mul(u.len()));
    if pure_count.is_none_or(|c| c > MAX_PURE) {
        return Err(OracleError::InstanceTooLarge(
            "too many pure policies".into(),
        ));
    }

    let mut weights: Vec<f64> = Vec::new();
    let steps = (1.0 / grid_step).round() as usize;
    for i in 1..steps {
        weights.push(i as f64 / steps as f64);
    }

    let materials = cfg.materials();
    let feasible = |bal: &[f64]| bal.iter().all(|&b| b >= -1e-12);
    let mut best = BruteForceResult {
        value: f64::NEG_INFINITY,
        pure: true,
    };
    let mut pick = vec![0usize; units.len()];
    loop {
        let mut profit = 0.0;
        let mut bal = vec![0.0; materials];
        for (u, &c) in units.iter().zip(&pick) {
            profit += u[c].profit;
            for (b, v) in bal.iter_mut().zip(&u[c].balance) {
                *b += v;
            }
        }
        let ties = best.value.is_finite() && !best.pure && profit >= best.value - 1e-12;
        if feasible(&bal) && (profit > best.value + 1e-12 || ties) {
            best = BruteForceResult {
                value: profit,
                pure: true,
            };
        }
        // move unit u from its current option to another option `o` by weight w
        for (u, choices) in units.iter().enumerate() {
            let cur = &choices[pick[u]];
            for (o, alt) in choices.iter().enumerate() {
                if o <= pick[u] {
                    continue;
                }
                let dp = alt.profit - cur.profit;
                let db: Vec<f64> = alt
                    .balance
                    .iter()
                    .zip(&cur.balance)
                    .map(|(a, c)| a - c)
                    .collect();
                let mut candidates = weights.clone();
                for m in 0..materials {
                    if db[m].abs() > 1e-15 {
                        let w = -bal[m] / db[m];
                        if w > 0.0 && w < 1.0 {
                            candidates.push(w);
                        }
                    }
                }
                for w in candidates {
                    let mixed: Vec<f64> = bal.iter().zip(&db).map(|(b, d)| b + w * d).collect();
                    let value = profit + w * dp;
                    if feasible(&mixed) && value > best.value + 1e-12 {
                        best = BruteForceResult { value, pure: false };
                    }
                }
            }
        }

        let mut i = units.len();
        loop {
            if i == 0 {
                return Ok(best);
            }
            i -= 1;
            if pick[i] + 1 < units[i].len() {
                pick[i] += 1;
                pick[i + 1..].iter_mut().for_each(|p| *p = 0);
                break;
            }
        }
    }
}
