//! Best expected profit over a frame whose supply and demand states are known
//! in advance.
//!
//! Each slot gets its own distribution over feasible purchase vectors and, per
//! product, over pricing options. Demand is still random, so the objective is
//! the summed expected profit, and over the whole frame expected purchases of
//! every material must equal expected consumption. Materials may be used
//! before they are bought as long as the frame balances.

use crate::model::{purchase_cost, Model};

use super::simplex::{solve_lp, LinearProgram, Relation};
use super::{enumerate_actions, option_rates, OracleError, PriceOption};

/// Optimal frame value and the expected per-slot quantities achieving it.
#[derive(Debug, Clone, PartialEq)]
pub struct LookaheadResult {
    /// Summed expected profit over the frame.
    pub phi_t: f64,
    /// `purchases[tau][m]`: expected units of material `m` bought in slot `tau`.
    pub purchases: Vec<Vec<f64>>,
    /// `consumption[tau][m]`: expected units of material `m` consumed in slot `tau`.
    pub consumption: Vec<Vec<f64>>,
    /// Expected profit of each slot.
    pub profit: Vec<f64>,
}

/// Solves the frame `(x, y)` state indices, one pair per slot.
pub fn lookahead_value(
    model: &Model,
    frame: &[(usize, usize)],
) -> Result<LookaheadResult, OracleError> {
    let cfg = model.cfg();
    let (materials, products) = (cfg.materials(), cfg.products());

    struct Slot {
        actions: Vec<Vec<u64>>,
        action_start: usize,
        price_start: Vec<usize>,
    }
    let mut next = 0;
    let mut slots = Vec::with_capacity(frame.len());
    for &(x, _) in frame {
        let actions = enumerate_actions(cfg, model.supply(x), x)?;
        let action_start = next;
        next += actions.len();
        let price_start = (0..products)
            .map(|k| {
                let s = next;
                next += cfg.price_sets[k].len() + 1;
                s
            })
            .collect();
        slots.push(Slot {
            actions,
            action_start,
            price_start,
        });
    }

    let mut lp = LinearProgram::new(next);
    let mut balance = vec![vec![0.0; next]; materials];
    for (slot, &(x, y)) in slots.iter().zip(frame) {
        let supply = model.supply(x);
        for (j, a) in slot.actions.iter().enumerate() {
            let v = slot.action_start + j;
            lp.objective[v] = -(purchase_cost(a, supply) as f64);
            for m in 0..materials {
                balance[m][v] += a[m] as f64;
            }
        }
        let terms: Vec<(usize, f64)> = (0..slot.actions.len())
            .map(|j| (slot.action_start + j, 1.0))
            .collect();
        lp.add_sparse(&terms, Relation::Eq, 1.0);

        for k in 0..products {
            let options = PriceOption::all(cfg, k);
            for (j, &o) in options.iter().enumerate() {
                let v = slot.price_start[k] + j;
                let (d, r) = option_rates(cfg, k, model.demand(y), o);
                lp.objective[v] = r;
                for m in 0..materials {
                    balance[m][v] -= cfg.beta[m][k] as f64 * d;
                }
            }
            let terms: Vec<(usize, f64)> = (0..options.len())
                .map(|j| (slot.price_start[k] + j, 1.0))
                .collect();
            lp.add_sparse(&terms, Relation::Eq, 1.0);
        }
    }
    for row in balance {
        lp.add(row, Relation::Eq, 0.0);
    }

    let sol = solve_lp(&lp)?;

    let mut result = LookaheadResult {
        phi_t: sol.value,
        purchases: Vec::with_capacity(frame.len()),
        consumption: Vec::with_capacity(frame.len()),
        profit: Vec::with_capacity(frame.len()),
    };
    for (slot, &(x, y)) in slots.iter().zip(frame) {
        let mut bought = vec![0.0; materials];
        let mut used = vec![0.0; materials];
        let mut profit = 0.0;
        for (j, a) in slot.actions.iter().enumerate() {
            let p = sol.x[slot.action_start + j];
            profit -= p * purchase_cost(a, model.supply(x)) as f64;
            for m in 0..materials {
                bought[m] += p * a[m] as f64;
            }
        }
        for k in 0..products {
            for (j, &o) in PriceOption::all(cfg, k).iter().enumerate() {
                let p = sol.x[slot.price_start[k] + j];
                let (d, r) = option_rates(cfg, k, model.demand(y), o);
                profit += p * r;
                for m in 0..materials {
                    used[m] += p * cfg.beta[m][k] as f64 * d;
                }
            }
        }
        result.purchases.push(bought);
        result.consumption.push(used);
        result.profit.push(profit);
    }
    Ok(result)
}
