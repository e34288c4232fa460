//! Reference computations of the best achievable profit.
//!
//! - [`profit`]: the stationary optimum as a linear program over randomized
//!   policies that look only at the current supply and demand states.
//! - [`brute`]: an independent enumeration oracle for tiny instances.
//! - [`two_price`]: reduction of any pricing distribution to at most two prices.
//! - [`lookahead`]: the best expected profit over a known frame of states.

pub mod brute;
pub mod lookahead;
pub mod profit;
pub mod simplex;
pub mod two_price;

use thiserror::Error;

use crate::model::{DemandState, PlantConfig, SupplyState};

pub use brute::{brute_force_opt, BruteForceResult};
pub use lookahead::{lookahead_value, LookaheadResult};
pub use profit::{build_profit_lp, extract_xy_policy, solve_profit, OraclePolicy, ProfitLp};
pub use simplex::{solve_lp, LinearProgram, LpError, LpSolution, Relation};
pub use two_price::{reduce_price_distribution, two_price_reduce, TwoPriceEntry, TwoPricePolicy};

/// Largest action set enumerated per supply state.
pub const MAX_ACTIONS: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("supply state {state} has more than {limit} feasible purchase vectors")]
    ActionSpaceTooLarge { state: usize, limit: usize },
    #[error("instance too large for exhaustive search: {0}")]
    InstanceTooLarge(String),
    #[error("{what} has {found} entries, expected {expected}")]
    DistributionLength {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("{0} is not a probability distribution")]
    InvalidDistribution(&'static str),
    #[error("solution mass for {0} does not normalize")]
    NormalizationFailure(String),
    #[error("aggregate check failed: {0}")]
    AggregateMismatch(String),
    #[error("demand rate {target} lies outside [0, {max}] for product {product}")]
    TargetOutsideHull {
        product: usize,
        target: f64,
        max: f64,
    },
    #[error(transparent)]
    Lp(#[from] LpError),
}

/// A pricing choice for one product in one slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PriceOption {
    /// Not offered for sale (`Z = 0`).
    Idle,
    /// Offered at the price with this index (`Z = 1`).
    Offer(usize),
}

impl PriceOption {
    /// `Idle` followed by one offer per price.
    pub fn all(cfg: &PlantConfig, k: usize) -> Vec<PriceOption> {
        std::iter::once(PriceOption::Idle)
            .chain((0..cfg.price_sets[k].len()).map(PriceOption::Offer))
            .collect()
    }

    pub fn offer(self) -> Option<usize> {
        match self {
            PriceOption::Idle => None,
            PriceOption::Offer(i) => Some(i),
        }
    }
}

/// Expected demand rate and expected margin revenue of one pricing option.
pub(crate) fn option_rates(
    cfg: &PlantConfig,
    k: usize,
    y: &DemandState,
    o: PriceOption,
) -> (f64, f64) {
    match o {
        PriceOption::Idle => (0.0, 0.0),
        PriceOption::Offer(i) => {
            let f = y.mean(k, i);
            (f, cfg.margin(k, i) * f)
        }
    }
}

/// All integer purchase vectors allowed in supply state `x`, in lexicographic order.
pub fn enumerate_actions(
    cfg: &PlantConfig,
    x: &SupplyState,
    state: usize,
) -> Result<Vec<Vec<u64>>, OracleError> {
    let limits: Vec<u64> = (0..cfg.materials())
        .map(|m| x.purchase_limit(cfg, m))
        .collect();
    let mut out = Vec::new();
    let mut current = vec![0u64; limits.len()];
    fn walk(
        m: usize,
        spent: u64,
        limits: &[u64],
        costs: &[u64],
        budget: u64,
        current: &mut Vec<u64>,
        out: &mut Vec<Vec<u64>>,
    ) -> bool {
        if m == limits.len() {
            out.push(current.clone());
            return out.len() <= MAX_ACTIONS;
        }
        for a in 0..=limits[m] {
            let cost = spent + a * costs[m];
            if cost > budget {
                break;
            }
            current[m] = a;
            if !walk(m + 1, cost, limits, costs, budget, current, out) {
                return false;
            }
        }
        current[m] = 0;
        true
    }
    if walk(
        0,
        0,
        &limits,
        &x.unit_cost,
        cfg.budget,
        &mut current,
        &mut out,
    ) {
        Ok(out)
    } else {
        Err(OracleError::ActionSpaceTooLarge {
            state,
            limit: MAX_ACTIONS,
        })
    }
}

pub(crate) fn check_distribution(
    p: &[f64],
    count: usize,
    what: &'static str,
) -> Result<(), OracleError> {
    if p.len() != count {
        return Err(OracleError::DistributionLength {
            what,
            expected: count,
            found: p.len(),
        });
    }
    let sum: f64 = p.iter().sum();
    if p.iter().any(|v| !v.is_finite() || *v < 0.0) || (sum - 1.0).abs() > 1e-9 {
        return Err(OracleError::InvalidDistribution(what));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances;

    #[test]
    fn actions_of_the_reference_plant() {
        let model = instances::single_product();
        let acts = enumerate_actions(model.cfg(), model.supply(0), 0).unwrap();
        assert_eq!(acts, vec![vec![0], vec![1], vec![2]]);
    }

    #[test]
    fn budget_prunes_actions() {
        let (mut cfg, xs, _) = instances::single_product_parts();
        cfg.budget = 1;
        assert_eq!(
            enumerate_actions(&cfg, &xs[0], 0).unwrap(),
            vec![vec![0], vec![1]]
        );
    }

    #[test]
    fn guard_on_huge_action_sets() {
        let (mut cfg, mut xs, _) = instances::single_product_parts();
        cfg.beta = vec![vec![1]; 3];
        cfg.purchase_caps = vec![100; 3];
        cfg.budget = 10_000;
        xs[0].unit_cost = vec![1; 3];
        xs[0].available = vec![100; 3];
        assert!(matches!(
            enumerate_actions(&cfg, &xs[0], 0),
            Err(OracleError::ActionSpaceTooLarge { .. })
        ));
    }
}
