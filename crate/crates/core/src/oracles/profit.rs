//! Best stationary profit as a linear program.
//!
//! Variables are the probability of each feasible purchase vector in each
//! supply state and the probability of each pricing option for each product in
//! each demand state. The objective is expected profit per slot; each material
//! must be bought at least as fast as it is expected to be consumed.

use crate::model::{purchase_cost, Model};

use super::simplex::{solve_lp, LinearProgram, LpSolution, Relation};
use super::{check_distribution, enumerate_actions, option_rates, OracleError, PriceOption};

/// A built profit LP together with the meaning of each variable.
#[derive(Debug, Clone)]
pub struct ProfitLp {
    pub lp: LinearProgram,
    pub supply_probs: Vec<f64>,
    pub demand_probs: Vec<f64>,
    /// `actions[x]`: enumerated purchase vectors of supply state `x`.
    pub actions: Vec<Vec<Vec<u64>>>,
    /// `action_vars[x]`: index of the first variable of supply state `x`.
    pub action_vars: Vec<usize>,
    /// `price_vars[k][y]`: index of the first option variable; options follow
    /// [`PriceOption::all`] order.
    pub price_vars: Vec<Vec<usize>>,
}

/// Stationary randomized policy that looks only at the current states.
#[derive(Debug, Clone, PartialEq)]
pub struct OraclePolicy {
    pub supply_probs: Vec<f64>,
    pub demand_probs: Vec<f64>,
    /// `purchase_dist[x]`: purchase vectors with positive probability.
    pub purchase_dist: Vec<Vec<(Vec<u64>, f64)>>,
    /// `price_dist[k][y]`: pricing options with positive probability.
    pub price_dist: Vec<Vec<Vec<(PriceOption, f64)>>>,
    /// Expected purchasing cost per slot.
    pub c_hat: f64,
    /// Expected sales margin per slot.
    pub r_hat: f64,
    /// Expected purchases per material per slot.
    pub a_hat: Vec<f64>,
    /// Expected consumption per material per slot.
    pub mu_hat: Vec<f64>,
    pub phi_opt: f64,
}

impl OraclePolicy {
    /// Expected demand rate and margin revenue of product `k` in demand state `y`.
    pub fn price_aggregates(&self, model: &Model, k: usize, y: usize) -> (f64, f64) {
        self.price_dist[k][y]
            .iter()
            .fold((0.0, 0.0), |(d, r), &(o, p)| {
                let (od, or) = option_rates(model.cfg(), k, model.demand(y), o);
                (d + p * od, r + p * or)
            })
    }
}

/// Builds the profit LP for state distributions `supply_probs` and `demand_probs`.
pub fn build_profit_lp(
    model: &Model,
    supply_probs: &[f64],
    demand_probs: &[f64],
) -> Result<ProfitLp, OracleError> {
    let cfg = model.cfg();
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

    let actions = model
        .supply_states()
        .iter()
        .enumerate()
        .map(|(i, x)| enumerate_actions(cfg, x, i))
        .collect::<Result<Vec<_>, _>>()?;
    let mut next = 0;
    let action_vars: Vec<usize> = actions
        .iter()
        .map(|a| {
            let start = next;
            next += a.len();
            start
        })
        .collect();
    let price_vars: Vec<Vec<usize>> = (0..cfg.products())
        .map(|k| {
            (0..demand_probs.len())
                .map(|_| {
                    let start = next;
                    next += cfg.price_sets[k].len() + 1;
                    start
                })
                .collect()
        })
        .collect();

    let mut lp = LinearProgram::new(next);
    // consumption margin per material: a_hat - mu_hat
    let mut balance = vec![vec![0.0; next]; cfg.materials()];

    for (x, acts) in actions.iter().enumerate() {
        let state = model.supply(x);
        let px = supply_probs[x];
        let vars: Vec<usize> = (action_vars[x]..action_vars[x] + acts.len()).collect();
        for (&v, a) in vars.iter().zip(acts) {
            lp.objective[v] = -px * purchase_cost(a, state) as f64;
            for (m, row) in balance.iter_mut().enumerate() {
                row[v] += px * a[m] as f64;
            }
        }
        lp.add_sparse(
            &vars.iter().map(|&v| (v, 1.0)).collect::<Vec<_>>(),
            Relation::Eq,
            1.0,
        );
    }

    for k in 0..cfg.products() {
        for (y, &py) in demand_probs.iter().enumerate() {
            let options = PriceOption::all(cfg, k);
            let start = price_vars[k][y];
            for (j, &o) in options.iter().enumerate() {
                let (d, r) = option_rates(cfg, k, model.demand(y), o);
                lp.objective[start + j] = py * r;
                for (m, row) in balance.iter_mut().enumerate() {
                    row[start + j] -= py * cfg.beta[m][k] as f64 * d;
                }
            }
            let terms: Vec<(usize, f64)> = (0..options.len()).map(|j| (start + j, 1.0)).collect();
            lp.add_sparse(&terms, Relation::Eq, 1.0);
        }
    }

    for row in balance {
        lp.add(row, Relation::Ge, 0.0);
    }

    Ok(ProfitLp {
        lp,
        supply_probs: supply_probs.to_vec(),
        demand_probs: demand_probs.to_vec(),
        actions,
        action_vars,
        price_vars,
    })
}

fn normalize(mass: &[f64], label: impl Fn() -> String) -> Result<Vec<f64>, OracleError> {
    let clamped: Vec<f64> = mass.iter().map(|v| v.max(0.0)).collect();
    let sum: f64 = clamped.iter().sum();
    if (sum - 1.0).abs() > 1e-6 {
        return Err(OracleError::NormalizationFailure(label()));
    }
    Ok(clamped.iter().map(|v| v / sum).collect())
}

/// Turns an LP solution into conditional distributions and tightens purchases
/// so that expected purchases equal expected consumption for every material.
pub fn extract_xy_policy(
    model: &Model,
    built: &ProfitLp,
    solution: &LpSolution,
) -> Result<OraclePolicy, OracleError> {
    let cfg = model.cfg();
    let mut purchase: Vec<Vec<f64>> = built
        .actions
        .iter()
        .enumerate()
        .map(|(x, acts)| {
            let start = built.action_vars[x];
            normalize(&solution.x[start..start + acts.len()], || {
                format!("supply state {x}")
            })
        })
        .collect::<Result<_, _>>()?;

    let mut price: Vec<Vec<Vec<f64>>> = Vec::with_capacity(cfg.products());
    for k in 0..cfg.products() {
        let n = cfg.price_sets[k].len() + 1;
        let row = (0..built.demand_probs.len())
            .map(|y| {
                let start = built.price_vars[k][y];
                normalize(&solution.x[start..start + n], || {
                    format!("product {k}, demand state {y}")
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        price.push(row);
    }

    let mu_hat: Vec<f64> = (0..cfg.materials())
        .map(|m| {
            (0..cfg.products())
                .map(|k| {
                    let options = PriceOption::all(cfg, k);
                    built
                        .demand_probs
                        .iter()
                        .enumerate()
                        .map(|(y, py)| {
                            let d: f64 = options
                                .iter()
                                .zip(&price[k][y])
                                .map(|(&o, q)| q * option_rates(cfg, k, model.demand(y), o).0)
                                .sum();
                            py * d
                        })
                        .sum::<f64>()
                        * cfg.beta[m][k] as f64
                })
                .sum()
        })
        .collect();

    // shift purchase mass from a to a - e_m until purchases match consumption
    for (m, &target) in mu_hat.iter().enumerate() {
        let a_hat = |purchase: &Vec<Vec<f64>>| -> f64 {
            built
                .actions
                .iter()
                .enumerate()
                .map(|(x, acts)| {
                    built.supply_probs[x]
                        * acts
                            .iter()
                            .zip(&purchase[x])
                            .map(|(a, p)| p * a[m] as f64)
                            .sum::<f64>()
                })
                .sum()
        };
        let mut slack = a_hat(&purchase) - target;
        'outer: while slack > 1e-12 {
            for (x, acts) in built.actions.iter().enumerate() {
                let px = built.supply_probs[x];
                if px <= 0.0 {
                    continue;
                }
                for (i, a) in acts.iter().enumerate() {
                    if a[m] == 0 || purchase[x][i] <= 0.0 {
                        continue;
                    }
                    let mut lower = a.clone();
                    lower[m] -= 1;
                    let j = acts
                        .iter()
                        .position(|b| *b == lower)
                        .expect("feasible purchases are closed under decrements");
                    let delta = purchase[x][i].min(slack / px);
                    purchase[x][i] -= delta;
                    purchase[x][j] += delta;
                    slack -= delta * px;
                    continue 'outer;
                }
            }
            break;
        }
    }

    // purchase cost is linear, so a distribution whose mean is itself a
    // feasible vector can be replaced by that vector
    for (acts, p) in built.actions.iter().zip(purchase.iter_mut()) {
        let mean: Vec<f64> = (0..cfg.materials())
            .map(|m| {
                acts.iter()
                    .zip(p.iter())
                    .map(|(a, q)| q * a[m] as f64)
                    .sum()
            })
            .collect();
        let rounded: Vec<u64> = mean.iter().map(|v| v.round().max(0.0) as u64).collect();
        if mean
            .iter()
            .zip(&rounded)
            .all(|(v, r)| (v - *r as f64).abs() <= 1e-9)
        {
            if let Some(j) = acts.iter().position(|a| *a == rounded) {
                p.iter_mut().for_each(|q| *q = 0.0);
                p[j] = 1.0;
            }
        }
    }

    let purchase_dist: Vec<Vec<(Vec<u64>, f64)>> = built
        .actions
        .iter()
        .zip(&purchase)
        .map(|(acts, p)| {
            acts.iter()
                .zip(p)
                .filter(|(_, &q)| q > 1e-12)
                .map(|(a, &q)| (a.clone(), q))
                .collect()
        })
        .collect();
    let price_dist: Vec<Vec<Vec<(PriceOption, f64)>>> = price
        .iter()
        .enumerate()
        .map(|(k, rows)| {
            let options = PriceOption::all(cfg, k);
            rows.iter()
                .map(|q| {
                    options
                        .iter()
                        .zip(q)
                        .filter(|(_, &p)| p > 1e-12)
                        .map(|(&o, &p)| (o, p))
                        .collect()
                })
                .collect()
        })
        .collect();

    let mut policy = OraclePolicy {
        supply_probs: built.supply_probs.clone(),
        demand_probs: built.demand_probs.clone(),
        purchase_dist,
        price_dist,
        c_hat: 0.0,
        r_hat: 0.0,
        a_hat: vec![0.0; cfg.materials()],
        mu_hat: vec![0.0; cfg.materials()],
        phi_opt: 0.0,
    };
    recompute_aggregates(model, &mut policy);

    let tol = 1e-9 * solution.value.abs().max(1.0);
    if policy.phi_opt < solution.value - tol {
        return Err(OracleError::AggregateMismatch(format!(
            "policy earns {} but the LP value is {}",
            policy.phi_opt, solution.value
        )));
    }
    for m in 0..cfg.materials() {
        if (policy.a_hat[m] - policy.mu_hat[m]).abs() > 1e-9 {
            return Err(OracleError::AggregateMismatch(format!(
                "material {m}: purchases {} vs consumption {}",
                policy.a_hat[m], policy.mu_hat[m]
            )));
        }
    }
    Ok(policy)
}

/// Fills `c_hat`, `r_hat`, `a_hat`, `mu_hat` and `phi_opt` from the distributions.
pub fn recompute_aggregates(model: &Model, policy: &mut OraclePolicy) {
    let cfg = model.cfg();
    policy.c_hat = 0.0;
    policy.r_hat = 0.0;
    policy.a_hat = vec![0.0; cfg.materials()];
    policy.mu_hat = vec![0.0; cfg.materials()];
    for (x, dist) in policy.purchase_dist.iter().enumerate() {
        let px = policy.supply_probs[x];
        for (a, p) in dist {
            policy.c_hat += px * p * purchase_cost(a, model.supply(x)) as f64;
            for (m, &units) in a.iter().enumerate() {
                policy.a_hat[m] += px * p * units as f64;
            }
        }
    }
    for k in 0..cfg.products() {
        for (y, &py) in policy.demand_probs.iter().enumerate() {
            let (d, r) = policy.price_aggregates(model, k, y);
            policy.r_hat += py * r;
            for m in 0..cfg.materials() {
                policy.mu_hat[m] += py * cfg.beta[m][k] as f64 * d;
            }
        }
    }
    policy.phi_opt = policy.r_hat - policy.c_hat;
}

/// Builds, solves and extracts in one call.
pub fn solve_profit(
    model: &Model,
    supply_probs: &[f64],
    demand_probs: &[f64],
) -> Result<OraclePolicy, OracleError> {
    let built = build_profit_lp(model, supply_probs, demand_probs)?;
    let solution = solve_lp(&built.lp)?;
    extract_xy_policy(model, &built, &solution)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances;
    use crate::model::Model;

    #[test]
    fn reference_plant_optimum() {
        let model = instances::single_product();
        let built = build_profit_lp(&model, &[1.0], &[1.0]).unwrap();
        let sol = solve_lp(&built.lp).unwrap();
        assert!((sol.value - 1.0).abs() < 1e-9);

        let policy = extract_xy_policy(&model, &built, &sol).unwrap();
        assert_eq!(policy.purchase_dist, vec![vec![(vec![1], 1.0)]]);
        assert_eq!(
            policy.price_dist,
            vec![vec![vec![(PriceOption::Offer(1), 1.0)]]]
        );
        assert!((policy.r_hat - 2.0).abs() < 1e-9);
        assert!((policy.c_hat - 1.0).abs() < 1e-9);
        assert!((policy.a_hat[0] - 1.0).abs() < 1e-9);
        assert!((policy.mu_hat[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn single_low_price_breaks_even() {
        let (mut cfg, xs, mut ys) = instances::single_product_parts();
        cfg.price_sets = vec![vec![1.0]];
        ys[0].expected = vec![vec![2.0]];
        let model = Model::new(cfg, xs, ys).unwrap();
        let policy = solve_profit(&model, &[1.0], &[1.0]).unwrap();
        assert!(policy.phi_opt.abs() < 1e-9);
    }

    #[test]
    fn zero_demand_gives_the_idle_policy() {
        let (cfg, xs, mut ys) = instances::single_product_parts();
        ys[0].expected = vec![vec![0.0, 0.0]];
        let model = Model::new(cfg, xs, ys).unwrap();
        let policy = solve_profit(&model, &[1.0], &[1.0]).unwrap();
        assert!(policy.phi_opt.abs() < 1e-12);
        assert_eq!(policy.purchase_dist, vec![vec![(vec![0], 1.0)]]);
        assert!(policy.a_hat[0].abs() < 1e-12 && policy.mu_hat[0].abs() < 1e-12);
    }

    #[test]
    fn free_material_is_tightened_to_consumption() {
        let (cfg, mut xs, ys) = instances::single_product_parts();
        xs[0].unit_cost = vec![0];
        let model = Model::new(cfg, xs, ys).unwrap();
        let policy = solve_profit(&model, &[1.0], &[1.0]).unwrap();
        assert!((policy.phi_opt - 2.0).abs() < 1e-9);
        assert!((policy.a_hat[0] - policy.mu_hat[0]).abs() < 1e-9);
    }

    #[test]
    fn two_demand_states() {
        let model = instances::single_product_two_demand_states();
        // high: sell 1 at price 2; low: sell 0.5 at price 2 -> half mass each
        let policy = solve_profit(&model, &[1.0], &[0.5, 0.5]).unwrap();
        assert!((policy.phi_opt - 0.75).abs() < 1e-9);
    }

    #[test]
    fn rejects_bad_distributions() {
        let model = instances::single_product();
        assert!(matches!(
            build_profit_lp(&model, &[0.5], &[1.0]),
            Err(OracleError::InvalidDistribution(_))
        ));
        assert!(matches!(
            build_profit_lp(&model, &[1.0], &[0.5, 0.5]),
            Err(OracleError::DistributionLength { .. })
        ));
    }
}
