//! Empirical checks of the controller's profit guarantees.
//!
//! Every check runs independent replications in parallel and compares the
//! mean time-average profit with an analytic bound, allowing three standard
//! errors of noise. A check also fails if any replication broke a queue or
//! drift invariant.

use rayon::prelude::*;

use crate::controller::{drift_constant, lyapunov, ControllerParams};
use crate::model::Model;
use crate::oracles::{lookahead_value, solve_profit};
use crate::processes::StateProcess;

use super::metrics::mean_and_se;
use super::{run_replications, EpisodeConfig, EpisodeReport, SimError};

/// Outcome of a stationary profit-bound check.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    /// Best stationary profit for the long-run state frequencies.
    pub phi_opt: f64,
    /// Lower bound the controller must reach.
    pub bound: f64,
    /// Mean over replications of the time-average realized profit.
    pub mean: f64,
    /// Standard error of `mean`.
    pub se: f64,
    pub replications: u64,
    /// Invariant violations summed over replications.
    pub violations: u64,
    pub queue_min: Vec<u64>,
    pub queue_max: Vec<u64>,
    pub lower_ok: bool,
    /// `mean <= phi_opt + 3 se`; only checked for i.i.d. states.
    pub upper_ok: bool,
}

impl BoundReport {
    pub fn passed(&self) -> bool {
        self.lower_ok && self.upper_ok && self.violations == 0
    }

    /// Shortfall of the measured profit from the optimum.
    pub fn gap(&self) -> f64 {
        self.phi_opt - self.mean
    }
}

/// Profit of one lookahead frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameReport {
    pub start: usize,
    pub phi_t: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceBoundReport {
    pub frames: Vec<FrameReport>,
    /// `(1 / JT) * sum_j phi_T(jT)`.
    pub lookahead_average: f64,
    pub bound: f64,
    pub mean: f64,
    pub se: f64,
    pub replications: u64,
    pub violations: u64,
    pub passed: bool,
}

fn summarize(reports: &[EpisodeReport]) -> (f64, f64, u64, Vec<u64>, Vec<u64>) {
    let averages: Vec<f64> = reports.iter().map(|r| r.metrics.average_profit()).collect();
    let (mean, se) = if reports.len() == 1 {
        (averages[0], reports[0].metrics.batch_standard_error())
    } else {
        mean_and_se(&averages)
    };
    let violations = reports.iter().map(|r| r.metrics.violations()).sum();
    let mut qmin = reports[0].metrics.queue_min.clone();
    let mut qmax = reports[0].metrics.queue_max.clone();
    for r in reports {
        for m in 0..qmin.len() {
            qmin[m] = qmin[m].min(r.metrics.queue_min[m]);
            qmax[m] = qmax[m].max(r.metrics.queue_max[m]);
        }
    }
    (mean, se, violations, qmin, qmax)
}

/// I.i.d. states: the time-average profit lies in `[phi_opt - B/V, phi_opt]`
/// up to noise.
#[allow(clippy::too_many_arguments)]
pub fn check_iid_bound(
    model: &Model,
    params: &ControllerParams,
    supply_probs: &[f64],
    demand_probs: &[f64],
    horizon: u64,
    seed: u64,
    replications: u64,
) -> Result<BoundReport, SimError> {
    let phi_opt = solve_profit(model, supply_probs, demand_probs)?.phi_opt;
    let bound = phi_opt - drift_constant(model) / params.v;
    let ec = EpisodeConfig::jpp(params.clone(), horizon, seed).with_processes(
        StateProcess::Iid {
            probs: supply_probs.to_vec(),
        },
        StateProcess::Iid {
            probs: demand_probs.to_vec(),
        },
    );
    let reports = run_replications(model, &ec, replications.max(1))?;
    let (mean, se, violations, queue_min, queue_max) = summarize(&reports);
    Ok(BoundReport {
        phi_opt,
        bound,
        mean,
        se,
        replications: replications.max(1),
        violations,
        queue_min,
        queue_max,
        lower_ok: mean >= bound - 3.0 * se,
        upper_ok: mean <= phi_opt + 3.0 * se,
    })
}

/// Ergodic states: for a user-supplied `(epsilon, T)` for which the optimal
/// policy's `T`-slot averages are `epsilon`-close to their long-run values,
/// profit is at least
/// `phi_opt - T B / V - epsilon (1 + sum_m max(theta_m, A_max[m]) / V)`.
///
/// Whether `(epsilon, T)` actually has that property is assumed, not verified.
#[allow(clippy::too_many_arguments)]
pub fn check_markov_bound(
    model: &Model,
    params: &ControllerParams,
    supply: &StateProcess,
    demand: &StateProcess,
    epsilon: f64,
    frame: u64,
    horizon: u64,
    seed: u64,
    replications: u64,
) -> Result<BoundReport, SimError> {
    let pi_x = supply.long_run_distribution(model.supply_states().len())?;
    let pi_y = demand.long_run_distribution(model.demand_states().len())?;
    let phi_opt = solve_profit(model, &pi_x, &pi_y)?.phi_opt;
    let cfg = model.cfg();
    let spread: f64 = params
        .theta
        .iter()
        .zip(&cfg.purchase_caps)
        .map(|(t, &a)| t.max(a as f64))
        .sum();
    let bound = phi_opt
        - frame as f64 * drift_constant(model) / params.v
        - epsilon * (1.0 + spread / params.v);
    let ec = EpisodeConfig::jpp(params.clone(), horizon, seed)
        .with_processes(supply.clone(), demand.clone());
    let reports = run_replications(model, &ec, replications.max(1))?;
    let (mean, se, violations, queue_min, queue_max) = summarize(&reports);
    Ok(BoundReport {
        phi_opt,
        bound,
        mean,
        se,
        replications: replications.max(1),
        violations,
        queue_min,
        queue_max,
        lower_ok: mean >= bound - 3.0 * se,
        upper_ok: true,
    })
}

/// Arbitrary state sequences: over `J` frames of `T` slots the average profit
/// is at least the average `T`-slot lookahead optimum minus
/// `B T / V + L(Q(0)) / (V J T)`.
///
/// The trace is fixed; replications differ only in demand randomness.
#[allow(clippy::too_many_arguments)]
pub fn check_trace_bound(
    model: &Model,
    params: &ControllerParams,
    trace: &[(usize, usize)],
    frame: usize,
    frames: usize,
    seed: u64,
    replications: u64,
) -> Result<TraceBoundReport, SimError> {
    let slots = frame * frames;
    if frame == 0 || frames == 0 || trace.len() < slots {
        return Err(SimError::TraceTooShort {
            len: trace.len(),
            needed: slots.max(1),
        });
    }
    let trace = &trace[..slots];
    let values = (0..frames)
        .into_par_iter()
        .map(|j| lookahead_value(model, &trace[j * frame..(j + 1) * frame]).map(|r| r.phi_t))
        .collect::<Result<Vec<_>, _>>()?;
    let lookahead_average = values.iter().sum::<f64>() / slots as f64;

    let q0 = model.mu_max().to_vec();
    let bound = lookahead_average
        - drift_constant(model) * frame as f64 / params.v
        - lyapunov(&q0, &params.theta) / (params.v * slots as f64);

    let supply = StateProcess::Trace {
        states: trace.iter().map(|s| s.0).collect(),
    };
    let demand = StateProcess::Trace {
        states: trace.iter().map(|s| s.1).collect(),
    };
    let mut ec =
        EpisodeConfig::jpp(params.clone(), slots as u64, seed).with_processes(supply, demand);
    ec.initial_inventory = Some(if params.placeholder {
        vec![0; q0.len()]
    } else {
        q0
    });
    let reports = run_replications(model, &ec, replications.max(1))?;
    let (mean, se, violations, _, _) = summarize(&reports);
    Ok(TraceBoundReport {
        frames: values
            .into_iter()
            .enumerate()
            .map(|(j, phi_t)| FrameReport {
                start: j * frame,
                phi_t,
            })
            .collect(),
        lookahead_average,
        bound,
        mean,
        se,
        replications: replications.max(1),
        violations,
        passed: violations == 0 && mean >= bound - 3.0 * se,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances;

    #[test]
    fn iid_check_on_the_reference_plant() {
        let model = instances::single_product();
        let params = ControllerParams::new(&model, 10.0).unwrap();
        let rep = check_iid_bound(&model, &params, &[1.0], &[1.0], 20_000, 1, 4).unwrap();
        assert!((rep.phi_opt - 1.0).abs() < 1e-9);
        assert!((rep.bound - 0.8).abs() < 1e-9);
        assert!(rep.passed(), "{rep:?}");
    }

    #[test]
    fn degenerate_chain_reduces_to_the_iid_bound() {
        let model = instances::single_product();
        let params = ControllerParams::new(&model, 10.0).unwrap();
        let chain = StateProcess::Markov {
            transition: vec![vec![1.0]],
            initial: 0,
        };
        let rep =
            check_markov_bound(&model, &params, &chain, &chain, 0.0, 1, 20_000, 1, 2).unwrap();
        assert!((rep.bound - 0.8).abs() < 1e-9);
        assert!(rep.passed(), "{rep:?}");
    }

    #[test]
    fn constant_trace_lookahead() {
        let model = instances::single_product();
        let params = ControllerParams::new(&model, 10.0).unwrap();
        let trace = vec![(0, 0); 2_000];
        let rep = check_trace_bound(&model, &params, &trace, 1, 2_000, 3, 2).unwrap();
        assert!((rep.lookahead_average - 1.0).abs() < 1e-9);
        // L(Q(0)) = (2 - 24)^2 / 2 = 242
        assert!((rep.bound - (1.0 - 0.2 - 242.0 / 20_000.0)).abs() < 1e-9);
        assert!(rep.passed, "{rep:?}");
    }

    #[test]
    fn short_trace_is_rejected() {
        let model = instances::single_product();
        let params = ControllerParams::new(&model, 10.0).unwrap();
        assert!(matches!(
            check_trace_bound(&model, &params, &[(0, 0); 3], 2, 2, 0, 1),
            Err(SimError::TraceTooShort { .. })
        ));
    }
}
