//! Exogenous supply/demand state processes, the seeded RNG and demand sampling.

use std::collections::VecDeque;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Binomial;
use thiserror::Error;

use crate::model::{DemandState, PlantConfig};

const PROB_SUM_TOL: f64 = 1e-12;
const STATIONARY_RESIDUAL: f64 = 1e-12;
const MAX_POWER_ITERATIONS: usize = 10_000_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProcessError {
    #[error("{what}: probabilities must be non-negative and sum to 1 (sum = {sum})")]
    InvalidDistribution { what: String, sum: f64 },
    #[error("{what}: expected {expected} entries, found {found}")]
    DimensionMismatch {
        what: String,
        expected: usize,
        found: usize,
    },
    #[error("state index {index} out of range for {count} states")]
    UnknownState { index: usize, count: usize },
    #[error("trace is empty")]
    EmptyTrace,
    #[error("trace of length {len} exhausted at slot {t}")]
    TraceExhausted { t: u64, len: usize },
    #[error("Markov chain is not ergodic: {0}")]
    NotErgodic(String),
    #[error("power iteration did not reach residual {STATIONARY_RESIDUAL}")]
    NoConvergence,
    #[error("trace line {line}: {message}")]
    TraceFormat { line: usize, message: String },
}

/// How a state sequence (supply or demand) is generated.
#[derive(Debug, Clone, PartialEq)]
pub enum StateProcess {
    /// Independent draws from `probs` every slot.
    Iid { probs: Vec<f64> },
    /// A finite Markov chain started in `initial`.
    Markov {
        transition: Vec<Vec<f64>>,
        initial: usize,
    },
    /// A fixed, finite sequence of state indices.
    Trace { states: Vec<usize> },
}

fn check_distribution(what: &str, probs: &[f64], count: usize) -> Result<(), ProcessError> {
    if probs.len() != count {
        return Err(ProcessError::DimensionMismatch {
            what: what.to_string(),
            expected: count,
            found: probs.len(),
        });
    }
    let sum: f64 = probs.iter().sum();
    if probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) || (sum - 1.0).abs() > PROB_SUM_TOL {
        return Err(ProcessError::InvalidDistribution {
            what: what.to_string(),
            sum,
        });
    }
    Ok(())
}

impl StateProcess {
    /// A process that stays in state 0 forever.
    pub fn constant() -> Self {
        StateProcess::Iid { probs: vec![1.0] }
    }

    /// Checks the process against a state set of size `count`.
    pub fn validate(&self, count: usize) -> Result<(), ProcessError> {
        match self {
            StateProcess::Iid { probs } => check_distribution("iid probabilities", probs, count),
            StateProcess::Markov {
                transition,
                initial,
            } => {
                if transition.len() != count {
                    return Err(ProcessError::DimensionMismatch {
                        what: "transition matrix".into(),
                        expected: count,
                        found: transition.len(),
                    });
                }
                for (i, row) in transition.iter().enumerate() {
                    check_distribution(&format!("transition row {i}"), row, count)?;
                }
                if *initial >= count {
                    return Err(ProcessError::UnknownState {
                        index: *initial,
                        count,
                    });
                }
                Ok(())
            }
            StateProcess::Trace { states } => {
                if states.is_empty() {
                    return Err(ProcessError::EmptyTrace);
                }
                match states.iter().find(|&&s| s >= count) {
                    Some(&index) => Err(ProcessError::UnknownState { index, count }),
                    None => Ok(()),
                }
            }
        }
    }

    /// Long-run state frequencies: `probs` for i.i.d., the stationary law of a
    /// chain, or empirical frequencies of a trace.
    pub fn long_run_distribution(&self, count: usize) -> Result<Vec<f64>, ProcessError> {
        match self {
            StateProcess::Iid { probs } => Ok(probs.clone()),
            StateProcess::Markov { transition, .. } => stationary_distribution(transition),
            StateProcess::Trace { states } => {
                let mut freq = vec![0.0; count];
                for &s in states {
                    freq[s] += 1.0;
                }
                let n = states.len() as f64;
                Ok(freq.into_iter().map(|f| f / n).collect())
            }
        }
    }

    pub fn sampler(&self) -> Result<StateSampler<'_>, ProcessError> {
        let kind = match self {
            StateProcess::Iid { probs } => SamplerKind::Iid(weighted(probs)?),
            StateProcess::Markov { transition, .. } => SamplerKind::Markov(
                transition
                    .iter()
                    .map(|row| weighted(row))
                    .collect::<Result<_, _>>()?,
            ),
            StateProcess::Trace { .. } => SamplerKind::Trace,
        };
        Ok(StateSampler {
            process: self,
            kind,
            current: None,
        })
    }
}

fn weighted(probs: &[f64]) -> Result<WeightedIndex<f64>, ProcessError> {
    WeightedIndex::new(probs).map_err(|_| ProcessError::InvalidDistribution {
        what: "weights".into(),
        sum: probs.iter().sum(),
    })
}

enum SamplerKind {
    Iid(WeightedIndex<f64>),
    Markov(Vec<WeightedIndex<f64>>),
    Trace,
}

/// Stateful iterator over one realization of a [`StateProcess`].
pub struct StateSampler<'a> {
    process: &'a StateProcess,
    kind: SamplerKind,
    current: Option<usize>,
}

impl StateSampler<'_> {
    /// State of slot `t`. Slots must be requested in order `0, 1, 2, ...`.
    pub fn next_state(&mut self, t: u64, rng: &mut RngStream) -> Result<usize, ProcessError> {
        let state = match (&self.kind, self.process) {
            (SamplerKind::Iid(dist), _) => dist.sample(rng),
            (SamplerKind::Markov(rows), StateProcess::Markov { initial, .. }) => match self.current
            {
                None => *initial,
                Some(prev) => rows[prev].sample(rng),
            },
            (SamplerKind::Trace, StateProcess::Trace { states }) => {
                *states.get(t as usize).ok_or(ProcessError::TraceExhausted {
                    t,
                    len: states.len(),
                })?
            }
            _ => unreachable!("sampler kind always matches its process"),
        };
        self.current = Some(state);
        Ok(state)
    }
}

/// Stationary distribution of an irreducible, aperiodic chain by power iteration.
pub fn stationary_distribution(transition: &[Vec<f64>]) -> Result<Vec<f64>, ProcessError> {
    let n = transition.len();
    if n == 0 {
        return Err(ProcessError::NotErgodic("empty chain".into()));
    }
    for (i, row) in transition.iter().enumerate() {
        check_distribution(&format!("transition row {i}"), row, n)?;
    }
    check_ergodic(transition)?;

    let mut pi = vec![1.0 / n as f64; n];
    let mut next = vec![0.0; n];
    for _ in 0..MAX_POWER_ITERATIONS {
        next.iter_mut().for_each(|v| *v = 0.0);
        for (i, row) in transition.iter().enumerate() {
            for (j, p) in row.iter().enumerate() {
                next[j] += pi[i] * p;
            }
        }
        let total: f64 = next.iter().sum();
        next.iter_mut().for_each(|v| *v /= total);
        let residual: f64 = next.iter().zip(&pi).map(|(a, b)| (a - b).abs()).sum();
        std::mem::swap(&mut pi, &mut next);
        if residual <= STATIONARY_RESIDUAL {
            return Ok(pi);
        }
    }
    Err(ProcessError::NoConvergence)
}

/// Irreducibility via forward/backward reachability, aperiodicity via BFS levels.
fn check_ergodic(transition: &[Vec<f64>]) -> Result<(), ProcessError> {
    let n = transition.len();
    let edge = |i: usize, j: usize| transition[i][j] > 0.0;

    let reach = |forward: bool| {
        let mut level = vec![usize::MAX; n];
        let mut queue = VecDeque::from([0]);
        level[0] = 0;
        while let Some(u) = queue.pop_front() {
            for v in 0..n {
                let linked = if forward { edge(u, v) } else { edge(v, u) };
                if linked && level[v] == usize::MAX {
                    level[v] = level[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        level
    };

    let forward = reach(true);
    if forward.contains(&usize::MAX) || reach(false).contains(&usize::MAX) {
        return Err(ProcessError::NotErgodic("chain is reducible".into()));
    }

    // period = gcd over edges (u, v) of level[u] + 1 - level[v]
    let mut period = 0usize;
    for u in 0..n {
        for v in (0..n).filter(|&v| edge(u, v)) {
            let diff = (forward[u] + 1).abs_diff(forward[v]);
            period = gcd(period, diff);
        }
    }
    if period != 1 {
        return Err(ProcessError::NotErgodic(format!(
            "chain has period {period}"
        )));
    }
    Ok(())
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Reproducible random stream: equal `(seed, stream)` pairs yield equal sequences.
#[derive(Debug, Clone)]
pub struct RngStream(ChaCha8Rng);

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self(rng)
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.0.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.0.fill_bytes(dst)
    }
}

/// Integer demand with a prescribed mean, bounded by the product's cap.
pub trait DemandSampler {
    fn sample(&self, mean: f64, cap: u64, rng: &mut dyn RngCore) -> u64;
}

/// `Binomial(cap, mean / cap)`: bounded by `cap` with mean exactly `mean`.
#[derive(Debug, Clone, Copy, Default)]
pub struct BinomialDemand;

impl DemandSampler for BinomialDemand {
    fn sample(&self, mean: f64, cap: u64, rng: &mut dyn RngCore) -> u64 {
        let p = (mean / cap as f64).clamp(0.0, 1.0);
        Binomial::new(cap, p)
            .expect("p is clamped to [0, 1]")
            .sample(rng)
    }
}

/// Draws the demand of product `k` offered at `price_index` under state `y`.
pub fn realize_demand(
    cfg: &PlantConfig,
    k: usize,
    price_index: usize,
    y: &DemandState,
    rng: &mut RngStream,
) -> u64 {
    BinomialDemand.sample(y.mean(k, price_index), cfg.demand_caps[k], rng)
}

/// Parses a joint trace: one `x_id y_id` pair per non-empty line.
pub fn parse_trace(
    text: &str,
    supply_index: impl Fn(&str) -> Option<usize>,
    demand_index: impl Fn(&str) -> Option<usize>,
) -> Result<(Vec<usize>, Vec<usize>), ProcessError> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let err = |message: String| ProcessError::TraceFormat {
            line: n + 1,
            message,
        };
        let [x, y] = fields[..] else {
            return Err(err(format!("expected 2 fields, found {}", fields.len())));
        };
        xs.push(supply_index(x).ok_or_else(|| err(format!("unknown supply state {x:?}")))?);
        ys.push(demand_index(y).ok_or_else(|| err(format!("unknown demand state {y:?}")))?);
    }
    if xs.is_empty() {
        return Err(ProcessError::EmptyTrace);
    }
    Ok((xs, ys))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances;

    fn draw(process: &StateProcess, slots: u64, seed: u64) -> Result<Vec<usize>, ProcessError> {
        let mut rng = RngStream::new(seed, 0);
        let mut sampler = process.sampler()?;
        (0..slots)
            .map(|t| sampler.next_state(t, &mut rng))
            .collect()
    }

    #[test]
    fn degenerate_iid_and_absorbing_chain_are_constant() {
        let iid = StateProcess::Iid { probs: vec![1.0] };
        assert!(draw(&iid, 100, 1).unwrap().iter().all(|&s| s == 0));

        let chain = StateProcess::Markov {
            transition: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            initial: 1,
        };
        assert!(draw(&chain, 100, 1).unwrap().iter().all(|&s| s == 1));
    }

    #[test]
    fn trace_is_replayed_then_exhausted() {
        let trace = StateProcess::Trace { states: vec![0, 1] };
        let mut rng = RngStream::new(0, 0);
        let mut sampler = trace.sampler().unwrap();
        assert_eq!(sampler.next_state(0, &mut rng), Ok(0));
        assert_eq!(sampler.next_state(1, &mut rng), Ok(1));
        assert_eq!(
            sampler.next_state(2, &mut rng),
            Err(ProcessError::TraceExhausted { t: 2, len: 2 })
        );
    }

    #[test]
    fn validation_rejects_bad_processes() {
        assert!(StateProcess::Iid {
            probs: vec![0.5, 0.4]
        }
        .validate(2)
        .is_err());
        assert!(StateProcess::Trace { states: vec![] }.validate(1).is_err());
        assert!(StateProcess::Trace { states: vec![3] }.validate(2).is_err());
        assert!(StateProcess::Markov {
            transition: vec![vec![1.0]],
            initial: 1
        }
        .validate(1)
        .is_err());
    }

    #[test]
    fn stationary_examples() {
        assert_eq!(stationary_distribution(&[vec![1.0]]).unwrap(), vec![1.0]);

        let flip = stationary_distribution(&[vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
        assert!((flip[0] - 0.5).abs() < 1e-12 && (flip[1] - 0.5).abs() < 1e-12);

        // closed form for two states: pi = (b, a) / (a + b), a = P(0->1), b = P(1->0)
        let (a, b) = (0.1, 0.2);
        let pi = stationary_distribution(&[vec![1.0 - a, a], vec![b, 1.0 - b]]).unwrap();
        assert!((pi[0] - b / (a + b)).abs() < 1e-10);
        assert!((pi[1] - a / (a + b)).abs() < 1e-10);
    }

    #[test]
    fn reducible_and_periodic_chains_are_rejected() {
        let reducible = [vec![1.0, 0.0], vec![0.5, 0.5]];
        assert!(matches!(
            stationary_distribution(&reducible),
            Err(ProcessError::NotErgodic(_))
        ));
        let periodic = [vec![0.0, 1.0], vec![1.0, 0.0]];
        assert!(matches!(
            stationary_distribution(&periodic),
            Err(ProcessError::NotErgodic(_))
        ));
    }

    #[test]
    fn equal_seed_and_stream_reproduce_bit_for_bit() {
        let mut a = RngStream::new(7, 3);
        let mut b = RngStream::new(7, 3);
        let mut c = RngStream::new(7, 4);
        let sa: Vec<u64> = (0..64).map(|_| a.next_u64()).collect();
        let sb: Vec<u64> = (0..64).map(|_| b.next_u64()).collect();
        let sc: Vec<u64> = (0..64).map(|_| c.next_u64()).collect();
        assert_eq!(sa, sb);
        assert_ne!(sa, sc);
    }

    #[test]
    fn demand_extremes() {
        let model = instances::single_product();
        let cfg = model.cfg();
        let mut y = model.demand(0).clone();
        let mut rng = RngStream::new(1, 0);
        y.expected[0] = vec![0.0, 2.0];
        for _ in 0..1000 {
            assert_eq!(realize_demand(cfg, 0, 0, &y, &mut rng), 0);
            assert_eq!(realize_demand(cfg, 0, 1, &y, &mut rng), 2);
        }
    }

    #[test]
    fn trace_file_parsing() {
        let model = instances::single_product_two_demand_states();
        let text = "x high\n\nx low\n";
        let (xs, ys) = parse_trace(
            text,
            |id| model.supply_index(id),
            |id| model.demand_index(id),
        )
        .unwrap();
        assert_eq!(xs, vec![0, 0]);
        assert_eq!(ys, vec![0, 1]);
        assert!(matches!(
            parse_trace(
                "x nope",
                |id| model.supply_index(id),
                |id| model.demand_index(id)
            ),
            Err(ProcessError::TraceFormat { line: 1, .. })
        ));
    }
}
