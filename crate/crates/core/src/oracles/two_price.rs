//! Reduction of a pricing distribution to at most two prices.
//!
//! For a product `k` in demand state `y` every option maps to a point
//! `(d, r)` = (expected demand, expected margin revenue). A randomized pricing
//! rule achieves a convex combination of those points. The upper concave
//! envelope of the point set gives, for the same expected demand `d`, the
//! largest achievable revenue, and every point on it mixes at most two
//! options: the endpoints of the envelope segment that contains `d`.

use crate::model::Model;

use super::profit::OraclePolicy;
use super::{option_rates, OracleError, PriceOption};

const D_TOL: f64 = 1e-12;

/// Reduced pricing rule for one product in one demand state.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoPriceEntry {
    /// One or two options with their probabilities.
    pub support: Vec<(PriceOption, f64)>,
    /// Expected demand rate of the reduced rule (equal to the input's).
    pub d: f64,
    /// Expected margin revenue of the reduced rule.
    pub r_star: f64,
    /// Expected margin revenue of the input distribution.
    pub r_hat: f64,
}

/// `entries[k][y]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoPricePolicy {
    pub entries: Vec<Vec<TwoPriceEntry>>,
}

/// Indices of the upper concave envelope of `points` (sorted by `d`).
fn upper_envelope(points: &[(f64, f64, PriceOption)]) -> Vec<usize> {
    let mut hull: Vec<usize> = Vec::new();
    for (i, p) in points.iter().enumerate() {
        if let Some(&last) = hull.last() {
            if (points[last].0 - p.0).abs() <= D_TOL {
                // same demand rate: sorting put the better revenue first
                continue;
            }
        }
        while hull.len() >= 2 {
            let a = points[hull[hull.len() - 2]];
            let b = points[hull[hull.len() - 1]];
            let cross = (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0);
            if cross >= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(i);
    }
    hull
}

/// Reduces the distribution `dist` over options of product `k` in state `y`.
pub fn reduce_price_distribution(
    model: &Model,
    k: usize,
    y: usize,
    dist: &[(PriceOption, f64)],
) -> Result<TwoPriceEntry, OracleError> {
    let cfg = model.cfg();
    let state = model.demand(y);
    let (mut d_hat, mut r_hat) = (0.0, 0.0);
    for &(o, p) in dist {
        let (d, r) = option_rates(cfg, k, state, o);
        d_hat += p * d;
        r_hat += p * r;
    }

    let mut points: Vec<(f64, f64, PriceOption)> = PriceOption::all(cfg, k)
        .into_iter()
        .map(|o| {
            let (d, r) = option_rates(cfg, k, state, o);
            (d, r, o)
        })
        .collect();
    points.sort_by(|a, b| {
        a.0.total_cmp(&b.0)
            .then(b.1.total_cmp(&a.1))
            .then(a.2.cmp(&b.2))
    });
    let hull = upper_envelope(&points);

    let d_max = points[*hull.last().expect("idle point is always present")].0;
    if d_hat < -D_TOL || d_hat > d_max + D_TOL {
        return Err(OracleError::TargetOutsideHull {
            product: k,
            target: d_hat,
            max: d_max,
        });
    }

    let mut support = Vec::new();
    for w in hull
        .windows(2)
        .map(|w| (points[w[0]], points[w[1]]))
        .chain(std::iter::once((
            points[*hull.last().unwrap()],
            points[*hull.last().unwrap()],
        )))
    {
        let (a, b) = w;
        if (d_hat - a.0).abs() <= D_TOL {
            support.push((a.2, 1.0));
            break;
        }
        if (d_hat - b.0).abs() <= D_TOL {
            support.push((b.2, 1.0));
            break;
        }
        if d_hat > a.0 && d_hat < b.0 {
            let eta = (b.0 - d_hat) / (b.0 - a.0);
            support.push((a.2, eta));
            support.push((b.2, 1.0 - eta));
            break;
        }
    }
    if support.is_empty() {
        // only reachable at the idle point with d_hat within D_TOL of zero
        support.push((points[hull[0]].2, 1.0));
    }

    let (mut d, mut r_star) = (0.0, 0.0);
    for &(o, p) in &support {
        let (od, or) = option_rates(cfg, k, state, o);
        d += p * od;
        r_star += p * or;
    }
    Ok(TwoPriceEntry {
        support,
        d,
        r_star,
        r_hat,
    })
}

/// Reduces every pricing distribution of `policy`.
pub fn two_price_reduce(
    model: &Model,
    policy: &OraclePolicy,
) -> Result<TwoPricePolicy, OracleError> {
    let entries = policy
        .price_dist
        .iter()
        .enumerate()
        .map(|(k, rows)| {
            rows.iter()
                .enumerate()
                .map(|(y, dist)| reduce_price_distribution(model, k, y, dist))
                .collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(TwoPricePolicy { entries })
}
