//! Exact bounded integer knapsack over an integer budget.

/// Maximizes `sum_m values[m] * A[m]` subject to `sum_m costs[m] * A[m] <= budget`
/// and `0 <= A[m] <= bounds[m]`, over integers.
///
/// Among optimal vectors the lexicographically smallest is returned. Runs in
/// `O(budget * sum_m bounds[m])` time.
pub fn bounded_knapsack(values: &[f64], costs: &[u64], bounds: &[u64], budget: u64) -> Vec<u64> {
    let n = values.len();
    assert_eq!(costs.len(), n);
    assert_eq!(bounds.len(), n);

    // items that cannot improve the objective stay at zero
    let bounds: Vec<u64> = (0..n)
        .map(|m| if values[m] > 0.0 { bounds[m] } else { 0 })
        .collect();
    let spend: u64 = (0..n).map(|m| costs[m] * bounds[m]).sum();
    let budget = budget.min(spend) as usize;

    // best[m][b]: optimum using items m.. with budget b
    let mut best = vec![vec![0.0f64; budget + 1]; n + 1];
    for m in (0..n).rev() {
        let (head, tail) = best.split_at_mut(m + 1);
        let (row, next) = (&mut head[m], &tail[0]);
        let cost = costs[m] as usize;
        for b in 0..=budget {
            let mut value = next[b];
            for c in 1..=bounds[m] as usize {
                let used = c * cost;
                if used > b {
                    break;
                }
                value = value.max(c as f64 * values[m] + next[b - used]);
            }
            row[b] = value;
        }
    }

    let mut choice = vec![0u64; n];
    let mut b = budget;
    for m in 0..n {
        let target = best[m][b];
        let tol = 1e-9 * target.abs().max(1.0);
        let cost = costs[m] as usize;
        for c in 0..=bounds[m] as usize {
            let used = c * cost;
            if used > b {
                break;
            }
            if c as f64 * values[m] + best[m + 1][b - used] >= target - tol {
                choice[m] = c as u64;
                b -= used;
                break;
            }
        }
    }
    choice
}
