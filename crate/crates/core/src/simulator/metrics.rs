//! Running statistics of an episode.

/// Number of batches used for the batch-means standard error.
pub const BATCHES: usize = 32;

#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    pub slots: u64,
    /// Sum of realized profit over all slots.
    pub total_profit: f64,
    /// Sum of nominal profit (every demand served) over all slots.
    pub total_phi: f64,
    /// Means of realized profit over consecutive batches of slots.
    pub batch_means: Vec<f64>,
    pub queue_min: Vec<u64>,
    pub queue_max: Vec<u64>,
    /// Upper bound on the per-slot drift term.
    pub drift_constant: f64,
    pub max_slot_drift: f64,
    pub upper_violations: u64,
    pub lower_violations: u64,
    pub drift_violations: u64,
    /// Slots where nominal and realized profit differ.
    pub profit_mismatches: u64,
    /// Slots starting with a finished-product buffer below `D_max`.
    pub product_queue_violations: u64,
    /// Slots that bought a material whose queue exceeded its threshold.
    pub purchase_above_threshold: u64,
    /// Control queue at the end of the run (fake units included).
    pub final_queue: Vec<u64>,
    /// Real inventory at the end of the run.
    pub final_inventory: Vec<u64>,
    /// One-time cost of filling finished-product buffers.
    pub startup_cost: f64,
    batch_size: u64,
    batch_sum: f64,
    batch_count: u64,
}

impl Metrics {
    pub fn new(horizon: u64, queue: &[u64], drift_constant: f64) -> Self {
        Self {
            slots: 0,
            total_profit: 0.0,
            total_phi: 0.0,
            batch_means: Vec::new(),
            queue_min: queue.to_vec(),
            queue_max: queue.to_vec(),
            drift_constant,
            max_slot_drift: 0.0,
            upper_violations: 0,
            lower_violations: 0,
            drift_violations: 0,
            profit_mismatches: 0,
            product_queue_violations: 0,
            purchase_above_threshold: 0,
            final_queue: queue.to_vec(),
            final_inventory: queue.to_vec(),
            startup_cost: 0.0,
            batch_size: (horizon / BATCHES as u64).max(1),
            batch_sum: 0.0,
            batch_count: 0,
        }
    }

    pub(crate) fn record_slot(
        &mut self,
        phi: f64,
        phi_actual: f64,
        drift: f64,
        queue: &[u64],
        low: &[f64],
        high: &[f64],
    ) {
        self.slots += 1;
        self.total_profit += phi_actual;
        self.total_phi += phi;
        if phi != phi_actual {
            self.profit_mismatches += 1;
        }
        self.max_slot_drift = self.max_slot_drift.max(drift);
        if drift > self.drift_constant {
            self.drift_violations += 1;
        }
        for (m, &q) in queue.iter().enumerate() {
            self.queue_min[m] = self.queue_min[m].min(q);
            self.queue_max[m] = self.queue_max[m].max(q);
            if (q as f64) < low[m] {
                self.lower_violations += 1;
            }
            if q as f64 > high[m] {
                self.upper_violations += 1;
            }
        }
        self.batch_sum += phi_actual;
        self.batch_count += 1;
        // the last batch absorbs the remainder
        if self.batch_count == self.batch_size && self.batch_means.len() + 1 < BATCHES {
            self.close_batch();
        }
    }

    fn close_batch(&mut self) {
        if self.batch_count > 0 {
            self.batch_means
                .push(self.batch_sum / self.batch_count as f64);
        }
        self.batch_sum = 0.0;
        self.batch_count = 0;
    }

    pub(crate) fn finish(&mut self, queue: &[u64], fake: &[u64]) {
        self.close_batch();
        self.final_queue = queue.to_vec();
        self.final_inventory = queue.iter().zip(fake).map(|(q, f)| q - f).collect();
    }

    /// Realized profit per slot, net of any startup cost.
    pub fn average_profit(&self) -> f64 {
        (self.total_profit - self.startup_cost) / self.slots as f64
    }

    /// Standard error of [`Self::average_profit`] from the batch means.
    pub fn batch_standard_error(&self) -> f64 {
        mean_and_se(&self.batch_means).1
    }

    pub fn violations(&self) -> u64 {
        self.upper_violations
            + self.lower_violations
            + self.drift_violations
            + self.profit_mismatches
            + self.product_queue_violations
            + self.purchase_above_threshold
    }
}

/// Sample mean and standard error of the mean; the error is 0 for fewer than two values.
pub fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_and_standard_error() {
        let (m, se) = mean_and_se(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((se - (5.0f64 / 12.0).sqrt()).abs() < 1e-12);
        assert_eq!(mean_and_se(&[3.0]), (3.0, 0.0));
    }

    #[test]
    fn batches_cover_every_slot() {
        let mut m = Metrics::new(100, &[0], 1.0);
        for t in 0..100 {
            m.record_slot(t as f64, t as f64, 0.0, &[0], &[0.0], &[1.0]);
        }
        m.finish(&[0], &[0]);
        assert_eq!(m.batch_means.len(), BATCHES);
        // 31 batches of 3 slots, the last one holds 7
        assert_eq!(m.batch_means[0], 1.0);
        assert_eq!(
            *m.batch_means.last().unwrap(),
            (93..100).sum::<i32>() as f64 / 7.0
        );
        assert_eq!(m.average_profit(), 49.5);
    }
}
