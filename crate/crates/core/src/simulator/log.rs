//! Per-slot episode records and their CSV rendering.

use crate::model::Model;

/// One slot of an episode.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotRecord {
    pub t: u64,
    pub x: usize,
    pub y: usize,
    /// Real inventory at the start of the slot.
    pub inventory: Vec<u64>,
    pub purchase: Vec<u64>,
    pub offers: Vec<Option<usize>>,
    pub demand: Vec<u64>,
    pub phi: f64,
    pub phi_actual: f64,
    /// Realized profit through this slot, net of any startup cost.
    pub cumulative_profit: f64,
    pub avg_phi: f64,
}

/// Column names of the per-slot CSV log.
pub fn log_header(model: &Model) -> Vec<String> {
    let (m, k) = (model.cfg().materials(), model.cfg().products());
    let mut h: Vec<String> = vec!["t".into(), "x_id".into(), "y_id".into()];
    for (prefix, n) in [("Q", m), ("A", m), ("Z", k), ("P", k), ("D", k)] {
        h.extend((1..=n).map(|i| format!("{prefix}_{i}")));
    }
    h.extend(["phi", "phi_actual", "avg_phi"].map(String::from));
    h
}

impl SlotRecord {
    /// Row matching [`log_header`]. Withheld products show price 0.
    pub fn fields(&self, model: &Model) -> Vec<String> {
        let cfg = model.cfg();
        let mut f = vec![
            self.t.to_string(),
            model.supply(self.x).id.clone(),
            model.demand(self.y).id.clone(),
        ];
        f.extend(self.inventory.iter().map(u64::to_string));
        f.extend(self.purchase.iter().map(u64::to_string));
        f.extend(
            self.offers
                .iter()
                .map(|o| if o.is_some() { "1" } else { "0" }.to_string()),
        );
        f.extend(
            self.offers
                .iter()
                .enumerate()
                .map(|(k, o)| format_float(o.map_or(0.0, |i| cfg.price(k, i)))),
        );
        f.extend(self.demand.iter().map(u64::to_string));
        f.extend([self.phi, self.phi_actual, self.avg_phi].map(format_float));
        f
    }
}

/// Shortest rendering of `v` rounded to 9 significant digits.
pub fn format_float(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return v.to_string();
    }
    let sci = format!("{v:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        let fixed = format!("{v:.decimals$}");
        if fixed.contains('.') {
            fixed
                .trim_end_matches('0')
                .trim_end_matches('.')
                .to_string()
        } else {
            fixed
        }
    } else {
        let mantissa = mantissa.trim_end_matches('0').trim_end_matches('.');
        format!("{mantissa}e{exp}")
    }
}
