//! Plant data, validation, profit accounting and the raw-material queue dynamics.
//!
//! Indexing convention: materials are `m in 0..M`, products are `k in 0..K`.
//! `beta[m][k]` is the number of units of material `m` consumed by one unit of
//! product `k`. Prices are addressed by their index into the product's price
//! set, which is kept strictly ascending.

use std::collections::HashSet;

use thiserror::Error;

/// Static problem data shared by every component.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantConfig {
    /// `beta[m][k]`: units of material `m` per unit of product `k`.
    pub beta: Vec<Vec<u64>>,
    /// Assembly cost per unit of each product.
    pub alpha: Vec<f64>,
    /// Allowed prices per product, strictly ascending.
    pub price_sets: Vec<Vec<f64>>,
    /// Per-slot demand cap per product.
    pub demand_caps: Vec<u64>,
    /// Per-slot purchase cap per material.
    pub purchase_caps: Vec<u64>,
    /// Per-slot purchasing budget in integer cost units.
    pub budget: u64,
}

impl PlantConfig {
    pub fn materials(&self) -> usize {
        self.beta.len()
    }

    pub fn products(&self) -> usize {
        self.alpha.len()
    }

    /// Largest allowed price of product `k`.
    pub fn max_price(&self, k: usize) -> f64 {
        *self.price_sets[k].last().expect("validated price set")
    }

    pub fn price(&self, k: usize, price_index: usize) -> f64 {
        self.price_sets[k][price_index]
    }

    /// Per-product margin `p - alpha_k` at a given price index.
    pub fn margin(&self, k: usize, price_index: usize) -> f64 {
        self.price_sets[k][price_index] - self.alpha[k]
    }

    /// Whether material `m` feeds product `k`.
    pub fn uses(&self, m: usize, k: usize) -> bool {
        self.beta[m][k] > 0
    }
}

/// Raw-material supply state: unit prices and per-slot availability.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SupplyState {
    pub id: String,
    /// Unit price of each material, in integer cost units.
    pub unit_cost: Vec<u64>,
    /// Maximum amount of each material for sale this slot.
    pub available: Vec<u64>,
}

impl SupplyState {
    /// Largest purchase of material `m` allowed under this state.
    pub fn purchase_limit(&self, cfg: &PlantConfig, m: usize) -> u64 {
        cfg.purchase_caps[m].min(self.available[m])
    }
}

/// Demand of the form `F_k(p, y) = scale_k(y) * base_k(p)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DemandFactorization {
    pub scale: Vec<f64>,
    pub base: Vec<Vec<f64>>,
}

/// Consumer demand state with explicit expected-demand tables.
#[derive(Debug, Clone, PartialEq)]
pub struct DemandState {
    pub id: String,
    /// `expected[k][i]`: expected demand of product `k` at price index `i`.
    pub expected: Vec<Vec<f64>>,
    pub factorization: Option<DemandFactorization>,
}

impl DemandState {
    /// Builds a state whose table is `scale[k] * base[k][i]`, keeping the factors.
    pub fn factorized(id: impl Into<String>, scale: Vec<f64>, base: Vec<Vec<f64>>) -> Self {
        let expected = base
            .iter()
            .zip(&scale)
            .map(|(row, h)| row.iter().map(|f| h * f).collect())
            .collect();
        Self {
            id: id.into(),
            expected,
            factorization: Some(DemandFactorization { scale, base }),
        }
    }

    pub fn mean(&self, k: usize, price_index: usize) -> f64 {
        self.expected[k][price_index]
    }
}

/// One slot's control action.
///
/// `offers[k]` is `Some(i)` when product `k` is offered at price index `i`
/// and `None` when it is withheld from sale.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SlotDecision {
    pub purchase: Vec<u64>,
    pub offers: Vec<Option<usize>>,
}

impl SlotDecision {
    pub fn idle(cfg: &PlantConfig) -> Self {
        Self {
            purchase: vec![0; cfg.materials()],
            offers: vec![None; cfg.products()],
        }
    }

    pub fn is_offered(&self, k: usize) -> bool {
        self.offers[k].is_some()
    }

    pub fn price(&self, cfg: &PlantConfig, k: usize) -> Option<f64> {
        self.offers[k].map(|i| cfg.price(k, i))
    }
}

/// Realized demand, fulfilment and profit of one slot.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotOutcome {
    pub demand: Vec<u64>,
    pub fulfilled: Vec<u64>,
    pub consumption: Vec<u64>,
    pub phi: f64,
    pub phi_actual: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("{field}: expected length {expected}, found {found}")]
    DimensionMismatch {
        field: String,
        expected: usize,
        found: usize,
    },
    #[error("plant has no {0}")]
    Empty(&'static str),
    #[error("price set of product {product} is empty")]
    EmptyPriceSet { product: usize },
    #[error("price set of product {product} is not strictly ascending")]
    UnsortedPriceSet { product: usize },
    #[error("{field} has a negative or non-finite entry ({value})")]
    NegativeEntry { field: String, value: f64 },
    #[error("demand state {state}: F[{product}][{price_index}] = {value} exceeds D_max = {cap}")]
    DemandExceedsCap {
        state: String,
        product: usize,
        price_index: usize,
        value: f64,
        cap: u64,
    },
    #[error("product {product} uses no raw material")]
    OrphanProduct { product: usize },
    #[error("{field}[{index}] must be positive")]
    ZeroCap { field: &'static str, index: usize },
    #[error("duplicate state id {0:?}")]
    DuplicateStateId(String),
    #[error("demand state {state}: table does not match its factorization at F[{product}][{price_index}]")]
    FactorizationMismatch {
        state: String,
        product: usize,
        price_index: usize,
    },
}

/// A validated plant together with its finite supply and demand state sets.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    cfg: PlantConfig,
    supply_states: Vec<SupplyState>,
    demand_states: Vec<DemandState>,
    mu_max: Vec<u64>,
}

impl Model {
    /// Validates the configuration and precomputes `mu_max`.
    pub fn new(
        cfg: PlantConfig,
        supply_states: Vec<SupplyState>,
        demand_states: Vec<DemandState>,
    ) -> Result<Self, ConfigError> {
        validate(&cfg, &supply_states, &demand_states)?;
        let mu_max = (0..cfg.materials())
            .map(|m| {
                (0..cfg.products())
                    .map(|k| cfg.beta[m][k] * cfg.demand_caps[k])
                    .sum()
            })
            .collect();
        Ok(Self {
            cfg,
            supply_states,
            demand_states,
            mu_max,
        })
    }

    pub fn cfg(&self) -> &PlantConfig {
        &self.cfg
    }

    pub fn supply_states(&self) -> &[SupplyState] {
        &self.supply_states
    }

    pub fn demand_states(&self) -> &[DemandState] {
        &self.demand_states
    }

    pub fn supply(&self, x: usize) -> &SupplyState {
        &self.supply_states[x]
    }

    pub fn demand(&self, y: usize) -> &DemandState {
        &self.demand_states[y]
    }

    /// Worst-case per-slot consumption of each material.
    pub fn mu_max(&self) -> &[u64] {
        &self.mu_max
    }

    /// Materials that no product uses; they are never worth buying.
    pub fn unused_materials(&self) -> Vec<usize> {
        (0..self.cfg.materials())
            .filter(|&m| (0..self.cfg.products()).all(|k| !self.cfg.uses(m, k)))
            .collect()
    }

    pub fn supply_index(&self, id: &str) -> Option<usize> {
        self.supply_states.iter().position(|s| s.id == id)
    }

    pub fn demand_index(&self, id: &str) -> Option<usize> {
        self.demand_states.iter().position(|s| s.id == id)
    }

    /// Whether every demand state carries a factorized table.
    pub fn is_demand_factorized(&self) -> bool {
        self.demand_states.iter().all(|d| d.factorization.is_some())
    }
}

fn check_len(field: impl Into<String>, expected: usize, found: usize) -> Result<(), ConfigError> {
    if expected == found {
        Ok(())
    } else {
        Err(ConfigError::DimensionMismatch {
            field: field.into(),
            expected,
            found,
        })
    }
}

fn check_non_negative(field: impl Into<String>, values: &[f64]) -> Result<(), ConfigError> {
    match values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
        Some(&value) => Err(ConfigError::NegativeEntry {
            field: field.into(),
            value,
        }),
        None => Ok(()),
    }
}

fn validate(
    cfg: &PlantConfig,
    supply: &[SupplyState],
    demand: &[DemandState],
) -> Result<(), ConfigError> {
    let (materials, products) = (cfg.materials(), cfg.products());
    if materials == 0 {
        return Err(ConfigError::Empty("materials"));
    }
    if products == 0 {
        return Err(ConfigError::Empty("products"));
    }
    if supply.is_empty() {
        return Err(ConfigError::Empty("supply states"));
    }
    if demand.is_empty() {
        return Err(ConfigError::Empty("demand states"));
    }
    for (m, row) in cfg.beta.iter().enumerate() {
        check_len(format!("beta[{m}]"), products, row.len())?;
    }
    check_len("price_set", products, cfg.price_sets.len())?;
    check_len("D_max", products, cfg.demand_caps.len())?;
    check_len("A_max", materials, cfg.purchase_caps.len())?;
    check_non_negative("alpha", &cfg.alpha)?;

    for (k, prices) in cfg.price_sets.iter().enumerate() {
        if prices.is_empty() {
            return Err(ConfigError::EmptyPriceSet { product: k });
        }
        check_non_negative(format!("price_set[{k}]"), prices)?;
        if prices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(ConfigError::UnsortedPriceSet { product: k });
        }
        if (0..materials).all(|m| cfg.beta[m][k] == 0) {
            return Err(ConfigError::OrphanProduct { product: k });
        }
    }
    if let Some(k) = cfg.demand_caps.iter().position(|&d| d == 0) {
        return Err(ConfigError::ZeroCap {
            field: "D_max",
            index: k,
        });
    }
    if let Some(m) = cfg.purchase_caps.iter().position(|&a| a == 0) {
        return Err(ConfigError::ZeroCap {
            field: "A_max",
            index: m,
        });
    }

    let mut ids = HashSet::new();
    for x in supply {
        if !ids.insert(x.id.as_str()) {
            return Err(ConfigError::DuplicateStateId(x.id.clone()));
        }
        check_len(
            format!("supply state {} unit_cost", x.id),
            materials,
            x.unit_cost.len(),
        )?;
        check_len(
            format!("supply state {} available", x.id),
            materials,
            x.available.len(),
        )?;
    }

    let mut ids = HashSet::new();
    for y in demand {
        if !ids.insert(y.id.as_str()) {
            return Err(ConfigError::DuplicateStateId(y.id.clone()));
        }
        check_len(
            format!("demand state {} F", y.id),
            products,
            y.expected.len(),
        )?;
        for (k, row) in y.expected.iter().enumerate() {
            check_len(
                format!("demand state {} F[{k}]", y.id),
                cfg.price_sets[k].len(),
                row.len(),
            )?;
            check_non_negative(format!("demand state {} F[{k}]", y.id), row)?;
            let cap = cfg.demand_caps[k];
            if let Some((i, &value)) = row.iter().enumerate().find(|(_, &f)| f > cap as f64) {
                return Err(ConfigError::DemandExceedsCap {
                    state: y.id.clone(),
                    product: k,
                    price_index: i,
                    value,
                    cap,
                });
            }
        }
        if let Some(fac) = &y.factorization {
            validate_factorization(cfg, y, fac)?;
        }
    }
    Ok(())
}

fn validate_factorization(
    cfg: &PlantConfig,
    y: &DemandState,
    fac: &DemandFactorization,
) -> Result<(), ConfigError> {
    let products = cfg.products();
    check_len(
        format!("demand state {} h", y.id),
        products,
        fac.scale.len(),
    )?;
    check_len(
        format!("demand state {} F_hat", y.id),
        products,
        fac.base.len(),
    )?;
    check_non_negative(format!("demand state {} h", y.id), &fac.scale)?;
    for k in 0..products {
        check_len(
            format!("demand state {} F_hat[{k}]", y.id),
            cfg.price_sets[k].len(),
            fac.base[k].len(),
        )?;
        check_non_negative(format!("demand state {} F_hat[{k}]", y.id), &fac.base[k])?;
        for (i, (&f, &base)) in y.expected[k].iter().zip(&fac.base[k]).enumerate() {
            let product = fac.scale[k] * base;
            if (f - product).abs() > 1e-9 * f.abs().max(1.0) {
                return Err(ConfigError::FactorizationMismatch {
                    state: y.id.clone(),
                    product: k,
                    price_index: i,
                });
            }
        }
    }
    Ok(())
}

/// Total purchasing cost `sum_m x_m * A_m` in cost units.
pub fn purchase_cost(purchase: &[u64], x: &SupplyState) -> u64 {
    purchase.iter().zip(&x.unit_cost).map(|(a, c)| a * c).sum()
}

/// Profit of a slot when `units[k]` items of each offered product are sold.
fn slot_profit(cfg: &PlantConfig, decision: &SlotDecision, units: &[u64], x: &SupplyState) -> f64 {
    let revenue: f64 = decision
        .offers
        .iter()
        .enumerate()
        .filter_map(|(k, offer)| offer.map(|i| units[k] as f64 * cfg.margin(k, i)))
        .sum();
    revenue - purchase_cost(&decision.purchase, x) as f64
}

/// Profit assuming every realized demand of an offered product is served.
pub fn nominal_profit(
    cfg: &PlantConfig,
    decision: &SlotDecision,
    demand: &[u64],
    x: &SupplyState,
) -> f64 {
    slot_profit(cfg, decision, demand, x)
}

/// Profit of what was actually delivered.
pub fn actual_profit(
    cfg: &PlantConfig,
    decision: &SlotDecision,
    fulfilled: &[u64],
    x: &SupplyState,
) -> f64 {
    slot_profit(cfg, decision, fulfilled, x)
}

/// Material drawn from each queue to assemble `fulfilled`.
pub fn consumption(cfg: &PlantConfig, fulfilled: &[u64]) -> Vec<u64> {
    cfg.beta
        .iter()
        .map(|row| row.iter().zip(fulfilled).map(|(b, d)| b * d).sum())
        .collect()
}

/// Chooses how much of each offered product to assemble from inventory `queue`.
///
/// If inventory covers every demand, all of it is served. Otherwise products
/// are served greedily by descending margin (ties to the lower index), each
/// taking the largest quantity the residual inventory allows.
pub fn schedule_fulfillment(
    cfg: &PlantConfig,
    queue: &[u64],
    offers: &[Option<usize>],
    demand: &[u64],
) -> Vec<u64> {
    let wanted: Vec<u64> = offers
        .iter()
        .zip(demand)
        .map(|(offer, &d)| if offer.is_some() { d } else { 0 })
        .collect();
    let needed = consumption(cfg, &wanted);
    if needed.iter().zip(queue).all(|(n, q)| n <= q) {
        return wanted;
    }

    let mut order: Vec<usize> = (0..cfg.products()).filter(|&k| wanted[k] > 0).collect();
    // stable sort keeps ascending k among equal margins
    order.sort_by(|&a, &b| {
        let ma = cfg.margin(a, offers[a].unwrap());
        let mb = cfg.margin(b, offers[b].unwrap());
        mb.total_cmp(&ma)
    });

    let mut residual = queue.to_vec();
    let mut served = vec![0; cfg.products()];
    for k in order {
        let fits = (0..cfg.materials())
            .filter(|&m| cfg.beta[m][k] > 0)
            .map(|m| residual[m] / cfg.beta[m][k])
            .min()
            .unwrap_or(0);
        let take = fits.min(wanted[k]);
        for (m, r) in residual.iter_mut().enumerate() {
            *r -= cfg.beta[m][k] * take;
        }
        served[k] = take;
    }
    served
}

/// Next-slot inventory: `max(Q - consumption, 0) + A`.
pub fn queue_update(
    cfg: &PlantConfig,
    queue: &[u64],
    fulfilled: &[u64],
    purchase: &[u64],
) -> Vec<u64> {
    consumption(cfg, fulfilled)
        .into_iter()
        .zip(queue)
        .zip(purchase)
        .map(|((used, q), a)| q.saturating_sub(used) + a)
        .collect()
}
