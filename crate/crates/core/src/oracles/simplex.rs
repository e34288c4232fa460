//! Dense two-phase simplex for small linear programs.
//!
//! Pivot choice is Dantzig's largest reduced cost, switching to Bland's rule
//! after a run of degenerate pivots so the method cannot cycle.

use thiserror::Error;

const TOL: f64 = 1e-9;
const DEGENERATE_STREAK: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

/// `maximize objective . x` subject to the constraints, `0 <= x <= upper`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub constraints: Vec<Constraint>,
    /// Optional per-variable upper bounds; `None` means unbounded above.
    pub upper_bounds: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LpError {
    #[error("linear program is infeasible")]
    Infeasible,
    #[error("linear program is unbounded")]
    Unbounded,
    #[error("simplex exceeded {0} pivots")]
    IterationLimit(usize),
    #[error("malformed linear program: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub value: f64,
    pub x: Vec<f64>,
}

impl LinearProgram {
    pub fn new(vars: usize) -> Self {
        Self {
            objective: vec![0.0; vars],
            constraints: Vec::new(),
            upper_bounds: vec![None; vars],
        }
    }

    pub fn vars(&self) -> usize {
        self.objective.len()
    }

    pub fn add(&mut self, coeffs: Vec<f64>, relation: Relation, rhs: f64) {
        self.constraints.push(Constraint {
            coeffs,
            relation,
            rhs,
        });
    }

    /// Adds a constraint given as sparse `(index, coefficient)` pairs.
    pub fn add_sparse(&mut self, terms: &[(usize, f64)], relation: Relation, rhs: f64) {
        let mut coeffs = vec![0.0; self.vars()];
        for &(i, c) in terms {
            coeffs[i] += c;
        }
        self.add(coeffs, relation, rhs);
    }

    fn check(&self) -> Result<(), LpError> {
        let n = self.vars();
        if self.upper_bounds.len() != n {
            return Err(LpError::Malformed("upper bound count".into()));
        }
        if self.objective.iter().any(|c| !c.is_finite()) {
            return Err(LpError::Malformed("non-finite objective".into()));
        }
        for (i, row) in self.constraints.iter().enumerate() {
            if row.coeffs.len() != n {
                return Err(LpError::Malformed(format!(
                    "row {i} has {} coefficients",
                    row.coeffs.len()
                )));
            }
            if !row.rhs.is_finite() || row.coeffs.iter().any(|c| !c.is_finite()) {
                return Err(LpError::Malformed(format!("row {i} is not finite")));
            }
        }
        Ok(())
    }
}

struct Tableau {
    /// rows x (cols + 1); last column is the right-hand side.
    a: Vec<Vec<f64>>,
    basis: Vec<usize>,
    cols: usize,
}

impl Tableau {
    fn pivot(&mut self, r: usize, c: usize, obj: &mut [f64]) {
        let p = self.a[r][c];
        for v in self.a[r].iter_mut() {
            *v /= p;
        }
        let pivot_row = self.a[r].clone();
        for (i, row) in self.a.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[c];
            if f != 0.0 {
                for (v, p) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * p;
                }
                row[c] = 0.0;
            }
        }
        let f = obj[c];
        if f != 0.0 {
            for (v, p) in obj.iter_mut().zip(&pivot_row) {
                *v -= f * p;
            }
            obj[c] = 0.0;
        }
        self.basis[r] = c;
    }

    /// Maximizes with reduced-cost row `obj` (`obj[j]` > 0 means column j improves).
    /// The last entry of `obj` tracks minus the objective value.
    fn optimize(&mut self, obj: &mut [f64], allowed: &[bool]) -> Result<(), LpError> {
        let limit = 50_000 + 200 * (self.cols + self.a.len());
        let mut streak = 0;
        for _ in 0..limit {
            let entering = if streak < DEGENERATE_STREAK {
                (0..self.cols)
                    .filter(|&j| allowed[j] && obj[j] > TOL)
                    .max_by(|&i, &j| obj[i].total_cmp(&obj[j]).then(j.cmp(&i)))
            } else {
                (0..self.cols).find(|&j| allowed[j] && obj[j] > TOL)
            };
            let Some(c) = entering else {
                return Ok(());
            };
            let rhs = self.cols;
            let mut leave: Option<(usize, f64)> = None;
            for (i, row) in self.a.iter().enumerate() {
                if row[c] > TOL {
                    let ratio = row[rhs] / row[c];
                    let better = match leave {
                        None => true,
                        Some((l, best)) => {
                            ratio < best - TOL
                                || (ratio <= best + TOL && self.basis[i] < self.basis[l])
                        }
                    };
                    if better {
                        leave = Some((i, ratio));
                    }
                }
            }
            let Some((r, ratio)) = leave else {
                return Err(LpError::Unbounded);
            };
            if ratio.abs() <= TOL {
                streak += 1;
            } else {
                streak = 0;
            }
            self.pivot(r, c, obj);
        }
        Err(LpError::IterationLimit(limit))
    }
}

/// Solves `lp` to optimality.
pub fn solve_lp(lp: &LinearProgram) -> Result<LpSolution, LpError> {
    lp.check()?;
    let n = lp.vars();

    let mut rows: Vec<(Vec<f64>, Relation, f64)> = lp
        .constraints
        .iter()
        .map(|c| (c.coeffs.clone(), c.relation, c.rhs))
        .collect();
    for (j, ub) in lp.upper_bounds.iter().enumerate() {
        if let Some(u) = ub {
            let mut coeffs = vec![0.0; n];
            coeffs[j] = 1.0;
            rows.push((coeffs, Relation::Le, *u));
        }
    }
    for (coeffs, rel, rhs) in rows.iter_mut() {
        if *rhs < 0.0 {
            coeffs.iter_mut().for_each(|c| *c = -*c);
            *rhs = -*rhs;
            *rel = match rel {
                Relation::Le => Relation::Ge,
                Relation::Ge => Relation::Le,
                Relation::Eq => Relation::Eq,
            };
        }
    }

    let slacks = rows.iter().filter(|r| r.1 != Relation::Eq).count();
    let artificials = rows.iter().filter(|r| r.1 != Relation::Le).count();
    let cols = n + slacks + artificials;
    let first_art = n + slacks;

    let mut a = Vec::with_capacity(rows.len());
    let mut basis = Vec::with_capacity(rows.len());
    let (mut s, mut t) = (n, first_art);
    for (coeffs, rel, rhs) in &rows {
        let mut row = vec![0.0; cols + 1];
        row[..n].copy_from_slice(coeffs);
        row[cols] = *rhs;
        match rel {
            Relation::Le => {
                row[s] = 1.0;
                basis.push(s);
                s += 1;
            }
            Relation::Ge => {
                row[s] = -1.0;
                s += 1;
                row[t] = 1.0;
                basis.push(t);
                t += 1;
            }
            Relation::Eq => {
                row[t] = 1.0;
                basis.push(t);
                t += 1;
            }
        }
        a.push(row);
    }
    let mut tab = Tableau { a, basis, cols };

    // phase 1: maximize -sum(artificials)
    let mut allowed = vec![true; cols];
    if artificials > 0 {
        let mut obj = vec![0.0; cols + 1];
        for (i, row) in tab.a.iter().enumerate() {
            if tab.basis[i] >= first_art {
                for (o, v) in obj.iter_mut().zip(row) {
                    *o += v;
                }
            }
        }
        for o in obj[first_art..cols].iter_mut() {
            *o = 0.0;
        }
        tab.optimize(&mut obj, &allowed)?;
        let scale = rows.iter().map(|r| r.2).fold(1.0f64, f64::max);
        if obj[cols] > 1e-7 * scale {
            return Err(LpError::Infeasible);
        }
        // drive zero-level artificials out of the basis
        for r in 0..tab.a.len() {
            if tab.basis[r] >= first_art {
                if let Some(c) = (0..first_art).find(|&j| tab.a[r][j].abs() > 1e-7) {
                    let mut dummy = vec![0.0; cols + 1];
                    tab.pivot(r, c, &mut dummy);
                }
            }
        }
        for flag in allowed[first_art..].iter_mut() {
            *flag = false;
        }
    }

    // phase 2
    let mut obj = vec![0.0; cols + 1];
    obj[..n].copy_from_slice(&lp.objective);
    for r in 0..tab.a.len() {
        let c = tab.basis[r];
        let f = obj[c];
        if f != 0.0 {
            for (o, v) in obj.iter_mut().zip(&tab.a[r]) {
                *o -= f * v;
            }
        }
    }
    tab.optimize(&mut obj, &allowed)?;

    let mut x = vec![0.0; n];
    for (r, &c) in tab.basis.iter().enumerate() {
        if c < n {
            x[c] = tab.a[r][cols].max(0.0);
        }
    }
    let value = lp.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
    Ok(LpSolution { value, x })
}
