//! Dense two-phase primal simplex.
//!
//! Variables are implicitly bounded below by zero. The tableau is rebuilt
//! from the original rows periodically and before optimality is declared.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

const PIVOT_TOL: f64 = 1e-9;
const FEAS_TOL: f64 = 1e-9;
const CERT_TOL: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

/// `maximize objective · x` subject to the constraints and `x >= 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub constraints: Vec<Constraint>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub objective: f64,
}

#[derive(Debug, Error, PartialEq)]
pub enum LpError {
    #[error("constraint {row} has {got} coefficients, expected {expected}")]
    Dimension { row: usize, got: usize, expected: usize },
    #[error("non-finite coefficient in {0}")]
    NonFinite(&'static str),
    #[error("numerical breakdown: {0}")]
    NumericalBreakdown(String),
    #[error("iteration limit {0} reached")]
    IterationLimit(usize),
}

impl LinearProgram {
    pub fn new(num_vars: usize) -> Self {
        LinearProgram { objective: vec![0.0; num_vars], constraints: Vec::new() }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn add(&mut self, coeffs: Vec<f64>, relation: Relation, rhs: f64) {
        self.constraints.push(Constraint { coeffs, relation, rhs });
    }

    fn check(&self) -> Result<(), LpError> {
        let n = self.num_vars();
        if self.objective.iter().any(|v| !v.is_finite()) {
            return Err(LpError::NonFinite("objective"));
        }
        for (row, c) in self.constraints.iter().enumerate() {
            if c.coeffs.len() != n {
                return Err(LpError::Dimension { row, got: c.coeffs.len(), expected: n });
            }
            if !c.rhs.is_finite() || c.coeffs.iter().any(|v| !v.is_finite()) {
                return Err(LpError::NonFinite("constraint"));
            }
        }
        Ok(())
    }

    /// Largest violation of the constraints (and of `x >= 0`) at `x`,
    /// scaled by the row magnitude.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst = x.iter().fold(0.0_f64, |w, &v| w.max(-v));
        for c in &self.constraints {
            let lhs: f64 = c.coeffs.iter().zip(x).map(|(a, b)| a * b).sum();
            let scale = 1.0 + c.rhs.abs() + c.coeffs.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            let v = match c.relation {
                Relation::Le => lhs - c.rhs,
                Relation::Ge => c.rhs - lhs,
                Relation::Eq => (lhs - c.rhs).abs(),
            };
            worst = worst.max(v / scale);
        }
        worst
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(a, b)| a * b).sum()
    }
}

impl fmt::Display for LinearProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:>6}", "max")?;
        for c in &self.objective {
            write!(f, " {c:>11.6}")?;
        }
        writeln!(f)?;
        for (i, c) in self.constraints.iter().enumerate() {
            write!(f, "{:>6}", format!("r{i}"))?;
            for a in &c.coeffs {
                write!(f, " {a:>11.6}")?;
            }
            let rel = match c.relation {
                Relation::Le => "<=",
                Relation::Ge => ">=",
                Relation::Eq => "==",
            };
            writeln!(f, "  {rel} {:>11.6}", c.rhs)?;
        }
        Ok(())
    }
}

const REINVERT_EVERY: usize = 64;
const STALL_LIMIT: usize = 50;

struct Tableau {
    rows: Vec<Vec<f64>>,
    rhs: Vec<f64>,
    basis: Vec<usize>,
    cost: Vec<f64>,
    value: f64,
    n_cols: usize,
    first_artificial: usize,
    iterations: usize,
    max_iterations: usize,
    /// Original rows still in play and the objective of the current phase.
    a0: Vec<Vec<f64>>,
    b0: Vec<f64>,
    phase_cost: Vec<f64>,
}

impl Tableau {
    fn pivot(&mut self, r: usize, e: usize) {
        let p = self.rows[r][e];
        for v in self.rows[r].iter_mut() {
            *v /= p;
        }
        self.rhs[r] /= p;
        let pivot_row = self.rows[r].clone();
        let pivot_rhs = self.rhs[r];
        for i in 0..self.rows.len() {
            if i == r {
                continue;
            }
            let factor = self.rows[i][e];
            if factor != 0.0 {
                for (v, pv) in self.rows[i].iter_mut().zip(&pivot_row) {
                    *v -= factor * pv;
                }
                self.rows[i][e] = 0.0;
                self.rhs[i] -= factor * pivot_rhs;
            }
        }
        let factor = self.cost[e];
        if factor != 0.0 {
            for (v, pv) in self.cost.iter_mut().zip(&pivot_row) {
                *v -= factor * pv;
            }
            self.cost[e] = 0.0;
            self.value += factor * pivot_rhs;
        }
        self.basis[r] = e;
    }

    /// Reduced costs of `phase_cost` against the current tableau.
    fn reprice(&mut self) {
        self.cost = self.phase_cost.clone();
        self.value = 0.0;
        for i in 0..self.rows.len() {
            let cb = self.phase_cost[self.basis[i]];
            if cb != 0.0 {
                for j in 0..self.n_cols {
                    self.cost[j] -= cb * self.rows[i][j];
                }
                self.value += cb * self.rhs[i];
            }
        }
        for &b in &self.basis {
            self.cost[b] = 0.0;
        }
    }

    /// Rebuilds the tableau for the current basis from the original rows.
    fn reinvert(&mut self) -> Result<(), LpError> {
        let k = self.a0.len();
        let mut rows = self.a0.clone();
        let mut rhs = self.b0.clone();
        for p in 0..k {
            let col = self.basis[p];
            let r = (p..k)
                .max_by(|&x, &y| rows[x][col].abs().total_cmp(&rows[y][col].abs()))
                .expect("nonempty");
            if rows[r][col].abs() < 1e-12 {
                return Err(LpError::NumericalBreakdown("singular basis".into()));
            }
            rows.swap(p, r);
            rhs.swap(p, r);
            let piv = rows[p][col];
            for v in rows[p].iter_mut() {
                *v /= piv;
            }
            rhs[p] /= piv;
            let (head, tail) = rows.split_at_mut(p);
            let (prow, tail) = tail.split_first_mut().expect("row p");
            for (i, row) in head.iter_mut().chain(tail.iter_mut()).enumerate() {
                let i = if i < p { i } else { i + 1 };
                let f = row[col];
                if f != 0.0 {
                    for (v, pv) in row.iter_mut().zip(prow.iter()) {
                        *v -= f * pv;
                    }
                    row[col] = 0.0;
                    rhs[i] -= f * rhs[p];
                }
            }
        }
        for (i, v) in rhs.iter_mut().enumerate() {
            if *v < -CERT_TOL {
                return Err(LpError::NumericalBreakdown(format!("basic value {} drifted to {v:e}", self.basis[i])));
            }
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        self.rows = rows;
        self.rhs = rhs;
        self.reprice();
        Ok(())
    }

    /// Runs simplex iterations over columns `< limit`. Returns false when unbounded.
    ///
    /// Uses the largest reduced cost and, among tied ratios, the largest pivot.
    /// After a run of degenerate pivots it falls back to Bland's rule.
    fn optimize(&mut self, limit: usize) -> Result<bool, LpError> {
        let mut since_reinvert = 0;
        let mut stalled = 0;
        loop {
            let bland = stalled > STALL_LIMIT;
            let entering = if bland {
                (0..limit).find(|&j| self.cost[j] > PIVOT_TOL)
            } else {
                (0..limit)
                    .filter(|&j| self.cost[j] > PIVOT_TOL)
                    .max_by(|&x, &y| self.cost[x].total_cmp(&self.cost[y]).then(y.cmp(&x)))
            };
            let Some(e) = entering else {
                if since_reinvert == 0 {
                    return Ok(true);
                }
                // confirm optimality on a freshly computed tableau
                self.reinvert()?;
                since_reinvert = 0;
                if (0..limit).any(|j| self.cost[j] > PIVOT_TOL) {
                    continue;
                }
                return Ok(true);
            };
            let mut min_ratio = f64::INFINITY;
            for i in 0..self.rows.len() {
                let a = self.rows[i][e];
                if a > PIVOT_TOL {
                    min_ratio = min_ratio.min(self.rhs[i].max(0.0) / a);
                }
            }
            let mut leave: Option<usize> = None;
            for i in 0..self.rows.len() {
                let a = self.rows[i][e];
                if a > PIVOT_TOL && self.rhs[i].max(0.0) / a <= min_ratio + 1e-12 {
                    leave = match leave {
                        None => Some(i),
                        Some(j) if bland => Some(if self.basis[i] < self.basis[j] { i } else { j }),
                        Some(j) => Some(if a > self.rows[j][e] { i } else { j }),
                    };
                }
            }
            let Some(r) = leave else {
                if since_reinvert > 0 {
                    self.reinvert()?;
                    since_reinvert = 0;
                    continue;
                }
                return Ok(false);
            };
            let before = self.value;
            self.pivot(r, e);
            if self.value > before + 1e-12 {
                stalled = 0;
            } else {
                stalled += 1;
            }
            self.iterations += 1;
            since_reinvert += 1;
            if self.iterations > self.max_iterations {
                return Err(LpError::IterationLimit(self.max_iterations));
            }
            if since_reinvert >= REINVERT_EVERY {
                self.reinvert()?;
                since_reinvert = 0;
            }
        }
    }
}

pub fn solve(lp: &LinearProgram) -> Result<LpSolution, LpError> {
    lp.check()?;
    let n = lp.num_vars();
    let m = lp.constraints.len();

    let mut normalized: Vec<(Vec<f64>, Relation, f64)> = lp
        .constraints
        .iter()
        .map(|c| {
            if c.rhs < 0.0 {
                let flipped = match c.relation {
                    Relation::Le => Relation::Ge,
                    Relation::Ge => Relation::Le,
                    Relation::Eq => Relation::Eq,
                };
                (c.coeffs.iter().map(|v| -v).collect(), flipped, -c.rhs)
            } else {
                (c.coeffs.clone(), c.relation, c.rhs)
            }
        })
        .collect();

    let n_slack = normalized.iter().filter(|c| c.1 != Relation::Eq).count();
    let n_art = normalized.iter().filter(|c| c.1 != Relation::Le).count();
    let first_artificial = n + n_slack;
    let n_cols = first_artificial + n_art;

    let mut rows = Vec::with_capacity(m);
    let mut rhs = Vec::with_capacity(m);
    let mut basis = Vec::with_capacity(m);
    let mut slack = n;
    let mut art = first_artificial;
    for (coeffs, rel, b) in normalized.drain(..) {
        let mut row = coeffs;
        row.resize(n_cols, 0.0);
        match rel {
            Relation::Le => {
                row[slack] = 1.0;
                basis.push(slack);
                slack += 1;
            }
            Relation::Ge => {
                row[slack] = -1.0;
                slack += 1;
                row[art] = 1.0;
                basis.push(art);
                art += 1;
            }
            Relation::Eq => {
                row[art] = 1.0;
                basis.push(art);
                art += 1;
            }
        }
        rows.push(row);
        rhs.push(b);
    }

    let mut t = Tableau {
        a0: rows.clone(),
        b0: rhs.clone(),
        rows,
        rhs,
        basis,
        cost: vec![0.0; n_cols],
        value: 0.0,
        n_cols,
        first_artificial,
        iterations: 0,
        max_iterations: 50_000 + 200 * (m + n_cols),
        phase_cost: vec![0.0; n_cols],
    };

    if n_art > 0 {
        for j in first_artificial..n_cols {
            t.phase_cost[j] = -1.0;
        }
        t.reprice();
        t.optimize(n_cols)?;
        let infeasibility: f64 = (0..t.rows.len())
            .filter(|&i| t.basis[i] >= first_artificial)
            .map(|i| t.rhs[i])
            .sum();
        let scale = 1.0 + lp.constraints.iter().fold(0.0_f64, |a, c| a.max(c.rhs.abs()));
        if infeasibility > CERT_TOL * scale {
            return Ok(LpSolution { status: LpStatus::Infeasible, x: vec![0.0; n], objective: 0.0 });
        }
        drive_out_artificials(&mut t);
    }

    t.phase_cost = vec![0.0; t.n_cols];
    t.phase_cost[..n].copy_from_slice(&lp.objective);
    t.reinvert()?;
    if !t.optimize(t.first_artificial)? {
        return Ok(LpSolution { status: LpStatus::Unbounded, x: vec![0.0; n], objective: 0.0 });
    }

    let mut x = vec![0.0; n];
    for (i, &b) in t.basis.iter().enumerate() {
        if b < n {
            x[b] = t.rhs[i].max(0.0);
        }
    }
    let violation = lp.max_violation(&x);
    if violation > CERT_TOL {
        return Err(LpError::NumericalBreakdown(format!(
            "final basis violates constraints by {violation:e}"
        )));
    }
    if (0..t.first_artificial).any(|j| t.cost[j] > CERT_TOL) {
        return Err(LpError::NumericalBreakdown("reduced costs not optimal".into()));
    }
    let objective = lp.value(&x);
    Ok(LpSolution { status: LpStatus::Optimal, x, objective })
}

fn drive_out_artificials(t: &mut Tableau) {
    let mut i = 0;
    while i < t.rows.len() {
        if t.basis[i] >= t.first_artificial {
            let entering = (0..t.first_artificial)
                .filter(|&j| t.rows[i][j].abs() > PIVOT_TOL)
                .max_by(|&x, &y| t.rows[i][x].abs().total_cmp(&t.rows[i][y].abs()));
            match entering {
                Some(j) => {
                    t.pivot(i, j);
                    i += 1;
                }
                None => {
                    // redundant row: drop it together with its original counterpart
                    let orig = redundant_original_row(t, i);
                    t.rows.remove(i);
                    t.rhs.remove(i);
                    t.basis.remove(i);
                    t.a0.remove(orig);
                    t.b0.remove(orig);
                }
            }
        } else {
            i += 1;
        }
    }
    for v in t.rhs.iter_mut() {
        if *v < 0.0 && *v > -FEAS_TOL {
            *v = 0.0;
        }
    }
}

/// The original row whose artificial column is basic in tableau row `i`.
fn redundant_original_row(t: &Tableau, i: usize) -> usize {
    let col = t.basis[i];
    t.a0.iter().position(|r| r[col] == 1.0).expect("artificial belongs to one row")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lp(obj: Vec<f64>, rows: Vec<(Vec<f64>, Relation, f64)>) -> LinearProgram {
        let mut p = LinearProgram { objective: obj, constraints: Vec::new() };
        for (c, r, b) in rows {
            p.add(c, r, b);
        }
        p
    }

    #[test]
    fn single_bound() {
        let p = lp(vec![1.0], vec![(vec![1.0], Relation::Le, 1.0)]);
        let s = solve(&p).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.objective - 1.0).abs() < 1e-12);
    }

    #[test]
    fn two_dimensional_vertex() {
        let p = lp(
            vec![1.0, 1.0],
            vec![
                (vec![1.0, 2.0], Relation::Le, 4.0),
                (vec![1.0, 0.0], Relation::Le, 2.0),
                (vec![0.0, 1.0], Relation::Le, 3.0),
            ],
        );
        let s = solve(&p).unwrap();
        assert!((s.objective - 3.0).abs() < 1e-12);
        assert!((s.x[0] - 2.0).abs() < 1e-12 && (s.x[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn infeasible() {
        let p = lp(vec![1.0], vec![(vec![1.0], Relation::Le, -1.0)]);
        assert_eq!(solve(&p).unwrap().status, LpStatus::Infeasible);
    }

    #[test]
    fn unbounded() {
        let p = lp(vec![1.0, 0.0], vec![(vec![1.0, -1.0], Relation::Le, 1.0)]);
        assert_eq!(solve(&p).unwrap().status, LpStatus::Unbounded);
    }

    #[test]
    fn equality_and_ge_rows() {
        // min x + y with x + y = 2, x >= 0.5 as maximize -(x + y)
        let p = lp(
            vec![-1.0, -1.0],
            vec![(vec![1.0, 1.0], Relation::Eq, 2.0), (vec![1.0, 0.0], Relation::Ge, 0.5)],
        );
        let s = solve(&p).unwrap();
        assert!((s.objective + 2.0).abs() < 1e-12);
        assert!(s.x[0] >= 0.5 - 1e-12);
    }

    #[test]
    fn redundant_equalities() {
        let p = lp(
            vec![1.0, 2.0],
            vec![
                (vec![1.0, 1.0], Relation::Eq, 1.0),
                (vec![2.0, 2.0], Relation::Eq, 2.0),
            ],
        );
        let s = solve(&p).unwrap();
        assert!((s.objective - 2.0).abs() < 1e-12);
    }

    #[test]
    fn dimension_error() {
        let p = lp(vec![1.0, 1.0], vec![(vec![1.0], Relation::Le, 1.0)]);
        assert!(matches!(solve(&p), Err(LpError::Dimension { .. })));
    }

    #[test]
    fn display_dumps_tableau() {
        let p = lp(vec![1.0], vec![(vec![1.0], Relation::Le, 1.0)]);
        let text = p.to_string();
        assert!(text.contains("max") && text.contains("<="));
    }
}
