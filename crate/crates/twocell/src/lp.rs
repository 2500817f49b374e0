//! Dense linear programming, sized for the tiny frontier programs.
//!
//! Primal simplex on a dense tableau with Bland's anti-cycling rule and a
//! two-phase start for equality constraints. Problems here have at most a
//! handful of variables and constraints, so robustness wins over speed.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum LpError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("coefficient not finite in {0}")]
    NotFinite(String),
    #[error("iteration limit reached; problem is likely ill-conditioned")]
    IterationLimit,
}

/// `maximize c.x  s.t.  a_eq x = b_eq, a_ub x <= b_ub, x >= 0`.
#[derive(Debug, Clone, Default)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub a_eq: Vec<Vec<f64>>,
    pub b_eq: Vec<f64>,
    pub a_ub: Vec<Vec<f64>>,
    pub b_ub: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Primal solution (meaningful only when `status == Optimal`).
    pub x: Vec<f64>,
    pub value: f64,
}

impl LinearProgram {
    pub fn n_vars(&self) -> usize {
        self.objective.len()
    }

    fn validate(&self) -> Result<(), LpError> {
        let n = self.n_vars();
        if self.a_eq.len() != self.b_eq.len() {
            return Err(LpError::DimensionMismatch(format!(
                "{} equality rows vs {} right-hand sides",
                self.a_eq.len(),
                self.b_eq.len()
            )));
        }
        if self.a_ub.len() != self.b_ub.len() {
            return Err(LpError::DimensionMismatch(format!(
                "{} inequality rows vs {} right-hand sides",
                self.a_ub.len(),
                self.b_ub.len()
            )));
        }
        for (i, row) in self.a_eq.iter().chain(self.a_ub.iter()).enumerate() {
            if row.len() != n {
                return Err(LpError::DimensionMismatch(format!(
                    "constraint row {i} has {} coefficients, expected {n}",
                    row.len()
                )));
            }
        }
        let all_finite = self
            .objective
            .iter()
            .chain(self.b_eq.iter())
            .chain(self.b_ub.iter())
            .chain(self.a_eq.iter().flatten())
            .chain(self.a_ub.iter().flatten())
            .all(|v| v.is_finite());
        if !all_finite {
            return Err(LpError::NotFinite("program data".into()));
        }
        Ok(())
    }
}

struct Tableau {
    /// m x (ncols + 1); last column is the right-hand side.
    rows: Vec<Vec<f64>>,
    basis: Vec<usize>,
    ncols: usize,
    tol: f64,
}

impl Tableau {
    fn rhs(&self, i: usize) -> f64 {
        let c = self.ncols;
        self.rows[i][c]
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let piv = self.rows[r][c];
        for v in self.rows[r].iter_mut() {
            *v /= piv;
        }
        for i in 0..self.rows.len() {
            if i == r {
                continue;
            }
            let factor = self.rows[i][c];
            if factor != 0.0 {
                for j in 0..=self.ncols {
                    let delta = factor * self.rows[r][j];
                    self.rows[i][j] -= delta;
                }
            }
        }
        self.basis[r] = c;
    }

    /// Bland's rule simplex on the columns in `allowed`. Returns false if
    /// unbounded.
    fn maximize(&mut self, obj: &[f64], allowed: &[bool]) -> Result<bool, LpError> {
        for _ in 0..20_000 {
            // reduced costs against the current basis
            let mut entering = None;
            'cols: for j in 0..self.ncols {
                if !allowed[j] || self.basis.contains(&j) {
                    continue;
                }
                let mut r = obj[j];
                for (i, &b) in self.basis.iter().enumerate() {
                    if obj[b] != 0.0 {
                        r -= obj[b] * self.rows[i][j];
                    }
                }
                if r > self.tol {
                    entering = Some(j);
                    break 'cols; // Bland: lowest eligible index
                }
            }
            let Some(e) = entering else {
                return Ok(true);
            };
            // ratio test, Bland tie-break on the smallest basis index
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.rows.len() {
                let a = self.rows[i][e];
                if a > self.tol {
                    let ratio = self.rhs(i) / a;
                    let better = match leave {
                        None => true,
                        Some((li, lr)) => {
                            ratio < lr - self.tol
                                || (ratio < lr + self.tol && self.basis[i] < self.basis[li])
                        }
                    };
                    if better {
                        leave = Some((i, ratio));
                    }
                }
            }
            let Some((r, _)) = leave else {
                return Ok(false);
            };
            self.pivot(r, e);
        }
        Err(LpError::IterationLimit)
    }
}

/// Solve a linear program. Infeasible and unbounded outcomes are normal
/// statuses, not errors.
pub fn solve_lp(lp: &LinearProgram, tol: f64) -> Result<LpSolution, LpError> {
    lp.validate()?;
    let n = lp.n_vars();
    let m_eq = lp.a_eq.len();
    let m_ub = lp.a_ub.len();
    let m = m_eq + m_ub;

    if m == 0 {
        // Only x >= 0: optimum is at 0 unless some objective coefficient is
        // positive, in which case the program is unbounded.
        if lp.objective.iter().any(|&c| c > tol) {
            return Ok(LpSolution {
                status: LpStatus::Unbounded,
                x: vec![0.0; n],
                value: f64::INFINITY,
            });
        }
        return Ok(LpSolution {
            status: LpStatus::Optimal,
            x: vec![0.0; n],
            value: 0.0,
        });
    }

    // Columns: n structural, m_ub slacks, then artificials as needed.
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(m);
    let mut need_artificial: Vec<bool> = Vec::with_capacity(m);
    let mut slack_col_of_row: Vec<Option<usize>> = Vec::with_capacity(m);

    for (i, row) in lp.a_eq.iter().enumerate() {
        let mut r = row.clone();
        let mut b = lp.b_eq[i];
        if b < 0.0 {
            for v in r.iter_mut() {
                *v = -*v;
            }
            b = -b;
        }
        r.resize(n + m_ub, 0.0);
        r.push(b);
        rows.push(r);
        need_artificial.push(true);
        slack_col_of_row.push(None);
    }
    for (i, row) in lp.a_ub.iter().enumerate() {
        let mut r = row.clone();
        let mut b = lp.b_ub[i];
        let mut slack = 1.0;
        if b < 0.0 {
            for v in r.iter_mut() {
                *v = -*v;
            }
            b = -b;
            slack = -1.0;
        }
        r.resize(n + m_ub, 0.0);
        r[n + i] = slack;
        r.push(b);
        rows.push(r);
        // A +1 slack with nonnegative rhs can start basic; -1 cannot.
        need_artificial.push(slack < 0.0);
        slack_col_of_row.push(Some(n + i));
    }

    let n_art: usize = need_artificial.iter().filter(|&&x| x).count();
    let ncols = n + m_ub + n_art;
    let mut basis = vec![0usize; m];
    {
        let mut art = n + m_ub;
        for i in 0..m {
            // widen every row to the full column count
            let b = rows[i].pop().unwrap();
            rows[i].resize(ncols, 0.0);
            rows[i].push(b);
            if need_artificial[i] {
                rows[i][art] = 1.0;
                basis[i] = art;
                art += 1;
            } else {
                basis[i] = slack_col_of_row[i].unwrap();
            }
        }
    }

    let mut t = Tableau {
        rows,
        basis,
        ncols,
        tol,
    };
    let allowed_all = vec![true; ncols];

    // Phase 1: drive the artificials to zero.
    if n_art > 0 {
        let mut phase1 = vec![0.0; ncols];
        for j in n + m_ub..ncols {
            phase1[j] = -1.0;
        }
        let bounded = t.maximize(&phase1, &allowed_all)?;
        debug_assert!(bounded, "phase-1 objective is bounded by construction");
        let infeasibility: f64 = t
            .basis
            .iter()
            .enumerate()
            .filter(|(_, &b)| b >= n + m_ub)
            .map(|(i, _)| t.rhs(i))
            .sum();
        if infeasibility > tol.max(1e-9) * 10.0 {
            return Ok(LpSolution {
                status: LpStatus::Infeasible,
                x: vec![0.0; n],
                value: f64::NEG_INFINITY,
            });
        }
        // Pivot lingering zero-valued artificials out of the basis.
        let mut drop_rows = Vec::new();
        for i in 0..t.rows.len() {
            if t.basis[i] >= n + m_ub {
                let col = (0..n + m_ub).find(|&j| t.rows[i][j].abs() > tol);
                match col {
                    Some(j) => t.pivot(i, j),
                    None => drop_rows.push(i), // redundant constraint
                }
            }
        }
        for &i in drop_rows.iter().rev() {
            t.rows.remove(i);
            t.basis.remove(i);
        }
    }

    // Phase 2: original objective, artificial columns locked out.
    let mut obj = vec![0.0; ncols];
    obj[..n].copy_from_slice(&lp.objective);
    let mut allowed = vec![true; ncols];
    for a in allowed.iter_mut().skip(n + m_ub) {
        *a = false;
    }
    if !t.maximize(&obj, &allowed)? {
        return Ok(LpSolution {
            status: LpStatus::Unbounded,
            x: vec![0.0; n],
            value: f64::INFINITY,
        });
    }

    let mut x = vec![0.0; n];
    for (i, &b) in t.basis.iter().enumerate() {
        if b < n {
            x[b] = t.rhs(i);
        }
    }
    let value = lp
        .objective
        .iter()
        .zip(&x)
        .map(|(c, xi)| c * xi)
        .sum::<f64>();
    Ok(LpSolution {
        status: LpStatus::Optimal,
        x,
        value,
    })
}

/// Feasibility residuals `(max equality violation, max inequality violation,
/// max negativity)`; all near zero for a valid solution.
pub fn feasibility_residuals(lp: &LinearProgram, x: &[f64]) -> (f64, f64, f64) {
    let dot = |row: &[f64]| -> f64 { row.iter().zip(x).map(|(a, b)| a * b).sum() };
    let eq = lp
        .a_eq
        .iter()
        .zip(&lp.b_eq)
        .map(|(r, b)| (dot(r) - b).abs())
        .fold(0.0, f64::max);
    let ub = lp
        .a_ub
        .iter()
        .zip(&lp.b_ub)
        .map(|(r, b)| (dot(r) - b).max(0.0))
        .fold(0.0, f64::max);
    let neg = x.iter().map(|v| (-v).max(0.0)).fold(0.0, f64::max);
    (eq, ub, neg)
}

pub const DEFAULT_LP_TOL: f64 = 1e-9;
