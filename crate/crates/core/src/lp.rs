//! Dense two-phase simplex with Bland's anti-cycling rule.
//!
//! Solves `min cᵀx  s.t.  A x ≤ b,  x ≥ 0` where `b` may have either sign.
//! Rows with `b_r ≥ 0` start basic on their slack; rows with `b_r < 0` are
//! negated and get an artificial variable that phase 1 drives out.

const PIVOT_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal { x: Vec<f64>, value: f64 },
    /// Phase 1 stopped with this much residual infeasibility.
    Infeasible { residual: f64 },
    Unbounded,
}

#[derive(Debug, Clone, Default)]
pub struct LinearProgram {
    pub cost: Vec<f64>,
    pub rows: Vec<Vec<f64>>,
    pub rhs: Vec<f64>,
}

impl LinearProgram {
    pub fn new(cost: Vec<f64>) -> Self {
        Self {
            cost,
            rows: Vec::new(),
            rhs: Vec::new(),
        }
    }

    /// Adds `row · x ≤ rhs`.
    pub fn le(&mut self, row: Vec<f64>, rhs: f64) -> &mut Self {
        assert_eq!(row.len(), self.cost.len(), "constraint width");
        self.rows.push(row);
        self.rhs.push(rhs);
        self
    }

    /// Runs both phases. `feas_tol` bounds the phase-1 residual accepted as feasible.
    pub fn solve(&self, feas_tol: f64) -> LpOutcome {
        Tableau::build(self).run(feas_tol)
    }
}

struct Tableau {
    m: usize,
    n_x: usize,
    n_cols: usize,
    /// `m` constraint rows, each `n_cols + 1` wide (last entry is the rhs).
    t: Vec<Vec<f64>>,
    basis: Vec<usize>,
    artificial: Vec<bool>,
    cost: Vec<f64>,
}

impl Tableau {
    fn build(lp: &LinearProgram) -> Self {
        let m = lp.rows.len();
        let n_x = lp.cost.len();
        let n_art = lp.rhs.iter().filter(|&&b| b < 0.0).count();
        let n_cols = n_x + m + n_art;
        let mut t = vec![vec![0.0; n_cols + 1]; m];
        let mut basis = vec![0; m];
        let mut artificial = vec![false; n_cols];
        let mut next_art = n_x + m;
        for r in 0..m {
            let sign = if lp.rhs[r] < 0.0 { -1.0 } else { 1.0 };
            for c in 0..n_x {
                t[r][c] = sign * lp.rows[r][c];
            }
            t[r][n_x + r] = sign;
            t[r][n_cols] = sign * lp.rhs[r];
            if sign < 0.0 {
                t[r][next_art] = 1.0;
                artificial[next_art] = true;
                basis[r] = next_art;
                next_art += 1;
            } else {
                basis[r] = n_x + r;
            }
        }
        let mut cost = vec![0.0; n_cols];
        cost[..n_x].copy_from_slice(&lp.cost);
        Self {
            m,
            n_x,
            n_cols,
            t,
            basis,
            artificial,
            cost,
        }
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let piv = self.t[row][col];
        for v in self.t[row].iter_mut() {
            *v /= piv;
        }
        let pivot_row = self.t[row].clone();
        for r in 0..self.m {
            if r == row {
                continue;
            }
            let f = self.t[r][col];
            if f != 0.0 {
                for (v, p) in self.t[r].iter_mut().zip(&pivot_row) {
                    *v -= f * p;
                }
            }
        }
        self.basis[row] = col;
    }

    /// Minimizes `obj · x` over the current tableau; `allowed` masks entering columns.
    fn optimize(&mut self, obj: &[f64], allowed: &[bool]) -> bool {
        let max_pivots = 50 * (self.n_cols + self.m + 10);
        for _ in 0..max_pivots {
            // Reduced costs d_c = obj_c − Σ_r obj_{basis r} t[r][c].
            let mut entering = None;
            for c in 0..self.n_cols {
                if !allowed[c] || self.basis.contains(&c) {
                    continue;
                }
                let d = obj[c]
                    - (0..self.m)
                        .map(|r| obj[self.basis[r]] * self.t[r][c])
                        .sum::<f64>();
                if d < -1e-11 {
                    entering = Some(c);
                    break;
                }
            }
            let Some(col) = entering else {
                return true;
            };
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..self.m {
                let a = self.t[r][col];
                if a > PIVOT_EPS {
                    let ratio = self.t[r][self.n_cols] / a;
                    leave = match leave {
                        None => Some((r, ratio)),
                        Some((lr, lratio)) => {
                            if ratio < lratio - 1e-14
                                || (ratio <= lratio + 1e-14 && self.basis[r] < self.basis[lr])
                            {
                                Some((r, ratio))
                            } else {
                                Some((lr, lratio))
                            }
                        }
                    };
                }
            }
            match leave {
                Some((row, _)) => self.pivot(row, col),
                None => return false,
            }
        }
        // Bland's rule terminates; hitting the cap means numerical trouble.
        false
    }

    fn run(mut self, feas_tol: f64) -> LpOutcome {
        if self.artificial.iter().any(|&a| a) {
            let phase1: Vec<f64> = (0..self.n_cols)
                .map(|c| if self.artificial[c] { 1.0 } else { 0.0 })
                .collect();
            let allowed = vec![true; self.n_cols];
            self.optimize(&phase1, &allowed);
            let residual: f64 = (0..self.m)
                .filter(|&r| self.artificial[self.basis[r]])
                .map(|r| self.t[r][self.n_cols].max(0.0))
                .sum();
            if residual > feas_tol {
                return LpOutcome::Infeasible { residual };
            }
            // Drive remaining (zero-valued) artificials out of the basis.
            for r in 0..self.m {
                if self.artificial[self.basis[r]] {
                    if let Some(col) = (0..self.n_cols)
                        .find(|&c| !self.artificial[c] && self.t[r][c].abs() > 1e-9)
                    {
                        self.pivot(r, col);
                    }
                }
            }
        }
        let allowed: Vec<bool> = self.artificial.iter().map(|a| !a).collect();
        let cost = self.cost.clone();
        if !self.optimize(&cost, &allowed) {
            return LpOutcome::Unbounded;
        }
        let mut x = vec![0.0; self.n_x];
        for r in 0..self.m {
            if self.basis[r] < self.n_x {
                x[self.basis[r]] = self.t[r][self.n_cols].max(0.0);
            }
        }
        let value = x.iter().zip(&self.cost).map(|(x, c)| x * c).sum();
        LpOutcome::Optimal { x, value }
    }
}
