//! Dense tableau simplex for small standard-form programs
//! `max c.x  s.t.  A x = b, x >= 0`.
//!
//! Two phases with artificial variables, Bland's rule throughout. Several
//! objectives can be optimized lexicographically: after each stage every
//! nonbasic column with a strictly non-improving reduced cost is frozen at
//! zero, so later stages move only within the optimal face of earlier ones.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum LpError {
    #[error("linear program is infeasible (phase-one residual {0:.3e})")]
    Infeasible(f64),
    #[error("linear program is unbounded in objective {0}")]
    Unbounded(usize),
    #[error("malformed program: {0}")]
    Malformed(String),
    #[error("simplex exceeded {0} pivots")]
    IterationLimit(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct StandardLp {
    /// Constraint rows, each of length `n`.
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub x: Vec<f64>,
    /// Optimal value of each objective, in order.
    pub values: Vec<f64>,
}

const MAX_PIVOTS: usize = 100_000;

struct Tableau {
    /// `m` rows of `width + 1` entries; the last entry is the right-hand side.
    rows: Vec<Vec<f64>>,
    basis: Vec<usize>,
    width: usize,
    /// Columns barred from entering the basis.
    frozen: Vec<bool>,
    tol: f64,
}

impl Tableau {
    fn rhs(&self, i: usize) -> f64 {
        self.rows[i][self.width]
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.rows[r][c];
        self.rows[r].iter_mut().for_each(|v| *v /= p);
        let pivot_row = self.rows[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[c];
            if f != 0.0 {
                for (v, pv) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
                row[c] = 0.0;
            }
        }
        self.basis[r] = c;
    }

    fn reduced_costs(&self, c: &[f64]) -> Vec<f64> {
        let mut red = c.to_vec();
        red.resize(self.width, 0.0);
        for (row, &bv) in self.rows.iter().zip(&self.basis) {
            let cb = c.get(bv).copied().unwrap_or(0.0);
            if cb != 0.0 {
                for (r, v) in red.iter_mut().zip(row) {
                    *r -= cb * v;
                }
            }
        }
        red
    }

    /// Maximize `c` from the current basic feasible solution.
    fn optimize(&mut self, c: &[f64], stage: usize) -> Result<Vec<f64>, LpError> {
        for _ in 0..MAX_PIVOTS {
            let red = self.reduced_costs(c);
            // Bland: lowest-index improving column
            let Some(enter) = (0..self.width).find(|&j| !self.frozen[j] && red[j] > self.tol) else {
                return Ok(red);
            };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.rows.len() {
                let a = self.rows[i][enter];
                if a > self.tol {
                    let ratio = self.rhs(i) / a;
                    let better = match leave {
                        None => true,
                        Some((li, best)) => {
                            ratio < best - self.tol
                                || (ratio <= best + self.tol && self.basis[i] < self.basis[li])
                        }
                    };
                    if better {
                        leave = Some((i, ratio));
                    }
                }
            }
            let Some((r, _)) = leave else {
                return Err(LpError::Unbounded(stage));
            };
            self.pivot(r, enter);
        }
        Err(LpError::IterationLimit(MAX_PIVOTS))
    }

    fn objective_value(&self, c: &[f64]) -> f64 {
        self.basis
            .iter()
            .enumerate()
            .map(|(i, &bv)| c.get(bv).copied().unwrap_or(0.0) * self.rhs(i))
            .sum()
    }
}

/// Solve `lp` maximizing each of `objectives` in lexicographic order.
pub fn maximize_lexicographic(lp: &StandardLp, objectives: &[Vec<f64>], tol: f64) -> Result<LpSolution, LpError> {
    let m = lp.a.len();
    if lp.b.len() != m {
        return Err(LpError::Malformed(format!("{m} rows but {} right-hand sides", lp.b.len())));
    }
    let n = lp.a.first().map_or(0, Vec::len);
    if lp.a.iter().any(|row| row.len() != n) {
        return Err(LpError::Malformed("ragged constraint matrix".into()));
    }
    if let Some(c) = objectives.iter().find(|c| c.len() != n) {
        return Err(LpError::Malformed(format!("objective has {} entries, expected {n}", c.len())));
    }

    // Phase one: artificial variable per row, rows sign-normalized so b >= 0.
    let width = n + m;
    let mut rows = Vec::with_capacity(m);
    for (i, (row, &b)) in lp.a.iter().zip(&lp.b).enumerate() {
        let sign = if b < 0.0 { -1.0 } else { 1.0 };
        let mut t = vec![0.0; width + 1];
        for (j, v) in row.iter().enumerate() {
            t[j] = sign * v;
        }
        t[n + i] = 1.0;
        t[width] = sign * b;
        rows.push(t);
    }
    let mut tab = Tableau {
        rows,
        basis: (n..n + m).collect(),
        width,
        frozen: vec![false; width],
        tol,
    };
    let mut phase_one = vec![0.0; width];
    phase_one[n..].iter_mut().for_each(|c| *c = -1.0);
    tab.optimize(&phase_one, 0)?;
    let residual = -tab.objective_value(&phase_one);
    if residual > tol.max(1e-9) {
        return Err(LpError::Infeasible(residual));
    }

    // Drive remaining artificials out of the basis; rows where that is
    // impossible are redundant and dropped.
    let mut i = 0;
    while i < tab.rows.len() {
        if tab.basis[i] >= n {
            if let Some(j) = (0..n).find(|&j| tab.rows[i][j].abs() > tol) {
                tab.pivot(i, j);
            } else {
                tab.rows.remove(i);
                tab.basis.remove(i);
                continue;
            }
        }
        i += 1;
    }
    tab.frozen[n..].iter_mut().for_each(|f| *f = true);

    let mut values = Vec::with_capacity(objectives.len());
    for (k, c) in objectives.iter().enumerate() {
        let red = tab.optimize(c, k + 1)?;
        values.push(tab.objective_value(c));
        for j in 0..n {
            if !tab.basis.contains(&j) && red[j] < -tol {
                tab.frozen[j] = true;
            }
        }
    }

    let mut x = vec![0.0; n];
    for (i, &bv) in tab.basis.iter().enumerate() {
        if bv < n {
            // clip round-off below zero
            x[bv] = tab.rhs(i).max(0.0);
        }
    }
    Ok(LpSolution { x, values })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn textbook_program() {
        // max 3x + 5y s.t. x + s1 = 4, 2y + s2 = 12, 3x + 2y + s3 = 18
        let lp = StandardLp {
            a: vec![
                vec![1.0, 0.0, 1.0, 0.0, 0.0],
                vec![0.0, 2.0, 0.0, 1.0, 0.0],
                vec![3.0, 2.0, 0.0, 0.0, 1.0],
            ],
            b: vec![4.0, 12.0, 18.0],
        };
        let sol = maximize_lexicographic(&lp, &[vec![3.0, 5.0, 0.0, 0.0, 0.0]], 1e-12).unwrap();
        assert!((sol.values[0] - 36.0).abs() < 1e-12);
        assert!((sol.x[0] - 2.0).abs() < 1e-12);
        assert!((sol.x[1] - 6.0).abs() < 1e-12);
    }

    #[test]
    fn infeasible_and_unbounded() {
        // x + y = -1 with x, y >= 0
        let lp = StandardLp {
            a: vec![vec![1.0, 1.0]],
            b: vec![-1.0],
        };
        assert!(matches!(
            maximize_lexicographic(&lp, &[vec![1.0, 0.0]], 1e-12),
            Err(LpError::Infeasible(_))
        ));
        // x - y = 0, maximize x
        let lp = StandardLp {
            a: vec![vec![1.0, -1.0]],
            b: vec![0.0],
        };
        assert_eq!(
            maximize_lexicographic(&lp, &[vec![1.0, 0.0]], 1e-12),
            Err(LpError::Unbounded(1))
        );
    }

    #[test]
    fn redundant_rows_are_dropped() {
        let lp = StandardLp {
            a: vec![vec![1.0, 1.0], vec![2.0, 2.0]],
            b: vec![1.0, 2.0],
        };
        let sol = maximize_lexicographic(&lp, &[vec![1.0, 2.0]], 1e-12).unwrap();
        assert!((sol.values[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn lexicographic_tie_break() {
        // max x + y on the simplex x + y + z = 1: every point with z = 0 is
        // optimal; the second stage then prefers y.
        let lp = StandardLp {
            a: vec![vec![1.0, 1.0, 1.0]],
            b: vec![1.0],
        };
        let sol = maximize_lexicographic(&lp, &[vec![1.0, 1.0, 0.0], vec![-1.0, 0.0, 0.0]], 1e-12).unwrap();
        assert_eq!(sol.values, vec![1.0, 0.0]);
        assert!((sol.x[1] - 1.0).abs() < 1e-12);
    }
}
