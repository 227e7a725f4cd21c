//! L∞ best approximation `min_a ‖A a − b‖_∞`.
//!
//! [`solve`] treats the problem as the linear program
//! `min t  s.t.  −t ≤ (A a − b)_j ≤ t` and runs a dense simplex method with
//! Bland's rule. The program is rewritten around the feasible point
//! `a = 0, t = ‖b‖_∞`: with `t = ‖b‖_∞ − w` and `a = p − q`, `p, q ≥ 0`,
//!
//! ```text
//! maximize w  s.t.   A(p − q) + w ≤ ‖b‖_∞ + b
//!                   −A(p − q) + w ≤ ‖b‖_∞ − b,   p, q, w ≥ 0
//! ```
//!
//! whose right-hand sides are nonnegative, so the slack basis is feasible and
//! no phase one is needed. `w ≥ 0` loses nothing since `w = 0` is feasible.
//!
//! [`brute_force`] is an independent oracle: the exact minimum of the
//! objective over a lattice `{−box + i·step}^n`, `n ≤ 3`.

use serde::{Deserialize, Serialize};

use crate::coeff_space::linf;
use crate::error::{Error, Result};

/// Dense `rows × cols` matrix (row-major) and target vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinimaxProblem {
    rows: usize,
    cols: usize,
    matrix: Vec<f64>,
    target: Vec<f64>,
}

impl MinimaxProblem {
    pub fn new(rows: usize, cols: usize, matrix: Vec<f64>, target: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidInput(
                "minimax problem needs at least one row and one column".into(),
            ));
        }
        if matrix.len() != rows * cols {
            return Err(Error::InvalidInput(format!(
                "matrix has {} entries, expected {rows}x{cols}",
                matrix.len()
            )));
        }
        if target.len() != rows {
            return Err(Error::InvalidInput(format!(
                "target has {} entries, expected {rows}",
                target.len()
            )));
        }
        if matrix.iter().chain(&target).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite entry".into()));
        }
        Ok(Self {
            rows,
            cols,
            matrix,
            target,
        })
    }

    /// Builds the problem from column vectors.
    pub fn from_columns(columns: &[Vec<f64>], target: Vec<f64>) -> Result<Self> {
        let rows = target.len();
        if columns.iter().any(|c| c.len() != rows) {
            return Err(Error::InvalidInput("columns differ in length from target".into()));
        }
        let cols = columns.len();
        let mut matrix = vec![0.0; rows * cols];
        for (k, col) in columns.iter().enumerate() {
            for (j, &v) in col.iter().enumerate() {
                matrix[j * cols + k] = v;
            }
        }
        Self::new(rows, cols, matrix, target)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn entry(&self, row: usize, col: usize) -> f64 {
        self.matrix[row * self.cols + col]
    }

    pub fn target(&self) -> &[f64] {
        &self.target
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.matrix[row * self.cols..(row + 1) * self.cols]
    }

    /// `A a − b`.
    pub fn residual(&self, coeffs: &[f64]) -> Vec<f64> {
        (0..self.rows)
            .map(|j| {
                self.row(j)
                    .iter()
                    .zip(coeffs)
                    .map(|(x, y)| x * y)
                    .sum::<f64>()
                    - self.target[j]
            })
            .collect()
    }

    /// `max_j |(A a − b)_j|`.
    pub fn deviation(&self, coeffs: &[f64]) -> f64 {
        linf(&self.residual(coeffs))
    }

    /// `max_j Σ_k |A_jk|`, the Lipschitz constant of the objective in the max-norm.
    pub fn max_row_sum(&self) -> f64 {
        (0..self.rows)
            .map(|j| self.row(j).iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    fn solution(&self, coeffs: Vec<f64>) -> MinimaxSolution {
        let residual = self.residual(&coeffs);
        let deviation = linf(&residual);
        let tol = ACTIVE_TOL * deviation.max(1.0);
        let active_rows = residual
            .iter()
            .enumerate()
            .filter(|(_, r)| r.abs() >= deviation - tol)
            .map(|(j, _)| j)
            .collect();
        MinimaxSolution {
            coeffs,
            deviation,
            active_rows,
        }
    }
}

const ACTIVE_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinimaxSolution {
    pub coeffs: Vec<f64>,
    /// `t = max_j |(A a − b)_j|`, recomputed from `coeffs`.
    pub deviation: f64,
    /// Rows where `|A a − b|` attains `t` within `1e-9` relative.
    pub active_rows: Vec<usize>,
}

/// Simplex tolerances.
#[derive(Clone, Copy, Debug)]
pub struct SimplexOptions {
    /// Absolute tolerance on reduced costs.
    pub optimality_tol: f64,
    /// Smallest pivot magnitude accepted in the ratio test.
    pub pivot_tol: f64,
    /// `None` picks `50 · (rows + cols)`.
    pub max_pivots: Option<usize>,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self {
            optimality_tol: 1e-10,
            pivot_tol: 1e-12,
            max_pivots: None,
        }
    }
}

pub fn solve(problem: &MinimaxProblem) -> Result<MinimaxSolution> {
    solve_with(problem, &SimplexOptions::default())
}

pub fn solve_with(problem: &MinimaxProblem, opts: &SimplexOptions) -> Result<MinimaxSolution> {
    let bound = linf(&problem.target);
    if bound == 0.0 {
        return Ok(problem.solution(vec![0.0; problem.cols]));
    }
    let mut tableau = Tableau::new(problem, bound);
    let cap = opts
        .max_pivots
        .unwrap_or(50 * (problem.rows + problem.cols));
    tableau.run(opts, cap)?;
    let coeffs = tableau.coefficients(problem.cols);
    let sol = problem.solution(coeffs);
    // a = 0 is always feasible
    if sol.deviation > bound {
        return Ok(problem.solution(vec![0.0; problem.cols]));
    }
    Ok(sol)
}

/// Condensed (Tucker) tableau: `basic_r = rhs_r − Σ_c body[r][c] · nonbasic_c`,
/// objective `z = z0 + Σ_c cost_c · nonbasic_c`.
struct Tableau {
    n_rows: usize,
    n_cols: usize,
    body: Vec<f64>,
    rhs: Vec<f64>,
    cost: Vec<f64>,
    /// Variable ids: structural `0..n_cols` (p, q, w), slacks `n_cols..`.
    basic: Vec<usize>,
    nonbasic: Vec<usize>,
}

impl Tableau {
    fn new(problem: &MinimaxProblem, bound: f64) -> Self {
        let (m, n) = (problem.rows, problem.cols);
        let n_cols = 2 * n + 1;
        let n_rows = 2 * m;
        let mut body = vec![0.0; n_rows * n_cols];
        let mut rhs = vec![0.0; n_rows];
        for j in 0..m {
            let row = problem.row(j);
            for s in 0..2 {
                let sign = if s == 0 { 1.0 } else { -1.0 };
                let r = j + s * m;
                let line = &mut body[r * n_cols..(r + 1) * n_cols];
                for k in 0..n {
                    line[k] = sign * row[k];
                    line[n + k] = -sign * row[k];
                }
                line[2 * n] = 1.0;
                rhs[r] = bound + sign * problem.target[j];
            }
        }
        let mut cost = vec![0.0; n_cols];
        cost[2 * n] = 1.0;
        Self {
            n_rows,
            n_cols,
            body,
            rhs,
            cost,
            basic: (n_cols..n_cols + n_rows).collect(),
            nonbasic: (0..n_cols).collect(),
        }
    }

    fn run(&mut self, opts: &SimplexOptions, cap: usize) -> Result<()> {
        for _ in 0..cap {
            // Bland: entering variable with the smallest id among improving ones.
            let entering = (0..self.n_cols)
                .filter(|&c| self.cost[c] > opts.optimality_tol)
                .min_by_key(|&c| self.nonbasic[c]);
            let Some(e) = entering else {
                return Ok(());
            };
            let mut leaving: Option<(usize, f64)> = None;
            for r in 0..self.n_rows {
                let a = self.body[r * self.n_cols + e];
                if a <= opts.pivot_tol {
                    continue;
                }
                let ratio = self.rhs[r].max(0.0) / a;
                leaving = match leaving {
                    None => Some((r, ratio)),
                    Some((best, best_ratio)) => {
                        if ratio < best_ratio
                            || (ratio == best_ratio && self.basic[r] < self.basic[best])
                        {
                            Some((r, ratio))
                        } else {
                            Some((best, best_ratio))
                        }
                    }
                };
            }
            let Some((r, _)) = leaving else {
                return Err(Error::NumericalBreakdown(
                    "objective unbounded in the minimax program".into(),
                ));
            };
            self.pivot(r, e);
        }
        Err(Error::NumericalBreakdown(format!(
            "simplex exceeded {cap} pivots"
        )))
    }

    fn pivot(&mut self, r: usize, e: usize) {
        let nc = self.n_cols;
        let p = self.body[r * nc + e];
        {
            let line = &mut self.body[r * nc..(r + 1) * nc];
            for (c, v) in line.iter_mut().enumerate() {
                if c == e {
                    *v = 1.0 / p;
                } else {
                    *v /= p;
                }
            }
        }
        self.rhs[r] /= p;
        let pivot_line = self.body[r * nc..(r + 1) * nc].to_vec();
        let pivot_rhs = self.rhs[r];
        for i in 0..self.n_rows {
            if i == r {
                continue;
            }
            let f = self.body[i * nc + e];
            if f == 0.0 {
                continue;
            }
            let line = &mut self.body[i * nc..(i + 1) * nc];
            for (c, v) in line.iter_mut().enumerate() {
                if c == e {
                    *v = -f / p;
                } else {
                    *v -= f * pivot_line[c];
                }
            }
            self.rhs[i] -= f * pivot_rhs;
        }
        let f = self.cost[e];
        for (c, v) in self.cost.iter_mut().enumerate() {
            if c == e {
                *v = -f / p;
            } else {
                *v -= f * pivot_line[c];
            }
        }
        std::mem::swap(&mut self.basic[r], &mut self.nonbasic[e]);
    }

    fn coefficients(&self, n: usize) -> Vec<f64> {
        let mut x = vec![0.0; self.n_cols];
        for (r, &var) in self.basic.iter().enumerate() {
            if var < self.n_cols {
                x[var] = self.rhs[r];
            }
        }
        (0..n).map(|k| x[k] - x[n + k]).collect()
    }
}

/// Exact minimum of `‖A a − b‖_∞` over the lattice `a_k = −box + i·step`,
/// `0 ≤ i ≤ round(2·box/step)`.
///
/// The lattice is searched by bisection of index boxes; a box is discarded
/// when the value at its center minus the Lipschitz bound
/// `max_row_sum · radius` cannot beat the best lattice point found so far.
/// Every lattice point is either evaluated or provably no better.
pub fn brute_force(problem: &MinimaxProblem, half_width: f64, step: f64) -> Result<MinimaxSolution> {
    let n = problem.cols;
    if n > 3 {
        return Err(Error::OracleTooLarge(n));
    }
    if !(half_width > 0.0 && step > 0.0 && step.is_finite()) {
        return Err(Error::InvalidInput("box and step must be positive".into()));
    }
    let last = (2.0 * half_width / step).round() as i64;
    let lipschitz = problem.max_row_sum();
    let point = |idx: &[i64]| -> Vec<f64> {
        idx.iter()
            .map(|&i| -half_width + i as f64 * step)
            .collect()
    };
    let zero_idx: Vec<i64> = vec![(half_width / step).round() as i64; n];
    let mut best_idx = zero_idx.clone();
    let mut best = problem.deviation(&point(&zero_idx));

    let mut stack: Vec<Vec<(i64, i64)>> = vec![vec![(0, last); n]];
    while let Some(ranges) = stack.pop() {
        let center: Vec<i64> = ranges.iter().map(|&(lo, hi)| lo + (hi - lo) / 2).collect();
        let value = problem.deviation(&point(&center));
        if value < best {
            best = value;
            best_idx = center.clone();
        }
        let radius = ranges
            .iter()
            .zip(&center)
            .map(|(&(lo, hi), &c)| (hi - c).max(c - lo))
            .max()
            .unwrap_or(0);
        if radius == 0 || value - lipschitz * radius as f64 * step >= best {
            continue;
        }
        let (axis, _) = ranges
            .iter()
            .enumerate()
            .max_by_key(|(k, &(lo, hi))| (hi - lo, std::cmp::Reverse(*k)))
            .unwrap();
        let (lo, hi) = ranges[axis];
        let mid = lo + (hi - lo) / 2;
        let mut left = ranges.clone();
        left[axis] = (lo, mid);
        let mut right = ranges;
        right[axis] = (mid + 1, hi);
        // explore the half holding the current best first
        if best_idx[axis] > mid {
            stack.push(left);
            stack.push(right);
        } else {
            stack.push(right);
            stack.push(left);
        }
    }
    Ok(problem.solution(point(&best_idx)))
}
