//! Exact resolvent of the 1D mixed problem
//!
//! ```text
//! −(σ u')' = f  in (0, 1),   u'(0) = 0,   u(1) = 0,
//! ```
//!
//! through `v(x) = ∫_x^1 (1/σ) F`, `F(x) = ∫_0^x f`, so that `σ v' = −F`.
//!
//! For piecewise-constant `f` the primitive `F` is piecewise linear, `v` is
//! piecewise quadratic, and every integral below is evaluated in closed form
//! per cell. The `‖·‖_*` norm of a resolvent is the `W^{-1,1} → L¹` norm of
//! `T_m f = m F` with `m = 1/σ`, which equals `‖m‖_∞`; distances between
//! resolvents and spans of resolvents therefore reduce to L∞ problems on
//! reciprocals.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::coeff_space::{fmt17, Grid1D, PiecewiseFn};
use crate::error::{Error, Result};
use crate::minimax::{self, MinimaxProblem};

/// Piecewise-constant source on a 1D grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SourceFn {
    grid: Grid1D,
    values: Vec<f64>,
}

impl SourceFn {
    pub fn new(grid: Grid1D, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.cells() {
            return Err(Error::GridMismatch(format!(
                "{} source values for {} cells",
                values.len(),
                grid.cells()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite source value".into()));
        }
        Ok(Self { grid, values })
    }

    pub fn constant(grid: Grid1D, value: f64) -> Result<Self> {
        Self::new(grid, vec![value; grid.cells()])
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Nodal values `F(x_j)` of the primitive, `F(0) = 0`.
    pub fn primitive(&self) -> Vec<f64> {
        let h = self.grid.width();
        let mut out = Vec::with_capacity(self.values.len() + 1);
        let mut acc = 0.0;
        out.push(acc);
        for v in &self.values {
            acc += v * h;
            out.push(acc);
        }
        out
    }
}

/// Per-cell linear function, stored by its one-sided end values. Discontinuous
/// across nodes in general.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellLinearFn {
    grid: Grid1D,
    ends: Vec<[f64; 2]>,
}

impl CellLinearFn {
    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn ends(&self) -> &[[f64; 2]] {
        &self.ends
    }

    /// Value at `x`, taken from the cell containing `x` (the last cell at `x = 1`).
    pub fn value_at(&self, x: f64) -> f64 {
        let (k, s) = locate(&self.grid, x);
        let [a, b] = self.ends[k];
        a + (b - a) * s
    }

    pub fn l1_norm(&self) -> f64 {
        let h = self.grid.width();
        self.ends.iter().map(|&[a, b]| h * abs_integral(a, b)).sum()
    }

    pub fn linf_norm(&self) -> f64 {
        self.ends
            .iter()
            .fold(0.0, |acc, &[a, b]| acc.max(a.abs()).max(b.abs()))
    }
}

/// Mean of `|ℓ|` over a cell for `ℓ` linear from `a` to `b`.
fn abs_integral(a: f64, b: f64) -> f64 {
    if a * b >= 0.0 {
        0.5 * (a + b).abs()
    } else {
        0.5 * (a * a + b * b) / (a.abs() + b.abs())
    }
}

/// Cell index and relative position in `[0, 1]` of `x`.
fn locate(grid: &Grid1D, x: f64) -> (usize, f64) {
    let m = grid.cells();
    let pos = (x.clamp(0.0, 1.0) * m as f64).max(0.0);
    let k = (pos.floor() as usize).min(m - 1);
    (k, pos - k as f64)
}

/// Exact `R_σ f`: nodal values of `v` and per-cell end values of `v'`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Solution1D {
    grid: Grid1D,
    coefficient: Vec<f64>,
    source: Vec<f64>,
    primitive: Vec<f64>,
    nodal: Vec<f64>,
}

impl Solution1D {
    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    /// `v(x_j)` at the `M + 1` nodes; the last entry is exactly zero.
    pub fn nodal(&self) -> &[f64] {
        &self.nodal
    }

    /// `v'` on each cell as `[left, right]` end values.
    pub fn derivative(&self) -> CellLinearFn {
        CellLinearFn {
            grid: self.grid,
            ends: self
                .coefficient
                .iter()
                .enumerate()
                .map(|(k, &m)| [-m * self.primitive[k], -m * self.primitive[k + 1]])
                .collect(),
        }
    }

    /// Exact value of `v` at any `x ∈ [0, 1]`.
    pub fn value_at(&self, x: f64) -> f64 {
        let (k, s) = locate(&self.grid, x);
        let h = self.grid.width();
        let m = self.coefficient[k];
        let fk = self.source[k];
        let s = s * h;
        self.nodal[k + 1] + m * (self.primitive[k] * (h - s) + fk * (h * h - s * s) / 2.0)
    }

    /// `Σ c_i v_i` for solutions sharing a grid.
    pub fn combine(parts: &[Solution1D], coeffs: &[f64]) -> Result<Solution1D> {
        let first = parts.first().ok_or(Error::EmptyBasis)?;
        if parts.len() != coeffs.len() {
            return Err(Error::InvalidInput("one coefficient per solution".into()));
        }
        if parts.iter().any(|p| p.grid != first.grid) {
            return Err(Error::GridMismatch("solutions on different grids".into()));
        }
        // v' = −(Σ c_i m_i) F holds whenever all parts share the source
        let same_source = parts.iter().all(|p| p.source == first.source);
        if !same_source {
            return Err(Error::InvalidInput(
                "combined solutions must share the source".into(),
            ));
        }
        let mix = |get: &dyn Fn(&Solution1D) -> &[f64]| -> Vec<f64> {
            let mut out = vec![0.0; get(first).len()];
            for (p, &c) in parts.iter().zip(coeffs) {
                for (o, v) in out.iter_mut().zip(get(p)) {
                    *o += c * v;
                }
            }
            out
        };
        Ok(Solution1D {
            grid: first.grid,
            coefficient: mix(&|p| &p.coefficient),
            source: first.source.clone(),
            primitive: first.primitive.clone(),
            nodal: mix(&|p| &p.nodal),
        })
    }

    /// CSV `x,v,v_x` at nodes and cell midpoints. At an interior node `v_x`
    /// is taken from the cell to its right; at `x = 1` from the last cell.
    pub fn to_csv(&self) -> String {
        let m = self.grid.cells();
        let dv = self.derivative();
        let mut out = String::from("x,v,v_x\n");
        for j in 0..=2 * m {
            let x = j as f64 / (2 * m) as f64;
            let k = (j / 2).min(m - 1);
            let [a, b] = dv.ends[k];
            let deriv = if j == 2 * m {
                b
            } else if j % 2 == 0 {
                a
            } else {
                0.5 * (a + b)
            };
            let v = if j % 2 == 0 {
                self.nodal[j / 2]
            } else {
                self.value_at(x)
            };
            writeln!(out, "{},{},{}", fmt17(x), fmt17(v), fmt17(deriv)).unwrap();
        }
        out
    }
}

/// Coefficient values resampled to the source grid, which must equal or
/// refine the coefficient grid.
fn coefficient_on(coef: &PiecewiseFn, target: &Grid1D) -> Result<Vec<f64>> {
    let grid = coef.grid().as_line()?;
    let r = target.refinement_of(&grid).ok_or_else(|| {
        Error::GridMismatch(format!(
            "source grid of {} cells does not refine coefficient grid of {} cells",
            target.cells(),
            grid.cells()
        ))
    })?;
    Ok((0..target.cells()).map(|k| coef.values()[k / r]).collect())
}

/// `R_σ f` in closed form. The source grid must equal or refine the
/// coefficient grid.
pub fn apply_resolvent(sigma: &PiecewiseFn, f: &SourceFn) -> Result<Solution1D> {
    let m = sigma.reciprocal()?;
    resolvent_from_reciprocal(&m, f)
}

fn resolvent_from_reciprocal(m: &PiecewiseFn, f: &SourceFn) -> Result<Solution1D> {
    let coefficient = coefficient_on(m, &f.grid)?;
    let primitive = f.primitive();
    let h = f.grid.width();
    let cells = f.grid.cells();
    let mut nodal = vec![0.0; cells + 1];
    for k in (0..cells).rev() {
        nodal[k] = nodal[k + 1] + coefficient[k] * h * 0.5 * (primitive[k] + primitive[k + 1]);
    }
    Ok(Solution1D {
        grid: f.grid,
        coefficient,
        source: f.values.clone(),
        primitive,
        nodal,
    })
}

/// `T_m f(x) = m(x) F(x)`, exact per cell.
pub fn apply_tm(m: &PiecewiseFn, f: &SourceFn) -> Result<CellLinearFn> {
    let coefficient = coefficient_on(m, &f.grid)?;
    let primitive = f.primitive();
    Ok(CellLinearFn {
        grid: f.grid,
        ends: coefficient
            .iter()
            .enumerate()
            .map(|(k, &c)| [c * primitive[k], c * primitive[k + 1]])
            .collect(),
    })
}

/// `‖f‖_{W^{-1,1}} = ‖F‖_{L¹}`, exact including sign changes inside cells.
pub fn wm11_norm(f: &SourceFn) -> f64 {
    let h = f.grid.width();
    let p = f.primitive();
    p.windows(2).map(|w| h * abs_integral(w[0], w[1])).sum()
}

/// `‖T_m‖_{W^{-1,1} → L¹} = ‖m‖_∞`.
pub fn tm_operator_norm(m: &PiecewiseFn) -> f64 {
    m.linf_norm()
}

/// `‖R_σ − R_σ̃‖_* = ‖1/σ̃ − 1/σ‖_∞`.
pub fn resolvent_distance_star(sigma: &PiecewiseFn, sigma_tilde: &PiecewiseFn) -> Result<f64> {
    sigma.ensure_same_grid(sigma_tilde)?;
    Ok(sigma_tilde
        .reciprocal()?
        .sub(&sigma.reciprocal()?)?
        .linf_norm())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpanDistance {
    pub distance: f64,
    pub coeffs: Vec<f64>,
}

/// `dist_*(R_τ, span R_{σ_i}) = dist_∞(1/τ, span 1/σ_i)` and its minimizing
/// coefficients.
pub fn span_distance_star(tau: &PiecewiseFn, basis: &[PiecewiseFn]) -> Result<SpanDistance> {
    if basis.is_empty() {
        return Err(Error::EmptyBasis);
    }
    for s in basis {
        tau.ensure_same_grid(s)?;
    }
    let columns = basis
        .iter()
        .map(|s| s.reciprocal().map(PiecewiseFn::into_values))
        .collect::<Result<Vec<_>>>()?;
    let target = tau.reciprocal()?.into_values();
    let sol = minimax::solve(&MinimaxProblem::from_columns(&columns, target)?)?;
    Ok(SpanDistance {
        distance: sol.deviation,
        coeffs: sol.coeffs,
    })
}

/// Source whose primitive is a unit-mass tent on `[x₀ − ε, x₀ + ε]`, so that
/// `‖f‖_{W^{-1,1}} = 1`. `x₀` is snapped to the nearest node and `ε` to the
/// nearest whole number of cells, which must be at least two.
pub fn concentration_probe(grid: Grid1D, x0: f64, eps: f64) -> Result<SourceFn> {
    if !(x0 > 0.0 && x0 < 1.0) || !(eps > 0.0) {
        return Err(Error::ProbeOutOfDomain);
    }
    let m = grid.cells();
    let h = grid.width();
    let width = (eps / h).round() as usize;
    if width < 2 {
        return Err(Error::ProbeUnresolved {
            eps,
            h,
            min_cells: 2,
        });
    }
    let center = (x0 / h).round() as usize;
    if center < width || center + width > m {
        return Err(Error::ProbeOutOfDomain);
    }
    let eps = width as f64 * h;
    let slope = 1.0 / (eps * eps);
    let mut values = vec![0.0; m];
    values[center - width..center].fill(slope);
    values[center..center + width].fill(-slope);
    SourceFn::new(grid, values)
}

/// One probe per cell of `coeff_grid`, centered at the cell midpoint, on a grid
/// refined `refine` times with `ε` two fine cells. `refine` must be even and
/// at least 4 so that each tent lies inside its coarse cell.
pub fn probe_suite(coeff_grid: Grid1D, refine: usize) -> Result<Vec<SourceFn>> {
    if refine < 4 || refine % 2 != 0 {
        return Err(Error::InvalidInput(format!(
            "probe refinement must be even and at least 4, got {refine}"
        )));
    }
    let fine = Grid1D::new(coeff_grid.cells() * refine)?;
    let eps = 2.0 * fine.width();
    (0..coeff_grid.cells())
        .map(|k| {
            let x0 = (k as f64 + 0.5) * coeff_grid.width();
            concentration_probe(fine, x0, eps)
        })
        .collect()
}

/// `max_f ‖T_m f‖_{L¹} / ‖f‖_{W^{-1,1}}` over the probes; a lower bound for
/// `‖m‖_∞`.
pub fn empirical_star_norm(m: &PiecewiseFn, probes: &[SourceFn]) -> Result<f64> {
    if probes.is_empty() {
        return Err(Error::InvalidInput("empty probe set".into()));
    }
    let mut best: f64 = 0.0;
    for (i, f) in probes.iter().enumerate() {
        let denom = wm11_norm(f);
        if denom == 0.0 {
            return Err(Error::DegenerateProbe(i));
        }
        best = best.max(apply_tm(m, f)?.l1_norm() / denom);
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeff_space::Grid;

    fn line(values: &[f64]) -> PiecewiseFn {
        PiecewiseFn::line(values.to_vec()).unwrap()
    }

    fn g(m: usize) -> Grid1D {
        Grid1D::new(m).unwrap()
    }

    /// Composite midpoint rule for `v(0) = ∫_0^1 (1/σ(t)) ∫_0^t f ds dt`.
    fn quadrature_v0(inv_sigma: impl Fn(f64) -> f64, f: impl Fn(f64) -> f64, n: usize) -> f64 {
        let h = 1.0 / n as f64;
        let mut primitive = 0.0;
        let mut total = 0.0;
        for i in 0..n {
            let t = (i as f64 + 0.5) * h;
            let mid_primitive = primitive + 0.5 * h * f(t);
            total += inv_sigma(t) * mid_primitive * h;
            primitive += h * f(t);
        }
        total
    }

    #[test]
    fn constant_coefficient_closed_forms() {
        let f = SourceFn::constant(g(8), 1.0).unwrap();
        let sol = apply_resolvent(&PiecewiseFn::constant(Grid::line(8).unwrap(), 1.0).unwrap(), &f)
            .unwrap();
        for j in 0..=8 {
            let x = j as f64 / 8.0;
            assert!((sol.nodal()[j] - (1.0 - x * x) / 2.0).abs() < 1e-15);
        }
        assert!((sol.value_at(0.3) - (1.0 - 0.09) / 2.0).abs() < 1e-15);
        assert_eq!(sol.nodal()[8], 0.0);
        let sol2 =
            apply_resolvent(&PiecewiseFn::constant(Grid::line(8).unwrap(), 2.0).unwrap(), &f)
                .unwrap();
        for j in 0..=8 {
            let x = j as f64 / 8.0;
            assert!((sol2.nodal()[j] - (1.0 - x * x) / 4.0).abs() < 1e-15);
        }
    }

    #[test]
    fn two_block_coefficient_matches_quadrature() {
        let oracle = quadrature_v0(|t| if t < 0.5 { 1.0 } else { 0.5 }, |_| 1.0, 200_000);
        assert!((oracle - 5.0 / 16.0).abs() < 1e-9);
        let sol = apply_resolvent(&line(&[1.0, 2.0]), &SourceFn::constant(g(2), 1.0).unwrap())
            .unwrap();
        assert!((sol.nodal()[0] - 5.0 / 16.0).abs() < 1e-15);
        // derivative vanishes at 0 since F(0) = 0
        assert_eq!(sol.derivative().ends()[0][0], 0.0);
    }

    #[test]
    fn grid_mismatch() {
        let f = SourceFn::constant(g(3), 1.0).unwrap();
        assert!(matches!(
            apply_resolvent(&line(&[1.0, 2.0]), &f),
            Err(Error::GridMismatch(_))
        ));
        assert!(matches!(apply_tm(&line(&[1.0, 2.0]), &f), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn tm_examples() {
        let f = SourceFn::constant(g(2), 1.0).unwrap();
        let t = apply_tm(&line(&[1.0, 1.0]), &f).unwrap();
        assert_eq!(t.ends(), &[[0.0, 0.5], [0.5, 1.0]]);
        assert_eq!(t.value_at(0.3), 0.3);
        let z = apply_tm(&line(&[0.0, 0.0]), &f).unwrap();
        assert_eq!(z.linf_norm(), 0.0);
        let half = apply_tm(&line(&[1.0, 0.5]), &f).unwrap();
        assert_eq!(half.value_at(0.25), 0.25);
        assert_eq!(half.value_at(0.75), 0.375);
    }

    #[test]
    fn wm11_examples() {
        assert_eq!(wm11_norm(&SourceFn::constant(g(4), 1.0).unwrap()), 0.5);
        assert_eq!(wm11_norm(&SourceFn::constant(g(4), 0.0).unwrap()), 0.0);
        // tent: fine-grid quadrature of |F| gives 1/4
        let f = SourceFn::new(g(2), vec![1.0, -1.0]).unwrap();
        let n = 100_000;
        let quad: f64 = (0..n)
            .map(|i| {
                let x = (i as f64 + 0.5) / n as f64;
                x.min(1.0 - x) / n as f64
            })
            .sum();
        assert!((quad - 0.25).abs() < 1e-9);
        assert!((wm11_norm(&f) - 0.25).abs() < 1e-15);
        // sign change inside a cell: F = x − 1/2 on one cell has ∫|F| = 1/4
        let f = SourceFn::new(g(1), vec![1.0]).unwrap();
        assert_eq!(wm11_norm(&f), 0.5);
    }

    #[test]
    fn operator_norm_examples() {
        assert_eq!(tm_operator_norm(&line(&[2.5, 2.5])), 2.5);
        assert_eq!(tm_operator_norm(&line(&[1.0, 3.0])), 3.0);
        assert_eq!(tm_operator_norm(&line(&[1.0, 2.0]).reciprocal().unwrap()), 1.0);
    }

    #[test]
    fn distance_examples() {
        assert_eq!(resolvent_distance_star(&line(&[1.0]), &line(&[2.0])).unwrap(), 0.5);
        assert_eq!(resolvent_distance_star(&line(&[1.3, 0.7]), &line(&[1.3, 0.7])).unwrap(), 0.0);
        assert_eq!(
            resolvent_distance_star(&line(&[1.0, 2.0]), &line(&[2.0, 1.0])).unwrap(),
            0.5
        );
        assert!(resolvent_distance_star(&line(&[1.0]), &line(&[1.0, 1.0])).is_err());
    }

    #[test]
    fn span_distance_examples() {
        let one = line(&[1.0, 1.0]);
        let d = span_distance_star(&one, &[one.clone()]).unwrap();
        assert!(d.distance < 1e-15);
        assert!((d.coeffs[0] - 1.0).abs() < 1e-15);
        // 1/σ = {1, 2}; grid search over a gives 1/3 at a = 2/3
        let d = span_distance_star(&one, &[line(&[1.0, 0.5])]).unwrap();
        assert!((d.distance - 1.0 / 3.0).abs() < 1e-12);
        assert!((d.coeffs[0] - 2.0 / 3.0).abs() < 1e-12);
        let tau = line(&[0.7, 1.9]);
        let d = span_distance_star(&tau, &[line(&[1.0, 0.5]), tau.clone()]).unwrap();
        assert!(d.distance < 1e-14);
        assert!(matches!(span_distance_star(&tau, &[]), Err(Error::EmptyBasis)));
    }

    #[test]
    fn probe_examples() {
        let p = concentration_probe(g(64), 0.5, 0.25).unwrap();
        assert!((wm11_norm(&p) - 1.0).abs() < 1e-12);
        let prim = p.primitive();
        assert_eq!(prim[16], 0.0);
        assert!((prim[32] - 4.0).abs() < 1e-12);
        assert!(prim[48].abs() < 1e-12);
        assert!(matches!(
            concentration_probe(g(8), 0.5, 0.1),
            Err(Error::ProbeUnresolved { .. })
        ));
        assert!(matches!(
            concentration_probe(g(64), 0.05, 0.25),
            Err(Error::ProbeOutOfDomain)
        ));
        assert!(matches!(
            concentration_probe(g(64), 1.2, 0.1),
            Err(Error::ProbeOutOfDomain)
        ));
    }

    #[test]
    fn probe_inside_a_cell_reads_that_cell() {
        let m = line(&[1.0, 3.0]);
        let probes = probe_suite(g(2), 4).unwrap();
        for (k, p) in probes.iter().enumerate() {
            let ratio = apply_tm(&m, p).unwrap().l1_norm() / wm11_norm(p);
            assert!((ratio - m.values()[k]).abs() < 1e-14);
        }
        assert!((empirical_star_norm(&m, &probes[1..]).unwrap() - 3.0).abs() < 1e-14);
        assert!((empirical_star_norm(&line(&[1.0, 1.0]), &probes).unwrap() - 1.0).abs() < 1e-14);
        assert!(empirical_star_norm(&m, &[]).is_err());
        let zero = SourceFn::constant(g(8), 0.0).unwrap();
        assert!(matches!(
            empirical_star_norm(&m, &[zero]),
            Err(Error::DegenerateProbe(0))
        ));
        assert!(probe_suite(g(2), 3).is_err());
    }

    #[test]
    fn csv_has_nodes_and_midpoints() {
        let sol = apply_resolvent(&line(&[1.0, 2.0]), &SourceFn::constant(g(2), 1.0).unwrap())
            .unwrap();
        let csv = sol.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "x,v,v_x");
        assert_eq!(lines.len(), 6);
        let last: Vec<f64> = lines[5].split(',').map(|s| s.parse().unwrap()).collect();
        assert_eq!(last, vec![1.0, 0.0, -0.5]);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        const M: usize = 12;

        fn coef() -> impl Strategy<Value = PiecewiseFn> {
            prop::collection::vec(0.5f64..2.0, M).prop_map(|v| line(&v))
        }

        fn source() -> impl Strategy<Value = SourceFn> {
            prop::collection::vec(-3.0f64..3.0, M).prop_map(|v| SourceFn::new(g(M), v).unwrap())
        }

        proptest! {
            /// ∫ σ v' w' = ∫ f w for every continuous piecewise-linear w with w(1) = 0.
            #[test]
            fn variational_identity(sigma in coef(), f in source(),
                                    w in prop::collection::vec(-1.0f64..1.0, M)) {
                let sol = apply_resolvent(&sigma, &f).unwrap();
                let mut nodal_w = w.clone();
                nodal_w.push(0.0);
                let h = 1.0 / M as f64;
                let dv = sol.derivative();
                let mut lhs = 0.0;
                let mut rhs = 0.0;
                for k in 0..M {
                    let wx = (nodal_w[k + 1] - nodal_w[k]) / h;
                    let [a, b] = dv.ends()[k];
                    lhs += sigma.values()[k] * wx * h * 0.5 * (a + b);
                    rhs += f.values()[k] * h * 0.5 * (nodal_w[k] + nodal_w[k + 1]);
                }
                prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + rhs.abs()));
            }

            /// σ v' = −F cellwise, and v is continuous with v(1) = 0.
            #[test]
            fn flux_equals_minus_primitive(sigma in coef(), f in source()) {
                let sol = apply_resolvent(&sigma, &f).unwrap();
                let prim = f.primitive();
                for (k, [a, b]) in sol.derivative().ends().iter().enumerate() {
                    let s = sigma.values()[k];
                    prop_assert!((s * a + prim[k]).abs() <= 1e-13 * (1.0 + prim[k].abs()));
                    prop_assert!((s * b + prim[k + 1]).abs() <= 1e-13 * (1.0 + prim[k + 1].abs()));
                }
                prop_assert_eq!(sol.nodal()[M], 0.0);
                for j in 0..M {
                    let x = j as f64 / M as f64;
                    prop_assert!((sol.value_at(x) - sol.nodal()[j]).abs() <= 1e-13);
                }
            }

            #[test]
            fn probes_never_exceed_operator_norm(m in coef(),
                                                 centers in prop::collection::vec(0.1f64..0.9, 1..6),
                                                 eps in 0.02f64..0.09) {
                let fine = g(M * 16);
                let probes: Vec<SourceFn> = centers
                    .iter()
                    .map(|&c| concentration_probe(fine, c, eps).unwrap())
                    .collect();
                let emp = empirical_star_norm(&m, &probes).unwrap();
                prop_assert!(emp <= tm_operator_norm(&m) * (1.0 + 1e-14));
            }

            #[test]
            fn argmax_probe_attains_norm(m in coef()) {
                let k = (0..M).max_by(|&a, &b| m.values()[a].total_cmp(&m.values()[b])).unwrap();
                let probes = probe_suite(g(M), 4).unwrap();
                let emp = empirical_star_norm(&m, &probes[k..=k]).unwrap();
                prop_assert!((emp - tm_operator_norm(&m)).abs() <= 1e-13);
            }

            #[test]
            fn distance_sandwich(s in coef(), t in coef()) {
                let d = s.sub(&t).unwrap().linf_norm();
                let dr = resolvent_distance_star(&s, &t).unwrap();
                prop_assert!(d / 4.0 <= dr + 1e-12);
                prop_assert!(dr <= d / 0.25 + 1e-12);
                prop_assert_eq!(dr, resolvent_distance_star(&t, &s).unwrap());
            }

            /// (R_τ f − Σ a_i R_i f)' = (Σ a_i/σ_i − 1/τ) F cellwise.
            #[test]
            fn difference_of_resolvents(tau in coef(), s1 in coef(), s2 in coef(), f in source(),
                                        a in prop::collection::vec(-2.0f64..2.0, 2)) {
                let exact = apply_resolvent(&tau, &f).unwrap();
                let parts = [apply_resolvent(&s1, &f).unwrap(), apply_resolvent(&s2, &f).unwrap()];
                let approx = Solution1D::combine(&parts, &a).unwrap();
                let prim = f.primitive();
                let de = exact.derivative();
                let da = approx.derivative();
                for k in 0..M {
                    let mult = a[0] / s1.values()[k] + a[1] / s2.values()[k] - 1.0 / tau.values()[k];
                    for e in 0..2 {
                        let lhs = de.ends()[k][e] - da.ends()[k][e];
                        prop_assert!((lhs - mult * prim[k + e]).abs() <= 1e-12);
                    }
                }
            }

            #[test]
            fn span_containing_target_is_zero(tau in coef(), s in coef()) {
                let d = span_distance_star(&tau, &[s, tau.clone()]).unwrap();
                prop_assert!(d.distance <= 1e-12);
            }
        }
    }
}
