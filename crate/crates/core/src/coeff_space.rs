//! Piecewise-constant coefficients on uniform grids of the unit interval or
//! unit square, and finite parametric families of them.
//!
//! With piecewise constants every L∞ norm is an exact max over cells, so all
//! surrogate distances downstream are computed without quadrature error.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform grid of `(0, 1)`; cell `k` covers `[k/M, (k+1)/M)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Grid1D {
    cells: usize,
}

impl Grid1D {
    pub fn new(cells: usize) -> Result<Self> {
        if cells == 0 {
            return Err(Error::InvalidInput("grid needs at least one cell".into()));
        }
        Ok(Self { cells })
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn width(&self) -> f64 {
        1.0 / self.cells as f64
    }

    pub fn node(&self, j: usize) -> f64 {
        j as f64 / self.cells as f64
    }

    /// Number of fine cells per cell of `coarse`, if `self` refines it.
    pub fn refinement_of(&self, coarse: &Grid1D) -> Option<usize> {
        (self.cells % coarse.cells == 0).then(|| self.cells / coarse.cells)
    }
}

/// Uniform `M × M` grid of the unit square; cell `(i, j)` has index `j * M + i`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Grid2D {
    cells_per_axis: usize,
}

impl Grid2D {
    pub fn new(cells_per_axis: usize) -> Result<Self> {
        if cells_per_axis == 0 {
            return Err(Error::InvalidInput("grid needs at least one cell".into()));
        }
        Ok(Self { cells_per_axis })
    }

    pub fn cells_per_axis(&self) -> usize {
        self.cells_per_axis
    }

    pub fn width(&self) -> f64 {
        1.0 / self.cells_per_axis as f64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "dim", rename_all = "snake_case")]
pub enum Grid {
    Line(Grid1D),
    Square(Grid2D),
}

impl Grid {
    pub fn line(cells: usize) -> Result<Self> {
        Grid1D::new(cells).map(Grid::Line)
    }

    pub fn square(cells_per_axis: usize) -> Result<Self> {
        Grid2D::new(cells_per_axis).map(Grid::Square)
    }

    pub fn cell_count(&self) -> usize {
        match self {
            Grid::Line(g) => g.cells,
            Grid::Square(g) => g.cells_per_axis * g.cells_per_axis,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Grid::Line(_) => 1,
            Grid::Square(_) => 2,
        }
    }

    /// Cells per axis.
    pub fn resolution(&self) -> usize {
        match self {
            Grid::Line(g) => g.cells,
            Grid::Square(g) => g.cells_per_axis,
        }
    }

    pub fn as_line(&self) -> Result<Grid1D> {
        match self {
            Grid::Line(g) => Ok(*g),
            Grid::Square(_) => Err(Error::GridMismatch(
                "expected a 1D grid, got a 2D grid".into(),
            )),
        }
    }
}

/// A piecewise-constant function: one finite value per grid cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseFn {
    grid: Grid,
    values: Vec<f64>,
}

impl PiecewiseFn {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.cell_count() {
            return Err(Error::GridMismatch(format!(
                "{} values for a grid of {} cells",
                values.len(),
                grid.cell_count()
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite value at cell {k}")));
        }
        Ok(Self { grid, values })
    }

    pub fn constant(grid: Grid, value: f64) -> Result<Self> {
        Self::new(grid, vec![value; grid.cell_count()])
    }

    pub fn line(values: Vec<f64>) -> Result<Self> {
        Self::new(Grid::line(values.len())?, values)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// `max_k |f_k|`, exact for piecewise constants.
    pub fn linf_norm(&self) -> f64 {
        linf(&self.values)
    }

    /// Cellwise `1/σ`. Fails on any value `≤ 0`.
    pub fn reciprocal(&self) -> Result<Self> {
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(cell, &value)| {
                if value > 0.0 {
                    Ok(1.0 / value)
                } else {
                    Err(Error::NonPositiveCoefficient { cell, value })
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            grid: self.grid,
            values,
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn scale(&self, c: f64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|v| c * v).collect(),
        }
    }

    fn zip_with(&self, other: &Self, op: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.ensure_same_grid(other)?;
        Ok(Self {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| op(a, b))
                .collect(),
        })
    }

    pub fn ensure_same_grid(&self, other: &Self) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch(format!(
                "{:?} vs {:?}",
                self.grid, other.grid
            )));
        }
        Ok(())
    }

    /// Checks that every value lies in `[lower, upper]`.
    pub fn check_bounds(&self, lower: f64, upper: f64) -> Result<()> {
        match self
            .values
            .iter()
            .position(|&v| v < lower || v > upper)
        {
            Some(cell) => Err(Error::OutOfBounds {
                cell,
                value: self.values[cell],
                lower,
                upper,
            }),
            None => Ok(()),
        }
    }

    /// Checks membership in the diffusivity class `σ₀ ≤ σ ≤ σ₁` with `0 < σ₀ < σ₁`.
    pub fn check_diffusivity(&self, lower: f64, upper: f64) -> Result<()> {
        check_diffusivity_bounds(lower, upper)?;
        self.check_bounds(lower, upper)
    }
}

pub(crate) fn check_diffusivity_bounds(lower: f64, upper: f64) -> Result<()> {
    if !(lower > 0.0 && lower < upper && upper.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "diffusivity bounds need 0 < lower < upper, got [{lower}, {upper}]"
        )));
    }
    Ok(())
}

pub(crate) fn linf(values: &[f64]) -> f64 {
    values.iter().fold(0.0, |acc, v| acc.max(v.abs()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyKind {
    Diffusivity,
    Density,
}

/// How a parameter point is turned into a coefficient.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Generator {
    /// `m(x, μ) = base(x) + Σ_j μ_j modes_j(x)`, the coefficient is `1/m`.
    /// Only meaningful for diffusivities.
    AffineReciprocal { base: Vec<f64>, modes: Vec<Vec<f64>> },
    /// `c(x, μ) = base(x) + Σ_j μ_j modes_j(x)` directly.
    Affine { base: Vec<f64>, modes: Vec<Vec<f64>> },
    /// One row of cell values per training point.
    Tabulated { rows: Vec<Vec<f64>> },
}

/// Admissible parameter region.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ParamDomain {
    Box { lower: Vec<f64>, upper: Vec<f64> },
    /// Only the training points themselves.
    Listed,
}

/// A finite training set of parameters and the coefficients they generate.
#[derive(Clone, Debug)]
pub struct ParametricFamily {
    kind: FamilyKind,
    grid: Grid,
    generator: Generator,
    domain: ParamDomain,
    bounds: (f64, f64),
    points: Vec<Vec<f64>>,
    members: Vec<PiecewiseFn>,
}

impl ParametricFamily {
    /// Builds and validates a family; every training member is generated eagerly
    /// and checked against `bounds`.
    pub fn new(
        kind: FamilyKind,
        grid: Grid,
        generator: Generator,
        domain: ParamDomain,
        bounds: (f64, f64),
        points: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyFamily);
        }
        let dim = points[0].len();
        if dim == 0 || points.iter().any(|p| p.len() != dim) {
            return Err(Error::InvalidInput(
                "parameter points must share a nonzero dimension".into(),
            ));
        }
        let mut seen = HashSet::new();
        for p in &points {
            if p.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidInput(format!("non-finite parameter {p:?}")));
            }
            if !seen.insert(p.iter().map(|x| x.to_bits()).collect::<Vec<_>>()) {
                return Err(Error::InvalidInput(format!("duplicate parameter {p:?}")));
            }
        }
        match kind {
            FamilyKind::Diffusivity => check_diffusivity_bounds(bounds.0, bounds.1)?,
            FamilyKind::Density => {
                if !(bounds.0 <= bounds.1) {
                    return Err(Error::InvalidInput(format!(
                        "density bounds [{}, {}] are empty",
                        bounds.0, bounds.1
                    )));
                }
            }
        }
        let n = grid.cell_count();
        match &generator {
            Generator::AffineReciprocal { base, modes } | Generator::Affine { base, modes } => {
                if matches!(generator, Generator::AffineReciprocal { .. })
                    && kind != FamilyKind::Diffusivity
                {
                    return Err(Error::InvalidInput(
                        "affine_reciprocal generators describe diffusivities only".into(),
                    ));
                }
                if base.len() != n || modes.iter().any(|m| m.len() != n) {
                    return Err(Error::GridMismatch(format!(
                        "affine generator tables must have {n} cells"
                    )));
                }
                if modes.len() != dim {
                    return Err(Error::InvalidInput(format!(
                        "{} modes for {dim}-dimensional parameters",
                        modes.len()
                    )));
                }
            }
            Generator::Tabulated { rows } => {
                if rows.len() != points.len() {
                    return Err(Error::InvalidInput(format!(
                        "{} tabulated rows for {} parameter points",
                        rows.len(),
                        points.len()
                    )));
                }
                if rows.iter().any(|r| r.len() != n) {
                    return Err(Error::GridMismatch(format!(
                        "tabulated rows must have {n} cells"
                    )));
                }
            }
        }
        if let ParamDomain::Box { lower, upper } = &domain {
            if lower.len() != dim || upper.len() != dim {
                return Err(Error::InvalidInput(
                    "domain box dimension differs from parameter dimension".into(),
                ));
            }
        }
        let mut family = Self {
            kind,
            grid,
            generator,
            domain,
            bounds,
            points,
            members: Vec::new(),
        };
        family.members = (0..family.points.len())
            .map(|i| family.generate(&family.points[i], Some(i)))
            .collect::<Result<_>>()?;
        Ok(family)
    }

    /// Affine family over a box domain (the bounding box of `points` unless given).
    pub fn affine(
        kind: FamilyKind,
        grid: Grid,
        base: Vec<f64>,
        modes: Vec<Vec<f64>>,
        points: Vec<Vec<f64>>,
        bounds: (f64, f64),
        reciprocal: bool,
    ) -> Result<Self> {
        let domain = bounding_box(&points)?;
        let generator = if reciprocal {
            Generator::AffineReciprocal { base, modes }
        } else {
            Generator::Affine { base, modes }
        };
        Self::new(kind, grid, generator, domain, bounds, points)
    }

    pub fn tabulated(
        kind: FamilyKind,
        grid: Grid,
        points: Vec<Vec<f64>>,
        rows: Vec<Vec<f64>>,
        bounds: (f64, f64),
    ) -> Result<Self> {
        Self::new(
            kind,
            grid,
            Generator::Tabulated { rows },
            ParamDomain::Listed,
            bounds,
            points,
        )
    }

    pub fn kind(&self) -> FamilyKind {
        self.kind
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn bounds(&self) -> (f64, f64) {
        self.bounds
    }

    pub fn generator(&self) -> &Generator {
        &self.generator
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn param_dim(&self) -> usize {
        self.points[0].len()
    }

    /// The coefficient of the `i`-th training point.
    pub fn member(&self, i: usize) -> &PiecewiseFn {
        &self.members[i]
    }

    pub fn members(&self) -> &[PiecewiseFn] {
        &self.members
    }

    /// The vector whose L∞ span distances drive the greedy: `1/σ` for
    /// diffusivities, `ρ` itself for densities.
    pub fn surrogate_vector(&self, i: usize) -> Vec<f64> {
        match (&self.kind, &self.generator) {
            (FamilyKind::Diffusivity, Generator::AffineReciprocal { base, modes }) => {
                affine_combination(base, modes, &self.points[i])
            }
            (FamilyKind::Diffusivity, _) => self.members[i]
                .values()
                .iter()
                .map(|v| 1.0 / v)
                .collect(),
            (FamilyKind::Density, _) => self.members[i].values().to_vec(),
        }
    }

    /// Coefficient at an arbitrary parameter in the declared domain.
    pub fn sample(&self, mu: &[f64]) -> Result<PiecewiseFn> {
        if let Some(i) = self.points.iter().position(|p| p.as_slice() == mu) {
            return Ok(self.members[i].clone());
        }
        self.generate(mu, None)
    }

    fn generate(&self, mu: &[f64], index: Option<usize>) -> Result<PiecewiseFn> {
        if mu.len() != self.points[0].len() {
            return Err(Error::UnknownParameter(mu.to_vec()));
        }
        match &self.domain {
            ParamDomain::Box { lower, upper } => {
                let inside = mu
                    .iter()
                    .zip(lower.iter().zip(upper))
                    .all(|(x, (lo, hi))| *x >= *lo && *x <= *hi);
                if !inside {
                    return Err(Error::UnknownParameter(mu.to_vec()));
                }
            }
            ParamDomain::Listed => {
                if index.is_none() {
                    return Err(Error::UnknownParameter(mu.to_vec()));
                }
            }
        }
        let values = match &self.generator {
            Generator::AffineReciprocal { base, modes } => {
                let m = PiecewiseFn::new(self.grid, affine_combination(base, modes, mu))?;
                m.reciprocal()?.into_values()
            }
            Generator::Affine { base, modes } => affine_combination(base, modes, mu),
            Generator::Tabulated { rows } => rows[index.expect("listed domain")].clone(),
        };
        let f = PiecewiseFn::new(self.grid, values)?;
        f.check_bounds(self.bounds.0, self.bounds.1)?;
        Ok(f)
    }

    /// Writes the training members as `mu_1,...,mu_d,cell_0,...,cell_{M-1}`
    /// with 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let header: Vec<String> = (1..=self.param_dim())
            .map(|j| format!("mu_{j}"))
            .chain((0..self.grid.cell_count()).map(|k| format!("cell_{k}")))
            .collect();
        out.push_str(&header.join(","));
        out.push('\n');
        for (p, m) in self.points.iter().zip(&self.members) {
            let row: Vec<String> = p.iter().chain(m.values()).map(|v| fmt17(*v)).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    /// Reads a tabulated family written by [`ParametricFamily::to_csv`].
    pub fn from_csv(
        path: &Path,
        kind: FamilyKind,
        grid: Grid,
        bounds: (f64, f64),
    ) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let (points, rows) = parse_tabulated(&text, grid.cell_count()).map_err(|message| {
            Error::Parse {
                path: path.to_path_buf(),
                message,
            }
        })?;
        Self::tabulated(kind, grid, points, rows, bounds)
    }
}

type Table = (Vec<Vec<f64>>, Vec<Vec<f64>>);

fn parse_tabulated(text: &str, cells: usize) -> std::result::Result<Table, String> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header: Vec<&str> = lines
        .next()
        .ok_or("empty file")?
        .split(',')
        .map(str::trim)
        .collect();
    let d = header.iter().take_while(|h| h.starts_with("mu_")).count();
    if d == 0 {
        return Err("header must start with mu_1".into());
    }
    for (j, h) in header[..d].iter().enumerate() {
        if *h != format!("mu_{}", j + 1) {
            return Err(format!("unexpected column {h:?}"));
        }
    }
    for (k, h) in header[d..].iter().enumerate() {
        if *h != format!("cell_{k}") {
            return Err(format!("unexpected column {h:?}"));
        }
    }
    if header.len() - d != cells {
        return Err(format!(
            "{} cell columns for a grid of {cells} cells",
            header.len() - d
        ));
    }
    let mut points = Vec::new();
    let mut rows = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let vals = line
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| format!("line {}: {e}", lineno + 2))?;
        if vals.len() != header.len() {
            return Err(format!("line {}: wrong column count", lineno + 2));
        }
        points.push(vals[..d].to_vec());
        rows.push(vals[d..].to_vec());
    }
    Ok((points, rows))
}

fn affine_combination(base: &[f64], modes: &[Vec<f64>], mu: &[f64]) -> Vec<f64> {
    let mut out = base.to_vec();
    for (mode, &c) in modes.iter().zip(mu) {
        for (o, v) in out.iter_mut().zip(mode) {
            *o += c * v;
        }
    }
    out
}

fn bounding_box(points: &[Vec<f64>]) -> Result<ParamDomain> {
    let first = points.first().ok_or(Error::EmptyFamily)?;
    let mut lower = first.clone();
    let mut upper = first.clone();
    for p in points {
        for (j, &x) in p.iter().enumerate().take(lower.len()) {
            lower[j] = lower[j].min(x);
            upper[j] = upper[j].max(x);
        }
    }
    Ok(ParamDomain::Box { lower, upper })
}

/// Tensor-product grid with `counts[j]` equispaced points on `[lower[j], upper[j]]`,
/// first coordinate varying slowest.
pub fn tensor_grid(lower: &[f64], upper: &[f64], counts: &[usize]) -> Result<Vec<Vec<f64>>> {
    if lower.len() != upper.len() || lower.len() != counts.len() || lower.is_empty() {
        return Err(Error::InvalidInput(
            "tensor grid needs matching nonempty lower/upper/counts".into(),
        ));
    }
    if counts.iter().any(|&c| c == 0) {
        return Err(Error::EmptyFamily);
    }
    let axes: Vec<Vec<f64>> = lower
        .iter()
        .zip(upper)
        .zip(counts)
        .map(|((&lo, &hi), &c)| {
            if c == 1 {
                vec![lo]
            } else {
                (0..c)
                    .map(|i| lo + (hi - lo) * i as f64 / (c - 1) as f64)
                    .collect()
            }
        })
        .collect();
    let mut points = vec![Vec::new()];
    for axis in &axes {
        points = points
            .into_iter()
            .flat_map(|p| {
                axis.iter().map(move |&x| {
                    let mut q = p.clone();
                    q.push(x);
                    q
                })
            })
            .collect();
    }
    Ok(points)
}

/// Float with 17 significant digits.
pub fn fmt17(v: f64) -> String {
    let mut s = String::new();
    write!(s, "{v:.16e}").unwrap();
    s
}
