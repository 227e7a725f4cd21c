//! Config files: one JSON object per subcommand, unknown keys rejected.
//!
//! Coefficients, nodal densities and sources are given either explicitly,
//! as constants, or as seeded uniform draws. Random draws are taken from a
//! single SplitMix64 stream in the order they appear in the file.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::coeff_space::{tensor_grid, FamilyKind, Generator, Grid, ParamDomain, ParametricFamily, PiecewiseFn};
use crate::greedy::GreedyConfig;
use crate::resolvent1d::SourceFn;
use crate::rng::SeededRng;
use crate::stability_lab::PowerOptions;

use super::CliError;

/// Reads and parses a config; errors name the offending key path.
pub fn load<T: DeserializeOwned>(path: &Path) -> Result<(T, Vec<u8>), CliError> {
    let bytes = std::fs::read(path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let value = parse(&bytes).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    Ok((value, bytes))
}

pub fn parse<T: DeserializeOwned>(bytes: &[u8]) -> Result<T, String> {
    let mut de = serde_json::Deserializer::from_slice(bytes);
    let value: T = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        if path == "." {
            e.into_inner().to_string()
        } else {
            format!("at {path}: {}", e.into_inner())
        }
    })?;
    de.end().map_err(|e| e.to_string())?;
    Ok(value)
}

/// Resolves `path` against the directory of the config file.
pub fn resolve(config_path: &Path, path: &Path) -> PathBuf {
    if path.is_absolute() {
        path.to_path_buf()
    } else {
        config_path
            .parent()
            .unwrap_or_else(|| Path::new("."))
            .join(path)
    }
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GreedyRunConfig {
    pub family: FamilySpec,
    #[serde(default)]
    pub greedy: GreedyConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilySpec {
    pub grid: Grid,
    /// Admissible coefficient range `[lower, upper]`.
    pub bounds: [f64; 2],
    pub generator: GeneratorSpec,
    /// Training parameters; not used by table generators.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parameters: Option<ParameterSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum GeneratorSpec {
    /// `1/σ = base + Σ μ_j modes_j`.
    AffineReciprocal { base: Vec<f64>, modes: Vec<Vec<f64>> },
    /// `c = base + Σ μ_j modes_j`.
    Affine { base: Vec<f64>, modes: Vec<Vec<f64>> },
    /// Inline table: one parameter point and one row of cell values each.
    Table {
        points: Vec<Vec<f64>>,
        rows: Vec<Vec<f64>>,
    },
    /// CSV with columns `mu_1,...,mu_d,cell_0,...`.
    Csv { path: PathBuf },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ParameterSpec {
    /// Equispaced tensor grid, first coordinate varying slowest.
    Tensor {
        lower: Vec<f64>,
        upper: Vec<f64>,
        counts: Vec<usize>,
    },
    List { points: Vec<Vec<f64>> },
    /// `count` uniform draws from the box.
    Random {
        lower: Vec<f64>,
        upper: Vec<f64>,
        count: usize,
    },
}

impl ParameterSpec {
    fn resolve(&self, rng: &mut SeededRng) -> Result<Vec<Vec<f64>>, CliError> {
        match self {
            ParameterSpec::Tensor {
                lower,
                upper,
                counts,
            } => Ok(tensor_grid(lower, upper, counts)?),
            ParameterSpec::List { points } => Ok(points.clone()),
            ParameterSpec::Random {
                lower,
                upper,
                count,
            } => {
                if lower.len() != upper.len() || lower.is_empty() {
                    return Err(invalid("parameters.lower and parameters.upper must match"));
                }
                if lower.iter().zip(upper).any(|(a, b)| !(a <= b)) {
                    return Err(invalid("parameters.lower must not exceed parameters.upper"));
                }
                Ok((0..*count)
                    .map(|_| {
                        lower
                            .iter()
                            .zip(upper)
                            .map(|(&a, &b)| rng.uniform(a, b))
                            .collect()
                    })
                    .collect())
            }
        }
    }
}

impl FamilySpec {
    pub fn build(
        &self,
        kind: FamilyKind,
        config_path: &Path,
        rng: &mut SeededRng,
    ) -> Result<ParametricFamily, CliError> {
        let bounds = (self.bounds[0], self.bounds[1]);
        let points = |rng: &mut SeededRng| -> Result<Vec<Vec<f64>>, CliError> {
            let spec = self
                .parameters
                .as_ref()
                .ok_or_else(|| invalid("family.parameters is required for affine generators"))?;
            let points = spec.resolve(rng)?;
            if points.is_empty() {
                return Err(invalid("family.parameters is empty"));
            }
            Ok(points)
        };
        let affine = |generator: Generator, rng: &mut SeededRng| -> Result<ParametricFamily, CliError> {
            let points = points(rng)?;
            let domain = match &self.parameters {
                Some(ParameterSpec::Tensor { lower, upper, .. })
                | Some(ParameterSpec::Random { lower, upper, .. }) => ParamDomain::Box {
                    lower: lower.clone(),
                    upper: upper.clone(),
                },
                _ => bounding_box(&points),
            };
            Ok(ParametricFamily::new(kind, self.grid, generator, domain, bounds, points)?)
        };
        match &self.generator {
            GeneratorSpec::AffineReciprocal { base, modes } => {
                if kind != FamilyKind::Diffusivity {
                    return Err(invalid(
                        "family.generator: affine_reciprocal only applies to diffusivities",
                    ));
                }
                affine(
                    Generator::AffineReciprocal {
                        base: base.clone(),
                        modes: modes.clone(),
                    },
                    rng,
                )
            }
            GeneratorSpec::Affine { base, modes } => affine(
                Generator::Affine {
                    base: base.clone(),
                    modes: modes.clone(),
                },
                rng,
            ),
            GeneratorSpec::Table { points, rows } => {
                self.no_parameters()?;
                Ok(ParametricFamily::tabulated(
                    kind,
                    self.grid,
                    points.clone(),
                    rows.clone(),
                    bounds,
                )?)
            }
            GeneratorSpec::Csv { path } => {
                self.no_parameters()?;
                let path = resolve(config_path, path);
                Ok(ParametricFamily::from_csv(&path, kind, self.grid, bounds)?)
            }
        }
    }

    fn no_parameters(&self) -> Result<(), CliError> {
        if self.parameters.is_some() {
            return Err(invalid(
                "family.parameters must be omitted for table generators",
            ));
        }
        Ok(())
    }
}

fn bounding_box(points: &[Vec<f64>]) -> ParamDomain {
    let mut lower = points[0].clone();
    let mut upper = points[0].clone();
    for p in points {
        for (j, &x) in p.iter().enumerate().take(lower.len()) {
            lower[j] = lower[j].min(x);
            upper[j] = upper[j].max(x);
        }
    }
    ParamDomain::Box { lower, upper }
}

/// A piecewise-constant coefficient on a grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum CoeffSpec {
    Values { grid: Grid, values: Vec<f64> },
    Constant { grid: Grid, value: f64 },
    Random { grid: Grid, lower: f64, upper: f64 },
}

impl CoeffSpec {
    pub fn resolve(&self, rng: &mut SeededRng) -> Result<PiecewiseFn, CliError> {
        Ok(match self {
            CoeffSpec::Values { grid, values } => PiecewiseFn::new(*grid, values.clone())?,
            CoeffSpec::Constant { grid, value } => PiecewiseFn::constant(*grid, *value)?,
            CoeffSpec::Random { grid, lower, upper } => {
                check_range(*lower, *upper)?;
                PiecewiseFn::new(*grid, rng.uniform_vec(grid.cell_count(), *lower, *upper))?
            }
        })
    }
}

fn check_range(lower: f64, upper: f64) -> Result<(), CliError> {
    if !(lower.is_finite() && upper.is_finite() && lower <= upper) {
        return Err(invalid(format!("invalid random range [{lower}, {upper}]")));
    }
    Ok(())
}

/// Values at the interior nodes of a mesh.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum NodalSpec {
    Values { values: Vec<f64> },
    Constant { value: f64 },
    Random { lower: f64, upper: f64 },
}

impl NodalSpec {
    pub fn resolve(&self, n: usize, rng: &mut SeededRng) -> Result<Vec<f64>, CliError> {
        match self {
            NodalSpec::Values { values } => {
                if values.len() != n {
                    return Err(invalid(format!(
                        "{} nodal values for {n} interior nodes",
                        values.len()
                    )));
                }
                Ok(values.clone())
            }
            NodalSpec::Constant { value } => Ok(vec![*value; n]),
            NodalSpec::Random { lower, upper } => {
                check_range(*lower, *upper)?;
                Ok(rng.uniform_vec(n, *lower, *upper))
            }
        }
    }
}

/// A 1D source, piecewise constant on the coefficient grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum SourceSpec {
    Values { values: Vec<f64> },
    Constant { value: f64 },
    Random { lower: f64, upper: f64 },
}

impl SourceSpec {
    pub fn resolve(&self, grid: &Grid, rng: &mut SeededRng) -> Result<SourceFn, CliError> {
        let line = grid.as_line()?;
        Ok(match self {
            SourceSpec::Values { values } => SourceFn::new(line, values.clone())?,
            SourceSpec::Constant { value } => SourceFn::constant(line, *value)?,
            SourceSpec::Random { lower, upper } => {
                check_range(*lower, *upper)?;
                SourceFn::new(line, rng.uniform_vec(line.cells(), *lower, *upper))?
            }
        })
    }
}

fn one() -> usize {
    1
}

fn default_vectors() -> usize {
    20
}

fn default_refine() -> usize {
    4
}

/// A coefficient pair, drawn `repeat` times when random.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairSpec {
    pub sigma: CoeffSpec,
    pub sigma_tilde: CoeffSpec,
    #[serde(default = "one")]
    pub repeat: usize,
}

pub fn resolve_pairs(
    pairs: &[PairSpec],
    rng: &mut SeededRng,
) -> Result<Vec<(PiecewiseFn, PiecewiseFn)>, CliError> {
    let mut out = Vec::new();
    for p in pairs {
        for _ in 0..p.repeat {
            let a = p.sigma.resolve(rng)?;
            let b = p.sigma_tilde.resolve(rng)?;
            out.push((a, b));
        }
    }
    if out.is_empty() {
        return Err(invalid("pairs is empty"));
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Theorem1Config {
    pub pairs: Vec<PairSpec>,
    /// `[σ₀, σ₁]`.
    pub bounds: [f64; 2],
    /// Mesh subdivisions per axis, coarse to fine.
    pub subdivisions: Vec<usize>,
    #[serde(default)]
    pub power: PowerOptions,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormIdentityConfig {
    /// 1D multiplier `m`.
    pub m: CoeffSpec,
    #[serde(default = "one")]
    pub repeat: usize,
    /// Probe grid refinement per coefficient cell.
    #[serde(default = "default_refine")]
    pub refine: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurrogateConfig {
    /// 1D diffusivity pairs.
    #[serde(default)]
    pub pairs: Vec<PairSpec>,
    #[serde(default = "default_refine")]
    pub refine: usize,
    /// Density span check on a finite-element mesh.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub density: Option<DensitySpanSpec>,
    #[serde(default)]
    pub power: PowerOptions,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensitySpanSpec {
    pub dim: usize,
    pub subdivisions: usize,
    pub target: NodalSpec,
    pub basis: Vec<NodalSpec>,
    #[serde(default = "one")]
    pub repeat: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensityConfig {
    pub dim: usize,
    pub subdivisions: usize,
    pub rho: NodalSpec,
    #[serde(default = "one")]
    pub repeat: usize,
    /// Random vectors per identity check.
    #[serde(default = "default_vectors")]
    pub vectors: usize,
    #[serde(default)]
    pub power: PowerOptions,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorIdentityConfig {
    pub pairs: Vec<PairSpec>,
    pub subdivisions: usize,
    #[serde(default = "default_vectors")]
    pub vectors: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OnlineConfig {
    /// `greedy_result.json` of a diffusivity run.
    pub basis: PathBuf,
    pub tau: CoeffSpec,
    pub source: SourceSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MinimaxConfig {
    /// CSV of `A`: dense with a header row, or triplets `row,col,value`.
    pub matrix: PathBuf,
    /// CSV of `b`, one value per line, optional header.
    pub target: PathBuf,
    /// Also run the lattice oracle.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub brute_force: Option<BruteForceSpec>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BruteForceSpec {
    pub half_width: f64,
    pub step: f64,
}

/// Parses a matrix CSV: a `row,col,value` header selects triplets, any other
/// header a dense table.
pub fn parse_matrix_csv(text: &str) -> Result<(usize, usize, Vec<f64>), String> {
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
    let header = lines.next().ok_or("empty matrix file")?;
    let head = cols_of(header);
    if head == ["row", "col", "value"] {
        let mut entries = Vec::new();
        for (i, line) in lines.enumerate() {
            let parts = cols_of(line);
            if parts.len() != 3 {
                return Err(format!("line {}: expected row,col,value", i + 2));
            }
            let r: usize = parts[0].parse().map_err(|e| format!("line {}: {e}", i + 2))?;
            let c: usize = parts[1].parse().map_err(|e| format!("line {}: {e}", i + 2))?;
            let v: f64 = parts[2].parse().map_err(|e| format!("line {}: {e}", i + 2))?;
            entries.push((r, c, v));
        }
        let rows = entries.iter().map(|e| e.0 + 1).max().ok_or("no entries")?;
        let cols = entries.iter().map(|e| e.1 + 1).max().ok_or("no entries")?;
        let mut m = vec![0.0; rows * cols];
        for (r, c, v) in entries {
            m[r * cols + c] += v;
        }
        Ok((rows, cols, m))
    } else {
        let cols = head.len();
        let mut m = Vec::new();
        let mut rows = 0;
        for (i, line) in lines.enumerate() {
            let parts = cols_of(line);
            if parts.len() != cols {
                return Err(format!("line {}: expected {cols} columns", i + 2));
            }
            for p in parts {
                m.push(p.parse::<f64>().map_err(|e| format!("line {}: {e}", i + 2))?);
            }
            rows += 1;
        }
        Ok((rows, cols, m))
    }
}

fn cols_of(line: &str) -> Vec<&str> {
    line.split(',').map(str::trim).collect()
}

pub fn parse_vector_csv(text: &str) -> Result<Vec<f64>, String> {
    let mut out = Vec::new();
    for (i, line) in text.lines().map(str::trim).filter(|l| !l.is_empty()).enumerate() {
        match line.parse::<f64>() {
            Ok(v) => out.push(v),
            Err(_) if i == 0 => {}
            Err(e) => return Err(format!("line {}: {e}", i + 1)),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn round_trip<T: DeserializeOwned + Serialize + PartialEq + std::fmt::Debug>(text: &str) {
        let a: T = parse(text.as_bytes()).unwrap();
        let again = serde_json::to_vec(&a).unwrap();
        let b: T = parse(&again).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn configs_round_trip() {
        round_trip::<GreedyRunConfig>(
            r#"{"family": {"grid": {"dim": "line", "cells": 2}, "bounds": [0.1, 10],
                "generator": {"type": "affine_reciprocal", "base": [1, 1], "modes": [[1, 0]]},
                "parameters": {"type": "list", "points": [[0], [0.5], [1]]}},
                "greedy": {"n_max": 5}, "seed": 3}"#,
        );
        round_trip::<Theorem1Config>(
            r#"{"pairs": [{"sigma": {"type": "random", "grid": {"dim": "square", "cells_per_axis": 2},
                "lower": 1, "upper": 2}, "sigma_tilde": {"type": "constant",
                "grid": {"dim": "square", "cells_per_axis": 2}, "value": 1.5}, "repeat": 5}],
                "bounds": [1, 2], "subdivisions": [16, 32], "power": {"tol": 1e-9}}"#,
        );
        round_trip::<DensityConfig>(
            r#"{"dim": 2, "subdivisions": 8, "rho": {"type": "random", "lower": 0.5, "upper": 2}}"#,
        );
        round_trip::<OnlineConfig>(
            r#"{"basis": "out/greedy_result.json", "tau": {"type": "values",
                "grid": {"dim": "line", "cells": 2}, "values": [1, 0.5]},
                "source": {"type": "constant", "value": 1}}"#,
        );
        round_trip::<MinimaxConfig>(
            r#"{"matrix": "a.csv", "target": "b.csv", "brute_force": {"half_width": 2, "step": 0.01}}"#,
        );
    }

    #[test]
    fn unknown_keys_name_their_path() {
        let err = parse::<GreedyRunConfig>(
            br#"{"family": {"grid": {"dim": "line", "cells": 2}, "bounds": [0.1, 10],
                "generator": {"type": "affine", "base": [1, 1], "modes": [[1, 0]]},
                "parameters": {"type": "list", "points": [[0]]}},
                "greedy": {"gamma": 1, "nmax": 3}}"#,
        )
        .unwrap_err();
        assert!(err.contains("greedy"), "{err}");
        assert!(err.contains("nmax"), "{err}");
        assert!(parse::<DensityConfig>(br#"{"dim": 2, "subdivisions": 8, "rho": {"type": "constant", "value": 1}, "x": 1}"#).is_err());
    }

    #[test]
    fn matrix_formats() {
        let (r, c, m) = parse_matrix_csv("a1,a2\n1,2\n3,4\n").unwrap();
        assert_eq!((r, c), (2, 2));
        assert_eq!(m, vec![1.0, 2.0, 3.0, 4.0]);
        let (r, c, m) = parse_matrix_csv("row,col,value\n0,0,1\n1,1,2\n1,1,1\n").unwrap();
        assert_eq!((r, c), (2, 2));
        assert_eq!(m, vec![1.0, 0.0, 0.0, 3.0]);
        assert!(parse_matrix_csv("a,b\n1\n").is_err());
        assert_eq!(parse_vector_csv("b\n1\n2.5\n").unwrap(), vec![1.0, 2.5]);
        assert!(parse_vector_csv("1\nx\n").is_err());
    }
}
