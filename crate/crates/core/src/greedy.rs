//! Source-independent weak greedy selection of resolvent snapshots.
//!
//! Resolvent distances are replaced by exact L∞ surrogates on coefficients:
//! reciprocals `1/σ(μ)` for 1D diffusivities, the densities `ρ(μ)` themselves
//! for density families. No PDE is solved while selecting snapshots, so the
//! selection does not depend on any right-hand side.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coeff_space::{linf, FamilyKind, Grid, ParametricFamily, PiecewiseFn};
use crate::error::{Error, Result};
use crate::minimax::{self, MinimaxProblem};
use crate::resolvent1d::{apply_resolvent, span_distance_star, Solution1D, SourceFn};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanMode {
    /// Scan the whole training set and take the exact argmax.
    #[default]
    Exact,
    /// Heuristic: accept the first candidate whose distance reaches
    /// `γ · (previous decay value)`, falling back to the full argmax. Decay
    /// entries are then maxima over the scanned prefix only.
    Weak,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GreedyConfig {
    pub gamma: f64,
    pub n_max: usize,
    pub eps_stop: f64,
    pub scan: ScanMode,
}

impl Default for GreedyConfig {
    fn default() -> Self {
        Self {
            gamma: 1.0,
            n_max: 20,
            eps_stop: 0.0,
            scan: ScanMode::Exact,
        }
    }
}

impl GreedyConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::InvalidInput(format!(
                "gamma must lie in (0, 1], got {}",
                self.gamma
            )));
        }
        if self.n_max == 0 {
            return Err(Error::InvalidInput("n_max must be positive".into()));
        }
        if !(self.eps_stop >= 0.0) {
            return Err(Error::InvalidInput("eps_stop must be nonnegative".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Tolerance,
    MaxIterations,
    Exhausted,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GreedyResult {
    pub kind: FamilyKind,
    pub grid: Grid,
    pub snapshot_indices: Vec<usize>,
    pub snapshots: Vec<Vec<f64>>,
    /// Coefficients of the snapshots (σ for diffusivities, ρ for densities).
    pub basis: Vec<PiecewiseFn>,
    /// `decay[k]`: max surrogate distance of the training set to the span of
    /// the first `k` snapshots; `decay[0]` is the max surrogate norm.
    pub decay: Vec<f64>,
    /// 1 in exact mode; the configured γ in weak mode.
    pub gamma: f64,
    pub scan: ScanMode,
    pub stop_reason: StopReason,
}

impl GreedyResult {
    pub fn decay_csv(&self) -> String {
        let mut out = String::from("n,max_surrogate_distance\n");
        for (n, d) in self.decay.iter().enumerate() {
            out.push_str(&format!("{n},{}\n", crate::coeff_space::fmt17(*d)));
        }
        out
    }
}

/// L∞ distance of `target` to the span of `basis`; the norm when the basis is
/// empty.
pub fn surrogate_distance(target: &[f64], basis: &[Vec<f64>]) -> Result<f64> {
    if basis.is_empty() {
        return Ok(linf(target));
    }
    let problem = MinimaxProblem::from_columns(basis, target.to_vec())?;
    Ok(minimax::solve(&problem)?.deviation)
}

/// Index of the training point with the largest surrogate norm, lowest
/// index on ties.
pub fn select_first(fam: &ParametricFamily) -> Result<usize> {
    if fam.is_empty() {
        return Err(Error::EmptyFamily);
    }
    let norms: Vec<f64> = (0..fam.len()).map(|i| linf(&fam.surrogate_vector(i))).collect();
    Ok(argmax(&norms).expect("nonempty"))
}

fn argmax(values: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &v) in values.iter().enumerate() {
        match best {
            Some(b) if values[b] >= v => {}
            _ => best = Some(i),
        }
    }
    best
}

/// Distances below this fraction of `decay[0]` count as zero.
pub const ROUNDOFF_FLOOR: f64 = 1e-12;

pub fn greedy_run(fam: &ParametricFamily, cfg: &GreedyConfig) -> Result<GreedyResult> {
    cfg.validate()?;
    if fam.is_empty() {
        return Err(Error::EmptyFamily);
    }
    let vectors: Vec<Vec<f64>> = (0..fam.len()).map(|i| fam.surrogate_vector(i)).collect();
    let mut selected = vec![false; fam.len()];
    let mut basis_vectors: Vec<Vec<f64>> = Vec::new();
    let mut indices = Vec::new();
    let mut decay = Vec::new();

    let stop_reason = loop {
        let candidates: Vec<usize> = (0..fam.len()).filter(|&i| !selected[i]).collect();
        if candidates.is_empty() {
            decay.push(0.0);
            break StopReason::Exhausted;
        }
        let threshold = match (cfg.scan, decay.last()) {
            (ScanMode::Weak, Some(&prev)) => Some(cfg.gamma * prev),
            _ => None,
        };
        let (pick, max_dist) = scan(&candidates, &vectors, &basis_vectors, threshold)?;
        decay.push(max_dist);
        if max_dist <= cfg.eps_stop.max(ROUNDOFF_FLOOR * decay[0]) {
            break StopReason::Tolerance;
        }
        if indices.len() == cfg.n_max {
            break StopReason::MaxIterations;
        }
        selected[pick] = true;
        indices.push(pick);
        basis_vectors.push(vectors[pick].clone());
    };

    Ok(GreedyResult {
        kind: fam.kind(),
        grid: *fam.grid(),
        snapshots: indices.iter().map(|&i| fam.points()[i].clone()).collect(),
        basis: indices.iter().map(|&i| fam.member(i).clone()).collect(),
        snapshot_indices: indices,
        decay,
        gamma: match cfg.scan {
            ScanMode::Exact => 1.0,
            ScanMode::Weak => cfg.gamma,
        },
        scan: cfg.scan,
        stop_reason,
    })
}

/// Returns the chosen candidate and the max distance over the scanned set.
fn scan(
    candidates: &[usize],
    vectors: &[Vec<f64>],
    basis: &[Vec<f64>],
    threshold: Option<f64>,
) -> Result<(usize, f64)> {
    match threshold {
        None => {
            let dists = candidates
                .par_iter()
                .map(|&i| surrogate_distance(&vectors[i], basis))
                .collect::<Result<Vec<_>>>()?;
            let k = argmax(&dists).expect("nonempty");
            Ok((candidates[k], dists[k]))
        }
        Some(thr) => {
            let mut dists = Vec::with_capacity(candidates.len());
            for &i in candidates {
                let d = surrogate_distance(&vectors[i], basis)?;
                dists.push(d);
                if d >= thr && d > 0.0 {
                    let max = dists.iter().copied().fold(0.0, f64::max);
                    return Ok((i, max));
                }
            }
            let k = argmax(&dists).expect("nonempty");
            Ok((candidates[k], dists[k]))
        }
    }
}

/// Recomputes `decay[k]` from the recorded snapshots.
pub fn replay_decay(fam: &ParametricFamily, result: &GreedyResult) -> Result<Vec<f64>> {
    let vectors: Vec<Vec<f64>> = (0..fam.len()).map(|i| fam.surrogate_vector(i)).collect();
    let mut out = Vec::with_capacity(result.decay.len());
    for k in 0..result.decay.len() {
        let chosen = &result.snapshot_indices[..k.min(result.snapshot_indices.len())];
        let basis: Vec<Vec<f64>> = chosen.iter().map(|&i| vectors[i].clone()).collect();
        let mut max: f64 = 0.0;
        for (i, v) in vectors.iter().enumerate() {
            if !chosen.contains(&i) {
                max = max.max(surrogate_distance(v, &basis)?);
            }
        }
        out.push(max);
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OnlineApproximation {
    pub approx: Solution1D,
    pub coeffs: Vec<f64>,
    pub surrogate_err: f64,
}

/// Approximates `R_τ f` by `Σ a_i R_{σ_i} f` with `a` minimizing
/// `‖Σ a_i/σ_i − 1/τ‖_∞`.
pub fn online_approximate(
    result: &GreedyResult,
    tau: &PiecewiseFn,
    f: &SourceFn,
) -> Result<OnlineApproximation> {
    if result.kind != FamilyKind::Diffusivity {
        return Err(Error::InvalidInput(
            "online approximation needs a diffusivity basis".into(),
        ));
    }
    if result.basis.is_empty() {
        return Err(Error::EmptyBasis);
    }
    let span = span_distance_star(tau, &result.basis)?;
    let parts = result
        .basis
        .iter()
        .map(|s| apply_resolvent(s, f))
        .collect::<Result<Vec<_>>>()?;
    let approx = Solution1D::combine(&parts, &span.coeffs)?;
    Ok(OnlineApproximation {
        approx,
        coeffs: span.coeffs,
        surrogate_err: span.distance,
    })
}

/// Measured derivative error of an online approximation against the direct
/// solve, and its cellwise prediction `|Σ aᵢ/σᵢ − 1/τ| · |F|`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OnlineErrorReport {
    pub coeffs: Vec<f64>,
    pub surrogate_err: f64,
    /// `max_x |(v_approx − v_exact)'(x)|`.
    pub max_derivative_error: f64,
    /// `max_x |F(x)|`.
    pub max_primitive: f64,
    /// Largest gap between measured and predicted error over all cell ends.
    pub identity_residual: f64,
}

impl OnlineErrorReport {
    /// `max_derivative_error ≤ surrogate_err · max |F|` up to `tol` absolute.
    pub fn bound_holds(&self, tol: f64) -> bool {
        self.max_derivative_error <= self.surrogate_err * self.max_primitive + tol
    }
}

/// Online approximation, direct solve and the error comparison between them.
pub fn online_error_report(
    result: &GreedyResult,
    tau: &PiecewiseFn,
    f: &SourceFn,
) -> Result<(OnlineApproximation, Solution1D, OnlineErrorReport)> {
    let online = online_approximate(result, tau, f)?;
    let direct = apply_resolvent(tau, f)?;
    let coarse = tau.grid().as_line()?;
    let r = f.grid().refinement_of(&coarse).ok_or_else(|| {
        Error::GridMismatch("source grid does not refine the coefficient grid".into())
    })?;
    let gap: Vec<f64> = (0..coarse.cells())
        .map(|k| {
            let mix: f64 = result
                .basis
                .iter()
                .zip(&online.coeffs)
                .map(|(s, a)| a / s.values()[k])
                .sum();
            (mix - 1.0 / tau.values()[k]).abs()
        })
        .collect();
    let primitive = f.primitive();
    let da = online.approx.derivative();
    let de = direct.derivative();
    let mut max_err: f64 = 0.0;
    let mut residual: f64 = 0.0;
    for (k, (a, e)) in da.ends().iter().zip(de.ends()).enumerate() {
        for side in 0..2 {
            let measured = (a[side] - e[side]).abs();
            let predicted = gap[k / r] * primitive[k + side].abs();
            max_err = max_err.max(measured);
            residual = residual.max((measured - predicted).abs());
        }
    }
    let report = OnlineErrorReport {
        coeffs: online.coeffs.clone(),
        surrogate_err: online.surrogate_err,
        max_derivative_error: max_err,
        max_primitive: linf(&primitive),
        identity_residual: residual,
    };
    Ok((online, direct, report))
}
