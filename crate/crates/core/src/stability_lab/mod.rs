//! Finite-element checks of the multi-dimensional resolvent theory.
//!
//! Operators are discretized with continuous P1 elements on uniform meshes of
//! the unit interval or square and coefficients constant per element, so the
//! Galerkin algebra (`A_σ − A_σ̃ = A_σ(R_σ̃ − R_σ)A_σ̃`, energy estimates,
//! `R_ρ = R M_ρ`) holds exactly at the discrete level. The `H⁻¹ → H¹₀`
//! operator norm is measured through the `σ ≡ 1` stiffness `K` as Riesz map:
//! `‖u‖²_{H¹₀} = uᵀKu`, `‖f‖²_{H⁻¹} = fᵀK⁻¹f`.

mod density;
mod mesh;
pub mod power;
pub mod sparse;

pub use density::{
    density_identity_residual, density_sandwich_check, density_span_check, multiplier_norm,
    multiplier_ratios, DensityOperator, DensitySandwichReport, DensitySpanReport, DENSITY_TOL,
};
pub use mesh::Mesh;
pub use power::{PowerEstimate, PowerOptions};
pub use sparse::{BandCholesky, CsrMatrix};

use serde::{Deserialize, Serialize};

use crate::coeff_space::PiecewiseFn;
use crate::error::{Error, Result};
use crate::rng::SeededRng;

use sparse::{dot, norm2};

/// Stiffness of `−div(σ∇·)` over interior nodes, its factorization, and the
/// Riesz map of the same mesh.
#[derive(Clone, Debug)]
pub struct DiscreteOperator {
    dim: usize,
    subdivisions: usize,
    stiffness: CsrMatrix,
    factor: BandCholesky,
    riesz: CsrMatrix,
}

impl DiscreteOperator {
    pub fn stiffness(&self) -> &CsrMatrix {
        &self.stiffness
    }

    pub fn riesz(&self) -> &CsrMatrix {
        &self.riesz
    }

    pub fn dim(&self) -> usize {
        self.stiffness.dim()
    }

    /// `A_σ⁻¹ b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        self.factor.solve(b)
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.stiffness.mul_vec(x)
    }

    fn same_mesh(&self, other: &Self) -> Result<()> {
        if self.dim != other.dim || self.subdivisions != other.subdivisions {
            return Err(Error::GridMismatch(
                "operators are assembled on different meshes".into(),
            ));
        }
        Ok(())
    }
}

/// Assembles `A_σ`. Fails if `σ` does not refine to the mesh or is not positive.
pub fn assemble(sigma: &PiecewiseFn, mesh: &Mesh) -> Result<DiscreteOperator> {
    let cells = mesh.cell_values(sigma)?;
    if let Some((cell, &value)) = cells.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
        return Err(Error::NonPositiveCoefficient { cell, value });
    }
    let stiffness = mesh.stiffness(&cells);
    let factor = BandCholesky::factor(&stiffness)?;
    Ok(DiscreteOperator {
        dim: mesh.dim(),
        subdivisions: mesh.subdivisions(),
        stiffness,
        factor,
        riesz: mesh.riesz(),
    })
}

/// `sup_f ‖(A_σ⁻¹ − A_σ̃⁻¹) f‖_{H¹₀} / ‖f‖_{H⁻¹}`: the largest eigenvalue in
/// magnitude of `(A_σ⁻¹ − A_σ̃⁻¹)K`, which is self-adjoint in the `K` inner
/// product.
pub fn riesz_opnorm(
    op_a: &DiscreteOperator,
    op_b: &DiscreteOperator,
    opts: &PowerOptions,
) -> Result<PowerEstimate> {
    op_a.same_mesh(op_b)?;
    let k = &op_a.riesz;
    power::operator_norm(
        k.dim(),
        |x| {
            let kx = k.mul_vec(x);
            let ya = op_a.solve(&kx);
            let yb = op_b.solve(&kx);
            ya.iter().zip(&yb).map(|(a, b)| a - b).collect()
        },
        |x, y| k.inner(x, y),
        opts,
    )
}

/// Both sides of the two-sided Lipschitz bound on one mesh.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Theorem1Report {
    pub h: f64,
    pub sigma0: f64,
    pub sigma1: f64,
    /// `‖σ − σ̃‖_∞`.
    pub d_inf: f64,
    /// Discrete `‖R_σ − R_σ̃‖_{−1,1}`.
    pub d_r: f64,
    pub power_iterations: usize,
    /// `σ₀² d_R / d_∞`; `None` when `d_∞ = 0`.
    pub lower_ratio: Option<f64>,
    /// `d_∞ / (σ₁² d_R)`; `None` when `d_R = 0`.
    pub upper_ratio: Option<f64>,
    pub lower_tol: f64,
    pub upper_slack: f64,
    pub lower_pass: bool,
    pub upper_pass: bool,
}

impl Theorem1Report {
    pub fn passed(&self) -> bool {
        self.lower_pass && self.upper_pass
    }

    /// `max(0, d_∞ / (σ₁² d_R) − 1)`: how far the upper bound is from holding
    /// without slack.
    pub fn upper_deficit(&self) -> f64 {
        self.upper_ratio.map_or(0.0, |r| (r - 1.0).max(0.0))
    }
}

pub const THEOREM1_LOWER_TOL: f64 = 1e-8;
pub const THEOREM1_UPPER_SLACK: f64 = 1.1;

/// Checks `σ₀² d_R ≤ d_∞ (1 + 1e−8)` and `d_∞ ≤ 1.1 σ₁² d_R`.
pub fn theorem1_check(
    sigma: &PiecewiseFn,
    sigma_tilde: &PiecewiseFn,
    bounds: (f64, f64),
    mesh: &Mesh,
    opts: &PowerOptions,
) -> Result<Theorem1Report> {
    let (sigma0, sigma1) = bounds;
    sigma.check_diffusivity(sigma0, sigma1)?;
    sigma_tilde.check_diffusivity(sigma0, sigma1)?;
    let d_inf = sigma.sub(sigma_tilde)?.linf_norm();
    let a = assemble(sigma, mesh)?;
    let b = assemble(sigma_tilde, mesh)?;
    let est = riesz_opnorm(&a, &b, opts)?;
    let d_r = est.value;
    let lower_pass = sigma0 * sigma0 * d_r <= d_inf * (1.0 + THEOREM1_LOWER_TOL);
    let upper_pass = d_inf <= sigma1 * sigma1 * d_r * THEOREM1_UPPER_SLACK;
    Ok(Theorem1Report {
        h: mesh.h(),
        sigma0,
        sigma1,
        d_inf,
        d_r,
        power_iterations: est.iterations,
        lower_ratio: (d_inf > 0.0).then(|| sigma0 * sigma0 * d_r / d_inf),
        upper_ratio: (d_r > 0.0).then(|| d_inf / (sigma1 * sigma1 * d_r)),
        lower_tol: THEOREM1_LOWER_TOL,
        upper_slack: THEOREM1_UPPER_SLACK,
        lower_pass,
        upper_pass,
    })
}

/// Relative residual of `(A_σ − A_σ̃)x = A_σ(A_σ̃⁻¹ − A_σ⁻¹)A_σ̃ x` over
/// `count` seeded random vectors:
/// `sqrt(Σ‖lhs − rhs‖²) / sqrt(Σ ‖A_σ x‖² + ‖A_σ̃ x‖²)`.
pub fn operator_identity_residual(
    op_a: &DiscreteOperator,
    op_b: &DiscreteOperator,
    count: usize,
    seed: u64,
) -> Result<f64> {
    op_a.same_mesh(op_b)?;
    let mut rng = SeededRng::new(seed);
    let n = op_a.dim();
    let mut num = 0.0;
    let mut den = 0.0;
    for _ in 0..count {
        let x = rng.uniform_vec(n, -1.0, 1.0);
        let ax = op_a.apply(&x);
        let bx = op_b.apply(&x);
        let lhs: Vec<f64> = ax.iter().zip(&bx).map(|(a, b)| a - b).collect();
        let inner: Vec<f64> = op_b
            .solve(&bx)
            .iter()
            .zip(op_a.solve(&bx))
            .map(|(u, v)| u - v)
            .collect();
        let rhs = op_a.apply(&inner);
        num += lhs
            .iter()
            .zip(&rhs)
            .map(|(l, r)| (l - r) * (l - r))
            .sum::<f64>();
        den += dot(&ax, &ax) + dot(&bx, &bx);
    }
    if den == 0.0 {
        return Ok(0.0);
    }
    Ok((num / den).sqrt())
}

/// Nodal interpolant of the cone `max(ε − |x − x₀|, 0)`, normalized to unit
/// discrete `H¹₀` norm. Needs `ε ≥ 4h` and the ball inside the domain.
pub fn lemma22_probe(center: &[f64], eps: f64, mesh: &Mesh) -> Result<Vec<f64>> {
    if center.len() != mesh.dim() {
        return Err(Error::InvalidInput(format!(
            "{}D center on a {}D mesh",
            center.len(),
            mesh.dim()
        )));
    }
    if !(eps > 0.0) || center.iter().any(|&c| c - eps < 0.0 || c + eps > 1.0) {
        return Err(Error::ProbeOutOfDomain);
    }
    let h = mesh.h();
    if eps < 4.0 * h * (1.0 - 1e-12) {
        return Err(Error::ProbeUnresolved {
            eps,
            h,
            min_cells: 4,
        });
    }
    let mut u: Vec<f64> = mesh
        .interior_points()
        .iter()
        .map(|p| {
            let r = p[..mesh.dim()]
                .iter()
                .zip(center)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            (eps - r).max(0.0)
        })
        .collect();
    let norm = mesh.riesz().inner(&u, &u).sqrt();
    if norm == 0.0 {
        return Err(Error::ProbeUnresolved {
            eps,
            h,
            min_cells: 4,
        });
    }
    u.iter_mut().for_each(|v| *v /= norm);
    Ok(u)
}

/// `uᵀ A_σ u`.
pub fn probe_energy(op: &DiscreteOperator, u: &[f64]) -> f64 {
    op.stiffness.inner(u, u)
}

pub fn relative_diff(x: &[f64], y: &[f64]) -> f64 {
    let d: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
    let scale = norm2(x).max(norm2(y));
    if scale == 0.0 {
        0.0
    } else {
        norm2(&d) / scale
    }
}
