//! Density-weighted resolvents `R_ρ f = R(ρ f)` with lumped mass.
//!
//! On interior nodal vectors with inner product `⟨u, v⟩_M = uᵀMv` (`M` the
//! lumped mass), the discrete Laplacian is `A = M⁻¹K`, `R = A⁻¹ = K⁻¹M` and
//! `R_ρ = K⁻¹ M diag(ρ) = R M_ρ` holds by construction. Because `M` is
//! diagonal, `‖M_ρ‖ = max |ρ|` exactly.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::minimax::{self, MinimaxProblem};
use crate::rng::SeededRng;

use super::mesh::Mesh;
use super::power::{self, PowerEstimate, PowerOptions};
use super::sparse::{BandCholesky, CsrMatrix};

#[derive(Clone, Debug)]
pub struct DensityOperator {
    riesz: CsrMatrix,
    factor: BandCholesky,
    lumped: Vec<f64>,
}

impl DensityOperator {
    pub fn new(mesh: &Mesh) -> Result<Self> {
        let riesz = mesh.riesz();
        let factor = BandCholesky::factor(&riesz)?;
        let lumped = mesh.lumped_mass();
        if lumped.iter().any(|&m| !(m > 0.0)) {
            return Err(Error::NumericalBreakdown("nonpositive lumped mass".into()));
        }
        Ok(Self {
            riesz,
            factor,
            lumped,
        })
    }

    pub fn dim(&self) -> usize {
        self.lumped.len()
    }

    pub fn lumped_mass(&self) -> &[f64] {
        &self.lumped
    }

    pub fn riesz(&self) -> &CsrMatrix {
        &self.riesz
    }

    fn check(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.dim() {
            return Err(Error::InvalidInput(format!(
                "{} nodal values for {} interior nodes",
                v.len(),
                self.dim()
            )));
        }
        Ok(())
    }

    /// `R f = K⁻¹ M f`.
    pub fn resolvent(&self, f: &[f64]) -> Result<Vec<f64>> {
        self.check(f)?;
        let mf: Vec<f64> = f.iter().zip(&self.lumped).map(|(a, m)| a * m).collect();
        Ok(self.factor.solve(&mf))
    }

    /// `R_ρ f = K⁻¹ M (ρ ⊙ f)`.
    pub fn density_apply(&self, rho: &[f64], f: &[f64]) -> Result<Vec<f64>> {
        self.check(rho)?;
        self.check(f)?;
        let rf: Vec<f64> = rho.iter().zip(f).map(|(r, v)| r * v).collect();
        self.resolvent(&rf)
    }

    /// `A u = M⁻¹ K u`.
    pub fn laplacian(&self, u: &[f64]) -> Vec<f64> {
        self.riesz
            .mul_vec(u)
            .iter()
            .zip(&self.lumped)
            .map(|(v, m)| v / m)
            .collect()
    }

    pub fn mass_inner(&self, x: &[f64], y: &[f64]) -> f64 {
        x.iter()
            .zip(y)
            .zip(&self.lumped)
            .map(|((a, b), m)| a * b * m)
            .sum()
    }

    /// `‖R‖` in the lumped `L²` norm.
    pub fn resolvent_norm(&self, opts: &PowerOptions) -> Result<PowerEstimate> {
        power::operator_norm(
            self.dim(),
            |x| self.resolvent(x).expect("sized"),
            |x, y| self.mass_inner(x, y),
            opts,
        )
    }

    /// `‖A‖` in the lumped `L²` norm.
    pub fn laplacian_norm(&self, opts: &PowerOptions) -> Result<PowerEstimate> {
        power::operator_norm(
            self.dim(),
            |x| self.laplacian(x),
            |x, y| self.mass_inner(x, y),
            opts,
        )
    }

    /// `‖R_ρ‖` in the lumped `L²` norm for any nodal `ρ` (signs allowed),
    /// via `R_ρ* R_ρ = diag(ρ) K⁻¹ M K⁻¹ M diag(ρ)`.
    pub fn density_norm(&self, rho: &[f64], opts: &PowerOptions) -> Result<PowerEstimate> {
        self.check(rho)?;
        let est = power::operator_norm(
            self.dim(),
            |x| {
                let y = self.density_apply(rho, x).expect("sized");
                let z = self.resolvent(&y).expect("sized");
                z.iter().zip(rho).map(|(a, r)| a * r).collect()
            },
            |x, y| self.mass_inner(x, y),
            opts,
        )?;
        Ok(PowerEstimate {
            value: est.value.sqrt(),
            iterations: est.iterations,
        })
    }
}

/// `‖M_ρ‖ = max |ρ|`, exact with lumped mass.
pub fn multiplier_norm(rho: &[f64]) -> f64 {
    crate::coeff_space::linf(rho)
}

/// Largest relative residual over `count` seeded random `f` of the two
/// discrete identities `R_ρ f = R(ρ ⊙ f)` and `A R_ρ f = ρ ⊙ f`, in the
/// lumped norm.
pub fn density_identity_residual(
    dop: &DensityOperator,
    rho: &[f64],
    count: usize,
    seed: u64,
) -> Result<f64> {
    dop.check(rho)?;
    let mut rng = SeededRng::new(seed);
    let rel = |x: &[f64], y: &[f64]| {
        let d: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
        let scale = dop.mass_inner(x, x).max(dop.mass_inner(y, y)).sqrt();
        if scale == 0.0 {
            0.0
        } else {
            dop.mass_inner(&d, &d).sqrt() / scale
        }
    };
    let mut worst: f64 = 0.0;
    for _ in 0..count {
        let f = rng.uniform_vec(dop.dim(), -1.0, 1.0);
        let rf: Vec<f64> = rho.iter().zip(&f).map(|(r, v)| r * v).collect();
        let u = dop.density_apply(rho, &f)?;
        worst = worst.max(rel(&u, &dop.resolvent(&rf)?));
        worst = worst.max(rel(&dop.laplacian(&u), &rf));
    }
    Ok(worst)
}

/// `‖ρ ⊙ x‖_M / ‖x‖_M` at the unit vector of the node where `|ρ|` peaks,
/// and the largest ratio over `count` seeded random `x`.
pub fn multiplier_ratios(
    dop: &DensityOperator,
    rho: &[f64],
    count: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    dop.check(rho)?;
    let ratio = |x: &[f64]| {
        let y: Vec<f64> = rho.iter().zip(x).map(|(r, v)| r * v).collect();
        (dop.mass_inner(&y, &y) / dop.mass_inner(x, x)).sqrt()
    };
    let peak = rho
        .iter()
        .enumerate()
        .fold(0, |best, (i, r)| if r.abs() > rho[best].abs() { i } else { best });
    let mut e = vec![0.0; rho.len()];
    e[peak] = 1.0;
    let mut rng = SeededRng::new(seed);
    let random = (0..count)
        .map(|_| ratio(&rng.uniform_vec(rho.len(), -1.0, 1.0)))
        .fold(0.0, f64::max);
    Ok((ratio(&e), random))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensitySandwichReport {
    pub rho_inf: f64,
    pub norm_r: f64,
    pub norm_a: f64,
    pub norm_r_rho: f64,
    /// `‖R‖⁻¹ ‖R_ρ‖`.
    pub lower: f64,
    /// `‖A‖ ‖R_ρ‖`.
    pub upper: f64,
    pub tol: f64,
    pub lower_pass: bool,
    pub upper_pass: bool,
}

impl DensitySandwichReport {
    pub fn passed(&self) -> bool {
        self.lower_pass && self.upper_pass
    }
}

pub const DENSITY_TOL: f64 = 1e-8;

/// Checks `‖R‖⁻¹‖R_ρ‖ ≤ ‖ρ‖_∞ ≤ ‖A‖‖R_ρ‖` up to a relative `1e−8`.
pub fn density_sandwich_check(
    dop: &DensityOperator,
    rho: &[f64],
    opts: &PowerOptions,
) -> Result<DensitySandwichReport> {
    let rho_inf = multiplier_norm(rho);
    let norm_r = dop.resolvent_norm(opts)?.value;
    let norm_a = dop.laplacian_norm(opts)?.value;
    let norm_r_rho = dop.density_norm(rho, opts)?.value;
    let lower = norm_r_rho / norm_r;
    let upper = norm_a * norm_r_rho;
    Ok(DensitySandwichReport {
        rho_inf,
        norm_r,
        norm_a,
        norm_r_rho,
        lower,
        upper,
        tol: DENSITY_TOL,
        lower_pass: lower <= rho_inf * (1.0 + DENSITY_TOL),
        upper_pass: rho_inf <= upper * (1.0 + DENSITY_TOL),
    })
}

/// Span distance of a density to a set of densities, measured in `L∞` on
/// nodal values and as an `R_ρ` operator distance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensitySpanReport {
    /// `min_a ‖ρ̃ − Σ aᵢρᵢ‖_∞`.
    pub linf_distance: f64,
    pub coeffs: Vec<f64>,
    /// `‖R_ρ̃ − Σ aᵢ R_ρᵢ‖` at the `L∞`-optimal `a`.
    pub operator_distance: f64,
    pub norm_r: f64,
    pub norm_a: f64,
    pub tol: f64,
    /// `operator_distance ≤ ‖R‖ · linf_distance`.
    pub upper_pass: bool,
    /// `linf_distance ≤ ‖A‖ · operator_distance`.
    pub lower_pass: bool,
}

impl DensitySpanReport {
    pub fn passed(&self) -> bool {
        self.lower_pass && self.upper_pass
    }
}

/// Compares the operator distance `‖R_ρ̃ − Σ aᵢR_ρᵢ‖ = ‖R_{ρ̃ − Σ aᵢρᵢ}‖` with
/// the `L∞` span distance, both at the minimax coefficients.
pub fn density_span_check(
    dop: &DensityOperator,
    target: &[f64],
    basis: &[Vec<f64>],
    opts: &PowerOptions,
) -> Result<DensitySpanReport> {
    dop.check(target)?;
    if basis.is_empty() {
        return Err(Error::EmptyBasis);
    }
    for b in basis {
        dop.check(b)?;
    }
    let problem = MinimaxProblem::from_columns(basis, target.to_vec())?;
    let sol = minimax::solve(&problem)?;
    let residual: Vec<f64> = problem.residual(&sol.coeffs);
    let operator_distance = dop.density_norm(&residual, opts)?.value;
    let norm_r = dop.resolvent_norm(opts)?.value;
    let norm_a = dop.laplacian_norm(opts)?.value;
    let d = sol.deviation;
    Ok(DensitySpanReport {
        linf_distance: d,
        coeffs: sol.coeffs,
        operator_distance,
        norm_r,
        norm_a,
        tol: DENSITY_TOL,
        upper_pass: operator_distance <= norm_r * d * (1.0 + DENSITY_TOL),
        lower_pass: d <= norm_a * operator_distance * (1.0 + DENSITY_TOL),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stability_lab::relative_diff;

    #[test]
    fn density_apply_examples() {
        let mesh = Mesh::new(2, 8).unwrap();
        let dop = DensityOperator::new(&mesh).unwrap();
        let n = dop.dim();
        let f: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
        let plain = dop.resolvent(&f).unwrap();
        assert_eq!(dop.density_apply(&vec![1.0; n], &f).unwrap(), plain);
        assert!(dop
            .density_apply(&vec![0.0; n], &f)
            .unwrap()
            .iter()
            .all(|&v| v == 0.0));
        let doubled = dop.density_apply(&vec![2.0; n], &f).unwrap();
        for (a, b) in doubled.iter().zip(&plain) {
            assert_eq!(*a, 2.0 * b);
        }
        assert!(dop.density_apply(&[1.0], &f).is_err());
        // A R f = f
        assert!(relative_diff(&dop.laplacian(&plain), &f) < 1e-12);
    }

    #[test]
    fn multiplier_norm_examples() {
        assert_eq!(multiplier_norm(&[2.5; 4]), 2.5);
        assert_eq!(multiplier_norm(&[1.0, -3.0, 2.0]), 3.0);
        assert_eq!(multiplier_norm(&[0.0; 3]), 0.0);
        let dop = DensityOperator::new(&Mesh::new(1, 4).unwrap()).unwrap();
        let rho = [1.0, -3.0, 2.0];
        let (peak, random) = multiplier_ratios(&dop, &rho, 20, 1).unwrap();
        assert_eq!(peak, 3.0);
        assert!(random <= 3.0);
    }

    #[test]
    fn identity_residual_is_roundoff() {
        let mesh = Mesh::new(2, 8).unwrap();
        let dop = DensityOperator::new(&mesh).unwrap();
        let rho = crate::rng::SeededRng::new(2).uniform_vec(dop.dim(), 0.5, 2.0);
        assert!(density_identity_residual(&dop, &rho, 20, 3).unwrap() < 1e-12);
    }

    #[test]
    fn sandwich_constant_densities() {
        let mesh = Mesh::new(1, 16).unwrap();
        let dop = DensityOperator::new(&mesh).unwrap();
        let opts = PowerOptions::default();
        let one = density_sandwich_check(&dop, &vec![1.0; dop.dim()], &opts).unwrap();
        assert!(one.passed());
        assert!((one.norm_r_rho - one.norm_r).abs() < 1e-9 * one.norm_r);
        assert!((one.lower - 1.0).abs() < 1e-9);
        let three = density_sandwich_check(&dop, &vec![3.0; dop.dim()], &opts).unwrap();
        assert!(three.passed());
        assert!((three.norm_r_rho - 3.0 * three.norm_r).abs() < 1e-9 * three.norm_r_rho);
    }

    #[test]
    fn span_check_on_random_densities() {
        let mesh = Mesh::new(2, 8).unwrap();
        let dop = DensityOperator::new(&mesh).unwrap();
        let n = dop.dim();
        let mut rng = crate::rng::SeededRng::new(11);
        let basis: Vec<Vec<f64>> = (0..2).map(|_| rng.uniform_vec(n, 0.5, 2.0)).collect();
        let target = rng.uniform_vec(n, 0.5, 2.0);
        let opts = PowerOptions::default();
        let rep = density_span_check(&dop, &target, &basis, &opts).unwrap();
        assert!(rep.passed());
        assert!(rep.linf_distance > 0.0);

        // target inside the span
        let inside: Vec<f64> = basis[0].iter().zip(&basis[1]).map(|(a, b)| 0.5 * a + 2.0 * b).collect();
        let rep = density_span_check(&dop, &inside, &basis, &opts).unwrap();
        assert!(rep.linf_distance < 1e-10);
        assert!(rep.operator_distance < 1e-10 * rep.norm_r);
        assert!(density_span_check(&dop, &inside, &[], &opts).is_err());
    }
}
