use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::coeff_space::{fmt17, FamilyKind, PiecewiseFn};
use crate::greedy::{greedy_run, online_error_report, GreedyResult, OnlineErrorReport};
use crate::minimax::{self, MinimaxProblem};
use crate::resolvent1d::{empirical_star_norm, probe_suite, resolvent_distance_star, tm_operator_norm};
use crate::rng::SeededRng;
use crate::stability_lab::{
    assemble, density_identity_residual, density_sandwich_check, density_span_check,
    multiplier_norm, multiplier_ratios, operator_identity_residual, theorem1_check,
    DensityOperator, DensitySandwichReport, DensitySpanReport, Mesh, Theorem1Report,
};

use super::config::{self, *};
use super::output::{sha256_hex, table_hash, to_json, write_atomic};
use super::{Check, CliError, Outcome};

pub struct Context<'a> {
    pub config: &'a Path,
    pub out: &'a Path,
    pub seed: Option<u64>,
}

impl Context<'_> {
    fn seed(&self, from_config: Option<u64>) -> u64 {
        self.seed.or(from_config).unwrap_or(0)
    }

    fn write(&self, name: &str, contents: &str) -> Result<(), CliError> {
        write_atomic(&self.out.join(name), contents)
    }
}

#[derive(Serialize, Deserialize)]
struct Inputs {
    config_sha256: String,
    seed: u64,
    coefficients_sha256: String,
}

fn inputs<'a>(bytes: &[u8], seed: u64, rows: impl IntoIterator<Item = &'a [f64]>) -> Inputs {
    Inputs {
        config_sha256: sha256_hex(bytes),
        seed,
        coefficients_sha256: table_hash(rows),
    }
}

/// `greedy_result.json` as written by the greedy subcommands.
#[derive(Serialize, Deserialize)]
struct GreedyArtifact {
    inputs: Inputs,
    result: GreedyResult,
}

pub fn greedy(ctx: &Context, kind: FamilyKind) -> Result<Outcome, CliError> {
    let (cfg, bytes): (GreedyRunConfig, _) = config::load(ctx.config)?;
    let seed = ctx.seed(cfg.seed);
    let mut rng = SeededRng::new(seed);
    let family = cfg.family.build(kind, ctx.config, &mut rng)?;
    let result = greedy_run(&family, &cfg.greedy)?;
    let artifact = GreedyArtifact {
        inputs: inputs(&bytes, seed, family.members().iter().map(|m| m.values())),
        result,
    };
    ctx.write("greedy_result.json", &to_json(&artifact)?)?;
    ctx.write("decay.csv", &artifact.result.decay_csv())?;
    println!(
        "selected {} snapshots, final decay {}",
        artifact.result.snapshot_indices.len(),
        fmt17(*artifact.result.decay.last().expect("nonempty decay"))
    );
    Ok(Outcome::Passed)
}

pub fn verify(ctx: &Context, check: Check) -> Result<Outcome, CliError> {
    let passed = match check {
        Check::Theorem1 => theorem1(ctx)?,
        Check::NormIdentity => norm_identity(ctx)?,
        Check::Surrogate => surrogate(ctx)?,
        Check::Density => density(ctx)?,
        Check::OperatorIdentity => operator_identity(ctx)?,
    };
    println!("{}: {}", check.name(), if passed { "pass" } else { "FAIL" });
    Ok(Outcome::from_pass(passed))
}

fn pair_hash<'a>(pairs: &'a [(PiecewiseFn, PiecewiseFn)]) -> impl Iterator<Item = &'a [f64]> {
    pairs.iter().flat_map(|(a, b)| [a.values(), b.values()])
}

/// Power-iteration noise allowed when comparing deficits across meshes.
pub const DEFICIT_TOL: f64 = 1e-9;

#[derive(Serialize)]
struct Theorem1Pair {
    sigma: Vec<f64>,
    sigma_tilde: Vec<f64>,
    levels: Vec<Theorem1Report>,
    upper_deficits: Vec<f64>,
    deficit_nonincreasing: bool,
    passed: bool,
}

#[derive(Serialize)]
struct Theorem1Output {
    check: &'static str,
    inputs: Inputs,
    deficit_tol: f64,
    pairs: Vec<Theorem1Pair>,
    passed: bool,
}

fn theorem1(ctx: &Context) -> Result<bool, CliError> {
    let (cfg, bytes): (Theorem1Config, _) = config::load(ctx.config)?;
    if cfg.subdivisions.is_empty() {
        return Err(CliError::Config("subdivisions is empty".into()));
    }
    let seed = ctx.seed(cfg.seed);
    let mut rng = SeededRng::new(seed);
    let pairs = resolve_pairs(&cfg.pairs, &mut rng)?;
    let bounds = (cfg.bounds[0], cfg.bounds[1]);
    let mut out = Vec::new();
    let mut csv = String::from("pair,h,d_R_h,deficit\n");
    for (i, (s, t)) in pairs.iter().enumerate() {
        let mut levels = Vec::new();
        for &n in &cfg.subdivisions {
            let mesh = Mesh::new(s.grid().dim(), n)?;
            let rep = theorem1_check(s, t, bounds, &mesh, &cfg.power)?;
            csv.push_str(&format!(
                "{i},{},{},{}\n",
                fmt17(rep.h),
                fmt17(rep.d_r),
                fmt17(rep.upper_deficit())
            ));
            levels.push(rep);
        }
        let upper_deficits: Vec<f64> = levels.iter().map(Theorem1Report::upper_deficit).collect();
        let deficit_nonincreasing = upper_deficits
            .windows(2)
            .all(|w| w[1] <= w[0] + DEFICIT_TOL);
        let passed = deficit_nonincreasing && levels.iter().all(Theorem1Report::passed);
        out.push(Theorem1Pair {
            sigma: s.values().to_vec(),
            sigma_tilde: t.values().to_vec(),
            levels,
            upper_deficits,
            deficit_nonincreasing,
            passed,
        });
    }
    let passed = out.iter().all(|p| p.passed);
    let report = Theorem1Output {
        check: "theorem1",
        inputs: inputs(&bytes, seed, pair_hash(&pairs)),
        deficit_tol: DEFICIT_TOL,
        pairs: out,
        passed,
    };
    ctx.write("theorem1_report.json", &to_json(&report)?)?;
    ctx.write("theorem1_refinement.csv", &csv)?;
    Ok(passed)
}

/// Lower end of the accepted empirical-to-exact norm ratio.
pub const MIN_PROBE_RATIO: f64 = 0.99;
/// Slack above 1 for the empirical norm, which is a lower bound.
pub const PROBE_UPPER_TOL: f64 = 1e-12;

#[derive(Serialize)]
struct NormSample {
    m: Vec<f64>,
    exact: f64,
    empirical: f64,
    ratio: f64,
    passed: bool,
}

fn norm_sample(m: &PiecewiseFn, refine: usize) -> Result<NormSample, CliError> {
    let grid = m.grid().as_line()?;
    let probes = probe_suite(grid, refine)?;
    let exact = tm_operator_norm(m);
    let empirical = empirical_star_norm(m, &probes)?;
    let ratio = if exact == 0.0 { 1.0 } else { empirical / exact };
    Ok(NormSample {
        m: m.values().to_vec(),
        exact,
        empirical,
        ratio,
        passed: (MIN_PROBE_RATIO..=1.0 + PROBE_UPPER_TOL).contains(&ratio),
    })
}

#[derive(Serialize)]
struct NormIdentityOutput {
    check: &'static str,
    inputs: Inputs,
    refine: usize,
    min_ratio: f64,
    samples: Vec<NormSample>,
    passed: bool,
}

fn norm_identity(ctx: &Context) -> Result<bool, CliError> {
    let (cfg, bytes): (NormIdentityConfig, _) = config::load(ctx.config)?;
    let seed = ctx.seed(cfg.seed);
    let mut rng = SeededRng::new(seed);
    let ms = (0..cfg.repeat)
        .map(|_| cfg.m.resolve(&mut rng))
        .collect::<Result<Vec<_>, _>>()?;
    let samples = ms
        .iter()
        .map(|m| norm_sample(m, cfg.refine))
        .collect::<Result<Vec<_>, _>>()?;
    let passed = !samples.is_empty() && samples.iter().all(|s| s.passed);
    let report = NormIdentityOutput {
        check: "norm_identity",
        inputs: inputs(&bytes, seed, ms.iter().map(|m| m.values())),
        refine: cfg.refine,
        min_ratio: MIN_PROBE_RATIO,
        samples,
        passed,
    };
    ctx.write("norm_identity_report.json", &to_json(&report)?)?;
    Ok(passed)
}

#[derive(Serialize)]
struct SurrogatePair {
    sigma: Vec<f64>,
    sigma_tilde: Vec<f64>,
    /// `‖1/σ − 1/σ̃‖_∞`.
    exact: f64,
    /// Probe estimate of `‖R_σ − R_σ̃‖_*`.
    empirical: f64,
    ratio: f64,
    passed: bool,
}

#[derive(Serialize)]
struct SurrogateOutput {
    check: &'static str,
    inputs: Inputs,
    refine: usize,
    min_ratio: f64,
    pairs: Vec<SurrogatePair>,
    density: Vec<DensitySpanReport>,
    passed: bool,
}

fn surrogate(ctx: &Context) -> Result<bool, CliError> {
    let (cfg, bytes): (SurrogateConfig, _) = config::load(ctx.config)?;
    let seed = ctx.seed(cfg.seed);
    let mut rng = SeededRng::new(seed);
    if cfg.pairs.is_empty() && cfg.density.is_none() {
        return Err(CliError::Config("nothing to check: give pairs or density".into()));
    }
    let pairs = if cfg.pairs.is_empty() {
        Vec::new()
    } else {
        resolve_pairs(&cfg.pairs, &mut rng)?
    };
    let mut out = Vec::new();
    for (s, t) in &pairs {
        let exact = resolvent_distance_star(s, t)?;
        let diff = t.reciprocal()?.sub(&s.reciprocal()?)?;
        let sample = norm_sample(&diff, cfg.refine)?;
        out.push(SurrogatePair {
            sigma: s.values().to_vec(),
            sigma_tilde: t.values().to_vec(),
            exact,
            empirical: sample.empirical,
            ratio: sample.ratio,
            passed: sample.passed,
        });
    }
    let mut density_reports = Vec::new();
    let mut hashed: Vec<Vec<f64>> = pair_hash(&pairs).map(<[f64]>::to_vec).collect();
    if let Some(spec) = &cfg.density {
        let mesh = Mesh::new(spec.dim, spec.subdivisions)?;
        let dop = DensityOperator::new(&mesh)?;
        for _ in 0..spec.repeat {
            let target = spec.target.resolve(dop.dim(), &mut rng)?;
            let basis = spec
                .basis
                .iter()
                .map(|b| b.resolve(dop.dim(), &mut rng))
                .collect::<Result<Vec<_>, _>>()?;
            density_reports.push(density_span_check(&dop, &target, &basis, &cfg.power)?);
            hashed.push(target);
            hashed.extend(basis);
        }
    }
    let passed = out.iter().all(|p| p.passed) && density_reports.iter().all(|r| r.passed());
    let report = SurrogateOutput {
        check: "surrogate",
        inputs: inputs(&bytes, seed, hashed.iter().map(Vec::as_slice)),
        refine: cfg.refine,
        min_ratio: MIN_PROBE_RATIO,
        pairs: out,
        density: density_reports,
        passed,
    };
    ctx.write("surrogate_report.json", &to_json(&report)?)?;
    Ok(passed)
}

/// Accepted relative residual of the discrete density identities.
pub const DENSITY_IDENTITY_TOL: f64 = 1e-12;

#[derive(Serialize)]
struct DensitySample {
    rho_sha256: String,
    identity_residual: f64,
    multiplier_norm: f64,
    multiplier_peak_ratio: f64,
    multiplier_random_ratio: f64,
    multiplier_exact: bool,
    sandwich: DensitySandwichReport,
    passed: bool,
}

#[derive(Serialize)]
struct DensityOutput {
    check: &'static str,
    inputs: Inputs,
    dim: usize,
    subdivisions: usize,
    identity_tol: f64,
    samples: Vec<DensitySample>,
    passed: bool,
}

fn density(ctx: &Context) -> Result<bool, CliError> {
    let (cfg, bytes): (DensityConfig, _) = config::load(ctx.config)?;
    let seed = ctx.seed(cfg.seed);
    let mut rng = SeededRng::new(seed);
    let mesh = Mesh::new(cfg.dim, cfg.subdivisions)?;
    let dop = DensityOperator::new(&mesh)?;
    let mut rhos = Vec::new();
    let mut samples = Vec::new();
    for _ in 0..cfg.repeat {
        let rho = cfg.rho.resolve(dop.dim(), &mut rng)?;
        let identity_residual = density_identity_residual(&dop, &rho, cfg.vectors, rng.next_u64())?;
        let norm = multiplier_norm(&rho);
        let (peak, random) = multiplier_ratios(&dop, &rho, cfg.vectors, rng.next_u64())?;
        let multiplier_exact = (peak - norm).abs() <= 1e-15 * norm && random <= norm * (1.0 + 1e-15);
        let sandwich = density_sandwich_check(&dop, &rho, &cfg.power)?;
        let passed = identity_residual <= DENSITY_IDENTITY_TOL && multiplier_exact && sandwich.passed();
        samples.push(DensitySample {
            rho_sha256: table_hash([rho.as_slice()]),
            identity_residual,
            multiplier_norm: norm,
            multiplier_peak_ratio: peak,
            multiplier_random_ratio: random,
            multiplier_exact,
            sandwich,
            passed,
        });
        rhos.push(rho);
    }
    let passed = !samples.is_empty() && samples.iter().all(|s| s.passed);
    let report = DensityOutput {
        check: "density",
        inputs: inputs(&bytes, seed, rhos.iter().map(Vec::as_slice)),
        dim: cfg.dim,
        subdivisions: cfg.subdivisions,
        identity_tol: DENSITY_IDENTITY_TOL,
        samples,
        passed,
    };
    ctx.write("density_report.json", &to_json(&report)?)?;
    Ok(passed)
}

/// Accepted relative residual of the operator identity.
pub const OPERATOR_IDENTITY_TOL: f64 = 1e-10;

#[derive(Serialize)]
struct IdentityPair {
    sigma: Vec<f64>,
    sigma_tilde: Vec<f64>,
    residual: f64,
    passed: bool,
}

#[derive(Serialize)]
struct OperatorIdentityOutput {
    check: &'static str,
    inputs: Inputs,
    subdivisions: usize,
    vectors: usize,
    tol: f64,
    pairs: Vec<IdentityPair>,
    passed: bool,
}

fn operator_identity(ctx: &Context) -> Result<bool, CliError> {
    let (cfg, bytes): (OperatorIdentityConfig, _) = config::load(ctx.config)?;
    let seed = ctx.seed(cfg.seed);
    let mut rng = SeededRng::new(seed);
    let pairs = resolve_pairs(&cfg.pairs, &mut rng)?;
    let mut out = Vec::new();
    for (s, t) in &pairs {
        let mesh = Mesh::new(s.grid().dim(), cfg.subdivisions)?;
        let a = assemble(s, &mesh)?;
        let b = assemble(t, &mesh)?;
        let residual = operator_identity_residual(&a, &b, cfg.vectors, rng.next_u64())?;
        out.push(IdentityPair {
            sigma: s.values().to_vec(),
            sigma_tilde: t.values().to_vec(),
            residual,
            passed: residual <= OPERATOR_IDENTITY_TOL,
        });
    }
    let passed = out.iter().all(|p| p.passed);
    let report = OperatorIdentityOutput {
        check: "operator_identity",
        inputs: inputs(&bytes, seed, pair_hash(&pairs)),
        subdivisions: cfg.subdivisions,
        vectors: cfg.vectors,
        tol: OPERATOR_IDENTITY_TOL,
        pairs: out,
        passed,
    };
    ctx.write("operator_identity_report.json", &to_json(&report)?)?;
    Ok(passed)
}

/// Accepted absolute gap between measured and predicted derivative errors.
pub const ONLINE_IDENTITY_TOL: f64 = 1e-10;

#[derive(Serialize)]
struct OnlineOutput {
    inputs: Inputs,
    basis_sha256: String,
    tau: Vec<f64>,
    source: Vec<f64>,
    #[serde(flatten)]
    errors: OnlineErrorReport,
    identity_tol: f64,
    identity_pass: bool,
    bound_pass: bool,
    passed: bool,
}

pub fn online(ctx: &Context) -> Result<Outcome, CliError> {
    let (cfg, bytes): (OnlineConfig, _) = config::load(ctx.config)?;
    let seed = ctx.seed(cfg.seed);
    let mut rng = SeededRng::new(seed);
    let basis_path = config::resolve(ctx.config, &cfg.basis);
    let basis_bytes = std::fs::read(&basis_path)
        .map_err(|e| CliError::Config(format!("basis file {}: {e}", basis_path.display())))?;
    let artifact: GreedyArtifact = config::parse(&basis_bytes)
        .map_err(|e| CliError::Config(format!("basis file {}: {e}", basis_path.display())))?;
    let result = artifact.result;
    let tau = cfg.tau.resolve(&mut rng)?;
    let f = cfg.source.resolve(&result.grid, &mut rng)?;
    let (online, direct, errors) = online_error_report(&result, &tau, &f)?;
    let identity_pass = errors.identity_residual <= ONLINE_IDENTITY_TOL;
    let bound_pass = errors.bound_holds(ONLINE_IDENTITY_TOL);
    let report = OnlineOutput {
        inputs: inputs(&bytes, seed, [tau.values(), f.values()]),
        basis_sha256: sha256_hex(&basis_bytes),
        tau: tau.values().to_vec(),
        source: f.values().to_vec(),
        errors,
        identity_tol: ONLINE_IDENTITY_TOL,
        identity_pass,
        bound_pass,
        passed: identity_pass && bound_pass,
    };
    ctx.write("online_approx.csv", &online.approx.to_csv())?;
    ctx.write("online_direct.csv", &direct.to_csv())?;
    ctx.write("online_report.json", &to_json(&report)?)?;
    println!(
        "surrogate error {}, max derivative error {}",
        fmt17(report.errors.surrogate_err),
        fmt17(report.errors.max_derivative_error)
    );
    Ok(Outcome::from_pass(report.passed))
}

#[derive(Serialize)]
struct BruteForceOutput {
    half_width: f64,
    step: f64,
    t: f64,
    a: Vec<f64>,
    /// `step · (1 + max row sum)`.
    bound: f64,
    gap: f64,
    passed: bool,
}

#[derive(Serialize)]
struct MinimaxOutput {
    matrix_sha256: String,
    target_sha256: String,
    rows: usize,
    cols: usize,
    t: f64,
    a: Vec<f64>,
    active_rows: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    brute_force: Option<BruteForceOutput>,
}

pub fn minimax(ctx: &Context) -> Result<Outcome, CliError> {
    let (cfg, _): (MinimaxConfig, _) = config::load(ctx.config)?;
    let read = |p: &Path| -> Result<(String, String), CliError> {
        let path = config::resolve(ctx.config, p);
        let text = std::fs::read_to_string(&path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Ok((path.display().to_string(), text))
    };
    let (mpath, mtext) = read(&cfg.matrix)?;
    let (tpath, ttext) = read(&cfg.target)?;
    let (rows, cols, matrix) =
        parse_matrix_csv(&mtext).map_err(|e| CliError::Config(format!("{mpath}: {e}")))?;
    let target = parse_vector_csv(&ttext).map_err(|e| CliError::Config(format!("{tpath}: {e}")))?;
    let problem = MinimaxProblem::new(rows, cols, matrix, target)?;
    let sol = minimax::solve(&problem)?;
    let brute_force = match cfg.brute_force {
        None => None,
        Some(spec) => {
            let bf = minimax::brute_force(&problem, spec.half_width, spec.step)?;
            let bound = spec.step * (1.0 + problem.max_row_sum());
            let gap = (bf.deviation - sol.deviation).abs();
            Some(BruteForceOutput {
                half_width: spec.half_width,
                step: spec.step,
                t: bf.deviation,
                a: bf.coeffs,
                bound,
                gap,
                passed: gap <= bound,
            })
        }
    };
    let passed = brute_force.as_ref().is_none_or(|b| b.passed);
    let report = MinimaxOutput {
        matrix_sha256: sha256_hex(mtext.as_bytes()),
        target_sha256: sha256_hex(ttext.as_bytes()),
        rows,
        cols,
        t: sol.deviation,
        a: sol.coeffs,
        active_rows: sol.active_rows,
        brute_force,
    };
    ctx.write("minimax_result.json", &to_json(&report)?)?;
    println!("t = {}", fmt17(report.t));
    Ok(Outcome::from_pass(passed))
}
