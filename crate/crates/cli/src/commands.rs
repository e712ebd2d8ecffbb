//! The subcommands, minus argument parsing and output plumbing.

use std::fmt::Write as _;

use covext::cee::{positive_degree, rank_p, solve_cee, CeeProblem, ProblemSource, SigmaGrid};
use covext::covdata::{
    algebraic_degree, build_cov_params, estimate_covariances, CovarianceSequence, Estimator, ObservationRecord,
};
use covext::nevpick::{build_t, build_uu_np, solve_np_unchecked, InterpolationData, NpOptions, TFactor};
use covext::poly::{
    laurent_coeffs, positive_real_min, reflection_coefficients, spectral_identity_residual, theta_grid, Poly,
    RationalPR, SchurPolynomial,
};
use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::files::{complex, sha256_hex, EstimateDiagnostics, FileOptions, Kind, ProblemFile, Provenance, SolutionFile};
use crate::CliError;

pub const CEE_TOL: f64 = 1e-9;
pub const FILTER_TOL: f64 = 1e-9;
pub const SPECTRAL_TOL: f64 = 1e-10;
pub const COVARIANCE_TOL: f64 = 1e-8;
pub const INTERP_TOL: f64 = 1e-8;
pub const POSITIVE_REAL_TOL: f64 = 1e-10;
/// `λ_min(T)` at or below this counts as a non-positive sequence.
pub const POSITIVITY_FLOOR: f64 = 1e-12;
pub const DEFAULT_SAMPLES: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolveFlags {
    pub options: FileOptions,
    pub samples: usize,
}

impl Default for SolveFlags {
    fn default() -> Self {
        SolveFlags { options: FileOptions::default(), samples: DEFAULT_SAMPLES }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NpFlags {
    pub paper_factor: bool,
    pub normalize: bool,
}

impl Default for NpFlags {
    fn default() -> Self {
        NpFlags { paper_factor: false, normalize: true }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    /// Pass iff `value <= limit` (or `>=` for lower bounds).
    pub limit: f64,
    pub lower_bound: bool,
    pub pass: bool,
    /// The value recorded in the solution file, where there is one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stored: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub pass: bool,
    pub checks: Vec<Check>,
}

impl Report {
    fn push(&mut self, name: &str, value: f64, limit: f64) {
        self.checks.push(Check {
            name: name.into(),
            value,
            limit,
            lower_bound: false,
            pass: value <= limit,
            stored: None,
        });
    }

    fn push_min(&mut self, name: &str, value: f64, limit: f64) {
        self.checks.push(Check {
            name: name.into(),
            value,
            limit,
            lower_bound: true,
            pass: value >= limit,
            stored: None,
        });
    }

    fn push_flag(&mut self, name: &str, ok: bool) {
        self.push(name, if ok { 0.0 } else { 1.0 }, 0.0);
    }

    fn finish(mut self) -> Report {
        self.pass = self.checks.iter().all(|c| c.pass);
        self
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    fn set_stored(&mut self, name: &str, stored: f64) {
        if let Some(c) = self.checks.iter_mut().find(|c| c.name == name) {
            c.stored = Some(stored);
        }
    }
}

fn covariance(c: &[f64]) -> Result<CovarianceSequence, CliError> {
    let c = CovarianceSequence::from_raw(c)?;
    let min_eig = c.toeplitz_min_eig();
    if !(min_eig > POSITIVITY_FLOOR) {
        return Err(covext::Error::NotPositive { min_eig }.into());
    }
    Ok(c)
}

fn points(nodes: &[[f64; 2]], values: &[[f64; 2]], scale: f64) -> Result<InterpolationData, CliError> {
    Ok(InterpolationData::new(
        nodes.iter().copied().map(complex).collect(),
        values.iter().map(|&v| complex(v) / scale).collect(),
    )?)
}

fn factor(paper: bool) -> TFactor {
    if paper {
        TFactor::Paper
    } else {
        TFactor::Corrected
    }
}

fn rows(p: &DMatrix<f64>) -> Vec<Vec<f64>> {
    p.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn max_abs_diff(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

/// Re-derives every invariant of `sol` against `problem` without solving.
pub fn verify_solution(
    problem: &ProblemFile,
    problem_hash: &str,
    sol: &SolutionFile,
    samples: usize,
) -> Result<Report, CliError> {
    let mut r = Report::default();
    r.push_flag("input_hash", sol.provenance.input_sha256 == problem_hash);
    let n = problem.order();
    if sol.kind != problem.kind() || sol.a.len() != n {
        r.push_flag("dimensions", false);
        return Ok(r.finish());
    }
    r.push("sigma", max_abs_diff(&sol.sigma, &problem.sigma()), 0.0);

    let sigma = SchurPolynomial::new(&sol.sigma)?;
    let prob = match problem {
        ProblemFile::Covariance { c, .. } => {
            CeeProblem::from_covariance(&build_cov_params(&CovarianceSequence::from_raw(c)?), sigma.clone())?
        }
        ProblemFile::Interpolation { nodes, values, .. } => {
            let data = points(nodes, values, sol.scale)?;
            let np = build_uu_np(build_t(&data, factor(sol.provenance.paper_factor.unwrap_or(false)))?)?;
            CeeProblem::new(np.u, np.big_u, sigma.clone(), ProblemSource::Interpolation)?
        }
    };
    let p = DMatrix::from_fn(n, n, |i, j| sol.p[i][j]);
    let rho = sol.rho / sol.scale.sqrt();

    let residual = prob.residual(&p);
    r.push("cee_residual", residual, CEE_TOL);

    let (a_p, rho_p) = prob.extract_filter_raw(&p);
    let b_p = &a_p + prob.g(&p) * 2.0;
    let filter_gap = max_abs_diff(&sol.a, a_p.as_slice())
        .max(max_abs_diff(&sol.b, b_p.as_slice()))
        .max((rho - rho_p).abs());
    r.push("filter_extraction", if filter_gap.is_nan() { f64::INFINITY } else { filter_gap }, FILTER_TOL);

    let hph = p[(0, 0)];
    r.checks.push(Check {
        name: "branch".into(),
        value: hph,
        limit: 1.0,
        lower_bound: false,
        pass: hph < 1.0,
        stored: None,
    });

    let a = Poly::monic(&sol.a);
    let b = Poly::monic(&sol.b);
    let max_reflection = reflection_coefficients(&a)
        .map(|k| k.iter().fold(0.0_f64, |m, x| m.max(x.abs())))
        .unwrap_or(f64::INFINITY);
    r.checks.push(Check {
        name: "schur".into(),
        value: max_reflection,
        limit: 1.0,
        lower_bound: false,
        pass: max_reflection < 1.0,
        stored: None,
    });

    r.push("spectral_identity", spectral_identity_residual(&a, &b, sigma.as_poly(), rho), SPECTRAL_TOL);

    let f = RationalPR::new(a.clone(), b.clone());
    let fit = match problem {
        ProblemFile::Covariance { c, .. } => {
            let target = CovarianceSequence::from_raw(c)?;
            let m = f
                .as_ref()
                .ok()
                .and_then(|f| laurent_coeffs(f, n).ok())
                .map_or(f64::INFINITY, |lags| max_abs_diff(&lags, target.lags()));
            r.push("covariance_match", m, COVARIANCE_TOL);
            ("covariance_match", m, sol.covariance_match)
        }
        ProblemFile::Interpolation { nodes, values, .. } => {
            let mut worst = 0.0_f64;
            for (&z, &c) in nodes.iter().zip(values) {
                let z = complex(z);
                let fz = b.eval(z) / (a.eval(z) * 2.0) * sol.scale;
                worst = worst.max((fz - complex(c)).norm());
            }
            if worst.is_nan() {
                worst = f64::INFINITY;
            }
            r.push("interp_residual", worst, INTERP_TOL);
            ("interp_residual", worst, sol.interp_residual)
        }
    };

    let pr_min = f
        .ok()
        .and_then(|f| positive_real_min(&f, samples).ok())
        .map_or(f64::NEG_INFINITY, |m| m.value);
    r.push_min("positive_real", pr_min, -POSITIVE_REAL_TOL);

    let rank = rank_p(&p, sol.provenance.rank_tol);
    r.checks.push(Check {
        name: "rank".into(),
        value: rank as f64,
        limit: sol.rank as f64,
        lower_bound: false,
        pass: rank == sol.rank,
        stored: Some(sol.rank as f64),
    });

    // Stored summaries must be the ones recomputed here.
    let stored = [
        ("cee_residual", residual, Some(sol.residual)),
        fit,
        ("positive_real", pr_min, Some(sol.positive_real_min)),
    ];
    let mut drift = 0.0_f64;
    for (name, value, s) in stored {
        match s {
            Some(s) => {
                r.set_stored(name, s);
                drift = drift.max((s - value).abs() / value.abs().max(1.0));
            }
            None => drift = f64::INFINITY,
        }
    }
    r.push("stored_values", if drift.is_nan() { f64::INFINITY } else { drift }, 1e-12);
    Ok(r.finish())
}

/// Fills the summary fields of `sol` from a fresh verification.
fn seal(problem: &ProblemFile, hash: &str, sol: &mut SolutionFile, samples: usize) -> Result<Report, CliError> {
    let probe = verify_solution(problem, hash, sol, samples)?;
    let value = |name: &str| probe.get(name).map(|c| c.value);
    sol.residual = value("cee_residual").unwrap_or(f64::INFINITY);
    sol.positive_real_min = value("positive_real").unwrap_or(f64::NEG_INFINITY);
    match sol.kind {
        Kind::Covariance => sol.covariance_match = value("covariance_match"),
        Kind::Interpolation => sol.interp_residual = value("interp_residual"),
    }
    verify_solution(problem, hash, sol, samples)
}

fn provenance(hash: &str, command: &str, opts: &covext::cee::SolverOptions, samples: usize) -> Provenance {
    Provenance {
        input_sha256: hash.into(),
        command: command.into(),
        method: opts.method.into(),
        fell_back: false,
        iterations: 0,
        tol: opts.tol,
        max_iter: opts.max_iter,
        rank_tol: opts.rank_tol,
        samples,
        paper_factor: None,
        normalize: None,
        version: env!("CARGO_PKG_VERSION").into(),
    }
}

/// Solves a covariance extension problem and verifies the result.
pub fn extend(problem_bytes: &[u8], flags: &SolveFlags) -> Result<(SolutionFile, Report), CliError> {
    let problem = ProblemFile::parse(problem_bytes)?;
    let ProblemFile::Covariance { c, .. } = &problem else {
        return Err(CliError::BadData("extend needs a covariance problem file".into()));
    };
    let opts = flags.options.or(problem.options()).solver();
    let c = covariance(c)?;
    let sigma = SchurPolynomial::new(&problem.sigma())?;
    let prob = CeeProblem::from_covariance(&build_cov_params(&c), sigma.clone())?;
    let sol = solve_cee(&prob, &opts)?;
    log::info!("solved in {} iterations ({:?})", sol.iterations, sol.method);

    let hash = sha256_hex(problem_bytes);
    let mut prov = provenance(&hash, "extend", &opts, flags.samples);
    prov.method = sol.method.into();
    prov.fell_back = sol.fell_back;
    prov.iterations = sol.iterations;
    let mut file = SolutionFile {
        kind: Kind::Covariance,
        a: sol.a.coeffs().to_vec(),
        b: sol.b.tail().to_vec(),
        sigma: sigma.coeffs().to_vec(),
        rho: sol.rho * c.scale().sqrt(),
        scale: c.scale(),
        p: rows(&sol.p),
        rank: sol.rank,
        residual: 0.0,
        covariance_match: None,
        interp_residual: None,
        positive_real_min: 0.0,
        provenance: prov,
    };
    let report = seal(&problem, &hash, &mut file, flags.samples)?;
    Ok((file, report))
}

/// Solves a Nevanlinna–Pick problem and verifies the result.
pub fn nevpick(problem_bytes: &[u8], flags: &SolveFlags, np: &NpFlags) -> Result<(SolutionFile, Report), CliError> {
    let problem = ProblemFile::parse(problem_bytes)?;
    let ProblemFile::Interpolation { nodes, values, .. } = &problem else {
        return Err(CliError::BadData("nevpick needs an interpolation problem file".into()));
    };
    let opts = flags.options.or(problem.options()).solver();
    let data = points(nodes, values, 1.0)?;
    let sigma = SchurPolynomial::new(&problem.sigma())?;
    let np_opts = NpOptions {
        factor: factor(np.paper_factor),
        normalize: np.normalize,
        solver: opts,
        tol: INTERP_TOL,
    };
    let sol = solve_np_unchecked(&data, &sigma, &np_opts)?;
    let s = &sol.solution;

    let hash = sha256_hex(problem_bytes);
    let mut prov = provenance(&hash, "nevpick", &opts, flags.samples);
    prov.method = s.method.into();
    prov.fell_back = s.fell_back;
    prov.iterations = s.iterations;
    prov.paper_factor = Some(np.paper_factor);
    prov.normalize = Some(np.normalize);
    let mut file = SolutionFile {
        kind: Kind::Interpolation,
        a: s.a.coeffs().to_vec(),
        b: s.b.tail().to_vec(),
        sigma: sigma.coeffs().to_vec(),
        rho: s.rho * sol.scale.sqrt(),
        scale: sol.scale,
        p: rows(&s.p),
        rank: s.rank,
        residual: 0.0,
        covariance_match: None,
        interp_residual: None,
        positive_real_min: 0.0,
        provenance: prov,
    };
    let report = seal(&problem, &hash, &mut file, flags.samples)?;
    Ok((file, report))
}

/// Reads one numeric column; a non-numeric first row is taken as a header.
pub fn read_series(text: &str) -> Result<Vec<f64>, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(false)
        .from_reader(text.as_bytes());
    let mut out = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| CliError::BadData(format!("series: {e}")))?;
        if rec.len() != 1 {
            return Err(CliError::BadData(format!("series row {} has {} columns, expected 1", i + 1, rec.len())));
        }
        match rec[0].trim().parse::<f64>() {
            Ok(v) if v.is_finite() => out.push(v),
            Ok(_) => return Err(CliError::BadData(format!("series row {} is not finite", i + 1))),
            Err(_) if i == 0 => {}
            Err(_) => return Err(CliError::BadData(format!("series row {} is not a number: {:?}", i + 1, &rec[0]))),
        }
    }
    if out.is_empty() {
        return Err(CliError::BadData("series is empty".into()));
    }
    Ok(out)
}

/// Ergodic covariance estimates as a covariance problem file.
pub fn estimate(series_csv: &str, lags: usize, unbiased: bool) -> Result<ProblemFile, CliError> {
    if lags == 0 {
        return Err(CliError::BadData("--lags must be at least 1".into()));
    }
    let y = read_series(series_csv)?;
    let samples = y.len();
    let record = ObservationRecord::new(y)?;
    let estimator = if unbiased { Estimator::Unbiased } else { Estimator::Biased };
    let c = estimate_covariances(&record, lags, estimator)?;
    let lambda_min = c.toeplitz_min_eig();
    let positive = lambda_min > POSITIVITY_FLOOR;
    if !positive {
        log::warn!("estimated sequence is not positive: λ_min(T) = {lambda_min:e}");
    }
    Ok(ProblemFile::Covariance {
        c: c.values().to_vec(),
        sigma: None,
        options: None,
        diagnostics: Some(EstimateDiagnostics {
            raw: c.raw(),
            c0: c.scale(),
            lambda_min,
            positive,
            estimator: if unbiased { "unbiased" } else { "biased" }.into(),
            samples,
        }),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PosdegReport {
    pub algebraic_degree: usize,
    /// Smallest `rank P(σ)` found on the grid; an upper bound.
    pub positive_degree: usize,
    /// First `σ_1..σ_n` attaining it.
    pub sigma: Vec<f64>,
    pub evaluated: usize,
    pub skipped: usize,
    pub grid: String,
}

/// `uniform:K` (K points per reflection-coefficient axis) or `random:D`
/// (D seeded draws plus `σ = z^n`).
pub fn parse_grid(spec: Option<&str>, n: usize, seed: u64) -> Result<SigmaGrid, CliError> {
    let margin = SigmaGrid::DEFAULT_MARGIN;
    let Some(spec) = spec else {
        return Ok(SigmaGrid::default_for(n, seed));
    };
    let (kind, count) = spec
        .split_once(':')
        .ok_or_else(|| CliError::BadData(format!("grid {spec:?}: expected uniform:K or random:D")))?;
    let count: usize = count
        .parse()
        .map_err(|_| CliError::BadData(format!("grid {spec:?}: bad count")))?;
    match kind {
        "uniform" => Ok(SigmaGrid::Uniform { points_per_axis: count, margin }),
        "random" => Ok(SigmaGrid::Random { draws: count, seed, margin }),
        _ => Err(CliError::BadData(format!("grid {spec:?}: unknown kind {kind:?}"))),
    }
}

pub fn posdeg(problem_bytes: &[u8], options: FileOptions, grid: Option<&str>, seed: u64) -> Result<PosdegReport, CliError> {
    let problem = ProblemFile::parse(problem_bytes)?;
    let ProblemFile::Covariance { c, .. } = &problem else {
        return Err(CliError::BadData("posdeg needs a covariance problem file".into()));
    };
    let opts = options.or(problem.options()).solver();
    let c = covariance(c)?;
    let grid = parse_grid(grid, c.order(), seed)?;
    let pos = positive_degree(&c, &grid, &opts)?;
    Ok(PosdegReport {
        algebraic_degree: algebraic_degree(&c, opts.rank_tol),
        positive_degree: pos.degree,
        sigma: pos.sigma.coeffs().to_vec(),
        evaluated: pos.evaluated,
        skipped: pos.skipped,
        grid: match grid {
            SigmaGrid::Uniform { points_per_axis, .. } => format!("uniform:{points_per_axis}"),
            SigmaGrid::Random { draws, seed, .. } => format!("random:{draws} seed {seed}"),
        },
    })
}

/// `verify` with the grid size recorded in the solution unless overridden.
pub fn verify(solution_bytes: &[u8], problem_bytes: &[u8], samples: Option<usize>) -> Result<Report, CliError> {
    let sol = SolutionFile::parse(solution_bytes)?;
    let problem = ProblemFile::parse(problem_bytes)?;
    let samples = samples.unwrap_or(sol.provenance.samples);
    verify_solution(&problem, &sha256_hex(problem_bytes), &sol, samples)
}

/// CSV of `θ, Φ(e^{iθ}), Re f(e^{iθ})` on a uniform grid over `[0, π]`.
pub fn spectrum(solution_bytes: &[u8], samples: usize) -> Result<String, CliError> {
    if samples < 2 {
        return Err(CliError::BadData("--samples must be at least 2".into()));
    }
    let sol = SolutionFile::parse(solution_bytes)?;
    let a = Poly::monic(&sol.a);
    let b = Poly::monic(&sol.b);
    let sigma = Poly::monic(&sol.sigma);
    let mut out = String::from("theta,phi,re_f\n");
    for theta in theta_grid(samples) {
        let z = Complex64::from_polar(1.0, theta);
        let az = a.eval(z);
        let phi = sol.rho * sol.rho * sigma.eval(z).norm_sqr() / az.norm_sqr();
        let re_f = (b.eval(z) / (az * 2.0)).re * sol.scale;
        writeln!(out, "{theta},{phi},{re_f}").expect("writing to a String");
    }
    Ok(out)
}
