//! The covariance extension equation
//!
//! ```text
//! P = Γ(P − Phh'P)Γ' + g(P)g(P)',    g(P) = u + Uσ + UΓPh,
//! ```
//!
//! its solvers, and the extraction of the shaping filter
//! `a = (I − U)(ΓPh + σ) − u`, `ρ = √(1 − h'Ph)`.
//!
//! Nothing in this module looks at where `(u, U)` came from: covariance
//! data and Nevanlinna–Pick data go through identical code.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::covdata::{build_cov_params, CovParams, CovarianceSequence};
use crate::linalg::{self, companion, symmetrize};
use crate::poly::{Poly, SchurPolynomial};
use crate::{Error, Result};

/// Where `(u, U)` came from. Carried for reporting only.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProblemSource {
    Covariance,
    Interpolation,
}

#[derive(Clone, Debug)]
pub struct CeeProblem {
    sigma: SchurPolynomial,
    sigma_vec: DVector<f64>,
    gamma: DMatrix<f64>,
    u: DVector<f64>,
    big_u: DMatrix<f64>,
    source: ProblemSource,
}

impl CeeProblem {
    pub fn new(
        u: DVector<f64>,
        big_u: DMatrix<f64>,
        sigma: SchurPolynomial,
        source: ProblemSource,
    ) -> Result<Self> {
        let n = sigma.degree();
        if u.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: u.len() });
        }
        if big_u.nrows() != n || big_u.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: big_u.nrows().max(big_u.ncols()),
            });
        }
        let sigma_vec = DVector::from_column_slice(sigma.coeffs());
        let gamma = companion(sigma.coeffs());
        Ok(CeeProblem {
            sigma,
            sigma_vec,
            gamma,
            u,
            big_u,
            source,
        })
    }

    /// Problem for covariance data with the given spectral zeros.
    pub fn from_covariance(params: &CovParams, sigma: SchurPolynomial) -> Result<Self> {
        CeeProblem::new(
            params.u.clone(),
            params.big_u.clone(),
            sigma,
            ProblemSource::Covariance,
        )
    }

    /// Same spectral zeros, data `(tu, tU)`.
    pub fn scaled(&self, t: f64) -> CeeProblem {
        CeeProblem {
            u: &self.u * t,
            big_u: &self.big_u * t,
            ..self.clone()
        }
    }

    pub fn dim(&self) -> usize {
        self.u.len()
    }

    pub fn sigma(&self) -> &SchurPolynomial {
        &self.sigma
    }

    pub fn gamma(&self) -> &DMatrix<f64> {
        &self.gamma
    }

    pub fn u(&self) -> &DVector<f64> {
        &self.u
    }

    pub fn big_u(&self) -> &DMatrix<f64> {
        &self.big_u
    }

    pub fn source(&self) -> ProblemSource {
        self.source
    }

    /// `g(P) = u + Uσ + UΓPh`.
    pub fn g(&self, p: &DMatrix<f64>) -> DVector<f64> {
        let gph = &self.gamma * p.column(0);
        &self.u + &self.big_u * (&self.sigma_vec + gph)
    }

    /// Right-hand side `Γ(P − Phh'P)Γ' + g(P)g(P)'`.
    pub fn riccati_map(&self, p: &DMatrix<f64>) -> DMatrix<f64> {
        let ph = p.column(0);
        let inner = p - ph * ph.transpose();
        let g = self.g(p);
        let mut out = &self.gamma * inner * self.gamma.transpose() + &g * g.transpose();
        symmetrize(&mut out);
        out
    }

    pub fn residual_matrix(&self, p: &DMatrix<f64>) -> DMatrix<f64> {
        p - self.riccati_map(p)
    }

    /// Frobenius norm of the CEE residual.
    pub fn residual(&self, p: &DMatrix<f64>) -> f64 {
        self.residual_matrix(p).norm()
    }

    /// Literal `a = (I − U)(ΓPh + σ) − u`, `ρ = √(1 − h'Ph)` with no checks.
    /// `ρ` is NaN when `h'Ph > 1`.
    pub fn extract_filter_raw(&self, p: &DMatrix<f64>) -> (DVector<f64>, f64) {
        let n = self.dim();
        let x = &self.gamma * p.column(0) + &self.sigma_vec;
        let a = (DMatrix::identity(n, n) - &self.big_u) * x - &self.u;
        let hph = if n > 0 { p[(0, 0)] } else { 0.0 };
        (a, (1.0 - hph).sqrt())
    }

    /// [`extract_filter_raw`](Self::extract_filter_raw) plus the checks
    /// `h'Ph < 1` and `a` Schur.
    pub fn extract_filter(&self, p: &DMatrix<f64>) -> Result<(SchurPolynomial, f64)> {
        let hph = hph(p);
        if !(hph < 1.0) {
            return Err(Error::InvalidBranch { hph });
        }
        let (a, rho) = self.extract_filter_raw(p);
        let a = SchurPolynomial::new(a.as_slice()).map_err(|_| Error::ExtractedNotSchur)?;
        Ok((a, rho))
    }

    /// Directional derivative of the residual map at `p` along symmetric `e`.
    fn residual_derivative(&self, p: &DMatrix<f64>, g: &DVector<f64>, e: &DMatrix<f64>) -> DMatrix<f64> {
        let ph = p.column(0);
        let eh = e.column(0);
        let d_inner = e - eh * ph.transpose() - ph * eh.transpose();
        let dg = &self.big_u * (&self.gamma * eh);
        e - &self.gamma * d_inner * self.gamma.transpose() - &dg * g.transpose() - g * dg.transpose()
    }
}

fn hph(p: &DMatrix<f64>) -> f64 {
    if p.nrows() > 0 {
        p[(0, 0)]
    } else {
        0.0
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Method {
    #[default]
    FixedPoint,
    Newton,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub method: Method,
    pub rank_tol: f64,
    /// Fall back to Newton when the fixed-point iteration fails.
    pub newton_fallback: bool,
    /// Fixed-point iterations tolerated with `h'Ph >= 1` before giving up.
    pub divergence_grace: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-12,
            max_iter: 100_000,
            method: Method::FixedPoint,
            rank_tol: 1e-8,
            newton_fallback: true,
            divergence_grace: 10,
        }
    }
}

#[derive(Clone, Debug)]
pub struct CeeSolution {
    pub p: DMatrix<f64>,
    pub a: SchurPolynomial,
    pub rho: f64,
    /// `b = a + 2g(P)`, the numerator of `f = b / (2a)`.
    pub b: Poly,
    pub rank: usize,
    pub residual: f64,
    pub iterations: usize,
    /// Method that produced `p`.
    pub method: Method,
    /// Whether the fixed-point iteration failed and Newton took over.
    pub fell_back: bool,
}

impl CeeSolution {
    pub fn hph(&self) -> f64 {
        hph(&self.p)
    }

    pub fn sigma_degree(&self) -> usize {
        self.a.degree()
    }
}

struct RawSolve {
    p: DMatrix<f64>,
    residual: f64,
    iterations: usize,
}

/// Iterates `P ← Γ(P − Phh'P)Γ' + g(P)g(P)'` from zero.
///
/// On failure the last iterate with `h'Ph < 1` comes back alongside the
/// error so a fallback can start from it.
fn fixed_point(
    prob: &CeeProblem,
    opts: &SolverOptions,
) -> std::result::Result<RawSolve, (Error, DMatrix<f64>)> {
    let n = prob.dim();
    let mut p = DMatrix::zeros(n, n);
    let mut best = f64::INFINITY;
    let mut since_best = 0usize;
    for k in 0..opts.max_iter {
        let next = prob.riccati_map(&p);
        let res = (&next - &p).norm();
        if !res.is_finite() {
            return Err((
                Error::NoConvergence { iterations: k, residual: res },
                DMatrix::zeros(n, n),
            ));
        }
        if res <= opts.tol {
            return Ok(RawSolve { p, residual: res, iterations: k });
        }
        if hph(&next) >= 1.0 && k >= opts.divergence_grace {
            return Err((Error::InvalidBranch { hph: hph(&next) }, p));
        }
        // Rounding floor above tol: stop instead of spinning to max_iter.
        if res < best * (1.0 - 1e-3) {
            best = res;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best > 500 {
                return Err((Error::NoConvergence { iterations: k, residual: res }, p));
            }
        }
        p = next;
    }
    let residual = prob.residual(&p);
    Err((Error::NoConvergence { iterations: opts.max_iter, residual }, p))
}

/// Damped Newton on the symmetric residual map, unknowns the upper triangle.
fn newton(prob: &CeeProblem, start: DMatrix<f64>, opts: &SolverOptions, max_newton: usize) -> Result<RawSolve> {
    let n = prob.dim();
    let index: Vec<(usize, usize)> = (0..n).flat_map(|j| (0..=j).map(move |i| (i, j))).collect();
    let m = index.len();
    let basis = |i: usize, j: usize| {
        let mut e = DMatrix::zeros(n, n);
        e[(i, j)] = 1.0;
        e[(j, i)] = 1.0;
        e
    };
    let mut p = start;
    let mut r_mat = prob.residual_matrix(&p);
    let mut r = r_mat.norm();
    for it in 0..max_newton {
        if r <= opts.tol {
            return Ok(RawSolve { p, residual: r, iterations: it });
        }
        let g = prob.g(&p);
        let mut jac = DMatrix::zeros(m, m);
        for (col, &(i, j)) in index.iter().enumerate() {
            let d = prob.residual_derivative(&p, &g, &basis(i, j));
            for (row, &(k, l)) in index.iter().enumerate() {
                jac[(row, col)] = d[(k, l)];
            }
        }
        let rhs = DVector::from_fn(m, |row, _| -r_mat[index[row]]);
        let step = jac
            .lu()
            .solve(&rhs)
            .ok_or(Error::Singular { context: "Newton Jacobian" })?;
        let mut delta = DMatrix::zeros(n, n);
        for (row, &(i, j)) in index.iter().enumerate() {
            delta[(i, j)] = step[row];
            delta[(j, i)] = step[row];
        }
        let mut t = 1.0;
        loop {
            let trial = &p + &delta * t;
            let tr_mat = prob.residual_matrix(&trial);
            let tr = tr_mat.norm();
            if tr.is_finite() && tr < (1.0 - 1e-4 * t) * r {
                p = trial;
                r_mat = tr_mat;
                r = tr;
                break;
            }
            t *= 0.5;
            if t < 1e-8 {
                if r <= opts.tol.max(1e-10 * p.norm().max(1.0)) {
                    // Rounding floor reached.
                    return Ok(RawSolve { p, residual: r, iterations: it });
                }
                return Err(Error::NoConvergence { iterations: it, residual: r });
            }
        }
    }
    if r <= opts.tol {
        Ok(RawSolve { p, residual: r, iterations: max_newton })
    } else {
        Err(Error::NoConvergence { iterations: max_newton, residual: r })
    }
}

/// Follows the solution of `family(t)` from `t = 0`, where `P = 0` must
/// solve it, to `t = 1`. Each step is a secant prediction corrected by
/// Newton, accepted only on the branch `h'Ph < 1` with a stable extracted
/// filter.
fn continuation(
    family: &dyn Fn(f64) -> Result<CeeProblem>,
    n: usize,
    opts: &SolverOptions,
) -> Result<RawSolve> {
    const MIN_STEP: f64 = 1e-9;
    const CORRECTOR_STEPS: usize = 25;
    let mut t = 0.0;
    let mut dt = 0.1;
    let mut p = DMatrix::zeros(n, n);
    let mut prev: Option<(f64, DMatrix<f64>)> = None;
    let mut total = 0usize;
    let mut last_err = Error::NoConvergence { iterations: 0, residual: f64::NAN };
    while t < 1.0 {
        let tn = f64::min(t + dt, 1.0);
        let stage = family(tn)?;
        let guess = match &prev {
            Some((tp, pp)) => &p + (&p - pp) * ((tn - t) / (t - tp)),
            None => p.clone(),
        };
        let step = newton(&stage, guess, opts, CORRECTOR_STEPS).and_then(|raw| {
            if hph(&raw.p) >= 1.0 {
                return Err(Error::InvalidBranch { hph: hph(&raw.p) });
            }
            stage.extract_filter(&raw.p).map(|_| raw)
        });
        match step {
            Ok(raw) => {
                total += raw.iterations;
                prev = Some((t, std::mem::replace(&mut p, raw.p)));
                t = tn;
                if tn >= 1.0 {
                    return Ok(RawSolve { p, residual: raw.residual, iterations: total });
                }
                if raw.iterations <= 4 {
                    dt = f64::min(dt * 2.0, 0.5);
                } else if raw.iterations > 8 {
                    dt *= 0.5;
                }
            }
            Err(e) => {
                last_err = e;
                dt *= 0.5;
                if dt < MIN_STEP {
                    log::debug!("continuation stalled at t = {t}");
                    return Err(last_err);
                }
            }
        }
    }
    Err(last_err)
}

/// Solves the CEE and extracts the shaping filter.
///
/// When the fixed-point iteration fails, or with [`Method::Newton`], the
/// solution is tracked along `(tu, tU)` for `t` from 0 to 1.
pub fn solve_cee(prob: &CeeProblem, opts: &SolverOptions) -> Result<CeeSolution> {
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidArgument("tol must be positive".into()));
    }
    let scaled = |t: f64| Ok(prob.scaled(t));
    let (raw, method, fell_back) = match opts.method {
        Method::FixedPoint => match fixed_point(prob, opts) {
            Ok(raw) => (raw, Method::FixedPoint, false),
            Err((err, _)) if opts.newton_fallback => {
                log::debug!("fixed point failed ({err}); falling back to Newton continuation");
                (continuation(&scaled, prob.dim(), opts)?, Method::Newton, true)
            }
            Err((err, _)) => return Err(err),
        },
        Method::Newton => (continuation(&scaled, prob.dim(), opts)?, Method::Newton, false),
    };
    finish(prob, raw, method, fell_back, opts)
}

/// Tracks the solution along a caller-supplied family of problems.
///
/// `family(0)` must be solved by `P = 0`; the result solves `family(1)`.
pub fn solve_cee_tracked(
    family: &dyn Fn(f64) -> Result<CeeProblem>,
    opts: &SolverOptions,
) -> Result<CeeSolution> {
    let target = family(1.0)?;
    let raw = continuation(family, target.dim(), opts)?;
    finish(&target, raw, Method::Newton, false, opts)
}

/// Damped Newton from a given starting point.
pub fn solve_cee_from(prob: &CeeProblem, start: DMatrix<f64>, opts: &SolverOptions) -> Result<CeeSolution> {
    if start.nrows() != prob.dim() || start.ncols() != prob.dim() {
        return Err(Error::DimensionMismatch { expected: prob.dim(), got: start.nrows() });
    }
    let raw = newton(prob, start, opts, 100)?;
    if hph(&raw.p) >= 1.0 {
        return Err(Error::InvalidBranch { hph: hph(&raw.p) });
    }
    finish(prob, raw, Method::Newton, false, opts)
}

fn finish(
    prob: &CeeProblem,
    raw: RawSolve,
    method: Method,
    fell_back: bool,
    opts: &SolverOptions,
) -> Result<CeeSolution> {
    let (a, rho) = prob.extract_filter(&raw.p)?;
    let g = prob.g(&raw.p);
    let a_vec = DVector::from_column_slice(a.coeffs());
    let b_tail = &a_vec + g * 2.0;
    let b = Poly::monic(b_tail.as_slice());
    let rank = rank_p(&raw.p, opts.rank_tol);
    Ok(CeeSolution {
        p: raw.p,
        a,
        rho,
        b,
        rank,
        residual: raw.residual,
        iterations: raw.iterations,
        method,
        fell_back,
    })
}

/// Singular values above `rank_tol · max(σ_max, 1)`.
pub fn rank_p(p: &DMatrix<f64>, rank_tol: f64) -> usize {
    let s = linalg::singular_values(p);
    let top = s.first().copied().unwrap_or(0.0).max(1.0);
    s.into_iter().filter(|&x| x > rank_tol * top).count()
}

/// Spectral-zero sampling for the positive-degree search, in reflection
/// coefficients.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SigmaGrid {
    /// Tensor grid of `points_per_axis` values on `[−1 + margin, 1 − margin]`.
    Uniform { points_per_axis: usize, margin: f64 },
    /// `z^n` followed by `draws` uniform samples of the same box.
    Random { draws: usize, seed: u64, margin: f64 },
}

impl SigmaGrid {
    pub const DEFAULT_MARGIN: f64 = 0.05;

    /// 11 points per axis up to `n = 3`, otherwise 2000 random draws.
    pub fn default_for(n: usize, seed: u64) -> Self {
        if n <= 3 {
            SigmaGrid::Uniform {
                points_per_axis: 11,
                margin: Self::DEFAULT_MARGIN,
            }
        } else {
            SigmaGrid::Random {
                draws: 2000,
                seed,
                margin: Self::DEFAULT_MARGIN,
            }
        }
    }

    /// Reflection-coefficient vectors in scan order.
    pub fn points(&self, n: usize) -> Vec<Vec<f64>> {
        match *self {
            SigmaGrid::Uniform { points_per_axis, margin } => {
                let bound = 1.0 - margin;
                // Symmetric about zero; odd counts hit 0 exactly.
                let axis: Vec<f64> = match points_per_axis {
                    0 => Vec::new(),
                    1 => vec![0.0],
                    k => (0..k)
                        .map(|i| bound * (2 * i) as f64 / (k - 1) as f64 - bound)
                        .map(|x| if x.abs() < 1e-15 { 0.0 } else { x })
                        .collect(),
                };
                let mut out = vec![Vec::new()];
                for _ in 0..n {
                    out = out
                        .into_iter()
                        .flat_map(|prefix| {
                            axis.iter().map(move |&x| {
                                let mut v = prefix.clone();
                                v.push(x);
                                v
                            })
                        })
                        .collect();
                }
                out
            }
            SigmaGrid::Random { draws, seed, margin } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let bound = 1.0 - margin;
                std::iter::once(vec![0.0; n])
                    .chain((0..draws).map(|_| (0..n).map(|_| rng.random_range(-bound..bound)).collect()))
                    .collect()
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct PositiveDegree {
    /// Smallest rank found; an upper bound on the positive degree.
    pub degree: usize,
    /// First σ in scan order attaining it.
    pub sigma: SchurPolynomial,
    pub evaluated: usize,
    pub skipped: usize,
}

/// Minimum of `rank P(σ)` over a grid of spectral zeros.
pub fn positive_degree(
    c: &CovarianceSequence,
    grid: &SigmaGrid,
    opts: &SolverOptions,
) -> Result<PositiveDegree> {
    let min_eig = c.toeplitz_min_eig();
    if !(min_eig > 0.0) {
        return Err(Error::NotPositive { min_eig });
    }
    let n = c.order();
    let params = build_cov_params(c);
    let points = grid.points(n);
    if points.is_empty() {
        return Err(Error::InvalidArgument("empty sigma grid".into()));
    }
    let ranks: Vec<Option<usize>> = points
        .par_iter()
        .map(|ks| {
            let sigma = SchurPolynomial::from_reflection(ks).ok()?;
            let prob = CeeProblem::from_covariance(&params, sigma).ok()?;
            match solve_cee(&prob, opts) {
                Ok(sol) => Some(sol.rank),
                Err(e) => {
                    log::warn!("sigma grid point {ks:?} skipped: {e}");
                    None
                }
            }
        })
        .collect();
    let skipped = ranks.iter().filter(|r| r.is_none()).count();
    let (best_idx, degree) = ranks
        .iter()
        .enumerate()
        .filter_map(|(i, r)| r.map(|r| (i, r)))
        .fold(None, |acc: Option<(usize, usize)>, (i, r)| match acc {
            Some((_, best)) if best <= r => acc,
            _ => Some((i, r)),
        })
        .ok_or(Error::NoConvergence {
            iterations: 0,
            residual: f64::NAN,
        })?;
    Ok(PositiveDegree {
        degree,
        sigma: SchurPolynomial::from_reflection(&points[best_idx])?,
        evaluated: points.len() - skipped,
        skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn scalar_problem(c1: f64, s1: f64) -> CeeProblem {
        let c = CovarianceSequence::normalized(&[c1]);
        CeeProblem::from_covariance(&build_cov_params(&c), SchurPolynomial::new(&[s1]).unwrap())
            .unwrap()
    }

    #[test]
    fn build_problem_examples() {
        let prob = scalar_problem(0.5, 0.0);
        assert_eq!(prob.gamma(), &DMatrix::from_element(1, 1, 0.0));
        assert_eq!(prob.u().as_slice(), &[0.5]);
        assert_eq!(prob.big_u(), &DMatrix::from_element(1, 1, 0.0));

        let c = CovarianceSequence::normalized(&[0.5, 0.25]);
        let prob = CeeProblem::from_covariance(
            &build_cov_params(&c),
            SchurPolynomial::new(&[0.3, -0.2]).unwrap(),
        )
        .unwrap();
        assert_eq!(
            prob.gamma(),
            &DMatrix::from_row_slice(2, 2, &[-0.3, 1.0, 0.2, 0.0])
        );

        let params = build_cov_params(&CovarianceSequence::normalized(&[0.1, 0.2]));
        assert!(matches!(
            CeeProblem::from_covariance(&params, SchurPolynomial::new(&[0.1]).unwrap()),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn g_examples() {
        let c = CovarianceSequence::normalized(&[0.5, 0.25]);
        let prob = CeeProblem::from_covariance(&build_cov_params(&c), SchurPolynomial::z_power(2))
            .unwrap();
        assert_eq!(prob.g(&DMatrix::zeros(2, 2)).as_slice(), &[0.5, 0.0]);

        let white = CeeProblem::from_covariance(
            &build_cov_params(&CovarianceSequence::normalized(&[0.0, 0.0])),
            SchurPolynomial::new(&[0.2, 0.1]).unwrap(),
        )
        .unwrap();
        let p = DMatrix::from_row_slice(2, 2, &[0.3, 0.1, 0.1, 0.2]);
        assert_eq!(white.g(&p).as_slice(), &[0.0, 0.0]);
        assert_eq!(scalar_problem(0.5, 0.4).g(&p.view((0, 0), (1, 1)).into_owned()).as_slice(), &[0.5]);
    }

    #[test]
    fn residual_examples() {
        let prob = scalar_problem(0.5, 0.0);
        assert_abs_diff_eq!(prob.residual(&DMatrix::from_element(1, 1, 0.25)), 0.0);
        assert_abs_diff_eq!(prob.residual(&DMatrix::zeros(1, 1)), 0.25);
    }

    #[test]
    fn scalar_closed_forms() {
        let sol = solve_cee(&scalar_problem(0.5, 0.0), &SolverOptions::default()).unwrap();
        assert_abs_diff_eq!(sol.p[(0, 0)], 0.25, epsilon = 1e-12);
        assert_abs_diff_eq!(sol.rho, 0.75_f64.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(sol.a.coeffs()[0], -0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(sol.b.tail()[0], 0.5, epsilon = 1e-12);
        assert_eq!(sol.rank, 1);

        let sol = solve_cee(&scalar_problem(0.5, 0.5), &SolverOptions::default()).unwrap();
        let p = (-3.0 + 13.0_f64.sqrt()) / 2.0;
        assert_abs_diff_eq!(sol.p[(0, 0)], p, epsilon = 1e-12);
        assert_abs_diff_eq!(sol.rho, (1.0 - p).sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(sol.a.coeffs()[0], -0.5 * p, epsilon = 1e-12);
    }

    #[test]
    fn white_noise_gives_sigma() {
        let params = build_cov_params(&CovarianceSequence::normalized(&[0.0; 3]));
        let sigma = SchurPolynomial::new(&[0.1, -0.2, 0.05]).unwrap();
        let prob = CeeProblem::from_covariance(&params, sigma.clone()).unwrap();
        let sol = solve_cee(&prob, &SolverOptions::default()).unwrap();
        assert_eq!(sol.p, DMatrix::zeros(3, 3));
        assert_eq!(sol.a, sigma);
        assert_eq!(sol.rho, 1.0);
        assert_eq!(sol.rank, 0);
    }

    #[test]
    fn extract_examples() {
        let c = CovarianceSequence::normalized(&[0.3, 0.1]);
        let params = build_cov_params(&c);
        let sigma = SchurPolynomial::new(&[0.2, 0.1]).unwrap();
        let prob = CeeProblem::from_covariance(&params, sigma).unwrap();
        let (a, rho) = prob.extract_filter_raw(&DMatrix::zeros(2, 2));
        let expect = (DMatrix::identity(2, 2) - &params.big_u) * DVector::from_column_slice(&[0.2, 0.1])
            - &params.u;
        assert_eq!(a, expect);
        assert_eq!(rho, 1.0);

        let mut bad = DMatrix::zeros(2, 2);
        bad[(0, 0)] = 1.0;
        assert!(matches!(prob.extract_filter(&bad), Err(Error::InvalidBranch { .. })));
    }

    #[test]
    fn rank_examples() {
        assert_eq!(rank_p(&DMatrix::zeros(3, 3), 1e-8), 0);
        assert_eq!(rank_p(&DMatrix::from_element(1, 1, 0.25), 1e-8), 1);
    }

    #[test]
    fn geometric_embedded_has_rank_one() {
        let c = CovarianceSequence::normalized(&[0.5, 0.25, 0.125, 0.0625]);
        let prob = CeeProblem::from_covariance(&build_cov_params(&c), SchurPolynomial::z_power(4))
            .unwrap();
        let sol = solve_cee(&prob, &SolverOptions::default()).unwrap();
        assert_eq!(sol.rank, 1);
        // a(z) = z³(z − 0.5): the cancelled roots sit at the zeros of σ.
        assert_abs_diff_eq!(sol.a.coeffs()[0], -0.5, epsilon = 1e-10);
        for &x in &sol.a.coeffs()[1..] {
            assert_abs_diff_eq!(x, 0.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn newton_matches_fixed_point() {
        let c = CovarianceSequence::normalized(&[0.4, -0.1, 0.2]);
        let sigma = SchurPolynomial::new(&[0.3, 0.1, -0.2]).unwrap();
        let prob = CeeProblem::from_covariance(&build_cov_params(&c), sigma).unwrap();
        let fp = solve_cee(&prob, &SolverOptions::default()).unwrap();
        let nt = solve_cee(
            &prob,
            &SolverOptions {
                method: Method::Newton,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(fp.method, Method::FixedPoint);
        assert_eq!(nt.method, Method::Newton);
        assert!((&fp.p - &nt.p).norm() <= 1e-8);
    }

    #[test]
    fn positive_degree_examples() {
        let opts = SolverOptions::default();
        let grid = SigmaGrid::default_for(2, 0);
        let white = CovarianceSequence::normalized(&[0.0, 0.0]);
        assert_eq!(positive_degree(&white, &grid, &opts).unwrap().degree, 0);

        let geo = CovarianceSequence::normalized(&[0.5, 0.25]);
        let pd = positive_degree(&geo, &grid, &opts).unwrap();
        assert_eq!(pd.degree, 1);
        assert_eq!(pd.skipped, 0);

        let not_pos = CovarianceSequence::normalized(&[1.0]);
        assert!(matches!(
            positive_degree(&not_pos, &grid, &opts),
            Err(Error::NotPositive { .. })
        ));
    }

    #[test]
    fn grid_shapes() {
        let pts = SigmaGrid::default_for(2, 0).points(2);
        assert_eq!(pts.len(), 121);
        assert!(pts.contains(&vec![0.0, 0.0]));
        let r = SigmaGrid::Random { draws: 5, seed: 1, margin: 0.05 }.points(4);
        assert_eq!(r.len(), 6);
        assert_eq!(r[0], vec![0.0; 4]);
        assert_eq!(r, SigmaGrid::Random { draws: 5, seed: 1, margin: 0.05 }.points(4));
    }
}
