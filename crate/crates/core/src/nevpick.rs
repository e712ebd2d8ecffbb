//! Degree-constrained Nevanlinna–Pick interpolation through the CEE.
//!
//! Interpolation data `f(z_k) = c_k` at `n + 1` points outside the unit
//! disc is turned into a pair `(u, U)`; the rest is the covariance solver.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cee::{solve_cee, solve_cee_from, solve_cee_tracked, CeeProblem, CeeSolution, ProblemSource, SolverOptions};
use crate::linalg::condition_number;
use crate::poly::{RationalPR, SchurPolynomial};
use crate::{Error, Result};

const IMAG_TOL: f64 = 1e-12;
const COND_LIMIT: f64 = 1e12;
const MULTISTART: usize = 200;
const MULTISTART_SEED: u64 = 0x5eed;

#[derive(Clone, Debug, PartialEq)]
pub struct InterpolationData {
    nodes: Vec<Complex64>,
    values: Vec<Complex64>,
}

impl InterpolationData {
    pub fn new(nodes: Vec<Complex64>, values: Vec<Complex64>) -> Result<Self> {
        if nodes.len() != values.len() {
            return Err(Error::DimensionMismatch { expected: nodes.len(), got: values.len() });
        }
        if nodes.len() < 2 {
            return Err(Error::InvalidArgument("need at least two interpolation points".into()));
        }
        for (z, c) in nodes.iter().zip(&values) {
            if !(z.re.is_finite() && z.im.is_finite() && c.re.is_finite() && c.im.is_finite()) {
                return Err(Error::InvalidArgument("non-finite interpolation data".into()));
            }
            if z.norm() <= 1.0 {
                return Err(Error::InvalidArgument(format!("node {z} is not outside the unit disc")));
            }
            if c.re <= 0.0 {
                return Err(Error::InvalidArgument(format!("value {c} has nonpositive real part")));
            }
        }
        for i in 0..nodes.len() {
            for j in (i + 1)..nodes.len() {
                if (nodes[i] - nodes[j]).norm() <= 1e-12 * nodes[i].norm() {
                    return Err(Error::InvalidArgument(format!("repeated node {}", nodes[i])));
                }
            }
        }
        let residue = conjugation_defect(&nodes, &values);
        if residue > IMAG_TOL {
            return Err(Error::NotConjugateClosed { residue });
        }
        Ok(InterpolationData { nodes, values })
    }

    /// Values of a known `f` at the given nodes.
    pub fn from_function(f: &RationalPR, nodes: Vec<Complex64>) -> Result<Self> {
        let values = nodes.iter().map(|&z| f.eval(z)).collect();
        InterpolationData::new(nodes, values)
    }

    /// Degree `n`; there are `n + 1` points.
    pub fn order(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn nodes(&self) -> &[Complex64] {
        &self.nodes
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    fn scaled_values(&self, s: f64) -> Vec<Complex64> {
        self.values.iter().map(|c| c / s).collect()
    }
}

/// Largest mismatch between a point and its conjugate partner.
fn conjugation_defect(nodes: &[Complex64], values: &[Complex64]) -> f64 {
    nodes
        .iter()
        .zip(values)
        .map(|(z, c)| {
            nodes
                .iter()
                .zip(values)
                .map(|(w, d)| ((w - z.conj()).norm() / z.norm()).max((d - c.conj()).norm() / c.norm()))
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max)
}

/// Row `k` is `(z_k^n, ..., z_k, 1)`.
pub fn vandermonde(nodes: &[Complex64]) -> Result<DMatrix<Complex64>> {
    for i in 0..nodes.len() {
        for j in (i + 1)..nodes.len() {
            if nodes[i] == nodes[j] {
                return Err(Error::InvalidArgument(format!("repeated node {}", nodes[i])));
            }
        }
    }
    let m = nodes.len();
    Ok(DMatrix::from_fn(m, m, |k, j| nodes[k].powi((m - 1 - j) as i32)))
}

/// Which scalar multiplies `V^{-1} C V` in `T`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum TFactor {
    /// `T = (2 V^{-1} C V − I) / 2`, consistent with `f = b/(2a)`.
    #[default]
    Corrected,
    /// `T = (V^{-1} C V / 2 − I) / 2` as printed.
    Paper,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NpParams {
    pub t: DMatrix<f64>,
    pub u: DVector<f64>,
    pub big_u: DMatrix<f64>,
}

fn build_t_from(nodes: &[Complex64], values: &[Complex64], factor: TFactor) -> Result<DMatrix<f64>> {
    let v = vandermonde(nodes)?;
    let m = nodes.len();
    let cv = DMatrix::from_fn(m, m, |i, j| values[i] * v[(i, j)]);
    let vcv = v
        .lu()
        .solve(&cv)
        .ok_or(Error::Singular { context: "Vandermonde matrix" })?;
    let mult = match factor {
        TFactor::Corrected => 2.0,
        TFactor::Paper => 0.5,
    };
    let t = DMatrix::from_fn(m, m, |i, j| {
        let id = if i == j { 1.0 } else { 0.0 };
        0.5 * (mult * vcv[(i, j)] - id)
    });
    let scale = t.iter().fold(1.0_f64, |s, x| s.max(x.norm()));
    let residue = t.iter().fold(0.0_f64, |s, x| s.max(x.im.abs())) / scale;
    if residue > IMAG_TOL {
        return Err(Error::NotConjugateClosed { residue });
    }
    Ok(t.map(|x| x.re))
}

pub fn build_t(data: &InterpolationData, factor: TFactor) -> Result<DMatrix<f64>> {
    build_t_from(&data.nodes, &data.values, factor)
}

/// `[u U] = [0 I](I + T)^{-1} T`.
pub fn build_uu_np(t: DMatrix<f64>) -> Result<NpParams> {
    let m = t.nrows();
    if m == 0 || t.ncols() != m {
        return Err(Error::DimensionMismatch { expected: m, got: t.ncols() });
    }
    let ipt = DMatrix::identity(m, m) + &t;
    let cond = condition_number(&ipt);
    if !(cond <= COND_LIMIT) {
        return Err(Error::IllConditionedIPlusT { cond });
    }
    let x = ipt
        .lu()
        .solve(&t)
        .ok_or(Error::IllConditionedIPlusT { cond })?;
    let n = m - 1;
    Ok(NpParams {
        u: x.view((1, 0), (n, 1)).column(0).into_owned(),
        big_u: x.view((1, 1), (n, n)).into_owned(),
        t,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NpOptions {
    pub factor: TFactor,
    /// Rescale the values so the problem is consistent with `f(∞) = 1/2`.
    pub normalize: bool,
    pub solver: SolverOptions,
    /// Acceptance threshold on the interpolation residual.
    pub tol: f64,
}

impl Default for NpOptions {
    fn default() -> Self {
        NpOptions {
            factor: TFactor::Corrected,
            normalize: true,
            solver: SolverOptions::default(),
            tol: 1e-8,
        }
    }
}

#[derive(Clone, Debug)]
pub struct NpSolution {
    pub solution: CeeSolution,
    pub params: NpParams,
    /// The interpolant is `scale · b/(2a)`.
    pub scale: f64,
    /// First entry of `T[1; a] − [0; g]`, the row `(u, U)` does not see.
    pub first_row_residual: f64,
    pub interp_residual: f64,
}

impl NpSolution {
    pub fn accepted(&self, tol: f64) -> bool {
        self.interp_residual <= tol && self.solution.rho > 0.0 && self.solution.hph() < 1.0
    }
}

struct Stage {
    params: NpParams,
    solution: CeeSolution,
    first_row: f64,
}

fn params_for(data: &InterpolationData, values: &[Complex64], factor: TFactor) -> Result<NpParams> {
    build_uu_np(build_t_from(&data.nodes, values, factor)?)
}

fn problem_for(params: &NpParams, sigma: &SchurPolynomial) -> Result<CeeProblem> {
    CeeProblem::new(
        params.u.clone(),
        params.big_u.clone(),
        sigma.clone(),
        ProblemSource::Interpolation,
    )
}

fn first_row(t: &DMatrix<f64>, a: &[f64]) -> f64 {
    t[(0, 0)] + (1..t.ncols()).map(|j| t[(0, j)] * a[j - 1]).sum::<f64>()
}

/// Values for which `T = 0`, so `P = 0` solves the CEE.
fn neutral_value(factor: TFactor) -> f64 {
    match factor {
        TFactor::Corrected => 0.5,
        TFactor::Paper => 2.0,
    }
}

/// The CEE can have several solutions with `h'Ph < 1` for interpolation
/// data; only one also satisfies the first row of `T[1; a] = [0; g]`. If
/// the plain solve misses that row, the solution is tracked from constant
/// neutral values to the data instead.
fn solve_at_scale(
    data: &InterpolationData,
    sigma: &SchurPolynomial,
    s: f64,
    opts: &NpOptions,
) -> Result<Stage> {
    let values = data.scaled_values(s);
    let params = params_for(data, &values, opts.factor)?;
    let row_tol = 1e-10 * params.t.row(0).abs().sum().max(1.0);
    let direct = solve_cee(&problem_for(&params, sigma)?, &opts.solver).map(|solution| Stage {
        first_row: first_row(&params.t, solution.a.coeffs()),
        params: params.clone(),
        solution,
    });
    if let Ok(st) = &direct {
        if st.first_row.abs() <= row_tol {
            return direct;
        }
    }
    let base = neutral_value(opts.factor);
    let family = |t: f64| {
        let vt: Vec<Complex64> = values.iter().map(|c| base + (c - base) * t).collect();
        problem_for(&params_for(data, &vt, opts.factor)?, sigma)
    };
    let tracked = solve_cee_tracked(&family, &opts.solver).map(|solution| Stage {
        first_row: first_row(&params.t, solution.a.coeffs()),
        params: params.clone(),
        solution,
    });
    let mut best = match (direct, tracked) {
        (Ok(d), Ok(t)) => Ok(if t.first_row.abs() < d.first_row.abs() { t } else { d }),
        (Ok(d), Err(_)) => Ok(d),
        (Err(_), Ok(t)) => Ok(t),
        (Err(e), Err(_)) => Err(e),
    };
    if matches!(&best, Ok(st) if st.first_row.abs() <= row_tol) {
        return best;
    }
    // Last resort: Newton from seeded random starting points.
    let prob = problem_for(&params, sigma)?;
    let n = prob.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(MULTISTART_SEED);
    for _ in 0..MULTISTART {
        let b = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0_f64..1.0));
        let mut start = &b * b.transpose();
        let level: f64 = rng.random_range(0.05..0.999);
        start *= level / start[(0, 0)].max(1e-12);
        let Ok(solution) = solve_cee_from(&prob, start, &opts.solver) else {
            continue;
        };
        let row = first_row(&params.t, solution.a.coeffs());
        let better = match &best {
            Ok(st) => row.abs() < st.first_row.abs(),
            Err(_) => true,
        };
        if better {
            best = Ok(Stage { params: params.clone(), solution, first_row: row });
            if row.abs() <= row_tol {
                break;
            }
        }
    }
    best
}

/// Solves at the data as given, without the acceptance check.
pub fn solve_np_unchecked(
    data: &InterpolationData,
    sigma: &SchurPolynomial,
    opts: &NpOptions,
) -> Result<NpSolution> {
    if sigma.degree() != data.order() {
        return Err(Error::DimensionMismatch { expected: data.order(), got: sigma.degree() });
    }
    let (stage, scale) = if opts.normalize {
        normalize(data, sigma, opts)?
    } else {
        (solve_at_scale(data, sigma, 1.0, opts)?, 1.0)
    };
    let interp_residual = interp_residual_scaled(&stage.solution, data, scale)?;
    Ok(NpSolution {
        solution: stage.solution,
        params: stage.params,
        scale,
        first_row_residual: stage.first_row,
        interp_residual,
    })
}

/// Solves and rejects solutions that miss the data.
pub fn solve_np(data: &InterpolationData, sigma: &SchurPolynomial, opts: &NpOptions) -> Result<NpSolution> {
    let sol = solve_np_unchecked(data, sigma, opts)?;
    if !sol.accepted(opts.tol) {
        return Err(Error::Unsolvable {
            residual: sol.interp_residual,
            reason: "interpolation residual above tolerance at this sigma".into(),
        });
    }
    Ok(sol)
}

/// Secant search on the value scale for a vanishing first-row residual.
fn normalize(data: &InterpolationData, sigma: &SchurPolynomial, opts: &NpOptions) -> Result<(Stage, f64)> {
    const MAX_STEPS: usize = 60;
    let mut s0 = 1.0;
    let mut r0 = solve_at_scale(data, sigma, s0, opts)?;
    let row_tol = 1e-13 * r0.params.t.row(0).abs().sum().max(1.0);
    log::trace!("scale {s0}: first row {:e}", r0.first_row);
    if r0.first_row.abs() <= row_tol {
        return Ok((r0, s0));
    }
    let mut s1 = 1.1;
    let mut r1 = solve_at_scale(data, sigma, s1, opts)?;
    for _ in 0..MAX_STEPS {
        if r1.first_row.abs() <= row_tol {
            return Ok((r1, s1));
        }
        let slope = (r1.first_row - r0.first_row) / (s1 - s0);
        let mut next = if slope != 0.0 && slope.is_finite() {
            s1 - r1.first_row / slope
        } else {
            s1 * 1.5
        };
        if !(next > 0.0) {
            next = 0.5 * s1;
        }
        // Cap the jump, then back off towards the last good scale on solver failure.
        next = next.clamp(s1 / 4.0, s1 * 4.0);
        let mut trial = solve_at_scale(data, sigma, next, opts);
        let mut tries = 0;
        while trial.is_err() && tries < 20 {
            next = 0.5 * (next + s1);
            trial = solve_at_scale(data, sigma, next, opts);
            tries += 1;
        }
        let stage = trial?;
        log::trace!("scale {next}: first row {:e}", stage.first_row);
        if (next - s1).abs() <= 1e-15 * s1 {
            return Ok((stage, next));
        }
        s0 = s1;
        r0 = r1;
        s1 = next;
        r1 = stage;
    }
    let residual = r1.first_row.abs();
    if residual <= 1e-10 {
        return Ok((r1, s1));
    }
    Err(Error::NoConvergence { iterations: MAX_STEPS, residual })
}

fn interp_residual_scaled(sol: &CeeSolution, data: &InterpolationData, scale: f64) -> Result<f64> {
    let mut worst = 0.0_f64;
    for (&z, &c) in data.nodes.iter().zip(&data.values) {
        let az = sol.a.eval(z);
        if az.norm() <= 1e-14 {
            return Err(Error::NearPole { re: z.re, im: z.im });
        }
        let fz = sol.b.eval(z) / (2.0 * az) * scale;
        worst = worst.max((fz - c).norm());
    }
    Ok(worst)
}

/// `max_k |b(z_k)/(2a(z_k)) − c_k|`.
pub fn interp_residual(sol: &CeeSolution, data: &InterpolationData) -> Result<f64> {
    interp_residual_scaled(sol, data, 1.0)
}
