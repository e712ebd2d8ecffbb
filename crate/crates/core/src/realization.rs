//! State-space realizations in observer companion form and the classical
//! Riccati equation
//!
//! ```text
//! P = FPF' + (g − FPh)(1 − h'Ph)^{-1}(g − FPh)',   F = J − ah',
//! ```
//!
//! used as an independent cross-check of the CEE solver.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::linalg::{companion, symmetrize};
use crate::poly::{is_schur, Poly, RationalPR};
use crate::{Error, Result};

/// `f(z) = 1/2 + h'(zI − F)^{-1} g` with `F = J − ah'`.
#[derive(Clone, Debug, PartialEq)]
pub struct CompanionRealization {
    pub f: DMatrix<f64>,
    pub g: DVector<f64>,
}

impl CompanionRealization {
    pub fn new(a: &[f64], g: &[f64]) -> Result<Self> {
        if a.len() != g.len() {
            return Err(Error::DimensionMismatch { expected: a.len(), got: g.len() });
        }
        Ok(CompanionRealization {
            f: companion(a),
            g: DVector::from_column_slice(g),
        })
    }

    pub fn from_rational(pr: &RationalPR) -> Result<Self> {
        let a = pr.a().tail();
        let g = g_from_ab(a, pr.b().tail())?;
        CompanionRealization::new(a, &g)
    }

    pub fn dim(&self) -> usize {
        self.g.len()
    }

    /// Tail of `a`, read off the first column of `F`.
    pub fn a(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| -self.f[(i, 0)]).collect()
    }

    pub fn b(&self) -> Vec<f64> {
        b_from_ag(&self.a(), self.g.as_slice())
    }
}

/// `w(z) = ρ + h'(zI − F)^{-1} k`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralFactorRealization {
    pub f: DMatrix<f64>,
    pub k: DVector<f64>,
    pub rho: f64,
}

impl SpectralFactorRealization {
    /// Realization of `ρσ/a`, whose `k` is `ρ(σ − a)`.
    pub fn from_filter(a: &[f64], sigma: &[f64], rho: f64) -> Result<Self> {
        if a.len() != sigma.len() {
            return Err(Error::DimensionMismatch { expected: a.len(), got: sigma.len() });
        }
        let k = DVector::from_iterator(a.len(), sigma.iter().zip(a).map(|(s, x)| rho * (s - x)));
        Ok(SpectralFactorRealization { f: companion(a), k, rho })
    }

    pub fn eval(&self, z: Complex64) -> Result<Complex64> {
        Ok(self.rho + first_of_resolvent(&self.f, &self.k, z)?)
    }
}

/// `g = (b − a) / 2`.
pub fn g_from_ab(a: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch { expected: a.len(), got: b.len() });
    }
    Ok(a.iter().zip(b).map(|(x, y)| 0.5 * (y - x)).collect())
}

/// `b = a + 2g`.
pub fn b_from_ag(a: &[f64], g: &[f64]) -> Vec<f64> {
    a.iter().zip(g).map(|(x, y)| x + 2.0 * y).collect()
}

/// `h'(zI − F)^{-1} v` by a direct complex solve.
fn first_of_resolvent(f: &DMatrix<f64>, v: &DVector<f64>, z: Complex64) -> Result<Complex64> {
    let n = f.nrows();
    if n == 0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let a = Poly::monic(&(0..n).map(|i| -f[(i, 0)]).collect::<Vec<_>>());
    let scale: f64 = a.coeffs().iter().map(|c| c.abs()).sum::<f64>() * z.norm().max(1.0).powi(n as i32);
    if a.eval(z).norm() <= 1e-12 * scale {
        return Err(Error::NearPole { re: z.re, im: z.im });
    }
    let m = DMatrix::from_fn(n, n, |i, j| {
        let d = if i == j { z } else { Complex64::new(0.0, 0.0) };
        d - f[(i, j)]
    });
    let rhs = v.map(|x| Complex64::new(x, 0.0));
    let x = m
        .lu()
        .solve(&rhs)
        .ok_or(Error::NearPole { re: z.re, im: z.im })?;
    Ok(x[0])
}

/// `f(z)` through the state-space form.
pub fn eval_f_realization(real: &CompanionRealization, z: Complex64) -> Result<Complex64> {
    Ok(0.5 + first_of_resolvent(&real.f, &real.g, z)?)
}

/// `a(z)/b(z) = 1 − 2h'(2gh' + zI − F)^{-1} g`, the reciprocal of `2f`.
pub fn eval_a_over_b(real: &CompanionRealization, z: Complex64) -> Result<Complex64> {
    let n = real.dim();
    let mut shifted = real.f.clone();
    for i in 0..n {
        shifted[(i, 0)] -= 2.0 * real.g[i];
    }
    Ok(1.0 - 2.0 * first_of_resolvent(&shifted, &real.g, z)?)
}

#[derive(Clone, Debug)]
pub struct AreSolution {
    pub p: DMatrix<f64>,
    pub iterations: usize,
    pub residual: f64,
    /// Smallest eigenvalue over all successive fixed-point differences
    /// `P_{k+1} − P_k`; `+∞` if no fixed-point step was taken.
    pub min_increment_eig: f64,
    /// Whether Newton finished the job.
    pub polished: bool,
}

const FIXED_POINT_BUDGET: usize = 2_000;

fn hph(p: &DMatrix<f64>) -> f64 {
    if p.nrows() == 0 {
        0.0
    } else {
        p[(0, 0)]
    }
}

fn scaled_tol(tol: f64, p: &DMatrix<f64>) -> f64 {
    tol * p.norm().max(1.0)
}

/// Fixed-point iteration from zero. On failure the last iterate with
/// `h'Ph < 1` is returned alongside the error.
fn iterate_from_zero(
    n: usize,
    tol: f64,
    map: &dyn Fn(&DMatrix<f64>) -> DMatrix<f64>,
) -> std::result::Result<AreSolution, (Error, AreSolution)> {
    let mut p = DMatrix::zeros(n, n);
    let mut min_eig = f64::INFINITY;
    let mut best = f64::INFINITY;
    let mut since_best = 0usize;
    let partial = |p: DMatrix<f64>, k, res, min_eig| AreSolution {
        p,
        iterations: k,
        residual: res,
        min_increment_eig: min_eig,
        polished: false,
    };
    for k in 0..FIXED_POINT_BUDGET {
        let next = map(&p);
        let step = &next - &p;
        let res = step.norm();
        if !res.is_finite() || hph(&next) >= 1.0 {
            let err = Error::InvalidBranch { hph: hph(&next) };
            return Err((err, partial(p, k, res, min_eig)));
        }
        if n > 0 {
            min_eig = min_eig.min(step.symmetric_eigenvalues().min());
        }
        p = next;
        if res <= scaled_tol(tol, &p) {
            return Ok(partial(p, k + 1, res, min_eig));
        }
        if res < best * (1.0 - 1e-3) {
            best = res;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best > 500 {
                break;
            }
        }
    }
    let res = (map(&p) - &p).norm();
    let err = Error::NoConvergence { iterations: FIXED_POINT_BUDGET, residual: res };
    Err((err, partial(p, FIXED_POINT_BUDGET, res, min_eig)))
}

/// Damped Newton for `R(P) = 0` over symmetric `P`, with the directional
/// derivative supplied.
fn sym_newton(
    start: DMatrix<f64>,
    tol: f64,
    residual: &dyn Fn(&DMatrix<f64>) -> DMatrix<f64>,
    derivative: &dyn Fn(&DMatrix<f64>, &DMatrix<f64>) -> DMatrix<f64>,
    max_steps: usize,
) -> Result<(DMatrix<f64>, f64, usize)> {
    let n = start.nrows();
    let index: Vec<(usize, usize)> = (0..n).flat_map(|j| (0..=j).map(move |i| (i, j))).collect();
    let m = index.len();
    let mut p = start;
    let mut r_mat = residual(&p);
    let mut r = r_mat.norm();
    for it in 0..max_steps {
        if r <= scaled_tol(tol, &p) {
            return Ok((p, r, it));
        }
        let mut jac = DMatrix::zeros(m, m);
        for (col, &(i, j)) in index.iter().enumerate() {
            let mut e = DMatrix::zeros(n, n);
            e[(i, j)] = 1.0;
            e[(j, i)] = 1.0;
            let d = derivative(&p, &e);
            for (row, &(k, l)) in index.iter().enumerate() {
                jac[(row, col)] = d[(k, l)];
            }
        }
        let rhs = DVector::from_fn(m, |row, _| -r_mat[index[row]]);
        let step = jac.lu().solve(&rhs).ok_or(Error::Singular { context: "Riccati Jacobian" })?;
        let mut delta = DMatrix::zeros(n, n);
        for (row, &(i, j)) in index.iter().enumerate() {
            delta[(i, j)] = step[row];
            delta[(j, i)] = step[row];
        }
        let mut t = 1.0;
        loop {
            let trial = &p + &delta * t;
            let tr_mat = residual(&trial);
            let tr = tr_mat.norm();
            if hph(&trial) < 1.0 && tr.is_finite() && tr < (1.0 - 1e-4 * t) * r {
                p = trial;
                r_mat = tr_mat;
                r = tr;
                break;
            }
            t *= 0.5;
            if t < 1e-8 {
                if r <= scaled_tol(tol.max(1e-11), &p) {
                    return Ok((p, r, it));
                }
                return Err(Error::NoConvergence { iterations: it, residual: r });
            }
        }
    }
    if r <= scaled_tol(tol, &p) {
        Ok((p, r, max_steps))
    } else {
        Err(Error::NoConvergence { iterations: max_steps, residual: r })
    }
}

fn check_tol(tol: f64) -> Result<()> {
    if tol > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument("tol must be positive".into()))
    }
}

/// Minimal solution of the classical Riccati equation.
///
/// Iterates from zero; the iterates increase towards the minimal solution,
/// and Newton takes over from the last one when the contraction is slow.
pub fn solve_are_minimal(a: &[f64], g: &[f64], tol: f64) -> Result<AreSolution> {
    check_tol(tol)?;
    let real = CompanionRealization::new(a, g)?;
    let f = &real.f;
    let g = &real.g;
    let n = a.len();
    if n == 0 {
        return Ok(AreSolution {
            p: DMatrix::zeros(0, 0),
            iterations: 0,
            residual: 0.0,
            min_increment_eig: f64::INFINITY,
            polished: false,
        });
    }
    let gain = |p: &DMatrix<f64>| g - f * p.column(0);
    let map = |p: &DMatrix<f64>| {
        let e = gain(p);
        let mut next = f * p * f.transpose() + &e * e.transpose() / (1.0 - hph(p));
        symmetrize(&mut next);
        next
    };
    let residual = |p: &DMatrix<f64>| map(p) - p;
    let derivative = |p: &DMatrix<f64>, d: &DMatrix<f64>| {
        let e = gain(p);
        let de = -(f * d.column(0));
        let s = 1.0 - hph(p);
        f * d * f.transpose() + (&de * e.transpose() + &e * de.transpose()) / s
            + &e * e.transpose() * (d[(0, 0)] / (s * s))
            - d
    };
    let last = match iterate_from_zero(n, tol, &map) {
        Ok(sol) => sol,
        Err((Error::NoConvergence { .. }, last)) => last,
        Err((e, _)) => return Err(e),
    };
    polish(last, tol, &residual, &derivative)
}

/// A step-size test says little when the contraction is slow, so every
/// fixed-point result gets a few Newton steps.
fn polish(
    last: AreSolution,
    tol: f64,
    residual: &dyn Fn(&DMatrix<f64>) -> DMatrix<f64>,
    derivative: &dyn Fn(&DMatrix<f64>, &DMatrix<f64>) -> DMatrix<f64>,
) -> Result<AreSolution> {
    // Run to the rounding floor: near h'Ph = 1 the equations are badly
    // conditioned and a small residual alone does not pin down P.
    let (p, res, steps) = sym_newton(last.p, tol.min(1e-17), residual, derivative, 100)?;
    Ok(AreSolution {
        p,
        iterations: last.iterations + steps,
        residual: res,
        min_increment_eig: last.min_increment_eig,
        polished: steps > 0,
    })
}

/// Minimal solution of `P = Γ(P − Phh'P)Γ' + gg'` with `g` held fixed.
///
/// The plain iteration from zero can leave `h'Ph < 1`; the fallback tracks
/// the solution for `tg` from `t = 0`, staying where `ΓPh + σ − tg` is a
/// Schur polynomial.
pub fn solve_gamma_form(sigma: &[f64], g: &[f64], tol: f64) -> Result<AreSolution> {
    check_tol(tol)?;
    if sigma.len() != g.len() {
        return Err(Error::DimensionMismatch { expected: sigma.len(), got: g.len() });
    }
    let n = sigma.len();
    let gamma = companion(sigma);
    let g = DVector::from_column_slice(g);
    let ggt = &g * g.transpose();
    let core = |p: &DMatrix<f64>| {
        let ph = p.column(0);
        let mut out = &gamma * (p - ph * ph.transpose()) * gamma.transpose();
        symmetrize(&mut out);
        out
    };
    let derivative = |p: &DMatrix<f64>, d: &DMatrix<f64>| {
        let cross = d.column(0) * p.column(0).transpose();
        &gamma * (d - &cross - cross.transpose()) * gamma.transpose() - d
    };
    let map = |p: &DMatrix<f64>| core(p) + &ggt;
    let full_residual = |p: &DMatrix<f64>| map(p) - p;
    let fixed = match iterate_from_zero(n, tol, &map) {
        Ok(sol) => return polish(sol, tol, &full_residual, &derivative),
        Err((e, last)) => (e, last),
    };
    log::debug!("gamma-form iteration failed ({}); tracking in t", fixed.0);
    let sigma_vec = DVector::from_column_slice(sigma);
    let admissible = |q: &DMatrix<f64>, t: f64| {
        let a = &gamma * q.column(0) + &sigma_vec - &g * t;
        hph(q) < 1.0 && is_schur(&Poly::monic(a.as_slice()))
    };

    let mut t = 0.0;
    let mut dt = 0.1;
    let mut p = DMatrix::zeros(n, n);
    let mut prev: Option<(f64, DMatrix<f64>)> = None;
    let mut steps = 0usize;
    while t < 1.0 {
        let tn = f64::min(t + dt, 1.0);
        let residual = |q: &DMatrix<f64>| core(q) + &ggt * (tn * tn) - q;
        let guess = match &prev {
            Some((tp, pp)) => &p + (&p - pp) * ((tn - t) / (t - tp)),
            None => p.clone(),
        };
        let corrected = sym_newton(guess, tol, &residual, &derivative, 25).and_then(|(q, r, it)| {
            if admissible(&q, tn) {
                Ok((q, r, it))
            } else {
                Err(Error::InvalidBranch { hph: hph(&q) })
            }
        });
        match corrected {
            Ok((q, _, it)) => {
                steps += it;
                prev = Some((t, std::mem::replace(&mut p, q)));
                t = tn;
                if it <= 4 {
                    dt = f64::min(dt * 2.0, 0.5);
                } else if it > 8 {
                    dt *= 0.5;
                }
            }
            Err(e) => {
                dt *= 0.5;
                if dt < 1e-9 {
                    return Err(e);
                }
            }
        }
    }
    let res = (map(&p) - &p).norm();
    Ok(AreSolution {
        p,
        iterations: fixed.1.iterations + steps,
        residual: res,
        min_increment_eig: fixed.1.min_increment_eig,
        polished: true,
    })
}

#[derive(Clone, Debug)]
pub struct GainPair {
    /// `(g − FPh)/ρ`.
    pub k_riccati: DVector<f64>,
    /// `ρ(σ − a)`.
    pub k_zeros: DVector<f64>,
    pub rho: f64,
    pub gap: f64,
}

/// Both expressions for the spectral-factor gain at a Riccati solution.
pub fn k_and_rho(p: &DMatrix<f64>, sigma: &[f64], a: &[f64], g: &[f64]) -> Result<GainPair> {
    let real = CompanionRealization::new(a, g)?;
    if sigma.len() != a.len() {
        return Err(Error::DimensionMismatch { expected: a.len(), got: sigma.len() });
    }
    if p.nrows() != a.len() || p.ncols() != a.len() {
        return Err(Error::DimensionMismatch { expected: a.len(), got: p.nrows() });
    }
    let hph = if a.is_empty() { 0.0 } else { p[(0, 0)] };
    if hph >= 1.0 {
        return Err(Error::InvalidBranch { hph });
    }
    let rho = (1.0 - hph).sqrt();
    let k_riccati = if a.is_empty() {
        DVector::zeros(0)
    } else {
        (&real.g - &real.f * p.column(0)) / rho
    };
    let k_zeros = DVector::from_iterator(a.len(), sigma.iter().zip(a).map(|(s, x)| rho * (s - x)));
    let gap = (&k_riccati - &k_zeros).amax();
    Ok(GainPair { k_riccati, k_zeros, rho, gap })
}

#[derive(Clone, Debug)]
pub struct RiccatiFormsReport {
    pub p_f_form: DMatrix<f64>,
    pub p_gamma_form: DMatrix<f64>,
    pub difference: f64,
    pub pass: bool,
}

/// Solves the `F`-form and `Γ`-form equations independently and compares.
pub fn verify_riccati_forms(a: &[f64], g: &[f64], sigma: &[f64], tol: f64) -> Result<RiccatiFormsReport> {
    let iter_tol = (tol * 1e-4).max(1e-15);
    let f_form = solve_are_minimal(a, g, iter_tol)?;
    let gamma_form = solve_gamma_form(sigma, g, iter_tol)?;
    let difference = (&f_form.p - &gamma_form.p).norm();
    Ok(RiccatiFormsReport {
        p_f_form: f_form.p,
        p_gamma_form: gamma_form.p,
        difference,
        pass: difference <= tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn g_examples() {
        assert_eq!(g_from_ab(&[0.3, 0.2], &[0.3, 0.2]).unwrap(), vec![0.0, 0.0]);
        assert_eq!(g_from_ab(&[-0.5], &[0.5]).unwrap(), vec![0.5]);
        assert_eq!(b_from_ag(&[-0.5], &[0.5]), vec![0.5]);
        assert!(g_from_ab(&[1.0], &[]).is_err());
    }

    #[test]
    fn scalar_resolvent() {
        let r = CompanionRealization::new(&[-0.5], &[0.5]).unwrap();
        assert_abs_diff_eq!(eval_f_realization(&r, c(2.0)).unwrap().re, 5.0 / 6.0, epsilon = 1e-15);
        assert_abs_diff_eq!(eval_f_realization(&r, c(3.0)).unwrap().re, 0.7, epsilon = 1e-15);
        let flat = CompanionRealization::new(&[0.2, -0.1], &[0.0, 0.0]).unwrap();
        let v = eval_f_realization(&flat, Complex64::new(0.3, 1.7)).unwrap();
        assert_eq!(v, c(0.5));
        assert!(matches!(eval_f_realization(&r, c(0.5)), Err(Error::NearPole { .. })));
    }

    #[test]
    fn are_scalar_case() {
        let s = solve_are_minimal(&[-0.5], &[0.5], 1e-14).unwrap();
        assert_abs_diff_eq!(s.p[(0, 0)], 0.25, epsilon = 1e-12);
        let z = solve_are_minimal(&[0.3, 0.1], &[0.0, 0.0], 1e-14).unwrap();
        assert_eq!(z.p, DMatrix::zeros(2, 2));
    }

    #[test]
    fn gain_scalar_case() {
        let p = DMatrix::from_element(1, 1, 0.25);
        let k = k_and_rho(&p, &[0.0], &[-0.5], &[0.5]).unwrap();
        assert_abs_diff_eq!(k.rho, 0.75f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(k.k_riccati[0], 0.433_012_701_892_219_3, epsilon = 1e-12);
        assert!(k.gap <= 1e-12);
        let w = SpectralFactorRealization::from_filter(&[-0.5], &[0.0], k.rho).unwrap();
        let z = c(2.0);
        assert_abs_diff_eq!(w.eval(z).unwrap().re, k.rho * 2.0 / 1.5, epsilon = 1e-12);
        let flat = k_and_rho(&DMatrix::zeros(1, 1), &[0.4], &[0.4], &[0.0]).unwrap();
        assert_eq!(flat.k_zeros[0], 0.0);
        assert_eq!(flat.rho, 1.0);
    }

    #[test]
    fn riccati_forms_scalar_case() {
        let r = verify_riccati_forms(&[-0.5], &[0.5], &[0.0], 1e-10).unwrap();
        assert!(r.pass);
        assert_abs_diff_eq!(r.p_gamma_form[(0, 0)], 0.25, epsilon = 1e-12);
        let z = verify_riccati_forms(&[0.2], &[0.0], &[0.2], 1e-10).unwrap();
        assert_eq!(z.difference, 0.0);
    }

    #[test]
    fn gain_needs_valid_branch() {
        let p = DMatrix::from_element(1, 1, 1.0);
        assert!(matches!(k_and_rho(&p, &[0.0], &[0.0], &[0.0]), Err(Error::InvalidBranch { .. })));
    }
}
