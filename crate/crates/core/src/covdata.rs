//! Covariance data: ergodic estimation, Toeplitz positivity, the `(u, U)`
//! parameters of the CEE, and algebraic degree through Hankel rank.

use nalgebra::{DMatrix, DVector};

use crate::linalg::{self, lower_toeplitz};
use crate::poly::{Poly, RationalPR};
use crate::{Error, Result};

/// `c_0, c_1, ..., c_n`, stored normalized to `c_0 = 1` together with the
/// original `c_0`.
#[derive(Clone, Debug, PartialEq)]
pub struct CovarianceSequence {
    c: Vec<f64>,
    scale: f64,
}

impl CovarianceSequence {
    /// Normalizes by `raw[0]`, which must be positive.
    pub fn from_raw(raw: &[f64]) -> Result<Self> {
        let c0 = *raw
            .first()
            .ok_or_else(|| Error::InvalidArgument("empty covariance sequence".into()))?;
        if raw.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument("non-finite covariance lag".into()));
        }
        if !(c0 > 0.0) {
            return Err(Error::InvalidArgument(format!("c_0 must be positive, got {c0}")));
        }
        Ok(CovarianceSequence {
            c: raw.iter().map(|x| x / c0).collect(),
            scale: c0,
        })
    }

    /// `c_k = 0.5^k`-style sequences and other already-normalized data.
    pub fn normalized(lags: &[f64]) -> Self {
        let mut c = Vec::with_capacity(lags.len() + 1);
        c.push(1.0);
        c.extend_from_slice(lags);
        CovarianceSequence { c, scale: 1.0 }
    }

    /// Order `n` (number of lags beyond `c_0`).
    pub fn order(&self) -> usize {
        self.c.len() - 1
    }

    /// Normalized `c_0..c_n` (`c_0 = 1`).
    pub fn values(&self) -> &[f64] {
        &self.c
    }

    /// `c_1..c_n`.
    pub fn lags(&self) -> &[f64] {
        &self.c[1..]
    }

    /// The `c_0` divided out on ingestion.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn raw(&self) -> Vec<f64> {
        self.c.iter().map(|x| x * self.scale).collect()
    }

    pub fn toeplitz(&self) -> DMatrix<f64> {
        let n = self.c.len();
        DMatrix::from_fn(n, n, |i, j| self.c[i.abs_diff(j)])
    }

    /// `λ_min` of the normalized Toeplitz matrix.
    pub fn toeplitz_min_eig(&self) -> f64 {
        toeplitz_min_eig(&self.c)
    }

    pub fn is_positive(&self) -> bool {
        self.toeplitz_min_eig() > 0.0
    }
}

/// Smallest eigenvalue of the symmetric Toeplitz matrix built from `c`.
pub fn toeplitz_min_eig(c: &[f64]) -> f64 {
    let n = c.len();
    if n == 0 {
        return f64::INFINITY;
    }
    let t = DMatrix::from_fn(n, n, |i, j| c[i.abs_diff(j)]);
    t.symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// `y_0, ..., y_N`.
#[derive(Clone, Debug, PartialEq)]
pub struct ObservationRecord(Vec<f64>);

impl ObservationRecord {
    pub fn new(y: Vec<f64>) -> Result<Self> {
        if y.len() < 2 {
            return Err(Error::InvalidArgument("record needs at least two samples".into()));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite sample in record".into()));
        }
        Ok(ObservationRecord(y))
    }

    /// `N`, one less than the number of samples.
    pub fn len_n(&self) -> usize {
        self.0.len() - 1
    }

    pub fn samples(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Estimator {
    /// Divide every lag by `N + 1`; the Toeplitz matrix is a Gram matrix and
    /// hence positive semidefinite.
    #[default]
    Biased,
    /// Divide lag `k` by `N + 1 − k`. Positivity can fail.
    Unbiased,
}

/// Ergodic covariance estimates for lags `0..=max_lag`.
pub fn estimate_covariances(
    y: &ObservationRecord,
    max_lag: usize,
    estimator: Estimator,
) -> Result<CovarianceSequence> {
    let n_big = y.len_n();
    if max_lag > n_big {
        return Err(Error::InvalidArgument(format!(
            "max lag {max_lag} exceeds record length N = {n_big}"
        )));
    }
    let s = y.samples();
    let raw: Vec<f64> = (0..=max_lag)
        .map(|k| {
            let sum: f64 = (0..=n_big - k).map(|t| s[t + k] * s[t]).sum();
            let denom = match estimator {
                Estimator::Biased => n_big + 1,
                Estimator::Unbiased => n_big + 1 - k,
            };
            sum / denom as f64
        })
        .collect();
    if raw[0] == 0.0 {
        return Err(Error::ZeroRecord);
    }
    CovarianceSequence::from_raw(&raw)
}

/// `u` and the strictly lower-triangular `U` of the CEE.
#[derive(Clone, Debug, PartialEq)]
pub struct CovParams {
    pub u: DVector<f64>,
    pub big_u: DMatrix<f64>,
}

impl CovParams {
    pub fn dim(&self) -> usize {
        self.u.len()
    }
}

/// Expands `z^n / (z^n + c_1 z^{n-1} + ... + c_n) = 1 − Σ u_k z^{-k}`.
pub fn build_cov_params(c: &CovarianceSequence) -> CovParams {
    let lags = c.lags();
    let n = lags.len();
    let mut u = vec![0.0; n];
    for k in 0..n {
        // c_k = u_k + Σ_{j<k} c_{k−j} u_j
        let acc: f64 = (0..k).map(|j| lags[k - j - 1] * u[j]).sum();
        u[k] = lags[k] - acc;
    }
    let mut col = vec![0.0; n];
    if n > 1 {
        col[1..].copy_from_slice(&u[..n - 1]);
    }
    CovParams {
        u: DVector::from_vec(u),
        big_u: lower_toeplitz(&col),
    }
}

/// Unit lower-triangular Toeplitz `C` with first column `(1, c_1, ..., c_{n−1})`.
pub fn c_matrix(c: &CovarianceSequence) -> DMatrix<f64> {
    let n = c.order();
    lower_toeplitz(&c.values()[..n])
}

/// `(‖Cu − c‖_max, ‖C(I − U) − I‖_max)`.
pub fn cov_param_identity_residuals(c: &CovarianceSequence, p: &CovParams) -> (f64, f64) {
    let n = c.order();
    let cm = c_matrix(c);
    let lags = DVector::from_column_slice(c.lags());
    let r1 = linalg::max_abs(&(&cm * &p.u - lags));
    let id = DMatrix::<f64>::identity(n, n);
    let r2 = (&cm * (&id - &p.big_u) - &id).amax();
    (r1, r2)
}

/// Hankel matrix with entries `c_{i+j+1}` (rows `i`, columns `j`, zero based).
pub fn hankel(lags: &[f64], rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |i, j| lags[i + j])
}

/// Numerical rank of the Hankel matrices of `c_1..c_n`.
///
/// For `r = 1..⌈n/2⌉` the `r × (n − r + 1)` Hankel matrix uses every
/// available lag; the largest of their ranks is returned. Ranks count singular
/// values above `rank_tol` times the largest one.
pub fn algebraic_degree(c: &CovarianceSequence, rank_tol: f64) -> usize {
    let lags = c.lags();
    let n = lags.len();
    (1..=n.div_ceil(2))
        .map(|r| {
            let h = hankel(lags, r, n - r + 1);
            let s = linalg::singular_values(&h);
            match s.first() {
                Some(&top) if top > 0.0 => s.iter().filter(|&&x| x > rank_tol * top).count(),
                _ => 0,
            }
        })
        .max()
        .unwrap_or(0)
}

/// Deterministic partial realization of minimal (algebraic) degree.
#[derive(Clone, Debug)]
pub struct PartialRealization {
    pub f: RationalPR,
    pub degree: usize,
    /// Condition number of the Hankel system that produced `a`.
    pub condition: f64,
}

/// Solves the Hankel system for `a` and the lower-triangular system for `b`.
/// The result matches `c_1..c_{min(2d, n)}` but need not be positive real.
pub fn partial_realization(c: &CovarianceSequence, rank_tol: f64) -> Result<PartialRealization> {
    let d = algebraic_degree(c, rank_tol);
    let lags = c.lags();
    let n = lags.len();
    if d == 0 {
        let one = Poly::monic(&[]);
        return Ok(PartialRealization {
            f: RationalPR::new(one.clone(), one)?,
            degree: 0,
            condition: 1.0,
        });
    }
    // Rows of H_d (a_d, ..., a_1)' = −(c_{d+1}, ..., c_{2d})' that the data
    // can supply; row m is the z^{−m} coefficient of a(z)(1 + 2Σ c_j z^{−j}).
    let rows = (n - d).min(d);
    let h = hankel(lags, rows, d);
    let rhs = DVector::from_fn(rows, |i, _| -lags[d + i]);
    let condition = linalg::condition_number(&hankel(lags, d, d.min(n - d + 1).max(1)));
    let a_rev = if rows == d {
        if !condition.is_finite() || condition > 1.0 / rank_tol {
            return Err(Error::Singular { context: "Hankel system" });
        }
        h.lu()
            .solve(&rhs)
            .ok_or(Error::Singular { context: "Hankel system" })?
    } else {
        // Odd n: one equation short, take the minimum-norm solution.
        h.svd(true, true)
            .solve(&rhs, 1e-14)
            .map_err(|_| Error::Singular { context: "Hankel system" })?
    };
    let a = DVector::from_fn(d, |i, _| a_rev[d - 1 - i]);
    let mut col = vec![1.0];
    col.extend(lags[..d - 1].iter().map(|x| 2.0 * x));
    let two_c_minus_i = lower_toeplitz(&col);
    let b = DVector::from_fn(d, |i, _| 2.0 * lags[i]) + two_c_minus_i * &a;
    let f = RationalPR::new(Poly::monic(a.as_slice()), Poly::monic(b.as_slice()))?;
    Ok(PartialRealization {
        f,
        degree: d,
        condition,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::{is_schur, laurent_coeffs, positive_real_min};
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn estimate_examples() {
        let y = ObservationRecord::new(vec![1.0, -1.0, 1.0]).unwrap();
        let c = estimate_covariances(&y, 2, Estimator::Biased).unwrap();
        let raw = c.raw();
        assert_abs_diff_eq!(raw[0], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(raw[1], -2.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(raw[2], 1.0 / 3.0, epsilon = 1e-15);

        let y = ObservationRecord::new(vec![1.0; 4]).unwrap();
        let c = estimate_covariances(&y, 1, Estimator::Biased).unwrap();
        assert_abs_diff_eq!(c.raw()[1], 0.75, epsilon = 1e-15);
        let c = estimate_covariances(&y, 1, Estimator::Unbiased).unwrap();
        assert_abs_diff_eq!(c.raw()[1], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn estimate_errors() {
        let y = ObservationRecord::new(vec![0.0; 5]).unwrap();
        assert_eq!(estimate_covariances(&y, 2, Estimator::Biased), Err(Error::ZeroRecord));
        let y = ObservationRecord::new(vec![1.0, 2.0]).unwrap();
        assert!(estimate_covariances(&y, 2, Estimator::Biased).is_err());
        assert!(ObservationRecord::new(vec![1.0]).is_err());
    }

    #[test]
    fn biased_toeplitz_is_psd() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let len = rng.random_range(5..60);
            let y: Vec<f64> = (0..len).map(|_| rng.random_range(-1.0..1.0)).collect();
            let lags = rng.random_range(1..len.min(12));
            let c = estimate_covariances(&ObservationRecord::new(y).unwrap(), lags, Estimator::Biased)
                .unwrap();
            assert!(c.toeplitz_min_eig() >= -1e-12);
        }
    }

    #[test]
    fn toeplitz_eigs() {
        assert_abs_diff_eq!(toeplitz_min_eig(&[1.0, 0.0]), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(toeplitz_min_eig(&[1.0, 0.5]), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(toeplitz_min_eig(&[1.0, 1.0]), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn cov_params_examples() {
        let p = build_cov_params(&CovarianceSequence::normalized(&[0.0, 0.0, 0.0]));
        assert!(p.u.iter().all(|&x| x == 0.0));
        assert!(p.big_u.iter().all(|&x| x == 0.0));

        let c = CovarianceSequence::normalized(&[0.5, 0.25]);
        let p = build_cov_params(&c);
        assert_eq!(p.u.as_slice(), &[0.5, 0.0]);
        assert_eq!(p.big_u, DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.5, 0.0]));
        let (r1, r2) = cov_param_identity_residuals(&c, &p);
        assert_eq!((r1, r2), (0.0, 0.0));
    }

    #[test]
    fn series_product_vanishes() {
        // (1 + Σ c_k w^k)(1 − Σ u_k w^k) has zero w^1..w^n coefficients.
        let c = CovarianceSequence::normalized(&[0.3, -0.2, 0.1, 0.05, -0.04]);
        let p = build_cov_params(&c);
        let n = c.order();
        for k in 1..=n {
            let mut acc = c.values()[k] - p.u[k - 1];
            for j in 1..k {
                acc -= c.values()[k - j] * p.u[j - 1];
            }
            assert!(acc.abs() <= 1e-15);
        }
    }

    #[test]
    fn degree_examples() {
        let geo = CovarianceSequence::normalized(&[0.5, 0.25, 0.125, 0.0625]);
        assert_eq!(algebraic_degree(&geo, 1e-8), 1);
        let white = CovarianceSequence::normalized(&[0.0; 4]);
        assert_eq!(algebraic_degree(&white, 1e-8), 0);

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in [2usize, 4, 6, 8] {
            let lags: Vec<f64> = (0..n).map(|_| rng.random_range(-0.3..0.3)).collect();
            let c = CovarianceSequence::normalized(&lags);
            assert_eq!(algebraic_degree(&c, 1e-8), n / 2);
        }
    }

    #[test]
    fn partial_realization_geometric() {
        let geo = CovarianceSequence::normalized(&[0.5, 0.25, 0.125, 0.0625]);
        let pr = partial_realization(&geo, 1e-8).unwrap();
        assert_eq!(pr.degree, 1);
        assert_abs_diff_eq!(pr.f.a().tail()[0], -0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(pr.f.b().tail()[0], 0.5, epsilon = 1e-14);

        let white = CovarianceSequence::normalized(&[0.0; 3]);
        let pr = partial_realization(&white, 1e-8).unwrap();
        assert_eq!(pr.degree, 0);
        assert_eq!(pr.f.a(), pr.f.b());
    }

    #[test]
    fn partial_realization_matches_lags() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in [2usize, 3, 4, 5, 6] {
            let lags: Vec<f64> = (0..n).map(|_| rng.random_range(-0.3..0.3)).collect();
            let c = CovarianceSequence::normalized(&lags);
            let pr = partial_realization(&c, 1e-8).unwrap();
            let got = laurent_coeffs(&pr.f, n).unwrap();
            for (x, y) in got.iter().zip(&lags) {
                assert!((x - y).abs() <= 1e-8, "n={n}: {got:?} vs {lags:?}");
            }
        }
    }

    #[test]
    fn partial_realization_can_fail_positivity() {
        // Positive sequence whose degree-1 realization has its pole at 5/3.
        let c = CovarianceSequence::normalized(&[0.3, 0.5]);
        assert!(c.is_positive());
        let pr = partial_realization(&c, 1e-8).unwrap();
        assert_eq!(pr.degree, 1);
        assert!(!is_schur(pr.f.a()));

        // Stable pole but not positive real: (1, 0.6, 0.1) is positive,
        // a = z − 1/6 and b = z + 31/30 puts Re f(−1) below zero.
        let c = CovarianceSequence::normalized(&[0.6, 0.1]);
        assert!(c.is_positive());
        let pr = partial_realization(&c, 1e-8).unwrap();
        assert!(is_schur(pr.f.a()));
        assert!(positive_real_min(&pr.f, 1024).unwrap().value < 0.0);
    }
}
