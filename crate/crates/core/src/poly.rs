//! Real polynomials in descending powers, Schur stability, and the rational
//! positive-real function `f(z) = b(z) / (2 a(z))` with its spectral factor
//! `w(z) = ρ σ(z) / a(z)`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::{Error, Result};

/// Dense real polynomial, coefficients in descending powers:
/// `coeffs[0] z^n + coeffs[1] z^{n-1} + ... + coeffs[n]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Poly {
    coeffs: Vec<f64>,
}

impl Poly {
    /// Panics on an empty coefficient vector.
    pub fn new(coeffs: Vec<f64>) -> Self {
        assert!(!coeffs.is_empty(), "polynomial needs at least one coefficient");
        Poly { coeffs }
    }

    /// `z^n + tail[0] z^{n-1} + ... + tail[n-1]`.
    pub fn monic(tail: &[f64]) -> Self {
        let mut coeffs = Vec::with_capacity(tail.len() + 1);
        coeffs.push(1.0);
        coeffs.extend_from_slice(tail);
        Poly { coeffs }
    }

    pub fn from_roots(roots: &[f64]) -> Self {
        roots
            .iter()
            .fold(Poly::monic(&[]), |acc, &r| acc.mul(&Poly::monic(&[-r])))
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn leading(&self) -> f64 {
        self.coeffs[0]
    }

    /// Coefficients after the leading one.
    pub fn tail(&self) -> &[f64] {
        &self.coeffs[1..]
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        self.coeffs
            .iter()
            .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c)
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        let mut out = vec![0.0; self.coeffs.len() + other.coeffs.len() - 1];
        for (i, &x) in self.coeffs.iter().enumerate() {
            for (j, &y) in other.coeffs.iter().enumerate() {
                out[i + j] += x * y;
            }
        }
        Poly { coeffs: out }
    }

    /// `z^n p(1/z)`.
    pub fn reversed(&self) -> Poly {
        let mut c = self.coeffs.clone();
        c.reverse();
        Poly { coeffs: c }
    }

    pub fn scaled(&self, s: f64) -> Poly {
        Poly {
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
        }
    }
}

/// Reflection coefficients `k_1..k_n` of a polynomial via the Schur–Cohn
/// step-down recursion. Returns `None` as soon as some `|k_m| >= 1`
/// (or the leading coefficient is zero), i.e. exactly when the polynomial is
/// not Schur.
pub fn reflection_coefficients(p: &Poly) -> Option<Vec<f64>> {
    let lead = p.leading();
    if lead == 0.0 || !lead.is_finite() {
        return None;
    }
    let mut q: Vec<f64> = p.coeffs.iter().map(|c| c / lead).collect();
    let n = p.degree();
    let mut ks = vec![0.0; n];
    for m in (1..=n).rev() {
        let k = q[m];
        // NaN fails this too.
        if !(k.abs() < 1.0) {
            return None;
        }
        let d = 1.0 - k * k;
        let next: Vec<f64> = (0..m).map(|i| (q[i] - k * q[m - i]) / d).collect();
        ks[m - 1] = k;
        q = next;
    }
    Some(ks)
}

/// True iff every root of `p` lies strictly inside the unit circle.
/// Constant polynomials are Schur.
pub fn is_schur(p: &Poly) -> bool {
    reflection_coefficients(p).is_some()
}

/// Monic polynomial with all roots in the open unit disc.
#[derive(Clone, Debug, PartialEq)]
pub struct SchurPolynomial(Poly);

impl SchurPolynomial {
    /// From the non-leading coefficients `p_1..p_n` of a monic polynomial.
    pub fn new(tail: &[f64]) -> Result<Self> {
        let p = Poly::monic(tail);
        if is_schur(&p) {
            Ok(SchurPolynomial(p))
        } else {
            Err(Error::NotSchur)
        }
    }

    /// `z^n`, the maximum-entropy choice of spectral zeros.
    pub fn z_power(n: usize) -> Self {
        SchurPolynomial(Poly::monic(&vec![0.0; n]))
    }

    /// Levinson step-up from reflection coefficients, each in `(-1, 1)`.
    pub fn from_reflection(ks: &[f64]) -> Result<Self> {
        if let Some(k) = ks.iter().find(|k| !(k.abs() < 1.0)) {
            return Err(Error::InvalidArgument(format!(
                "reflection coefficient {k} outside (-1, 1)"
            )));
        }
        let mut p = vec![1.0];
        for &k in ks {
            let m = p.len();
            let mut next = vec![0.0; m + 1];
            for i in 0..=m {
                let fwd = if i < m { p[i] } else { 0.0 };
                let bwd = if i > 0 { p[m - i] } else { 0.0 };
                next[i] = fwd + k * bwd;
            }
            p = next;
        }
        Ok(SchurPolynomial(Poly::new(p)))
    }

    pub fn degree(&self) -> usize {
        self.0.degree()
    }

    /// `p_1..p_n`.
    pub fn coeffs(&self) -> &[f64] {
        self.0.tail()
    }

    pub fn as_poly(&self) -> &Poly {
        &self.0
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        self.0.eval(z)
    }
}

/// `f(z) = b(z) / (2 a(z))` with `deg a = deg b`.
///
/// Positive-realness is not enforced on construction: partial realizations
/// of covariance data can legitimately produce non-positive-real pairs, and
/// [`positive_real_min`] exists to detect exactly that.
#[derive(Clone, Debug, PartialEq)]
pub struct RationalPR {
    a: Poly,
    b: Poly,
}

impl RationalPR {
    pub fn new(a: Poly, b: Poly) -> Result<Self> {
        if a.degree() != b.degree() {
            return Err(Error::DimensionMismatch {
                expected: a.degree(),
                got: b.degree(),
            });
        }
        if a.leading() == 0.0 {
            return Err(Error::InvalidArgument("denominator has zero leading coefficient".into()));
        }
        Ok(RationalPR { a, b })
    }

    pub fn a(&self) -> &Poly {
        &self.a
    }

    pub fn b(&self) -> &Poly {
        &self.b
    }

    pub fn degree(&self) -> usize {
        self.a.degree()
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        self.b.eval(z) / (self.a.eval(z) * 2.0)
    }
}

/// Coefficients `c_1..c_m` of `f(z) = 1/2 + c_1 z^{-1} + c_2 z^{-2} + ...`.
pub fn laurent_coeffs(f: &RationalPR, m: usize) -> Result<Vec<f64>> {
    let a = f.a.coeffs();
    let b = f.b.coeffs();
    let n = f.degree();
    let q0 = b[0] / a[0];
    if (q0 - 1.0).abs() > 1e-12 {
        return Err(Error::ConstantTermMismatch { got: 0.5 * q0 });
    }
    // b(z)/a(z) as a power series in w = 1/z.
    let mut q = Vec::with_capacity(m + 1);
    q.push(q0);
    for k in 1..=m {
        let bk = if k <= n { b[k] } else { 0.0 };
        let acc: f64 = (1..=k.min(n)).map(|j| a[j] * q[k - j]).sum();
        q.push((bk - acc) / a[0]);
    }
    Ok(q[1..].iter().map(|x| 0.5 * x).collect())
}

/// Solves `a(z) b(1/z) + b(z) a(1/z) = 2ρ² σ(z) σ(1/z)` for `b`.
///
/// Matching the coefficients of `z^0..z^n` gives an `(n+1) × (n+1)` system
/// in `b_0..b_n`. The leading coefficient `b_0` equals the variance `c_0`
/// implied by `ρ`; it is 1 exactly when `ρ` is the unit-variance gain
/// returned by [`unit_variance_rho`].
pub fn solve_b(a: &Poly, sigma: &Poly, rho: f64) -> Result<Poly> {
    let n = a.degree();
    if sigma.degree() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: sigma.degree(),
        });
    }
    if !(rho > 0.0) {
        return Err(Error::InvalidArgument(format!("rho must be positive, got {rho}")));
    }
    let ac = a.coeffs();
    let sc = sigma.coeffs();
    let at = |i: usize| if i <= n { ac[i] } else { 0.0 };
    let m = DMatrix::from_fn(n + 1, n + 1, |k, j| {
        let mut v = at(j + k);
        if j >= k {
            v += at(j - k);
        }
        v
    });
    let rhs = DVector::from_fn(n + 1, |k, _| {
        2.0 * rho * rho * (0..=n - k).map(|i| sc[i] * sc[i + k]).sum::<f64>()
    });
    let b = m
        .lu()
        .solve(&rhs)
        .ok_or(Error::Singular { context: "spectral-factor system" })?;
    if b.iter().any(|x| !x.is_finite()) {
        return Err(Error::Singular { context: "spectral-factor system" });
    }
    Ok(Poly::new(b.iter().copied().collect()))
}

/// The gain `ρ` for which `solve_b(a, σ, ρ)` is monic, i.e. `c_0 = 1`.
pub fn unit_variance_rho(a: &Poly, sigma: &Poly) -> Result<f64> {
    let b = solve_b(a, sigma, 1.0)?;
    if !(b.leading() > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "implied variance {} is not positive",
            b.leading()
        )));
    }
    Ok(1.0 / b.leading().sqrt())
}

/// Max coefficient deviation in `a b* + b a* − 2ρ²σσ*`, computed by direct
/// polynomial multiplication and divided by the largest coefficient magnitude
/// among the three products (floored at 1).
pub fn spectral_identity_residual(a: &Poly, b: &Poly, sigma: &Poly, rho: f64) -> f64 {
    let lhs1 = a.mul(&b.reversed());
    let lhs2 = b.mul(&a.reversed());
    let rhs = sigma.mul(&sigma.reversed()).scaled(2.0 * rho * rho);
    let len = lhs1
        .coeffs()
        .len()
        .max(lhs2.coeffs().len())
        .max(rhs.coeffs().len());
    // Align on the constant (z^0 after the z^{-n} shift) term, which sits at
    // the center of each symmetric coefficient array.
    let get = |p: &Poly, k: usize| {
        let off = (len - p.coeffs().len()) / 2;
        if k >= off && k - off < p.coeffs().len() {
            p.coeffs()[k - off]
        } else {
            0.0
        }
    };
    let scale = (0..len)
        .map(|k| get(&lhs1, k).abs().max(get(&lhs2, k).abs()).max(get(&rhs, k).abs()))
        .fold(1.0, f64::max);
    (0..len)
        .map(|k| (get(&lhs1, k) + get(&lhs2, k) - get(&rhs, k)).abs())
        .fold(0.0, f64::max)
        / scale
}

/// Minimum-phase shaping filter `w(z) = ρ σ(z) / a(z)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ShapingFilter {
    pub sigma: SchurPolynomial,
    pub a: SchurPolynomial,
    pub rho: f64,
}

impl ShapingFilter {
    pub fn new(sigma: SchurPolynomial, a: SchurPolynomial, rho: f64) -> Result<Self> {
        if sigma.degree() != a.degree() {
            return Err(Error::DimensionMismatch {
                expected: a.degree(),
                got: sigma.degree(),
            });
        }
        if !(rho > 0.0) {
            return Err(Error::InvalidArgument(format!("rho must be positive, got {rho}")));
        }
        Ok(ShapingFilter { sigma, a, rho })
    }

    /// Filter normalized so that the output has unit variance.
    pub fn unit_variance(sigma: SchurPolynomial, a: SchurPolynomial) -> Result<Self> {
        let rho = unit_variance_rho(a.as_poly(), sigma.as_poly())?;
        ShapingFilter::new(sigma, a, rho)
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        self.sigma.eval(z) / self.a.eval(z) * self.rho
    }

    /// The positive-real `f` with `f(z) + f(1/z) = w(z) w(1/z)`.
    pub fn paired_f(&self) -> Result<RationalPR> {
        let b = solve_b(self.a.as_poly(), self.sigma.as_poly(), self.rho)?;
        RationalPR::new(self.a.as_poly().clone(), b)
    }
}

/// Uniform grid on `[0, π]` with both endpoints; real coefficients make the
/// other half of the circle redundant.
pub fn theta_grid(samples: usize) -> impl Iterator<Item = f64> {
    let step = if samples > 1 { PI / (samples - 1) as f64 } else { 0.0 };
    (0..samples).map(move |j| if j + 1 == samples && j > 0 { PI } else { j as f64 * step })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridMin {
    pub value: f64,
    pub theta: f64,
}

/// Minimum of `Re f(e^{iθ})` over [`theta_grid`].
pub fn positive_real_min(f: &RationalPR, samples: usize) -> Result<GridMin> {
    let n = f.degree();
    if samples < 2 * n + 1 || samples < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least {} samples, got {samples}",
            (2 * n + 1).max(2)
        )));
    }
    let scale: f64 = f.a.coeffs().iter().map(|c| c.abs()).sum();
    let mut best = GridMin {
        value: f64::INFINITY,
        theta: 0.0,
    };
    for theta in theta_grid(samples) {
        let z = Complex64::from_polar(1.0, theta);
        let den = f.a.eval(z);
        if den.norm() <= 1e-12 * scale {
            return Err(Error::PoleOnCircle { theta });
        }
        let v = (f.b.eval(z) / (den * 2.0)).re;
        if v < best.value {
            best = GridMin { value: v, theta };
        }
    }
    Ok(best)
}

/// `Φ(e^{iθ}) = ρ² |σ(e^{iθ})|² / |a(e^{iθ})|²`.
pub fn spectral_density(w: &ShapingFilter, theta: f64) -> f64 {
    w.eval(Complex64::from_polar(1.0, theta)).norm_sqr()
}
