use covext::poly::{laurent_coeffs, Poly, RationalPR, SchurPolynomial, ShapingFilter};
use covext::realization::{
    eval_a_over_b, eval_f_realization, g_from_ab, k_and_rho, solve_are_minimal, verify_riccati_forms,
    CompanionRealization, SpectralFactorRealization,
};
use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;

fn reflections(n: usize) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(-0.9f64..0.9, n)
}

fn pair(max_n: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (1usize..=max_n).prop_flat_map(|n| (reflections(n), reflections(n)))
}

fn point() -> impl Strategy<Value = Complex64> {
    (1.2f64..4.0, 0.0f64..std::f64::consts::TAU).prop_map(|(r, t)| Complex64::from_polar(r, t))
}

struct Filter {
    a: SchurPolynomial,
    sigma: SchurPolynomial,
    rho: f64,
    f: RationalPR,
    g: Vec<f64>,
}

fn filter(ka: &[f64], ks: &[f64]) -> Filter {
    let a = SchurPolynomial::from_reflection(ka).unwrap();
    let sigma = SchurPolynomial::from_reflection(ks).unwrap();
    let w = ShapingFilter::unit_variance(sigma.clone(), a.clone()).unwrap();
    let f = w.paired_f().unwrap();
    let g = g_from_ab(a.coeffs(), f.b().tail()).unwrap();
    Filter { a, sigma, rho: w.rho, f, g }
}

/// `det(zI − F)` by LU.
fn char_poly_at(f: &DMatrix<f64>, z: Complex64) -> Complex64 {
    let n = f.nrows();
    let m = DMatrix::from_fn(n, n, |i, j| if i == j { z } else { Complex64::new(0.0, 0.0) } - f[(i, j)]);
    m.determinant()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn companion_char_poly_is_a(tail in (1usize..=12).prop_flat_map(|n| proptest::collection::vec(-2.0f64..2.0, n)), z in point()) {
        let real = CompanionRealization::new(&tail, &vec![0.0; tail.len()]).unwrap();
        let a = Poly::monic(&tail);
        let det = char_poly_at(&real.f, z);
        let expect = a.eval(z);
        prop_assert!((det - expect).norm() <= 1e-10 * expect.norm().max(1.0));
        prop_assert_eq!(real.a(), tail);
    }

    #[test]
    fn state_space_matches_rational((ka, ks) in pair(8), z in point()) {
        let k = filter(&ka, &ks);
        let real = CompanionRealization::from_rational(&k.f).unwrap();
        let ss = eval_f_realization(&real, z).unwrap();
        let direct = k.f.eval(z);
        prop_assert!((ss - direct).norm() <= 1e-10 * direct.norm().max(1.0));
        let two = eval_f_realization(&real, Complex64::new(2.0, 0.0)).unwrap();
        let expect = k.f.eval(Complex64::new(2.0, 0.0));
        prop_assert!((two - expect).norm() <= 1e-12 * expect.norm().max(1.0));
    }

    #[test]
    fn reciprocal_form(( ka, ks) in pair(8), z in point()) {
        let k = filter(&ka, &ks);
        let real = CompanionRealization::from_rational(&k.f).unwrap();
        let lhs = k.a.eval(z) / k.f.b().eval(z);
        let rhs = eval_a_over_b(&real, z).unwrap();
        prop_assert!((lhs - rhs).norm() <= 1e-10 * lhs.norm().max(1.0));
    }

    #[test]
    fn spectral_factor_realization((ka, ks) in pair(8), z in point()) {
        let k = filter(&ka, &ks);
        let w = SpectralFactorRealization::from_filter(k.a.coeffs(), k.sigma.coeffs(), k.rho).unwrap();
        let expect = k.sigma.eval(z) * k.rho / k.a.eval(z);
        let got = w.eval(z).unwrap();
        prop_assert!((got - expect).norm() <= 1e-10 * expect.norm().max(1.0));
    }

    #[test]
    fn gain_formulas_agree((ka, ks) in pair(6)) {
        let k = filter(&ka, &ks);
        let are = solve_are_minimal(k.a.coeffs(), &k.g, 1e-14).unwrap();
        let gains = k_and_rho(&are.p, k.sigma.coeffs(), k.a.coeffs(), &k.g).unwrap();
        let scale = gains.k_zeros.amax().max(1.0);
        prop_assert!(gains.gap <= 1e-10 * scale, "gap {}", gains.gap);
        prop_assert!((gains.rho - k.rho).abs() <= 1e-10);
    }

    #[test]
    fn riccati_iterates_increase((ka, ks) in pair(6)) {
        let k = filter(&ka, &ks);
        let are = solve_are_minimal(k.a.coeffs(), &k.g, 1e-14).unwrap();
        prop_assert!(are.min_increment_eig >= -1e-10 * are.p.norm().max(1.0));
        prop_assert!(are.p[(0, 0)] < 1.0);
    }
}

#[test]
fn riccati_forms_agree_on_corpus() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0_f64;
    for _ in 0..100 {
        let n = rng.random_range(1..=6);
        let ka: Vec<f64> = (0..n).map(|_| rng.random_range(-0.95..0.95)).collect();
        let ks: Vec<f64> = (0..n).map(|_| rng.random_range(-0.95..0.95)).collect();
        let k = filter(&ka, &ks);
        let report = verify_riccati_forms(k.a.coeffs(), &k.g, k.sigma.coeffs(), 1e-8).unwrap();
        assert!(report.pass, "gap {} at {ka:?} {ks:?}", report.difference);
        worst = worst.max(report.difference);
    }
    assert!(worst <= 1e-8);
}

#[test]
fn riccati_solution_reproduces_covariances() {
    // P = E x x' for the state of w's realization, so h'Ph + ρ² = c_0 = 1.
    let k = filter(&[0.6, -0.2, 0.3], &[0.1, 0.4, -0.5]);
    let are = solve_are_minimal(k.a.coeffs(), &k.g, 1e-14).unwrap();
    assert!((are.p[(0, 0)] + k.rho * k.rho - 1.0).abs() <= 1e-10);
    let lags = laurent_coeffs(&k.f, 3).unwrap();
    assert!(lags.iter().all(|c| c.abs() < 1.0));
}
