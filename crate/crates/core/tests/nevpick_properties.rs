use covext::nevpick::{build_t, build_uu_np, solve_np, InterpolationData, NpOptions, TFactor};
use covext::poly::{SchurPolynomial, ShapingFilter};
use nalgebra::DVector;
use num_complex::Complex64;
use proptest::prelude::*;

fn re(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

fn reflections(n: usize) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(-0.8f64..0.8, n)
}

/// A real node and a conjugate pair, all outside the unit disc.
fn nodes3() -> impl Strategy<Value = Vec<Complex64>> {
    (1.5f64..4.0, 1.5f64..4.0, 0.3f64..2.5).prop_map(|(x, r, t)| {
        let p = Complex64::from_polar(r, t);
        vec![re(x), p, p.conj()]
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn degree_two_recovery(ka in reflections(2), ks in reflections(2), nodes in nodes3()) {
        let a = SchurPolynomial::from_reflection(&ka).unwrap();
        let sigma = SchurPolynomial::from_reflection(&ks).unwrap();
        let f = ShapingFilter::unit_variance(sigma.clone(), a.clone()).unwrap().paired_f().unwrap();
        let data = InterpolationData::from_function(&f, nodes).unwrap();
        let sol = solve_np(&data, &sigma, &NpOptions::default()).unwrap();
        let err = sol.solution.a.coeffs().iter().zip(a.coeffs()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        prop_assert!(err <= 1e-6, "a error {err}");
        prop_assert!(sol.interp_residual <= 1e-8);
        prop_assert!((sol.scale - 1.0).abs() <= 1e-6);
    }

    #[test]
    fn conjugate_closed_data_gives_real_parameters(nodes in nodes3(), v in (0.2f64..3.0, 0.2f64..3.0, -2.0f64..2.0)) {
        let values = vec![re(v.0), Complex64::new(v.1, v.2), Complex64::new(v.1, -v.2)];
        let data = InterpolationData::new(nodes, values).unwrap();
        let t = build_t(&data, TFactor::Corrected).unwrap();
        prop_assert!(t.iter().all(|x| x.is_finite()));
        if let Ok(p) = build_uu_np(t) {
            prop_assert_eq!(p.u.len(), 2);
            prop_assert_eq!(p.big_u.shape(), (2, 2));
        }
    }
}

#[test]
fn interpolant_satisfies_t_relation() {
    // T[1; a] = [0; g] at the true filter, with g = (b − a)/2.
    let a = SchurPolynomial::from_reflection(&[0.4, -0.3, 0.2]).unwrap();
    let sigma = SchurPolynomial::from_reflection(&[0.1, 0.5, -0.2]).unwrap();
    let f = ShapingFilter::unit_variance(sigma.clone(), a.clone()).unwrap().paired_f().unwrap();
    let nodes = vec![re(2.0), re(-3.0), Complex64::new(1.5, 1.5), Complex64::new(1.5, -1.5)];
    let data = InterpolationData::from_function(&f, nodes).unwrap();
    let t = build_t(&data, TFactor::Corrected).unwrap();
    let mut one_a = vec![1.0];
    one_a.extend_from_slice(a.coeffs());
    let lhs = &t * DVector::from_vec(one_a);
    assert!(lhs[0].abs() <= 1e-10, "{}", lhs[0]);
    for j in 0..3 {
        let g = 0.5 * (f.b().tail()[j] - a.coeffs()[j]);
        assert!((lhs[j + 1] - g).abs() <= 1e-10);
    }
}

#[test]
fn worked_two_point_problem() {
    let data = InterpolationData::new(vec![re(2.0), re(3.0)], vec![re(5.0 / 6.0), re(0.7)]).unwrap();
    let sigma = SchurPolynomial::new(&[0.0]).unwrap();
    let sol = solve_np(&data, &sigma, &NpOptions::default()).unwrap();
    assert!((sol.solution.a.coeffs()[0] + 0.5).abs() <= 1e-10);
    assert!((sol.solution.b.tail()[0] - 0.5).abs() <= 1e-10);
    assert!((sol.solution.rho - 0.75f64.sqrt()).abs() <= 1e-10);
    assert!(sol.interp_residual <= 1e-12);
}

#[test]
fn non_conjugate_data_is_rejected() {
    let r = InterpolationData::new(
        vec![Complex64::new(2.0, 1.0), Complex64::new(2.0, -1.0)],
        vec![re(1.0), re(2.0)],
    );
    assert!(r.is_err());
}
