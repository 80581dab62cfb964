use lapdeconv::laguerre::{
    self, expand, project_function, CoeffVector, LaguerreBasis, QuadratureConfig,
};
use lapdeconv::quadrature::{self, composite, gl32};
use proptest::prelude::*;

#[test]
fn gram_matrix_is_identity() {
    for a in [0.25, 0.5, 1.0] {
        let basis = LaguerreBasis::new(a, 20).unwrap();
        let hi = 120.0 / a;
        for j in 0..20 {
            for k in j..20 {
                let v = composite(
                    gl32(),
                    |t| basis.eval(j, t) * basis.eval(k, t),
                    0.0,
                    hi,
                    480,
                );
                let want = if j == k { 1.0 } else { 0.0 };
                assert!((v - want).abs() < 1e-8, "a={a} j={j} k={k}: {v}");
            }
        }
    }
}

#[test]
fn recurrence_stays_bounded() {
    // |L_k(x)| e^{-x/2} <= 1 for x >= 0.
    for a in [0.01, 0.5, 2.0] {
        let basis = LaguerreBasis::new(a, 65).unwrap();
        let bound = (2.0 * a).sqrt() * (1.0 + 1e-9);
        let mut vals = vec![0.0; 65];
        for i in 0..=2000 {
            let t = 0.1 * i as f64;
            basis.eval_into(t, &mut vals);
            for (k, v) in vals.iter().enumerate() {
                assert!(v.is_finite() && v.abs() <= bound, "a={a} k={k} t={t}: {v}");
            }
        }
    }
}

fn closure_error(a: f64, j: usize, k: usize, times: &[f64]) -> f64 {
    let basis = LaguerreBasis::new(a, 12).unwrap();
    let c = (2.0 * a).powf(-0.5);
    times
        .iter()
        .map(|&t| {
            let lhs =
                quadrature::adaptive(|x| basis.eval(k, x) * basis.eval(j, t - x), 0.0, t, 1e-13)
                    .unwrap();
            let rhs = c * (basis.eval(k + j, t) - basis.eval(k + j + 1, t));
            (lhs - rhs).abs()
        })
        .fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn convolution_closes_on_the_basis(a in 0.1f64..2.0, j in 0usize..6, k in 0usize..6) {
        let times: Vec<f64> = (1..=20).map(|i| i as f64 * 1.5 / a).collect();
        prop_assert!(closure_error(a, j, k, &times) < 1e-8);
    }

    #[test]
    fn project_then_expand_round_trips(
        a in 0.1f64..2.0,
        coeffs in prop::collection::vec(-2.0f64..2.0, 1..9),
    ) {
        let basis = LaguerreBasis::new(a, coeffs.len()).unwrap();
        let c = CoeffVector::new(coeffs.clone(), basis).unwrap();
        let back = project_function(|t| c.value(t), &basis, coeffs.len(), &QuadratureConfig::default()).unwrap();
        for (x, y) in back.coeffs().iter().zip(&coeffs) {
            prop_assert!((x - y).abs() < 1e-9, "{x} vs {y}");
        }
    }

    #[test]
    fn expand_matches_pointwise_value(
        a in 0.05f64..2.0,
        coeffs in prop::collection::vec(-2.0f64..2.0, 1..12),
        times in prop::collection::vec(0.0f64..200.0, 1..20),
    ) {
        let basis = LaguerreBasis::new(a, coeffs.len()).unwrap();
        let c = CoeffVector::new(coeffs, basis).unwrap();
        let v = expand(&c, &times).unwrap();
        for (t, x) in times.iter().zip(&v) {
            prop_assert!((c.value(*t) - x).abs() < 1e-12);
        }
    }
}

#[test]
fn scale_grid_is_log_spaced() {
    let g = laguerre::default_scale_grid();
    let r0 = g[1] / g[0];
    for w in g.windows(2) {
        assert!((w[1] / w[0] - r0).abs() < 1e-12);
    }
    assert!((g[31] - 2.0).abs() < 1e-12);
}
