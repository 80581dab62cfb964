use lapdeconv::laguerre::{project_function, CoeffVector, LaguerreBasis, QuadratureConfig};
use lapdeconv::quadrature::{composite, gl32};
use lapdeconv::simulate::{true_convolution, Kernel, KernelKind, TargetKind};
use lapdeconv::toeplitz::{build_g, symbol_eval, LowerToeplitz};
use num_complex::Complex64;
use proptest::prelude::*;
use rustfft::FftPlanner;

/// `b_k` as the discrete Fourier coefficients of `N` symbol samples. The
/// sample at θ = 0 is the limit `G(∞) = 0`.
fn fft_coefficients<F: Fn(Complex64) -> Complex64>(laplace: F, a: f64, n: usize) -> Vec<f64> {
    let mut buf: Vec<Complex64> = (0..n)
        .map(|j| {
            if j == 0 {
                Complex64::new(0.0, 0.0)
            } else {
                let theta = std::f64::consts::TAU * j as f64 / n as f64;
                symbol_eval(&laplace, a, theta).unwrap()
            }
        })
        .collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    buf.iter().map(|c| c.re / n as f64).collect()
}

fn projected(kernel: &Kernel, a: f64, m: usize) -> CoeffVector {
    let basis = LaguerreBasis::new(a, m).unwrap();
    project_function(|t| kernel.eval(t), &basis, m, &QuadratureConfig::default()).unwrap()
}

#[test]
fn g2_symbol_fourier_coefficients_match_first_column() {
    let kernel = Kernel::new(KernelKind::G2, 100.0).unwrap();
    for a in [0.0922, 0.25, 0.5] {
        let g = build_g(&projected(&kernel, a, 24), 24).unwrap();
        let b = fft_coefficients(|s| kernel.laplace(s).unwrap(), a, 1024);
        for k in 0..24 {
            assert!(
                (b[k] - g.first_col()[k]).abs() < 1e-6,
                "a={a} k={k}: {} vs {}",
                b[k],
                g.first_col()[k]
            );
        }
    }
}

#[test]
fn g3_symbol_fourier_coefficients_match_first_column() {
    let kernel = Kernel::new(KernelKind::G3, 100.0).unwrap();
    // No closed form: the transform on the imaginary axis by quadrature.
    let laplace = |s: Complex64| {
        let re = composite(
            gl32(),
            |t| kernel.eval(t) * (-s * t).exp().re,
            0.0,
            400.0,
            1600,
        );
        let im = composite(
            gl32(),
            |t| kernel.eval(t) * (-s * t).exp().im,
            0.0,
            400.0,
            1600,
        );
        Complex64::new(re, im)
    };
    let a = 0.2572;
    let g = build_g(&projected(&kernel, a, 24), 24).unwrap();
    let b = fft_coefficients(laplace, a, 256);
    for k in 0..24 {
        assert!(
            (b[k] - g.first_col()[k]).abs() < 1e-6,
            "k={k}: {} vs {}",
            b[k],
            g.first_col()[k]
        );
    }
}

#[test]
fn finite_kernel_expansion_gives_banded_operator() {
    for k in 1..8 {
        let basis = LaguerreBasis::new(0.4, 20).unwrap();
        let coeffs: Vec<f64> = (0..20)
            .map(|i| if i < k { 1.0 + 0.5 * i as f64 } else { 0.0 })
            .collect();
        let g = build_g(&CoeffVector::new(coeffs, basis).unwrap(), 20).unwrap();
        assert_eq!(g.bandwidth(), k + 1);
        assert!(g.first_col()[k + 1..].iter().all(|&b| b == 0.0));
    }
}

#[test]
fn forward_model_coefficients_agree() {
    let kernel = Kernel::new(KernelKind::G2, 100.0).unwrap();
    let f = TargetKind::F1;
    let a = 0.0922;
    let m = 11;
    let basis = LaguerreBasis::new(a, m).unwrap();
    let quad = QuadratureConfig::default();
    let g = build_g(&projected(&kernel, a, m), m).unwrap();
    let fc = project_function(|t| f.eval(t), &basis, m, &quad).unwrap();
    let via_g = g.mul(fc.coeffs()).unwrap();
    let q = |t: f64| true_convolution(|x| kernel.eval(x), |x| f.eval(x), t).unwrap();
    let direct = project_function(q, &basis, m, &quad).unwrap();
    for k in 0..m {
        assert!(
            (via_g[k] - direct.coeffs()[k]).abs() < 1e-5,
            "k={k}: {} vs {}",
            via_g[k],
            direct.coeffs()[k]
        );
    }
}

fn first_column() -> impl Strategy<Value = Vec<f64>> {
    (
        0.5f64..2.0,
        prop::bool::ANY,
        prop::collection::vec(-1.0f64..1.0, 0..15),
    )
        .prop_map(|(b0, neg, rest)| {
            let mut c = vec![if neg { -b0 } else { b0 }];
            c.extend(rest);
            c
        })
}

proptest! {
    #[test]
    fn solve_inverts_mul(col in first_column(), seed in prop::collection::vec(-3.0f64..3.0, 16)) {
        let g = LowerToeplitz::new(col).unwrap();
        let x = &seed[..g.size()];
        let y = g.mul(x).unwrap();
        let back = g.solve(&y).unwrap();
        // Forward substitution is backward stable: the residual is small
        // even when the inverse has grown.
        let again = g.mul(&back).unwrap();
        let norm_g: f64 = g.first_col().iter().map(|b| b.abs()).sum();
        let norm_x = back.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        for (u, v) in again.iter().zip(&y) {
            prop_assert!((u - v).abs() < 1e-13 * norm_g * norm_x * g.size() as f64, "{u} vs {v}");
        }
        if g.first_col()[0].abs() >= 1.0 && g.size() <= 4 {
            for (u, v) in back.iter().zip(x) {
                prop_assert!((u - v).abs() < 1e-9, "{u} vs {v}");
            }
        }
    }

    #[test]
    fn leading_blocks_nest(col in first_column(), y in prop::collection::vec(-3.0f64..3.0, 16)) {
        let g = LowerToeplitz::new(col).unwrap();
        let big = g.size();
        let y = &y[..big];
        let full = g.solve(y).unwrap();
        let dense = g.to_dense();
        for m in 1..=big {
            let small = g.leading(m);
            prop_assert_eq!(small.to_dense(), dense.view((0, 0), (m, m)).into_owned());
            let part = small.solve(&y[..m]).unwrap();
            prop_assert_eq!(&part[..], &full[..m]);
        }
    }

    #[test]
    fn dense_product_agrees(col in first_column(), x in prop::collection::vec(-3.0f64..3.0, 16)) {
        let g = LowerToeplitz::new(col).unwrap();
        let x = &x[..g.size()];
        let fast = g.mul(x).unwrap();
        let slow = g.to_dense() * nalgebra::DVector::from_column_slice(x);
        for (u, v) in fast.iter().zip(slow.iter()) {
            prop_assert!((u - v).abs() < 1e-12);
        }
    }
}
