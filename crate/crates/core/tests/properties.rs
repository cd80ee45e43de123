//! Property tests for the structural invariants of the core kernels.

use hdmart_core::bounds::{bound_t1, bound_t2, bound_t3, rate_fit, MomentStats, T3Variant};
use hdmart_core::gauss::{empirical_rect_prob, rect_prob, sample_mvn};
use hdmart_core::generators::{bolthausen_step_law, bolthausen_window};
use hdmart_core::kolmogorov::build_family;
use hdmart_core::rect::Rectangle;
use hdmart_core::spectral::{cholesky_factor, psd_sqrt, spectral_stats, Matrix, SymMatrix};
use proptest::prelude::*;

fn arb_psd(dim: usize) -> impl Strategy<Value = SymMatrix> {
    proptest::collection::vec(-1.0f64..1.0, dim * dim).prop_map(move |b| {
        let mut m = SymMatrix::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                let mut acc = 0.0;
                for k in 0..dim {
                    acc += b[i * dim + k] * b[j * dim + k];
                }
                if j <= i {
                    m.set_sym(i, j, acc / dim as f64);
                }
            }
        }
        m
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn psd_sqrt_squares_to_input(m in arb_psd(4)) {
        let s = psd_sqrt(&m).unwrap();
        let tol = 1e-8 * (1.0 + m.max_abs());
        for i in 0..4 {
            for j in 0..4 {
                let mut acc = 0.0;
                for k in 0..4 {
                    acc += s.get(i, k) * s.get(k, j);
                }
                prop_assert!((acc - m.get(i, j)).abs() <= tol);
            }
        }
    }

    #[test]
    fn lambda_min_superadditive(a in arb_psd(4), b in arb_psd(4)) {
        let sum = a.add(&b);
        let la = spectral_stats(&a).lambda_min;
        let lb = spectral_stats(&b).lambda_min;
        let ls = spectral_stats(&sum).lambda_min;
        prop_assert!(ls >= la + lb - 1e-9 * (1.0 + sum.max_abs()));
    }

    #[test]
    fn op_norm_of_scaled_identity(c in 0.0f64..100.0) {
        let m = SymMatrix::identity(3).scale(c);
        prop_assert!((spectral_stats(&m).op_norm - c).abs() <= 1e-12 * (1.0 + c));
    }

    #[test]
    fn rectangle_negation_mirrors_membership(
        lo in proptest::collection::vec(-2.0f64..0.0, 3),
        width in proptest::collection::vec(0.0f64..2.0, 3),
        x in proptest::collection::vec(-3.0f64..3.0, 3),
    ) {
        let hi: Vec<f64> = lo.iter().zip(width.iter()).map(|(a, w)| a + w).collect();
        let r = Rectangle::new(lo, hi).unwrap();
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        prop_assert_eq!(r.contains(&x), r.negate().contains(&neg));
    }

    #[test]
    fn rate_fit_recovers_exact_power_law(
        slope in -2.0f64..-0.01,
        scale in 0.1f64..10.0,
    ) {
        let pts: Vec<(usize, f64)> = [64usize, 256, 1024, 4096]
            .iter()
            .map(|&n| (n, scale * (n as f64).powf(slope)))
            .collect();
        let fit = rate_fit(&pts).unwrap();
        prop_assert!((fit.slope - slope).abs() <= 1e-10);
        prop_assert!((fit.r_squared - 1.0).abs() <= 1e-10);
        prop_assert!((fit.intercept - scale.ln()).abs() <= 1e-8);
    }

    #[test]
    fn bolthausen_law_is_standardized(step in 1usize..=4096, s_partial in -100.0f64..100.0) {
        let n = 4096usize;
        let law = bolthausen_step_law(step, n, s_partial).unwrap();
        prop_assert!(law.mean().abs() <= 1e-12);
        prop_assert!((law.variance() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn bound_values_scale_linearly_in_c(c in 0.1f64..10.0) {
        let s = MomentStats {
            m_ratio: 2.0,
            alpha: 0.5,
            beta: 1.5,
            gamma: 1.0,
            lambda_min_sigma: 0.8,
            d_min_sigma: 0.9,
            d_max_sigma: 1.2,
            third_moment_mean: 1.7,
            n: 4096,
            d: 8,
        };
        for (one, at_c) in [
            (bound_t1(&s, 1.0).value, bound_t1(&s, c).value),
            (bound_t2(&s, 1.0).value, bound_t2(&s, c).value),
            (
                bound_t3(&s, T3Variant::WithAlpha, 1.0).value,
                bound_t3(&s, T3Variant::WithAlpha, c).value,
            ),
        ] {
            prop_assert!((at_c - c * one).abs() <= 1e-12 * (1.0 + at_c.abs()));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10))]

    #[test]
    fn rect_prob_monotone_under_inclusion(
        lo in proptest::collection::vec(-1.5f64..0.0, 2),
        width in proptest::collection::vec(0.1f64..1.5, 2),
        grow in proptest::collection::vec(0.0f64..1.0, 2),
        seed in 0u64..1000,
    ) {
        let sigma = SymMatrix::from_2x2(1.0, 0.3, 1.0);
        let hi: Vec<f64> = lo.iter().zip(width.iter()).map(|(a, w)| a + w).collect();
        let inner = Rectangle::new(lo.clone(), hi.clone()).unwrap();
        let outer = Rectangle::new(
            lo.iter().zip(grow.iter()).map(|(a, g)| a - g).collect(),
            hi.iter().zip(grow.iter()).map(|(b, g)| b + g).collect(),
        )
        .unwrap();
        prop_assert!(inner.subset_of(&outer));
        let p1 = rect_prob(&sigma, &inner, 1 << 11, seed).unwrap();
        let p2 = rect_prob(&sigma, &outer, 1 << 11, seed + 1).unwrap();
        prop_assert!(p1.value <= p2.value + 3.0 * (p1.stderr + p2.stderr) + 1e-6);
    }

    #[test]
    fn rect_prob_matches_empirical(seed in 0u64..100) {
        let sigma = SymMatrix::from_2x2(1.0, -0.4, 1.0);
        let family = build_family(2, &sigma, 7, 8, seed);
        let root = cholesky_factor(&sigma).unwrap();
        let samples = sample_mvn(&root, 20_000, seed ^ 0xabcd);
        for rect in &family.rectangles {
            let q = rect_prob(&sigma, rect, 1 << 11, seed).unwrap();
            let e = empirical_rect_prob(&samples, rect);
            prop_assert!((q.value - e).abs() <= 0.015, "qmc {} emp {}", q.value, e);
        }
    }

    #[test]
    fn sample_mvn_thread_count_independent_semantics(seed in 0u64..500) {
        // contract: output is a pure function of (root, count, seed)
        let root = Matrix::from_rows(2, 2, vec![1.0, 0.0, 0.5, 0.8]).unwrap();
        let a = sample_mvn(&root, 32, seed);
        let b = sample_mvn(&root, 32, seed);
        prop_assert_eq!(a.data(), b.data());
    }
}
