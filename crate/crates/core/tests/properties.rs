use needlet_core::correlation::{analytic_correlation, gt_coefficients, CorrelationQuery};
use needlet_core::difference::{apply_p_iter, CoeffSequence};
use needlet_core::kernel::{calderon_sum, choose_lmax, KernelSpec, NeedletProfile};
use needlet_core::legendre::{real_harmonics_at, zonal_series};
use needlet_core::simulate::jackknife_correlation;
use needlet_core::spectrum::PowerSpectrum;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn correlation_is_bounded(r in 1u32..=3, alpha in 2.2f64..6.0, t in 0.03f64..0.8, x in -1.0f64..1.0) {
        let p = NeedletProfile::mexican(r).unwrap();
        let s = PowerSpectrum::power_law(alpha).unwrap();
        let q = CorrelationQuery::new(&p, &s, t, x).unwrap();
        let c = analytic_correlation(&q).unwrap();
        prop_assert!(c.abs() <= 1.0);
        prop_assert_eq!(analytic_correlation(&q.with_cos_gamma(1.0)).unwrap(), 1.0);
    }

    #[test]
    fn master_identity_on_needlet_coefficients(t in 0.1f64..0.5, n in 1usize..=3, theta in 0.3f64..3.1) {
        let p = NeedletProfile::mexican(2).unwrap();
        let s = PowerSpectrum::power_law(3.0).unwrap();
        let a = gt_coefficients(&p, &s, t, 80).unwrap();
        let x = theta.cos();
        let lhs = zonal_series(&apply_p_iter(&a, n).unwrap().to_dense(), x).unwrap();
        let rhs = (x - 1.0).powi(n as i32) * zonal_series(&a.to_dense(), x).unwrap();
        let scale: f64 = a.values().iter().enumerate().map(|(l, v)| v.abs() * (2 * l + 1) as f64).sum();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * scale * 2f64.powi(n as i32));
    }

    #[test]
    fn kernel_peaks_at_coincidence(r in 1u32..=3, t in 0.05f64..0.6, x in -1.0f64..0.99) {
        let p = NeedletProfile::mexican(r).unwrap();
        let k = KernelSpec::new(p, t, 1e-12).unwrap();
        prop_assert!(k.eval(x).unwrap().abs() <= k.eval(1.0).unwrap());
    }

    #[test]
    fn truncation_shrinks_with_scale(t in 0.02f64..0.5) {
        let p = NeedletProfile::mexican(1).unwrap();
        prop_assert!(choose_lmax(&p, t, 1e-12).unwrap() >= choose_lmax(&p, 2.0 * t, 1e-12).unwrap());
    }

    #[test]
    fn calderon_sum_is_dilation_periodic(lambda in 0.5f64..50.0, a in 1.2f64..3.0) {
        let p = NeedletProfile::mexican(1).unwrap();
        let g = calderon_sum(&p, a, lambda).unwrap();
        let g2 = calderon_sum(&p, a, a * a * lambda).unwrap();
        prop_assert!((g - g2).abs() <= 1e-12 * g.max(1.0));
    }

    #[test]
    fn unsold_identity(theta in 0.0f64..std::f64::consts::PI, phi in 0.0f64..std::f64::consts::TAU, l in 0usize..=20) {
        let y = real_harmonics_at(l, theta, phi).unwrap();
        let s: f64 = y[l * l..].iter().map(|v| v * v).sum();
        prop_assert!((s - (2 * l + 1) as f64 / (4.0 * std::f64::consts::PI)).abs() <= 1e-12);
    }

    #[test]
    fn jackknife_correlation_is_affine_invariant(
        xs in proptest::collection::vec(-5.0f64..5.0, 10..40),
        scale in 0.1f64..10.0,
        shift in -3.0f64..3.0,
    ) {
        let ys: Vec<f64> = xs.iter().enumerate().map(|(i, x)| x + (i as f64).sin()).collect();
        prop_assume!(xs.iter().any(|&x| (x - xs[0]).abs() > 1e-3));
        let (r, se) = jackknife_correlation(&xs, &ys).unwrap();
        let moved: Vec<f64> = ys.iter().map(|y| scale * y + shift).collect();
        let (r2, se2) = jackknife_correlation(&xs, &moved).unwrap();
        prop_assert!(r.abs() <= 1.0);
        prop_assert!((r - r2).abs() < 1e-9);
        prop_assert!((se - se2).abs() < 1e-7);
    }

    #[test]
    fn coefficient_window_is_zero_padded(values in proptest::collection::vec(-1.0f64..1.0, 1..20), offset in 0usize..5) {
        let s = CoeffSequence::new(offset, values.clone());
        prop_assert_eq!(s.get(offset as i64 - 1), 0.0);
        prop_assert_eq!(s.get((offset + values.len()) as i64), 0.0);
        prop_assert_eq!(s.get(offset as i64), values[0]);
    }
}
