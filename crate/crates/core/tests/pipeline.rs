//! End-to-end paths that cross module boundaries.

use std::f64::consts::{FRAC_PI_2, PI};

use needlet_core::correlation::{
    analytic_covariance, denominator_lower_bound_check, lemma_scale_sweep, theorem_decay_check, CorrelationQuery,
};
use needlet_core::frame::{build_grid, frame_coefficients, write_grid_csv};
use needlet_core::kernel::{choose_lmax, KernelSpec};
use needlet_core::legendre::{cos_angle, harmonic_count};
use needlet_core::simulate::{beta_at, sample_alm, sample_alm_replica};
use needlet_core::spectrum::{verify_derivative_decay, verify_envelope, DEFAULT_ENVELOPE_RATIO_CAP};
use needlet_core::{analytic_correlation, monte_carlo_correlation, NeedletProfile, PowerSpectrum};

fn mex(r: u32) -> NeedletProfile {
    NeedletProfile::mexican(r).unwrap()
}

#[test]
fn spectrum_file_drives_correlation_and_simulation() {
    let dir = tempdir();
    let path = dir.join("spectrum.json");
    std::fs::write(&path, r#"{"family":"rational_log","alpha":3,"beta":3,"P":[1],"Q":[1],"F":"2+sin"}"#).unwrap();
    let s = PowerSpectrum::load(&path, None).unwrap();
    assert!(verify_envelope(&s, 2000, DEFAULT_ENVELOPE_RATIO_CAP).unwrap().pass);
    assert!(verify_derivative_decay(&s, 2, 10, 2000, 0.75).unwrap().pass);

    let p = mex(1);
    let x = (FRAC_PI_2, 0.0);
    let y = (FRAC_PI_2, 1.0);
    let q = CorrelationQuery::new(&p, &s, 0.2, cos_angle(x, y)).unwrap();
    let exact = analytic_correlation(&q).unwrap();
    let mc = monte_carlo_correlation(&p, &s, 0.2, x, y, 3000, 42).unwrap();
    assert!((mc.estimate - exact).abs() <= 4.0 * mc.stderr, "{mc:?} vs {exact}");
    std::fs::remove_dir_all(dir).ok();
}

#[test]
fn field_needlet_coefficient_equals_frame_coefficient() {
    // beta_{t,x} at t = a^j is the frame coefficient divided by its weight
    let p = mex(1);
    let s = PowerSpectrum::power_law(3.0).unwrap();
    let j = -2;
    let t = 2f64.powi(j);
    let lmax = choose_lmax(&p, t, 1e-12).unwrap();
    let alm = sample_alm(&s, lmax, 3).unwrap();
    let grid = build_grid(2.0, j, 1.0).unwrap();
    let coeffs = frame_coefficients(alm.coeffs(), lmax, &p, std::slice::from_ref(&grid)).unwrap();
    for k in [0, 5, grid.len() - 1] {
        let beta = beta_at(&alm, &p, t, grid.points[k]).unwrap().value;
        assert!((coeffs[0][k] / grid.weights[k] - beta).abs() < 1e-12 * beta.abs().max(1e-6));
    }
}

#[test]
fn kernel_is_covariance_of_white_spectrum_field() {
    // with c_l = 1 the needlet coefficient covariance is the kernel built from f^2
    let p = mex(1);
    let t = 0.25;
    let flat = PowerSpectrum::tabulated(3.0, vec![Some(1.0); 400]).unwrap();
    let lmax = CorrelationQuery::new(&p, &flat, t, 1.0).unwrap().lmax().unwrap();
    let f2: Vec<f64> = (0..=lmax)
        .map(|l| if l == 0 { 0.0 } else { p.eval(t * t * (l * (l + 1)) as f64).powi(2) * (2 * l + 1) as f64 })
        .collect();
    let k = KernelSpec::from_coeffs(p, t, f2).unwrap();
    for x in [1.0, 0.9, 0.2, -0.7] {
        let q = CorrelationQuery::new(&p, &flat, t, x).unwrap();
        let cov = analytic_covariance(&q).unwrap();
        assert!((cov - k.eval(x).unwrap()).abs() < 1e-12 * k.eval(1.0).unwrap());
    }
}

#[test]
fn asymptotic_checks_on_default_grids() {
    let p = mex(1);
    let s = PowerSpectrum::power_law(3.0).unwrap();
    let lemma = lemma_scale_sweep(&p, &s, 1.0, &[0.4, 0.2, 0.1, 0.05], 1024).unwrap();
    assert!(lemma.pass);
    assert!(denominator_lower_bound_check(&p, &s, &[0.2, 0.1, 0.05, 0.025]).unwrap().pass);
    let r2 =
        theorem_decay_check(&mex(2), &PowerSpectrum::power_law(4.0).unwrap(), 0.0, &[0.4, 0.2, 0.1, 0.05]).unwrap();
    assert_eq!((r2.predicted_exponent, r2.n), (6.0, 4));
    assert!(r2.pass, "{r2:?}");
}

#[test]
fn replicas_are_independent_draws() {
    let s = PowerSpectrum::power_law(2.5).unwrap();
    let a = sample_alm_replica(&s, 8, 1, 0).unwrap();
    let b = sample_alm_replica(&s, 8, 1, 1).unwrap();
    assert_eq!(a.coeffs().len(), harmonic_count(8));
    let dot: f64 = a.coeffs().iter().zip(b.coeffs()).map(|(x, y)| x * y).sum();
    let na: f64 = a.coeffs().iter().map(|x| x * x).sum();
    let nb: f64 = b.coeffs().iter().map(|x| x * x).sum();
    assert!(dot.abs() < (na * nb).sqrt());
}

#[test]
fn grid_export_roundtrip() {
    let g = build_grid(2.0, -1, 1.0).unwrap();
    let mut buf = Vec::new();
    write_grid_csv(&g, &mut buf).unwrap();
    let mut rdr = csv::Reader::from_reader(buf.as_slice());
    let mut total = 0.0;
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec.unwrap();
        assert_eq!(rec[1].parse::<usize>().unwrap(), k);
        let theta: f64 = rec[2].parse().unwrap();
        assert!((theta - g.points[k].0).abs() == 0.0);
        total += rec[4].parse::<f64>().unwrap().powi(2);
    }
    assert!((total - 4.0 * PI).abs() < 1e-9);
}

fn tempdir() -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("needlet-core-it-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}
