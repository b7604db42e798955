//! Discrete needlet frames: Fibonacci point sets per scale, analysis
//! coefficients, and frame-bound estimates on band-limited subspaces.
//!
//! Bounds are eigenvalues of the Gram matrix `sum_j M_j^T M_j` of the analysis
//! operator restricted to degrees `1..=L`; they say nothing about the frame on
//! all of L2(S^2).

use std::io::Write;
use std::ops::RangeInclusive;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use crate::error::{NeedletError, Result};
use crate::kernel::NeedletProfile;
use crate::legendre::{harmonic_count, harmonic_index, laplacian_eigenvalue, real_harmonics_at};

/// `n_j = ceil(oversample * C0 * a^{-2j})`.
pub const GRID_C0: f64 = 4.0;

pub const MAX_GRID_POINTS: usize = 1_000_000;

/// A degree counts as resolved when the windowed Calderon sum exceeds this
/// fraction of the peak `f^2`.
pub const COVERAGE_FLOOR: f64 = 1e-3;

/// `A_hat < ILL_CONDITIONED * B_hat` is reported as ill-conditioned.
pub const ILL_CONDITIONED: f64 = 1e-12;

/// Relative level of `f(a^{2j} lambda_L)^2` that ends the default scale window.
pub const DEFAULT_WINDOW_FLOOR: f64 = 5e-2;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SphereGrid {
    pub j: i32,
    pub a: f64,
    pub points: Vec<(f64, f64)>,
    pub weights: Vec<f64>,
}

impl SphereGrid {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Same points with every weight multiplied by `kappa`.
    pub fn scaled_weights(&self, kappa: f64) -> Self {
        Self { weights: self.weights.iter().map(|w| w * kappa).collect(), ..self.clone() }
    }
}

/// Spherical Fibonacci lattice: `z_k = 1 - (2k+1)/n`, longitudes by the golden angle.
pub fn fibonacci_points(n: usize) -> Vec<(f64, f64)> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|k| {
            let z = 1.0 - (2 * k + 1) as f64 / n as f64;
            (z.acos(), (k as f64 * golden).rem_euclid(std::f64::consts::TAU))
        })
        .collect()
}

pub fn grid_size(a: f64, j: i32, oversample: f64) -> Result<usize> {
    if !(a > 1.0) || !a.is_finite() {
        return Err(NeedletError::InvalidParameter(format!("dilation a must exceed 1, got {a}")));
    }
    if !(oversample >= 1.0) || !oversample.is_finite() {
        return Err(NeedletError::InvalidParameter(format!("oversample must be >= 1, got {oversample}")));
    }
    if j > 0 {
        return Err(NeedletError::InvalidParameter(format!("scale index j must be <= 0, got {j}")));
    }
    let n = (oversample * GRID_C0 * a.powi(-2 * j)).ceil();
    if n > MAX_GRID_POINTS as f64 {
        return Err(NeedletError::InvalidParameter(format!(
            "grid at j = {j} needs {n} points, above the cap of {MAX_GRID_POINTS}"
        )));
    }
    Ok(n as usize)
}

/// Points `x_{j,k}` with equal weights `mu_{j,k} = sqrt(4 pi / n_j)`.
pub fn build_grid(a: f64, j: i32, oversample: f64) -> Result<SphereGrid> {
    let n = grid_size(a, j, oversample)?;
    let mu = (4.0 * std::f64::consts::PI / n as f64).sqrt();
    Ok(SphereGrid { j, a, points: fibonacci_points(n), weights: vec![mu; n] })
}

/// Smallest pairwise geodesic distance (exhaustive).
pub fn min_separation(points: &[(f64, f64)]) -> f64 {
    let vs: Vec<[f64; 3]> = points.iter().map(|&(t, p)| crate::legendre::unit_vector(t, p)).collect();
    let mut best = f64::INFINITY;
    for (i, u) in vs.iter().enumerate() {
        for v in &vs[i + 1..] {
            // chord length is monotone in the angle; convert once at the end
            let d2 = (u[0] - v[0]).powi(2) + (u[1] - v[1]).powi(2) + (u[2] - v[2]).powi(2);
            best = best.min(d2);
        }
    }
    2.0 * (best.sqrt() / 2.0).min(1.0).asin()
}

fn profile_weights(profile: &NeedletProfile, a: f64, j: i32, band_limit: usize) -> Vec<f64> {
    let scale = a.powi(2 * j);
    (0..=band_limit).map(|l| profile.eval(scale * laplacian_eigenvalue(l))).collect()
}

/// `<F, psi_{j,k}> = mu_{j,k} sum_{l,m} f(a^{2j} lambda_l) F_hat(l,m) Y_l^m(x_{j,k})`,
/// one vector per grid.
///
/// `f_hat` is indexed by `harmonic_index`; entries above `band_limit` must vanish.
pub fn frame_coefficients(
    f_hat: &[f64],
    band_limit: usize,
    profile: &NeedletProfile,
    grids: &[SphereGrid],
) -> Result<Vec<Vec<f64>>> {
    if f_hat.iter().skip(harmonic_count(band_limit)).any(|&v| v != 0.0) {
        return Err(NeedletError::BandLimit { band_limit });
    }
    let used = f_hat.len().min(harmonic_count(band_limit));
    grids
        .iter()
        .map(|grid| {
            let fw = profile_weights(profile, grid.a, grid.j, band_limit);
            let mut weighted = vec![0.0; used];
            for l in 0..=band_limit {
                for m in -(l as i64)..=l as i64 {
                    let i = harmonic_index(l, m);
                    if i < used {
                        weighted[i] = fw[l] * f_hat[i];
                    }
                }
            }
            grid.points
                .iter()
                .zip(&grid.weights)
                .map(|(&(theta, phi), &mu)| {
                    let y = real_harmonics_at(band_limit, theta, phi)?;
                    Ok(mu * weighted.iter().zip(&y).map(|(a, b)| a * b).sum::<f64>())
                })
                .collect()
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct FrameBoundsEstimate {
    /// Always "band-limited": the bounds hold on degrees `1..=band_limit` only.
    pub subspace: &'static str,
    pub band_limit: usize,
    pub a: f64,
    pub oversample: f64,
    pub j_min: i32,
    pub j_max: i32,
    pub points: usize,
    pub a_hat: f64,
    pub b_hat: f64,
    pub ratio: f64,
    pub ill_conditioned: bool,
}

/// Default scale window: `j_max = 0` down to the first `j` at which
/// `f(a^{2j} lambda_L)^2` has fallen below 5% of the peak of `f^2`.
pub fn default_j_range(profile: &NeedletProfile, a: f64, band_limit: usize) -> Result<RangeInclusive<i32>> {
    if !(a > 1.0) {
        return Err(NeedletError::InvalidParameter(format!("dilation a must exceed 1, got {a}")));
    }
    let peak = profile.eval(profile.peak()).powi(2);
    let lambda = laplacian_eigenvalue(band_limit.max(1));
    let mut j = 0;
    loop {
        let s = a.powi(2 * j) * lambda;
        if s < profile.peak() && profile.eval(s).powi(2) < DEFAULT_WINDOW_FLOOR * peak {
            return Ok(j..=0);
        }
        if j < -200 {
            return Err(NeedletError::InvalidParameter("no finite default scale window".into()));
        }
        j -= 1;
    }
}

/// Gram matrix of the analysis operator on degrees `1..=band_limit`.
pub fn frame_gram(profile: &NeedletProfile, grids: &[SphereGrid], band_limit: usize) -> Result<DMatrix<f64>> {
    if band_limit < 1 {
        return Err(NeedletError::InvalidParameter("band limit must be at least 1".into()));
    }
    let dim = harmonic_count(band_limit) - 1;
    let mut gram = DMatrix::<f64>::zeros(dim, dim);
    for grid in grids {
        let fw = profile_weights(profile, grid.a, grid.j, band_limit);
        let mut m = DMatrix::<f64>::zeros(grid.len(), dim);
        for (row, (&(theta, phi), &mu)) in grid.points.iter().zip(&grid.weights).enumerate() {
            let y = real_harmonics_at(band_limit, theta, phi)?;
            for l in 1..=band_limit {
                for mm in -(l as i64)..=l as i64 {
                    let i = harmonic_index(l, mm);
                    m[(row, i - 1)] = mu * fw[l] * y[i];
                }
            }
        }
        gram += m.transpose() * &m;
    }
    Ok(gram)
}

/// Extreme eigenvalues of the Gram matrix built from explicit grids.
pub fn frame_bounds_from_grids(
    profile: &NeedletProfile,
    grids: &[SphereGrid],
    band_limit: usize,
) -> Result<(f64, f64)> {
    let gram = frame_gram(profile, grids, band_limit)?;
    let eig = SymmetricEigen::new(gram).eigenvalues;
    let a_hat = eig.iter().cloned().fold(f64::INFINITY, f64::min);
    let b_hat = eig.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok((a_hat, b_hat))
}

pub fn estimate_frame_bounds(
    profile: &NeedletProfile,
    a: f64,
    j_range: RangeInclusive<i32>,
    band_limit: usize,
    oversample: f64,
) -> Result<FrameBoundsEstimate> {
    let (j_min, j_max) = (*j_range.start(), *j_range.end());
    if j_min > j_max {
        return Err(NeedletError::InvalidParameter(format!("empty scale window [{j_min}, {j_max}]")));
    }
    let peak = profile.eval(profile.peak()).powi(2);
    for l in 1..=band_limit {
        let cover: f64 = j_range.clone().map(|j| profile.eval(a.powi(2 * j) * laplacian_eigenvalue(l)).powi(2)).sum();
        if cover < COVERAGE_FLOOR * peak {
            return Err(NeedletError::InvalidParameter(format!(
                "scale window [{j_min}, {j_max}] does not resolve degree {l}"
            )));
        }
    }
    let grids: Vec<SphereGrid> = j_range.map(|j| build_grid(a, j, oversample)).collect::<Result<_>>()?;
    let (a_hat, b_hat) = frame_bounds_from_grids(profile, &grids, band_limit)?;
    Ok(FrameBoundsEstimate {
        subspace: "band-limited",
        band_limit,
        a,
        oversample,
        j_min,
        j_max,
        points: grids.iter().map(SphereGrid::len).sum(),
        a_hat,
        b_hat,
        ratio: b_hat / a_hat,
        ill_conditioned: !(a_hat >= ILL_CONDITIONED * b_hat) || !(a_hat > 0.0),
    })
}

/// Grid as CSV with columns `j,k,theta,phi,weight`.
pub fn write_grid_csv<W: Write>(grid: &SphereGrid, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["j", "k", "theta", "phi", "weight"])?;
    for (k, (&(theta, phi), &mu)) in grid.points.iter().zip(&grid.weights).enumerate() {
        w.write_record(&[grid.j.to_string(), k.to_string(), theta.to_string(), phi.to_string(), mu.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{calderon_bounds, DEFAULT_CALDERON_SAMPLES};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn mex(r: u32) -> NeedletProfile {
        NeedletProfile::mexican(r).unwrap()
    }

    #[test]
    fn grid_sizes_scale_with_a_squared() {
        for j in -4..0 {
            let fine = grid_size(2.0, j - 1, 1.0).unwrap() as f64;
            let coarse = grid_size(2.0, j, 1.0).unwrap() as f64;
            assert!((fine - 4.0 * coarse).abs() <= 4.0);
        }
        let g = build_grid(1.5, -3, 2.0).unwrap();
        assert_eq!(g.len(), (2.0 * 4.0 * 1.5f64.powi(6)).ceil() as usize);
    }

    #[test]
    fn grid_guards() {
        assert!(build_grid(1.0, -1, 1.0).is_err());
        assert!(build_grid(2.0, -1, 0.5).is_err());
        assert!(build_grid(2.0, 1, 1.0).is_err());
        assert!(build_grid(2.0, -12, 1.0).is_err());
    }

    #[test]
    fn weights_sum_to_sphere_area() {
        for (j, os) in [(0, 1.0), (-3, 2.0), (-5, 1.3)] {
            let g = build_grid(2.0, j, os).unwrap();
            let s: f64 = g.weights.iter().map(|w| w * w).sum();
            assert!((s - 4.0 * PI).abs() < 1e-9);
        }
    }

    #[test]
    fn fibonacci_lattice_is_quasi_uniform() {
        let pts = fibonacci_points(1000);
        assert!(min_separation(&pts) >= 0.7 * (4.0 * PI / 1000.0).sqrt());
    }

    #[test]
    fn single_harmonic_coefficients() {
        let p = mex(1);
        let grids = [build_grid(2.0, -1, 1.0).unwrap(), build_grid(2.0, -2, 1.0).unwrap()];
        let (l0, m0) = (3usize, -2i64);
        let mut f_hat = vec![0.0; harmonic_count(6)];
        f_hat[harmonic_index(l0, m0)] = 1.0;
        let coeffs = frame_coefficients(&f_hat, 6, &p, &grids).unwrap();
        for (grid, c) in grids.iter().zip(&coeffs) {
            let f = p.eval(2f64.powi(2 * grid.j) * laplacian_eigenvalue(l0));
            for (k, &(theta, phi)) in grid.points.iter().enumerate() {
                let y = crate::legendre::real_sph_harm(crate::legendre::SphHarmPoint::new(l0, m0, theta, phi).unwrap())
                    .unwrap();
                assert!((c[k] - grid.weights[k] * f * y).abs() < 1e-13);
            }
        }
        let zero = frame_coefficients(&vec![0.0; harmonic_count(6)], 6, &p, &grids).unwrap();
        assert!(zero.iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn band_limit_violation() {
        let mut f_hat = vec![0.0; harmonic_count(8)];
        f_hat[harmonic_index(7, 0)] = 1.0;
        let grids = [build_grid(2.0, 0, 1.0).unwrap()];
        assert!(matches!(
            frame_coefficients(&f_hat, 6, &mex(1), &grids),
            Err(NeedletError::BandLimit { band_limit: 6 })
        ));
    }

    #[test]
    fn bounds_are_ordered_and_positive() {
        let est = estimate_frame_bounds(&mex(1), 2.0, -6..=0, 16, 2.0).unwrap();
        assert!(est.a_hat > 0.0);
        assert!(est.a_hat <= est.b_hat);
        assert!(!est.ill_conditioned);
        assert_eq!(est.subspace, "band-limited");
    }

    #[test]
    fn ratio_tightens_with_oversampling() {
        let p = mex(1);
        let ratios: Vec<f64> =
            [1.0, 2.0, 4.0].iter().map(|&os| estimate_frame_bounds(&p, 2.0, -6..=0, 16, os).unwrap().ratio).collect();
        assert!(ratios[0] > ratios[1] && ratios[1] > ratios[2], "{ratios:?}");
        let ideal = calderon_bounds(&p, 2.0, DEFAULT_CALDERON_SAMPLES).unwrap().ratio();
        assert!(ratios[2] <= 2.0 * ideal, "{ratios:?} vs {ideal}");
    }

    #[test]
    fn weight_scaling_is_quadratic() {
        let p = mex(1);
        let grids: Vec<SphereGrid> = (-4..=0).map(|j| build_grid(2.0, j, 1.0).unwrap()).collect();
        let scaled: Vec<SphereGrid> = grids.iter().map(|g| g.scaled_weights(3.0)).collect();
        let (a0, b0) = frame_bounds_from_grids(&p, &grids, 8).unwrap();
        let (a1, b1) = frame_bounds_from_grids(&p, &scaled, 8).unwrap();
        assert!((a1 / a0 - 9.0).abs() < 1e-9);
        assert!((b1 / b0 - 9.0).abs() < 1e-9);
    }

    #[test]
    fn parseval_proxy() {
        let p = mex(1);
        let l = 10;
        let grids: Vec<SphereGrid> = (-5..=0).map(|j| build_grid(2.0, j, 2.0).unwrap()).collect();
        let (a_hat, b_hat) = frame_bounds_from_grids(&p, &grids, l).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..50 {
            let mut f_hat: Vec<f64> = (0..harmonic_count(l)).map(|_| rng.random_range(-1.0..1.0)).collect();
            f_hat[0] = 0.0;
            let norm: f64 = f_hat.iter().map(|v| v * v).sum();
            let energy: f64 = frame_coefficients(&f_hat, l, &p, &grids).unwrap().iter().flatten().map(|c| c * c).sum();
            let q = energy / norm;
            assert!(q >= a_hat * 0.95 && q <= b_hat * 1.05, "{q} not in [{a_hat}, {b_hat}]");
        }
    }

    #[test]
    fn uncovered_degrees_are_rejected() {
        // j = 0 alone cannot reach degree 16 with a Mexican profile
        assert!(estimate_frame_bounds(&mex(1), 2.0, 0..=0, 16, 1.0).is_err());
    }

    #[test]
    fn default_window() {
        let r = default_j_range(&mex(1), 2.0, 16).unwrap();
        assert_eq!(*r.end(), 0);
        assert!(*r.start() <= -5);
        assert!(estimate_frame_bounds(&mex(1), 2.0, r, 16, 1.0).is_ok());
    }

    #[test]
    fn grid_csv_rows() {
        let g = build_grid(2.0, -2, 1.0).unwrap();
        let mut buf = Vec::new();
        write_grid_csv(&g, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next().unwrap(), "j,k,theta,phi,weight");
        assert_eq!(text.lines().count(), g.len() + 1);
    }
}
