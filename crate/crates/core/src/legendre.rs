//! Legendre polynomials, zonal functions and real orthonormal spherical harmonics.
//!
//! Zonal functions follow the convention `Z_l(x) = (2l+1) P_l(x)`: the constant
//! `1/|S^2|` is dropped. Spherical harmonics keep their true orthonormal
//! normalization.

use std::f64::consts::PI;

use crate::error::{NeedletError, Result};
use crate::numeric::{degree_cap, CompensatedSum};

/// Slack allowed on `|x| <= 1` before an argument is rejected.
pub const DOMAIN_TOLERANCE: f64 = 1e-12;

/// Checks `x` against [-1, 1] and clamps round-off excursions.
pub fn checked_unit(x: f64, what: &'static str) -> Result<f64> {
    if !x.is_finite() || x.abs() > 1.0 + DOMAIN_TOLERANCE {
        return Err(NeedletError::Domain { what, value: x });
    }
    Ok(x.clamp(-1.0, 1.0))
}

pub(crate) fn check_degree(l: usize) -> Result<()> {
    let cap = degree_cap();
    if l > cap {
        return Err(NeedletError::DegreeCap { requested: l, cap });
    }
    Ok(())
}

/// Eigenvalue `l(l+1)` of the spherical Laplacian on degree-`l` harmonics.
#[inline]
pub fn laplacian_eigenvalue(l: usize) -> f64 {
    let l = l as f64;
    l * (l + 1.0)
}

/// `P_0(x), ..., P_lmax(x)` from the upward three-term recurrence.
#[derive(Debug, Clone, PartialEq)]
pub struct LegendreTable {
    x: f64,
    values: Vec<f64>,
}

impl LegendreTable {
    pub fn new(x: f64, lmax: usize) -> Result<Self> {
        let x = checked_unit(x, "legendre argument")?;
        check_degree(lmax)?;
        let mut values = Vec::with_capacity(lmax + 1);
        values.push(1.0);
        if lmax >= 1 {
            values.push(x);
        }
        for l in 1..lmax {
            let lf = l as f64;
            let next = ((2.0 * lf + 1.0) * x * values[l] - lf * values[l - 1]) / (lf + 1.0);
            values.push(next);
        }
        Ok(Self { x, values })
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn lmax(&self) -> usize {
        self.values.len() - 1
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `P_l(x)`, with `P_{-1} = 0` and zero above the table.
    pub fn get(&self, l: isize) -> f64 {
        if l < 0 {
            0.0
        } else {
            self.values.get(l as usize).copied().unwrap_or(0.0)
        }
    }
}

/// Streams `(l, P_l(x))` for `l = 0..=lmax` without allocating a table.
pub(crate) struct LegendreIter {
    x: f64,
    l: usize,
    lmax: usize,
    prev: f64,
    curr: f64,
}

impl LegendreIter {
    pub(crate) fn new(x: f64, lmax: usize) -> Self {
        Self { x, l: 0, lmax, prev: 0.0, curr: 1.0 }
    }
}

impl Iterator for LegendreIter {
    type Item = (usize, f64);

    fn next(&mut self) -> Option<Self::Item> {
        if self.l > self.lmax {
            return None;
        }
        let out = (self.l, self.curr);
        let lf = self.l as f64;
        let next = ((2.0 * lf + 1.0) * self.x * self.curr - lf * self.prev) / (lf + 1.0);
        self.prev = self.curr;
        self.curr = next;
        self.l += 1;
        Some(out)
    }
}

/// Sum of `coeffs[l] * (2l+1) * P_l(x)` in ascending `l` with compensated accumulation.
pub fn zonal_series(coeffs: &[f64], x: f64) -> Result<f64> {
    let x = checked_unit(x, "zonal series argument")?;
    if coeffs.is_empty() {
        return Ok(0.0);
    }
    check_degree(coeffs.len() - 1)?;
    let acc: CompensatedSum =
        LegendreIter::new(x, coeffs.len() - 1).map(|(l, p)| coeffs[l] * (2 * l + 1) as f64 * p).collect();
    Ok(acc.value())
}

/// `Z_l(x) = (2l+1) P_l(x)`.
pub fn zonal_eval(l: usize, x: f64) -> Result<f64> {
    let table = LegendreTable::new(x, l)?;
    Ok((2 * l + 1) as f64 * table.values()[l])
}

/// Residual of `(2l+1)(x-1)P_l = (l+1)P_{l+1} - (2l+1)P_l + l P_{l-1}`.
pub fn recursion_residual(l: usize, x: f64) -> Result<f64> {
    let table = LegendreTable::new(x, l + 1)?;
    let li = l as isize;
    let lf = l as f64;
    let lhs = (2.0 * lf + 1.0) * (table.x() - 1.0) * table.get(li);
    let rhs = (lf + 1.0) * table.get(li + 1) - (2.0 * lf + 1.0) * table.get(li) + lf * table.get(li - 1);
    Ok(lhs - rhs)
}

/// `|sum_{l<=L} P_l(eta) xi^l - (1 - 2 xi eta + xi^2)^{-1/2}|`.
pub fn generating_function_check(xi: f64, eta: f64, truncation: usize) -> Result<f64> {
    if !(xi.abs() < 1.0) {
        return Err(NeedletError::InvalidParameter(format!("generating function needs |xi| < 1, got {xi}")));
    }
    let table = LegendreTable::new(eta, truncation)?;
    let base = 1.0 - 2.0 * xi * table.x() + xi * xi;
    if base <= 0.0 {
        return Err(NeedletError::InvalidParameter(format!("1 - 2 xi eta + xi^2 = {base} is not positive")));
    }
    let mut power = 1.0;
    let mut acc = CompensatedSum::new();
    for &p in table.values() {
        acc.add(p * power);
        power *= xi;
    }
    Ok((acc.value() - base.powf(-0.5)).abs())
}

/// Degree/order and position at which a real spherical harmonic is evaluated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphHarmPoint {
    pub l: usize,
    pub m: i64,
    /// Colatitude in [0, pi].
    pub theta: f64,
    /// Longitude; any finite value, reduced mod 2 pi.
    pub phi: f64,
}

impl SphHarmPoint {
    pub fn new(l: usize, m: i64, theta: f64, phi: f64) -> Result<Self> {
        if m.unsigned_abs() as usize > l {
            return Err(NeedletError::InvalidParameter(format!("|m| = {} exceeds l = {l}", m.abs())));
        }
        if !theta.is_finite() || theta < -DOMAIN_TOLERANCE || theta > PI + DOMAIN_TOLERANCE {
            return Err(NeedletError::InvalidParameter(format!("colatitude {theta} outside [0, pi]")));
        }
        if !phi.is_finite() {
            return Err(NeedletError::InvalidParameter(format!("longitude {phi} is not finite")));
        }
        Ok(Self { l, m, theta: theta.clamp(0.0, PI), phi: phi.rem_euclid(2.0 * PI) })
    }

    pub fn lambda(&self) -> f64 {
        laplacian_eigenvalue(self.l)
    }
}

/// Flat index of `(l, m)` in degree-major order: `l^2 + l + m`.
#[inline]
pub fn harmonic_index(l: usize, m: i64) -> usize {
    ((l * l + l) as i64 + m) as usize
}

/// Number of real harmonics with degree `<= lmax`.
#[inline]
pub fn harmonic_count(lmax: usize) -> usize {
    (lmax + 1) * (lmax + 1)
}

/// Orthonormal associated Legendre `\bar P_l^m(cos theta)` for a fixed `m`,
/// degrees `m..=lmax`, so that `Y_l^0 = \bar P_l^0` (no Condon-Shortley phase).
fn normalized_column(m: usize, lmax: usize, cos_t: f64, sin_t: f64, out: &mut Vec<f64>) {
    out.clear();
    let mut pmm = (1.0 / (4.0 * PI)).sqrt();
    for k in 1..=m {
        let kf = k as f64;
        pmm *= ((2.0 * kf + 1.0) / (2.0 * kf)).sqrt() * sin_t;
    }
    out.push(pmm);
    if lmax == m {
        return;
    }
    let mf = m as f64;
    out.push((2.0 * mf + 3.0).sqrt() * cos_t * pmm);
    for l in (m + 2)..=lmax {
        let lf = l as f64;
        let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
        let b = (((lf - 1.0) * (lf - 1.0) - mf * mf) / (4.0 * (lf - 1.0) * (lf - 1.0) - 1.0)).sqrt();
        let n = out.len();
        let next = a * (cos_t * out[n - 1] - b * out[n - 2]);
        out.push(next);
    }
}

/// Real orthonormal spherical harmonic: `sqrt2 \bar P_l^m cos(m phi)` for `m > 0`,
/// `\bar P_l^0` for `m = 0`, `sqrt2 \bar P_l^{|m|} sin(|m| phi)` for `m < 0`.
pub fn real_sph_harm(p: SphHarmPoint) -> Result<f64> {
    check_degree(p.l)?;
    let am = p.m.unsigned_abs() as usize;
    let (sin_t, cos_t) = p.theta.sin_cos();
    let mut column = Vec::with_capacity(p.l - am + 1);
    normalized_column(am, p.l, cos_t, sin_t.abs(), &mut column);
    let plm = column[p.l - am];
    Ok(match p.m {
        0 => plm,
        m if m > 0 => std::f64::consts::SQRT_2 * plm * (m as f64 * p.phi).cos(),
        m => std::f64::consts::SQRT_2 * plm * ((-m) as f64 * p.phi).sin(),
    })
}

/// All real harmonics `Y_l^m(theta, phi)` for `l <= lmax`, indexed by [`harmonic_index`].
pub fn real_harmonics_at(lmax: usize, theta: f64, phi: f64) -> Result<Vec<f64>> {
    check_degree(lmax)?;
    let mut out = vec![0.0; harmonic_count(lmax)];
    let (sin_t, cos_t) = theta.sin_cos();
    let mut column = Vec::with_capacity(lmax + 1);
    for m in 0..=lmax {
        normalized_column(m, lmax, cos_t, sin_t.abs(), &mut column);
        if m == 0 {
            for (k, &v) in column.iter().enumerate() {
                out[harmonic_index(k, 0)] = v;
            }
        } else {
            let (s, c) = (m as f64 * phi).sin_cos();
            let (cs, ss) = (std::f64::consts::SQRT_2 * c, std::f64::consts::SQRT_2 * s);
            for (k, &v) in column.iter().enumerate() {
                let l = m + k;
                out[harmonic_index(l, m as i64)] = cs * v;
                out[harmonic_index(l, -(m as i64))] = ss * v;
            }
        }
    }
    Ok(out)
}

/// Unit vector for colatitude/longitude.
pub fn unit_vector(theta: f64, phi: f64) -> [f64; 3] {
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    [st * cp, st * sp, ct]
}

/// Inner product of the unit vectors at two points, clamped to [-1, 1].
pub fn cos_angle(a: (f64, f64), b: (f64, f64)) -> f64 {
    let u = unit_vector(a.0, a.1);
    let v = unit_vector(b.0, b.1);
    (u[0] * v[0] + u[1] * v[1] + u[2] * v[2]).clamp(-1.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, SymmetricEigen};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Gauss-Legendre nodes/weights from the Golub-Welsch eigenproblem.
    fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
        let mut jac = DMatrix::<f64>::zeros(n, n);
        for k in 1..n {
            let kf = k as f64;
            let b = kf / (4.0 * kf * kf - 1.0).sqrt();
            jac[(k, k - 1)] = b;
            jac[(k - 1, k)] = b;
        }
        let eig = SymmetricEigen::new(jac);
        let nodes = eig.eigenvalues.iter().copied().collect();
        let weights = (0..n).map(|i| 2.0 * eig.eigenvectors[(0, i)].powi(2)).collect();
        (nodes, weights)
    }

    #[test]
    fn legendre_endpoints() {
        let t = LegendreTable::new(1.0, 5).unwrap();
        assert!(t.values().iter().all(|&v| v == 1.0));
        let t = LegendreTable::new(-1.0, 5).unwrap();
        for (l, &v) in t.values().iter().enumerate() {
            assert_eq!(v, if l % 2 == 0 { 1.0 } else { -1.0 });
        }
    }

    #[test]
    fn legendre_p2_at_half() {
        let t = LegendreTable::new(0.5, 2).unwrap();
        let explicit = (3.0 * 0.5f64.powi(2) - 1.0) / 2.0;
        assert_eq!(explicit, -0.125);
        assert!((t.values()[2] - explicit).abs() < 1e-16);
    }

    #[test]
    fn legendre_domain_errors() {
        assert!(matches!(LegendreTable::new(1.1, 3), Err(NeedletError::Domain { .. })));
        assert!(LegendreTable::new(1.0 + 1e-13, 3).is_ok());
        assert!(matches!(LegendreTable::new(0.0, degree_cap() + 1), Err(NeedletError::DegreeCap { .. })));
    }

    #[test]
    fn zonal_examples() {
        assert_eq!(zonal_eval(3, 1.0).unwrap(), 7.0);
        assert_eq!(zonal_eval(0, 0.3).unwrap(), 1.0);
        assert!((zonal_eval(2, 0.5).unwrap() + 0.625).abs() < 1e-15);
    }

    #[test]
    fn recursion_residual_examples() {
        assert!(recursion_residual(0, 0.7).unwrap().abs() < 1e-15);
        assert!(recursion_residual(1, -0.2).unwrap().abs() < 1e-15);
        assert!(recursion_residual(50, 0.999).unwrap().abs() <= 1e-12);
    }

    #[test]
    fn generating_function_examples() {
        assert_eq!(generating_function_check(0.0, 0.5, 0).unwrap(), 0.0);
        assert!(generating_function_check(0.4, 0.3, 80).unwrap() <= 1e-12);
        assert!(generating_function_check(-0.4, 0.3, 80).unwrap() <= 1e-12);
        assert!((0.92f64.powf(-0.5) - (1.0 - 2.0 * 0.4 * 0.3 + 0.16f64).powf(-0.5)).abs() < 1e-15);
        assert!(generating_function_check(1.0, 0.3, 4).is_err());
    }

    #[test]
    fn harmonic_closed_forms() {
        let y00 = real_sph_harm(SphHarmPoint::new(0, 0, 1.1, 2.3).unwrap()).unwrap();
        assert!((y00 - 1.0 / (4.0 * PI).sqrt()).abs() < 1e-15);
        let y10 = real_sph_harm(SphHarmPoint::new(1, 0, 0.0, 0.0).unwrap()).unwrap();
        assert!((y10 - (3.0 / (4.0 * PI)).sqrt()).abs() < 1e-15);
        // Y_1^1 = sqrt(3/4pi) sin(theta) cos(phi) in this real basis
        let (th, ph) = (0.7, 1.9);
        let y11 = real_sph_harm(SphHarmPoint::new(1, 1, th, ph).unwrap()).unwrap();
        assert!((y11 - (3.0 / (4.0 * PI)).sqrt() * th.sin() * ph.cos()).abs() < 1e-15);
        assert!(SphHarmPoint::new(2, 3, 0.0, 0.0).is_err());
    }

    #[test]
    fn batch_matches_single_evaluation() {
        let (th, ph) = (1.234, 4.321);
        let all = real_harmonics_at(12, th, ph).unwrap();
        for l in 0..=12usize {
            for m in -(l as i64)..=(l as i64) {
                let single = real_sph_harm(SphHarmPoint::new(l, m, th, ph).unwrap()).unwrap();
                assert!((all[harmonic_index(l, m)] - single).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn orthonormality_by_quadrature() {
        let lmax = 8;
        let (nodes, weights) = gauss_legendre(lmax + 2);
        let nphi = 2 * lmax + 3;
        let dim = harmonic_count(lmax);
        let mut gram = vec![0.0; dim * dim];
        for (x, w) in nodes.iter().zip(&weights) {
            let theta = x.acos();
            for k in 0..nphi {
                let phi = 2.0 * PI * k as f64 / nphi as f64;
                let y = real_harmonics_at(lmax, theta, phi).unwrap();
                let wq = w * 2.0 * PI / nphi as f64;
                for i in 0..dim {
                    for j in 0..dim {
                        gram[i * dim + j] += wq * y[i] * y[j];
                    }
                }
            }
        }
        for i in 0..dim {
            for j in 0..dim {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((gram[i * dim + j] - expect).abs() < 1e-8, "({i},{j}) = {}", gram[i * dim + j]);
            }
        }
    }

    #[test]
    fn addition_theorem_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..50 {
            let a = (rng.random_range(0.0..PI), rng.random_range(0.0..2.0 * PI));
            let b = (rng.random_range(0.0..PI), rng.random_range(0.0..2.0 * PI));
            let ya = real_harmonics_at(16, a.0, a.1).unwrap();
            let yb = real_harmonics_at(16, b.0, b.1).unwrap();
            let p = LegendreTable::new(cos_angle(a, b), 16).unwrap();
            for l in 0..=16usize {
                let lhs: f64 =
                    (-(l as i64)..=(l as i64)).map(|m| ya[harmonic_index(l, m)] * yb[harmonic_index(l, m)]).sum();
                let rhs = (2 * l + 1) as f64 / (4.0 * PI) * p.values()[l];
                assert!((lhs - rhs).abs() <= 1e-10);
            }
        }
    }

    proptest! {
        #[test]
        fn recursion_identity_and_bound(l in 0usize..=64, x in -1.0f64..=1.0) {
            prop_assert!(recursion_residual(l, x).unwrap().abs() <= 1e-12);
            let t = LegendreTable::new(x, l).unwrap();
            prop_assert!(t.values().iter().all(|v| v.abs() <= 1.0 + 1e-14));
        }
    }
}
