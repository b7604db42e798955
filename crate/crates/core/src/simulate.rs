//! Isotropic Gaussian fields from random real-basis harmonic coefficients,
//! their needlet coefficients, and Monte-Carlo correlation estimates.
//!
//! Randomness is addressed by counter: the ChaCha8 key comes from the seed, the
//! stream id is the replica index and coefficient `(l, m)` reads the four words
//! starting at `4 (l^2 + l + m)`. Any coefficient of any replica can be
//! regenerated on its own, so parallel schedules cannot change results.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{NeedletError, Result};
use crate::kernel::{choose_lmax, NeedletProfile, DEFAULT_EPS_TAIL};
use crate::legendre::{
    check_degree, cos_angle, harmonic_count, harmonic_index, laplacian_eigenvalue, real_harmonics_at, LegendreTable,
};
use crate::spectrum::PowerSpectrum;

/// `u32` words consumed per coefficient.
const WORDS_PER_COEFF: u128 = 4;

pub const MIN_REPLICAS: usize = 100;

/// Real harmonic coefficients `a_{l,m}`, `1 <= l <= lmax`, indexed by [`harmonic_index`].
/// The `l = 0` slot is kept at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct AlmSet {
    lmax: usize,
    coeffs: Vec<f64>,
    seed: u64,
}

impl AlmSet {
    pub fn from_coeffs(lmax: usize, mut coeffs: Vec<f64>, seed: u64) -> Result<Self> {
        if coeffs.len() != harmonic_count(lmax) {
            return Err(NeedletError::InvalidParameter(format!(
                "{} coefficients given, degree {lmax} needs {}",
                coeffs.len(),
                harmonic_count(lmax)
            )));
        }
        coeffs[0] = 0.0;
        Ok(Self { lmax, coeffs, seed })
    }

    pub fn zeros(lmax: usize) -> Self {
        Self { lmax, coeffs: vec![0.0; harmonic_count(lmax)], seed: 0 }
    }

    pub fn lmax(&self) -> usize {
        self.lmax
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn get(&self, l: usize, m: i64) -> f64 {
        if l > self.lmax || m.unsigned_abs() as usize > l {
            return 0.0;
        }
        self.coeffs[harmonic_index(l, m)]
    }

    /// Coefficients of `F(theta, phi - delta)`, the field rotated by `delta` about the pole.
    pub fn rotate_z(&self, delta: f64) -> Self {
        let mut out = self.coeffs.clone();
        for l in 1..=self.lmax {
            for m in 1..=l as i64 {
                let (s, c) = (m as f64 * delta).sin_cos();
                let (ic, is) = (harmonic_index(l, m), harmonic_index(l, -m));
                let (ac, as_) = (self.coeffs[ic], self.coeffs[is]);
                out[ic] = ac * c - as_ * s;
                out[is] = ac * s + as_ * c;
            }
        }
        Self { lmax: self.lmax, coeffs: out, seed: self.seed }
    }
}

/// Standard normals at fixed word positions of one ChaCha8 stream.
struct CoefficientStream {
    rng: ChaCha8Rng,
}

impl CoefficientStream {
    fn new(seed: u64, replica: u64, first_index: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(replica);
        rng.set_word_pos(first_index as u128 * WORDS_PER_COEFF);
        Self { rng }
    }

    /// Box-Muller on two 53-bit uniforms; exactly two `u64` per call.
    #[inline]
    fn next_normal(&mut self) -> f64 {
        const SCALE: f64 = 1.0 / (1u64 << 53) as f64;
        let u1 = ((self.rng.next_u64() >> 11) + 1) as f64 * SCALE;
        let u2 = (self.rng.next_u64() >> 11) as f64 * SCALE;
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }
}

/// `sqrt(c_l)` for `l = 0..=lmax` (entry 0 unused); missing or non-positive `c_l` is an error.
pub fn spectrum_std(spectrum: &PowerSpectrum, lmax: usize) -> Result<Vec<f64>> {
    let mut out = vec![0.0; lmax + 1];
    for (l, slot) in out.iter_mut().enumerate().skip(1) {
        let c = spectrum.eval(l).unwrap_or(0.0);
        if !(c > 0.0) {
            return Err(NeedletError::NonPositiveVariance { l, value: c });
        }
        *slot = c.sqrt();
    }
    Ok(out)
}

fn draw_replica(std: &[f64], seed: u64, replica: u64) -> Vec<f64> {
    let lmax = std.len() - 1;
    let mut coeffs = vec![0.0; harmonic_count(lmax)];
    let mut stream = CoefficientStream::new(seed, replica, harmonic_index(1, -1));
    for (l, &sd) in std.iter().enumerate().skip(1) {
        for slot in &mut coeffs[harmonic_index(l, -(l as i64))..=harmonic_index(l, l as i64)] {
            *slot = sd * stream.next_normal();
        }
    }
    coeffs
}

/// One field realization: `a_{l,m} ~ N(0, c_l)` independently.
pub fn sample_alm(spectrum: &PowerSpectrum, lmax: usize, seed: u64) -> Result<AlmSet> {
    sample_alm_replica(spectrum, lmax, seed, 0)
}

/// Replica `replica` of the family keyed by `seed`; replica 0 is [`sample_alm`].
pub fn sample_alm_replica(spectrum: &PowerSpectrum, lmax: usize, seed: u64, replica: u64) -> Result<AlmSet> {
    if lmax < 1 {
        return Err(NeedletError::InvalidParameter("field degree must be at least 1".into()));
    }
    check_degree(lmax)?;
    let std = spectrum_std(spectrum, lmax)?;
    Ok(AlmSet { lmax, coeffs: draw_replica(&std, seed, replica), seed })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BetaSample {
    pub t: f64,
    pub point: (f64, f64),
    pub value: f64,
}

/// `f(t^2 lambda_l) Y_l^m(x)` for every coefficient index, so that `beta = <a, w>`.
#[derive(Debug, Clone)]
pub struct ProbeWeights {
    lmax: usize,
    weights: Vec<f64>,
}

impl ProbeWeights {
    pub fn new(profile: &NeedletProfile, t: f64, point: (f64, f64), lmax: usize) -> Result<Self> {
        let mut weights = real_harmonics_at(lmax, point.0, point.1)?;
        weights[0] = 0.0;
        for l in 1..=lmax {
            let f = profile.eval(t * t * laplacian_eigenvalue(l));
            for w in &mut weights[harmonic_index(l, -(l as i64))..=harmonic_index(l, l as i64)] {
                *w *= f;
            }
        }
        Ok(Self { lmax, weights })
    }

    pub fn lmax(&self) -> usize {
        self.lmax
    }

    pub fn apply(&self, coeffs: &[f64]) -> f64 {
        coeffs.iter().zip(&self.weights).map(|(a, w)| a * w).sum()
    }
}

fn required_lmax(profile: &NeedletProfile, t: f64) -> Result<usize> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(NeedletError::InvalidParameter(format!("scale t must be positive, got {t}")));
    }
    choose_lmax(profile, t, DEFAULT_EPS_TAIL)
}

/// `beta_{t,x} = sum_{l,m} f(t^2 lambda_l) a_{l,m} Y_l^m(x)`.
///
/// The field must carry every degree the kernel needs at scale `t`.
pub fn beta_at(alm: &AlmSet, profile: &NeedletProfile, t: f64, point: (f64, f64)) -> Result<BetaSample> {
    let required = required_lmax(profile, t)?;
    if alm.lmax < required {
        return Err(NeedletError::DegreeInsufficient { required, available: alm.lmax });
    }
    let w = ProbeWeights::new(profile, t, point, alm.lmax)?;
    Ok(BetaSample { t, point, value: w.apply(&alm.coeffs) })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct MonteCarloEstimate {
    pub estimate: f64,
    pub stderr: f64,
    pub replicas: usize,
    pub lmax: usize,
    pub seed: u64,
}

/// Sample correlation of paired values with its leave-one-out jackknife standard error.
pub fn jackknife_correlation(xs: &[f64], ys: &[f64]) -> Result<(f64, f64)> {
    let n = xs.len();
    if n < 3 || ys.len() != n {
        return Err(NeedletError::InvalidParameter(format!("jackknife needs >= 3 pairs, got {n}")));
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if !(sxx > 0.0 && syy > 0.0) {
        return Err(NeedletError::Degenerate("zero sample variance in correlation estimate".into()));
    }
    let corr = |sxx: f64, syy: f64, sxy: f64| (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0);
    let estimate = corr(sxx, syy, sxy);
    // removing a point changes the centered sums by n/(n-1) times its outer product
    let k = nf / (nf - 1.0);
    let loo: Vec<f64> = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let (dx, dy) = (x - mx, y - my);
            corr(sxx - k * dx * dx, syy - k * dy * dy, sxy - k * dx * dy)
        })
        .collect();
    let mean = loo.iter().sum::<f64>() / nf;
    let ss: f64 = loo.iter().map(|r| (r - mean) * (r - mean)).sum();
    Ok((estimate, ((nf - 1.0) / nf * ss).sqrt()))
}

/// Draws `(beta_{t,x}, beta_{t,y})` for each replica, in replica order.
pub fn beta_pairs(
    profile: &NeedletProfile,
    spectrum: &PowerSpectrum,
    t: f64,
    point_x: (f64, f64),
    point_y: (f64, f64),
    replicas: usize,
    seed: u64,
) -> Result<(Vec<f64>, Vec<f64>, usize)> {
    let lmax = required_lmax(profile, t)?;
    let std = spectrum_std(spectrum, lmax)?;
    let wx = ProbeWeights::new(profile, t, point_x, lmax)?;
    let wy = ProbeWeights::new(profile, t, point_y, lmax)?;
    let pairs: Vec<(f64, f64)> = (0..replicas as u64)
        .into_par_iter()
        .map(|i| {
            let mut stream = CoefficientStream::new(seed, i, harmonic_index(1, -1));
            let (mut bx, mut by) = (0.0, 0.0);
            for (l, &sd) in std.iter().enumerate().skip(1) {
                for idx in harmonic_index(l, -(l as i64))..=harmonic_index(l, l as i64) {
                    let a = sd * stream.next_normal();
                    bx += a * wx.weights[idx];
                    by += a * wy.weights[idx];
                }
            }
            (bx, by)
        })
        .collect();
    let (xs, ys) = pairs.into_iter().unzip();
    Ok((xs, ys, lmax))
}

/// Monte-Carlo `Cor(beta_{t,x}, beta_{t,y})` over independent fields.
///
/// Replica `i` is [`sample_alm_replica`]`(spectrum, lmax, seed, i)`, so the
/// result is bit-identical for any thread count.
pub fn monte_carlo_correlation(
    profile: &NeedletProfile,
    spectrum: &PowerSpectrum,
    t: f64,
    point_x: (f64, f64),
    point_y: (f64, f64),
    replicas: usize,
    seed: u64,
) -> Result<MonteCarloEstimate> {
    if replicas < MIN_REPLICAS {
        return Err(NeedletError::InvalidParameter(format!(
            "at least {MIN_REPLICAS} replicas are required, got {replicas}"
        )));
    }
    let (xs, ys, lmax) = beta_pairs(profile, spectrum, t, point_x, point_y, replicas, seed)?;
    let (estimate, stderr) = jackknife_correlation(&xs, &ys)?;
    Ok(MonteCarloEstimate { estimate, stderr, replicas, lmax, seed })
}

/// `|sum_m Y_l^m(x) Y_l^m(y) - (2l+1)/(4 pi) P_l(x.y)|`.
pub fn addition_theorem_check(l: usize, point_x: (f64, f64), point_y: (f64, f64)) -> Result<f64> {
    check_degree(l)?;
    let yx = real_harmonics_at(l, point_x.0, point_x.1)?;
    let yy = real_harmonics_at(l, point_y.0, point_y.1)?;
    let lhs: f64 = (harmonic_index(l, -(l as i64))..=harmonic_index(l, l as i64)).map(|i| yx[i] * yy[i]).sum();
    let p = LegendreTable::new(cos_angle(point_x, point_y), l)?.values()[l];
    Ok((lhs - (2 * l + 1) as f64 / (4.0 * std::f64::consts::PI) * p).abs())
}
