//! Covariance and correlation of needlet coefficients of an isotropic Gaussian
//! field, and numerical probes of their decay as the scale shrinks.
//!
//! With `G_t(l) = f(t^2 l(l+1))^2 c_l`:
//!
//! ```text
//! E(b_{t,x} b_{t,y}) = sum_{l>=1} G_t(l) (2l+1) P_l(x.y)
//! Cor(t, x.y)        = E(b_{t,x} b_{t,y}) / E(b_{t,x}^2)
//! ```
//!
//! The `1/|S^2|` factor of the zonal functions is dropped; correlations do not
//! depend on it.

use serde::Serialize;

use crate::difference::{apply_p_iter, CoeffSequence};
use crate::error::{NeedletError, Result};
use crate::kernel::{choose_lmax_pow, NeedletProfile, DEFAULT_EPS_TAIL, DEFAULT_UNIFORMITY_RATIO};
use crate::legendre::{checked_unit, laplacian_eigenvalue, zonal_series, LegendreIter};
use crate::numeric::{linspace, loglog_slope, spread_ratio, CompensatedSum};
use crate::spectrum::PowerSpectrum;

/// Variances below this are treated as numerically zero.
pub const VARIANCE_FLOOR: f64 = 1e-280;

/// Allowed shortfall of the fitted slope below the predicted exponent.
pub const DEFAULT_SLOPE_TOLERANCE: f64 = 0.5;

/// Number of smallest scales used in decay fits.
pub const DEFAULT_FIT_POINTS: usize = 4;

/// Below this colatitude the lemma probe evaluates the series directly.
pub const LEMMA_DIRECT_THETA: f64 = 0.1;

/// One covariance/correlation evaluation.
#[derive(Debug, Clone, Copy)]
pub struct CorrelationQuery<'a> {
    pub profile: &'a NeedletProfile,
    pub spectrum: &'a PowerSpectrum,
    pub t: f64,
    pub cos_gamma: f64,
}

impl<'a> CorrelationQuery<'a> {
    pub fn new(profile: &'a NeedletProfile, spectrum: &'a PowerSpectrum, t: f64, cos_gamma: f64) -> Result<Self> {
        if !(t > 0.0) || !t.is_finite() {
            return Err(NeedletError::InvalidParameter(format!("scale t must be positive, got {t}")));
        }
        let cos_gamma = checked_unit(cos_gamma, "cos_gamma")?;
        Ok(Self { profile, spectrum, t, cos_gamma })
    }

    /// Geodesic distance `arccos(x.y)`.
    pub fn distance(&self) -> f64 {
        self.cos_gamma.acos()
    }

    pub fn with_cos_gamma(&self, cos_gamma: f64) -> Self {
        Self { cos_gamma, ..*self }
    }

    /// Truncation degree of the covariance series (tail bound on `f^2`).
    pub fn lmax(&self) -> Result<usize> {
        choose_lmax_pow(self.profile, self.t, DEFAULT_EPS_TAIL, 2)
    }
}

/// `sum_{l=1}^{lmax} f(t^2 l(l+1))^2 c_l (2l+1) P_l(cos_gamma)`.
pub fn analytic_covariance(q: &CorrelationQuery<'_>) -> Result<f64> {
    let lmax = q.lmax()?;
    let t2 = q.t * q.t;
    let mut acc = CompensatedSum::new();
    for (l, p) in LegendreIter::new(q.cos_gamma, lmax).skip(1) {
        let s = t2 * laplacian_eigenvalue(l);
        let c = q.spectrum.eval(l)?;
        let weight = if s > 0.0 && c > 0.0 { (2.0 * q.profile.ln_eval(s) + c.ln()).exp() } else { 0.0 };
        acc.add(weight * (2 * l + 1) as f64 * p);
    }
    Ok(acc.value())
}

/// Covariance normalized by the variance; exactly 1 at `cos_gamma = 1`.
pub fn analytic_correlation(q: &CorrelationQuery<'_>) -> Result<f64> {
    let variance = analytic_covariance(&q.with_cos_gamma(1.0))?;
    if !(variance > VARIANCE_FLOOR) || !variance.is_finite() {
        return Err(NeedletError::Degenerate(format!(
            "variance {variance:e} at t = {} is below the floor; the scale is too large",
            q.t
        )));
    }
    if q.cos_gamma == 1.0 {
        return Ok(1.0);
    }
    let cov = analytic_covariance(q)?;
    // |P_l| <= 1 bounds the ratio by 1; clamp recurrence round-off
    Ok((cov / variance).clamp(-1.0, 1.0))
}

/// `G_t(l) = f(t^2 l(l+1))^2 u(l)` for `l = 1..=lmax`, with `a_0 = 0`.
pub fn gt_coefficients(
    profile: &NeedletProfile,
    spectrum: &PowerSpectrum,
    t: f64,
    lmax: usize,
) -> Result<CoeffSequence> {
    if !(t > 0.0) {
        return Err(NeedletError::InvalidParameter(format!("scale t must be positive, got {t}")));
    }
    let mut values = Vec::with_capacity(lmax + 1);
    values.push(0.0);
    for l in 1..=lmax {
        let g = profile.eval(t * t * laplacian_eigenvalue(l));
        values.push(g * g * spectrum.eval(l)?);
    }
    Ok(CoeffSequence::new(0, values))
}

/// Least integer strictly greater than `x`.
pub fn least_integer_above(x: f64) -> usize {
    let f = x.floor();
    (f as i64 + 1).max(0) as usize
}

#[derive(Debug, Clone, Serialize)]
pub struct LemmaReport {
    pub mu: f64,
    pub n: usize,
    /// `sup_theta theta^{2N} |sum_l a_l Z_l(cos theta)|` over the grid.
    pub sup_value: f64,
    pub argmax_theta: f64,
    pub samples: usize,
}

pub const DEFAULT_LEMMA_SAMPLES: usize = 2048;

/// Probes `|sum_l a_l Z_l(cos theta)| <= C theta^{-2N}` with `N` the least
/// integer above `mu/2 + 1`.
///
/// For `theta >= 0.1` the series is evaluated through `P^N a`, divided by
/// `|cos theta - 1|^N`; closer to the pole it is summed directly.
pub fn lemma_bound_check(a: &CoeffSequence, mu: f64, samples: usize) -> Result<LemmaReport> {
    if !(mu + 2.0 > 0.0) {
        return Err(NeedletError::InvalidParameter(format!("lemma needs mu + 2 > 0, got mu = {mu}")));
    }
    if a.is_empty() {
        return Err(NeedletError::EmptySequence);
    }
    let n = least_integer_above(mu / 2.0 + 1.0);
    let an = apply_p_iter(a, n)?;
    let dense = a.to_dense();
    let dense_n = an.to_dense();
    let samples = samples.max(2);
    let mut sup_value = 0.0f64;
    let mut argmax_theta = std::f64::consts::PI;
    for k in 1..=samples {
        let theta = std::f64::consts::PI * k as f64 / samples as f64;
        let x = theta.cos();
        let v = if theta >= LEMMA_DIRECT_THETA {
            zonal_series(&dense_n, x)?.abs() * theta.powi(2 * n as i32) / (1.0 - x).powi(n as i32)
        } else {
            zonal_series(&dense, x)?.abs() * theta.powi(2 * n as i32)
        };
        if v > sup_value {
            sup_value = v;
            argmax_theta = theta;
        }
    }
    Ok(LemmaReport { mu, n, sup_value, argmax_theta, samples })
}

#[derive(Debug, Clone, Serialize)]
pub struct LemmaScaleEntry {
    pub t: f64,
    pub lmax: usize,
    pub sup_value: f64,
    /// `sup_value / t^{4r}`, the scale-free constant of the covariance bound.
    pub normalized_sup: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct LemmaScaleReport {
    pub mu: f64,
    pub n: usize,
    pub entries: Vec<LemmaScaleEntry>,
    pub raw_ratio: f64,
    pub normalized_ratio: f64,
    pub ratio_cap: f64,
    /// Every sup finite and the normalized sups agree within `ratio_cap`.
    pub pass: bool,
}

/// Decay exponent of `G_t(l)` in `l`: `4r - alpha`.
pub fn gt_decay_exponent(profile: &NeedletProfile, spectrum: &PowerSpectrum) -> f64 {
    4.0 * profile.r() as f64 - spectrum.alpha()
}

/// Runs [`lemma_bound_check`] on `G_t` coefficients for each scale.
pub fn lemma_scale_sweep(
    profile: &NeedletProfile,
    spectrum: &PowerSpectrum,
    mu: f64,
    t_grid: &[f64],
    samples: usize,
) -> Result<LemmaScaleReport> {
    if !(mu + 2.0 > 0.0) {
        return Err(NeedletError::InvalidParameter(format!("lemma needs mu + 2 > 0, got mu = {mu}")));
    }
    let mut entries = Vec::with_capacity(t_grid.len());
    let mut n = least_integer_above(mu / 2.0 + 1.0);
    for &t in t_grid {
        let lmax = choose_lmax_pow(profile, t, DEFAULT_EPS_TAIL, 2)?;
        let a = gt_coefficients(profile, spectrum, t, lmax)?;
        let rep = lemma_bound_check(&a, mu, samples)?;
        n = rep.n;
        entries.push(LemmaScaleEntry {
            t,
            lmax,
            sup_value: rep.sup_value,
            normalized_sup: rep.sup_value / t.powi(4 * profile.r() as i32),
        });
    }
    let raw: Vec<f64> = entries.iter().map(|e| e.sup_value).collect();
    let normalized: Vec<f64> = entries.iter().map(|e| e.normalized_sup).collect();
    let raw_ratio = spread_ratio(&raw);
    let normalized_ratio = spread_ratio(&normalized);
    let pass = raw.iter().all(|v| v.is_finite()) && normalized_ratio <= DEFAULT_UNIFORMITY_RATIO;
    Ok(LemmaScaleReport { mu, n, entries, raw_ratio, normalized_ratio, ratio_cap: DEFAULT_UNIFORMITY_RATIO, pass })
}

#[derive(Debug, Clone, Serialize)]
pub struct DenominatorEntry {
    pub t: f64,
    pub lmax: usize,
    pub variance: f64,
    /// `variance * t^{2 - alpha}`
    pub scaled: f64,
    /// `t <= 0.5` and `lmax >= 64`.
    pub asymptotic_regime: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct DenominatorReport {
    pub entries: Vec<DenominatorEntry>,
    pub inf_scaled: f64,
    pub ratio: f64,
    pub ratio_cap: f64,
    pub pass: bool,
}

/// Checks `sum (2l+1) c_l f(t^2 l(l+1))^2 >= c t^{alpha-2}` across a grid of scales.
pub fn denominator_lower_bound_check(
    profile: &NeedletProfile,
    spectrum: &PowerSpectrum,
    t_grid: &[f64],
) -> Result<DenominatorReport> {
    let mut entries = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        let q = CorrelationQuery::new(profile, spectrum, t, 1.0)?;
        let lmax = q.lmax()?;
        let variance = analytic_covariance(&q)?;
        entries.push(DenominatorEntry {
            t,
            lmax,
            variance,
            scaled: variance * t.powf(2.0 - spectrum.alpha()),
            asymptotic_regime: t <= 0.5 && lmax >= 64,
        });
    }
    let scaled: Vec<f64> = entries.iter().map(|e| e.scaled).collect();
    let inf_scaled = scaled.iter().cloned().fold(f64::INFINITY, f64::min);
    let ratio = spread_ratio(&scaled);
    let pass = inf_scaled > 0.0 && ratio <= DEFAULT_UNIFORMITY_RATIO;
    Ok(DenominatorReport { entries, inf_scaled, ratio, ratio_cap: DEFAULT_UNIFORMITY_RATIO, pass })
}

#[derive(Debug, Clone, Serialize)]
pub struct DecayReport {
    pub r: u32,
    pub alpha: f64,
    pub cos_gamma: f64,
    pub distance: f64,
    pub t_grid: Vec<f64>,
    pub correlations: Vec<f64>,
    /// Scales used by the fit (the smallest few of the grid).
    pub fit_t: Vec<f64>,
    pub fitted_slope: f64,
    pub predicted_exponent: f64,
    pub n: usize,
    /// `|Cor| d^{2N} t^{-(4r - alpha + 2)}` per scale.
    pub scaled_bounds: Vec<f64>,
    pub bound_constant: f64,
    pub bound_ratio: f64,
    pub slope_tolerance: f64,
    pub ratio_cap: f64,
    pub slope_pass: bool,
    pub bound_pass: bool,
    pub pass: bool,
}

/// Exponent `4r - alpha + 2` and `N` (least integer above `2r - alpha/2 + 1`).
pub fn theorem_constants(r: u32, alpha: f64) -> (f64, usize) {
    let r = r as f64;
    (4.0 * r - alpha + 2.0, least_integer_above(2.0 * r - alpha / 2.0 + 1.0))
}

/// Bound constant `|Cor| d^{2N} / t^{4r - alpha + 2}` for one evaluation.
pub fn scaled_bound(correlation: f64, distance: f64, t: f64, exponent: f64, n: usize) -> f64 {
    correlation.abs() * distance.powi(2 * n as i32) / t.powf(exponent)
}

pub fn check_theorem_hypothesis(r: u32, alpha: f64) -> Result<()> {
    if 4.0 * r as f64 + 2.0 <= alpha {
        return Err(NeedletError::Hypothesis(format!(
            "4r + 2 > alpha fails for r = {r}, alpha = {alpha}; raise r above {}",
            ((alpha - 2.0) / 4.0).floor()
        )));
    }
    Ok(())
}

/// Fits the decay of `|Cor(t)|` at fixed separation against `t^{4r - alpha + 2}`.
pub fn theorem_decay_check(
    profile: &NeedletProfile,
    spectrum: &PowerSpectrum,
    cos_gamma: f64,
    t_grid: &[f64],
) -> Result<DecayReport> {
    let (r, alpha) = (profile.r(), spectrum.alpha());
    check_theorem_hypothesis(r, alpha)?;
    let cos_gamma = checked_unit(cos_gamma, "cos_gamma")?;
    let distance = cos_gamma.acos();
    if distance < 0.1 {
        return Err(NeedletError::InvalidParameter(format!("decay check needs separation d >= 0.1, got {distance}")));
    }
    if t_grid.len() < 2 {
        return Err(NeedletError::InvalidParameter("decay check needs at least two scales".into()));
    }
    let (predicted_exponent, n) = theorem_constants(r, alpha);
    let mut correlations = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        let q = CorrelationQuery::new(profile, spectrum, t, cos_gamma)?;
        correlations.push(analytic_correlation(&q)?);
    }
    let mut order: Vec<usize> = (0..t_grid.len()).collect();
    order.sort_by(|&i, &j| t_grid[i].total_cmp(&t_grid[j]));
    order.truncate(DEFAULT_FIT_POINTS);
    let fit_t: Vec<f64> = order.iter().map(|&i| t_grid[i]).collect();
    let fit_c: Vec<f64> = order.iter().map(|&i| correlations[i]).collect();
    let fitted_slope = loglog_slope(&fit_t, &fit_c);

    let scaled_bounds: Vec<f64> =
        t_grid.iter().zip(&correlations).map(|(&t, &c)| scaled_bound(c, distance, t, predicted_exponent, n)).collect();
    let bound_constant = scaled_bounds.iter().cloned().fold(0.0, f64::max);
    let bound_ratio = spread_ratio(&scaled_bounds);
    let slope_pass = fitted_slope >= predicted_exponent - DEFAULT_SLOPE_TOLERANCE;
    let bound_pass = bound_constant.is_finite() && bound_ratio <= DEFAULT_UNIFORMITY_RATIO;
    Ok(DecayReport {
        r,
        alpha,
        cos_gamma,
        distance,
        t_grid: t_grid.to_vec(),
        correlations,
        fit_t,
        fitted_slope,
        predicted_exponent,
        n,
        scaled_bounds,
        bound_constant,
        bound_ratio,
        slope_tolerance: DEFAULT_SLOPE_TOLERANCE,
        ratio_cap: DEFAULT_UNIFORMITY_RATIO,
        slope_pass,
        bound_pass,
        pass: slope_pass && bound_pass,
    })
}

/// Correlation profile over colatitudes, for plotting.
pub fn correlation_curve(
    profile: &NeedletProfile,
    spectrum: &PowerSpectrum,
    t: f64,
    theta_min: f64,
    theta_max: f64,
    samples: usize,
) -> Result<Vec<(f64, f64)>> {
    linspace(theta_min, theta_max, samples)
        .into_iter()
        .map(|theta| {
            let q = CorrelationQuery::new(profile, spectrum, t, theta.cos())?;
            Ok((theta, analytic_correlation(&q)?))
        })
        .collect()
}
