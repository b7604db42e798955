//! Needlet profiles `f(s) = s^r f0(s)`, the zonal kernel
//! `K_t(cos g) = sum_{l>=1} f(t^2 l(l+1)) (2l+1) P_l(cos g)`, its truncation,
//! localization probes and the Calderon sums behind the frame constants.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{NeedletError, Result};
use crate::legendre::{checked_unit, laplacian_eigenvalue, LegendreIter};
use crate::numeric::{degree_cap, linspace, spread_ratio, CompensatedSum};

/// Default relative tail tolerance for truncated zonal series.
pub const DEFAULT_EPS_TAIL: f64 = 1e-12;

/// Truncated series never stop below this degree.
pub const MIN_LMAX: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileFamily {
    /// `f0(s) = e^{-s}` (Mexican needlets)
    Exponential,
    /// `f0(s) = e^{-s^2}`
    Gaussian,
}

impl ProfileFamily {
    fn ln_f0(self, s: f64) -> f64 {
        match self {
            ProfileFamily::Exponential => -s,
            ProfileFamily::Gaussian => -s * s,
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        match name.trim().to_ascii_lowercase().as_str() {
            "exponential" | "exp" | "mexican" => Ok(ProfileFamily::Exponential),
            "gaussian" | "gauss" => Ok(ProfileFamily::Gaussian),
            other => Err(NeedletError::InvalidParameter(format!(
                "unknown f0 family '{other}' (expected exponential or gaussian)"
            ))),
        }
    }
}

/// Spectral window `f(s) = s^r f0(s)` with `r >= 1`, so `f(0) = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NeedletProfile {
    r: u32,
    f0: ProfileFamily,
}

impl NeedletProfile {
    pub fn new(r: u32, f0: ProfileFamily) -> Result<Self> {
        if r == 0 {
            return Err(NeedletError::InvalidParameter("profile exponent r must be >= 1".into()));
        }
        Ok(Self { r, f0 })
    }

    /// Mexican needlet profile `s^r e^{-s}`.
    pub fn mexican(r: u32) -> Result<Self> {
        Self::new(r, ProfileFamily::Exponential)
    }

    pub fn r(&self) -> u32 {
        self.r
    }

    pub fn f0(&self) -> ProfileFamily {
        self.f0
    }

    /// `ln f(s)` for `s > 0`.
    pub fn ln_eval(&self, s: f64) -> f64 {
        self.r as f64 * s.ln() + self.f0.ln_f0(s)
    }

    pub fn eval(&self, s: f64) -> f64 {
        self.eval_pow(s, 1)
    }

    /// `f(s)^power`, computed in log space.
    pub fn eval_pow(&self, s: f64, power: u32) -> f64 {
        if s <= 0.0 {
            return 0.0;
        }
        (power as f64 * self.ln_eval(s)).exp()
    }

    /// Maximizer of `f` on `(0, inf)`.
    pub fn peak(&self) -> f64 {
        match self.f0 {
            ProfileFamily::Exponential => self.r as f64,
            ProfileFamily::Gaussian => (self.r as f64 / 2.0).sqrt(),
        }
    }
}

fn check_scale(t: f64) -> Result<()> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(NeedletError::InvalidParameter(format!("scale t must be positive, got {t}")));
    }
    Ok(())
}

/// Smallest `lmax` with `sum_{l>lmax} w_l <= eps * sum_{l<=lmax} w_l`, where
/// `w_l = f(t^2 l(l+1))^power (2l+1)`.
pub fn choose_lmax_pow(profile: &NeedletProfile, t: f64, eps_tail: f64, power: u32) -> Result<usize> {
    check_scale(t)?;
    if !(eps_tail > 0.0 && eps_tail < 1.0) {
        return Err(NeedletError::InvalidParameter(format!("eps_tail must lie in (0, 1), got {eps_tail}")));
    }
    let cap = degree_cap();
    let peak = profile.peak();
    let t2 = t * t;
    // scan past the peak until terms are negligible against anything kept
    let mut terms = vec![0.0];
    let mut max_term = 0.0f64;
    let mut l = 1usize;
    loop {
        let s = t2 * laplacian_eigenvalue(l);
        let w = profile.eval_pow(s, power) * (2 * l + 1) as f64;
        max_term = max_term.max(w);
        terms.push(w);
        if s > peak && (w <= max_term * 1e-40 || w == 0.0) {
            break;
        }
        if l > 4 * cap {
            return Err(NeedletError::DegreeCap { requested: l, cap });
        }
        l += 1;
    }
    let far = terms.len() - 1;
    let mut tail = vec![0.0; far + 1];
    for l in (1..far).rev() {
        tail[l] = tail[l + 1] + terms[l + 1];
    }
    let mut head = 0.0;
    let mut lmax = far;
    for (l, &w) in terms.iter().enumerate().skip(1) {
        head += w;
        if tail[l] <= eps_tail * head {
            lmax = l;
            break;
        }
    }
    let lmax = lmax.max(MIN_LMAX);
    if lmax > cap {
        return Err(NeedletError::DegreeCap { requested: lmax, cap });
    }
    Ok(lmax)
}

/// Truncation degree for the kernel series.
pub fn choose_lmax(profile: &NeedletProfile, t: f64, eps_tail: f64) -> Result<usize> {
    choose_lmax_pow(profile, t, eps_tail, 1)
}

/// Truncated kernel: `coeffs[l] = f(t^2 l(l+1)) (2l+1)`, `coeffs[0] = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelSpec {
    profile: NeedletProfile,
    t: f64,
    coeffs: Vec<f64>,
}

impl KernelSpec {
    pub fn new(profile: NeedletProfile, t: f64, eps_tail: f64) -> Result<Self> {
        let lmax = choose_lmax(&profile, t, eps_tail)?;
        Self::with_lmax(profile, t, lmax)
    }

    pub fn with_lmax(profile: NeedletProfile, t: f64, lmax: usize) -> Result<Self> {
        check_scale(t)?;
        crate::legendre::check_degree(lmax)?;
        let t2 = t * t;
        let coeffs = (0..=lmax).map(|l| profile.eval(t2 * laplacian_eigenvalue(l)) * (2 * l + 1) as f64).collect();
        Ok(Self { profile, t, coeffs })
    }

    /// Arbitrary zonal coefficients (already including the `2l+1` factor).
    pub fn from_coeffs(profile: NeedletProfile, t: f64, coeffs: Vec<f64>) -> Result<Self> {
        check_scale(t)?;
        if coeffs.is_empty() {
            return Err(NeedletError::EmptySequence);
        }
        crate::legendre::check_degree(coeffs.len() - 1)?;
        Ok(Self { profile, t, coeffs })
    }

    pub fn profile(&self) -> &NeedletProfile {
        &self.profile
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn lmax(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// `K_t` at angular separation with cosine `cos_gamma`.
    pub fn eval(&self, cos_gamma: f64) -> Result<f64> {
        let x = checked_unit(cos_gamma, "kernel argument")?;
        let acc: CompensatedSum = LegendreIter::new(x, self.lmax()).map(|(l, p)| self.coeffs[l] * p).collect();
        Ok(acc.value())
    }

    /// Kernel value for two points given as unit vectors.
    pub fn eval_points(&self, x: [f64; 3], y: [f64; 3]) -> Result<f64> {
        let dot = (x[0] * y[0] + x[1] * y[1] + x[2] * y[2]).clamp(-1.0, 1.0);
        self.eval(dot)
    }
}

/// Default number of colatitudes probed by localization checks.
pub const DEFAULT_THETA_SAMPLES: usize = 2048;

/// Localization cap: the per-scale sups must agree within this factor.
pub const DEFAULT_UNIFORMITY_RATIO: f64 = 10.0;

#[derive(Debug, Clone, Serialize)]
pub struct LocalizationEntry {
    pub t: f64,
    pub lmax: usize,
    pub sup: f64,
    pub argmax_theta: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct LocalizationReport {
    pub n: u32,
    pub entries: Vec<LocalizationEntry>,
    pub ratio: f64,
    pub ratio_cap: f64,
    pub pass: bool,
}

/// `sup_{theta in [t, pi]} t^2 |K_t(cos theta)| (theta/t)^n` on an even grid.
pub fn localization_sup(spec: &KernelSpec, n: u32, samples: usize) -> Result<(f64, f64)> {
    let t = spec.t();
    let mut best = (0.0f64, t);
    for theta in linspace(t.min(PI), PI, samples.max(2)) {
        let v = t * t * spec.eval(theta.cos())?.abs() * (theta / t).powi(n as i32);
        if v > best.0 {
            best = (v, theta);
        }
    }
    Ok(best)
}

/// Checks that the scaled kernel decay bound holds with a common constant over `t_list`.
pub fn localization_check(
    profile: &NeedletProfile,
    t_list: &[f64],
    n: u32,
    samples: usize,
    eps_tail: f64,
) -> Result<LocalizationReport> {
    if n < 1 {
        return Err(NeedletError::InvalidParameter("localization order N must be >= 1".into()));
    }
    let mut entries = Vec::with_capacity(t_list.len());
    for &t in t_list {
        let spec = KernelSpec::new(*profile, t, eps_tail)?;
        let (sup, argmax_theta) = localization_sup(&spec, n, samples)?;
        entries.push(LocalizationEntry { t, lmax: spec.lmax(), sup, argmax_theta });
    }
    let sups: Vec<f64> = entries.iter().map(|e| e.sup).collect();
    let ratio = spread_ratio(&sups);
    let pass = sups.iter().all(|s| s.is_finite()) && ratio <= DEFAULT_UNIFORMITY_RATIO;
    Ok(LocalizationReport { n, entries, ratio, ratio_cap: DEFAULT_UNIFORMITY_RATIO, pass })
}

fn check_dilation(a: f64) -> Result<()> {
    if !(a > 1.0 + 1e-9) || !a.is_finite() {
        return Err(NeedletError::InvalidParameter(format!("dilation a must exceed 1, got {a}")));
    }
    Ok(())
}

const CALDERON_TERM_FLOOR: f64 = 1e-16;
const CALDERON_MAX_STEPS: i64 = 1_000_000;

/// `g(lambda) = sum_{j in Z} f(a^{2j} lambda)^2`, truncated once terms on
/// either side of the peak fall below `1e-16` of the running sum.
pub fn calderon_sum(profile: &NeedletProfile, a: f64, lambda: f64) -> Result<f64> {
    check_dilation(a)?;
    if !(lambda > 0.0) {
        return Err(NeedletError::InvalidParameter(format!("lambda must be positive, got {lambda}")));
    }
    let peak = profile.peak();
    let a2 = a * a;
    let mut acc = CompensatedSum::new();
    for dir in [1i64, -1] {
        let mut j = if dir == 1 { 0 } else { -1 };
        loop {
            let s = lambda * a2.powi(j as i32);
            let term = profile.eval_pow(s, 2);
            acc.add(term);
            let outward = if dir == 1 { s > peak } else { s < peak };
            if outward && term <= CALDERON_TERM_FLOOR * acc.value() {
                break;
            }
            j += dir;
            if j.abs() > CALDERON_MAX_STEPS {
                return Err(NeedletError::Degenerate(format!("Calderon sum did not converge for a = {a}")));
            }
        }
    }
    Ok(acc.value())
}

/// Ideal frame constants `A_a = min g`, `B_a = max g` over one period `[1, a^2]`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CalderonBounds {
    pub a: f64,
    pub lower: f64,
    pub upper: f64,
}

impl CalderonBounds {
    pub fn ratio(&self) -> f64 {
        self.upper / self.lower
    }
}

pub const DEFAULT_CALDERON_SAMPLES: usize = 4096;

pub fn calderon_bounds(profile: &NeedletProfile, a: f64, samples: usize) -> Result<CalderonBounds> {
    check_dilation(a)?;
    let samples = samples.max(2);
    let ln_period = 2.0 * a.ln();
    let mut lower = f64::INFINITY;
    let mut upper = 0.0f64;
    for k in 0..samples {
        let lambda = (ln_period * k as f64 / samples as f64).exp();
        let g = calderon_sum(profile, a, lambda)?;
        lower = lower.min(g);
        upper = upper.max(g);
    }
    Ok(CalderonBounds { a, lower, upper })
}
