//! Angular power spectra `c_l = u(l)` decaying like `l^{-alpha}`.
//!
//! Families:
//! * pure power law `u(s) = s^{-alpha}`;
//! * rational-log `u(s) = F(log s) P(s) / (s^beta Q(s))` with polynomial
//!   coefficients in ascending powers and `F` from a small catalog;
//! * tabulated values `(l, c_l)` with a declared `alpha`.
//!
//! All families use the decaying convention `k0 s^{-alpha} <= u(s) <= k1 s^{-alpha}`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{NeedletError, Result};

/// Smooth positive functions with bounded derivatives used as `F(log s)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogModulation {
    /// `F(v) = 1`
    One,
    /// `F(v) = 2 + sin v`
    TwoPlusSin,
    /// `F(v) = 2 + cos v`
    TwoPlusCos,
}

impl LogModulation {
    pub fn eval(self, v: f64) -> f64 {
        match self {
            LogModulation::One => 1.0,
            LogModulation::TwoPlusSin => 2.0 + v.sin(),
            LogModulation::TwoPlusCos => 2.0 + v.cos(),
        }
    }

    pub fn derivative(self, v: f64) -> f64 {
        match self {
            LogModulation::One => 0.0,
            LogModulation::TwoPlusSin => v.cos(),
            LogModulation::TwoPlusCos => -v.sin(),
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        match name.trim().to_ascii_lowercase().as_str() {
            "one" | "1" | "const" => Ok(LogModulation::One),
            "two_plus_sin" | "2+sin" => Ok(LogModulation::TwoPlusSin),
            "two_plus_cos" | "2+cos" => Ok(LogModulation::TwoPlusCos),
            other => {
                Err(NeedletError::Spectrum(format!("unknown F '{other}' (expected one, two_plus_sin, two_plus_cos)")))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum SpectrumFamily {
    Power,
    RationalLog {
        beta: f64,
        #[serde(rename = "P")]
        p: Vec<f64>,
        #[serde(rename = "Q")]
        q: Vec<f64>,
        #[serde(rename = "F")]
        f: LogModulation,
    },
    /// `values[l - 1] = c_l`; `None` marks a degree missing from the table.
    Tabulated {
        values: Vec<Option<f64>>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowerSpectrum {
    alpha: f64,
    #[serde(flatten)]
    family: SpectrumFamily,
}

fn poly_eval(coeffs: &[f64], s: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * s + c)
}

fn poly_derivative(coeffs: &[f64], s: f64) -> f64 {
    coeffs.iter().enumerate().skip(1).rev().fold(0.0, |acc, (k, &c)| acc * s + k as f64 * c)
}

fn poly_degree(coeffs: &[f64]) -> usize {
    coeffs.iter().rposition(|&c| c != 0.0).unwrap_or(0)
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !alpha.is_finite() || alpha <= 2.0 {
        return Err(NeedletError::Spectrum(format!("alpha must exceed 2, got {alpha}")));
    }
    Ok(())
}

impl PowerSpectrum {
    pub fn power_law(alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        Ok(Self { alpha, family: SpectrumFamily::Power })
    }

    /// Rational-log family. The degree balance `beta + deg Q - deg P = alpha`
    /// is not enforced here; see [`PowerSpectrum::degree_balance`].
    pub fn rational_log(alpha: f64, beta: f64, p: Vec<f64>, q: Vec<f64>, f: LogModulation) -> Result<Self> {
        check_alpha(alpha)?;
        if !beta.is_finite() {
            return Err(NeedletError::Spectrum("beta must be finite".into()));
        }
        for (name, poly) in [("P", &p), ("Q", &q)] {
            if poly.is_empty() || poly.iter().any(|c| !c.is_finite()) {
                return Err(NeedletError::Spectrum(format!("{name} needs finite coefficients")));
            }
            // positivity on [1, inf): sampled on a log grid plus the leading sign
            let lead = poly[poly_degree(poly)];
            let sampled_ok = (0..=60).all(|k| poly_eval(poly, 10f64.powf(k as f64 / 10.0)) > 0.0);
            if lead <= 0.0 || !sampled_ok {
                return Err(NeedletError::Spectrum(format!("{name} must be positive on [1, inf)")));
            }
        }
        Ok(Self { alpha, family: SpectrumFamily::RationalLog { beta, p, q, f } })
    }

    /// Tabulated `c_1, c_2, ...`; negative or non-finite entries are rejected,
    /// zeros are kept so that consumers can report them.
    pub fn tabulated(alpha: f64, values: Vec<Option<f64>>) -> Result<Self> {
        check_alpha(alpha)?;
        if let Some((i, v)) =
            values.iter().enumerate().find_map(|(i, v)| v.filter(|v| !v.is_finite() || *v < 0.0).map(|v| (i, v)))
        {
            return Err(NeedletError::Spectrum(format!("c_{} = {v} is not a finite non-negative value", i + 1)));
        }
        Ok(Self { alpha, family: SpectrumFamily::Tabulated { values } })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn family(&self) -> &SpectrumFamily {
        &self.family
    }

    /// `beta + deg Q - deg P - alpha` for the rational-log family, zero for the
    /// power law, `None` for tables.
    pub fn degree_balance(&self) -> Option<f64> {
        match &self.family {
            SpectrumFamily::Power => Some(0.0),
            SpectrumFamily::RationalLog { beta, p, q, .. } => {
                Some(beta + poly_degree(q) as f64 - poly_degree(p) as f64 - self.alpha)
            }
            SpectrumFamily::Tabulated { .. } => None,
        }
    }

    /// `u(s)` at real `s >= 1`. Tables only answer at integer `s`.
    pub fn value(&self, s: f64) -> Result<f64> {
        if !(s >= 1.0) {
            return Err(NeedletError::Spectrum(format!("spectrum evaluated at s = {s} < 1")));
        }
        match &self.family {
            SpectrumFamily::Power => Ok(s.powf(-self.alpha)),
            SpectrumFamily::RationalLog { beta, p, q, f } => {
                Ok(f.eval(s.ln()) * poly_eval(p, s) / (s.powf(*beta) * poly_eval(q, s)))
            }
            SpectrumFamily::Tabulated { values } => {
                if s.fract() != 0.0 {
                    return Err(NeedletError::Spectrum(format!("tabulated spectrum has no value at s = {s}")));
                }
                let l = s as usize;
                values
                    .get(l - 1)
                    .copied()
                    .flatten()
                    .ok_or_else(|| NeedletError::Spectrum(format!("tabulated spectrum has no entry for l = {l}")))
            }
        }
    }

    /// `c_l = u(l)` for `l >= 1`.
    pub fn eval(&self, l: usize) -> Result<f64> {
        if l == 0 {
            return Err(NeedletError::Spectrum("c_0 is undefined; spectra start at l = 1".into()));
        }
        self.value(l as f64)
    }

    /// Analytic `u'(s)`; unavailable for tables.
    pub fn derivative(&self, s: f64) -> Option<f64> {
        match &self.family {
            SpectrumFamily::Power => Some(-self.alpha * s.powf(-self.alpha - 1.0)),
            SpectrumFamily::RationalLog { beta, p, q, f } => {
                let v = s.ln();
                let (pv, qv) = (poly_eval(p, s), poly_eval(q, s));
                let num = f.eval(v) * pv;
                let den = s.powf(*beta) * qv;
                let dnum = f.derivative(v) / s * pv + f.eval(v) * poly_derivative(p, s);
                let dden = beta * s.powf(beta - 1.0) * qv + s.powf(*beta) * poly_derivative(q, s);
                Some((dnum * den - num * dden) / (den * den))
            }
            SpectrumFamily::Tabulated { .. } => None,
        }
    }

    /// Loads the JSON definition format or a two-column `l,c_l` CSV table.
    /// `declared_alpha` is required for CSV tables and ignored for JSON.
    pub fn load(path: &Path, declared_alpha: Option<f64>) -> Result<Self> {
        let is_csv = path.extension().and_then(|e| e.to_str()).is_some_and(|e| e.eq_ignore_ascii_case("csv"));
        if is_csv {
            let alpha = declared_alpha
                .ok_or_else(|| NeedletError::Spectrum("a tabulated CSV spectrum needs a declared alpha".into()))?;
            let text = std::fs::read_to_string(path)?;
            Self::from_csv_str(&text, alpha)
        } else {
            let text = std::fs::read_to_string(path)?;
            Self::from_json_str(&text)
        }
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let file: SpectrumFile = serde_json::from_str(text)?;
        file.into_spectrum()
    }

    pub fn from_csv_str(text: &str, alpha: f64) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_reader(text.as_bytes());
        let mut values: Vec<Option<f64>> = Vec::new();
        for (row, record) in reader.records().enumerate() {
            let record = record?;
            if record.len() < 2 {
                return Err(NeedletError::Spectrum(format!("row {} needs two columns", row + 1)));
            }
            let Ok(l) = record[0].parse::<usize>() else {
                if row == 0 {
                    continue; // header
                }
                return Err(NeedletError::Spectrum(format!("row {}: bad degree '{}'", row + 1, &record[0])));
            };
            let c: f64 = record[1]
                .parse()
                .map_err(|_| NeedletError::Spectrum(format!("row {}: bad value '{}'", row + 1, &record[1])))?;
            if l == 0 {
                continue;
            }
            if values.len() < l {
                values.resize(l, None);
            }
            values[l - 1] = Some(c);
        }
        Self::tabulated(alpha, values)
    }

    /// Serializes to the JSON definition format (tables are not representable).
    pub fn to_json(&self) -> Option<String> {
        let file = match &self.family {
            SpectrumFamily::Power => {
                SpectrumFile { family: "power".into(), alpha: self.alpha, beta: None, p: None, q: None, f: None }
            }
            SpectrumFamily::RationalLog { beta, p, q, f } => SpectrumFile {
                family: "rational_log".into(),
                alpha: self.alpha,
                beta: Some(*beta),
                p: Some(p.clone()),
                q: Some(q.clone()),
                f: Some(serde_json::to_value(f).ok()?.as_str()?.to_string()),
            },
            SpectrumFamily::Tabulated { .. } => return None,
        };
        serde_json::to_string(&file).ok()
    }
}

/// On-disk JSON spectrum definition.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectrumFile {
    pub family: String,
    pub alpha: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(rename = "P", default, skip_serializing_if = "Option::is_none")]
    pub p: Option<Vec<f64>>,
    #[serde(rename = "Q", default, skip_serializing_if = "Option::is_none")]
    pub q: Option<Vec<f64>>,
    #[serde(rename = "F", default, skip_serializing_if = "Option::is_none")]
    pub f: Option<String>,
}

impl SpectrumFile {
    pub fn into_spectrum(self) -> Result<PowerSpectrum> {
        match self.family.as_str() {
            "power" => PowerSpectrum::power_law(self.alpha),
            "rational_log" => {
                let f = match &self.f {
                    Some(name) => LogModulation::parse(name)?,
                    None => LogModulation::One,
                };
                PowerSpectrum::rational_log(
                    self.alpha,
                    self.beta.unwrap_or(self.alpha),
                    self.p.unwrap_or_else(|| vec![1.0]),
                    self.q.unwrap_or_else(|| vec![1.0]),
                    f,
                )
            }
            other => Err(NeedletError::Spectrum(format!("unknown family '{other}' (expected power or rational_log)"))),
        }
    }
}

/// Empirical envelope `k0_hat <= u(l) l^alpha <= k1_hat` over `1..=l_max`.
#[derive(Debug, Clone, Serialize)]
pub struct EnvelopeReport {
    pub l_max: usize,
    pub k0_hat: f64,
    pub k1_hat: f64,
    pub ratio: f64,
    pub ratio_cap: f64,
    /// Smallest `F(log l)` seen, for rational-log spectra.
    pub f_min: Option<f64>,
    pub pass: bool,
}

pub const DEFAULT_ENVELOPE_RATIO_CAP: f64 = 50.0;

pub fn verify_envelope(ps: &PowerSpectrum, l_max: usize, ratio_cap: f64) -> Result<EnvelopeReport> {
    if l_max < 10 {
        return Err(NeedletError::InvalidParameter(format!("envelope check needs l_max >= 10, got {l_max}")));
    }
    let mut k0 = f64::INFINITY;
    let mut k1 = 0.0f64;
    for l in 1..=l_max {
        let scaled = ps.eval(l)? * (l as f64).powf(ps.alpha);
        k0 = k0.min(scaled);
        k1 = k1.max(scaled);
    }
    let f_min = match &ps.family {
        SpectrumFamily::RationalLog { f, .. } => {
            Some((1..=l_max).map(|l| f.eval((l as f64).ln())).fold(f64::INFINITY, f64::min))
        }
        _ => None,
    };
    let ratio = k1 / k0;
    let pass = k0 > 0.0 && k1.is_finite() && ratio <= ratio_cap && f_min.is_none_or(|m| m > 0.0);
    Ok(EnvelopeReport { l_max, k0_hat: k0, k1_hat: k1, ratio, ratio_cap, f_min, pass })
}

/// `sup |D^k u(l)| l^{alpha+k}` over the full window and over its first half.
#[derive(Debug, Clone, Serialize)]
pub struct DerivativeBound {
    pub k: usize,
    pub c_hat: f64,
    pub c_hat_first_half: f64,
    pub growth: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct DerivativeDecayReport {
    pub l_min: usize,
    pub l_max: usize,
    pub growth_tolerance: f64,
    pub bounds: Vec<DerivativeBound>,
    pub pass: bool,
}

/// Allowed relative growth of the scaled sup from the first half of the window
/// to the whole. Log-periodic factors such as `2 + sin(log s)` need `e^{2 pi}`
/// in `l` to complete a period, so on short windows the sup legitimately keeps
/// rising; only growth close to linear is flagged.
pub const DEFAULT_GROWTH_TOLERANCE: f64 = 0.75;

/// Forward difference `D^k u(l) = sum_i (-1)^{k-i} C(k,i) u(l+i)`.
fn forward_difference(values: &[f64], k: usize) -> f64 {
    let mut binom = 1.0;
    let mut acc = 0.0;
    for i in 0..=k {
        let sign = if (k - i) % 2 == 0 { 1.0 } else { -1.0 };
        acc += sign * binom * values[i];
        binom = binom * (k - i) as f64 / (i + 1) as f64;
    }
    acc
}

/// Proxy for `|d^k u(s)| <= C_k s^{-alpha-k}` using repeated differences.
///
/// A bound fails when its sup over the whole window exceeds the sup over the
/// first half by more than `growth_tolerance` (the scaled quantity keeps growing).
pub fn verify_derivative_decay(
    ps: &PowerSpectrum,
    k_max: usize,
    l_min: usize,
    l_max: usize,
    growth_tolerance: f64,
) -> Result<DerivativeDecayReport> {
    if k_max > 4 {
        return Err(NeedletError::InvalidParameter(format!("k_max must be <= 4, got {k_max}")));
    }
    if l_min < 1 || l_max < l_min + 2 {
        return Err(NeedletError::InvalidParameter(format!("bad window [{l_min}, {l_max}]")));
    }
    let samples: Vec<f64> = (l_min..=l_max + k_max).map(|l| ps.eval(l)).collect::<Result<_>>()?;
    let mid = l_min + (l_max - l_min) / 2;
    let mut bounds = Vec::with_capacity(k_max + 1);
    for k in 0..=k_max {
        let mut sup_all = 0.0f64;
        let mut sup_half = 0.0f64;
        for l in l_min..=l_max {
            let i = l - l_min;
            let scaled = forward_difference(&samples[i..=i + k], k).abs() * (l as f64).powf(ps.alpha + k as f64);
            sup_all = sup_all.max(scaled);
            if l <= mid {
                sup_half = sup_half.max(scaled);
            }
        }
        let growth = sup_all / sup_half - 1.0;
        bounds.push(DerivativeBound {
            k,
            c_hat: sup_all,
            c_hat_first_half: sup_half,
            growth,
            pass: sup_all.is_finite() && growth <= growth_tolerance,
        });
    }
    let pass = bounds.iter().all(|b| b.pass);
    Ok(DerivativeDecayReport { l_min, l_max, growth_tolerance, bounds, pass })
}
