//! Forward/backward differences on degree-indexed sequences and the operator
//! `P = R(l) D+ D- + S(l) D-` that realizes multiplication of a zonal series by
//! `(cos theta - 1)`.

use serde::Serialize;

use crate::error::{NeedletError, Result};
use crate::numeric::ols_slope;

/// Finite window `a_offset ..= a_top` of a sequence indexed by integers.
/// Every index outside the window reads as zero.
#[derive(Debug, Clone, PartialEq)]
pub struct CoeffSequence {
    offset: usize,
    values: Vec<f64>,
}

impl CoeffSequence {
    pub fn new(offset: usize, values: Vec<f64>) -> Self {
        Self { offset, values }
    }

    /// Sequence on `offset..=top` from a closure of the index.
    pub fn from_fn(offset: usize, top: usize, f: impl FnMut(usize) -> f64) -> Self {
        Self { offset, values: (offset..=top).map(f).collect() }
    }

    pub fn offset(&self) -> usize {
        self.offset
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Highest stored index. Meaningless for an empty sequence.
    pub fn top(&self) -> usize {
        self.offset + self.values.len().saturating_sub(1)
    }

    pub fn get(&self, l: i64) -> f64 {
        if l < self.offset as i64 {
            return 0.0;
        }
        self.values.get((l - self.offset as i64) as usize).copied().unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.values.iter().enumerate().map(move |(i, &v)| (self.offset + i, v))
    }

    /// Values indexed from zero (`dense[l] = a_l`), suitable for zonal sums.
    pub fn to_dense(&self) -> Vec<f64> {
        let mut dense = vec![0.0; self.offset];
        dense.extend_from_slice(&self.values);
        dense
    }

    fn require_nonempty(&self) -> Result<()> {
        if self.values.is_empty() {
            Err(NeedletError::EmptySequence)
        } else {
            Ok(())
        }
    }
}

/// `R(l) = l / (2l+1)`.
#[inline]
pub fn weight_r(l: f64) -> f64 {
    l / (2.0 * l + 1.0)
}

/// `S(l) = 1 / (2l+1)`.
#[inline]
pub fn weight_s(l: f64) -> f64 {
    1.0 / (2.0 * l + 1.0)
}

/// `(D+ a)_l = a_{l+1} - a_l`; the window loses its top entry.
pub fn delta_plus(s: &CoeffSequence) -> Result<CoeffSequence> {
    s.require_nonempty()?;
    let values = s.values.windows(2).map(|w| w[1] - w[0]).collect();
    Ok(CoeffSequence::new(s.offset, values))
}

/// `(D- a)_l = a_l - a_{l-1}` with `a_{offset-1} = 0`.
pub fn delta_minus(s: &CoeffSequence) -> Result<CoeffSequence> {
    s.require_nonempty()?;
    let values = s.iter().map(|(l, v)| v - s.get(l as i64 - 1)).collect();
    Ok(CoeffSequence::new(s.offset, values))
}

/// `(D-)^{k1} (D+)^{k2} a`.
pub fn mixed_difference(s: &CoeffSequence, k_minus: usize, k_plus: usize) -> Result<CoeffSequence> {
    let mut out = s.clone();
    for _ in 0..k_plus {
        out = delta_plus(&out)?;
    }
    for _ in 0..k_minus {
        out = delta_minus(&out)?;
    }
    Ok(out)
}

/// One application of `P(l) = R(l) D+ D- + S(l) D-`.
///
/// The support grows by one degree at the top (and one at the bottom when the
/// offset is positive), so for finite-support input
/// `sum_l P(a)_l Z_l(x) = (x - 1) sum_l a_l Z_l(x)` holds exactly.
pub fn apply_p(s: &CoeffSequence) -> Result<CoeffSequence> {
    s.require_nonempty()?;
    let lo = s.offset.saturating_sub(1);
    let hi = s.top() + 1;
    let out = CoeffSequence::from_fn(lo, hi, |l| {
        let li = l as i64;
        let (prev, curr, next) = (s.get(li - 1), s.get(li), s.get(li + 1));
        let lf = l as f64;
        weight_r(lf) * (prev - 2.0 * curr + next) + weight_s(lf) * (next - curr)
    });
    Ok(out)
}

/// `P^N a` for `N >= 1`.
pub fn apply_p_iter(s: &CoeffSequence, n: usize) -> Result<CoeffSequence> {
    if n == 0 {
        return Err(NeedletError::InvalidParameter("P iteration count must be >= 1".into()));
    }
    let mut out = apply_p(s)?;
    for _ in 1..n {
        out = apply_p(&out)?;
    }
    Ok(out)
}

/// Least-squares slope of `log|a_l|` against `log l` over `l_min..=l_max`.
pub fn decay_rate_estimate(s: &CoeffSequence, l_min: usize, l_max: usize) -> Result<f64> {
    if l_min < 1 || l_max <= l_min {
        return Err(NeedletError::InvalidParameter(format!("fit window [{l_min}, {l_max}] needs 1 <= l_min < l_max")));
    }
    let mut xs = Vec::with_capacity(l_max - l_min + 1);
    let mut ys = Vec::with_capacity(l_max - l_min + 1);
    for l in l_min..=l_max {
        let v = s.get(l as i64).abs();
        if v == 0.0 || !v.is_finite() {
            return Err(NeedletError::ZeroInWindow { l });
        }
        xs.push((l as f64).ln());
        ys.push(v.ln());
    }
    Ok(ols_slope(&xs, &ys))
}

/// Fitted decay of one mixed difference against the `l^{mu - 2(k1+k2)}` target.
#[derive(Debug, Clone, Serialize)]
pub struct DifferenceOrder {
    pub k_minus: usize,
    pub k_plus: usize,
    pub fitted_slope: f64,
    pub expected_slope: f64,
}

/// Fits every `(D-)^{k1}(D+)^{k2} a` with `k1 + k2 <= max_order` over a window.
///
/// Higher orders are not probed: the bound is only needed up to a finite order.
pub fn difference_orders(
    s: &CoeffSequence,
    mu: f64,
    l_min: usize,
    l_max: usize,
    max_order: usize,
) -> Result<Vec<DifferenceOrder>> {
    let mut out = Vec::new();
    for total in 0..=max_order {
        for k_minus in 0..=total {
            let k_plus = total - k_minus;
            let d = mixed_difference(s, k_minus, k_plus)?;
            out.push(DifferenceOrder {
                k_minus,
                k_plus,
                fitted_slope: decay_rate_estimate(&d, l_min, l_max)?,
                expected_slope: mu - 2.0 * total as f64,
            });
        }
    }
    Ok(out)
}
