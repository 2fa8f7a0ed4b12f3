//! Closed-form value and cost families with exact derivatives and
//! interval smoothness constants.
//!
//! Value families are concave and non-decreasing, cost families are convex
//! and non-decreasing on their natural domains. Every constant reported by
//! [`ScalarFunction::smoothness`] is either exact or a certified upper/lower
//! bound in the conservative direction.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Grid size for the numeric closeness fallback.
pub const CLOSENESS_GRID: usize = 10_000;
/// Inflation applied to grid-based Lipschitz estimates.
pub const CLOSENESS_INFLATION: f64 = 1.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "params", rename_all = "snake_case")]
pub enum ScalarFunction {
    /// `a k − b k²` up to the peak `a/(2b)`, constant `a²/(4b)` beyond it.
    QuadraticClippedValue { a: f64, b: f64 },
    /// `(c0/2) x²`
    QuadraticCost { c0: f64 },
    /// `c1 x`
    LinearCost { c1: f64 },
    /// `a ln(s + k)`
    LogValue { a: f64, s: f64 },
    /// `a (1 − exp(−r k))`
    ExpSaturatingValue { a: f64, r: f64 },
    /// `inner(x) + beta x²`
    Regularized { inner: Box<ScalarFunction>, beta: f64 },
    /// `inner((y − shift) / scale)`
    AffineReparam { inner: Box<ScalarFunction>, scale: f64, shift: f64 },
}

/// Curvature direction of a family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shape {
    Concave,
    Convex,
}

/// Value and first two derivatives at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Eval {
    pub value: f64,
    pub d1: f64,
    pub d2: f64,
}

/// Where a function is defined. `lo_open` marks an excluded lower end.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Domain {
    pub lo: f64,
    pub hi: f64,
    pub lo_open: bool,
}

impl Domain {
    const REALS: Domain = Domain { lo: f64::NEG_INFINITY, hi: f64::INFINITY, lo_open: false };

    pub fn contains(&self, x: f64) -> bool {
        let above = if self.lo_open { x > self.lo } else { x >= self.lo };
        above && x <= self.hi
    }

    pub fn contains_interval(&self, lo: f64, hi: f64) -> bool {
        self.contains(lo) && self.contains(hi)
    }

    /// Nearest point of the domain, if `x` lies within `tol` of it.
    pub fn clamp_within(&self, x: f64, tol: f64) -> Option<f64> {
        if self.contains(x) {
            return Some(x);
        }
        if x < self.lo && self.lo - x <= tol && !self.lo_open {
            Some(self.lo)
        } else if x > self.hi && x - self.hi <= tol {
            Some(self.hi)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothnessReport {
    pub lo: f64,
    pub hi: f64,
    /// Concavity modulus for value families, convexity modulus for costs.
    pub modulus: f64,
    /// Lipschitz constant of the first derivative.
    pub lipschitz_d1: f64,
    /// Lipschitz constant of the second derivative; `None` when the second
    /// derivative jumps inside the interval.
    pub lipschitz_d2: Option<f64>,
    pub strictly_increasing: bool,
}

impl ScalarFunction {
    pub fn quadratic_clipped(a: f64, b: f64) -> Self {
        Self::QuadraticClippedValue { a, b }
    }

    pub fn quadratic_cost(c0: f64) -> Self {
        Self::QuadraticCost { c0 }
    }

    pub fn linear_cost(c1: f64) -> Self {
        Self::LinearCost { c1 }
    }

    pub fn log_value(a: f64, s: f64) -> Self {
        Self::LogValue { a, s }
    }

    pub fn exp_saturating(a: f64, r: f64) -> Self {
        Self::ExpSaturatingValue { a, r }
    }

    pub fn regularized(self, beta: f64) -> Self {
        Self::Regularized { inner: Box::new(self), beta }
    }

    /// `y ↦ self((y − shift) / scale)`. Nested reparameterizations are
    /// folded into one, and the identity map returns `self` unchanged.
    pub fn reparam(self, scale: f64, shift: f64) -> Self {
        if scale == 1.0 && shift == 0.0 {
            return self;
        }
        match self {
            // outer(inner_reparam(g, d, m)) = g((y − shift − scale·m) / (scale·d))
            Self::AffineReparam { inner, scale: d, shift: m } => {
                let s = scale * d;
                let t = shift + scale * m;
                if s == 1.0 && t == 0.0 {
                    *inner
                } else {
                    Self::AffineReparam { inner, scale: s, shift: t }
                }
            }
            other => Self::AffineReparam { inner: Box::new(other), scale, shift },
        }
    }

    pub fn family(&self) -> &'static str {
        match self {
            Self::QuadraticClippedValue { .. } => "quadratic_clipped_value",
            Self::QuadraticCost { .. } => "quadratic_cost",
            Self::LinearCost { .. } => "linear_cost",
            Self::LogValue { .. } => "log_value",
            Self::ExpSaturatingValue { .. } => "exp_saturating_value",
            Self::Regularized { .. } => "regularized",
            Self::AffineReparam { .. } => "affine_reparam",
        }
    }

    pub fn shape(&self) -> Shape {
        match self {
            Self::QuadraticClippedValue { .. } | Self::LogValue { .. } | Self::ExpSaturatingValue { .. } => {
                Shape::Concave
            }
            Self::QuadraticCost { .. } | Self::LinearCost { .. } | Self::Regularized { .. } => Shape::Convex,
            Self::AffineReparam { inner, .. } => inner.shape(),
        }
    }

    /// Checks parameter signs and finiteness.
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidFunction(format!("{}: {name} must be finite and > 0, got {v}", self.family())))
            }
        };
        match self {
            Self::QuadraticClippedValue { a, b } => {
                positive("a", *a)?;
                positive("b", *b)
            }
            Self::QuadraticCost { c0 } => positive("c0", *c0),
            Self::LinearCost { c1 } => positive("c1", *c1),
            Self::LogValue { a, s } => {
                positive("a", *a)?;
                positive("s", *s)
            }
            Self::ExpSaturatingValue { a, r } => {
                positive("a", *a)?;
                positive("r", *r)
            }
            Self::Regularized { inner, beta } => {
                if inner.shape() != Shape::Convex {
                    return Err(Error::InvalidFunction("regularized: inner must be a cost family".into()));
                }
                positive("beta", *beta)?;
                inner.validate()
            }
            Self::AffineReparam { inner, scale, shift } => {
                positive("scale", *scale)?;
                if !shift.is_finite() {
                    return Err(Error::InvalidFunction(format!("affine_reparam: shift must be finite, got {shift}")));
                }
                inner.validate()
            }
        }
    }

    pub fn domain(&self) -> Domain {
        match self {
            Self::QuadraticClippedValue { .. } | Self::LinearCost { .. } | Self::ExpSaturatingValue { .. } => {
                Domain::REALS
            }
            Self::QuadraticCost { .. } => Domain { lo: 0.0, hi: f64::INFINITY, lo_open: false },
            Self::LogValue { s, .. } => Domain { lo: -s, hi: f64::INFINITY, lo_open: true },
            Self::Regularized { inner, .. } => inner.domain(),
            Self::AffineReparam { inner, scale, shift } => {
                let d = inner.domain();
                Domain { lo: scale * d.lo + shift, hi: scale * d.hi + shift, lo_open: d.lo_open }
            }
        }
    }

    /// Value and derivatives at `x`.
    ///
    /// At the clip point of [`ScalarFunction::QuadraticClippedValue`] the
    /// derivatives are taken from the quadratic side, so `d2 = −2b` there.
    pub fn eval(&self, x: f64) -> Result<Eval> {
        if !x.is_finite() || !self.domain().contains(x) {
            return Err(Error::Domain { family: self.family(), point: x });
        }
        Ok(self.eval_unchecked(x))
    }

    fn eval_unchecked(&self, x: f64) -> Eval {
        match self {
            Self::QuadraticClippedValue { a, b } => {
                if x <= a / (2.0 * b) {
                    Eval { value: a * x - b * x * x, d1: a - 2.0 * b * x, d2: -2.0 * b }
                } else {
                    Eval { value: a * a / (4.0 * b), d1: 0.0, d2: 0.0 }
                }
            }
            Self::QuadraticCost { c0 } => Eval { value: 0.5 * c0 * x * x, d1: c0 * x, d2: *c0 },
            Self::LinearCost { c1 } => Eval { value: c1 * x, d1: *c1, d2: 0.0 },
            Self::LogValue { a, s } => {
                let z = s + x;
                Eval { value: a * z.ln(), d1: a / z, d2: -a / (z * z) }
            }
            Self::ExpSaturatingValue { a, r } => {
                let e = (-r * x).exp();
                Eval { value: a * (1.0 - e), d1: a * r * e, d2: -a * r * r * e }
            }
            Self::Regularized { inner, beta } => {
                let e = inner.eval_unchecked(x);
                Eval { value: e.value + beta * x * x, d1: e.d1 + 2.0 * beta * x, d2: e.d2 + 2.0 * beta }
            }
            Self::AffineReparam { inner, scale, shift } => {
                let e = inner.eval_unchecked((x - shift) / scale);
                Eval { value: e.value, d1: e.d1 / scale, d2: e.d2 / (scale * scale) }
            }
        }
    }

    pub fn value(&self, x: f64) -> Result<f64> {
        self.eval(x).map(|e| e.value)
    }

    pub fn d1(&self, x: f64) -> Result<f64> {
        self.eval(x).map(|e| e.d1)
    }

    pub fn d2(&self, x: f64) -> Result<f64> {
        self.eval(x).map(|e| e.d2)
    }

    /// Points where the second derivative jumps.
    pub fn kinks(&self) -> Vec<f64> {
        match self {
            Self::QuadraticClippedValue { a, b } => vec![a / (2.0 * b)],
            Self::Regularized { inner, .. } => inner.kinks(),
            Self::AffineReparam { inner, scale, shift } => {
                inner.kinks().into_iter().map(|k| scale * k + shift).collect()
            }
            _ => Vec::new(),
        }
    }

    /// True when the second derivative is piecewise constant, i.e. the first
    /// derivative is piecewise linear with breakpoints at [`Self::kinks`].
    pub fn has_piecewise_linear_derivative(&self) -> bool {
        match self {
            Self::QuadraticClippedValue { .. } | Self::QuadraticCost { .. } | Self::LinearCost { .. } => true,
            Self::LogValue { .. } | Self::ExpSaturatingValue { .. } => false,
            Self::Regularized { inner, .. } | Self::AffineReparam { inner, .. } => {
                inner.has_piecewise_linear_derivative()
            }
        }
    }

    /// Smoothness constants on `[lo, hi]`.
    pub fn smoothness(&self, lo: f64, hi: f64) -> Result<SmoothnessReport> {
        self.check_interval(lo, hi)?;
        let (modulus, lipschitz_d1, lipschitz_d2) = self.constants(lo, hi, false);
        let d1_min = self.eval_unchecked(lo).d1.min(self.eval_unchecked(hi).d1);
        Ok(SmoothnessReport { lo, hi, modulus, lipschitz_d1, lipschitz_d2, strictly_increasing: d1_min > 0.0 })
    }

    /// Curvature modulus on `[lo, hi]` reading clipped values from their
    /// quadratic side. Best responses against a clipped value coincide with
    /// those against its quadratic extension whenever costs are
    /// non-decreasing, so this modulus is the relevant one for arguments that
    /// only go through optimal gains.
    pub fn curved_side_modulus(&self, lo: f64, hi: f64) -> Result<f64> {
        self.check_interval(lo, hi)?;
        Ok(self.constants(lo, hi, true).0)
    }

    fn check_interval(&self, lo: f64, hi: f64) -> Result<()> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::Interval { lo, hi });
        }
        let dom = self.domain();
        if !dom.contains_interval(lo, hi) {
            let point = if dom.contains(lo) { hi } else { lo };
            return Err(Error::Domain { family: self.family(), point });
        }
        Ok(())
    }

    /// (modulus, L¹, L²) on a validated interval.
    fn constants(&self, lo: f64, hi: f64, curved_side: bool) -> (f64, f64, Option<f64>) {
        match self {
            Self::QuadraticClippedValue { a, b } => {
                let kink = a / (2.0 * b);
                let modulus = if curved_side || hi <= kink { 2.0 * b } else { 0.0 };
                let l2 = if (lo < kink && kink < hi) || lo == kink { None } else { Some(0.0) };
                (modulus, 2.0 * b, l2)
            }
            Self::QuadraticCost { c0 } => (*c0, *c0, Some(0.0)),
            Self::LinearCost { .. } => (0.0, 0.0, Some(0.0)),
            Self::LogValue { a, s } => {
                let (zl, zh) = (s + lo, s + hi);
                (a / (zh * zh), a / (zl * zl), Some(2.0 * a / (zl * zl * zl)))
            }
            Self::ExpSaturatingValue { a, r } => {
                let el = (-r * lo).exp();
                (a * r * r * (-r * hi).exp(), a * r * r * el, Some(a * r * r * r * el))
            }
            Self::Regularized { inner, beta } => {
                let (m, l1, l2) = inner.constants(lo, hi, curved_side);
                (m + 2.0 * beta, l1 + 2.0 * beta, l2)
            }
            Self::AffineReparam { inner, scale, shift } => {
                let (m, l1, l2) = inner.constants((lo - shift) / scale, (hi - shift) / scale, curved_side);
                let d2 = scale * scale;
                (m / d2, l1 / d2, l2.map(|v| v / (d2 * scale)))
            }
        }
    }
}

/// Lipschitz constant of `gamma·fᵢ′ − f′` on `[lo, hi]`.
///
/// Exact when both derivatives are piecewise linear; otherwise the largest
/// slope between consecutive points of a uniform grid, inflated by 5%.
pub fn closeness_sigma(fi: &ScalarFunction, f: &ScalarFunction, gamma: f64, lo: f64, hi: f64) -> Result<f64> {
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(Error::InvalidParameter(format!("gamma must be > 0, got {gamma}")));
    }
    fi.check_interval(lo, hi)?;
    f.check_interval(lo, hi)?;
    if fi == f && gamma == 1.0 {
        return Ok(0.0);
    }
    if fi.has_piecewise_linear_derivative() && f.has_piecewise_linear_derivative() {
        let mut breaks: Vec<f64> = fi.kinks().into_iter().chain(f.kinks()).filter(|k| *k > lo && *k < hi).collect();
        breaks.push(lo);
        breaks.push(hi);
        breaks.sort_by(f64::total_cmp);
        breaks.dedup();
        let sigma = breaks
            .windows(2)
            .map(|w| {
                let mid = 0.5 * (w[0] + w[1]);
                (gamma * fi.eval_unchecked(mid).d2 - f.eval_unchecked(mid).d2).abs()
            })
            .fold(0.0, f64::max);
        return Ok(sigma);
    }
    let h = |k: f64| gamma * fi.eval_unchecked(k).d1 - f.eval_unchecked(k).d1;
    let step = (hi - lo) / (CLOSENESS_GRID - 1) as f64;
    let mut prev = h(lo);
    let mut best: f64 = 0.0;
    for j in 1..CLOSENESS_GRID {
        let k = if j == CLOSENESS_GRID - 1 { hi } else { lo + step * j as f64 };
        let cur = h(k);
        best = best.max((cur - prev).abs() / step);
        prev = cur;
    }
    Ok(best * CLOSENESS_INFLATION)
}
