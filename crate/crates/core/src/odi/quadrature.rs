//! Integration of `1/F(s)` over `[E0, ∞)` for power-sum denominators
//! `F(s) = Σ a_j s^{e_j} + c`.
//!
//! The range is cut into geometric panels `[E0 ρ^j, E0 ρ^{j+1}]`, each
//! integrated with adaptive Gauss-Kronrod (7/15). Integration stops at the
//! first panel edge `S` where an analytic upper estimate of `∫_S^∞ ds/F` falls
//! below `tail_tol` times the accumulated value. The tail is reported, never
//! added.

use serde::{Deserialize, Serialize};

use super::OdiError;

/// One term `coef · s^exponent`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerTerm {
    pub coef: f64,
    pub exponent: f64,
}

/// `F(s) = Σ coef_j s^{exponent_j} + constant`.
///
/// Exponents are `>= 1`, a negative coefficient is only allowed on the linear
/// term and the constant is nonnegative, so `F` is convex on `[0, ∞)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerSum {
    terms: Vec<PowerTerm>,
    constant: f64,
}

/// Exponents closer than this (relative) are merged into one term.
const EXPONENT_MERGE_TOL: f64 = 1e-13;

impl PowerSum {
    pub fn new(terms: impl IntoIterator<Item = PowerTerm>, constant: f64) -> Result<Self, OdiError> {
        let mut merged: Vec<PowerTerm> = Vec::new();
        for t in terms {
            if !(t.coef.is_finite() && t.exponent.is_finite()) {
                return Err(OdiError::InvalidInput(format!("non-finite term {t:?}")));
            }
            if t.exponent < 1.0 {
                return Err(OdiError::InvalidInput(format!(
                    "exponent {} below 1 breaks convexity of the denominator",
                    t.exponent
                )));
            }
            if t.coef < 0.0 && t.exponent != 1.0 {
                return Err(OdiError::InvalidInput(format!(
                    "negative coefficient only allowed on the linear term, got {t:?}"
                )));
            }
            if t.coef == 0.0 {
                continue;
            }
            match merged
                .iter_mut()
                .find(|m| (m.exponent - t.exponent).abs() <= EXPONENT_MERGE_TOL * t.exponent)
            {
                Some(m) => m.coef += t.coef,
                None => merged.push(t),
            }
        }
        merged.retain(|t| t.coef != 0.0);
        merged.sort_by(|a, b| a.exponent.total_cmp(&b.exponent));
        if !(constant >= 0.0 && constant.is_finite()) {
            return Err(OdiError::InvalidInput(format!(
                "constant term {constant} must be nonnegative"
            )));
        }
        Ok(Self {
            terms: merged,
            constant,
        })
    }

    pub fn terms(&self) -> &[PowerTerm] {
        &self.terms
    }

    pub fn constant(&self) -> f64 {
        self.constant
    }

    pub fn eval(&self, s: f64) -> f64 {
        self.terms
            .iter()
            .map(|t| t.coef * s.powf(t.exponent))
            .sum::<f64>()
            + self.constant
    }

    pub fn derivative(&self, s: f64) -> f64 {
        self.terms
            .iter()
            .map(|t| {
                if t.exponent == 1.0 {
                    t.coef
                } else {
                    t.coef * t.exponent * s.powf(t.exponent - 1.0)
                }
            })
            .sum()
    }

    /// Multiplies every coefficient and the constant by `lambda > 0`.
    pub fn scaled(&self, lambda: f64) -> Self {
        Self {
            terms: self
                .terms
                .iter()
                .map(|t| PowerTerm {
                    coef: t.coef * lambda,
                    exponent: t.exponent,
                })
                .collect(),
            constant: self.constant * lambda,
        }
    }

    fn negative_linear(&self) -> f64 {
        self.terms
            .iter()
            .filter(|t| t.coef < 0.0)
            .map(|t| -t.coef)
            .sum()
    }

    /// Upper estimate of `∫_S^∞ ds/F(s)` from the best single superlinear term.
    pub fn tail_upper(&self, s: f64) -> f64 {
        let neg = self.negative_linear();
        self.terms
            .iter()
            .filter(|t| t.coef > 0.0 && t.exponent > 1.0)
            .filter_map(|t| {
                let e1 = t.exponent - 1.0;
                if neg > 0.0 {
                    // F >= (a/2) s^e once a s^(e-1) >= 2|mu1| and s >= 1
                    let start = (2.0 * neg / t.coef).powf(1.0 / e1).max(1.0);
                    (s >= start).then(|| 2.0 * s.powf(-e1) / (t.coef * e1))
                } else {
                    Some(s.powf(-e1) / (t.coef * e1))
                }
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Minimiser of the convex `F` on `[lo, ∞)`.
    fn argmin_from(&self, lo: f64) -> f64 {
        if self.derivative(lo) >= 0.0 {
            return lo;
        }
        let mut hi = lo.max(1.0);
        while self.derivative(hi) < 0.0 {
            hi *= 2.0;
        }
        let mut a = lo;
        for _ in 0..200 {
            let mid = 0.5 * (a + hi);
            if mid <= a || mid >= hi {
                break;
            }
            if self.derivative(mid) < 0.0 {
                a = mid;
            } else {
                hi = mid;
            }
        }
        hi
    }

    /// Bisection for a sign change of `F` between `neg` (F <= 0) and `pos` (F > 0).
    fn bisect_root(&self, mut neg: f64, mut pos: f64) -> f64 {
        for _ in 0..200 {
            let mid = 0.5 * (neg + pos);
            if mid == neg || mid == pos {
                break;
            }
            if self.eval(mid) > 0.0 {
                pos = mid;
            } else {
                neg = mid;
            }
        }
        0.5 * (neg + pos)
    }

    /// Largest root of `F`, if `F` is not positive everywhere.
    fn largest_root(&self, below: f64) -> f64 {
        let mut pos = below.max(1.0);
        while self.eval(pos) <= 0.0 {
            pos *= 2.0;
        }
        self.bisect_root(below, pos)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuadratureConfig {
    /// Per-panel relative accuracy target of the Gauss-Kronrod estimate.
    pub rel_tol: f64,
    /// Tail estimate must fall below `tail_tol × accumulated integral`.
    pub tail_tol: f64,
    /// Geometric ratio between consecutive panel edges.
    pub panel_ratio: f64,
    pub max_depth: u32,
    pub max_truncation: f64,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            tail_tol: 1e-10,
            panel_ratio: 2.0,
            max_depth: 40,
            max_truncation: 1e280,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReciprocalIntegral {
    pub value: f64,
    pub truncation_point: f64,
    pub quad_error: f64,
    pub tail_upper: f64,
    /// `F` vanishes somewhere on `[0, E0]`; only the component above is used.
    pub restricted_component: bool,
}

// Gauss-Kronrod 7/15 nodes and weights on [-1, 1].
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let dx = half * XGK[j];
        let pair = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    (kronrod * half, ((kronrod - gauss) * half).abs())
}

fn adaptive<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, rel_tol: f64, depth: u32) -> (f64, f64) {
    let (value, err) = gk15(f, a, b);
    if err <= rel_tol * value.abs() || err <= f64::MIN_POSITIVE || depth == 0 {
        return (value, err);
    }
    let mid = 0.5 * (a + b);
    let (v1, e1) = adaptive(f, a, mid, rel_tol, depth - 1);
    let (v2, e2) = adaptive(f, mid, b, rel_tol, depth - 1);
    (v1 + v2, e1 + e2)
}

fn check_denominator(f: &PowerSum, e0: f64) -> Result<bool, OdiError> {
    if !(e0 > 0.0 && e0.is_finite()) {
        return Err(OdiError::InvalidInput(format!("E0 = {e0} must be positive")));
    }
    if !f.terms.iter().any(|t| t.coef > 0.0 && t.exponent > 1.0) {
        return Err(OdiError::Divergent);
    }
    if f.eval(e0) <= 0.0 {
        return Err(OdiError::NonpositiveDenominator {
            root: f.largest_root(e0),
        });
    }
    let s_min = f.argmin_from(e0);
    if f.eval(s_min) <= 0.0 {
        return Err(OdiError::NonpositiveDenominator {
            root: f.bisect_root(s_min, e0),
        });
    }
    let restricted = f.negative_linear() > 0.0 && {
        let s0 = f.argmin_from(0.0).min(e0);
        f.eval(s0) <= 0.0
    };
    Ok(restricted)
}

fn check_cfg(cfg: &QuadratureConfig) -> Result<(), OdiError> {
    if !(cfg.rel_tol > 0.0 && cfg.tail_tol > 0.0 && cfg.panel_ratio > 1.0) {
        return Err(OdiError::InvalidInput(format!(
            "invalid quadrature settings {cfg:?}"
        )));
    }
    Ok(())
}

/// `∫_{E0}^{S} ds/F(s)` with `S` chosen adaptively from the tail estimate.
pub fn integrate_reciprocal(
    f: &PowerSum,
    e0: f64,
    cfg: &QuadratureConfig,
) -> Result<ReciprocalIntegral, OdiError> {
    check_cfg(cfg)?;
    let restricted = check_denominator(f, e0)?;
    let integrand = |s: f64| 1.0 / f.eval(s);
    let mut value = 0.0;
    let mut quad_error = 0.0;
    let mut lo = e0;
    loop {
        let hi = lo * cfg.panel_ratio;
        let (v, e) = adaptive(&integrand, lo, hi, cfg.rel_tol, cfg.max_depth);
        value += v;
        quad_error += e;
        lo = hi;
        let tail = f.tail_upper(lo);
        if tail <= cfg.tail_tol * value {
            return Ok(ReciprocalIntegral {
                value,
                truncation_point: lo,
                quad_error,
                tail_upper: tail,
                restricted_component: restricted,
            });
        }
        if lo > cfg.max_truncation {
            return Err(OdiError::TailNotConverged {
                truncation_point: lo,
                tail_upper: tail,
                value,
            });
        }
    }
}

/// `∫_{E0}^{S} ds/F(s)` for a fixed truncation point `S >= E0`.
pub fn integrate_reciprocal_truncated(
    f: &PowerSum,
    e0: f64,
    truncation_point: f64,
    cfg: &QuadratureConfig,
) -> Result<ReciprocalIntegral, OdiError> {
    check_cfg(cfg)?;
    if !(truncation_point >= e0) {
        return Err(OdiError::InvalidInput(format!(
            "truncation point {truncation_point} below E0 = {e0}"
        )));
    }
    let restricted = check_denominator(f, e0)?;
    let integrand = |s: f64| 1.0 / f.eval(s);
    let mut value = 0.0;
    let mut quad_error = 0.0;
    let mut lo = e0;
    while lo < truncation_point {
        let hi = (lo * cfg.panel_ratio).min(truncation_point);
        let (v, e) = adaptive(&integrand, lo, hi, cfg.rel_tol, cfg.max_depth);
        value += v;
        quad_error += e;
        lo = hi;
    }
    Ok(ReciprocalIntegral {
        value,
        truncation_point,
        quad_error,
        tail_upper: f.tail_upper(truncation_point),
        restricted_component: restricted,
    })
}
