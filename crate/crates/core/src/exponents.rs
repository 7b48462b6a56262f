//! Parameter algebra for the `(p, q)` energy.
//!
//! Everything here is a pure function of a handful of reals: the four derived
//! exponents `eta_0..eta_3`, the open-interval admissibility conditions on
//! `(p, q, s1, s2)`, the Sobolev-type exponent maps `k`, `h` and the Young
//! coefficients `C1`, `C3`, and the closed-form index selections used by the
//! two corollary bounds.
//!
//! The clause checks are written once, generically over the scalar type, so the
//! same code runs on `f64` and on exact rationals ([`Rational`]).

use std::io::Write;

use num_rational::Ratio;
use num_traits::{FromPrimitive, Num};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Exact rational scalar used for boundary-exact admissibility checks.
pub type Rational = Ratio<i128>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExponentError {
    #[error("auxiliary exponent {name} = {value} must exceed 1")]
    AuxiliaryTooSmall { name: &'static str, value: f64 },
    #[error("energy exponents must be positive (p = {p}, q = {q})")]
    NonPositiveEnergyExponent { p: f64, q: f64 },
    #[error("eta = {eta} outside [1, {limit}) for n = {n}")]
    EtaOutOfRange { eta: f64, n: u32, limit: f64 },
    #[error("dimension n = {0} must be at least 3")]
    Dimension(u32),
    #[error("p = {p} must exceed n/2 = {half}")]
    PBelowHalfDimension { p: f64, half: f64 },
    #[error("invalid model parameter: {0}")]
    InvalidModel(String),
}

pub type Result<T> = std::result::Result<T, ExponentError>;

/// Ball domain of radius `radius`; `convex` drops the boundary constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Domain {
    pub radius: f64,
    pub convex: bool,
}

impl Default for Domain {
    fn default() -> Self {
        Self {
            radius: 1.0,
            convex: true,
        }
    }
}

/// Coefficients of the attraction-repulsion system
///
/// ```text
/// u_t = Δu − χ∇·(u∇v) + ξ∇·(u∇w) + μ1 u − μ2 u^k
/// v_t = Δv − αv + βu
/// w_t = Δw − γw + δu
/// ```
///
/// together with the spatial dimension, the domain and the boundary constant
/// entering the differential inequality on non-convex domains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelParams {
    pub chi: f64,
    pub xi: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
    pub mu1: f64,
    pub mu2: f64,
    pub k_logistic: f64,
    pub dim: u32,
    pub domain: Domain,
    pub boundary_c: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            chi: 1.0,
            xi: 1.0,
            alpha: 1.0,
            beta: 1.0,
            gamma: 1.0,
            delta: 1.0,
            mu1: 0.0,
            mu2: 0.0,
            k_logistic: 1.1,
            dim: 3,
            domain: Domain::default(),
            boundary_c: 0.0,
        }
    }
}

impl ModelParams {
    /// Open upper end of the admissible logistic exponent range.
    pub fn logistic_exponent_limit(dim: u32) -> f64 {
        if dim == 3 {
            7.0 / 6.0
        } else {
            1.0 + 1.0 / (2.0 * (dim as f64 - 1.0))
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim < 3 {
            return Err(ExponentError::Dimension(self.dim));
        }
        let positive = [
            ("chi", self.chi),
            ("xi", self.xi),
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("gamma", self.gamma),
            ("delta", self.delta),
            ("radius", self.domain.radius),
        ];
        for (name, value) in positive {
            if !(value > 0.0 && value.is_finite()) {
                return Err(ExponentError::InvalidModel(format!(
                    "{name} = {value} must be positive and finite"
                )));
            }
        }
        if !self.mu1.is_finite() {
            return Err(ExponentError::InvalidModel("mu1 must be finite".into()));
        }
        if !(self.mu2 >= 0.0 && self.mu2.is_finite()) {
            return Err(ExponentError::InvalidModel(format!(
                "mu2 = {} must be nonnegative",
                self.mu2
            )));
        }
        if self.mu2 > 0.0 {
            let limit = Self::logistic_exponent_limit(self.dim);
            if !(self.k_logistic > 1.0 && self.k_logistic < limit) {
                return Err(ExponentError::InvalidModel(format!(
                    "logistic exponent k = {} outside (1, {limit}) for n = {}",
                    self.k_logistic, self.dim
                )));
            }
        }
        if !(self.boundary_c >= 0.0 && self.boundary_c.is_finite()) {
            return Err(ExponentError::InvalidModel(format!(
                "boundary constant c = {} must be nonnegative",
                self.boundary_c
            )));
        }
        if self.domain.convex && self.boundary_c != 0.0 {
            return Err(ExponentError::InvalidModel(
                "convex domains carry boundary constant c = 0".into(),
            ));
        }
        Ok(())
    }

    /// Checks for the solver, which also accepts `chi = 0` or `xi = 0` (no
    /// attraction or no repulsion).
    pub fn validate_for_simulation(&self) -> Result<()> {
        for (name, value) in [("chi", self.chi), ("xi", self.xi)] {
            if !(value >= 0.0 && value.is_finite()) {
                return Err(ExponentError::InvalidModel(format!(
                    "{name} = {value} must be nonnegative and finite"
                )));
            }
        }
        Self {
            chi: 1.0,
            xi: 1.0,
            ..self.clone()
        }
        .validate()
    }

    /// True when the source term g(u) vanishes identically.
    pub fn logistic_free(&self) -> bool {
        self.mu1 == 0.0 && self.mu2 == 0.0
    }
}

/// Energy exponents `(p, q)`, auxiliary Young exponents `(s1, s2)` and the
/// four derived `eta` values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyIndices {
    pub p: f64,
    pub q: f64,
    pub s1: f64,
    pub s2: f64,
    pub eta: [f64; 4],
}

impl EnergyIndices {
    pub fn new(p: f64, q: f64, s1: f64, s2: f64) -> Result<Self> {
        let eta = compute_etas(p, q, s1, s2)?;
        Ok(Self { p, q, s1, s2, eta })
    }

    pub fn k_etas(&self, n: u32) -> Result<[f64; 4]> {
        let mut out = [0.0; 4];
        for (slot, &eta) in out.iter_mut().zip(&self.eta) {
            *slot = k_exponent(eta, n)?;
        }
        Ok(out)
    }

    pub fn admissibility(&self, n: u32) -> Result<AdmissibilityReport> {
        check_condition_c(n, self.p, self.q, self.s1, self.s2)
    }
}

fn lit<T: FromPrimitive>(x: i64) -> T {
    T::from_i64(x).expect("small integer literal is representable")
}

fn etas_generic<T: Num + Clone>(p: &T, q: &T, s1: &T, s2: &T) -> [T; 4] {
    let one = T::one();
    let two = one.clone() + one.clone();
    [
        two.clone() * s2.clone() / p.clone(),
        s1.clone() / (s1.clone() - one.clone()),
        s2.clone() * (q.clone() - two.clone()) / (q.clone() * (s2.clone() - one)),
        two * s1.clone() / q.clone(),
    ]
}

fn etas_in_range_generic<T: Num + Clone + PartialOrd + FromPrimitive>(etas: &[T; 4], n: u32) -> bool {
    let one = T::one();
    let upper = one.clone() + lit::<T>(2) / lit::<T>(n as i64);
    etas.iter().all(|eta| *eta > one && *eta < upper)
}

/// `(name, lower, upper)`: the clause holds iff `lower < upper`.
fn clauses_generic<T: Num + Clone + PartialOrd + FromPrimitive>(
    n: u32,
    p: &T,
    q: &T,
    s1: &T,
    s2: &T,
) -> Vec<(&'static str, T, T)> {
    let nn: T = lit(n as i64);
    let one = T::one();
    let two: T = lit(2);
    let widen = one.clone() + two.clone() / nn.clone();
    vec![
        ("q > 2", two.clone(), q.clone()),
        ("n < q", nn.clone(), q.clone()),
        ("s1 > 1 + n/2", one + nn.clone() / two.clone(), s1.clone()),
        ("s1 > q/2", q.clone() / two.clone(), s1.clone()),
        (
            "s1 < (1 + 2/n) q/2",
            s1.clone(),
            widen.clone() * q.clone() / two.clone(),
        ),
        (
            "s2 > q(n+2)/(2q+2n)",
            q.clone() * (nn.clone() + two.clone())
                / (two.clone() * q.clone() + two.clone() * nn.clone()),
            s2.clone(),
        ),
        ("s2 > p/2", p.clone() / two.clone(), s2.clone()),
        ("s2 < (1 + 2/n) p/2", s2.clone(), widen * p.clone() / two.clone()),
        ("s2 < q/2", s2.clone(), q.clone() / two),
        (
            "p > nq/(n+q)",
            nn.clone() * q.clone() / (nn + q.clone()),
            p.clone(),
        ),
    ]
}

/// Outcome of one strict inequality of the admissibility conditions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClauseCheck {
    pub clause: &'static str,
    pub passed: bool,
    /// `upper − lower`; positive when the strict inequality holds.
    pub slack: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdmissibilityReport {
    pub admissible: bool,
    pub clauses: Vec<ClauseCheck>,
    /// Present when `s1, s2 > 1` so the quotients are defined.
    pub etas: Option<[f64; 4]>,
    /// Smallest slack over all clauses.
    pub margin: f64,
}

impl AdmissibilityReport {
    fn from_clauses(clauses: Vec<ClauseCheck>, etas: Option<[f64; 4]>) -> Self {
        let admissible = clauses.iter().all(|c| c.passed);
        let margin = clauses
            .iter()
            .map(|c| c.slack)
            .fold(f64::INFINITY, f64::min);
        Self {
            admissible,
            clauses,
            etas,
            margin,
        }
    }

    pub fn failed_clauses(&self) -> impl Iterator<Item = &ClauseCheck> {
        self.clauses.iter().filter(|c| !c.passed)
    }
}

fn check_preconditions(n: u32, p: f64, q: f64) -> Result<()> {
    if n < 3 {
        return Err(ExponentError::Dimension(n));
    }
    if !(p > 0.0 && q > 0.0) {
        return Err(ExponentError::NonPositiveEnergyExponent { p, q });
    }
    Ok(())
}

/// Derived exponents `(eta_0, eta_1, eta_2, eta_3)`.
pub fn compute_etas(p: f64, q: f64, s1: f64, s2: f64) -> Result<[f64; 4]> {
    if !(p > 0.0 && q > 0.0) {
        return Err(ExponentError::NonPositiveEnergyExponent { p, q });
    }
    if !(s1 > 1.0) {
        return Err(ExponentError::AuxiliaryTooSmall {
            name: "s1",
            value: s1,
        });
    }
    if !(s2 > 1.0) {
        return Err(ExponentError::AuxiliaryTooSmall {
            name: "s2",
            value: s2,
        });
    }
    Ok(etas_generic(&p, &q, &s1, &s2))
}

/// Exact-arithmetic counterpart of [`compute_etas`].
pub fn compute_etas_exact(
    p: Rational,
    q: Rational,
    s1: Rational,
    s2: Rational,
) -> Result<[Rational; 4]> {
    let one = Rational::from_integer(1);
    let zero = Rational::from_integer(0);
    if !(p > zero && q > zero) {
        return Err(ExponentError::NonPositiveEnergyExponent {
            p: to_f64(p),
            q: to_f64(q),
        });
    }
    if s1 <= one {
        return Err(ExponentError::AuxiliaryTooSmall {
            name: "s1",
            value: to_f64(s1),
        });
    }
    if s2 <= one {
        return Err(ExponentError::AuxiliaryTooSmall {
            name: "s2",
            value: to_f64(s2),
        });
    }
    Ok(etas_generic(&p, &q, &s1, &s2))
}

pub fn to_f64(r: Rational) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// Evaluates every strict clause of the admissibility conditions (plus the
/// implicit `q > 2`) on float inputs with zero slack.
pub fn check_condition_c(n: u32, p: f64, q: f64, s1: f64, s2: f64) -> Result<AdmissibilityReport> {
    check_condition_c_with_slack(n, p, q, s1, s2, 0.0)
}

/// As [`check_condition_c`], but a clause only passes when its slack exceeds
/// `slack`.
pub fn check_condition_c_with_slack(
    n: u32,
    p: f64,
    q: f64,
    s1: f64,
    s2: f64,
    slack: f64,
) -> Result<AdmissibilityReport> {
    check_preconditions(n, p, q)?;
    let clauses = clauses_generic(n, &p, &q, &s1, &s2)
        .into_iter()
        .map(|(clause, lower, upper)| {
            let diff = upper - lower;
            ClauseCheck {
                clause,
                passed: diff > slack,
                slack: diff,
            }
        })
        .collect();
    let etas = compute_etas(p, q, s1, s2).ok();
    Ok(AdmissibilityReport::from_clauses(clauses, etas))
}

/// Exact rational evaluation of the admissibility clauses; boundary equality
/// is inadmissible.
pub fn check_condition_c_exact(
    n: u32,
    p: Rational,
    q: Rational,
    s1: Rational,
    s2: Rational,
) -> Result<AdmissibilityReport> {
    check_preconditions(n, to_f64(p), to_f64(q))?;
    let clauses = clauses_generic(n, &p, &q, &s1, &s2)
        .into_iter()
        .map(|(clause, lower, upper)| ClauseCheck {
            clause,
            passed: lower < upper,
            slack: to_f64(upper - lower),
        })
        .collect();
    let etas = compute_etas_exact(p, q, s1, s2)
        .ok()
        .map(|e| e.map(to_f64));
    Ok(AdmissibilityReport::from_clauses(clauses, etas))
}

/// True iff every `eta_i` lies strictly inside `(1, 1 + 2/n)`.
pub fn etas_in_range(etas: &[f64; 4], n: u32) -> bool {
    etas_in_range_generic(etas, n)
}

pub fn etas_in_range_exact(etas: &[Rational; 4], n: u32) -> bool {
    etas_in_range_generic(etas, n)
}

/// Open upper end `(n + 2)/n` of the exponent maps' domain.
pub fn eta_singularity(n: u32) -> f64 {
    (n as f64 + 2.0) / n as f64
}

fn check_eta(eta: f64, n: u32) -> Result<f64> {
    if n < 3 {
        return Err(ExponentError::Dimension(n));
    }
    let nf = n as f64;
    let denom = nf + 2.0 - nf * eta;
    if !(eta >= 1.0) || !(denom > 0.0) || eta >= eta_singularity(n) {
        return Err(ExponentError::EtaOutOfRange {
            eta,
            n,
            limit: eta_singularity(n),
        });
    }
    Ok(denom)
}

/// `k(eta) = (n − eta(n−2)) / (n + 2 − n·eta)`.
pub fn k_exponent(eta: f64, n: u32) -> Result<f64> {
    let denom = check_eta(eta, n)?;
    let nf = n as f64;
    Ok((nf - eta * (nf - 2.0)) / denom)
}

/// `h(eta) = 2(eta − 1)n / (n + 2 − n·eta)`, the power of `1/epsilon` in the
/// interpolation inequality.
pub fn h_exponent(eta: f64, n: u32) -> Result<f64> {
    let denom = check_eta(eta, n)?;
    Ok(2.0 * (eta - 1.0) * n as f64 / denom)
}

/// `C1(eta) = n(eta − 1)/2`, the weight of the gradient term.
pub fn c1_coef(eta: f64, n: u32) -> Result<f64> {
    check_eta(eta, n)?;
    Ok(n as f64 * (eta - 1.0) / 2.0)
}

/// `C3(eta) = ((n + 2 − n·eta)/2) · C_GN^(2/(n + 2 − n·eta))`.
pub fn c3_coef(eta: f64, n: u32, c_gn: f64) -> Result<f64> {
    let denom = check_eta(eta, n)?;
    if !(c_gn > 0.0) {
        return Err(ExponentError::InvalidModel(format!(
            "Gagliardo-Nirenberg constant {c_gn} must be positive"
        )));
    }
    Ok(denom / 2.0 * c_gn.powf(2.0 / denom))
}

/// Index selection `(q, s1, s2) = (2p, p + 1, (p + 1)/2)` that makes all four
/// `eta_i` equal to `(p + 1)/p`.
pub fn corollary1_parameters(p: f64, n: u32) -> Result<(f64, f64, f64)> {
    if n < 3 {
        return Err(ExponentError::Dimension(n));
    }
    let half = n as f64 / 2.0;
    if !(p > half) {
        return Err(ExponentError::PBelowHalfDimension { p, half });
    }
    Ok((2.0 * p, p + 1.0, (p + 1.0) / 2.0))
}

/// Index selection `(p, q, s1, s2) = (n − 1, 2(n − 1), n, n/2)` with all
/// `eta_i = n/(n − 1)`.
pub fn corollary2_parameters(n: u32) -> Result<(f64, f64, f64, f64)> {
    if n < 3 {
        return Err(ExponentError::Dimension(n));
    }
    let nf = n as f64;
    Ok((nf - 1.0, 2.0 * (nf - 1.0), nf, nf / 2.0))
}

/// Upper end of an admissible `q` interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum UpperBound {
    Finite(f64),
    Unbounded,
}

impl std::fmt::Display for UpperBound {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            UpperBound::Finite(v) => write!(f, "{v}"),
            UpperBound::Unbounded => f.write_str("inf"),
        }
    }
}

/// One row of the admissible `(p, q)` region: `q_low < q < q_high`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionRow {
    pub p: f64,
    pub q_low: f64,
    pub q_high: UpperBound,
}

/// Admissible `q` range for each `p` in `p_grid`; rows with `p <= n/2` are
/// dropped.
pub fn feasible_region_samples(n: u32, p_grid: &[f64]) -> Result<Vec<RegionRow>> {
    if n < 3 {
        return Err(ExponentError::Dimension(n));
    }
    let nf = n as f64;
    Ok(p_grid
        .iter()
        .filter(|&&p| p > nf / 2.0)
        .map(|&p| RegionRow {
            p,
            q_low: nf,
            q_high: if p < nf {
                UpperBound::Finite(nf * p / (nf - p))
            } else {
                UpperBound::Unbounded
            },
        })
        .collect())
}

/// Writes region rows as CSV with header `p,q_low,q_high`.
pub fn write_region_csv<W: Write>(rows: &[RegionRow], out: W) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["p", "q_low", "q_high"])?;
    for row in rows {
        w.write_record([row.p.to_string(), row.q_low.to_string(), row.q_high.to_string()])?;
    }
    w.flush()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn r(n: i128, d: i128) -> Rational {
        Rational::new(n, d)
    }

    #[test]
    fn etas_examples() {
        let e = compute_etas(3.0, 6.0, 4.0, 2.0).unwrap();
        for v in e {
            assert_relative_eq!(v, 4.0 / 3.0, epsilon = 1e-15);
        }
        let e = compute_etas(2.0, 4.0, 3.0, 1.5).unwrap();
        for v in e {
            assert_relative_eq!(v, 1.5, epsilon = 1e-15);
        }
        assert_eq!(compute_etas(2.0, 4.0, 2.0, 2.0).unwrap(), [2.0, 2.0, 1.0, 1.0]);
    }

    #[test]
    fn etas_reject_small_auxiliaries() {
        assert!(matches!(
            compute_etas(2.0, 4.0, 1.0, 2.0),
            Err(ExponentError::AuxiliaryTooSmall { name: "s1", .. })
        ));
        assert!(matches!(
            compute_etas(2.0, 4.0, 3.0, 0.5),
            Err(ExponentError::AuxiliaryTooSmall { name: "s2", .. })
        ));
    }

    #[test]
    fn exact_etas_match_rational_values() {
        let e = compute_etas_exact(r(2, 1), r(4, 1), r(3, 1), r(3, 2)).unwrap();
        assert!(e.iter().all(|v| *v == r(3, 2)));
    }

    #[test]
    fn condition_c_examples() {
        let rep = check_condition_c(3, 2.0, 4.0, 3.0, 1.5).unwrap();
        assert!(rep.admissible);
        assert!(rep.margin > 0.0);

        let rep = check_condition_c(3, 2.0, 3.0, 3.0, 1.5).unwrap();
        assert!(!rep.admissible);
        assert!(rep.failed_clauses().any(|c| c.clause == "n < q"));

        assert!(check_condition_c(3, 3.0, 6.0, 4.0, 2.0).unwrap().admissible);
    }

    #[test]
    fn exact_boundary_is_inadmissible() {
        // s1 exactly at (1 + 2/n) q/2 = 10/3
        let rep = check_condition_c_exact(3, r(2, 1), r(4, 1), r(10, 3), r(3, 2)).unwrap();
        assert!(!rep.admissible);
        let failed: Vec<_> = rep.failed_clauses().map(|c| c.clause).collect();
        assert_eq!(failed, vec!["s1 < (1 + 2/n) q/2"]);
        assert_eq!(rep.margin, 0.0);
    }

    #[test]
    fn slack_tightens_float_check() {
        let rep = check_condition_c_with_slack(3, 2.0, 4.0, 3.0, 1.5, 0.2).unwrap();
        // s2 < 5/3 has slack 1/6
        assert!(!rep.admissible);
    }

    #[test]
    fn etas_in_range_examples() {
        let f = 4.0 / 3.0;
        assert!(etas_in_range(&[f, f, f, f], 3));
        assert!(!etas_in_range(&[5.0 / 3.0, f, f, f], 3));
        assert!(!etas_in_range(&[1.5; 4], 4));
        assert!(!etas_in_range_exact(&[r(5, 3), r(4, 3), r(4, 3), r(4, 3)], 3));
    }

    #[test]
    fn exponent_map_examples() {
        assert_eq!(k_exponent(1.0, 5).unwrap(), 1.0);
        assert_relative_eq!(k_exponent(4.0 / 3.0, 3).unwrap(), 5.0 / 3.0, epsilon = 1e-14);
        assert_relative_eq!(k_exponent(1.5, 3).unwrap(), 3.0, epsilon = 1e-14);
        assert_eq!(h_exponent(1.0, 4).unwrap(), 0.0);
        assert_eq!(c1_coef(1.0, 4).unwrap(), 0.0);
        assert_relative_eq!(h_exponent(4.0 / 3.0, 3).unwrap(), 2.0, epsilon = 1e-14);
        assert_relative_eq!(c1_coef(4.0 / 3.0, 3).unwrap(), 0.5, epsilon = 1e-15);
        // n + 2 - n*eta = 1/2 at eta = 3/2, n = 3: prefactor 1/4, exponent 4
        assert_relative_eq!(c3_coef(1.5, 3, 1.0).unwrap(), 0.25, epsilon = 1e-15);
        assert_relative_eq!(c3_coef(1.5, 3, 2.0).unwrap(), 0.25 * 16.0, epsilon = 1e-13);
    }

    #[test]
    fn exponent_maps_reject_singularity() {
        for eta in [5.0 / 3.0, 2.0, 0.99, f64::NAN] {
            assert!(k_exponent(eta, 3).is_err());
            assert!(h_exponent(eta, 3).is_err());
            assert!(c1_coef(eta, 3).is_err());
            assert!(c3_coef(eta, 3, 1.0).is_err());
        }
        assert!(c3_coef(1.2, 3, 0.0).is_err());
    }

    #[test]
    fn corollary_selections() {
        assert_eq!(corollary1_parameters(3.0, 3).unwrap(), (6.0, 4.0, 2.0));
        assert_eq!(corollary1_parameters(2.0, 3).unwrap(), (4.0, 3.0, 1.5));
        assert!(corollary1_parameters(1.0, 3).is_err());
        assert!(corollary1_parameters(1.5, 3).is_err());
        assert_eq!(corollary2_parameters(3).unwrap(), (2.0, 4.0, 3.0, 1.5));
        assert_eq!(corollary2_parameters(4).unwrap(), (3.0, 6.0, 4.0, 2.0));
        let (p, q, s1, s2) = corollary2_parameters(3).unwrap();
        let etas = compute_etas(p, q, s1, s2).unwrap();
        assert!(etas_in_range(&etas, 3));
    }

    #[test]
    fn region_rows_and_csv() {
        let rows = feasible_region_samples(3, &[1.5, 2.0, 3.0, 4.5]).unwrap();
        assert_eq!(rows.len(), 3);
        assert_eq!(rows[0].q_high, UpperBound::Finite(6.0));
        assert_eq!(rows[1].q_high, UpperBound::Unbounded);
        let mut buf = Vec::new();
        write_region_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "p,q_low,q_high\n2,3,6\n3,3,inf\n4.5,3,inf\n");
    }

    #[test]
    fn model_validation() {
        let mut m = ModelParams::default();
        assert!(m.validate().is_ok());
        m.mu2 = 1.0;
        m.k_logistic = 1.2;
        assert!(m.validate().is_err());
        m.k_logistic = 1.1;
        assert!(m.validate().is_ok());
        m.dim = 4;
        // limit 1 + 1/6
        m.k_logistic = 1.17;
        assert!(m.validate().is_err());
        let mut m = ModelParams::default();
        m.boundary_c = 1.0;
        assert!(m.validate().is_err());
        m.domain.convex = false;
        assert!(m.validate().is_ok());
        m.chi = 0.0;
        assert!(m.validate().is_err());
    }
}
