//! Differential inequality `E' <= F(E)` for the `(p, q)` energy and the
//! blow-up time lower bound `T_max >= ∫_{E(0)}^∞ ds / F(s)`.
//!
//! `F(s) = m Σ s^{eta_i} + Σ m_i s^{k(eta_i)} + mu1 s + c` with
//! `m = C_GN·M`, `m_i = M·C3(eta_i)·epsilon^{-h(eta_i)}` and
//! `M = max{p(ξ² + χ²), (n/4 + q − 2)(α² + β²)}`. The free parameter
//! `epsilon` must keep both gradient coefficients `zeta_1, zeta_2` negative.

mod optimize;
pub mod quadrature;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exponents::{
    c1_coef, c3_coef, corollary1_parameters, corollary2_parameters, h_exponent, EnergyIndices,
    ExponentError, ModelParams,
};

pub use optimize::{feasible_box, optimize_bound, FeasibleBox, OptimizedBound, OptimizerConfig};
pub use quadrature::{
    integrate_reciprocal, integrate_reciprocal_truncated, PowerSum, PowerTerm, QuadratureConfig,
    ReciprocalIntegral,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OdiError {
    #[error(transparent)]
    Exponent(#[from] ExponentError),
    #[error("indices not admissible: {0}")]
    NotAdmissible(String),
    #[error("constant term of zeta_{which} is {constant}, no epsilon makes it negative")]
    Degenerate { which: u8, constant: f64 },
    #[error("epsilon = {epsilon} outside (0, {max})")]
    EpsilonOutOfRange { epsilon: f64, max: f64 },
    #[error("denominator F(s) vanishes at s = {root}")]
    NonpositiveDenominator { root: f64 },
    #[error("no superlinear term: the lower-bound integral diverges")]
    Divergent,
    #[error("tail estimate {tail_upper} still above tolerance at S = {truncation_point} (value {value})")]
    TailNotConverged {
        truncation_point: f64,
        tail_upper: f64,
        value: f64,
    },
    #[error("admissible (s1, s2) box is empty: {0}")]
    Infeasible(String),
    #[error("{0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, OdiError>;

/// Affine map `epsilon -> constant + slope·epsilon`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZetaLine {
    pub constant: f64,
    pub slope: f64,
}

impl ZetaLine {
    pub fn at(&self, epsilon: f64) -> f64 {
        self.constant + self.slope * epsilon
    }

    fn root(&self) -> f64 {
        -self.constant / self.slope
    }
}

fn require_admissible(params: &ModelParams, indices: &EnergyIndices) -> Result<()> {
    let report = indices.admissibility(params.dim)?;
    if !report.admissible {
        let failed: Vec<_> = report.failed_clauses().map(|c| c.clause).collect();
        return Err(OdiError::NotAdmissible(failed.join(", ")));
    }
    Ok(())
}

fn chemo_sq(params: &ModelParams) -> f64 {
    params.chi * params.chi + params.xi * params.xi
}

fn signal_weight(params: &ModelParams, q: f64) -> f64 {
    (params.alpha * params.alpha + params.beta * params.beta) * (params.dim as f64 / 4.0 + q - 2.0)
}

/// `M = max{p(ξ² + χ²), (n/4 + q − 2)(α² + β²)}`.
pub fn coupling_max(params: &ModelParams, indices: &EnergyIndices) -> f64 {
    (indices.p * chemo_sq(params)).max(signal_weight(params, indices.q))
}

/// `zeta_1` and `zeta_2` as affine functions of epsilon.
pub fn zeta_lines(params: &ModelParams, indices: &EnergyIndices) -> Result<[ZetaLine; 2]> {
    require_admissible(params, indices)?;
    let n = params.dim;
    let EnergyIndices { p, q, s1, eta, .. } = *indices;
    let sig = signal_weight(params, q);
    let chem = chemo_sq(params);
    Ok([
        ZetaLine {
            constant: -2.0 * (p - 1.0) / (p * p),
            slope: sig * c1_coef(eta[0], n)? + p * chem * (s1 - 1.0) / s1 * c1_coef(eta[1], n)?,
        },
        ZetaLine {
            constant: -(q - 2.0) / (q * q),
            slope: c1_coef(eta[2], n)? * sig + c1_coef(eta[3], n)? / s1 * chem * p,
        },
    ])
}

/// `(zeta_1, zeta_2)` at the given epsilon.
pub fn zeta_coefficients(
    params: &ModelParams,
    indices: &EnergyIndices,
    epsilon: f64,
) -> Result<(f64, f64)> {
    if !(epsilon >= 0.0) {
        return Err(OdiError::EpsilonOutOfRange {
            epsilon,
            max: f64::INFINITY,
        });
    }
    let [z1, z2] = zeta_lines(params, indices)?;
    Ok((z1.at(epsilon), z2.at(epsilon)))
}

/// Supremum of the epsilons keeping both zeta coefficients negative.
pub fn max_admissible_epsilon(params: &ModelParams, indices: &EnergyIndices) -> Result<f64> {
    let lines = zeta_lines(params, indices)?;
    let mut eps = f64::INFINITY;
    for (i, line) in lines.iter().enumerate() {
        if line.constant >= 0.0 {
            return Err(OdiError::Degenerate {
                which: i as u8 + 1,
                constant: line.constant,
            });
        }
        if line.slope > 0.0 {
            eps = eps.min(line.root());
        }
    }
    Ok(eps)
}

/// Upper end of the epsilon range used when the pipeline picks epsilon
/// itself: the interpolation inequality with its printed `h(eta)` only
/// dominates the Young split for `epsilon <= 1`.
pub fn epsilon_cap(params: &ModelParams, indices: &EnergyIndices) -> Result<f64> {
    Ok(max_admissible_epsilon(params, indices)?.min(1.0))
}

/// Midpoint of the capped admissible epsilon range.
pub fn default_epsilon(params: &ModelParams, indices: &EnergyIndices) -> Result<f64> {
    Ok(epsilon_cap(params, indices)? / 2.0)
}

/// Assembled coefficients of `F`.
#[derive(Debug, Clone, PartialEq)]
pub struct OdiCoefficients {
    pub m: f64,
    pub m_i: [f64; 4],
    pub mu1: f64,
    pub c: f64,
    pub eta: [f64; 4],
    pub k_eta: [f64; 4],
    pub epsilon: f64,
    pub c_gn: f64,
    pub indices: EnergyIndices,
    pub warnings: Vec<String>,
}

impl OdiCoefficients {
    /// `F` as a power sum with equal exponents merged.
    pub fn denominator(&self) -> Result<PowerSum> {
        let terms = self
            .eta
            .iter()
            .map(|&e| PowerTerm {
                coef: self.m,
                exponent: e,
            })
            .chain(self.m_i.iter().zip(&self.k_eta).map(|(&coef, &exponent)| PowerTerm {
                coef,
                exponent,
            }))
            .chain(std::iter::once(PowerTerm {
                coef: self.mu1,
                exponent: 1.0,
            }));
        PowerSum::new(terms, self.c)
    }
}

pub fn odi_coefficients(
    params: &ModelParams,
    indices: &EnergyIndices,
    epsilon: f64,
    c_gn: f64,
) -> Result<OdiCoefficients> {
    params.validate()?;
    let eps_max = max_admissible_epsilon(params, indices)?;
    if !(epsilon > 0.0 && epsilon < eps_max) {
        return Err(OdiError::EpsilonOutOfRange {
            epsilon,
            max: eps_max,
        });
    }
    if !(c_gn > 0.0 && c_gn.is_finite()) {
        return Err(OdiError::InvalidInput(format!(
            "C_GN = {c_gn} must be positive"
        )));
    }
    let n = params.dim;
    let big_m = coupling_max(params, indices);
    let k_eta = indices.k_etas(n)?;
    let mut m_i = [0.0; 4];
    for (slot, &eta) in m_i.iter_mut().zip(&indices.eta) {
        *slot = big_m * c3_coef(eta, n, c_gn)? * epsilon.powf(-h_exponent(eta, n)?);
    }
    let c = if params.domain.convex {
        0.0
    } else {
        2.0 * params.boundary_c
    };
    let mut warnings = Vec::new();
    if params.delta != params.beta || params.gamma != params.alpha {
        warnings.push(format!(
            "signal constants follow the printed (α² + β²)(n/4 + q − 2) weights; \
             gamma = {}, delta = {} do not enter (alpha = {}, beta = {})",
            params.gamma, params.delta, params.alpha, params.beta
        ));
    }
    if epsilon > 1.0 {
        warnings.push(format!(
            "epsilon = {epsilon} > 1: interpolation coefficient epsilon^-h(eta) is below the Young bound"
        ));
    }
    Ok(OdiCoefficients {
        m: c_gn * big_m,
        m_i,
        mu1: params.mu1,
        c,
        eta: indices.eta,
        k_eta,
        epsilon,
        c_gn,
        indices: *indices,
        warnings,
    })
}

/// `F(E) = m Σ E^{eta_i} + Σ m_i E^{k(eta_i)} + mu1 E + c`.
pub fn odi_rhs(coeffs: &OdiCoefficients, energy: f64) -> f64 {
    let power: f64 = coeffs.eta.iter().map(|&e| coeffs.m * energy.powf(e)).sum::<f64>()
        + coeffs
            .m_i
            .iter()
            .zip(&coeffs.k_eta)
            .map(|(&c, &k)| c * energy.powf(k))
            .sum::<f64>();
    power + coeffs.mu1 * energy + coeffs.c
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IndicesRecord {
    pub p: f64,
    pub q: f64,
    pub s1: f64,
    pub s2: f64,
    pub eta: [f64; 4],
    pub k_eta: [f64; 4],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoeffRecord {
    pub m: f64,
    pub m_i: [f64; 4],
    pub mu1: f64,
    pub c: f64,
}

/// Truncated lower-bound integral with its error budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundResult {
    pub t_lower: f64,
    #[serde(rename = "S")]
    pub truncation_point: f64,
    pub quad_error: f64,
    pub tail_upper: f64,
    pub epsilon: f64,
    #[serde(rename = "C_GN")]
    pub c_gn: f64,
    pub indices: IndicesRecord,
    pub coeffs: CoeffRecord,
    pub restricted_component: bool,
    pub warnings: Vec<String>,
}

/// `∫_{E0}^{S} ds/F(s)`; the neglected tail is reported in `tail_upper`.
pub fn lower_bound_integral(
    coeffs: &OdiCoefficients,
    e0: f64,
    cfg: &QuadratureConfig,
) -> Result<BoundResult> {
    let integral = integrate_reciprocal(&coeffs.denominator()?, e0, cfg)?;
    let mut warnings = coeffs.warnings.clone();
    if integral.restricted_component {
        warnings.push("mu1 < 0: F vanishes below E0, bound uses the component above".into());
    }
    let ix = &coeffs.indices;
    Ok(BoundResult {
        t_lower: integral.value,
        truncation_point: integral.truncation_point,
        quad_error: integral.quad_error,
        tail_upper: integral.tail_upper,
        epsilon: coeffs.epsilon,
        c_gn: coeffs.c_gn,
        indices: IndicesRecord {
            p: ix.p,
            q: ix.q,
            s1: ix.s1,
            s2: ix.s2,
            eta: coeffs.eta,
            k_eta: coeffs.k_eta,
        },
        coeffs: CoeffRecord {
            m: coeffs.m,
            m_i: coeffs.m_i,
            mu1: coeffs.mu1,
            c: coeffs.c,
        },
        restricted_component: integral.restricted_component,
        warnings,
    })
}

/// Bound for explicit indices; `epsilon = None` picks [`default_epsilon`].
pub fn bound_with_indices(
    params: &ModelParams,
    indices: &EnergyIndices,
    e0: f64,
    c_gn: f64,
    epsilon: Option<f64>,
    cfg: &QuadratureConfig,
) -> Result<BoundResult> {
    let epsilon = match epsilon {
        Some(e) => e,
        None => default_epsilon(params, indices)?,
    };
    let coeffs = odi_coefficients(params, indices, epsilon, c_gn)?;
    lower_bound_integral(&coeffs, e0, cfg)
}

/// Bound at `q = 2p, s1 = p + 1, s2 = (p + 1)/2`.
pub fn bound_corollary1(
    params: &ModelParams,
    p: f64,
    e0: f64,
    c_gn: f64,
    cfg: &QuadratureConfig,
) -> Result<BoundResult> {
    let (q, s1, s2) = corollary1_parameters(p, params.dim)?;
    let indices = EnergyIndices::new(p, q, s1, s2)?;
    bound_with_indices(params, &indices, e0, c_gn, None, cfg)
}

/// Bound at `p = n − 1, q = 2(n − 1), s1 = n, s2 = n/2`.
pub fn bound_corollary2(
    params: &ModelParams,
    e0: f64,
    c_gn: f64,
    cfg: &QuadratureConfig,
) -> Result<BoundResult> {
    let (p, q, s1, s2) = corollary2_parameters(params.dim)?;
    let indices = EnergyIndices::new(p, q, s1, s2)?;
    bound_with_indices(params, &indices, e0, c_gn, None, cfg)
}
