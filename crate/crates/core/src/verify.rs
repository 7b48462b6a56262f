//! Empirical checks of the functional inequalities behind the bound, and of
//! the differential inequality along simulated trajectories.
//!
//! Every check is one-sided and reports a normalized slack
//! `(right − left)/right`; a sample is a violation when that slack falls below
//! `−tolerance`. Randomised checks draw sample `i` from its own ChaCha stream
//! keyed by `(seed, i)`, so a longer run always extends a shorter one.

use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exponents::{
    c1_coef, c3_coef, check_condition_c_exact, compute_etas_exact, etas_in_range_exact, h_exponent,
    k_exponent, ExponentError, Rational,
};
use crate::odi::{odi_rhs, OdiCoefficients};
use crate::pde::{RadialGrid, Trajectory};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VerifyError {
    #[error(transparent)]
    Exponent(#[from] ExponentError),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, VerifyError>;

/// Outcome of a sampling check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InequalityReport {
    pub samples: usize,
    pub violations: usize,
    /// Smallest normalized slack seen; negative means the left side won.
    pub worst_margin: f64,
    /// Descriptor of the sample attaining `worst_margin` when it is a violation.
    pub witness: Option<String>,
    pub seed: Option<u64>,
    pub config: serde_json::Value,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl InequalityReport {
    fn new(seed: Option<u64>, config: serde_json::Value) -> Self {
        Self {
            samples: 0,
            violations: 0,
            worst_margin: f64::INFINITY,
            witness: None,
            seed,
            config,
            notes: Vec::new(),
        }
    }

    /// Records one sample with normalized slack `margin`.
    fn record(&mut self, margin: f64, tolerance: f64, witness: impl FnOnce() -> String) {
        self.samples += 1;
        let violated = !(margin >= -tolerance);
        if violated {
            self.violations += 1;
        }
        if margin < self.worst_margin || margin.is_nan() {
            self.worst_margin = margin;
            if violated {
                self.witness = Some(witness());
            }
        }
    }

    fn finish(mut self) -> Self {
        if self.samples == 0 {
            self.worst_margin = 0.0;
        }
        self
    }

    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

fn normalized_slack(lhs: f64, rhs: f64) -> f64 {
    if rhs > 0.0 {
        (rhs - lhs) / rhs
    } else if lhs <= rhs {
        0.0
    } else {
        -1.0
    }
}

fn sample_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Radial test function, Neumann-compatible at `r = R` and smooth at the origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TestFunction {
    /// `Σ_k c_k cos(kπr/R)`.
    Cosine { coeffs: Vec<f64> },
    /// `background + height·(1 + cos(π(r − center)/width))/2` on
    /// `|r − center| < width`. Centres are `0`, `R`, or keep the support
    /// inside `[0, R]`.
    Bump {
        center: f64,
        width: f64,
        height: f64,
        background: f64,
    },
}

impl TestFunction {
    pub fn eval(&self, r: f64, radius: f64) -> f64 {
        match self {
            TestFunction::Cosine { coeffs } => coeffs
                .iter()
                .enumerate()
                .map(|(k, c)| c * (k as f64 * std::f64::consts::PI * r / radius).cos())
                .sum(),
            TestFunction::Bump {
                center,
                width,
                height,
                background,
            } => {
                let d = (r - center).abs();
                let bump = if d < *width {
                    0.5 * (1.0 + (std::f64::consts::PI * d / width).cos())
                } else {
                    0.0
                };
                background + height * bump
            }
        }
    }

    pub fn on_grid(&self, grid: &RadialGrid) -> Vec<f64> {
        grid.sample(|r| self.eval(r, grid.radius))
    }

    fn describe(&self) -> String {
        serde_json::to_string(self).unwrap_or_default()
    }
}

/// Test-function sampler shared by the Gagliardo-Nirenberg estimate and the
/// interpolation check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplerConfig {
    pub samples: usize,
    /// Not read from configuration files; callers set it from their own seed.
    #[serde(skip)]
    pub seed: u64,
    pub max_modes: usize,
    /// Narrowest bump, in cells.
    pub min_width_cells: f64,
    /// Every `ascent_every`-th sample perturbs the current best instead of
    /// drawing afresh; 0 disables ascent.
    pub ascent_every: usize,
    pub tolerance: f64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            samples: 1000,
            seed: 0,
            max_modes: 12,
            min_width_cells: 3.0,
            ascent_every: 3,
            tolerance: 1e-12,
        }
    }
}

fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn place_bump(rng: &mut ChaCha8Rng, width: f64, radius: f64) -> f64 {
    let roll: f64 = rng.gen();
    if roll < 0.5 || 2.0 * width >= radius {
        0.0
    } else if roll < 0.625 {
        radius
    } else {
        rng.gen_range(width..=radius - width)
    }
}

fn draw_test_function(rng: &mut ChaCha8Rng, grid: &RadialGrid, cfg: &SamplerConfig) -> TestFunction {
    let radius = grid.radius;
    if rng.gen_bool(0.3) {
        let modes = rng.gen_range(1..=cfg.max_modes.max(1));
        let decay: f64 = rng.gen_range(0.0..2.0);
        let coeffs = (0..=modes)
            .map(|k| standard_normal(rng) / (1.0 + k as f64).powf(decay))
            .collect();
        TestFunction::Cosine { coeffs }
    } else {
        let min_w = (cfg.min_width_cells * grid.spacing()).min(radius);
        let width = min_w * (radius / min_w).powf(rng.gen::<f64>());
        let center = place_bump(rng, width, radius);
        let background = if rng.gen_bool(0.5) {
            0.0
        } else {
            10f64.powf(rng.gen_range(-4.0..0.0))
        };
        TestFunction::Bump {
            center,
            width,
            height: 1.0,
            background,
        }
    }
}

fn perturb(best: &TestFunction, rng: &mut ChaCha8Rng, grid: &RadialGrid, cfg: &SamplerConfig) -> TestFunction {
    let radius = grid.radius;
    match best {
        TestFunction::Cosine { coeffs } => {
            let scale = coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs())).max(1e-300);
            TestFunction::Cosine {
                coeffs: coeffs
                    .iter()
                    .map(|c| c + 0.1 * scale * standard_normal(rng))
                    .collect(),
            }
        }
        TestFunction::Bump {
            center,
            width,
            height,
            background,
        } => {
            let min_w = (cfg.min_width_cells * grid.spacing()).min(radius);
            let width = (width * (0.2 * standard_normal(rng)).exp()).clamp(min_w, radius);
            let center = if *center == 0.0 || *center == radius || 2.0 * width >= radius {
                if 2.0 * width >= radius {
                    0.0
                } else {
                    *center
                }
            } else {
                (center + 0.1 * width * standard_normal(rng)).clamp(width, radius - width)
            };
            let background = if *background == 0.0 {
                0.0
            } else {
                background * (0.3 * standard_normal(rng)).exp()
            };
            TestFunction::Bump {
                center,
                width,
                height: *height,
                background,
            }
        }
    }
}

/// Runs the sampler, feeding every candidate's values to `score` (higher is
/// worse for the inequality) and hill-climbing on the best candidate so far.
fn sample_loop<F>(grid: &RadialGrid, cfg: &SamplerConfig, mut score: F)
where
    F: FnMut(&TestFunction, &[f64]) -> Option<f64>,
{
    let mut best: Option<(TestFunction, f64)> = None;
    for i in 0..cfg.samples {
        let mut rng = sample_rng(cfg.seed, i as u64);
        let ascend = cfg.ascent_every > 0 && i % cfg.ascent_every == cfg.ascent_every - 1;
        let candidate = match (&best, ascend) {
            (Some((b, _)), true) => perturb(b, &mut rng, grid, cfg),
            _ => draw_test_function(&mut rng, grid, cfg),
        };
        let values = candidate.on_grid(grid);
        if let Some(s) = score(&candidate, &values) {
            if best.as_ref().is_none_or(|(_, bs)| s > *bs) {
                best = Some((candidate, s));
            }
        }
    }
}

/// Exponents of the Gagliardo-Nirenberg inequality
/// `‖f‖_p^p ≤ C (‖∇f‖_r^{pa} ‖f‖_q^{p(1−a)} + ‖f‖_s^p)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GnExponents {
    pub p: f64,
    pub q: f64,
    pub r: f64,
    pub s: f64,
}

impl GnExponents {
    /// The instance used for the interpolation inequality at `eta`:
    /// `p = 2 eta`, `q = r = s = 2`.
    pub fn for_eta(eta: f64) -> Self {
        Self {
            p: 2.0 * eta,
            q: 2.0,
            r: 2.0,
            s: 2.0,
        }
    }

    pub fn interpolation(&self, n: u32) -> Result<f64> {
        let GnExponents { p, q, r, s } = *self;
        if !(r >= 1.0 && q >= 1.0 && q <= p && p.is_finite() && s >= 1.0) {
            return Err(VerifyError::InvalidInput(format!(
                "exponents {self:?} outside r >= 1, 1 <= q <= p < inf, s >= 1"
            )));
        }
        let a = (1.0 / q - 1.0 / p) / (1.0 / q + 1.0 / n as f64 - 1.0 / r);
        if !(0.0..=1.0).contains(&a) {
            return Err(VerifyError::InvalidInput(format!(
                "interpolation exponent a = {a} outside [0, 1] for {self:?}"
            )));
        }
        Ok(a)
    }
}

/// `‖f‖_p^p / (‖∇f‖_r^{pa} ‖f‖_q^{p(1−a)} + ‖f‖_s^p)`, or `None` for `f ≡ 0`.
pub fn gn_ratio(grid: &RadialGrid, f: &[f64], ex: &GnExponents, a: f64) -> Option<f64> {
    let lp = grid.integrate_power(f, ex.p);
    let grad = grid.integrate_gradient_power(f, ex.r).powf(ex.p * a / ex.r);
    let lq = grid.integrate_power(f, ex.q).powf(ex.p * (1.0 - a) / ex.q);
    let ls = grid.integrate_power(f, ex.s).powf(ex.p / ex.s);
    let denom = grad * lq + ls;
    (denom > 0.0 && lp > 0.0).then(|| lp / denom)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GnEstimate {
    /// Largest ratio seen; a lower estimate of the true constant.
    pub estimate: f64,
    pub samples: usize,
    /// Samples skipped because they vanished identically.
    pub skipped: usize,
    pub witness: Option<TestFunction>,
}

/// Running maximum of the Gagliardo-Nirenberg ratio over sampled test functions.
pub fn estimate_gn_constant(grid: &RadialGrid, ex: &GnExponents, cfg: &SamplerConfig) -> Result<GnEstimate> {
    let a = ex.interpolation(grid.dim)?;
    let mut est = GnEstimate {
        estimate: 0.0,
        samples: 0,
        skipped: 0,
        witness: None,
    };
    sample_loop(grid, cfg, |tf, f| {
        est.samples += 1;
        let ratio = gn_ratio(grid, f, ex, a);
        match ratio {
            Some(x) if x > est.estimate => {
                est.estimate = x;
                est.witness = Some(tf.clone());
            }
            None => est.skipped += 1,
            _ => {}
        }
        ratio
    });
    Ok(est)
}

/// Maximum of the per-eta estimates, multiplied by `safety`.
pub fn gn_constant_for_etas(grid: &RadialGrid, etas: &[f64], safety: f64, cfg: &SamplerConfig) -> Result<f64> {
    if !(safety >= 1.0) {
        return Err(VerifyError::InvalidInput(format!("safety factor {safety} below 1")));
    }
    let mut best: f64 = 0.0;
    for &eta in etas {
        best = best.max(estimate_gn_constant(grid, &GnExponents::for_eta(eta), cfg)?.estimate);
    }
    Ok(safety * best)
}

/// Both sides of the interpolation inequality for one function.
pub fn embed_sides(grid: &RadialGrid, f: &[f64], eta: f64, epsilon: f64, c_gn: f64) -> Result<(f64, f64)> {
    let n = grid.dim;
    let l2 = grid.integrate_power(f, 2.0);
    let lhs = grid.integrate_power(f, 2.0 * eta);
    let rhs = epsilon * c1_coef(eta, n)? * grid.integrate_gradient_power(f, 2.0)
        + c_gn * l2.powf(eta)
        + c3_coef(eta, n, c_gn)? * epsilon.powf(-h_exponent(eta, n)?) * l2.powf(k_exponent(eta, n)?);
    Ok((lhs, rhs))
}

/// Samples the interpolation inequality at `(eta, epsilon)` with constant `c_gn`.
pub fn check_embed_inequality(
    grid: &RadialGrid,
    eta: f64,
    epsilon: f64,
    c_gn: f64,
    cfg: &SamplerConfig,
) -> Result<InequalityReport> {
    let n = grid.dim;
    let upper = 1.0 + 2.0 / n as f64;
    if !(eta > 1.0 && eta < upper) {
        return Err(VerifyError::InvalidInput(format!("eta = {eta} outside (1, {upper})")));
    }
    if !(epsilon > 0.0 && c_gn > 0.0) {
        return Err(VerifyError::InvalidInput(format!(
            "epsilon = {epsilon} and C_GN = {c_gn} must be positive"
        )));
    }
    let mut report = InequalityReport::new(
        Some(cfg.seed),
        serde_json::json!({
            "eta": eta, "epsilon": epsilon, "C_GN": c_gn, "n": n,
            "cells": grid.cells, "radius": grid.radius, "sampler": cfg,
        }),
    );
    if epsilon > 1.0 {
        report
            .notes
            .push("epsilon > 1: the printed epsilon power is below the Young bound".into());
    }
    let mut err = None;
    sample_loop(grid, cfg, |tf, f| match embed_sides(grid, f, eta, epsilon, c_gn) {
        Ok((lhs, rhs)) => {
            let margin = normalized_slack(lhs, rhs);
            report.record(margin, cfg.tolerance, || tf.describe());
            Some(-margin)
        }
        Err(e) => {
            err.get_or_insert(e);
            None
        }
    });
    match err {
        Some(e) => Err(e),
        None => Ok(report.finish()),
    }
}

/// `count` points in `(1, n/(n−1)]`, ending exactly at `n/(n−1)`.
pub fn remark_eta_grid(n: u32, count: usize) -> Vec<f64> {
    let top = n as f64 / (n as f64 - 1.0);
    (1..=count)
        .map(|i| {
            if i == count {
                top
            } else {
                1.0 + (top - 1.0) * i as f64 / count as f64
            }
        })
        .collect()
}

/// Checks `k(eta) < eta/(2 − eta) < n/(n − 2)` on the interior and the triple
/// equality at `eta = n/(n − 1)` to `1e-12`.
pub fn check_remark_ordering(n: u32, eta_grid: &[f64]) -> Result<InequalityReport> {
    if n < 3 {
        return Err(ExponentError::Dimension(n).into());
    }
    let nf = n as f64;
    let top = nf / (nf - 1.0);
    let limit = nf / (nf - 2.0);
    let mut report = InequalityReport::new(None, serde_json::json!({ "n": n, "points": eta_grid.len() }));
    for &eta in eta_grid {
        if !(eta > 1.0 && eta <= top) {
            return Err(VerifyError::InvalidInput(format!("eta = {eta} outside (1, {top}]")));
        }
        let k = k_exponent(eta, n)?;
        let mid = eta / (2.0 - eta);
        let witness = || format!("eta = {eta}: k = {k}, eta/(2-eta) = {mid}, n/(n-2) = {limit}");
        if (eta - top).abs() <= 1e-12 {
            let spread = (k - limit).abs().max((mid - limit).abs()) / limit;
            report.record(if spread <= 1e-12 { 0.0 } else { -spread }, 0.0, witness);
        } else {
            let margin = ((mid - k) / mid).min((limit - mid) / limit);
            let margin = if margin > 0.0 { margin } else { margin.min(-f64::MIN_POSITIVE) };
            report.record(margin, 0.0, witness);
        }
    }
    Ok(report.finish())
}

const DENOMINATORS: [i128; 8] = [1, 2, 3, 4, 5, 6, 8, 12];

fn random_rational(rng: &mut ChaCha8Rng, low: Rational, high: Rational) -> Rational {
    let d = DENOMINATORS[rng.gen_range(0..DENOMINATORS.len())];
    let lo = (low * d).ceil().to_integer();
    let hi = (high * d).floor().to_integer();
    Ratio::new(rng.gen_range(lo..=hi.max(lo)), d)
}

/// Draws from `(low, high)` when nonempty, otherwise from the whole box;
/// with probability 1/8 returns an endpoint exactly.
fn guided_rational(rng: &mut ChaCha8Rng, low: Rational, high: Rational, box_lo: Rational, box_hi: Rational) -> Rational {
    let floor = box_lo + Ratio::new(1, 12);
    let low = if low < floor { floor } else { low };
    let roll: f64 = rng.gen();
    if roll < 0.0625 && low > box_lo {
        return low;
    }
    if roll < 0.125 && high > low {
        return high;
    }
    if high > low && roll < 0.75 {
        random_rational(rng, low, high)
    } else {
        random_rational(rng, floor, box_hi)
    }
}

/// Randomised check that the admissibility clauses hold exactly when all four
/// derived exponents lie in `(1, 1 + 2/n)`. Both sides are evaluated in exact
/// rational arithmetic, so any violation is a genuine counterexample.
pub fn equivalence_bruteforce(n: u32, trials: usize, seed: u64) -> Result<InequalityReport> {
    if n < 3 {
        return Err(ExponentError::Dimension(n).into());
    }
    let nn = Rational::from_integer(n as i128);
    let one = Rational::from_integer(1);
    let two = Rational::from_integer(2);
    let widen = one + two / nn;
    let mut report = InequalityReport::new(Some(seed), serde_json::json!({ "n": n, "trials": trials }));
    let mut admissible = 0usize;
    for i in 0..trials {
        let mut rng = sample_rng(seed, i as u64);
        let p = random_rational(&mut rng, Ratio::new(1, 12), nn * 3);
        let q = random_rational(&mut rng, Ratio::new(1, 12), nn * 4);
        // bias half the draws towards the intervals the clauses carve out
        let (s1, s2) = if rng.gen_bool(0.5) {
            let s1_lo = (one + nn / two).max(q / two);
            let s1_hi = widen * q / two;
            let s2_lo = (q * (nn + two) / (two * q + two * nn)).max(p / two);
            let s2_hi = (widen * p / two).min(q / two);
            (
                guided_rational(&mut rng, s1_lo, s1_hi, one, nn * 3),
                guided_rational(&mut rng, s2_lo, s2_hi, one, nn * 2),
            )
        } else {
            (
                random_rational(&mut rng, one + Ratio::new(1, 12), nn * 3),
                random_rational(&mut rng, one + Ratio::new(1, 12), nn * 2),
            )
        };
        let clauses = check_condition_c_exact(n, p, q, s1, s2)?.admissible;
        let etas = etas_in_range_exact(&compute_etas_exact(p, q, s1, s2)?, n);
        admissible += clauses as usize;
        report.record(if clauses == etas { 0.0 } else { -1.0 }, 0.0, || {
            format!("(p, q, s1, s2) = ({p}, {q}, {s1}, {s2}): clauses {clauses}, eta range {etas}")
        });
    }
    report.notes.push(format!("{admissible} of {trials} samples admissible"));
    Ok(report.finish())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MonitorConfig {
    /// Absolute allowance added to the right side.
    pub slack: f64,
    pub tolerance: f64,
}

impl Default for MonitorConfig {
    fn default() -> Self {
        Self {
            slack: 0.0,
            tolerance: 1e-9,
        }
    }
}

pub const MONITOR_CAVEAT: &str =
    "valid only if the supplied C_GN dominates the discrete Gagliardo-Nirenberg constant of the grid";

/// Checks `dE/dt ≤ F(E) + slack` at every interior sample up to the last one,
/// with `dE/dt` from second-order centred differences on the nonuniform times.
pub fn odi_monitor(traj: &Trajectory, coeffs: &OdiCoefficients, cfg: &MonitorConfig) -> InequalityReport {
    let mut report = InequalityReport::new(
        None,
        serde_json::json!({
            "p": traj.p, "q": traj.q, "epsilon": coeffs.epsilon, "C_GN": coeffs.c_gn,
            "monitor": cfg, "t_detect": traj.report.t_detect,
        }),
    );
    report.notes.push(MONITOR_CAVEAT.into());
    let s = &traj.samples;
    for i in 1..s.len().saturating_sub(1) {
        let (h1, h2) = (s[i].t - s[i - 1].t, s[i + 1].t - s[i].t);
        if !(h1 > 0.0 && h2 > 0.0) {
            continue;
        }
        let de = (h1 * h1 * s[i + 1].energy - h2 * h2 * s[i - 1].energy + (h2 * h2 - h1 * h1) * s[i].energy)
            / (h1 * h2 * (h1 + h2));
        let rhs = odi_rhs(coeffs, s[i].energy) + cfg.slack;
        let scale = rhs.abs().max(de.abs()).max(f64::MIN_POSITIVE);
        let margin = (rhs - de) / scale;
        report.record(margin, cfg.tolerance, || {
            format!("t = {}: E = {}, dE/dt = {de}, F(E) = {rhs}", s[i].t, s[i].energy)
        });
    }
    report.finish()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConcurrenceThresholds {
    /// Energy threshold as a multiple of `E(0)`.
    pub energy_factor: f64,
    /// Sup-norm threshold as a multiple of `‖u_0‖_∞`.
    pub linf_factor: f64,
}

impl Default for ConcurrenceThresholds {
    fn default() -> Self {
        Self {
            energy_factor: 1e3,
            linf_factor: 1e3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcurrenceReport {
    pub blew_up: bool,
    pub status: String,
    pub energy_threshold: f64,
    pub linf_threshold: f64,
    pub t_energy: Option<f64>,
    pub t_linf: Option<f64>,
    /// `t_energy − t_linf` when both thresholds were crossed.
    pub lag: Option<f64>,
    pub t_detect: Option<f64>,
}

/// First crossing times of the energy and sup-norm thresholds. Reports only.
pub fn concurrence_diagnostic(traj: &Trajectory, thresholds: &ConcurrenceThresholds) -> ConcurrenceReport {
    let first = traj.samples.first();
    let energy_threshold = thresholds.energy_factor * first.map_or(0.0, |s| s.energy);
    let linf_threshold = thresholds.linf_factor * first.map_or(0.0, |s| s.linf_u);
    let t_energy = traj.samples.iter().find(|s| s.energy > energy_threshold).map(|s| s.t);
    let t_linf = traj.samples.iter().find(|s| s.linf_u > linf_threshold).map(|s| s.t);
    let status = match (t_energy, t_linf) {
        (None, None) => "no crossing",
        (Some(_), Some(_)) => "both crossed",
        (Some(_), None) => "energy only",
        (None, Some(_)) => "sup norm only",
    };
    ConcurrenceReport {
        blew_up: traj.report.blew_up,
        status: status.into(),
        energy_threshold,
        linf_threshold,
        t_energy,
        t_linf,
        lag: t_energy.zip(t_linf).map(|(a, b)| a - b),
        t_detect: traj.report.t_detect,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn grid() -> RadialGrid {
        RadialGrid::new(3, 1.0, 200).unwrap()
    }

    #[test]
    fn constant_function_ratio_is_one_when_p_equals_s() {
        let g = grid();
        // a > 0, so the gradient factor vanishes on constants
        let ex = GnExponents {
            p: 3.0,
            q: 2.0,
            r: 2.0,
            s: 3.0,
        };
        let a = ex.interpolation(3).unwrap();
        assert_relative_eq!(a, 0.5, epsilon = 1e-15);
        assert_relative_eq!(gn_ratio(&g, &vec![3.0; g.cells], &ex, a).unwrap(), 1.0, max_relative = 1e-14);
        assert_eq!(gn_ratio(&g, &vec![0.0; g.cells], &ex, a), None);
    }

    #[test]
    fn interpolation_exponent_for_embedding_instance() {
        let a = GnExponents::for_eta(1.5).interpolation(3).unwrap();
        assert_relative_eq!(a, 3.0 * 0.5 / 3.0, epsilon = 1e-15);
        assert!(GnExponents { p: 1.0, q: 2.0, r: 2.0, s: 2.0 }.interpolation(3).is_err());
    }

    #[test]
    fn gn_ratio_is_scale_invariant() {
        let g = grid();
        let ex = GnExponents::for_eta(1.3);
        let a = ex.interpolation(3).unwrap();
        let tf = TestFunction::Bump {
            center: 0.0,
            width: 0.2,
            height: 1.0,
            background: 0.01,
        };
        let f = tf.on_grid(&g);
        let scaled: Vec<f64> = f.iter().map(|x| 7.5 * x).collect();
        assert_relative_eq!(
            gn_ratio(&g, &f, &ex, a).unwrap(),
            gn_ratio(&g, &scaled, &ex, a).unwrap(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn gn_estimate_is_monotone_in_budget() {
        let g = RadialGrid::new(3, 1.0, 100).unwrap();
        let ex = GnExponents::for_eta(1.4);
        let small = SamplerConfig {
            samples: 100,
            seed: 7,
            ..SamplerConfig::default()
        };
        let large = SamplerConfig {
            samples: 2000,
            ..small.clone()
        };
        let a = estimate_gn_constant(&g, &ex, &small).unwrap().estimate;
        let b = estimate_gn_constant(&g, &ex, &large).unwrap().estimate;
        assert!(a >= 1.0 - 1e-12 || a > 0.0);
        assert!(b >= a);
    }

    #[test]
    fn embed_zero_and_constants() {
        let g = grid();
        let (lhs, rhs) = embed_sides(&g, &vec![0.0; g.cells], 1.2, 1.0, 1.0).unwrap();
        assert_eq!((lhs, rhs), (0.0, 0.0));
        assert_eq!(normalized_slack(lhs, rhs), 0.0);
        // constants: left = V c^{2 eta}, C2 term = C (V c^2)^eta; holds iff C >= V^{1 - eta}
        let vol = g.volume();
        let eta = 1.25;
        let c_gn = vol.powf(1.0 - eta);
        let (lhs, rhs) = embed_sides(&g, &vec![2.0; g.cells], eta, 0.5, c_gn).unwrap();
        assert!(lhs <= rhs);
    }

    #[test]
    fn embed_check_passes_with_inflated_constant() {
        let g = RadialGrid::new(3, 1.0, 120).unwrap();
        let eta = 1.5;
        let cfg = SamplerConfig {
            samples: 300,
            seed: 3,
            ..SamplerConfig::default()
        };
        let c = gn_constant_for_etas(&g, &[eta], 2.0, &cfg).unwrap();
        let rep = check_embed_inequality(&g, eta, 1.0, c, &SamplerConfig { seed: 4, ..cfg }).unwrap();
        assert_eq!(rep.violations, 0, "{rep:?}");
        assert!(rep.worst_margin >= 0.0);
        assert_eq!(rep.samples, 300);
    }

    #[test]
    fn embed_check_flags_tiny_constant() {
        let g = RadialGrid::new(3, 1.0, 120).unwrap();
        let cfg = SamplerConfig {
            samples: 50,
            ..SamplerConfig::default()
        };
        let rep = check_embed_inequality(&g, 1.5, 1.0, 1e-6, &cfg).unwrap();
        assert!(rep.violations > 0);
        assert!(rep.worst_margin < 0.0);
        assert!(rep.witness.is_some());
    }

    #[test]
    fn remark_examples() {
        let rep = check_remark_ordering(3, &[1.2, 1.5]).unwrap();
        assert_eq!(rep.violations, 0);
        assert_eq!(rep.worst_margin, 0.0);
        assert_relative_eq!(k_exponent(1.2, 3).unwrap(), 1.8 / 1.4, epsilon = 1e-14);
        assert_eq!(check_remark_ordering(4, &[1.1]).unwrap().violations, 0);
        assert!(check_remark_ordering(3, &[1.6]).is_err());
        let g = remark_eta_grid(5, 10);
        assert_eq!(*g.last().unwrap(), 1.25);
        assert!(g[0] > 1.0);
    }

    #[test]
    fn bruteforce_small_run() {
        let rep = equivalence_bruteforce(3, 2000, 11).unwrap();
        assert_eq!(rep.violations, 0, "{rep:?}");
        assert_eq!(rep.samples, 2000);
        // the guided half must actually reach the admissible set
        let admissible: usize = rep.notes[0].split(' ').next().unwrap().parse().unwrap();
        assert!(admissible > 50, "{}", rep.notes[0]);
    }

    #[test]
    fn bruteforce_is_deterministic() {
        assert_eq!(
            equivalence_bruteforce(4, 300, 5).unwrap(),
            equivalence_bruteforce(4, 300, 5).unwrap()
        );
    }

    #[test]
    fn known_tuples() {
        let r = |x: i128, d: i128| Ratio::new(x, d);
        let adm = check_condition_c_exact(3, r(3, 1), r(6, 1), r(4, 1), r(2, 1)).unwrap();
        assert!(adm.admissible);
        assert!(etas_in_range_exact(&compute_etas_exact(r(3, 1), r(6, 1), r(4, 1), r(2, 1)).unwrap(), 3));
        let inadm = check_condition_c_exact(3, r(2, 1), r(3, 1), r(5, 2), r(3, 2)).unwrap();
        assert!(!inadm.admissible);
        assert!(!etas_in_range_exact(&compute_etas_exact(r(2, 1), r(3, 1), r(5, 2), r(3, 2)).unwrap(), 3));
    }
}
