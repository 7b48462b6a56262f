//! Direct search for the largest lower bound over the free parameters
//! `(s1, s2, epsilon)` at fixed `(p, q)`.
//!
//! The admissible `(s1, s2)` set is an open box; epsilon ranges over
//! `(0, epsilon_cap(s1, s2))`. Points are addressed in unit coordinates that
//! map onto the box shrunk by `boundary_margin` on every side, so no candidate
//! ever touches a strict inequality. A coarse grid is evaluated in parallel,
//! then a compass search refines the best point.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{bound_with_indices, epsilon_cap, BoundResult, OdiError, QuadratureConfig, Result};
use crate::exponents::{corollary1_parameters, EnergyIndices, ModelParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerConfig {
    pub grid_s1: usize,
    pub grid_s2: usize,
    /// Fractions of the epsilon cap sampled on the coarse grid.
    pub eps_fractions: Vec<f64>,
    /// Relative inset from every face of the open box.
    pub boundary_margin: f64,
    pub initial_step: f64,
    pub min_step: f64,
    pub max_evaluations: usize,
    pub quadrature: QuadratureConfig,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            grid_s1: 9,
            grid_s2: 9,
            eps_fractions: vec![0.05, 0.25, 0.5, 0.75, 1.0],
            boundary_margin: 1e-6,
            initial_step: 0.125,
            min_step: 1e-4,
            max_evaluations: 2000,
            quadrature: QuadratureConfig::default(),
        }
    }
}

/// Open intervals for `s1` and `s2` implied by the admissibility clauses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FeasibleBox {
    pub s1: (f64, f64),
    pub s2: (f64, f64),
}

pub fn feasible_box(n: u32, p: f64, q: f64) -> Result<FeasibleBox> {
    let nf = n as f64;
    if n < 3 {
        return Err(crate::exponents::ExponentError::Dimension(n).into());
    }
    if !(q > nf && q > 2.0) {
        return Err(OdiError::Infeasible(format!("q = {q} must exceed n = {n}")));
    }
    let widen = 1.0 + 2.0 / nf;
    let s1 = ((1.0 + nf / 2.0).max(q / 2.0), widen * q / 2.0);
    let s2 = (
        (q * (nf + 2.0) / (2.0 * q + 2.0 * nf)).max(p / 2.0),
        (widen * p / 2.0).min(q / 2.0),
    );
    if !(s1.0 < s1.1) {
        return Err(OdiError::Infeasible(format!("s1 interval {s1:?} empty")));
    }
    if !(s2.0 < s2.1) {
        return Err(OdiError::Infeasible(format!("s2 interval {s2:?} empty")));
    }
    Ok(FeasibleBox { s1, s2 })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimizedBound {
    pub s1: f64,
    pub s2: f64,
    pub epsilon: f64,
    pub result: BoundResult,
    pub evaluations: usize,
}

struct Problem<'a> {
    params: &'a ModelParams,
    p: f64,
    q: f64,
    e0: f64,
    c_gn: f64,
    bx: FeasibleBox,
    cfg: &'a OptimizerConfig,
}

impl Problem<'_> {
    fn inset(&self, x: f64) -> f64 {
        let m = self.cfg.boundary_margin;
        m + (1.0 - 2.0 * m) * x.clamp(0.0, 1.0)
    }

    fn point(&self, x: [f64; 3]) -> Result<(EnergyIndices, f64)> {
        let (a1, b1) = self.bx.s1;
        let (a2, b2) = self.bx.s2;
        let s1 = a1 + self.inset(x[0]) * (b1 - a1);
        let s2 = a2 + self.inset(x[1]) * (b2 - a2);
        let indices = EnergyIndices::new(self.p, self.q, s1, s2)?;
        let eps = epsilon_cap(self.params, &indices)? * self.inset(x[2]);
        Ok((indices, eps))
    }

    fn evaluate(&self, x: [f64; 3]) -> Option<Candidate> {
        let (indices, eps) = self.point(x).ok()?;
        let result = bound_with_indices(
            self.params,
            &indices,
            self.e0,
            self.c_gn,
            Some(eps),
            &self.cfg.quadrature,
        )
        .ok()?;
        Some(Candidate {
            x,
            s1: indices.s1,
            s2: indices.s2,
            epsilon: eps,
            result,
        })
    }
}

#[derive(Debug, Clone)]
struct Candidate {
    x: [f64; 3],
    s1: f64,
    s2: f64,
    epsilon: f64,
    result: BoundResult,
}

fn grid_axis(count: usize) -> Vec<f64> {
    match count {
        0 | 1 => vec![0.5],
        k => (0..k).map(|i| i as f64 / (k - 1) as f64).collect(),
    }
}

/// Maximises the truncated lower bound over admissible `(s1, s2, epsilon)`.
///
/// When `q = 2p` the corollary selection is evaluated as a seed, so the result
/// never falls below that bound.
pub fn optimize_bound(
    params: &ModelParams,
    p: f64,
    q: f64,
    e0: f64,
    c_gn: f64,
    cfg: &OptimizerConfig,
) -> Result<OptimizedBound> {
    params.validate()?;
    if !(cfg.boundary_margin > 0.0 && cfg.boundary_margin < 0.5) {
        return Err(OdiError::InvalidInput(format!(
            "boundary margin {} outside (0, 1/2)",
            cfg.boundary_margin
        )));
    }
    let bx = feasible_box(params.dim, p, q)?;
    let problem = Problem {
        params,
        p,
        q,
        e0,
        c_gn,
        bx,
        cfg,
    };

    let mut grid = Vec::new();
    for &x0 in &grid_axis(cfg.grid_s1) {
        for &x1 in &grid_axis(cfg.grid_s2) {
            for &x2 in &cfg.eps_fractions {
                grid.push([x0, x1, x2]);
            }
        }
    }
    let evaluated: Vec<Option<Candidate>> = grid.par_iter().map(|&x| problem.evaluate(x)).collect();
    let mut evaluations = evaluated.len();
    let mut best: Option<Candidate> = None;
    for cand in evaluated.into_iter().flatten() {
        if best
            .as_ref()
            .is_none_or(|b| cand.result.t_lower > b.result.t_lower)
        {
            best = Some(cand);
        }
    }

    // corollary seed, kept with its exact parameters
    if (q - 2.0 * p).abs() <= 1e-12 * q {
        if let Ok((_, s1, s2)) = corollary1_parameters(p, params.dim) {
            if let Ok(indices) = EnergyIndices::new(p, q, s1, s2) {
                if let Ok(result) = bound_with_indices(params, &indices, e0, c_gn, None, &cfg.quadrature) {
                    evaluations += 1;
                    let to_unit = |s: f64, (a, b): (f64, f64)| {
                        let m = cfg.boundary_margin;
                        (((s - a) / (b - a) - m) / (1.0 - 2.0 * m)).clamp(0.0, 1.0)
                    };
                    let cand = Candidate {
                        x: [to_unit(s1, bx.s1), to_unit(s2, bx.s2), 0.5],
                        s1,
                        s2,
                        epsilon: result.epsilon,
                        result,
                    };
                    if best
                        .as_ref()
                        .is_none_or(|b| cand.result.t_lower > b.result.t_lower)
                    {
                        best = Some(cand);
                    }
                }
            }
        }
    }

    let mut best = best.ok_or_else(|| {
        OdiError::Infeasible("no grid point produced a finite bound".into())
    })?;

    let mut step = cfg.initial_step;
    while step >= cfg.min_step && evaluations < cfg.max_evaluations {
        let trials: Vec<[f64; 3]> = (0..3)
            .flat_map(|axis| {
                [-1.0, 1.0].into_iter().map(move |dir| (axis, dir))
            })
            .map(|(axis, dir)| {
                let mut x = best.x;
                x[axis] = (x[axis] + dir * step).clamp(0.0, 1.0);
                x
            })
            .filter(|x| *x != best.x)
            .collect();
        evaluations += trials.len();
        let improved = trials
            .par_iter()
            .filter_map(|&x| problem.evaluate(x))
            .collect::<Vec<_>>()
            .into_iter()
            .filter(|c| c.result.t_lower > best.result.t_lower)
            .max_by(|a, b| a.result.t_lower.total_cmp(&b.result.t_lower));
        match improved {
            Some(c) => best = c,
            None => step /= 2.0,
        }
    }

    Ok(OptimizedBound {
        s1: best.s1,
        s2: best.s2,
        epsilon: best.epsilon,
        result: best.result,
        evaluations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::odi::bound_corollary1;
    use approx::assert_relative_eq;

    #[test]
    fn feasible_box_for_p2_q4() {
        let b = feasible_box(3, 2.0, 4.0).unwrap();
        assert_relative_eq!(b.s1.0, 2.5, epsilon = 1e-15);
        assert_relative_eq!(b.s1.1, 10.0 / 3.0, epsilon = 1e-15);
        assert_relative_eq!(b.s2.0, 10.0 / 7.0, epsilon = 1e-15);
        assert_relative_eq!(b.s2.1, 5.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn empty_boxes_are_infeasible() {
        assert!(matches!(feasible_box(3, 2.0, 3.0), Err(OdiError::Infeasible(_))));
        // q above np/(n-p) = 6 at p = 2
        assert!(matches!(feasible_box(3, 2.0, 7.0), Err(OdiError::Infeasible(_))));
    }

    #[test]
    fn optimum_dominates_corollary_and_stays_interior() {
        let params = ModelParams::default();
        let cfg = OptimizerConfig::default();
        let opt = optimize_bound(&params, 2.0, 4.0, 1.0, 2.0, &cfg).unwrap();
        let cor = bound_corollary1(&params, 2.0, 1.0, 2.0, &cfg.quadrature).unwrap();
        assert!(opt.result.t_lower >= cor.t_lower);
        let b = feasible_box(3, 2.0, 4.0).unwrap();
        assert!(opt.s1 > b.s1.0 && opt.s1 < b.s1.1);
        assert!(opt.s2 > b.s2.0 && opt.s2 < b.s2.1);
        let ix = EnergyIndices::new(2.0, 4.0, opt.s1, opt.s2).unwrap();
        assert!(ix.admissibility(3).unwrap().admissible);
        let cap = epsilon_cap(&params, &ix).unwrap();
        assert!(opt.epsilon > 0.0 && opt.epsilon < cap);
    }
}
