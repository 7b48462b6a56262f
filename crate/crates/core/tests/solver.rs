//! Solver behaviour against closed-form solutions, plus the trajectory
//! diagnostics built on top of it.

use approx::assert_relative_eq;
use chemobound::exponents::{corollary2_parameters, EnergyIndices, ModelParams};
use chemobound::odi::{default_epsilon, odi_coefficients};
use chemobound::pde::{run, Profile, SimulationConfig, SolverConfig};
use chemobound::verify::{concurrence_diagnostic, odi_monitor, ConcurrenceThresholds, MonitorConfig};

fn fixed_step(t_end: f64, dt: f64) -> SolverConfig {
    SolverConfig {
        t_end,
        dt_initial: dt,
        dt_max: dt,
        growth: 1.0,
        sample_stride: 1,
        ..SolverConfig::default()
    }
}

fn logistic_params() -> ModelParams {
    ModelParams {
        chi: 0.0,
        xi: 0.0,
        mu1: 1.0,
        mu2: 1.0,
        k_logistic: 1.1,
        ..ModelParams::default()
    }
}

/// Spatially uniform solution of `u' = mu1 u − mu2 u^k` (Bernoulli equation).
fn bernoulli(u0: f64, t: f64, p: &ModelParams) -> f64 {
    let k = p.k_logistic;
    let ratio = p.mu2 / p.mu1;
    let w = ratio + (u0.powf(1.0 - k) - ratio) * ((1.0 - k) * p.mu1 * t).exp();
    w.powf(1.0 / (1.0 - k))
}

fn logistic_error(dt: f64) -> f64 {
    let params = logistic_params();
    let u0 = 2.0;
    let cfg = SimulationConfig {
        params: params.clone(),
        cells: 10,
        profile: Profile::Constant { u: u0, v: 1.0, w: 1.0 },
        p: 2.0,
        q: 4.0,
        solver: fixed_step(1.0, dt),
    };
    let (traj, _) = run(&cfg).unwrap();
    let last = traj.samples.last().unwrap();
    assert_relative_eq!(last.t, 1.0, epsilon = 1e-9);
    let exact = traj.volume * bernoulli(u0, last.t, &params);
    (last.mass - exact).abs() / exact
}

#[test]
fn logistic_mass_follows_bernoulli_law_at_first_order() {
    let coarse = logistic_error(2e-3);
    let fine = logistic_error(1e-3);
    assert!(coarse < 1e-2, "coarse error {coarse}");
    let order = (coarse / fine).log2();
    assert!((order - 1.0).abs() < 0.1, "observed order {order}");
}

#[test]
fn strong_aggregation_keeps_density_nonnegative() {
    let cfg = SimulationConfig {
        params: ModelParams {
            chi: 20.0,
            xi: 0.1,
            ..ModelParams::default()
        },
        cells: 120,
        profile: Profile::GaussianBump {
            amplitude: 3000.0,
            width: 0.1,
            background: 0.0,
            v: 0.0,
            w: 0.0,
        },
        p: 2.0,
        q: 4.0,
        solver: SolverConfig {
            t_end: 2e-3,
            ..SolverConfig::default()
        },
    };
    let (traj, state) = run(&cfg).unwrap();
    assert!(state.is_finite());
    assert!(state.u.iter().chain(&state.v).chain(&state.w).all(|&x| x >= 0.0));
    assert_eq!(traj.report.clip_count, 0);
    // no flux leaves the ball, so only the sources could change the mass
    let m0 = traj.samples[0].mass;
    for s in &traj.samples {
        assert_relative_eq!(s.mass, m0, max_relative = 1e-9);
    }
}

fn corollary2_coefficients(params: &ModelParams) -> chemobound::odi::OdiCoefficients {
    let (p, q, s1, s2) = corollary2_parameters(params.dim).unwrap();
    let idx = EnergyIndices::new(p, q, s1, s2).unwrap();
    let eps = default_epsilon(params, &idx).unwrap();
    odi_coefficients(params, &idx, eps, 2.0).unwrap()
}

#[test]
fn monitor_accepts_constant_steady_state() {
    let params = ModelParams::default();
    let (p, q, ..) = corollary2_parameters(params.dim).unwrap();
    let cfg = SimulationConfig {
        params: params.clone(),
        cells: 40,
        profile: Profile::Constant { u: 1.0, v: 1.0, w: 1.0 },
        p,
        q,
        solver: fixed_step(0.05, 1e-3),
    };
    let (traj, _) = run(&cfg).unwrap();
    let coeffs = corollary2_coefficients(&params);
    let report = odi_monitor(&traj, &coeffs, &MonitorConfig::default());
    assert!(report.samples > 10);
    assert!(report.passed(), "{report:?}");

    let conc = concurrence_diagnostic(&traj, &ConcurrenceThresholds::default());
    assert_eq!(conc.status, "no crossing");
    assert!(!conc.blew_up);
    assert_eq!(conc.lag, None);
}

#[test]
fn monitor_accepts_diffusive_decay() {
    let params = ModelParams {
        chi: 0.5,
        xi: 0.5,
        ..ModelParams::default()
    };
    let (p, q, ..) = corollary2_parameters(params.dim).unwrap();
    let cfg = SimulationConfig {
        params: params.clone(),
        cells: 80,
        profile: Profile::GaussianBump {
            amplitude: 10.0,
            width: 0.2,
            background: 1.0,
            v: 1.0,
            w: 1.0,
        },
        p,
        q,
        solver: SolverConfig {
            t_end: 0.1,
            ..SolverConfig::default()
        },
    };
    let (traj, _) = run(&cfg).unwrap();
    assert!(!traj.report.blew_up);
    let report = odi_monitor(&traj, &corollary2_coefficients(&params), &MonitorConfig::default());
    assert!(report.passed(), "{report:?}");
    assert_eq!(concurrence_diagnostic(&traj, &ConcurrenceThresholds::default()).status, "no crossing");
}
