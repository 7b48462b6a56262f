//! Randomised invariants of the exponent algebra and the lower bound.

use chemobound::exponents::{
    check_condition_c, check_condition_c_exact, compute_etas, compute_etas_exact, corollary1_parameters,
    h_exponent, k_exponent, to_f64, EnergyIndices, ModelParams,
};
use chemobound::odi::quadrature::QuadratureConfig;
use chemobound::odi::{bound_corollary1, bound_with_indices};
use num_rational::Ratio;
use proptest::prelude::*;

fn rational(num: i64, den: i64) -> Ratio<i128> {
    Ratio::new(num as i128, den as i128)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn float_and_exact_etas_agree(
        p in 1i64..60, q in 5i64..60, s1 in 5i64..60, s2 in 5i64..60, den in 1i64..7,
    ) {
        let (pr, qr, s1r, s2r) = (rational(p, den), rational(q, den), rational(s1, den), rational(s2, den));
        let Ok(exact) = compute_etas_exact(pr, qr, s1r, s2r) else { return Ok(()) };
        let float = compute_etas(to_f64(pr), to_f64(qr), to_f64(s1r), to_f64(s2r)).unwrap();
        for (a, b) in float.iter().zip(exact) {
            prop_assert!((a - to_f64(b)).abs() <= 1e-12 * a.abs().max(1.0));
        }
    }

    #[test]
    fn float_and_exact_admissibility_agree_off_the_boundary(
        n in 3u32..6, p in 1i64..48, q in 5i64..48, s1 in 5i64..48, s2 in 2i64..48,
    ) {
        let den = 4;
        let (pr, qr, s1r, s2r) = (rational(p, den), rational(q, den), rational(s1, den), rational(s2, den));
        let exact = check_condition_c_exact(n, pr, qr, s1r, s2r).unwrap();
        let float = check_condition_c(n, to_f64(pr), to_f64(qr), to_f64(s1r), to_f64(s2r)).unwrap();
        if float.margin.abs() > 1e-9 {
            prop_assert_eq!(exact.admissible, float.admissible);
        }
    }

    #[test]
    fn admissible_indices_have_etas_in_range(n in 3u32..6, p in 0.5f64..8.0, q in 2.0f64..16.0, s1 in 1.0f64..12.0, s2 in 0.5f64..10.0) {
        let report = check_condition_c(n, p, q, s1, s2).unwrap();
        if report.admissible {
            let hi = 1.0 + 2.0 / n as f64;
            for eta in report.etas.into_iter().flatten() {
                prop_assert!(eta > 1.0 && eta < hi, "eta {eta} outside (1, {hi})");
            }
        }
    }

    #[test]
    fn embedding_exponents_exceed_one(n in 3u32..7, frac in 0.001f64..0.999) {
        let eta = 1.0 + frac * 2.0 / n as f64;
        let k = k_exponent(eta, n).unwrap();
        prop_assert!(k > 1.0);
        prop_assert!(h_exponent(eta, n).unwrap() > 0.0);
    }

    #[test]
    fn larger_initial_energy_gives_shorter_bound(p in 2.0f64..6.0, e0 in 0.1f64..50.0, factor in 1.5f64..20.0) {
        let params = ModelParams { chi: 3.0, xi: 0.5, ..ModelParams::default() };
        let cfg = QuadratureConfig::default();
        let lo = bound_corollary1(&params, p, e0, 1.0, &cfg).unwrap().t_lower;
        let hi = bound_corollary1(&params, p, e0 * factor, 1.0, &cfg).unwrap().t_lower;
        prop_assert!(lo > 0.0 && hi > 0.0);
        prop_assert!(hi < lo, "t_lower({}) = {hi} not below t_lower({e0}) = {lo}", e0 * factor);
    }

    #[test]
    fn larger_gn_constant_gives_shorter_bound(p in 2.0f64..6.0, c in 0.5f64..5.0) {
        let params = ModelParams { chi: 2.0, xi: 1.0, ..ModelParams::default() };
        let (q, s1, s2) = corollary1_parameters(p, 3).unwrap();
        let idx = EnergyIndices::new(p, q, s1, s2).unwrap();
        let cfg = QuadratureConfig::default();
        let a = bound_with_indices(&params, &idx, 1.0, c, None, &cfg).unwrap().t_lower;
        let b = bound_with_indices(&params, &idx, 1.0, 2.0 * c, None, &cfg).unwrap().t_lower;
        prop_assert!(b < a);
    }
}
