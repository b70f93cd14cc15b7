use std::sync::OnceLock;

use imcf_profile::continuation::ExtensionWindow;
use imcf_profile::verify::pde_residual;
use imcf_profile::*;
use proptest::prelude::*;

fn two_two() -> &'static RadialProfile {
    static PROFILE: OnceLock<RadialProfile> = OnceLock::new();
    PROFILE.get_or_init(|| {
        let p = validate(2, 2.0, -1.0).unwrap();
        solve(&p, &SolverConfig::for_params(&p).with_r_max(50.0), Mode::Certified)
            .unwrap()
            .profile
    })
}

/// `c r^a` with exact derivatives.
struct Power {
    params: Parameters,
    c: f64,
    a: f64,
}

impl RadialEval for Power {
    fn params(&self) -> &Parameters {
        &self.params
    }
    fn r_max(&self) -> f64 {
        f64::INFINITY
    }
    fn eval(&self, r: f64) -> Result<ProfilePoint> {
        let (c, a) = (self.c, self.a);
        Ok(ProfilePoint {
            r,
            f: c * r.powf(a),
            fr: c * a * r.powf(a - 1.0),
            frr: c * a * (a - 1.0) * r.powf(a - 2.0),
        })
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn spacetime_residual_is_conjugate_to_profile(xi in 1e-3f64..50.0, t in -2.0f64..1.0) {
        let ss = SelfSimilarSolution::new(two_two().clone());
        let grow = (ss.lambda * t).exp();
        let at_t = pde_residual(&ss, xi * grow, t).unwrap();
        let at_0 = pde_residual(&ss, xi, 0.0).unwrap();
        let scale = ss.terms(xi, 0.0).unwrap().u_t.abs() * grow;
        prop_assert!((at_t - grow * at_0).abs() <= 1e-12 * scale);
    }

    #[test]
    fn equation_is_scale_covariant(
        n in 2u32..7,
        lambda in 0.1f64..10.0,
        mu in -10.0f64..-0.01,
        k in 0.05f64..20.0,
        r in 0.01f64..10.0,
        fr in 0.0f64..50.0,
    ) {
        let p = validate(n, lambda, mu).unwrap();
        let f = r * fr - 0.5 - r;
        let base = ode_rhs(&p, r, f, fr).unwrap();
        let scaled = ode_rhs(&p.with_mu(k * mu).unwrap(), k * r, k * f, fr).unwrap();
        prop_assert!((scaled - base / k).abs() <= 1e-12 * (base / k).abs().max(1e-300) + 1e-300);
    }

    #[test]
    fn ratio_of_a_power_is_its_exponent(c in 0.01f64..100.0, a in 1.01f64..8.0, r in 1e-2f64..1e4) {
        let prof = Power { params: validate(2, 2.0, -1.0).unwrap(), c, a };
        prop_assert!((q_of(&prof, r).unwrap() - a).abs() <= 1e-12 * a);
    }

    #[test]
    fn profile_eval_is_exact_at_nodes(i in 0usize..1000) {
        let prof = two_two();
        let pts = prof.points();
        let node = pts[i * (pts.len() - 1) / 999];
        prop_assert_eq!(prof.eval(node.r).unwrap(), node);
    }

    #[test]
    fn interpolated_values_keep_the_structure(r in 1e-4f64..50.0) {
        let at = two_two().eval(r).unwrap();
        prop_assert!(at.fr > 0.0 && at.frr > 0.0 && at.w() > 0.0);
    }

    #[test]
    fn alpha0_orders_by_lambda_and_dimension(n in 2u32..9, lambda in 0.01f64..20.0, bump in 1e-3f64..1.0) {
        let p = validate(n, lambda, -1.0).unwrap();
        prop_assume!(p.global_regime());
        let a = alpha0(&p).unwrap();
        prop_assert!(a > 1.0);
        prop_assert!(alpha0(&validate(n, lambda + bump, -1.0).unwrap()).unwrap() < a);
        prop_assert!(alpha0(&validate(n + 1, lambda, -1.0).unwrap()).unwrap() < a);
    }

    #[test]
    fn interior_window_widths_obey_the_rule(r1 in 0.01f64..100.0, b0 in 1e-3f64..1e3, gap in 1e-3f64..10.0) {
        let a0 = r1 * b0 - gap;
        let win = ExtensionWindow::new(r1, a0, b0).unwrap();
        let m = a0.abs().max(b0);
        prop_assert!(win.delta > 0.0 && win.delta <= 1.0 / 3.0);
        prop_assert!(win.delta <= win.a1 / (4.0 * (m + r1 + 1.0)) * (1.0 + 1e-15));
        prop_assert!(win.a1 > 0.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn origin_solve_is_certified(n in 2u32..6, lambda in 0.6f64..6.0, mu in -5.0f64..-0.1) {
        let p = validate(n, lambda, mu).unwrap();
        let cfg = SolverConfig::for_params(&p);
        let (prof, diag) = solve_origin(&p, &cfg).unwrap();
        prop_assert!(diag.converged);
        prop_assert!(diag.observed_ratio <= cfg.picard_contraction_guard);
        prop_assert!(diag.min_denominator >= mu.abs() / 2.0);
        let at = prof.eval(prof.r_max()).unwrap();
        prop_assert!(at.fr > 0.0 && at.w() > 0.0);
    }
}
