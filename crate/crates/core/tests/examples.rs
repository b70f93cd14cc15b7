use approx::assert_abs_diff_eq;
use imcf_profile::asymptotics::q_ode_residual;
use imcf_profile::continuation::extend_picard_chain;
use imcf_profile::quadrature::cumulative_simpson;
use imcf_profile::verify::*;
use imcf_profile::*;

fn certified(n: u32, lambda: f64, mu: f64, r_max: f64) -> Solution {
    let p = validate(n, lambda, mu).unwrap();
    let cfg = SolverConfig::for_params(&p).with_r_max(r_max);
    solve(&p, &cfg, Mode::Certified).unwrap()
}

fn grid() -> Vec<(u32, f64, f64)> {
    let mut out = Vec::new();
    for n in [2, 3, 4] {
        for lambda in [1.5, 2.0, 5.0] {
            for mu in [-0.25, -1.0, -4.0] {
                out.push((n, lambda, mu));
            }
        }
    }
    out
}

/// Four-point centred derivative of the sampled `values` at index `i`.
fn d4(values: &[f64], i: usize, k: usize, spacing: f64) -> f64 {
    (-values[i + 2 * k] + 8.0 * values[i + k] - 8.0 * values[i - k] + values[i - 2 * k]) / (12.0 * spacing)
}

#[test]
fn solved_profile_carries_origin_data() {
    let p = validate(2, 1.0, -1.0).unwrap();
    let cfg = SolverConfig::for_params(&p).with_r_max(1.0);
    let sol = solve(&p, &cfg, Mode::Exploratory).unwrap();
    let at0 = sol.profile.eval(0.0).unwrap();
    assert_eq!((at0.f, at0.fr), (-1.0, 0.0));
    assert_abs_diff_eq!(at0.frr, 0.5, epsilon = 1e-15);
}

#[test]
fn stored_curvature_matches_equation() {
    let sol = certified(2, 2.0, -1.0, 100.0);
    let p = sol.params;
    for pt in sol.profile.points().iter().skip(1) {
        let d = stored_frr_defect(&p, pt).unwrap();
        assert!(d <= 1e-8 * pt.frr.abs().max(1.0), "r={} defect {d}", pt.r);
    }
}

#[test]
fn origin_slope_ratio() {
    let p = validate(2, 1.0, -1.0).unwrap();
    let (prof, _) = solve_origin(&p, &SolverConfig::for_params(&p)).unwrap();
    let at = prof.eval(1e-3).unwrap();
    assert_abs_diff_eq!(at.fr / 1e-3, 0.5, epsilon = 1e-6);
}

#[test]
fn fixed_point_agrees_with_series() {
    for (n, lambda, mu) in [(2, 1.0, -1.0), (2, 2.0, -1.0), (3, 1.5, -0.25), (4, 5.0, -4.0)] {
        let p = validate(n, lambda, mu).unwrap();
        let cfg = SolverConfig::for_params(&p);
        let (prof, diag) = solve_origin(&p, &cfg).unwrap();
        for k in 1..=20 {
            let r = diag.eps * k as f64 / 20.0;
            let o = match taylor_oracle(&p, r, 30, Precision::DoubleDouble) {
                Ok(o) => o,
                Err(Error::SeriesDivergence { .. }) => break,
                Err(e) => panic!("{e}"),
            };
            let at = prof.eval(r).unwrap();
            let bound = cfg.abs_tol.max(o.truncation_bound);
            let d = (at.f - o.f).abs().max((at.fr - o.fr).abs());
            assert!(d <= bound, "({n},{lambda},{mu}) r={r}: {d:e} > {bound:e}");
        }
    }
}

#[test]
fn fixed_point_satisfies_equation_pointwise() {
    for (n, lambda, mu) in [(2, 1.0, -1.0), (3, 2.0, -0.25), (4, 1.5, -4.0)] {
        let p = validate(n, lambda, mu).unwrap();
        let cfg = SolverConfig::for_params(&p);
        let (prof, _) = solve_origin(&p, &cfg).unwrap();
        let pts = prof.points();
        let spacing = pts[1].r - pts[0].r;
        let k = ((5e-5 / spacing).ceil() as usize).max(1);
        let fr: Vec<f64> = pts.iter().map(|q| q.fr).collect();
        let mut worst = 0.0f64;
        for i in (2 * k..pts.len() - 2 * k).step_by(k) {
            let d = d4(&fr, i, k, k as f64 * spacing);
            let rhs = ode_rhs(&p, pts[i].r, pts[i].f, pts[i].fr).unwrap();
            worst = worst.max((d - rhs).abs());
        }
        assert!(worst <= 10.0 * cfg.abs_tol, "({n},{lambda},{mu}): {worst:e}");
    }
}

#[test]
fn accepted_iterates_respect_ball_and_guard() {
    for (n, lambda, mu) in grid() {
        let p = validate(n, lambda, mu).unwrap();
        let cfg = SolverConfig::for_params(&p);
        let (_, diag) = solve_origin(&p, &cfg).unwrap();
        assert!(diag.converged);
        assert!(diag.observed_ratio <= cfg.picard_contraction_guard);
        assert!(diag.min_denominator >= mu.abs() / 2.0);
    }
}

#[test]
fn integrator_and_interior_windows_agree() {
    let p = validate(2, 2.0, -1.0).unwrap();
    let mut cfg = SolverConfig::for_params(&p).with_r_max(1.0);
    cfg.rel_tol = 1e-10;
    let rk = solve(&p, &cfg, Mode::Certified).unwrap();
    let base = solve(&p, &cfg.with_r_max(cfg.r_switch), Mode::Certified).unwrap().profile;
    let (chain, diags) = extend_picard_chain(&p, &base, 1.0, &cfg).unwrap();
    assert!(diags.iter().all(|d| d.converged && d.observed_ratio <= 1.0 / 3.0));
    let (a, b) = (rk.profile.eval(1.0).unwrap(), chain.eval(1.0).unwrap());
    assert!((a.f - b.f).abs() <= 1e-7, "{} vs {}", a.f, b.f);
}

#[test]
fn certified_grid_keeps_every_invariant() {
    for (n, lambda, mu) in grid() {
        let sol = certified(n, lambda, mu, 100.0);
        assert!(sol.clean(), "({n},{lambda},{mu}): {:?}", sol.events);
        let pts = sol.profile.points();
        assert!(pts.windows(2).all(|w| w[1].r > w[0].r));
        for q in &pts[1..] {
            assert!(q.fr > 0.0 && q.frr > 0.0 && q.w() > 0.0, "({n},{lambda},{mu}) at {q:?}");
        }
        assert!(detect_breakdown(&sol.params, &sol.profile).is_empty());
    }
}

#[test]
fn below_threshold_runs_report_events() {
    let p = validate(2, 0.5, -1.0).unwrap();
    assert!(solve(&p, &SolverConfig::for_params(&p), Mode::Certified).is_err());
    let sol = solve(&p, &SolverConfig::for_params(&p).with_r_max(100.0), Mode::Exploratory).unwrap();
    assert!(!sol.completed);
    assert!(!sol.events.is_empty());
    assert!(sol.profile.r_max() < 100.0);
}

#[test]
fn ratio_limit_for_two_two() {
    let sol = certified(2, 2.0, -1.0, 1e4);
    let rep = estimate_limit(&sol.profile, &sol.params).unwrap();
    assert!((rep.q_limit_estimate - 2.0).abs() <= 1e-2, "{rep:?}");
    assert!((rep.fit_exponent - 2.0).abs() <= 5e-2, "{rep:?}");
    assert!(rep.band_persistent);
    assert!(rep.pass);
}

#[test]
fn ratio_exceeds_one_where_height_is_positive() {
    for (n, lambda, mu) in grid() {
        let sol = certified(n, lambda, mu, 1e3);
        let positive: Vec<_> = sol.profile.points().iter().filter(|q| q.f > 0.0).collect();
        assert!(!positive.is_empty());
        for q in &positive {
            assert!(q.q().unwrap() > 1.0, "({n},{lambda},{mu}) at r={}", q.r);
        }
        let first = positive[0].q().unwrap();
        assert!(first.is_finite() && first > positive.last().unwrap().q().unwrap());
    }
}

/// Adds `shift * r` to the height of a solved profile.
struct Tilted<'a> {
    inner: &'a RadialProfile,
    shift: f64,
}

impl RadialEval for Tilted<'_> {
    fn params(&self) -> &Parameters {
        self.inner.params()
    }
    fn r_max(&self) -> f64 {
        self.inner.r_max()
    }
    fn eval(&self, r: f64) -> Result<ProfilePoint> {
        let mut p = self.inner.eval(r)?;
        p.f += self.shift * r;
        p.fr += self.shift;
        Ok(p)
    }
}

#[test]
fn ratio_equation_residual() {
    let p = validate(2, 2.0, -1.0).unwrap();
    let mut cfg = SolverConfig::for_params(&p).with_r_max(200.0);
    cfg.rel_tol = 1e-10;
    let sol = solve(&p, &cfg, Mode::Certified).unwrap();
    let r = 100.0;
    assert!(q_ode_residual(&sol.profile, r, 1e-3 * r).unwrap().abs() <= 1e-5);

    let coarse = q_ode_residual(&sol.profile, r, 8.0).unwrap().abs();
    let fine = q_ode_residual(&sol.profile, r, 4.0).unwrap().abs();
    assert!(coarse / fine > 3.0, "{coarse:e} {fine:e}");

    let bent = Tilted { inner: &sol.profile, shift: 1e-3 };
    let mut last = f64::INFINITY;
    for h in [1.0, 0.5, 0.25, 0.125] {
        let res = q_ode_residual(&bent, r, h).unwrap().abs();
        assert!(res > 1e-8, "h={h}: {res:e}");
        last = last.min(res);
    }
    assert!(last > 100.0 * q_ode_residual(&sol.profile, r, 0.125).unwrap().abs());
}

fn with_grid(per_decade: u32) -> RadialProfile {
    let p = validate(2, 2.0, -1.0).unwrap();
    let mut cfg = SolverConfig::for_params(&p).with_r_max(100.0);
    cfg.rel_tol = 1e-10;
    cfg.output_grid = OutputGrid::Log { per_decade };
    solve(&p, &cfg, Mode::Certified).unwrap().profile
}

#[test]
fn scan_defect_is_second_order_in_spacing() {
    let coarse = ode_residual_scan(&with_grid(100)).unwrap().max_scaled;
    let fine = ode_residual_scan(&with_grid(200)).unwrap().max_scaled;
    let ratio = coarse / fine;
    assert!(ratio > 3.0 && ratio < 5.0, "{coarse:e} {fine:e}");
}

#[test]
fn scan_flags_a_perturbed_node() {
    let prof = with_grid(100);
    let before = ode_residual_scan(&prof).unwrap();
    let mut pts = prof.points().to_vec();
    let i = pts.partition_point(|q| q.r < 1.0);
    pts[i].f += 1e-6;
    let h = pts[i + 1].r - pts[i].r;
    let bumped = RadialProfile::with_segments(*prof.params(), pts.clone(), prof.segments().to_vec()).unwrap();
    let after = ode_residual_scan(&bumped).unwrap();
    assert!(after.max_abs >= 1e-6 / (h * h), "{after:?} h={h}");
    assert!(after.max_abs > 100.0 * before.max_abs);
    assert_abs_diff_eq!(after.at_r, pts[i].r, epsilon = 2.0 * h);
}

#[test]
fn identity_vanishes_at_the_first_node() {
    let sol = certified(2, 2.0, -1.0, 1.0);
    let r1 = sol.profile.points()[1].r;
    assert!(integral_identity_defect(&sol.profile, r1).unwrap() <= 1e-14);
}

#[test]
fn identity_at_half_for_threshold_case() {
    let p = validate(2, 1.0, -1.0).unwrap();
    let sol = solve(&p, &SolverConfig::for_params(&p).with_r_max(2.0), Mode::Exploratory).unwrap();
    assert!(integral_identity_defect(&sol.profile, 0.5).unwrap() <= 1e-8);
    assert!(integrating_factor_defect(&sol.profile, 1.0).unwrap() <= 1e-7);
}

#[test]
fn identity_with_wrong_coefficient_grows_quartically() {
    let sol = certified(2, 2.0, -1.0, 1.0);
    let prof = &sol.profile;
    // moving (n-1) to n adds int_0^r fr^3 to the defect
    let wrong = |r: f64| {
        let (lhs, rhs) = integral_identity_sides(prof, r).unwrap();
        let pts: Vec<_> = prof.points().iter().filter(|q| q.r < r).copied().chain([prof.eval(r).unwrap()]).collect();
        let x: Vec<f64> = pts.iter().map(|q| q.r).collect();
        let y: Vec<f64> = pts.iter().map(|q| q.fr.powi(3)).collect();
        (lhs - (rhs - cumulative_simpson(&x, &y).last().unwrap())).abs()
    };
    let (a, b) = (wrong(0.02), wrong(0.04));
    let slope = (b / a).log2();
    assert!((slope - 4.0).abs() < 0.1, "slope {slope}");
    assert!(a > 1e3 * integral_identity_defect(prof, 0.02).unwrap());
}

#[test]
fn factor_with_flat_slope_is_a_power() {
    let p = validate(3, 2.0, -1.0).unwrap();
    let pts = (0..=100)
        .map(|i| ProfilePoint {
            r: i as f64 * 0.01,
            f: -1.0,
            fr: 0.0,
            frr: 0.0,
        })
        .collect();
    let prof = RadialProfile::new(p, pts, Provenance::Picard).unwrap();
    for r in [0.1, 0.5, 0.73, 1.0] {
        assert_eq!(integrating_factor(&prof, r).unwrap(), r * r);
    }
}

#[test]
fn rebuilt_slope_is_positive() {
    for (n, lambda, mu) in grid() {
        let sol = certified(n, lambda, mu, 10.0);
        for r in default_probe_radii(&sol.profile) {
            assert!(integrating_factor_representation(&sol.profile, r).unwrap() > 0.0);
        }
    }
}

#[test]
fn spacetime_residual_and_sign() {
    let sol = certified(2, 2.0, -1.0, 10.0);
    let ss = SelfSimilarSolution::new(sol.profile);
    for rho in [0.01, 0.1, 0.5, 1.0, 3.0, 9.0] {
        let terms = ss.terms(rho, 0.0).unwrap();
        assert!(terms.residual.abs() <= 1e-7);
        assert!(terms.u_t < 0.0);
        assert!(ss.terms(rho, 1.5).unwrap().u_t < 0.0);
    }
}

#[test]
fn oracle_value_near_origin() {
    let p = validate(2, 1.0, -1.0).unwrap();
    let o = taylor_oracle(&p, 0.05, 24, Precision::DoubleDouble).unwrap();
    let r: f64 = 0.05;
    let four_terms = -1.0 + 0.25 * r * r + r.powi(4) / 128.0;
    assert!((o.f - four_terms).abs() < 1e-9);
    assert_abs_diff_eq!(o.f, -0.999374951, epsilon = 1e-9);
    let (prof, _) = solve_origin(&p, &SolverConfig::for_params(&p)).unwrap();
    let at = prof.eval(0.05).unwrap();
    assert!((at.f - o.f).abs() <= 1e-10 && (at.fr - o.fr).abs() <= 1e-10);
}

#[test]
fn oracle_is_self_consistent_in_order() {
    for (n, lambda, mu) in grid() {
        let p = validate(n, lambda, mu).unwrap();
        let r = 0.05 * mu.abs().min(1.0);
        for order in [8, 12, 16, 20] {
            let a = taylor_oracle(&p, r, order, Precision::DoubleDouble).unwrap();
            let b = taylor_oracle(&p, r, order + 2, Precision::DoubleDouble).unwrap();
            let change = (a.f - b.f).abs().max((a.fr - b.fr).abs());
            assert!(change <= a.truncation_bound.max(1e-16), "({n},{lambda},{mu}) order {order}: {change:e} vs {:e}", a.truncation_bound);
        }
    }
}

#[test]
fn report_passes_across_the_grid() {
    for (n, lambda, mu) in grid() {
        let sol = certified(n, lambda, mu, 100.0);
        let probes = default_probe_radii(&sol.profile);
        let rep = verify_profile(&sol.profile, &probes, VerifyTolerances::default()).unwrap();
        assert!(rep.passed(), "({n},{lambda},{mu}): {rep:?}");
        assert!(!rep.integrating_factor_probes.is_empty());
    }
}

#[test]
fn defects_do_not_grow_when_tolerances_tighten() {
    let p = validate(2, 2.0, -1.0).unwrap();
    let tol = VerifyTolerances::default();
    let report = |factor: f64| {
        let cfg = SolverConfig::for_params(&p).with_r_max(100.0).scaled_tolerances(factor);
        let sol = solve(&p, &cfg, Mode::Certified).unwrap();
        verify_profile(&sol.profile, &default_probe_radii(&sol.profile), tol).unwrap()
    };
    let (loose, tight) = (report(1.0), report(0.1));
    let pairs = [
        (loose.ode_residual_max, tight.ode_residual_max, tol.ode_residual),
        (loose.integral_identity_defect_max, tight.integral_identity_defect_max, tol.integral_identity),
        (loose.integrating_factor_defect_max, tight.integrating_factor_defect_max, tol.integrating_factor),
        (loose.pde_residual_max, tight.pde_residual_max, tol.pde_residual),
        (loose.oracle_mismatch_at_probe, tight.oracle_mismatch_at_probe, tol.oracle),
    ];
    for (a, b, limit) in pairs {
        assert!(b <= 1.5 * a + 1e-3 * limit, "{a:e} -> {b:e}");
    }
}
