use mwpolicy::config::ParamsConfig;
use mwpolicy::equilibrium::{
    check_efficiency, close_budget, constrained_profit_derivative, solve_firm, solve_sector,
    solve_sector_at_wage, worker_integral,
};
use mwpolicy::model::{self, Sector};
use mwpolicy::quadrature::gauss_legendre;
use mwpolicy::{ModelParams, Policy, SectorParams, SkillParams, SolverOptions, WelfareOptions};
use proptest::prelude::*;

fn baseline() -> ModelParams {
    ParamsConfig::default().to_model().unwrap()
}

fn no_tax(y0: f64) -> Policy {
    Policy {
        tau_l: 0.0,
        tau_h: 0.0,
        t: 0.0,
        mw_hourly: None,
        y0,
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

/// ψ=1, βn=0.5, βk=0, δ₀=δ₁=0.5, κ₀=κ₁=1 in both sectors.
fn toy() -> ModelParams {
    let sk = SkillParams::new(0.5, 5.0, 0.5, 0.5, 1.0, 1.0).unwrap();
    let sec = SectorParams::new(1.0, 0.5, 0.0, 0.5, 0.03).unwrap();
    ModelParams::new(sk, sk, sec, sec, 1811.16).unwrap()
}

/// Firm profit of the toy at fixed `x = U - y0` with zero taxes.
fn toy_profit(w: f64, v: f64, x: f64) -> f64 {
    let p = x / w;
    let theta = (p / 0.5).powf(1.0 / (1.0 - 0.5));
    let q = 0.5 * theta.powf(-0.5);
    let n = q * v;
    n.sqrt() - w * n - v * v / 2.0
}

/// Coarse-to-fine grid search over `(w, v)`, ending at spacing below 1e-4.
fn grid_argmax(f: impl Fn(f64, f64) -> f64, mut lo: (f64, f64), mut hi: (f64, f64)) -> (f64, f64) {
    let m = 200;
    loop {
        let (dw, dv) = ((hi.0 - lo.0) / m as f64, (hi.1 - lo.1) / m as f64);
        let mut best = (f64::NEG_INFINITY, lo.0, lo.1);
        for i in 0..=m {
            for j in 0..=m {
                let (w, v) = (lo.0 + i as f64 * dw, lo.1 + j as f64 * dv);
                let val = f(w, v);
                if val > best.0 {
                    best = (val, w, v);
                }
            }
        }
        if dw.max(dv) < 1e-4 {
            return (best.1, best.2);
        }
        lo = ((best.1 - 4.0 * dw).max(1e-9), (best.2 - 4.0 * dv).max(1e-9));
        hi = (best.1 + 4.0 * dw, best.2 + 4.0 * dv);
    }
}

#[test]
fn toy_firm_matches_grid_search() {
    let params = toy();
    let x = 0.1;
    let choice = solve_firm(
        &params,
        Sector::Services,
        x,
        &no_tax(0.0),
        &SolverOptions::default(),
    )
    .unwrap();
    let (w, v) = grid_argmax(|w, v| toy_profit(w, v, x), (0.15, 0.05), (2.0, 2.0));
    // Three significant figures.
    assert!(rel(choice.wage, w) < 5e-3, "w {} vs {}", choice.wage, w);
    assert!(
        rel(choice.vacancies, v) < 5e-3,
        "v {} vs {}",
        choice.vacancies,
        v
    );
    assert!(!choice.mw_binding);
}

#[test]
fn firm_respects_a_binding_floor() {
    let params = toy();
    let mut policy = no_tax(0.0);
    let free = solve_firm(
        &params,
        Sector::Services,
        0.1,
        &policy,
        &SolverOptions::default(),
    )
    .unwrap();
    policy.mw_hourly = Some(params.annual_to_hourly(free.wage * 1.2));
    let bound = solve_firm(
        &params,
        Sector::Services,
        0.1,
        &policy,
        &SolverOptions::default(),
    )
    .unwrap();
    assert!(bound.mw_binding);
    assert!(rel(bound.wage, free.wage * 1.2) < 1e-12);
}

/// Nested bisection on `ln x`: the firm problem is solved at each trial
/// value and the tightness it implies is compared with `K v / L_A`.
fn nested_bisection(params: &ModelParams, sector: Sector, policy: &Policy) -> f64 {
    let opts = SolverOptions::default();
    let sk = params.skill(sector.skill());
    let mass = params.sector(sector).mass;
    let resid = |lx: f64| {
        let x = lx.exp();
        let c = solve_firm(params, sector, policy.y0 + x, policy, &opts).unwrap();
        let active = sk.alpha * (x / sk.lambda).min(1.0);
        (mass * c.vacancies / active).ln() - c.theta.ln()
    };
    let (mut lo, mut hi) = (1e-3f64.ln(), sk.lambda.ln());
    assert!(resid(lo) > 0.0 && resid(hi) < 0.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if resid(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    policy.y0 + (0.5 * (lo + hi)).exp()
}

#[test]
fn market_layer_matches_nested_bisection() {
    let params = baseline();
    let policy = Policy::baseline();
    for sector in Sector::ALL {
        let sol = solve_sector(&params, sector, &policy, 12.0, &SolverOptions::default()).unwrap();
        let u = nested_bisection(&params, sector, &Policy { y0: 12.0, ..policy });
        assert!(
            rel(sol.workers.u, u) < 1e-9,
            "{sector:?}: {} vs {u}",
            sol.workers.u
        );
    }
}

#[test]
fn large_entry_cost_limit() {
    let mut params = toy();
    params.low.delta0 = 0.3;
    // A flat matching function keeps p below one while θ grows without bound.
    params.low.delta1 = 0.9;
    let policy = no_tax(0.5);
    let opts = SolverOptions::default();
    let mut last = f64::INFINITY;
    let mut last_theta = 0.0;
    for lambda in [1e2, 1e3, 1e4] {
        params.low.lambda = lambda;
        let sol = solve_sector(&params, Sector::Services, &policy, policy.y0, &opts).unwrap();
        let w = &sol.workers;
        assert!(w.participation_rate < last);
        last = w.participation_rate;
        let se = &sol.sector;
        assert!(se.theta > last_theta && !se.capped);
        last_theta = se.theta;
        // Indifference: U = y0 + p (1-τ) w.
        assert!(rel(w.u, policy.y0 + se.p * (1.0 - policy.tau_l) * se.wage) < 1e-10);
        let oracle = nested_bisection(&params, Sector::Services, &policy);
        assert!(rel(w.u, oracle) < 1e-9);
    }
    assert!(last > 0.0 && last < 0.01, "participation {last}");
}

#[test]
fn closed_form_worker_integral_matches_quadrature() {
    let nodes = gauss_legendre::<f64>(64);
    let quad = |u: f64, x: f64, g: &dyn Fn(f64) -> f64| {
        let h = 0.5 * x;
        h * nodes
            .iter()
            .map(|(t, wt)| wt * g(u - h * (t + 1.0)))
            .sum::<f64>()
    };
    for (u, x) in [(30.0, 10.0), (30.0, 29.0), (100.0, 15.625), (5.0, 0.01)] {
        let closed = worker_integral(u, x, 1.0);
        let q = quad(u, x, &|c: f64| c.ln());
        assert!((closed - q).abs() < 1e-10, "{u} {x}: {closed} vs {q}");
        assert!(rel(closed, u * u.ln() - (u - x) * (u - x).ln() - x) < 1e-14);
        let q2 = quad(u, x, &|c: f64| -1.0 / c);
        assert!(rel(worker_integral(u, x, 2.0), q2) < 1e-10);
    }
}

#[test]
fn foc_residuals_and_markdown_identity() {
    let params = baseline();
    let opts = SolverOptions::default();
    let policies = [
        Policy::baseline(),
        Policy {
            tau_l: -0.5,
            t: 0.35,
            mw_hourly: Some(9.0),
            ..Policy::baseline()
        },
        Policy {
            tau_l: 0.1,
            tau_h: 0.3,
            t: 0.0,
            mw_hourly: Some(12.0),
            ..Policy::baseline()
        },
    ];
    for policy in &policies {
        for sector in Sector::ALL {
            let sol = solve_sector(&params, sector, policy, 12.0, &opts).unwrap();
            let r = sol.residuals(&params, sector, policy, 12.0).unwrap();
            assert!(r.max_abs() <= 1e-8, "{sector:?} {policy:?}: {r:?}");
            let se = &sol.sector;
            if !se.mw_binding {
                let d1 = params.skill(sector.skill()).delta1;
                // φ_n / w = 1 + 1/ε with ε = q̃_w w / q̃ = δ₁/(1-δ₁).
                let eps = d1 / (1.0 - d1);
                assert!(rel(se.phi_n / se.wage, 1.0 + 1.0 / eps) < 1e-10);
            }
        }
    }
}

#[test]
fn baseline_markdowns_match_calibration() {
    let params = baseline();
    let opts = SolverOptions::default();
    let s = solve_sector(&params, Sector::Services, &Policy::baseline(), 12.0, &opts).unwrap();
    let m = solve_sector(
        &params,
        Sector::Manufacturing,
        &Policy::baseline(),
        12.0,
        &opts,
    )
    .unwrap();
    assert!(rel(s.sector.wage / s.sector.phi_n, 0.516) < 0.02);
    assert!(rel(m.sector.wage / m.sector.phi_n, 0.794) < 0.02);
}

#[test]
fn baseline_worker_moments() {
    let params = baseline();
    let opts = SolverOptions::default();
    let policy = Policy::baseline();
    let s = solve_sector(&params, Sector::Services, &policy, policy.y0, &opts).unwrap();
    let m = solve_sector(&params, Sector::Manufacturing, &policy, policy.y0, &opts).unwrap();
    assert!(rel(s.workers.unemployment_rate, 0.046) < 0.02);
    assert!(rel(s.workers.participation_rate, 0.583) < 0.02);
    assert!(rel(s.sector.wage, 13.20) < 0.02);
    assert!(rel(m.workers.unemployment_rate, 0.054) < 0.02);
    assert!(rel(m.workers.participation_rate, 0.675) < 0.02);
    assert!(rel(m.sector.wage, 76.85) < 0.02);
}

#[test]
fn allocations_depend_on_lump_sum_only_through_net_value() {
    let params = baseline();
    let opts = SolverOptions::default();
    let policy = Policy::baseline();
    let a = solve_sector(&params, Sector::Services, &policy, 5.0, &opts).unwrap();
    let b = solve_sector(&params, Sector::Services, &policy, 25.0, &opts).unwrap();
    assert!(rel(a.sector.wage, b.sector.wage) < 1e-12);
    assert!(rel(a.workers.u - 5.0, b.workers.u - 25.0) < 1e-12);
}

#[test]
fn budget_closes() {
    let params = baseline();
    let opts = SolverOptions::default();
    let welfare = WelfareOptions::default();
    for policy in [
        Policy::baseline(),
        Policy {
            tau_l: -0.5,
            t: 0.35,
            mw_hourly: Some(10.0),
            ..Policy::baseline()
        },
        Policy {
            tau_l: 0.3,
            tau_h: 0.3,
            t: 0.45,
            mw_hourly: Some(6.0),
            ..Policy::baseline()
        },
    ] {
        let eq = close_budget(&params, &policy, &opts, &welfare).unwrap();
        let rev = eq.tax_revenue.total();
        assert!(
            eq.budget_residual.abs() <= 1e-6 * rev.abs(),
            "{policy:?}: {}",
            eq.budget_residual
        );
        assert!(eq.social_welfare.is_finite());
    }
}

#[test]
fn accounting_identity_is_linear_in_revenue() {
    let params = baseline();
    let eq = close_budget(
        &params,
        &Policy::baseline(),
        &SolverOptions::default(),
        &WelfareOptions::default(),
    )
    .unwrap();
    let (s, m) = (&eq.services, &eq.manufacturing);
    let pol = &eq.policy;
    // Revenue recomputed from the frozen allocation.
    let items = [
        pol.tau_l * s.wage * s.employment,
        pol.tau_h * m.wage * m.employment,
        pol.t * params.services.mass * s.profit_pre_tax,
        pol.t * params.manufacturing.mass * m.profit_pre_tax,
    ];
    let recipients = 1.0 + params.services.mass + params.manufacturing.mass;
    let implied = |scale: f64| items.iter().map(|r| r * scale).sum::<f64>() / recipients;
    assert!(rel(implied(1.0), eq.y0_solved) < 1e-9);
    assert!(rel(implied(2.0), 2.0 * eq.y0_solved) < 1e-14);
}

#[test]
fn planner_conditions_hold_at_zero_taxes() {
    let params = baseline();
    let opts = SolverOptions::default();
    for sector in Sector::ALL {
        let sol = solve_sector(&params, sector, &no_tax(10.0), 10.0, &opts).unwrap();
        let e = check_efficiency(&params, sector, &sol, 10.0).unwrap();
        assert!(e.residual() <= 1e-6, "{sector:?}: {e:?}");
    }
}

#[test]
fn binding_floor_distorts_vacancies() {
    let params = baseline();
    let opts = SolverOptions::default();
    let free = solve_sector(&params, Sector::Services, &no_tax(10.0), 10.0, &opts).unwrap();
    let wbar = 1.2 * free.sector.wage;
    let bound =
        solve_sector_at_wage(&params, Sector::Services, &no_tax(10.0), 10.0, &opts, wbar).unwrap();
    let e = check_efficiency(&params, Sector::Services, &bound, 10.0).unwrap();
    assert!(e.vacancy > 1e-3, "{e:?}");
}

#[test]
fn toy_planner_conditions_hold_to_machine_precision() {
    let params = toy();
    let opts = SolverOptions::default();
    let sol = solve_sector(&params, Sector::Services, &no_tax(0.5), 0.5, &opts).unwrap();
    let e = check_efficiency(&params, Sector::Services, &sol, 0.5).unwrap();
    assert!(e.residual() <= 1e-12, "{e:?}");
}

fn profit_fd(params: &ModelParams, policy: &Policy, y0: f64, wbar: f64) -> f64 {
    let opts = SolverOptions::default();
    let h = 1e-3;
    let at = |w: f64| {
        solve_sector_at_wage(params, Sector::Services, policy, y0, &opts, w)
            .unwrap()
            .sector
            .profit_pre_tax
    };
    (at(wbar + h) - at(wbar - h)) / (2.0 * h)
}

#[test]
fn constrained_profit_derivative_matches_finite_differences() {
    let params = baseline();
    let opts = SolverOptions::default();
    let policy = Policy::baseline();
    let free = solve_sector(&params, Sector::Services, &policy, 12.0, &opts).unwrap();
    for factor in [1.0, 1.1, 1.3, 1.6] {
        let wbar = factor * free.sector.wage;
        let sol =
            solve_sector_at_wage(&params, Sector::Services, &policy, 12.0, &opts, wbar).unwrap();
        let analytic = constrained_profit_derivative(&params, Sector::Services, &sol).unwrap();
        let fd = profit_fd(&params, &policy, 12.0, wbar);
        assert!(
            rel(analytic, fd) < 1e-4,
            "factor {factor}: {analytic} vs {fd}"
        );
        assert!(analytic < 0.0);
    }
}

#[test]
fn regimes_agree_at_the_market_wage() {
    let params = baseline();
    let opts = SolverOptions::default();
    let policy = Policy::baseline();
    for sector in Sector::ALL {
        let free = solve_sector(&params, sector, &policy, 12.0, &opts).unwrap();
        let bound =
            solve_sector_at_wage(&params, sector, &policy, 12.0, &opts, free.sector.wage).unwrap();
        let (a, b) = (&free.sector, &bound.sector);
        for (x, y) in [
            (a.wage, b.wage),
            (a.vacancies_per_firm, b.vacancies_per_firm),
            (a.capital_per_firm, b.capital_per_firm),
            (a.theta, b.theta),
            (a.profit_pre_tax, b.profit_pre_tax),
            (free.workers.u, bound.workers.u),
        ] {
            assert!(rel(x, y) < 1e-8, "{sector:?}: {x} vs {y}");
        }
    }
}

#[test]
fn profit_derivative_requires_binding_floor() {
    let params = baseline();
    let sol = solve_sector(
        &params,
        Sector::Services,
        &Policy::baseline(),
        12.0,
        &SolverOptions::default(),
    )
    .unwrap();
    assert!(constrained_profit_derivative(&params, Sector::Services, &sol).is_err());
}

#[test]
fn invalid_policies_are_rejected() {
    let params = baseline();
    let opts = SolverOptions::default();
    let bad = Policy {
        tau_l: 1.0,
        ..Policy::baseline()
    };
    assert!(solve_sector(&params, Sector::Services, &bad, 12.0, &opts).is_err());
    assert!(solve_sector(&params, Sector::Services, &Policy::baseline(), -1.0, &opts).is_err());
    let bad_t = Policy {
        t: 1.0,
        ..Policy::baseline()
    };
    assert!(close_budget(&params, &bad_t, &opts, &WelfareOptions::default()).is_err());
}

#[test]
fn generic_scalar_agrees_with_f64_alias() {
    let p: model::ModelParams<f64> = baseline();
    let sol = mwpolicy::equilibrium::solve_sector::<f64>(
        &p,
        Sector::Manufacturing,
        &Policy::baseline(),
        12.0,
        &SolverOptions::default(),
    )
    .unwrap();
    let p32 = model::ModelParams::<f32>::new(
        conv_skill(&p.low),
        conv_skill(&p.high),
        conv_sector(&p.services),
        conv_sector(&p.manufacturing),
        p.hours_annualization as f32,
    )
    .unwrap();
    let pol32 = model::Policy::<f32> {
        tau_l: 0.276,
        tau_h: 0.276,
        t: 0.2,
        mw_hourly: None,
        y0: 12.0,
    };
    let opts32 = mwpolicy::equilibrium::SolverOptions::<f32> {
        foc_tol: 1e-5,
        market_tol: 1e-5,
        budget_rel_tol: 1e-5,
        bind_margin: 1e-5,
        ..Default::default()
    };
    let s32 =
        mwpolicy::equilibrium::solve_sector(&p32, Sector::Manufacturing, &pol32, 12.0, &opts32)
            .unwrap();
    assert!(rel(s32.sector.wage as f64, sol.sector.wage) < 1e-3);
}

fn conv_skill(s: &SkillParams) -> model::SkillParams<f32> {
    model::SkillParams::new(
        s.alpha as f32,
        s.lambda as f32,
        s.delta0 as f32,
        s.delta1 as f32,
        s.kappa0 as f32,
        s.kappa1 as f32,
    )
    .unwrap()
}

fn conv_sector(s: &SectorParams) -> model::SectorParams<f32> {
    model::SectorParams::new(
        s.psi as f32,
        s.beta_n as f32,
        s.beta_k as f32,
        s.mass as f32,
        s.foreign_return as f32,
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn solutions_satisfy_every_condition(
        tau_l in -1.0f64..0.3, tau_h in 0.0f64..0.4, t in 0.0f64..0.5,
        mw in proptest::option::of(4.0f64..14.0), y0 in 0.0f64..30.0,
    ) {
        let params = baseline();
        let policy = Policy { tau_l, tau_h, t, mw_hourly: mw, y0 };
        for sector in Sector::ALL {
            let sol = solve_sector(&params, sector, &policy, y0, &SolverOptions::default()).unwrap();
            let r = sol.residuals(&params, sector, &policy, y0).unwrap();
            prop_assert!(r.max_abs() <= 1e-8, "{:?}", r);
            let se = &sol.sector;
            if !se.capped {
                prop_assert!((se.p - se.theta * se.q).abs() <= 1e-12 * se.p);
            }
            if let Some(wbar) = policy.mw_annual(&params) {
                prop_assert!(se.wage >= wbar * (1.0 - 1e-12));
            }
        }
    }

    #[test]
    fn higher_floor_lowers_services_profit(mw in 8.0f64..14.0, step in 0.1f64..2.0) {
        let params = baseline();
        let opts = SolverOptions::default();
        let at = |m: f64| {
            let policy = Policy { mw_hourly: Some(m), ..Policy::baseline() };
            solve_sector(&params, Sector::Services, &policy, 12.0, &opts).unwrap().sector.profit_pre_tax
        };
        prop_assert!(at(mw + step) < at(mw));
    }
}
