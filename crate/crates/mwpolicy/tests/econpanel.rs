use std::collections::BTreeMap;

use mwpolicy::econpanel::fit::{cluster_groups, demean, design_columns, fe_groups};
use mwpolicy::econpanel::{
    build_stack, detect_events, fit_fe, implied_elasticity, synth_panel, Design, DetectionRules,
    FitSpec, MwPanel, MwRow, OutcomeRow, StackedPanel, Status, SynthConfig, WeightMode,
};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn row(state: &str, year: i32, state_mw: f64, fed_mw: f64, share: f64) -> MwRow {
    MwRow {
        state: state.into(),
        year,
        state_mw,
        fed_mw,
        affected_share: share,
        weight: 1.0,
        region: None,
        division: None,
    }
}

fn unit_deflator(years: std::ops::RangeInclusive<i32>) -> BTreeMap<i32, f64> {
    years.map(|y| (y, 1.0)).collect()
}

/// State path: `base` until each `(year, level, share)` step.
fn path(
    state: &str,
    years: std::ops::RangeInclusive<i32>,
    steps: &[(i32, f64, f64)],
) -> Vec<MwRow> {
    years
        .map(|y| {
            let (mw, share) = steps
                .iter()
                .rfind(|s| s.0 <= y)
                .map(|s| (s.1, if s.0 == y { s.2 } else { 0.01 }))
                .unwrap_or((7.25, 0.01));
            row(state, y, mw, 7.25, share)
        })
        .collect()
}

fn outcomes_for(panel: &MwPanel, f: impl Fn(&str, i32) -> f64) -> Vec<OutcomeRow> {
    panel
        .rows
        .iter()
        .map(|r| OutcomeRow {
            state: r.state.clone(),
            year: r.year,
            outcome: f(&r.state, r.year),
            weight: 1.0,
            industry: None,
        })
        .collect()
}

fn small_synth(noise: f64, seed: u64) -> SynthConfig {
    SynthConfig {
        n_states: 9,
        first_year: 2000,
        last_year: 2012,
        cohorts: vec![2005],
        treated_per_cohort: 2,
        noise_sd: noise,
        small_increases: 3,
        seed,
        ..SynthConfig::default()
    }
}

fn stack_of(cfg: &SynthConfig) -> StackedPanel {
    let s = synth_panel(cfg).unwrap();
    let rules = DetectionRules::default();
    let d = detect_events(&s.panel, &rules).unwrap();
    build_stack(&s.outcomes, &s.panel, &d, rules.window, WeightMode::Row).unwrap()
}

/// Explicit dummy columns for every fixed-effect group, then weighted least
/// squares by SVD (minimum norm on the collinear dummy block).
struct DummyFit {
    slopes: Vec<f64>,
    fitted: Vec<f64>,
    resid: Vec<f64>,
    partialled: DMatrix<f64>,
}

fn dummy_fit(
    stack: &StackedPanel,
    spec: &FitSpec,
    names: &[String],
    cols: &[Vec<f64>],
) -> DummyFit {
    let n = stack.rows.len();
    let fes = fe_groups(stack, spec);
    let n_dummies: usize = fes.iter().map(|g| g.n).sum();
    assert!(n_dummies <= 200, "{n_dummies} dummy columns");
    let sw: Vec<f64> = stack.rows.iter().map(|r| r.weight.sqrt()).collect();
    let dummies = DMatrix::from_fn(n, n_dummies, |i, j| {
        let mut off = 0;
        for g in &fes {
            if j < off + g.n {
                return if g.ids[i] == j - off { sw[i] } else { 0.0 };
            }
            off += g.n;
        }
        unreachable!()
    });
    let k = names.len();
    let slopes = DMatrix::from_fn(n, k, |i, j| cols[j][i] * sw[i]);
    let mut full = DMatrix::zeros(n, k + n_dummies);
    full.view_mut((0, 0), (n, k)).copy_from(&slopes);
    full.view_mut((0, k), (n, n_dummies)).copy_from(&dummies);
    let y = DVector::from_iterator(n, stack.rows.iter().zip(&sw).map(|(r, s)| r.outcome * s));
    let beta = full.clone().svd(true, true).solve(&y, 1e-11).unwrap();
    let fitted_w = &full * &beta;
    let fitted: Vec<f64> = (0..n).map(|i| fitted_w[i] / sw[i]).collect();
    let resid: Vec<f64> = (0..n).map(|i| stack.rows[i].outcome - fitted[i]).collect();
    // Residualize every slope column on the dummies (unweighted scale).
    let dsvd = dummies.clone().svd(true, true);
    let mut partialled = DMatrix::zeros(n, k);
    for j in 0..k {
        let c = slopes.column(j).into_owned();
        let g = dsvd.solve(&c, 1e-11).unwrap();
        let r = c - &dummies * g;
        for i in 0..n {
            partialled[(i, j)] = r[i] / sw[i];
        }
    }
    DummyFit {
        slopes: beta.rows(0, k).iter().copied().collect(),
        fitted,
        resid,
        partialled,
    }
}

fn rel_diff(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-12)
}

#[test]
fn absorbed_estimates_equal_full_dummy_least_squares() {
    for (design, noise) in [
        (Design::EventStudy, 0.02),
        (Design::Did, 0.02),
        (Design::EventStudy, 0.0),
    ] {
        let stack = stack_of(&small_synth(noise, 4));
        let spec = FitSpec {
            design,
            ..FitSpec::default()
        };
        let rep = fit_fe(&stack, &spec).unwrap();
        let (names, cols) = design_columns(&stack, &spec);
        let kept: Vec<usize> = (0..names.len())
            .filter(|j| !rep.dropped.contains(&names[*j]))
            .collect();
        let names: Vec<String> = kept.iter().map(|&j| names[j].clone()).collect();
        let cols: Vec<Vec<f64>> = kept.iter().map(|&j| cols[j].clone()).collect();
        let oracle = dummy_fit(&stack, &spec, &names, &cols);
        for (name, b) in names.iter().zip(&oracle.slopes) {
            let got = rep.coef(name).unwrap().beta;
            assert!((got - b).abs() <= 1e-8, "{design:?} {name}: {got} vs {b}");
        }
    }
}

#[test]
fn cluster_robust_errors_match_a_naive_sandwich() {
    let stack = stack_of(&small_synth(0.03, 9));
    let spec = FitSpec {
        design: Design::EventStudy,
        ..FitSpec::default()
    };
    let rep = fit_fe(&stack, &spec).unwrap();
    let (names, cols) = design_columns(&stack, &spec);
    let kept: Vec<usize> = (0..names.len())
        .filter(|j| !rep.dropped.contains(&names[*j]))
        .collect();
    let names: Vec<String> = kept.iter().map(|&j| names[j].clone()).collect();
    let cols: Vec<Vec<f64>> = kept.iter().map(|&j| cols[j].clone()).collect();
    let o = dummy_fit(&stack, &spec, &names, &cols);
    let (n, k) = (stack.rows.len(), names.len());
    let w: Vec<f64> = stack.rows.iter().map(|r| r.weight).collect();
    let x = &o.partialled;

    let mut bread = DMatrix::<f64>::zeros(k, k);
    for i in 0..n {
        for a in 0..k {
            for b in 0..k {
                bread[(a, b)] += w[i] * x[(i, a)] * x[(i, b)];
            }
        }
    }
    let clusters = cluster_groups(&stack, spec.cluster);
    let mut meat = DMatrix::<f64>::zeros(k, k);
    for g in 0..clusters.n {
        let mut s = DVector::<f64>::zeros(k);
        for i in (0..n).filter(|i| clusters.ids[*i] == g) {
            for a in 0..k {
                s[a] += x[(i, a)] * w[i] * o.resid[i];
            }
        }
        meat += &s * s.transpose();
    }
    let binv = bread.try_inverse().unwrap();
    let gf = clusters.n as f64;
    let factor = gf / (gf - 1.0) * (n as f64 - 1.0) / (n as f64 - k as f64);
    let v = &binv * meat * &binv * factor;
    for (j, name) in names.iter().enumerate() {
        let se = rep.coef(name).unwrap().se;
        assert!(
            rel_diff(se, v[(j, j)].sqrt()) <= 1e-8,
            "{name}: {se} vs {}",
            v[(j, j)].sqrt()
        );
    }
}

#[test]
fn omitted_reference_year_does_not_change_fitted_values() {
    let stack = stack_of(&small_synth(0.02, 2));
    let spec = FitSpec {
        control_flags: false,
        ..FitSpec::default()
    };
    let (mut names, mut cols) = design_columns(&stack, &spec);
    let without = dummy_fit(&stack, &spec, &names, &cols);
    names.push("rel_-1".into());
    cols.push(
        stack
            .rows
            .iter()
            .map(|r| if r.treated && r.rel == -1 { 1.0 } else { 0.0 })
            .collect(),
    );
    let with = dummy_fit(&stack, &spec, &names, &cols);
    for (a, b) in without.fitted.iter().zip(&with.fitted) {
        assert!((a - b).abs() <= 1e-8);
    }
}

#[test]
fn planted_step_is_recovered_exactly_without_noise() {
    let cfg = SynthConfig {
        noise_sd: 0.0,
        small_increases: 6,
        ..SynthConfig::default()
    };
    let stack = stack_of(&cfg);
    let did = fit_fe(
        &stack,
        &FitSpec {
            design: Design::Did,
            ..FitSpec::default()
        },
    )
    .unwrap();
    assert!((did.coef("post").unwrap().beta - 0.05).abs() <= 1e-8);
    let es = fit_fe(&stack, &FitSpec::default()).unwrap();
    for c in es.event_study() {
        let want = if c.rel.unwrap() >= 0 { 0.05 } else { 0.0 };
        assert!((c.beta - want).abs() <= 1e-8, "{}: {}", c.name, c.beta);
    }
    assert_eq!(es.coef("rel_-1").unwrap().beta, 0.0);
    assert_eq!(es.coef("rel_-1").unwrap().se, 0.0);
    assert_eq!(es.n_events, 20);
}

#[test]
fn zero_effect_and_zero_noise_give_zero_coefficients() {
    let cfg = SynthConfig {
        noise_sd: 0.0,
        effect: vec![0.0; 8],
        ..SynthConfig::default()
    };
    let es = fit_fe(&stack_of(&cfg), &FitSpec::default()).unwrap();
    assert!(es.coefficients.iter().all(|c| c.beta.abs() <= 1e-10));
}

#[test]
fn industry_variant_recovers_the_planted_step() {
    let cfg = SynthConfig {
        noise_sd: 0.0,
        industries: vec!["retail".into(), "food".into()],
        ..SynthConfig::default()
    };
    let s = synth_panel(&cfg).unwrap();
    let rules = DetectionRules::default();
    let d = detect_events(&s.panel, &rules).unwrap();
    let stack = build_stack(
        &s.outcomes,
        &s.panel,
        &d,
        rules.window,
        WeightMode::PrePeriodMean,
    )
    .unwrap();
    let rep = fit_fe(&stack, &FitSpec::industry(Design::Did)).unwrap();
    assert!((rep.coef("post").unwrap().beta - 0.05).abs() <= 1e-8);
    assert_eq!(rep.n_clusters, 2 * 50);
}

#[test]
fn demeaning_leaves_no_group_mean() {
    let stack = stack_of(&small_synth(0.05, 3));
    let spec = FitSpec::default();
    let fes = fe_groups(&stack, &spec);
    let w: Vec<f64> = stack.rows.iter().map(|r| r.weight * 1.7).collect();
    let (_, cols) = design_columns(&stack, &spec);
    let mut all = cols;
    all.push(stack.rows.iter().map(|r| r.outcome).collect());
    for mut c in all {
        demean(&mut c, &w, &fes, 1e-12, 10_000).unwrap();
        for g in &fes {
            let (mut m, mut ws) = (vec![0.0; g.n], vec![0.0; g.n]);
            for (i, &id) in g.ids.iter().enumerate() {
                m[id] += w[i] * c[i];
                ws[id] += w[i];
            }
            assert!(m.iter().zip(&ws).all(|(m, w)| (m / w).abs() <= 1e-10));
        }
    }
}

#[test]
fn single_cluster_is_rejected() {
    let stack = stack_of(&small_synth(0.02, 1));
    let mut one = stack.clone();
    for r in &mut one.rows {
        r.state = "X".into();
    }
    let spec = FitSpec {
        fe: vec![],
        ..FitSpec::default()
    };
    assert!(fit_fe(&one, &spec).is_err());
}

#[test]
fn published_elasticity_arithmetic() {
    let e = implied_elasticity(0.017, 0.131).unwrap();
    assert_eq!(e, 0.017 / 0.131);
    assert!((e - 0.12977).abs() < 1e-5);
    assert!(implied_elasticity(0.017, -0.1).is_err());
}

#[test]
fn synthetic_panels_are_reproducible() {
    let cfg = SynthConfig {
        small_increases: 4,
        ..SynthConfig::default()
    };
    let a = synth_panel(&cfg).unwrap();
    let b = synth_panel(&cfg).unwrap();
    assert_eq!(a, b);
    let c = synth_panel(&SynthConfig { seed: 2, ..cfg }).unwrap();
    assert_ne!(a.outcomes, c.outcomes);
    let d = detect_events(&a.panel, &DetectionRules::default()).unwrap();
    let found: Vec<(String, i32)> = d.events.iter().map(|e| (e.state.clone(), e.year)).collect();
    assert_eq!(found, a.events);
}

#[test]
fn confidence_intervals_cover_near_nominal_rate() {
    let reps = 500;
    let mut hits = 0;
    for seed in 0..reps {
        let cfg = SynthConfig {
            seed: 1000 + seed,
            ..SynthConfig::default()
        };
        let rep = fit_fe(
            &stack_of(&cfg),
            &FitSpec {
                design: Design::Did,
                ..FitSpec::default()
            },
        )
        .unwrap();
        let c = rep.coef("post").unwrap();
        if c.ci_low <= 0.05 && 0.05 <= c.ci_high {
            hits += 1;
        }
    }
    let rate = hits as f64 / reps as f64;
    assert!((0.92..=0.98).contains(&rate), "coverage {rate}");
}

// ---- detection rules, one clause at a time ----

fn detect(rows: Vec<MwRow>, defl: BTreeMap<i32, f64>) -> mwpolicy::econpanel::Detection {
    detect_events(
        &MwPanel::new(rows, defl).unwrap(),
        &DetectionRules::default(),
    )
    .unwrap()
}

fn status_of(d: &mwpolicy::econpanel::Detection, state: &str, year: i32) -> Status {
    d.increases
        .iter()
        .find(|i| i.state == state && i.year == year)
        .unwrap()
        .status
}

#[test]
fn each_clause_rejects_its_own_case() {
    let years = 2000..=2015;
    let mut rows = Vec::new();
    rows.extend(path("EV", years.clone(), &[(2006, 8.00, 0.03)]));
    rows.extend(path("SMALL", years.clone(), &[(2006, 7.45, 0.03)]));
    rows.extend(path("FEW", years.clone(), &[(2006, 8.00, 0.019)]));
    rows.extend(path(
        "AGAIN",
        years.clone(),
        &[(2005, 8.00, 0.03), (2007, 9.00, 0.03)],
    ));
    rows.extend(path("LATE", years.clone(), &[(2013, 8.00, 0.03)]));
    // Federal floor rises to 8.00 and binds over a lower state minimum.
    rows.extend(
        years
            .clone()
            .map(|y| row("FED", y, 7.00, if y >= 2006 { 8.0 } else { 7.25 }, 0.03)),
    );
    let d = detect(rows, unit_deflator(years));
    assert_eq!(status_of(&d, "EV", 2006), Status::Event);
    assert_eq!(status_of(&d, "SMALL", 2006), Status::TooSmall);
    assert_eq!(status_of(&d, "FEW", 2006), Status::FewAffected);
    assert_eq!(status_of(&d, "AGAIN", 2005), Status::Event);
    assert_eq!(status_of(&d, "AGAIN", 2007), Status::RecentIncrease);
    assert_eq!(status_of(&d, "LATE", 2013), Status::WindowUnobserved);
    assert_eq!(status_of(&d, "FED", 2006), Status::NotAboveFederal);
    let events: Vec<(&str, i32)> = d
        .events
        .iter()
        .map(|e| (e.state.as_str(), e.year))
        .collect();
    assert_eq!(events, vec![("AGAIN", 2005), ("EV", 2006)]);
    assert_eq!(d.federal.len(), 1);
    assert_eq!(d.small_state.len(), 4);
}

#[test]
fn thresholds_are_inclusive_and_measured_in_real_dollars() {
    let years = 2000..=2012;
    let mut rows = path("EDGE", years.clone(), &[(2005, 7.50, 0.02)]);
    // A nominal 30 cent raise in a year with 25% inflation is a real cut.
    rows.extend(path("INFL", years.clone(), &[(2005, 7.55, 0.05)]));
    let defl: BTreeMap<i32, f64> = years
        .map(|y| (y, if y >= 2005 { 1.25 } else { 1.0 }))
        .collect();
    let d = detect(rows.clone(), defl);
    assert!(d.increases.iter().all(|i| i.state != "INFL"));
    let d = detect(rows, unit_deflator(2000..=2012));
    assert_eq!(status_of(&d, "EDGE", 2005), Status::Event);
    assert_eq!(status_of(&d, "INFL", 2005), Status::Event);
}

#[test]
fn increases_three_years_apart_are_both_events() {
    let years = 2000..=2016;
    let d = detect(
        path("A", years.clone(), &[(2005, 8.0, 0.03), (2009, 9.0, 0.03)]),
        unit_deflator(years),
    );
    assert_eq!(d.events.len(), 2);
    let years = 2000..=2016;
    let d = detect(
        path("A", years.clone(), &[(2005, 8.0, 0.03), (2008, 9.0, 0.03)]),
        unit_deflator(years),
    );
    assert_eq!(d.events.len(), 1);
}

#[test]
fn missing_deflator_years_are_named() {
    let rows = path("A", 2000..=2010, &[]);
    let err = MwPanel::new(rows, unit_deflator(2000..=2008))
        .unwrap_err()
        .to_string();
    assert!(err.contains("2009") && err.contains("2010"), "{err}");
}

#[test]
fn detection_is_idempotent_and_ignores_row_order() {
    let s = synth_panel(&SynthConfig {
        small_increases: 8,
        ..SynthConfig::default()
    })
    .unwrap();
    let rules = DetectionRules::default();
    let a = detect_events(&s.panel, &rules).unwrap();
    let mut rows = s.panel.rows.clone();
    rows.reverse();
    rows.rotate_left(137);
    let b = detect_events(
        &MwPanel::new(rows, s.panel.deflator.clone()).unwrap(),
        &rules,
    )
    .unwrap();
    assert_eq!(a, b);
    assert_eq!(a, detect_events(&s.panel, &rules).unwrap());
}

// ---- stacking ----

#[test]
fn one_event_two_controls_stacks_twenty_four_rows() {
    let years = 2000..=2012;
    let mut rows = path("T", years.clone(), &[(2006, 8.0, 0.03)]);
    rows.extend(path("C1", years.clone(), &[]));
    rows.extend(path("C2", years.clone(), &[]));
    let panel = MwPanel::new(rows, unit_deflator(years)).unwrap();
    let d = detect_events(&panel, &DetectionRules::default()).unwrap();
    let out = outcomes_for(&panel, |_, _| 1.0);
    let st = build_stack(&out, &panel, &d, (-3, 4), WeightMode::Row).unwrap();
    assert_eq!(st.rows.len(), 24);
    assert_eq!(st.rows.iter().filter(|r| r.treated).count(), 8);
    assert!(st.rows.iter().all(|r| (-3..=4).contains(&r.rel)));
}

#[test]
fn later_treated_state_serves_as_an_earlier_control() {
    let years = 2000..=2020;
    let mut rows = path("A", years.clone(), &[(2005, 8.0, 0.03)]);
    rows.extend(path("B", years.clone(), &[(2014, 8.0, 0.03)]));
    rows.extend(path("C", years.clone(), &[]));
    // D is treated inside A's window and may not be its control.
    rows.extend(path("D", years.clone(), &[(2008, 8.0, 0.03)]));
    let panel = MwPanel::new(rows, unit_deflator(years)).unwrap();
    let d = detect_events(&panel, &DetectionRules::default()).unwrap();
    let st = build_stack(
        &outcomes_for(&panel, |_, _| 0.0),
        &panel,
        &d,
        (-3, 4),
        WeightMode::Row,
    )
    .unwrap();
    let members = |ev: usize| -> Vec<(String, bool)> {
        let mut m: Vec<(String, bool)> = st
            .rows
            .iter()
            .filter(|r| r.event == ev)
            .map(|r| (r.state.clone(), r.treated))
            .collect();
        m.dedup();
        m
    };
    let a = st.events.iter().position(|e| e.state == "A").unwrap();
    let b = st.events.iter().position(|e| e.state == "B").unwrap();
    assert!(members(a).contains(&("B".into(), false)));
    assert!(!members(a).iter().any(|(s, _)| s == "D"));
    assert!(members(b).contains(&("B".into(), true)));
    assert!(members(b).contains(&("A".into(), false)));
}

#[test]
fn event_without_clean_controls_is_dropped_with_a_diagnostic() {
    let years = 2000..=2012;
    let mut rows = path("A", years.clone(), &[(2005, 8.0, 0.03)]);
    rows.extend(path("B", years.clone(), &[(2006, 8.0, 0.03)]));
    let panel = MwPanel::new(rows, unit_deflator(years)).unwrap();
    let d = detect_events(&panel, &DetectionRules::default()).unwrap();
    let st = build_stack(
        &outcomes_for(&panel, |_, _| 0.0),
        &panel,
        &d,
        (-3, 4),
        WeightMode::Row,
    )
    .unwrap();
    assert!(st.rows.is_empty() && st.events.is_empty());
    assert_eq!(st.diagnostics.len(), 2);
    assert!(st.diagnostics[0].contains("no clean controls"));
}

#[test]
fn treated_outcome_gaps_are_listed() {
    let years = 2000..=2012;
    let mut rows = path("T", years.clone(), &[(2006, 8.0, 0.03)]);
    rows.extend(path("C", years.clone(), &[]));
    let panel = MwPanel::new(rows, unit_deflator(years)).unwrap();
    let d = detect_events(&panel, &DetectionRules::default()).unwrap();
    let out: Vec<OutcomeRow> = outcomes_for(&panel, |_, _| 0.0)
        .into_iter()
        .filter(|r| !(r.state == "T" && r.year == 2008))
        .collect();
    let err = build_stack(&out, &panel, &d, (-3, 4), WeightMode::Row)
        .unwrap_err()
        .to_string();
    assert!(err.contains("T 2006") && err.contains("2008"), "{err}");
}

#[test]
fn small_increases_in_controls_are_flagged_by_timing() {
    let years = 2000..=2012;
    let mut rows = path("T", years.clone(), &[(2006, 8.0, 0.03)]);
    rows.extend(path("C", years.clone(), &[(2005, 7.40, 0.03)]));
    let panel = MwPanel::new(rows, unit_deflator(years)).unwrap();
    let d = detect_events(&panel, &DetectionRules::default()).unwrap();
    let st = build_stack(
        &outcomes_for(&panel, |_, _| 0.0),
        &panel,
        &d,
        (-3, 4),
        WeightMode::Row,
    )
    .unwrap();
    for r in st.rows.iter().filter(|r| r.state == "C") {
        let k = r.year - 2005;
        assert_eq!(r.flags[0], (-3..=-2).contains(&k), "{}", r.year);
        assert_eq!(r.flags[1], k == -1);
        assert_eq!(r.flags[2], (0..=4).contains(&k));
        assert!(r.flags[3..].iter().all(|f| !f));
    }
    // Without any flagged row the flag columns are collinear zeros and drop.
    let rep = fit_fe(
        &build_stack(
            &outcomes_for(
                &panel,
                |s, y| if s == "T" && y >= 2006 { 0.05 } else { 0.0 } + y as f64 * 0.01,
            ),
            &panel,
            &detect_events(&panel, &DetectionRules::default()).unwrap(),
            (-3, 4),
            WeightMode::Row,
        )
        .unwrap(),
        &FitSpec {
            design: Design::Did,
            ..FitSpec::default()
        },
    )
    .unwrap();
    assert!(rep.dropped.iter().any(|n| n.starts_with("fed_")));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn stack_membership_follows_the_window_rule(seed in 0u64..1000, small in 0usize..6) {
        let cfg = SynthConfig { seed, small_increases: small, ..SynthConfig::default() };
        let s = synth_panel(&cfg).unwrap();
        let d = detect_events(&s.panel, &DetectionRules::default()).unwrap();
        let st = build_stack(&s.outcomes, &s.panel, &d, (-3, 4), WeightMode::Row).unwrap();
        for (id, ev) in st.events.iter().enumerate() {
            for r in st.rows.iter().filter(|r| r.event == id && !r.treated) {
                let clean = !d.events.iter().any(|e| e.state == r.state && (e.year - ev.year).abs() <= 4 && e.year >= ev.year - 3);
                prop_assert!(clean, "{} in event {} {}", r.state, ev.state, ev.year);
            }
            let n = st.rows.iter().filter(|r| r.event == id).count();
            prop_assert_eq!(n % 8, 0);
        }
    }
}
