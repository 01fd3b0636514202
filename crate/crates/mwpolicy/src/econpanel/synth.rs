//! Synthetic minimum-wage and outcome panels with planted effects.

use std::collections::BTreeMap;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::panel::{MwPanel, MwRow, OutcomeRow};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n_states: usize,
    pub first_year: i32,
    pub last_year: i32,
    /// Event years; every cohort treats `treated_per_cohort` states.
    pub cohorts: Vec<i32>,
    pub treated_per_cohort: usize,
    /// Log-point effect for each relative year of `window`.
    pub effect: Vec<f64>,
    pub window: (i32, i32),
    pub noise_sd: f64,
    /// Real size of a planted event ($ base year).
    pub event_increase: f64,
    pub fed_mw: f64,
    pub inflation: f64,
    /// Sub-threshold state increases scattered over the panel.
    pub small_increases: usize,
    pub n_regions: usize,
    pub industries: Vec<String>,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_states: 50,
            first_year: 1997,
            last_year: 2019,
            cohorts: vec![2001, 2009],
            treated_per_cohort: 10,
            effect: vec![0.0, 0.0, 0.0, 0.05, 0.05, 0.05, 0.05, 0.05],
            window: (-3, 4),
            noise_sd: 0.02,
            event_increase: 1.0,
            fed_mw: 7.25,
            inflation: 0.02,
            small_increases: 0,
            n_regions: 4,
            industries: Vec::new(),
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthPanel {
    pub panel: MwPanel,
    pub outcomes: Vec<OutcomeRow>,
    /// Planted events as `(state, year)`, sorted.
    pub events: Vec<(String, i32)>,
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.window;
        let width = (hi - lo + 1) as usize;
        if self.effect.len() != width {
            return Err(Error::Config(format!(
                "effect profile needs {width} entries"
            )));
        }
        if self.treated_per_cohort + 1 > self.n_states {
            return Err(Error::Config(
                "need at least one never-treated state per cohort".into(),
            ));
        }
        let mut c = self.cohorts.clone();
        c.sort_unstable();
        for y in &c {
            if *y + lo < self.first_year + 1 || *y + hi > self.last_year {
                return Err(Error::Config(format!("cohort {y} window leaves the panel")));
            }
        }
        // Effects of one cohort must not leak into another cohort's window,
        // otherwise stacked controls are contaminated and recovery is not exact.
        if c.windows(2).any(|w| w[1] - w[0] < width as i32) {
            return Err(Error::Config(format!(
                "cohorts must be at least {width} years apart"
            )));
        }
        if !(self.noise_sd >= 0.0) || !(self.event_increase >= 0.25) {
            return Err(Error::Config(
                "noise_sd must be >= 0 and event_increase >= 0.25".into(),
            ));
        }
        Ok(())
    }
}

pub fn state_name(i: usize) -> String {
    format!("S{:02}", i + 1)
}

/// Same config, same output, bit for bit.
pub fn synth_panel(cfg: &SynthConfig) -> Result<SynthPanel> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let std = Normal::new(0.0, 1.0).expect("unit normal");
    let years: Vec<i32> = (cfg.first_year..=cfg.last_year).collect();
    let ns = cfg.n_states;

    let mut events: Vec<(usize, i32)> = Vec::new();
    for &y in &cfg.cohorts {
        let mut picks = sample(&mut rng, ns, cfg.treated_per_cohort).into_vec();
        picks.sort_unstable();
        events.extend(picks.into_iter().map(|s| (s, y)));
    }
    // Small increases avoid treated states' windows and the event years.
    let mut small: Vec<(usize, i32)> = Vec::new();
    let mut guard = 0;
    while small.len() < cfg.small_increases && guard < 100_000 {
        guard += 1;
        let s = rng.random_range(0..ns);
        let y = rng.random_range(cfg.first_year + 1..=cfg.last_year);
        let near_event = events
            .iter()
            .any(|&(es, ey)| es == s && (ey - y).abs() <= cfg.window.1 - cfg.window.0);
        if !near_event && !small.contains(&(s, y)) {
            small.push((s, y));
        }
    }

    let state_fe: Vec<f64> = (0..ns).map(|_| std.sample(&mut rng)).collect();
    let year_fe: BTreeMap<i32, f64> = years
        .iter()
        .map(|&y| {
            (
                y,
                0.01 * (y - cfg.first_year) as f64 + 0.05 * std.sample(&mut rng),
            )
        })
        .collect();
    let weights: Vec<f64> = (0..ns).map(|_| rng.random_range(0.5..1.5)).collect();
    let ind_fe: Vec<f64> = cfg
        .industries
        .iter()
        .map(|_| std.sample(&mut rng))
        .collect();

    let deflator: BTreeMap<i32, f64> = years
        .iter()
        .map(|&y| (y, (1.0 + cfg.inflation).powi(y - 2016)))
        .collect();

    let mut rows = Vec::new();
    let mut outcomes = Vec::new();
    for s in 0..ns {
        let name = state_name(s);
        let region = format!("R{}", s % cfg.n_regions.max(1) + 1);
        let division = format!("D{}", s % (2 * cfg.n_regions.max(1)) + 1);
        for &y in &years {
            let real = cfg.fed_mw
                + cfg.event_increase
                    * events
                        .iter()
                        .filter(|&&(es, ey)| es == s && ey <= y)
                        .count() as f64
                + 0.1 * small.iter().filter(|&&(ss, sy)| ss == s && sy <= y).count() as f64;
            let is_event = events.contains(&(s, y));
            rows.push(MwRow {
                state: name.clone(),
                year: y,
                state_mw: real * deflator[&y],
                fed_mw: cfg.fed_mw * deflator[&y],
                affected_share: if is_event { 0.05 } else { 0.01 },
                weight: weights[s],
                region: Some(region.clone()),
                division: Some(division.clone()),
            });
            let effect: f64 = events
                .iter()
                .filter(|&&(es, _)| es == s)
                .filter_map(|&(_, ey)| {
                    let k = y - ey;
                    (cfg.window.0..=cfg.window.1)
                        .contains(&k)
                        .then(|| cfg.effect[(k - cfg.window.0) as usize])
                })
                .sum();
            let base = state_fe[s] + year_fe[&y] + effect;
            if cfg.industries.is_empty() {
                outcomes.push(OutcomeRow {
                    state: name.clone(),
                    year: y,
                    outcome: base + cfg.noise_sd * std.sample(&mut rng),
                    weight: weights[s],
                    industry: None,
                });
            } else {
                for (i, ind) in cfg.industries.iter().enumerate() {
                    outcomes.push(OutcomeRow {
                        state: name.clone(),
                        year: y,
                        outcome: base + ind_fe[i] + cfg.noise_sd * std.sample(&mut rng),
                        weight: weights[s] * (1.0 + i as f64),
                        industry: Some(ind.clone()),
                    });
                }
            }
        }
    }
    let mut planted: Vec<(String, i32)> = events.iter().map(|&(s, y)| (state_name(s), y)).collect();
    planted.sort();
    Ok(SynthPanel {
        panel: MwPanel::new(rows, deflator)?,
        outcomes,
        events: planted,
    })
}
