//! Event-specific datasets (treated state plus clean controls) appended
//! into one stacked panel.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::events::{Detection, Event, Increase};
use super::panel::{MwPanel, OutcomeRow};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum WeightMode {
    /// Use each row's own weight.
    #[default]
    Row,
    /// Weight every (event, state, industry) cell by its average weight over
    /// the pre-event years.
    PrePeriodMean,
}

/// Names of the six control-flag columns, in storage order.
pub const FLAG_NAMES: [&str; 6] = [
    "small_early",
    "small_pre",
    "small_post",
    "fed_early",
    "fed_pre",
    "fed_post",
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StackRow {
    pub event: usize,
    pub state: String,
    pub year: i32,
    pub rel: i32,
    pub outcome: f64,
    pub treated: bool,
    pub weight: f64,
    pub region: String,
    pub division: String,
    pub industry: String,
    pub flags: [bool; 6],
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StackedPanel {
    pub rows: Vec<StackRow>,
    pub window: (i32, i32),
    /// Events that made it into the stack; `StackRow::event` indexes this.
    pub events: Vec<Event>,
    pub diagnostics: Vec<String>,
}

fn flag_bits(
    state: &str,
    year: i32,
    small: &[Increase],
    fed: &[Increase],
    window: (i32, i32),
) -> [bool; 6] {
    let mut f = [false; 6];
    for (off, list) in [(0, small), (3, fed)] {
        for inc in list.iter().filter(|i| i.state == state) {
            let k = year - inc.year;
            if (window.0..=-2).contains(&k) {
                f[off] = true;
            } else if k == -1 {
                f[off + 1] = true;
            } else if (0..=window.1).contains(&k) {
                f[off + 2] = true;
            }
        }
    }
    f
}

pub fn build_stack(
    outcomes: &[OutcomeRow],
    panel: &MwPanel,
    detection: &Detection,
    window: (i32, i32),
    weight_mode: WeightMode,
) -> Result<StackedPanel> {
    super::panel::validate_outcomes(outcomes)?;
    let mut by_state: BTreeMap<&str, Vec<&OutcomeRow>> = BTreeMap::new();
    for r in outcomes {
        by_state.entry(r.state.as_str()).or_default().push(r);
    }
    for v in by_state.values_mut() {
        v.sort_by(|a, b| (a.year, &a.industry).cmp(&(b.year, &b.industry)));
    }
    let geo: BTreeMap<&str, (String, String)> = panel
        .rows
        .iter()
        .map(|r| {
            (
                r.state.as_str(),
                (
                    r.region.clone().unwrap_or_default(),
                    r.division.clone().unwrap_or_default(),
                ),
            )
        })
        .collect();

    let mut rows = Vec::new();
    let mut kept = Vec::new();
    let mut diagnostics = Vec::new();
    let mut gaps = Vec::new();
    for ev in &detection.events {
        let years = ev.year + window.0..=ev.year + window.1;
        // Treated rows must cover the window for every industry observed.
        let treated = by_state
            .get(ev.state.as_str())
            .map(Vec::as_slice)
            .unwrap_or(&[]);
        let mut industries: BTreeMap<Option<&str>, BTreeSet<i32>> = BTreeMap::new();
        for r in treated {
            industries
                .entry(r.industry.as_deref())
                .or_default()
                .insert(r.year);
        }
        if industries.is_empty() {
            industries.insert(None, BTreeSet::new());
        }
        for (ind, ys) in &industries {
            let missing: Vec<i32> = years.clone().filter(|y| !ys.contains(y)).collect();
            if !missing.is_empty() {
                gaps.push(format!(
                    "{} {}{}: missing {:?}",
                    ev.state,
                    ev.year,
                    ind.map(|i| format!(" [{i}]")).unwrap_or_default(),
                    missing
                ));
            }
        }

        let treated_in_window: BTreeSet<&str> = detection
            .events
            .iter()
            .filter(|e| years.contains(&e.year))
            .map(|e| e.state.as_str())
            .collect();
        let controls: Vec<&str> = by_state
            .keys()
            .copied()
            .filter(|s| *s != ev.state && !treated_in_window.contains(s))
            .collect();
        if controls.is_empty() {
            diagnostics.push(format!(
                "event {} {} dropped: no clean controls",
                ev.state, ev.year
            ));
            continue;
        }
        let id = kept.len();
        kept.push(ev.clone());
        for s in std::iter::once(ev.state.as_str()).chain(controls) {
            let (region, division) = geo.get(s).cloned().unwrap_or_default();
            for r in by_state[s].iter().filter(|r| years.contains(&r.year)) {
                rows.push(StackRow {
                    event: id,
                    state: s.to_string(),
                    year: r.year,
                    rel: r.year - ev.year,
                    outcome: r.outcome,
                    treated: s == ev.state,
                    weight: r.weight,
                    region: region.clone(),
                    division: division.clone(),
                    industry: r.industry.clone().unwrap_or_default(),
                    flags: flag_bits(
                        s,
                        r.year,
                        &detection.small_state,
                        &detection.federal,
                        window,
                    ),
                });
            }
        }
    }
    if !gaps.is_empty() {
        return Err(Error::Data(format!(
            "treated outcome rows missing: {}",
            gaps.join("; ")
        )));
    }

    if weight_mode == WeightMode::PrePeriodMean {
        let mut acc: BTreeMap<(usize, String, String), (f64, usize)> = BTreeMap::new();
        for r in rows.iter().filter(|r| r.rel < 0) {
            let e = acc
                .entry((r.event, r.state.clone(), r.industry.clone()))
                .or_default();
            e.0 += r.weight;
            e.1 += 1;
        }
        for r in rows.iter_mut() {
            let (sum, n) = acc
                .get(&(r.event, r.state.clone(), r.industry.clone()))
                .copied()
                .ok_or_else(|| {
                    Error::Data(format!(
                        "no pre-period rows for {} in event {}",
                        r.state, r.event
                    ))
                })?;
            r.weight = sum / n as f64;
        }
    }

    Ok(StackedPanel {
        rows,
        window,
        events: kept,
        diagnostics,
    })
}
