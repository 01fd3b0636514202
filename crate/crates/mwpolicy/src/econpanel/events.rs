//! Event detection: classify every state-year minimum wage increase.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::panel::MwPanel;
use crate::{Error, Result};

/// Increases smaller than this (in base-year dollars) are noise.
const EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectionRules {
    pub min_real_increase: f64,
    pub min_affected_share: f64,
    pub clean_pre_years: i32,
    /// Event window `(lo, hi)` in years relative to the event.
    pub window: (i32, i32),
}

impl Default for DetectionRules {
    fn default() -> Self {
        DetectionRules {
            min_real_increase: 0.25,
            min_affected_share: 0.02,
            clean_pre_years: 3,
            window: (-3, 4),
        }
    }
}

impl DetectionRules {
    pub fn validate(&self) -> Result<()> {
        if !(self.window.0 <= -1 && self.window.1 >= 0) {
            return Err(Error::Config("event window must contain -1 and 0".into()));
        }
        if self.clean_pre_years < 0 {
            return Err(Error::Config("clean_pre_years must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Why an increase is or is not an event; the first failing clause wins.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Status {
    Event,
    TooSmall,
    NotAboveFederal,
    FewAffected,
    RecentIncrease,
    WindowUnobserved,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Increase {
    pub state: String,
    pub year: i32,
    /// Change of the real effective minimum wage.
    pub real_increase: f64,
    pub dlog_mw: f64,
    pub affected_share: f64,
    pub status: Status,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub state: String,
    pub year: i32,
    pub real_increase: f64,
    pub dlog_mw: f64,
    pub affected_share: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct Detection {
    pub events: Vec<Event>,
    /// Every real increase of the effective minimum wage, classified.
    pub increases: Vec<Increase>,
    /// State-level increases that are not events.
    pub small_state: Vec<Increase>,
    /// Increases driven by a binding federal minimum.
    pub federal: Vec<Increase>,
}

/// Sorted by `(state, year)`, so the result does not depend on row order.
pub fn detect_events(panel: &MwPanel, rules: &DetectionRules) -> Result<Detection> {
    panel.validate()?;
    rules.validate()?;
    let idx = panel.index();
    let mut by_state: BTreeMap<&str, Vec<i32>> = BTreeMap::new();
    for (s, y) in idx.keys() {
        by_state.entry(s).or_default().push(*y);
    }

    let mut out = Detection::default();
    for (state, years) in &by_state {
        // First pass: size, binding and share clauses.
        let mut cands: Vec<Increase> = Vec::new();
        for &y in years {
            let (Some(prev), Some(cur)) = (idx.get(&(*state, y - 1)), idx.get(&(*state, y))) else {
                continue;
            };
            let (a, b) = (panel.real_effective(prev), panel.real_effective(cur));
            let inc = b - a;
            if inc <= EPS {
                continue;
            }
            let status = if inc + EPS < rules.min_real_increase {
                Status::TooSmall
            } else if cur.state_mw <= cur.fed_mw {
                Status::NotAboveFederal
            } else if cur.affected_share + EPS < rules.min_affected_share {
                Status::FewAffected
            } else {
                Status::Event
            };
            cands.push(Increase {
                state: state.to_string(),
                year: y,
                real_increase: inc,
                dlog_mw: (b / a).ln(),
                affected_share: cur.affected_share,
                status,
            });
        }
        // Second pass: clean pre-period and observable window.
        let qualifying: Vec<i32> = cands
            .iter()
            .filter(|c| c.status == Status::Event)
            .map(|c| c.year)
            .collect();
        for c in cands.iter_mut().filter(|c| c.status == Status::Event) {
            let y = c.year;
            if qualifying
                .iter()
                .any(|&q| q < y && q >= y - rules.clean_pre_years)
            {
                c.status = Status::RecentIncrease;
            } else if !(y + rules.window.0..=y + rules.window.1)
                .all(|t| idx.contains_key(&(*state, t)))
            {
                c.status = Status::WindowUnobserved;
            }
        }
        for c in cands {
            match c.status {
                Status::Event => out.events.push(Event {
                    state: c.state.clone(),
                    year: c.year,
                    real_increase: c.real_increase,
                    dlog_mw: c.dlog_mw,
                    affected_share: c.affected_share,
                }),
                Status::NotAboveFederal => out.federal.push(c.clone()),
                _ => out.small_state.push(c.clone()),
            }
            out.increases.push(c);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::super::panel::MwRow;
    use super::*;

    fn panel(state_mw: &[(i32, f64, f64)]) -> MwPanel {
        let rows = state_mw
            .iter()
            .map(|&(y, s, share)| MwRow {
                state: "A".into(),
                year: y,
                state_mw: s,
                fed_mw: 7.25,
                affected_share: share,
                weight: 1.0,
                region: None,
                division: None,
            })
            .collect();
        let defl = state_mw.iter().map(|&(y, _, _)| (y, 1.0)).collect();
        MwPanel::new(rows, defl).unwrap()
    }

    #[test]
    fn single_clean_increase_is_an_event() {
        let rows: Vec<(i32, f64, f64)> = (2000..2012)
            .map(|y| (y, if y >= 2005 { 8.0 } else { 7.25 }, 0.03))
            .collect();
        let d = detect_events(&panel(&rows), &DetectionRules::default()).unwrap();
        assert_eq!(d.events.len(), 1);
        assert_eq!(d.events[0].year, 2005);
        assert!((d.events[0].real_increase - 0.75).abs() < 1e-12);
    }

    #[test]
    fn second_increase_two_years_later_is_not_clean() {
        let rows: Vec<(i32, f64, f64)> = (2000..2014)
            .map(|y| {
                (
                    y,
                    if y >= 2006 {
                        9.0
                    } else if y >= 2004 {
                        8.0
                    } else {
                        7.25
                    },
                    0.03,
                )
            })
            .collect();
        let d = detect_events(&panel(&rows), &DetectionRules::default()).unwrap();
        assert_eq!(
            d.events.iter().map(|e| e.year).collect::<Vec<_>>(),
            vec![2004]
        );
        assert_eq!(d.small_state[0].status, Status::RecentIncrease);
    }
}
