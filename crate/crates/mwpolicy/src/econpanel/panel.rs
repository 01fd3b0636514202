//! Input panels and their CSV schemas.
//!
//! Minimum-wage panel, one row per state-year:
//! `state,year,state_mw,fed_mw,affected_share,weight[,region,division]`.
//! `affected_share` is the previous year's share of workers earning less
//! than this year's minimum.
//!
//! Deflator: `year,index` with the index equal to 1 in the base year
//! (2016), so `real = nominal / index`.
//!
//! Outcomes: `state,year,outcome,weight[,industry]` with `outcome` already
//! in logs.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MwRow {
    pub state: String,
    pub year: i32,
    pub state_mw: f64,
    pub fed_mw: f64,
    pub affected_share: f64,
    pub weight: f64,
    #[serde(default)]
    pub region: Option<String>,
    #[serde(default)]
    pub division: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeflatorRow {
    pub year: i32,
    pub index: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeRow {
    pub state: String,
    pub year: i32,
    pub outcome: f64,
    pub weight: f64,
    #[serde(default)]
    pub industry: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MwPanel {
    pub rows: Vec<MwRow>,
    pub deflator: BTreeMap<i32, f64>,
}

impl MwPanel {
    pub fn new(rows: Vec<MwRow>, deflator: BTreeMap<i32, f64>) -> Result<Self> {
        let p = MwPanel { rows, deflator };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for r in &self.rows {
            if !seen.insert((r.state.as_str(), r.year)) {
                return Err(Error::Data(format!(
                    "duplicate row for {} {}",
                    r.state, r.year
                )));
            }
            if !(r.state_mw >= 0.0 && r.fed_mw >= 0.0) {
                return Err(Error::Data(format!(
                    "negative minimum wage for {} {}",
                    r.state, r.year
                )));
            }
            if !(0.0..=1.0).contains(&r.affected_share) {
                return Err(Error::Data(format!(
                    "affected share outside [0,1] for {} {}",
                    r.state, r.year
                )));
            }
            if !(r.weight >= 0.0 && r.weight.is_finite()) {
                return Err(Error::Data(format!(
                    "bad weight for {} {}",
                    r.state, r.year
                )));
            }
        }
        for (state, years) in self.years_by_state() {
            if years.windows(2).any(|w| w[1] != w[0] + 1) {
                return Err(Error::Data(format!("years for {state} are not contiguous")));
            }
        }
        if let Some((y, v)) = self
            .deflator
            .iter()
            .find(|(_, v)| !(**v > 0.0 && v.is_finite()))
        {
            return Err(Error::Data(format!(
                "deflator for {y} must be positive, got {v}"
            )));
        }
        let missing: BTreeSet<i32> = self
            .rows
            .iter()
            .map(|r| r.year)
            .filter(|y| !self.deflator.contains_key(y))
            .collect();
        if !missing.is_empty() {
            return Err(Error::Data(format!("deflator missing years {missing:?}")));
        }
        Ok(())
    }

    pub fn years_by_state(&self) -> BTreeMap<&str, Vec<i32>> {
        let mut m: BTreeMap<&str, Vec<i32>> = BTreeMap::new();
        for r in &self.rows {
            m.entry(r.state.as_str()).or_default().push(r.year);
        }
        for v in m.values_mut() {
            v.sort_unstable();
        }
        m
    }

    /// Rows keyed by `(state, year)`.
    pub fn index(&self) -> BTreeMap<(&str, i32), &MwRow> {
        self.rows
            .iter()
            .map(|r| ((r.state.as_str(), r.year), r))
            .collect()
    }

    /// Effective minimum wage `max(state, federal)` in base-year dollars.
    pub fn real_effective(&self, r: &MwRow) -> f64 {
        r.state_mw.max(r.fed_mw) / self.deflator[&r.year]
    }

    pub fn from_csv<R1: Read, R2: Read>(panel: R1, deflator: R2) -> Result<Self> {
        let rows = read_csv(panel)?;
        let defl: Vec<DeflatorRow> = read_csv(deflator)?;
        let mut map = BTreeMap::new();
        for d in defl {
            if map.insert(d.year, d.index).is_some() {
                return Err(Error::Data(format!("duplicate deflator year {}", d.year)));
            }
        }
        MwPanel::new(rows, map)
    }
}

pub fn read_csv<T: for<'de> Deserialize<'de>, R: Read>(r: R) -> Result<Vec<T>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(r);
    rdr.deserialize()
        .enumerate()
        .map(|(i, rec)| rec.map_err(|e| Error::Data(format!("row {}: {e}", i + 1))))
        .collect()
}

pub fn write_csv<T: Serialize, W: std::io::Write>(w: W, rows: &[T]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    for r in rows {
        wtr.serialize(r).map_err(|e| Error::Data(e.to_string()))?;
    }
    wtr.flush().map_err(|e| Error::Data(e.to_string()))
}

pub fn validate_outcomes(rows: &[OutcomeRow]) -> Result<()> {
    let mut seen = BTreeSet::new();
    for r in rows {
        if !seen.insert((r.state.as_str(), r.year, r.industry.as_deref())) {
            return Err(Error::Data(format!(
                "duplicate outcome row for {} {}",
                r.state, r.year
            )));
        }
        if !r.outcome.is_finite() || !(r.weight >= 0.0 && r.weight.is_finite()) {
            return Err(Error::Data(format!(
                "non-finite outcome or weight for {} {}",
                r.state, r.year
            )));
        }
    }
    Ok(())
}
