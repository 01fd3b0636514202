//! Policy grid sweep: welfare surface, envelope over tax pairs, optimal
//! minimum wage per tax pair and the joint optimum.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::config::GridConfig;
use crate::equilibrium::{close_budget, Equilibrium, SolverOptions, WelfareOptions};
use crate::model::{ModelParams, Policy};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolicyGrid {
    pub tau_l_values: Vec<f64>,
    pub t_values: Vec<f64>,
    pub tau_h: f64,
    pub mw_values_hourly: Vec<f64>,
}

/// `start + i*step` for every `i` with the value at most `stop`, rounded
/// to ten decimals so that e.g. 0.35 is exactly the literal 0.35.
pub fn axis(start: f64, stop: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0 && start.is_finite() && stop.is_finite()) || stop < start {
        return Err(Error::Config(format!(
            "bad grid axis {start}..{stop} step {step}"
        )));
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize + 1;
    Ok((0..n)
        .map(|i| ((start + i as f64 * step) * 1e10).round() / 1e10)
        .collect())
}

impl PolicyGrid {
    pub fn from_config(c: &GridConfig) -> Result<Self> {
        let g = PolicyGrid {
            tau_l_values: axis(c.tau_l_start, c.tau_l_stop, c.tau_l_step)?,
            t_values: axis(c.t_start, c.t_stop, c.t_step)?,
            tau_h: c.tau_h,
            mw_values_hourly: axis(c.mw_start, c.mw_stop, c.mw_step)?,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("tau_l", &self.tau_l_values),
            ("t", &self.t_values),
            ("mw", &self.mw_values_hourly),
        ] {
            if v.is_empty() {
                return Err(Error::Config(format!("grid axis {name} is empty")));
            }
            if v.windows(2).any(|w| !(w[0] < w[1])) {
                return Err(Error::Config(format!(
                    "grid axis {name} is not strictly increasing"
                )));
            }
        }
        Ok(())
    }

    pub fn n_tax(&self) -> usize {
        self.tau_l_values.len() * self.t_values.len()
    }

    pub fn n_mw(&self) -> usize {
        self.mw_values_hourly.len()
    }

    /// Tax pair `k` in storage order (τ_l outer, t inner).
    pub fn tax_pair(&self, k: usize) -> (f64, f64) {
        let nt = self.t_values.len();
        (self.tau_l_values[k / nt], self.t_values[k % nt])
    }

    pub fn policy(&self, k: usize, mw: Option<f64>) -> Policy<f64> {
        let (tau_l, t) = self.tax_pair(k);
        Policy {
            tau_l,
            tau_h: self.tau_h,
            t,
            mw_hourly: mw,
            y0: 0.0,
        }
    }
}

/// One solved cell. Infeasible cells keep their policy and a reason.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Cell {
    pub tau_l: f64,
    pub t: f64,
    pub mw: f64,
    pub feasible: bool,
    pub sw: Option<f64>,
    pub y0: Option<f64>,
    pub wage_s: Option<f64>,
    pub wage_m: Option<f64>,
    pub mw_binding_s: Option<bool>,
    pub mw_binding_m: Option<bool>,
    pub unemployment_l: Option<f64>,
    pub unemployment_h: Option<f64>,
    pub participation_l: Option<f64>,
    pub participation_h: Option<f64>,
    pub error: Option<String>,
}

impl Cell {
    fn from_result(policy: &Policy<f64>, r: Result<Equilibrium<f64>>) -> Self {
        let mw = policy.mw_hourly.unwrap_or(f64::NAN);
        match r {
            Ok(eq) => Cell {
                tau_l: policy.tau_l,
                t: policy.t,
                mw,
                feasible: true,
                sw: Some(eq.social_welfare),
                y0: Some(eq.y0_solved),
                wage_s: Some(eq.services.wage),
                wage_m: Some(eq.manufacturing.wage),
                mw_binding_s: Some(eq.services.mw_binding),
                mw_binding_m: Some(eq.manufacturing.mw_binding),
                unemployment_l: Some(eq.low.unemployment_rate),
                unemployment_h: Some(eq.high.unemployment_rate),
                participation_l: Some(eq.low.participation_rate),
                participation_h: Some(eq.high.participation_rate),
                error: None,
            },
            Err(e) => Cell {
                tau_l: policy.tau_l,
                t: policy.t,
                mw,
                feasible: false,
                sw: None,
                y0: None,
                wage_s: None,
                wage_m: None,
                mw_binding_s: None,
                mw_binding_m: None,
                unemployment_l: None,
                unemployment_h: None,
                participation_l: None,
                participation_h: None,
                error: Some(e.to_string()),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WelfareSurface {
    pub grid: PolicyGrid,
    /// Tax-pair major, minimum wage minor.
    pub cells: Vec<Cell>,
}

impl WelfareSurface {
    pub fn cell(&self, tax: usize, mw: usize) -> &Cell {
        &self.cells[tax * self.grid.n_mw() + mw]
    }

    pub fn sw(&self, tax: usize, mw: usize) -> Option<f64> {
        self.cell(tax, mw).sw
    }
}

/// Solves every cell with budget closure. Runs on the current rayon pool;
/// collection is order-preserving, so the result does not depend on the
/// number of workers.
pub fn sweep(
    params: &ModelParams<f64>,
    grid: &PolicyGrid,
    solver: &SolverOptions<f64>,
    welfare: &WelfareOptions<f64>,
) -> Result<WelfareSurface> {
    sweep_with(grid, |p| close_budget(params, p, solver, welfare))
}

/// Sweep with an arbitrary cell evaluator.
pub fn sweep_with<F>(grid: &PolicyGrid, eval: F) -> Result<WelfareSurface>
where
    F: Fn(&Policy<f64>) -> Result<Equilibrium<f64>> + Sync,
{
    grid.validate()?;
    let n_mw = grid.n_mw();
    let cells = (0..grid.n_tax() * n_mw)
        .into_par_iter()
        .map(|i| {
            let p = grid.policy(i / n_mw, Some(grid.mw_values_hourly[i % n_mw]));
            Cell::from_result(&p, eval(&p))
        })
        .collect();
    Ok(WelfareSurface {
        grid: grid.clone(),
        cells,
    })
}

/// `true` when `a` beats `b` in the tie-break order: smaller t, then
/// smaller |τ_l|.
fn tax_precedes(a: (f64, f64), b: (f64, f64)) -> bool {
    (a.1, a.0.abs()) < (b.1, b.0.abs())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnvelopePoint {
    pub mw: f64,
    pub tau_l: f64,
    pub t: f64,
    pub sw: f64,
    /// Another tax pair attains the same welfare.
    pub tie: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Envelope {
    /// One entry per minimum wage; `None` when the column is all infeasible.
    pub points: Vec<Option<EnvelopePoint>>,
    pub diagnostics: Vec<String>,
}

pub fn envelope(surface: &WelfareSurface) -> Envelope {
    let g = &surface.grid;
    let mut points = Vec::with_capacity(g.n_mw());
    let mut diagnostics = Vec::new();
    for j in 0..g.n_mw() {
        let mut best: Option<EnvelopePoint> = None;
        for k in 0..g.n_tax() {
            let Some(sw) = surface.sw(k, j) else { continue };
            let (tau_l, t) = g.tax_pair(k);
            best = Some(match best {
                None => EnvelopePoint {
                    mw: g.mw_values_hourly[j],
                    tau_l,
                    t,
                    sw,
                    tie: false,
                },
                Some(b) if sw > b.sw => EnvelopePoint {
                    tau_l,
                    t,
                    sw,
                    tie: false,
                    ..b
                },
                Some(b) if sw == b.sw => {
                    if tax_precedes((tau_l, t), (b.tau_l, b.t)) {
                        EnvelopePoint {
                            tau_l,
                            t,
                            sw,
                            tie: true,
                            ..b
                        }
                    } else {
                        EnvelopePoint { tie: true, ..b }
                    }
                }
                Some(b) => b,
            });
        }
        if best.is_none() {
            diagnostics.push(format!(
                "no feasible tax pair at mw={}",
                g.mw_values_hourly[j]
            ));
        }
        points.push(best);
    }
    Envelope {
        points,
        diagnostics,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TaxOptimum {
    pub tau_l: f64,
    pub t: f64,
    pub mw: f64,
    pub sw: f64,
    /// A higher minimum wage attains the same welfare.
    pub tie: bool,
}

/// Argmax minimum wage for every tax pair (`None` if the pair has no
/// feasible cell). Ties go to the lowest minimum wage.
pub fn optimal_mw_per_tax(surface: &WelfareSurface) -> Vec<Option<TaxOptimum>> {
    let g = &surface.grid;
    (0..g.n_tax())
        .map(|k| {
            let (tau_l, t) = g.tax_pair(k);
            let mut best: Option<TaxOptimum> = None;
            for j in 0..g.n_mw() {
                let Some(sw) = surface.sw(k, j) else { continue };
                match &mut best {
                    None => {
                        best = Some(TaxOptimum {
                            tau_l,
                            t,
                            mw: g.mw_values_hourly[j],
                            sw,
                            tie: false,
                        })
                    }
                    Some(b) if sw > b.sw => {
                        b.mw = g.mw_values_hourly[j];
                        b.sw = sw;
                        b.tie = false;
                    }
                    Some(b) if sw == b.sw => b.tie = true,
                    Some(_) => {}
                }
            }
            best
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JointOptimum {
    pub tau_l: f64,
    pub t: f64,
    pub mw: f64,
    pub sw: f64,
    pub tie: bool,
}

/// Global argmax over feasible cells. Ties: smaller t, then smaller
/// |τ_l|, then lower minimum wage.
pub fn joint_optimum(surface: &WelfareSurface) -> Result<JointOptimum> {
    let key = |c: &Cell| (c.t, c.tau_l.abs(), c.mw);
    let mut best: Option<JointOptimum> = None;
    for c in surface.cells.iter() {
        let Some(sw) = c.sw else { continue };
        let cand = JointOptimum {
            tau_l: c.tau_l,
            t: c.t,
            mw: c.mw,
            sw,
            tie: false,
        };
        best = Some(match best {
            None => cand,
            Some(b) if sw > b.sw => cand,
            Some(b) if sw == b.sw => {
                if key(c) < (b.t, b.tau_l.abs(), b.mw) {
                    JointOptimum { tie: true, ..cand }
                } else {
                    JointOptimum { tie: true, ..b }
                }
            }
            Some(b) => b,
        });
    }
    best.ok_or_else(|| Error::Infeasible("no feasible cell on the policy grid".into()))
}

/// A path is unimodal when it rises weakly to its maximum and falls weakly
/// afterwards.
pub fn is_unimodal(path: &[f64]) -> bool {
    let Some(peak) = path
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0)))
        .map(|(i, _)| i)
    else {
        return true;
    };
    path[..=peak].windows(2).all(|w| w[0] <= w[1]) && path[peak..].windows(2).all(|w| w[0] >= w[1])
}

/// Checks on the optimal minimum wages: the optimum should weakly rise as
/// t falls (fixed τ_l) and as τ_l falls (fixed t). Returns the violating
/// neighbour pairs as `(tau_l, t)` of the pair with the lower optimum.
#[derive(Debug, Clone, PartialEq, Serialize, Default)]
pub struct MonotonicityReport {
    pub along_t: Vec<((f64, f64), (f64, f64))>,
    pub along_tau_l: Vec<((f64, f64), (f64, f64))>,
}

impl MonotonicityReport {
    pub fn holds(&self) -> bool {
        self.along_t.is_empty() && self.along_tau_l.is_empty()
    }
}

pub fn optimal_mw_monotonicity(
    grid: &PolicyGrid,
    optima: &[Option<TaxOptimum>],
) -> MonotonicityReport {
    let nt = grid.t_values.len();
    let at = |i: usize, j: usize| optima[i * nt + j].as_ref().map(|o| o.mw);
    let mut rep = MonotonicityReport::default();
    for i in 0..grid.tau_l_values.len() {
        for j in 0..nt {
            let here = (grid.tau_l_values[i], grid.t_values[j]);
            // Lower t must not lower the optimum.
            if j + 1 < nt {
                if let (Some(lo_t), Some(hi_t)) = (at(i, j), at(i, j + 1)) {
                    if lo_t < hi_t {
                        rep.along_t
                            .push((here, (grid.tau_l_values[i], grid.t_values[j + 1])));
                    }
                }
            }
            if i + 1 < grid.tau_l_values.len() {
                if let (Some(lo_tau), Some(hi_tau)) = (at(i, j), at(i + 1, j)) {
                    if lo_tau < hi_tau {
                        rep.along_tau_l
                            .push((here, (grid.tau_l_values[i + 1], grid.t_values[j])));
                    }
                }
            }
        }
    }
    rep
}

/// Non-binding invariance: within each tax pair, every feasible cell whose
/// minimum wage binds in neither sector has the same welfare. Returns the
/// largest deviation found.
pub fn non_binding_spread(surface: &WelfareSurface) -> f64 {
    let g = &surface.grid;
    let mut worst = 0.0f64;
    for k in 0..g.n_tax() {
        let sws: Vec<f64> = (0..g.n_mw())
            .map(|j| surface.cell(k, j))
            .filter(|c| c.mw_binding_s == Some(false) && c.mw_binding_m == Some(false))
            .filter_map(|c| c.sw)
            .collect();
        if let (Some(lo), Some(hi)) = (
            sws.iter().copied().reduce(f64::min),
            sws.iter().copied().reduce(f64::max),
        ) {
            worst = worst.max(hi - lo);
        }
    }
    worst
}

fn fmt(v: f64) -> String {
    format!("{v:?}")
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn optf(v: Option<f64>) -> String {
    v.map(fmt).unwrap_or_default()
}

fn csv_err(e: csv::Error) -> Error {
    Error::Data(e.to_string())
}

pub fn write_surface_csv<W: Write>(out: W, surface: &WelfareSurface) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "tau_l",
        "t",
        "tau_h",
        "mw",
        "feasible",
        "sw",
        "y0",
        "wage_S",
        "wage_M",
        "mw_binding_S",
        "mw_binding_M",
        "unemployment_l",
        "unemployment_h",
        "participation_l",
        "participation_h",
        "error",
    ])
    .map_err(csv_err)?;
    for c in &surface.cells {
        w.write_record([
            fmt(c.tau_l),
            fmt(c.t),
            fmt(surface.grid.tau_h),
            fmt(c.mw),
            c.feasible.to_string(),
            optf(c.sw),
            optf(c.y0),
            optf(c.wage_s),
            optf(c.wage_m),
            opt(c.mw_binding_s),
            opt(c.mw_binding_m),
            optf(c.unemployment_l),
            optf(c.unemployment_h),
            optf(c.participation_l),
            optf(c.participation_h),
            c.error.clone().unwrap_or_default(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::Data(e.to_string()))
}

pub fn write_envelope_csv<W: Write>(out: W, env: &Envelope) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["mw", "tau_l", "t", "sw", "tie"])
        .map_err(csv_err)?;
    for p in env.points.iter().flatten() {
        w.write_record([
            fmt(p.mw),
            fmt(p.tau_l),
            fmt(p.t),
            fmt(p.sw),
            p.tie.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::Data(e.to_string()))
}

pub fn write_optima_csv<W: Write>(out: W, optima: &[Option<TaxOptimum>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["tau_l", "t", "mw", "sw", "tie"])
        .map_err(csv_err)?;
    for o in optima.iter().flatten() {
        w.write_record([
            fmt(o.tau_l),
            fmt(o.t),
            fmt(o.mw),
            fmt(o.sw),
            o.tie.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::Data(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_axes_have_published_counts() {
        let g = PolicyGrid::from_config(&GridConfig::default()).unwrap();
        assert_eq!(g.tau_l_values.len(), 14);
        assert_eq!(g.t_values.len(), 11);
        assert_eq!(g.n_tax(), 154);
        assert_eq!(g.n_mw(), 53);
        assert!(g.t_values.contains(&0.35));
        assert!(g.mw_values_hourly.contains(&12.0));
        assert_eq!(g.tau_l_values[0], -1.0);
    }

    #[test]
    fn unimodality() {
        assert!(is_unimodal(&[1.0, 2.0, 3.0, 3.0, 1.0]));
        assert!(is_unimodal(&[3.0, 2.0]));
        assert!(!is_unimodal(&[1.0, 3.0, 2.0, 4.0]));
    }
}
