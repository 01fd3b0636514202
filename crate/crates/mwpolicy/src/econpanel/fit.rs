//! Weighted least squares with absorbed fixed effects and CR1
//! cluster-robust covariance.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::stack::{StackRow, StackedPanel, FLAG_NAMES};
use crate::{Error, Result};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959963984540054;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeDim {
    Event,
    State,
    Year,
    Region,
    Division,
    Industry,
}

impl FeDim {
    fn key(self, r: &StackRow) -> String {
        match self {
            FeDim::Event => r.event.to_string(),
            FeDim::State => r.state.clone(),
            FeDim::Year => r.year.to_string(),
            FeDim::Region => r.region.clone(),
            FeDim::Division => r.division.clone(),
            FeDim::Industry => r.industry.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Design {
    /// One coefficient per relative year, -1 omitted.
    #[default]
    EventStudy,
    /// A single treated-by-post coefficient.
    Did,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ClusterKey {
    #[default]
    State,
    StateIndustry,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitSpec {
    pub design: Design,
    /// Each entry is one fixed effect, the product of its dimensions.
    pub fe: Vec<Vec<FeDim>>,
    pub cluster: ClusterKey,
    pub control_flags: bool,
    pub demean_tol: f64,
    pub max_passes: usize,
}

impl Default for FitSpec {
    /// State-by-event and year-by-event effects.
    fn default() -> Self {
        FitSpec {
            design: Design::EventStudy,
            fe: vec![
                vec![FeDim::Event, FeDim::State],
                vec![FeDim::Event, FeDim::Year],
            ],
            cluster: ClusterKey::State,
            control_flags: true,
            demean_tol: 1e-10,
            max_passes: 10_000,
        }
    }
}

impl FitSpec {
    /// State-by-industry-by-event and year-by-event effects, clustered by
    /// state and industry.
    pub fn industry(design: Design) -> Self {
        FitSpec {
            design,
            fe: vec![
                vec![FeDim::Event, FeDim::State, FeDim::Industry],
                vec![FeDim::Event, FeDim::Year],
            ],
            cluster: ClusterKey::StateIndustry,
            ..FitSpec::default()
        }
    }
}

/// Group index of every row for one fixed effect.
#[derive(Debug, Clone, PartialEq)]
pub struct Groups {
    pub ids: Vec<usize>,
    pub n: usize,
}

impl Groups {
    pub fn from_keys<K: Ord + Clone>(keys: &[K]) -> Self {
        let mut map: BTreeMap<K, usize> = BTreeMap::new();
        let ids = keys
            .iter()
            .map(|k| {
                let next = map.len();
                *map.entry(k.clone()).or_insert(next)
            })
            .collect();
        Groups { ids, n: map.len() }
    }
}

/// Weighted alternating projections. Returns the number of passes.
pub fn demean(
    x: &mut [f64],
    w: &[f64],
    fes: &[Groups],
    tol: f64,
    max_passes: usize,
) -> Result<usize> {
    if fes.is_empty() {
        return Ok(0);
    }
    let scale = x.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let wsum: Vec<Vec<f64>> = fes
        .iter()
        .map(|g| {
            let mut s = vec![0.0; g.n];
            for (i, &id) in g.ids.iter().enumerate() {
                s[id] += w[i];
            }
            s
        })
        .collect();
    let mut worst = f64::INFINITY;
    for pass in 1..=max_passes {
        worst = 0.0;
        for (g, ws) in fes.iter().zip(&wsum) {
            let mut m = vec![0.0; g.n];
            for (i, &id) in g.ids.iter().enumerate() {
                m[id] += w[i] * x[i];
            }
            for (mi, wi) in m.iter_mut().zip(ws) {
                *mi = if *wi > 0.0 { *mi / wi } else { 0.0 };
                worst = worst.max(mi.abs());
            }
            for (i, &id) in g.ids.iter().enumerate() {
                x[i] -= m[id];
            }
        }
        if worst <= tol * scale {
            return Ok(pass);
        }
    }
    Err(Error::solver(format!(
        "fixed-effect demeaning did not converge in {max_passes} passes; last group mean {worst:.3e}"
    )))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WlsFit {
    pub names: Vec<String>,
    pub coef: Vec<f64>,
    pub se: Vec<f64>,
    pub vcov: Vec<Vec<f64>>,
    /// Columns removed as collinear with the fixed effects or earlier
    /// columns.
    pub dropped: Vec<String>,
    pub n_obs: usize,
    pub n_clusters: usize,
    pub passes: usize,
}

/// WLS of `y` on the columns `x` after absorbing `fes`, with CR1
/// covariance clustered on `clusters`. The small-sample factor counts the
/// slope regressors only: `G/(G-1) (N-1)/(N-K)`.
#[allow(clippy::too_many_arguments)]
pub fn fit_wls(
    y: &[f64],
    x: &[Vec<f64>],
    names: &[String],
    w: &[f64],
    fes: &[Groups],
    clusters: &Groups,
    tol: f64,
    max_passes: usize,
) -> Result<WlsFit> {
    let n = y.len();
    if x.iter().any(|c| c.len() != n) || w.len() != n || clusters.ids.len() != n {
        return Err(Error::Data("design columns differ in length".into()));
    }
    if clusters.n < 2 {
        return Err(Error::Data(format!(
            "need at least two clusters, found {}",
            clusters.n
        )));
    }
    let mut yd = y.to_vec();
    let mut passes = demean(&mut yd, w, fes, tol, max_passes)?;
    let mut cols = Vec::with_capacity(x.len());
    for c in x {
        let mut c = c.clone();
        passes = passes.max(demean(&mut c, w, fes, tol, max_passes)?);
        cols.push(c);
    }

    // Sequential weighted Gram-Schmidt to find collinear columns.
    let dot = |a: &[f64], b: &[f64]| {
        a.iter()
            .zip(b)
            .zip(w)
            .map(|((a, b), w)| a * b * w)
            .sum::<f64>()
    };
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut keep = Vec::new();
    let mut dropped = Vec::new();
    for (j, c) in cols.iter().enumerate() {
        let norm0 = dot(&x[j], &x[j]);
        let mut r = c.clone();
        for q in &basis {
            let p = dot(&r, q);
            r.iter_mut().zip(q).for_each(|(r, q)| *r -= p * q);
        }
        let nr = dot(&r, &r);
        if nr <= 1e-10 * norm0.max(f64::MIN_POSITIVE) || nr == 0.0 {
            dropped.push(names[j].clone());
            continue;
        }
        let s = nr.sqrt();
        basis.push(r.iter().map(|v| v / s).collect());
        keep.push(j);
    }
    let k = keep.len();
    if k == 0 {
        return Err(Error::Singular(
            "every regressor is collinear with the fixed effects".into(),
        ));
    }
    if n <= k {
        return Err(Error::Singular(format!(
            "{n} observations for {k} regressors"
        )));
    }

    let xm = DMatrix::from_fn(n, k, |i, j| cols[keep[j]][i]);
    let wv = DVector::from_column_slice(w);
    let xw = DMatrix::from_fn(n, k, |i, j| xm[(i, j)] * w[i]);
    let bread = xw.transpose() * &xm;
    let chol = bread.clone().cholesky().ok_or_else(|| {
        Error::Singular("weighted normal equations are not positive definite".into())
    })?;
    let yv = DVector::from_column_slice(&yd);
    let beta = chol.solve(&(xw.transpose() * &yv));
    let u = &yv - &xm * &beta;

    let mut scores = DMatrix::<f64>::zeros(clusters.n, k);
    for i in 0..n {
        let g = clusters.ids[i];
        for j in 0..k {
            scores[(g, j)] += xm[(i, j)] * wv[i] * u[i];
        }
    }
    let meat = scores.transpose() * &scores;
    let binv = chol.inverse();
    let g = clusters.n as f64;
    let c = g / (g - 1.0) * (n as f64 - 1.0) / (n as f64 - k as f64);
    let v = (&binv * meat * &binv) * c;

    Ok(WlsFit {
        names: keep.iter().map(|&j| names[j].clone()).collect(),
        coef: beta.iter().copied().collect(),
        se: (0..k).map(|j| v[(j, j)].max(0.0).sqrt()).collect(),
        vcov: (0..k)
            .map(|i| (0..k).map(|j| v[(i, j)]).collect())
            .collect(),
        dropped,
        n_obs: n,
        n_clusters: clusters.n,
        passes,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoefRow {
    pub name: String,
    /// Relative year for event-study coefficients.
    pub rel: Option<i32>,
    pub beta: f64,
    pub se: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateReport {
    pub design: Design,
    pub coefficients: Vec<CoefRow>,
    pub n_events: usize,
    pub n_obs: usize,
    pub n_clusters: usize,
    /// Mean change of the log real effective minimum wage at the events.
    pub dlog_mw: f64,
    /// Treatment coefficient (event study: mean of the post coefficients)
    /// divided by `dlog_mw`.
    pub elasticity: Option<f64>,
    pub dropped: Vec<String>,
}

impl EstimateReport {
    pub fn coef(&self, name: &str) -> Option<&CoefRow> {
        self.coefficients.iter().find(|c| c.name == name)
    }

    pub fn event_study(&self) -> Vec<&CoefRow> {
        self.coefficients
            .iter()
            .filter(|c| c.rel.is_some())
            .collect()
    }
}

pub fn implied_elasticity(beta: f64, dlog_mw: f64) -> Result<f64> {
    if !(dlog_mw > 0.0) {
        return Err(Error::Domain(format!(
            "log minimum wage change must be positive, got {dlog_mw}"
        )));
    }
    Ok(beta / dlog_mw)
}

pub fn rel_name(k: i32) -> String {
    format!("rel_{k}")
}

/// Regressor columns and names for a stack.
pub fn design_columns(stack: &StackedPanel, spec: &FitSpec) -> (Vec<String>, Vec<Vec<f64>>) {
    let ind = |b: bool| if b { 1.0 } else { 0.0 };
    let mut names = Vec::new();
    let mut cols = Vec::new();
    match spec.design {
        Design::EventStudy => {
            for k in (stack.window.0..=stack.window.1).filter(|k| *k != -1) {
                names.push(rel_name(k));
                cols.push(
                    stack
                        .rows
                        .iter()
                        .map(|r| ind(r.treated && r.rel == k))
                        .collect(),
                );
            }
        }
        Design::Did => {
            names.push("post".to_string());
            cols.push(
                stack
                    .rows
                    .iter()
                    .map(|r| ind(r.treated && r.rel >= 0))
                    .collect(),
            );
        }
    }
    if spec.control_flags {
        for (f, name) in FLAG_NAMES.iter().enumerate() {
            names.push(name.to_string());
            cols.push(stack.rows.iter().map(|r| ind(r.flags[f])).collect());
        }
    }
    (names, cols)
}

pub fn fe_groups(stack: &StackedPanel, spec: &FitSpec) -> Vec<Groups> {
    spec.fe
        .iter()
        .map(|dims| {
            let keys: Vec<Vec<String>> = stack
                .rows
                .iter()
                .map(|r| dims.iter().map(|d| d.key(r)).collect())
                .collect();
            Groups::from_keys(&keys)
        })
        .collect()
}

pub fn cluster_groups(stack: &StackedPanel, key: ClusterKey) -> Groups {
    let keys: Vec<(String, String)> = stack
        .rows
        .iter()
        .map(|r| match key {
            ClusterKey::State => (r.state.clone(), String::new()),
            ClusterKey::StateIndustry => (r.state.clone(), r.industry.clone()),
        })
        .collect();
    Groups::from_keys(&keys)
}

pub fn fit_fe(stack: &StackedPanel, spec: &FitSpec) -> Result<EstimateReport> {
    if stack.rows.is_empty() {
        return Err(Error::Data("stacked panel is empty".into()));
    }
    let (names, cols) = design_columns(stack, spec);
    let y: Vec<f64> = stack.rows.iter().map(|r| r.outcome).collect();
    let w: Vec<f64> = stack.rows.iter().map(|r| r.weight).collect();
    let fes = fe_groups(stack, spec);
    let clusters = cluster_groups(stack, spec.cluster);
    let fit = fit_wls(
        &y,
        &cols,
        &names,
        &w,
        &fes,
        &clusters,
        spec.demean_tol,
        spec.max_passes,
    )?;

    let row = |name: &str, rel: Option<i32>, beta: f64, se: f64| CoefRow {
        name: name.to_string(),
        rel,
        beta,
        se,
        ci_low: beta - Z95 * se,
        ci_high: beta + Z95 * se,
    };
    let mut coefficients = Vec::new();
    if spec.design == Design::EventStudy {
        for k in stack.window.0..=stack.window.1 {
            let name = rel_name(k);
            match fit.names.iter().position(|n| *n == name) {
                Some(j) => coefficients.push(row(&name, Some(k), fit.coef[j], fit.se[j])),
                None if k == -1 => coefficients.push(row(&name, Some(k), 0.0, 0.0)),
                None => {}
            }
        }
    }
    for (j, name) in fit.names.iter().enumerate() {
        if !name.starts_with("rel_") {
            coefficients.push(row(name, None, fit.coef[j], fit.se[j]));
        }
    }

    let dlog_mw = if stack.events.is_empty() {
        f64::NAN
    } else {
        stack.events.iter().map(|e| e.dlog_mw).sum::<f64>() / stack.events.len() as f64
    };
    let treatment = match spec.design {
        Design::Did => coefficients
            .iter()
            .find(|c| c.name == "post")
            .map(|c| c.beta),
        Design::EventStudy => {
            let post: Vec<f64> = coefficients
                .iter()
                .filter(|c| c.rel.is_some_and(|k| k >= 0))
                .map(|c| c.beta)
                .collect();
            (!post.is_empty()).then(|| post.iter().sum::<f64>() / post.len() as f64)
        }
    };
    let elasticity = treatment.and_then(|b| implied_elasticity(b, dlog_mw).ok());

    Ok(EstimateReport {
        design: spec.design,
        coefficients,
        n_events: stack.events.len(),
        n_obs: fit.n_obs,
        n_clusters: fit.n_clusters,
        dlog_mw,
        elasticity,
        dropped: fit.dropped,
    })
}
