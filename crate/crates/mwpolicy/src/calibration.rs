//! Moment computation and simulated-moments estimation of the fourteen
//! free parameters (seven per skill/sector block).

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{CalibrationConfig, Config};
use crate::equilibrium::{solve_sector, SolverOptions};
use crate::model::{ModelParams, Policy, Sector};
use crate::nelder_mead::{self, NelderMeadOptions};
use crate::{Error, Result};

/// Moment keys in storage order: low/high (or S/M) pairs.
pub const MOMENT_KEYS: [&str; 14] = [
    "unemployment_l",
    "unemployment_h",
    "job_filling_S",
    "job_filling_M",
    "emp_per_establishment_S",
    "emp_per_establishment_M",
    "earnings_l",
    "earnings_h",
    "participation_l",
    "participation_h",
    "profit_S",
    "profit_M",
    "markdown_l",
    "markdown_h",
];

/// Estimated parameters, services/low-skill block first.
pub const PARAM_KEYS: [&str; 14] = [
    "delta0_l", "delta1_l", "lambda_l", "K_S", "psi_S", "kappa0_l", "kappa1_l", "delta0_h",
    "delta1_h", "lambda_h", "K_M", "psi_M", "kappa0_h", "kappa1_h",
];

const BLOCK: usize = 7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentSet {
    pub unemployment: [f64; 2],
    pub job_filling: [f64; 2],
    pub emp_per_establishment: [f64; 2],
    /// Annual wage of the employed (see the crate README for why this is
    /// not scaled by the employment rate).
    pub earnings: [f64; 2],
    pub participation: [f64; 2],
    pub profit_per_establishment: [f64; 2],
    pub markdown: [f64; 2],
}

impl MomentSet {
    pub fn to_array(&self) -> [f64; 14] {
        let mut out = [0.0; 14];
        let pairs = [
            self.unemployment,
            self.job_filling,
            self.emp_per_establishment,
            self.earnings,
            self.participation,
            self.profit_per_establishment,
            self.markdown,
        ];
        for (i, p) in pairs.iter().enumerate() {
            out[2 * i] = p[0];
            out[2 * i + 1] = p[1];
        }
        out
    }

    pub fn from_array(a: [f64; 14]) -> Self {
        let p = |i: usize| [a[2 * i], a[2 * i + 1]];
        MomentSet {
            unemployment: p(0),
            job_filling: p(1),
            emp_per_establishment: p(2),
            earnings: p(3),
            participation: p(4),
            profit_per_establishment: p(5),
            markdown: p(6),
        }
    }

    /// Data column of the calibration table.
    pub fn table_data() -> Self {
        Self::from_array([
            0.049, 0.024, 0.825, 0.774, 9.90, 29.89, 13.20, 82.42, 0.570, 0.737, 198.08, 314.64,
            0.72, 0.72,
        ])
    }

    /// Model column of the calibration table.
    pub fn table_model() -> Self {
        Self::from_array([
            0.046, 0.054, 0.752, 0.831, 9.94, 25.86, 13.20, 76.85, 0.583, 0.675, 199.94, 345.96,
            0.516, 0.794,
        ])
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        MOMENT_KEYS
            .iter()
            .position(|k| *k == key)
            .map(|i| self.to_array()[i])
    }

    pub fn validate(&self) -> Result<()> {
        let rates = [self.unemployment, self.job_filling, self.participation];
        if rates.iter().flatten().any(|r| !(0.0..=1.0).contains(r)) {
            return Err(Error::Domain("rate moment outside [0,1]".into()));
        }
        if self.markdown.iter().any(|m| !(*m > 0.0 && *m < 1.0)) {
            return Err(Error::Domain("markdown outside (0,1)".into()));
        }
        Ok(())
    }
}

/// The seven moments produced by one sector, in block order.
fn sector_moments(
    params: &ModelParams<f64>,
    sector: Sector,
    policy: &Policy<f64>,
    opts: &SolverOptions<f64>,
) -> Result<[f64; BLOCK]> {
    let sol = solve_sector(params, sector, policy, policy.y0, opts)?;
    let (s, w) = (&sol.sector, &sol.workers);
    let emp = s.employment / params.sector(sector).mass;
    if !(s.profit_pre_tax > 1e-9 && emp > 1e-12) {
        return Err(Error::Infeasible(format!(
            "degenerate {} sector: profit {:.3e}, employment per establishment {:.3e}",
            sector.label(),
            s.profit_pre_tax,
            emp
        )));
    }
    Ok([
        w.unemployment_rate,
        s.q,
        emp,
        s.wage,
        w.participation_rate,
        s.profit_pre_tax,
        s.wage / s.phi_n,
    ])
}

fn merge(s: [f64; BLOCK], m: [f64; BLOCK]) -> MomentSet {
    let mut a = [0.0; 14];
    for i in 0..BLOCK {
        a[2 * i] = s[i];
        a[2 * i + 1] = m[i];
    }
    MomentSet::from_array(a)
}

/// Moments of the equilibrium at `policy`. Allocations depend on `U - y0`
/// only, so the lump sum in `policy` is irrelevant and no budget closure
/// is needed.
pub fn compute_moments(
    params: &ModelParams<f64>,
    policy: &Policy<f64>,
    opts: &SolverOptions<f64>,
) -> Result<MomentSet> {
    let s = sector_moments(params, Sector::Services, policy, opts)?;
    let m = sector_moments(params, Sector::Manufacturing, policy, opts)?;
    Ok(merge(s, m))
}

fn check_weights(targets: &MomentSet, weights: &[f64; 14]) -> Result<()> {
    if weights.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
        return Err(Error::Config(
            "moment weights must be finite and nonnegative".into(),
        ));
    }
    if !weights.iter().any(|w| *w > 0.0) {
        return Err(Error::Config(
            "at least one moment weight must be positive".into(),
        ));
    }
    for (i, t) in targets.to_array().iter().enumerate() {
        if weights[i] > 0.0 && (*t == 0.0 || !t.is_finite()) {
            return Err(Error::Config(format!(
                "target {} is {t}; relative deviation undefined",
                MOMENT_KEYS[i]
            )));
        }
    }
    Ok(())
}

fn partial_loss(model: &[f64], targets: &[f64], weights: &[f64]) -> f64 {
    model
        .iter()
        .zip(targets)
        .zip(weights)
        .filter(|(_, w)| **w > 0.0)
        .map(|((m, t), w)| w * ((m - t) / t).powi(2))
        .sum()
}

/// `Σ w_i ((m_i - t_i)/t_i)^2`.
pub fn loss(model: &MomentSet, targets: &MomentSet, weights: &[f64; 14]) -> Result<f64> {
    check_weights(targets, weights)?;
    Ok(partial_loss(
        &model.to_array(),
        &targets.to_array(),
        weights,
    ))
}

pub fn get_param(p: &ModelParams<f64>, key: &str) -> Option<f64> {
    Some(match key {
        "delta0_l" => p.low.delta0,
        "delta1_l" => p.low.delta1,
        "lambda_l" => p.low.lambda,
        "kappa0_l" => p.low.kappa0,
        "kappa1_l" => p.low.kappa1,
        "delta0_h" => p.high.delta0,
        "delta1_h" => p.high.delta1,
        "lambda_h" => p.high.lambda,
        "kappa0_h" => p.high.kappa0,
        "kappa1_h" => p.high.kappa1,
        "K_S" => p.services.mass,
        "psi_S" => p.services.psi,
        "K_M" => p.manufacturing.mass,
        "psi_M" => p.manufacturing.psi,
        _ => return None,
    })
}

pub fn set_param(p: &mut ModelParams<f64>, key: &str, v: f64) -> Result<()> {
    let slot = match key {
        "delta0_l" => &mut p.low.delta0,
        "delta1_l" => &mut p.low.delta1,
        "lambda_l" => &mut p.low.lambda,
        "kappa0_l" => &mut p.low.kappa0,
        "kappa1_l" => &mut p.low.kappa1,
        "delta0_h" => &mut p.high.delta0,
        "delta1_h" => &mut p.high.delta1,
        "lambda_h" => &mut p.high.lambda,
        "kappa0_h" => &mut p.high.kappa0,
        "kappa1_h" => &mut p.high.kappa1,
        "K_S" => &mut p.services.mass,
        "psi_S" => &mut p.services.psi,
        "K_M" => &mut p.manufacturing.mass,
        "psi_M" => &mut p.manufacturing.psi,
        _ => {
            return Err(Error::Config(format!(
                "unknown calibration parameter `{key}`"
            )))
        }
    };
    *slot = v;
    Ok(())
}

/// Default search box for a parameter key.
pub fn default_bounds(key: &str) -> (f64, f64) {
    match key.split('_').next().unwrap_or("") {
        "delta0" => (0.3, 1.5),
        "delta1" => (0.05, 0.95),
        "lambda" => (1.0, 500.0),
        "K" => (1e-4, 1.0),
        "psi" => (1.0, 500.0),
        "kappa0" => (1e-3, 50.0),
        "kappa1" => (0.05, 5.0),
        _ => (f64::MIN_POSITIVE, f64::MAX),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationSpec {
    pub targets: MomentSet,
    pub weights: [f64; 14],
    pub seed_params: ModelParams<f64>,
    /// Boxes in [`PARAM_KEYS`] order.
    pub bounds: [(f64, f64); 14],
    pub policy: Policy<f64>,
    pub solver: SolverOptions<f64>,
    pub max_evals: usize,
    pub restarts: usize,
    pub multistart: usize,
    pub tolerance: f64,
    pub separable: bool,
    /// Seed of the Latin-hypercube multi-start draws.
    pub rng_seed: u64,
}

impl CalibrationSpec {
    pub fn new(targets: MomentSet, seed_params: ModelParams<f64>) -> Self {
        let c = CalibrationConfig::default();
        CalibrationSpec {
            targets,
            weights: [1.0; 14],
            seed_params,
            bounds: PARAM_KEYS.map(default_bounds),
            policy: Policy::baseline(),
            solver: SolverOptions::default(),
            max_evals: c.max_evals,
            restarts: c.restarts,
            multistart: c.multistart,
            tolerance: c.tolerance,
            separable: c.separable,
            rng_seed: 0,
        }
    }

    pub fn from_config(cfg: &Config, rng_seed: u64) -> Result<Self> {
        let c = &cfg.calibration;
        let base = match c.target_set.as_str() {
            "data" | "custom" => MomentSet::table_data(),
            "model" => MomentSet::table_model(),
            other => return Err(Error::Config(format!("unknown target_set `{other}`"))),
        };
        let mut targets = base.to_array();
        if c.target_set == "custom" {
            if let Some(k) = MOMENT_KEYS.iter().find(|k| !c.targets.contains_key(**k)) {
                return Err(Error::Config(format!("custom target set is missing `{k}`")));
            }
        }
        for (k, v) in &c.targets {
            let i = MOMENT_KEYS
                .iter()
                .position(|m| m == k)
                .ok_or_else(|| Error::Config(format!("unknown moment `{k}`")))?;
            targets[i] = *v;
        }
        let mut weights = [1.0; 14];
        for (k, v) in &c.weights {
            let i = MOMENT_KEYS
                .iter()
                .position(|m| m == k)
                .ok_or_else(|| Error::Config(format!("unknown moment `{k}`")))?;
            weights[i] = *v;
        }
        let mut bounds = PARAM_KEYS.map(default_bounds);
        for (k, [lo, hi]) in &c.bounds {
            let i = PARAM_KEYS
                .iter()
                .position(|m| m == k)
                .ok_or_else(|| Error::Config(format!("unknown calibration parameter `{k}`")))?;
            bounds[i] = (*lo, *hi);
        }
        let spec = CalibrationSpec {
            targets: MomentSet::from_array(targets),
            weights,
            seed_params: cfg.model_params()?,
            bounds,
            policy: cfg.policy.to_policy()?,
            solver: cfg.solver.to_options()?,
            max_evals: c.max_evals,
            restarts: c.restarts,
            multistart: c.multistart,
            tolerance: c.tolerance,
            separable: c.separable,
            rng_seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        check_weights(&self.targets, &self.weights)?;
        for (i, key) in PARAM_KEYS.iter().enumerate() {
            let (lo, hi) = self.bounds[i];
            if !(lo < hi && lo.is_finite() && hi.is_finite()) {
                return Err(Error::Config(format!(
                    "bad bounds [{lo}, {hi}] for `{key}`"
                )));
            }
            let v = get_param(&self.seed_params, key).expect("known key");
            if !(v >= lo && v <= hi) {
                return Err(Error::Config(format!(
                    "seed {key}={v} outside [{lo}, {hi}]"
                )));
            }
        }
        if self.max_evals == 0 {
            return Err(Error::Config("max_evals must be positive".into()));
        }
        Ok(())
    }
}

/// One objective evaluation in the run log.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRow {
    pub eval: usize,
    pub start: usize,
    pub loss: f64,
    pub best_loss: f64,
    pub params: [f64; 14],
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationResult {
    pub params: ModelParams<f64>,
    pub moments: MomentSet,
    pub loss: f64,
    pub converged: bool,
    pub evaluations: usize,
    pub trace: Vec<TraceRow>,
}

fn to_unbounded(x: f64, (lo, hi): (f64, f64)) -> f64 {
    let s = ((x - lo) / (hi - lo)).clamp(1e-12, 1.0 - 1e-12);
    (s / (1.0 - s)).ln()
}

fn to_bounded(u: f64, (lo, hi): (f64, f64)) -> f64 {
    let s = 1.0 / (1.0 + (-u).exp());
    // Keep strictly inside the box even when the logistic saturates.
    (lo + (hi - lo) * s).clamp(lo, hi)
}

fn param_vector(p: &ModelParams<f64>) -> [f64; 14] {
    PARAM_KEYS.map(|k| get_param(p, k).expect("known key"))
}

fn with_params(base: &ModelParams<f64>, keys: &[&str], values: &[f64]) -> Option<ModelParams<f64>> {
    let mut p = *base;
    for (k, v) in keys.iter().zip(values) {
        set_param(&mut p, k, *v).ok()?;
    }
    p.validate().ok()?;
    Some(p)
}

fn block_indices(sector: Sector) -> [usize; BLOCK] {
    let off = match sector {
        Sector::Services => 0,
        Sector::Manufacturing => 1,
    };
    std::array::from_fn(|i| 2 * i + off)
}

/// Runs one estimation from `start` and returns its result with a
/// start-local trace.
fn estimate_from(
    spec: &CalibrationSpec,
    start: &ModelParams<f64>,
    start_id: usize,
) -> CalibrationResult {
    let targets = spec.targets.to_array();
    let nm_opts = |evals: usize| NelderMeadOptions {
        max_evals: evals,
        f_tol: spec.tolerance,
        x_tol: 1e-10,
        initial_step: 0.1,
        restarts: spec.restarts,
    };
    let mut trace: Vec<TraceRow> = Vec::new();
    let mut best = f64::INFINITY;
    let mut push = |trace: &mut Vec<TraceRow>, p: &ModelParams<f64>, l: f64| {
        best = best.min(l);
        trace.push(TraceRow {
            eval: trace.len(),
            start: start_id,
            loss: l,
            best_loss: best,
            params: param_vector(p),
        });
    };

    let blocks: Vec<(Vec<usize>, Vec<Sector>)> = if spec.separable {
        vec![
            ((0..BLOCK).collect(), vec![Sector::Services]),
            ((BLOCK..2 * BLOCK).collect(), vec![Sector::Manufacturing]),
        ]
    } else {
        vec![((0..2 * BLOCK).collect(), Sector::ALL.to_vec())]
    };

    // Per-sector loss contributions at the incumbent.
    let sector_loss = |p: &ModelParams<f64>, sector: Sector| -> f64 {
        let idx = block_indices(sector);
        let w: Vec<f64> = idx.iter().map(|&i| spec.weights[i]).collect();
        if w.iter().all(|w| *w == 0.0) {
            return 0.0;
        }
        let t: Vec<f64> = idx.iter().map(|&i| targets[i]).collect();
        match sector_moments(p, sector, &spec.policy, &spec.solver) {
            Ok(m) => partial_loss(&m, &t, &w),
            Err(_) => f64::INFINITY,
        }
    };

    let mut current = *start;
    let mut contrib = [
        sector_loss(&current, Sector::Services),
        sector_loss(&current, Sector::Manufacturing),
    ];
    let mut converged = true;
    let mut evals_left = spec.max_evals;
    for (bi, (param_idx, sectors)) in blocks.iter().enumerate() {
        let keys: Vec<&str> = param_idx.iter().map(|&i| PARAM_KEYS[i]).collect();
        let bounds: Vec<(f64, f64)> = param_idx.iter().map(|&i| spec.bounds[i]).collect();
        let x0: Vec<f64> = keys
            .iter()
            .zip(&bounds)
            .map(|(k, b)| to_unbounded(get_param(&current, k).expect("known key"), *b))
            .collect();
        let fixed: f64 = Sector::ALL
            .iter()
            .enumerate()
            .filter(|(_, s)| !sectors.contains(s))
            .map(|(i, _)| contrib[i])
            .sum();
        let decode = |u: &[f64]| -> Vec<f64> {
            u.iter()
                .zip(&bounds)
                .map(|(u, b)| to_bounded(*u, *b))
                .collect()
        };
        let objective = |u: &[f64]| -> f64 {
            match with_params(&current, &keys, &decode(u)) {
                Some(p) => sectors.iter().map(|s| sector_loss(&p, *s)).sum::<f64>() + fixed,
                None => f64::INFINITY,
            }
        };
        // Split the evaluation budget evenly over the remaining blocks.
        let budget = evals_left / (blocks.len() - bi);
        let r = nelder_mead::minimize(objective, &x0, &nm_opts(budget), |u, l| {
            let p = with_params(&current, &keys, &decode(u)).unwrap_or(current);
            push(&mut trace, &p, l);
        });
        evals_left -= r.evals.min(evals_left);
        converged &= r.converged;
        if let Some(p) = with_params(&current, &keys, &decode(&r.x)) {
            current = p;
        }
        for s in sectors {
            let i = Sector::ALL.iter().position(|x| x == s).expect("sector");
            contrib[i] = sector_loss(&current, *s);
        }
    }

    let moments = compute_moments(&current, &spec.policy, &spec.solver);
    let (moments, loss) = match moments {
        Ok(m) => {
            let l = partial_loss(&m.to_array(), &targets, &spec.weights);
            (m, l)
        }
        Err(_) => (MomentSet::from_array([f64::NAN; 14]), f64::INFINITY),
    };
    CalibrationResult {
        params: current,
        moments,
        loss,
        converged,
        evaluations: trace.len(),
        trace,
    }
}

/// Latin-hypercube draws inside the parameter boxes (in the logistic
/// coordinates, so draws avoid the box edges).
fn lhs_starts(spec: &CalibrationSpec) -> Vec<ModelParams<f64>> {
    let n = spec.multistart;
    if n == 0 {
        return Vec::new();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(14);
    for _ in 0..14 {
        let mut strata: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            let j = rng.random_range(0..=i);
            strata.swap(i, j);
        }
        cols.push(
            strata
                .iter()
                .map(|&s| (s as f64 + rng.random::<f64>()) / n as f64)
                .collect(),
        );
    }
    (0..n)
        .map(|j| {
            let mut p = spec.seed_params;
            for (i, key) in PARAM_KEYS.iter().enumerate() {
                let s = cols[i][j].clamp(0.05, 0.95);
                let (lo, hi) = spec.bounds[i];
                set_param(&mut p, key, lo + (hi - lo) * s).expect("known key");
            }
            p
        })
        .collect()
}

/// Minimizes the moment loss from the seed and any multi-start points.
/// Starts run concurrently; the winner is the lowest final loss, ties to
/// the earliest start. The returned trace concatenates all starts in start
/// order with a global running best.
pub fn estimate(spec: &CalibrationSpec) -> Result<CalibrationResult> {
    spec.validate()?;
    let mut starts = vec![spec.seed_params];
    starts.extend(lhs_starts(spec));
    let results: Vec<CalibrationResult> = starts
        .par_iter()
        .enumerate()
        .map(|(i, p)| estimate_from(spec, p, i))
        .collect();
    let mut winner = 0;
    for (i, r) in results.iter().enumerate() {
        if r.loss < results[winner].loss {
            winner = i;
        }
    }
    let mut trace = Vec::new();
    let mut best = f64::INFINITY;
    for r in &results {
        for row in &r.trace {
            best = best.min(row.loss);
            trace.push(TraceRow {
                eval: trace.len(),
                best_loss: best,
                ..row.clone()
            });
        }
    }
    let w = &results[winner];
    if !w.loss.is_finite() {
        return Err(Error::Infeasible(
            "no start produced a solvable calibration".into(),
        ));
    }
    Ok(CalibrationResult {
        params: w.params,
        moments: w.moments,
        loss: w.loss,
        converged: w.converged,
        evaluations: trace.len(),
        trace,
    })
}

/// Writes the run log: evaluation index, start, loss, best loss and the
/// parameter values.
pub fn write_trace_csv<W: Write>(out: W, trace: &[TraceRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["eval", "start", "loss", "best_loss"];
    header.extend(PARAM_KEYS);
    w.write_record(&header)
        .map_err(|e| Error::Data(e.to_string()))?;
    for row in trace {
        let mut rec = vec![
            row.eval.to_string(),
            row.start.to_string(),
            fmt(row.loss),
            fmt(row.best_loss),
        ];
        rec.extend(row.params.iter().map(|v| fmt(*v)));
        w.write_record(&rec)
            .map_err(|e| Error::Data(e.to_string()))?;
    }
    w.flush().map_err(|e| Error::Data(e.to_string()))?;
    Ok(())
}

/// Shortest round-trip representation.
fn fmt(v: f64) -> String {
    format!("{v:?}")
}
