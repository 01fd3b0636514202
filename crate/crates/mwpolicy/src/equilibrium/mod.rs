//! Decentralized equilibrium of the two-sector economy.
//!
//! Three nested layers:
//!
//! 1. firm FOCs at a given worker value (`firm`),
//! 2. the market fixed point in `U` where indifference, participation and
//!    tightness consistency `θ = K v / L_A` hold together (`solve_sector`),
//! 3. the lump sum `y0` closing the government budget (`close_budget`).
//!
//! Allocations depend on `y0` only through `x = U - y0`, so the budget
//! residual is affine in `y0`; the bracketing search still re-solves the
//! sectors at every trial value.

mod diagnostics;
mod firm;
pub(crate) mod newton;
mod welfare;

use serde::{Deserialize, Serialize};

pub use diagnostics::{
    check_efficiency, constrained_profit_derivative, profit_derivative_formula,
    solve_sector_at_wage, EfficiencyCheck, FocResiduals,
};
pub use welfare::{social_welfare, welfare_g, worker_integral, WelfareBreakdown};

use crate::model::{self, ModelParams, Policy, Sector, SkillParams};
use crate::scalar::f;
use crate::{lit, Error, Result, Scalar};
use firm::{FirmCtx, FirmSolution, Kin};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions<T> {
    /// Infinity-norm tolerance on the log-space firm FOC residuals.
    pub foc_tol: T,
    pub foc_max_iter: usize,
    /// Tolerance on the log tightness-consistency residual.
    pub market_tol: T,
    pub market_max_iter: usize,
    pub y0_lo: T,
    pub y0_hi: T,
    pub y0_max_iter: usize,
    /// Relative tolerance on the budget residual.
    pub budget_rel_tol: T,
    /// The minimum wage binds iff `w* < w̄ - bind_margin` (annual units).
    pub bind_margin: T,
}

impl<T: Scalar> Default for SolverOptions<T> {
    fn default() -> Self {
        SolverOptions {
            foc_tol: lit(1e-12),
            foc_max_iter: 100,
            market_tol: lit(1e-13),
            market_max_iter: 100,
            y0_lo: T::zero(),
            y0_hi: lit(200.0),
            y0_max_iter: 200,
            budget_rel_tol: lit(1e-12),
            bind_margin: lit(1e-12),
        }
    }
}

/// Welfare accounting choices that the calibration leaves open.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WelfareOptions<T> {
    pub zeta: T,
    /// Capitalists receive the universal lump sum (and are counted among
    /// its recipients in the budget).
    pub capitalists_receive_y0: bool,
    /// Add `r*(1-t*)(k̄ - k_D)` to capitalist consumption.
    pub include_foreign_income: bool,
    /// Capital endowments `(k̄_S, k̄_M)`; required with foreign income.
    pub capital_endowment: Option<(T, T)>,
}

impl<T: Scalar> Default for WelfareOptions<T> {
    fn default() -> Self {
        WelfareOptions {
            zeta: T::one(),
            capitalists_receive_y0: true,
            include_foreign_income: false,
            capital_endowment: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SectorEquilibrium<T> {
    pub wage: T,
    pub vacancies_per_firm: T,
    pub capital_per_firm: T,
    pub theta: T,
    pub p: T,
    pub q: T,
    /// Hires per firm, `n = q v`.
    pub employment_per_firm: T,
    /// Sector employment `E = q v K = p L_A`.
    pub employment: T,
    pub revenue: T,
    pub phi_n: T,
    pub phi_k: T,
    pub profit_pre_tax: T,
    pub mw_binding: bool,
    /// The job-filling rate sits at its cap of one.
    pub capped: bool,
    /// Largest log-space FOC residual at the returned point.
    pub foc_residual: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorkerAggregates<T> {
    /// Value of entering the labor market, gross of the entry cost.
    pub u: T,
    pub active: T,
    pub participation_rate: T,
    pub unemployment_rate: T,
    /// `(1-ρ) w`.
    pub expected_wage_active: T,
    /// Every worker of the skill participates (`U - y0 ≥ λ`).
    pub participation_clamped: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaxRevenue<T> {
    pub labor_low: T,
    pub labor_high: T,
    pub corporate: T,
}

impl<T: Scalar> TaxRevenue<T> {
    pub fn total(&self) -> T {
        self.labor_low + self.labor_high + self.corporate
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Equilibrium<T> {
    pub services: SectorEquilibrium<T>,
    pub manufacturing: SectorEquilibrium<T>,
    pub low: WorkerAggregates<T>,
    pub high: WorkerAggregates<T>,
    pub policy: Policy<T>,
    pub y0_solved: T,
    pub social_welfare: T,
    pub welfare: WelfareBreakdown<T>,
    pub tax_revenue: TaxRevenue<T>,
    pub budget_residual: T,
}

impl<T> Equilibrium<T> {
    pub fn sector(&self, s: Sector) -> &SectorEquilibrium<T> {
        match s {
            Sector::Services => &self.services,
            Sector::Manufacturing => &self.manufacturing,
        }
    }

    pub fn workers(&self, s: Sector) -> &WorkerAggregates<T> {
        match s {
            Sector::Services => &self.low,
            Sector::Manufacturing => &self.high,
        }
    }
}

/// Which firm problem the market layer uses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Regime<T> {
    /// Solve unconstrained, then re-solve at `w̄` if the wage falls short.
    Auto,
    /// Ignore any minimum wage.
    Unconstrained,
    /// Fix the wage at the given annual value.
    Constrained(T),
}

/// Result of the market layer for one sector.
#[derive(Debug, Clone, Copy)]
pub struct SectorSolution<T> {
    pub sector: SectorEquilibrium<T>,
    pub workers: WorkerAggregates<T>,
    pub(crate) ctx: FirmCtx<T>,
    pub(crate) kin: Kin<T>,
}

/// Net value of search `x = U - y0` at which the partial firm problem is
/// solved, plus the firm choices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FirmChoice<T> {
    pub wage: T,
    pub vacancies: T,
    pub capital: T,
    pub theta: T,
    pub mw_binding: bool,
}

fn firm_ctx<T: Scalar>(
    params: &ModelParams<T>,
    sector: Sector,
    policy: &Policy<T>,
) -> Result<FirmCtx<T>> {
    let tau = policy.tau(sector.skill());
    if !(tau < T::one()) {
        return Err(Error::InvalidParam(format!(
            "tax rate {tau} leaves no net wage"
        )));
    }
    Ok(FirmCtx {
        sec: *params.sector(sector),
        sk: *params.skill(sector.skill()),
        ln_a: (T::one() - tau).ln(),
        one_minus_t: T::one() - policy.t,
        wbar: None,
    })
}

fn default_guess<T: Scalar>() -> (T, T, T) {
    (
        lit::<T>(10.0).ln(),
        lit::<T>(10.0).ln(),
        lit::<T>(100.0).ln(),
    )
}

/// Solves the firm FOCs given the worker value `u` (with the policy's
/// `y0`). Returns the unconstrained choice, or the constrained one when
/// the policy minimum wage exceeds it.
pub fn solve_firm<T: Scalar>(
    params: &ModelParams<T>,
    sector: Sector,
    u: T,
    policy: &Policy<T>,
    opts: &SolverOptions<T>,
) -> Result<FirmChoice<T>> {
    policy.validate()?;
    let x = u - policy.y0;
    if !(x > T::zero()) {
        return Err(Error::Domain(format!(
            "worker value {u} must exceed the lump sum {}",
            policy.y0
        )));
    }
    let mut ctx = firm_ctx(params, sector, policy)?;
    let lx = x.ln();
    let free = ctx.solve(lx, default_guess(), opts.foc_tol, opts.foc_max_iter)?;
    let mut sol = free;
    let mut binding = false;
    if let Some(wbar) = policy.mw_annual(params) {
        if free.kin.lw.exp() < wbar - opts.bind_margin {
            ctx.wbar = Some(wbar);
            let g = (free.kin.lw, free.kin.lv, free.kin.lk);
            sol = ctx.solve(lx, g, opts.foc_tol, opts.foc_max_iter)?;
            binding = true;
        }
    }
    Ok(FirmChoice {
        wage: sol.kin.lw.exp(),
        vacancies: sol.kin.lv.exp(),
        capital: if ctx.has_k() {
            sol.kin.lk.exp()
        } else {
            T::zero()
        },
        theta: sol.kin.lth.exp(),
        mw_binding: binding,
    })
}

/// Log tightness-consistency residual `ln θ - ln(K v / L_A)` and its
/// derivative in `ln x`.
fn market_residual<T: Scalar>(mass: T, sk: &SkillParams<T>, sol: &FirmSolution<T>) -> (T, T) {
    let k = &sol.kin;
    let share = (k.lx.exp() / sk.lambda).min(T::one());
    let interior = k.lx < sk.lambda.ln();
    let la = sk.alpha * share;
    let r = k.lth - (mass.ln() + k.lv - la.ln());
    let c = T::one() / (T::one() - sk.delta1);
    let dlth = c * (T::one() - sol.dlw_dlx);
    let d = dlth - sol.dlv_dlx + if interior { T::one() } else { T::zero() };
    (r, d)
}

fn market_solve<T: Scalar>(
    ctx: &FirmCtx<T>,
    mass: T,
    opts: &SolverOptions<T>,
) -> Result<FirmSolution<T>> {
    let sk = ctx.sk;
    let eval = |lx: T, guess: (T, T, T)| -> Result<(FirmSolution<T>, T, T)> {
        let sol = ctx.solve(lx, guess, opts.foc_tol, opts.foc_max_iter)?;
        let (r, d) = market_residual(mass, &sk, &sol);
        Ok((sol, r, d))
    };
    let mut lx = (sk.lambda * lit(0.5)).ln();
    let (mut sol, mut r, mut d) = eval(lx, default_guess())?;
    let mut trace = Vec::new();
    let mut newton_ok = false;
    for _ in 0..opts.market_max_iter {
        if r.abs() <= opts.market_tol {
            newton_ok = true;
            break;
        }
        if !(d.abs() > T::epsilon()) || !d.is_finite() {
            break;
        }
        let step = -r / d;
        let mut lam = T::one();
        let mut moved = false;
        for _ in 0..40 {
            let trial = lx + lam * step;
            if let Ok((s2, r2, d2)) = eval(trial, (sol.kin.lw, sol.kin.lv, sol.kin.lk)) {
                if r2.abs() < r.abs() {
                    lx = trial;
                    sol = s2;
                    r = r2;
                    d = d2;
                    moved = true;
                    break;
                }
            }
            // Damping on divergence.
            lam = lam * lit(0.5);
        }
        trace.push(format!("ln x={:.12} r={:.3e}", f(lx), f(r)));
        if !moved {
            break;
        }
    }
    if newton_ok || r.abs() <= opts.market_tol {
        return Ok(sol);
    }
    bracket_market(ctx, mass, opts).map_err(|e| match e {
        Error::Solver { msg, trace: mut t2 } => {
            trace.append(&mut t2);
            Error::Solver { msg, trace }
        }
        other => other,
    })
}

/// Fallback: scan `ln x` for a sign change, then bisect.
fn bracket_market<T: Scalar>(
    ctx: &FirmCtx<T>,
    mass: T,
    opts: &SolverOptions<T>,
) -> Result<FirmSolution<T>> {
    let sk = ctx.sk;
    let eval = |lx: T| -> Option<(FirmSolution<T>, T)> {
        let sol = ctx
            .solve(lx, default_guess(), opts.foc_tol, opts.foc_max_iter)
            .ok()?;
        let (r, _) = market_residual(mass, &sk, &sol);
        r.is_finite().then_some((sol, r))
    };
    let mut prev: Option<(T, T)> = None;
    let mut bracket = None;
    let mut lx = lit::<T>(-20.0);
    while lx <= lit(12.0) {
        if let Some((_, r)) = eval(lx) {
            if let Some((lx0, r0)) = prev {
                if r0.signum() != r.signum() {
                    bracket = Some((lx0, r0, lx));
                    break;
                }
            }
            prev = Some((lx, r));
        }
        lx = lx + lit(0.25);
    }
    let (mut lo, mut rlo, mut hi) = bracket.ok_or_else(|| {
        Error::solver("no sign change of the market residual on ln x ∈ [-20, 12]")
    })?;
    for _ in 0..200 {
        let mid = (lo + hi) * lit(0.5);
        let (sol, r) =
            eval(mid).ok_or_else(|| Error::solver("firm solve failed inside market bracket"))?;
        if r.abs() <= opts.market_tol || (hi - lo) < lit(1e-15) {
            return Ok(sol);
        }
        if r.signum() == rlo.signum() {
            lo = mid;
            rlo = r;
        } else {
            hi = mid;
        }
    }
    Err(Error::solver("market bisection did not converge"))
}

/// Solves one sector and its workers at a given lump sum.
pub fn solve_sector<T: Scalar>(
    params: &ModelParams<T>,
    sector: Sector,
    policy: &Policy<T>,
    y0: T,
    opts: &SolverOptions<T>,
) -> Result<SectorSolution<T>> {
    solve_sector_regime(params, sector, policy, y0, opts, Regime::Auto)
}

pub fn solve_sector_regime<T: Scalar>(
    params: &ModelParams<T>,
    sector: Sector,
    policy: &Policy<T>,
    y0: T,
    opts: &SolverOptions<T>,
    regime: Regime<T>,
) -> Result<SectorSolution<T>> {
    policy.validate()?;
    if !(y0 >= T::zero()) {
        return Err(Error::Domain(format!(
            "lump sum must be nonnegative, got {y0}"
        )));
    }
    let mut ctx = firm_ctx(params, sector, policy)?;
    let mass = params.sector(sector).mass;
    let (sol, binding) = match regime {
        Regime::Constrained(wbar) => {
            ctx.wbar = Some(wbar);
            (market_solve(&ctx, mass, opts)?, true)
        }
        Regime::Unconstrained => (market_solve(&ctx, mass, opts)?, false),
        Regime::Auto => {
            let free = market_solve(&ctx, mass, opts)?;
            match policy.mw_annual(params) {
                Some(wbar) if free.kin.lw.exp() < wbar - opts.bind_margin => {
                    ctx.wbar = Some(wbar);
                    (market_solve(&ctx, mass, opts)?, true)
                }
                _ => (free, false),
            }
        }
    };
    assemble(params, sector, y0, ctx, sol, binding)
}

fn assemble<T: Scalar>(
    params: &ModelParams<T>,
    sector: Sector,
    y0: T,
    ctx: FirmCtx<T>,
    sol: FirmSolution<T>,
    binding: bool,
) -> Result<SectorSolution<T>> {
    let k = sol.kin;
    let sk = params.skill(sector.skill());
    let sec = params.sector(sector);
    let w = k.lw.exp();
    let v = k.lv.exp();
    let cap = if ctx.has_k() { k.lk.exp() } else { T::zero() };
    let x = k.lx.exp();
    let theta = k.lth.exp();
    let rates = model::matching_rates(theta, sk)?;
    // A capped finding rate cannot satisfy indifference; a capped filling
    // rate is a legitimate corner and is only flagged.
    if rates.p_capped {
        return Err(Error::Solver {
            msg: format!(
                "sector {} job-finding rate exceeds one (θ={:.4e})",
                sector.label(),
                f(theta)
            ),
            trace: Vec::new(),
        });
    }
    let capped = rates.q_capped;
    let n = rates.q * v;
    let rev = model::revenue(cap, n, sec)?;
    let eta = model::vacancy_cost(v, sk)?;
    let profit = rev.value - w * n - eta.cost;
    let share = (x / sk.lambda).min(T::one());
    let active = sk.alpha * share;
    let sector_eq = SectorEquilibrium {
        wage: w,
        vacancies_per_firm: v,
        capital_per_firm: cap,
        theta,
        p: rates.p,
        q: rates.q,
        employment_per_firm: n,
        employment: n * sec.mass,
        revenue: rev.value,
        phi_n: rev.phi_n,
        phi_k: rev.phi_k,
        profit_pre_tax: profit,
        mw_binding: binding,
        capped,
        foc_residual: sol.residual,
    };
    let workers = WorkerAggregates {
        u: x + y0,
        active,
        participation_rate: share,
        unemployment_rate: T::one() - rates.p,
        expected_wage_active: rates.p * w,
        participation_clamped: x >= sk.lambda,
    };
    Ok(SectorSolution {
        sector: sector_eq,
        workers,
        ctx,
        kin: k,
    })
}

fn recipients<T: Scalar>(params: &ModelParams<T>, welfare: &WelfareOptions<T>) -> T {
    let caps = params.services.mass + params.manufacturing.mass;
    T::one()
        + if welfare.capitalists_receive_y0 {
            caps
        } else {
            T::zero()
        }
}

fn revenue_of<T: Scalar>(
    params: &ModelParams<T>,
    policy: &Policy<T>,
    s: &SectorSolution<T>,
    m: &SectorSolution<T>,
) -> TaxRevenue<T> {
    TaxRevenue {
        labor_low: policy.tau_l * s.sector.wage * s.sector.employment,
        labor_high: policy.tau_h * m.sector.wage * m.sector.employment,
        corporate: policy.t
            * (params.services.mass * s.sector.profit_pre_tax
                + params.manufacturing.mass * m.sector.profit_pre_tax),
    }
}

/// Both sectors, the revenue and the budget residual at one `y0`.
type BudgetPoint<T> = (SectorSolution<T>, SectorSolution<T>, TaxRevenue<T>, T);

/// Solves both sectors and the lump sum that balances the budget
/// `y0 (1 + K_S + K_M) = τ_l w_l E_l + τ_h w_h E_h + t (K_S Π_S + K_M Π_M)`,
/// then evaluates welfare.
pub fn close_budget<T: Scalar>(
    params: &ModelParams<T>,
    policy: &Policy<T>,
    opts: &SolverOptions<T>,
    welfare: &WelfareOptions<T>,
) -> Result<Equilibrium<T>> {
    policy.validate()?;
    let n_rec = recipients(params, welfare);
    let solve_at = |y0: T| -> Result<BudgetPoint<T>> {
        let s = solve_sector(params, Sector::Services, policy, y0, opts)?;
        let m = solve_sector(params, Sector::Manufacturing, policy, y0, opts)?;
        let rev = revenue_of(params, policy, &s, &m);
        let resid = rev.total() - y0 * n_rec;
        Ok((s, m, rev, resid))
    };

    let (mut lo, mut hi) = (opts.y0_lo, opts.y0_hi);
    let at_lo = solve_at(lo)?;
    let mut best = at_lo;
    let mut f_lo = best.3;
    let scale = |rev: &TaxRevenue<T>| {
        rev.labor_low.abs() + rev.labor_high.abs() + rev.corporate.abs() + T::min_positive_value()
    };
    if f_lo == T::zero() {
        return finish(params, policy, welfare, lo, best);
    }
    if f_lo < T::zero() {
        return Err(Error::Infeasible(format!(
            "tax revenue {:.6} cannot fund a nonnegative lump sum",
            f(best.2.total())
        )));
    }
    let at_hi = solve_at(hi)?;
    let mut f_hi = at_hi.3;
    if f_hi > T::zero() {
        return Err(Error::Infeasible(format!(
            "budget surplus persists at y0={} (revenue {:.6})",
            f(hi),
            f(at_hi.2.total())
        )));
    }
    // Illinois-modified regula falsi inside the bracket; each trial
    // re-solves both sectors. Falls back to bisection if the secant point
    // degenerates.
    let mut side = 0i8;
    for _ in 0..opts.y0_max_iter {
        let mut y = (lo * f_hi - hi * f_lo) / (f_hi - f_lo);
        if !(y > lo && y < hi) {
            y = (lo + hi) * lit(0.5);
        }
        let cur = solve_at(y)?;
        let fy = cur.3;
        let tol = opts.budget_rel_tol * scale(&cur.2);
        best = cur;
        if fy.abs() <= tol || (hi - lo) <= T::epsilon() * hi {
            return finish(params, policy, welfare, y, best);
        }
        if fy > T::zero() {
            lo = y;
            f_lo = fy;
            if side == 1 {
                f_hi = f_hi * lit(0.5);
            }
            side = 1;
        } else {
            hi = y;
            f_hi = fy;
            if side == -1 {
                f_lo = f_lo * lit(0.5);
            }
            side = -1;
        }
    }
    Err(Error::solver(format!(
        "budget closure did not converge; residual {:.3e}",
        f(best.3)
    )))
}

fn finish<T: Scalar>(
    params: &ModelParams<T>,
    policy: &Policy<T>,
    welfare: &WelfareOptions<T>,
    y0: T,
    sol: (SectorSolution<T>, SectorSolution<T>, TaxRevenue<T>, T),
) -> Result<Equilibrium<T>> {
    let (s, m, rev, resid) = sol;
    let mut pol = *policy;
    pol.y0 = y0;
    let mut eq = Equilibrium {
        services: s.sector,
        manufacturing: m.sector,
        low: s.workers,
        high: m.workers,
        policy: pol,
        y0_solved: y0,
        social_welfare: T::nan(),
        welfare: WelfareBreakdown::default(),
        tax_revenue: rev,
        budget_residual: resid,
    };
    let wb = social_welfare(&eq, params, welfare)?;
    eq.social_welfare = wb.total;
    eq.welfare = wb;
    Ok(eq)
}

/// Solves both sectors at a fixed, given `y0` (no budget closure).
pub fn solve_at_fixed_y0<T: Scalar>(
    params: &ModelParams<T>,
    policy: &Policy<T>,
    opts: &SolverOptions<T>,
    welfare: &WelfareOptions<T>,
) -> Result<Equilibrium<T>> {
    let s = solve_sector(params, Sector::Services, policy, policy.y0, opts)?;
    let m = solve_sector(params, Sector::Manufacturing, policy, policy.y0, opts)?;
    let rev = revenue_of(params, policy, &s, &m);
    let resid = rev.total() - policy.y0 * recipients(params, welfare);
    finish(params, policy, welfare, policy.y0, (s, m, rev, resid))
}
