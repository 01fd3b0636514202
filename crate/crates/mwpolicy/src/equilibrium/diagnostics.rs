//! Residual checks, the planner's efficiency conditions and the
//! constrained-profit derivative.

use serde::{Deserialize, Serialize};

use super::{solve_sector_regime, Regime, SectorSolution, SolverOptions};
use crate::model::{self, ModelParams, Policy, Sector};
use crate::{Error, Result, Scalar};

/// Relative residuals of every condition that defines a sector solution,
/// evaluated in levels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FocResiduals<T> {
    /// `((φ_n - w) q̃_w - q̃)/q̃`; zero by construction when the wage is fixed.
    pub wage: T,
    /// `((φ_n - w) q - η_v)/η_v`.
    pub vacancy: T,
    /// `((1-t) φ_k - r*(1-t*))/r*(1-t*)`; zero when capital is irrelevant.
    pub capital: T,
    /// `(p(θ)(1-τ)w + y0 - U)/U` with `θ = K v / L_A`.
    pub indifference: T,
    /// `w/φ_n - δ₁` at an unconstrained optimum, zero otherwise.
    pub markdown: T,
}

impl<T: Scalar> FocResiduals<T> {
    pub fn max_abs(&self) -> T {
        [
            self.wage,
            self.vacancy,
            self.capital,
            self.indifference,
            self.markdown,
        ]
        .iter()
        .fold(T::zero(), |a, b| a.max(b.abs()))
    }
}

impl<T: Scalar> SectorSolution<T> {
    pub fn residuals(
        &self,
        params: &ModelParams<T>,
        sector: Sector,
        policy: &Policy<T>,
        y0: T,
    ) -> Result<FocResiduals<T>> {
        let sk = params.skill(sector.skill());
        let sec = params.sector(sector);
        let se = &self.sector;
        let wk = &self.workers;
        let tau = policy.tau(sector.skill());
        let eta = model::vacancy_cost(se.vacancies_per_firm, sk)?;
        let gap = se.phi_n - se.wage;
        // q̃_w / q̃ = δ₁ / ((1-δ₁) w).
        let qw_over_q = sk.delta1 / ((T::one() - sk.delta1) * se.wage);
        let wage = if se.mw_binding {
            T::zero()
        } else {
            gap * qw_over_q - T::one()
        };
        let vacancy = (gap * se.q - eta.marginal) / eta.marginal;
        let capital = if sec.beta_k > T::zero() {
            ((T::one() - policy.t) * se.phi_k - sec.foreign_return) / sec.foreign_return
        } else {
            T::zero()
        };
        let theta = sec.mass * se.vacancies_per_firm / wk.active;
        let p = model::job_finding(theta, sk)?;
        let indifference = (p * (T::one() - tau) * se.wage + y0 - wk.u) / wk.u;
        let markdown = if se.mw_binding {
            T::zero()
        } else {
            se.wage / se.phi_n - sk.delta1
        };
        Ok(FocResiduals {
            wage,
            vacancy,
            capital,
            indifference,
            markdown,
        })
    }
}

/// Planner conditions evaluated at a decentralized allocation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyCheck<T> {
    /// `(φ_n (q + θ q_θ) - η_v)/η_v`, the vacancy condition once the
    /// applicant multiplier equals the marginal entrant's cost.
    pub vacancy: T,
    /// `(-θ² q_θ φ_n - c*)/c*`, the applicant condition with `c* = U - y0`.
    pub applicants: T,
    /// `(q φ_n - c*/θ - η_v)/η_v`.
    pub combined: T,
}

impl<T: Scalar> EfficiencyCheck<T> {
    pub fn residual(&self) -> T {
        self.vacancy
            .abs()
            .max(self.applicants.abs())
            .max(self.combined.abs())
    }
}

/// Checks the planner's first-order conditions at a sector solution.
/// At zero taxes and without a binding minimum wage all three residuals
/// vanish; a binding floor shows up as a positive vacancy residual.
pub fn check_efficiency<T: Scalar>(
    params: &ModelParams<T>,
    sector: Sector,
    sol: &SectorSolution<T>,
    y0: T,
) -> Result<EfficiencyCheck<T>> {
    let sk = params.skill(sector.skill());
    let se = &sol.sector;
    if sol.workers.participation_clamped {
        return Err(Error::Domain(
            "efficiency check needs an interior participation margin".into(),
        ));
    }
    let eta_v = model::vacancy_cost(se.vacancies_per_firm, sk)?.marginal;
    let c_star = sol.workers.u - y0;
    // θ q_θ = -δ₁ q below the cap, zero on it.
    let theta_qtheta = if se.capped {
        T::zero()
    } else {
        -sk.delta1 * se.q
    };
    Ok(EfficiencyCheck {
        vacancy: (se.phi_n * (se.q + theta_qtheta) - eta_v) / eta_v,
        applicants: (-se.theta * theta_qtheta * se.phi_n - c_star) / c_star,
        combined: (se.q * se.phi_n - c_star / se.theta - eta_v) / eta_v,
    })
}

/// `dΠ/dw̄ = q_θ (dθ/dw̄) v (φ_n - w̄) - v q`.
pub fn profit_derivative_formula<T: Scalar>(
    q_theta: T,
    dtheta_dw: T,
    v: T,
    phi_n: T,
    wbar: T,
    q: T,
) -> T {
    q_theta * dtheta_dw * v * (phi_n - wbar) - v * q
}

/// Analytic derivative of equilibrium pre-tax profit with respect to a
/// binding minimum wage (annual units). `dθ/dw̄` accounts for the response
/// of the market value of search through the implicit function theorem.
///
/// Pre-tax profit does not charge for capital, so the envelope argument
/// only covers vacancies. Capital falls with the floor and its marginal
/// product `φ_k (dk/dw̄)` is added on top of [`profit_derivative_formula`].
/// With `β_k = 0` the two coincide.
pub fn constrained_profit_derivative<T: Scalar>(
    params: &ModelParams<T>,
    sector: Sector,
    sol: &SectorSolution<T>,
) -> Result<T> {
    let se = &sol.sector;
    let Some(wbar) = sol.ctx.wbar.filter(|_| se.mw_binding) else {
        return Err(Error::Domain(
            "profit derivative requires a binding minimum wage".into(),
        ));
    };
    let sk = params.skill(sector.skill());
    let sens = sol.ctx.bound_sensitivities(&sol.kin);
    let interior = if sol.workers.participation_clamped {
        T::zero()
    } else {
        T::one()
    };
    // Market consistency ln θ - ln K - ln v + ln L_A = 0 with
    // ln θ = c (ln x - ln w̄) + const.
    let c = sens.dlth_dlx;
    let dlx_dlw = (c + sens.dlv_dlw) / (c - sens.dlv_dlx + interior);
    let dlth_dlw = c * (dlx_dlw - T::one());
    let dtheta_dw = se.theta * dlth_dlw / wbar;
    let q_theta = if se.capped {
        T::zero()
    } else {
        -sk.delta1 * se.q / se.theta
    };
    let labor = profit_derivative_formula(
        q_theta,
        dtheta_dw,
        se.vacancies_per_firm,
        se.phi_n,
        wbar,
        se.q,
    );
    let dlk_dlw = sens.dlk_dlw + sens.dlk_dlx * dlx_dlw;
    let capital = se.phi_k * se.capital_per_firm * dlk_dlw / wbar;
    Ok(labor + capital)
}

/// Solves a sector with the wage forced to `wbar` (annual units), whether
/// or not a free firm would choose a lower wage.
pub fn solve_sector_at_wage<T: Scalar>(
    params: &ModelParams<T>,
    sector: Sector,
    policy: &Policy<T>,
    y0: T,
    opts: &SolverOptions<T>,
    wbar: T,
) -> Result<SectorSolution<T>> {
    solve_sector_regime(params, sector, policy, y0, opts, Regime::Constrained(wbar))
}
