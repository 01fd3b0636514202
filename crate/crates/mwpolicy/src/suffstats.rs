//! Reduced-form welfare conditions for minimum wage reforms.
//!
//! Everything here is closed-form arithmetic on elasticities, income
//! aggregates and welfare weights. The critical weight `g₁ˡ*` is the
//! smallest social value of a dollar to low-skill workers for which a
//! minimum wage increase raises welfare.

use serde::{Deserialize, Serialize};

use crate::{Error, Result, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ElasticityInputs<T> {
    /// Effect on the low-skill pre-tax sufficient statistic.
    pub eps_u_pretax: T,
    /// Effect on income-maintenance transfers (signed).
    pub eps_it: T,
    /// Effect on exposed-services profits (signed).
    pub eps_profit: T,
    /// Total annual pre-tax low-skill wages.
    pub ptw: T,
    /// Total income-maintenance benefits.
    pub it: T,
    /// Total annual pre-tax exposed-services profits.
    pub ptp: T,
    pub t: T,
    pub zeta: T,
    /// Used to scale the pre-tax per-capita sufficient statistic to its
    /// post-tax counterpart.
    pub it_to_ptw_ratio: T,
    /// Per-capita pre-tax sufficient statistic of low-skill actives.
    pub u_per_capita: Option<T>,
    /// Pre-tax profit per establishment in exposed services.
    pub profit_per_capita: Option<T>,
}

impl<T: Scalar> ElasticityInputs<T> {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("PTW", self.ptw), ("IT", self.it), ("PTP", self.ptp)] {
            if !(v > T::zero()) {
                return Err(Error::InvalidParam(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if !(self.t >= T::zero() && self.t < T::one()) {
            return Err(Error::InvalidParam(format!(
                "t must lie in [0,1), got {}",
                self.t
            )));
        }
        if !(self.it_to_ptw_ratio >= T::zero()) {
            return Err(Error::InvalidParam(
                "it_to_ptw_ratio must be nonnegative".into(),
            ));
        }
        Ok(())
    }

    /// `ω(ζ)⁻¹ = (U_post / ((1-t) Π))^ζ`, with `U_post = (1 + IT/PTW) U_pre`.
    pub fn omega_inverse(&self, zeta: T) -> Result<T> {
        let (u, pi) = match (self.u_per_capita, self.profit_per_capita) {
            (Some(u), Some(pi)) => (u, pi),
            _ => {
                return Err(Error::InvalidParam(
                    "endogenous capitalist weight needs per-capita U and profit".into(),
                ))
            }
        };
        let u_post = u * (T::one() + self.it_to_ptw_ratio);
        let cap = (T::one() - self.t) * pi;
        if !(u_post > T::zero() && cap > T::zero()) {
            return Err(Error::InvalidParam(
                "per-capita values must be positive".into(),
            ));
        }
        Ok((u_post / cap).powf(zeta))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WelfareWeights<T> {
    pub g1_l: T,
    pub g1_h: T,
    pub g0: T,
    pub gk: T,
}

impl<T: Scalar> WelfareWeights<T> {
    pub fn ones() -> Self {
        WelfareWeights {
            g1_l: T::one(),
            g1_h: T::one(),
            g0: T::one(),
            gk: T::one(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if [self.g1_l, self.g1_h, self.g0, self.gk]
            .iter()
            .any(|g| !(*g >= T::zero()))
        {
            return Err(Error::InvalidParam(
                "welfare weights must be nonnegative".into(),
            ));
        }
        Ok(())
    }
}

/// `dU^l L_A^l g₁^l + dU^h L_A^h g₁^h + profit_term`, where `profit_term`
/// is the already-weighted aggregate profit change (see
/// [`weighted_profit_change`]). A positive value favors the reform.
pub fn prop1_margin<T: Scalar>(
    du_l: T,
    du_h: T,
    active_l: T,
    active_h: T,
    weights: &WelfareWeights<T>,
    profit_term: T,
) -> Result<T> {
    if !(active_l > T::zero() && active_h > T::zero()) {
        return Err(Error::InvalidParam("active masses must be positive".into()));
    }
    Ok(du_l * active_l * weights.g1_l + du_h * active_h * weights.g1_h + profit_term)
}

/// `g_K Σ_I K_I dΠ_I`, the capitalist term of the first-order condition
/// with one weight shared across sectors.
pub fn weighted_profit_change<T: Scalar>(gk: T, sectors: &[(T, T)]) -> T {
    sectors
        .iter()
        .fold(T::zero(), |acc, (mass, dpi)| acc + *mass * *dpi)
        * gk
}

/// The four addends of the empirical welfare condition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prop2Decomposition<T> {
    /// `(ε_U PTW + ε_IT IT) g₁ˡ`.
    pub workers: T,
    /// `ε_Π PTP (1-t) g_K`.
    pub capitalists: T,
    /// `-ε_IT IT`.
    pub transfer_fiscal: T,
    /// `ε_Π t PTP`.
    pub corporate_fiscal: T,
    pub total: T,
}

/// Left side of the empirical welfare condition; the reform raises
/// welfare when it is positive.
pub fn prop2_empirical<T: Scalar>(
    inputs: &ElasticityInputs<T>,
    weights: &WelfareWeights<T>,
) -> Result<Prop2Decomposition<T>> {
    inputs.validate()?;
    let workers = (inputs.eps_u_pretax * inputs.ptw + inputs.eps_it * inputs.it) * weights.g1_l;
    let capitalists = inputs.eps_profit * inputs.ptp * (T::one() - inputs.t) * weights.gk;
    let transfer_fiscal = -inputs.eps_it * inputs.it;
    let corporate_fiscal = inputs.eps_profit * inputs.t * inputs.ptp;
    Ok(Prop2Decomposition {
        workers,
        capitalists,
        transfer_fiscal,
        corporate_fiscal,
        total: workers + capitalists + transfer_fiscal + corporate_fiscal,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum G1Mode<T> {
    /// Capitalists weighted like the average dollar.
    GkEqualsOne,
    /// `g_K = g₁ˡ / ω(ζ)` from a CRRA social welfare function.
    Endogenous { zeta: T },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalG1<T> {
    /// Reported value, floored at zero.
    pub value: T,
    /// Unconstrained root of the welfare condition.
    pub raw: T,
    pub clamped: bool,
}

/// Weight `g₁ˡ*` that makes the empirical welfare condition hold with
/// equality. Negative roots mean the reform is desirable for any
/// nonnegative weight; they are reported as 0 with `clamped` set.
pub fn critical_g1<T: Scalar>(
    inputs: &ElasticityInputs<T>,
    mode: G1Mode<T>,
) -> Result<CriticalG1<T>> {
    inputs.validate()?;
    let one = T::one();
    let worker_base = inputs.eps_u_pretax * inputs.ptw + inputs.eps_it * inputs.it;
    let (num, den) = match mode {
        G1Mode::GkEqualsOne => (
            -(inputs.eps_profit * inputs.ptp * (one - inputs.t) - inputs.eps_it * inputs.it
                + inputs.eps_profit * inputs.t * inputs.ptp),
            worker_base,
        ),
        G1Mode::Endogenous { zeta } => (
            -(-inputs.eps_it * inputs.it + inputs.eps_profit * inputs.t * inputs.ptp),
            worker_base
                + inputs.eps_profit * inputs.ptp * (one - inputs.t) * inputs.omega_inverse(zeta)?,
        ),
    };
    if den == T::zero() || !den.is_finite() {
        return Err(Error::Singular(
            "critical weight denominator is zero".into(),
        ));
    }
    let raw = num / den;
    let clamped = raw < T::zero();
    Ok(CriticalG1 {
        value: if clamped { T::zero() } else { raw },
        raw,
        clamped,
    })
}

/// Threshold on `g₁ˡ` above which the optimal marginal tax on employed
/// low-skill workers is negative:
/// `(1 - C ε [(1-t) g_K + t]) / (1 - B ε)`.
pub fn prop4_tax_threshold<T: Scalar>(b: T, c: T, eps_theta_delta: T, t: T, gk: T) -> Result<T> {
    let one = T::one();
    for (name, v) in [("B", b), ("C", c)] {
        if !(v > T::zero() && v < one) {
            return Err(Error::InvalidParam(format!(
                "{name} must lie in (0,1), got {v}"
            )));
        }
    }
    let den = one - b * eps_theta_delta;
    if !(den > T::zero()) {
        return Err(Error::Singular(format!(
            "B·ε = {} leaves no positive denominator",
            b * eps_theta_delta
        )));
    }
    Ok((one - c * eps_theta_delta * ((one - t) * gk + t)) / den)
}

/// Same threshold without the open-interval restriction on `B` and `C`,
/// for limit checks.
pub fn prop4_tax_threshold_unchecked<T: Scalar>(b: T, c: T, eps: T, t: T, gk: T) -> T {
    let one = T::one();
    (one - c * eps * ((one - t) * gk + t)) / (one - b * eps)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SufficientStatistic<T> {
    /// Employment rate times mean wage of the employed.
    pub pre_tax: T,
    /// Pre-tax value net of average liabilities (taxes of the employed
    /// minus transfers to the unemployed) per active worker.
    pub post_tax: T,
}

/// Average wage of active workers including the unemployed.
pub fn compute_sufficient_statistic<T: Scalar>(
    employment_rate: T,
    mean_wage_employed: T,
    avg_net_tax: T,
) -> Result<SufficientStatistic<T>> {
    if !(employment_rate >= T::zero() && employment_rate <= T::one()) {
        return Err(Error::InvalidParam(format!(
            "employment rate must lie in [0,1], got {employment_rate}"
        )));
    }
    let pre_tax = employment_rate * mean_wage_employed;
    Ok(SufficientStatistic {
        pre_tax,
        post_tax: pre_tax - avg_net_tax,
    })
}

/// One time period of the welfare-weight report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Table5Period {
    pub name: String,
    pub ptw: f64,
    pub it: f64,
    pub ptp: f64,
    pub u_per_capita: f64,
    pub profit_per_capita: f64,
    pub t_statutory: f64,
    pub t_effective: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Table5Config {
    pub eps_u_pretax: f64,
    pub eps_it: f64,
    pub eps_profit_low: f64,
    pub eps_profit_high: f64,
    pub zetas: Vec<f64>,
    pub it_to_ptw_ratio: f64,
    pub periods: Vec<Table5Period>,
    /// Free-text note on where the aggregates come from.
    #[serde(default)]
    pub provenance: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table5Cell {
    pub panel: String,
    pub eps_profit: f64,
    pub period: String,
    pub t_kind: String,
    pub t: f64,
    pub column: String,
    pub g1_star: f64,
    pub raw: f64,
    pub clamped: bool,
    pub provenance: String,
}

/// Evaluates every (profit elasticity × period × tax rate × weighting)
/// combination. With two elasticities, two periods, two tax rates and
/// `g_K = 1` plus three curvature values this is 32 cells.
pub fn table5_report(cfg: &Table5Config) -> Result<Vec<Table5Cell>> {
    let mut out = Vec::new();
    for (panel, eps_profit) in [("low", cfg.eps_profit_low), ("high", cfg.eps_profit_high)] {
        for period in &cfg.periods {
            for (t_kind, t) in [
                ("statutory", period.t_statutory),
                ("effective", period.t_effective),
            ] {
                let inputs = ElasticityInputs {
                    eps_u_pretax: cfg.eps_u_pretax,
                    eps_it: cfg.eps_it,
                    eps_profit,
                    ptw: period.ptw,
                    it: period.it,
                    ptp: period.ptp,
                    t,
                    zeta: 1.0,
                    it_to_ptw_ratio: cfg.it_to_ptw_ratio,
                    u_per_capita: Some(period.u_per_capita),
                    profit_per_capita: Some(period.profit_per_capita),
                };
                let mut modes = vec![("gK=1".to_string(), G1Mode::GkEqualsOne)];
                for &z in &cfg.zetas {
                    modes.push((format!("zeta={z}"), G1Mode::Endogenous { zeta: z }));
                }
                for (column, mode) in modes {
                    let g = critical_g1(&inputs, mode)?;
                    out.push(Table5Cell {
                        panel: panel.to_string(),
                        eps_profit,
                        period: period.name.clone(),
                        t_kind: t_kind.to_string(),
                        t,
                        column,
                        g1_star: g.value,
                        raw: g.raw,
                        clamped: g.clamped,
                        provenance: cfg.provenance.clone(),
                    });
                }
            }
        }
    }
    Ok(out)
}

/// Text of the configuration bundled as `configs/table5.toml`.
pub const BUNDLED_TABLE5: &str = include_str!("../../../configs/table5.toml");

pub fn bundled_table5() -> Table5Config {
    #[derive(Deserialize)]
    struct Wrapper {
        suffstats: Table5Config,
    }
    toml::from_str::<Wrapper>(BUNDLED_TABLE5)
        .expect("bundled table5 config parses")
        .suffstats
}
