//! Structural primitives: populations, matching, technology, vacancy costs
//! and the flat tax schedule.
//!
//! Monetary values are in thousands of 2019 dollars per year. The only
//! place hourly values appear is the statutory minimum wage, converted with
//! [`ModelParams::hours_annualization`].

use serde::{Deserialize, Serialize};

use crate::scalar::lit;
use crate::{Error, Result, Scalar};

/// Weekly hours of low-skill workers times 52.
pub const DEFAULT_HOURS_ANNUALIZATION: f64 = 1811.16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Skill {
    Low,
    High,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sector {
    Services,
    Manufacturing,
}

impl Sector {
    pub const ALL: [Sector; 2] = [Sector::Services, Sector::Manufacturing];

    /// Services hire only low-skill workers, manufacturing only high-skill.
    pub fn skill(self) -> Skill {
        match self {
            Sector::Services => Skill::Low,
            Sector::Manufacturing => Skill::High,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Sector::Services => "S",
            Sector::Manufacturing => "M",
        }
    }
}

impl Skill {
    pub fn label(self) -> &'static str {
        match self {
            Skill::Low => "l",
            Skill::High => "h",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SkillParams<T> {
    pub alpha: T,
    pub lambda: T,
    pub delta0: T,
    pub delta1: T,
    pub kappa0: T,
    pub kappa1: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SectorParams<T> {
    pub psi: T,
    pub beta_n: T,
    pub beta_k: T,
    /// Mass of capitalists (firms) relative to the worker population.
    pub mass: T,
    /// After-tax foreign return `r*(1-t*)`.
    pub foreign_return: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams<T> {
    pub low: SkillParams<T>,
    pub high: SkillParams<T>,
    pub services: SectorParams<T>,
    pub manufacturing: SectorParams<T>,
    pub hours_annualization: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Policy<T> {
    pub tau_l: T,
    pub tau_h: T,
    pub t: T,
    pub mw_hourly: Option<T>,
    pub y0: T,
}

fn positive<T: Scalar>(name: &str, x: T) -> Result<()> {
    if x > T::zero() && x.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParam(format!(
            "{name} must be positive, got {x}"
        )))
    }
}

fn open_unit<T: Scalar>(name: &str, x: T) -> Result<()> {
    if x > T::zero() && x < T::one() {
        Ok(())
    } else {
        Err(Error::InvalidParam(format!(
            "{name} must lie in (0,1), got {x}"
        )))
    }
}

impl<T: Scalar> SkillParams<T> {
    pub fn new(alpha: T, lambda: T, delta0: T, delta1: T, kappa0: T, kappa1: T) -> Result<Self> {
        let sp = SkillParams {
            alpha,
            lambda,
            delta0,
            delta1,
            kappa0,
            kappa1,
        };
        sp.validate()?;
        Ok(sp)
    }

    pub fn validate(&self) -> Result<()> {
        open_unit("alpha", self.alpha)?;
        positive("lambda", self.lambda)?;
        positive("delta0", self.delta0)?;
        open_unit("delta1", self.delta1)?;
        positive("kappa0", self.kappa0)?;
        positive("kappa1", self.kappa1)
    }
}

impl<T: Scalar> SectorParams<T> {
    pub fn new(psi: T, beta_n: T, beta_k: T, mass: T, foreign_return: T) -> Result<Self> {
        let sp = SectorParams {
            psi,
            beta_n,
            beta_k,
            mass,
            foreign_return,
        };
        sp.validate()?;
        Ok(sp)
    }

    pub fn validate(&self) -> Result<()> {
        positive("psi", self.psi)?;
        positive("beta_n", self.beta_n)?;
        if !(self.beta_k >= T::zero()) {
            return Err(Error::InvalidParam(format!(
                "beta_k must be nonnegative, got {}",
                self.beta_k
            )));
        }
        if self.beta_n + self.beta_k >= T::one() {
            return Err(Error::InvalidParam(format!(
                "beta_n + beta_k must be below 1, got {}",
                self.beta_n + self.beta_k
            )));
        }
        positive("K", self.mass)?;
        positive("foreign_return", self.foreign_return)
    }
}

impl<T: Scalar> ModelParams<T> {
    pub fn new(
        low: SkillParams<T>,
        high: SkillParams<T>,
        services: SectorParams<T>,
        manufacturing: SectorParams<T>,
        hours_annualization: T,
    ) -> Result<Self> {
        let mp = ModelParams {
            low,
            high,
            services,
            manufacturing,
            hours_annualization,
        };
        mp.validate()?;
        Ok(mp)
    }

    pub fn validate(&self) -> Result<()> {
        self.low.validate()?;
        self.high.validate()?;
        self.services.validate()?;
        self.manufacturing.validate()?;
        positive("hours_annualization", self.hours_annualization)?;
        let total = self.low.alpha + self.high.alpha;
        if (total - T::one()).abs() > lit(1e-9) {
            return Err(Error::InvalidParam(format!(
                "skill shares must sum to 1, got {total}"
            )));
        }
        Ok(())
    }

    pub fn skill(&self, s: Skill) -> &SkillParams<T> {
        match s {
            Skill::Low => &self.low,
            Skill::High => &self.high,
        }
    }

    pub fn sector(&self, i: Sector) -> &SectorParams<T> {
        match i {
            Sector::Services => &self.services,
            Sector::Manufacturing => &self.manufacturing,
        }
    }

    pub fn sector_mut(&mut self, i: Sector) -> &mut SectorParams<T> {
        match i {
            Sector::Services => &mut self.services,
            Sector::Manufacturing => &mut self.manufacturing,
        }
    }

    pub fn skill_mut(&mut self, s: Skill) -> &mut SkillParams<T> {
        match s {
            Skill::Low => &mut self.low,
            Skill::High => &mut self.high,
        }
    }

    pub fn hourly_to_annual(&self, hourly: T) -> T {
        hourly * self.hours_annualization / lit(1000.0)
    }

    pub fn annual_to_hourly(&self, annual: T) -> T {
        annual * lit(1000.0) / self.hours_annualization
    }
}

impl<T: Scalar> Policy<T> {
    /// Status-quo tax system: flat 27.6% on both skills, 20% corporate
    /// tax, no minimum wage, lump sum of 15.92.
    pub fn baseline() -> Self {
        Policy {
            tau_l: lit(0.276),
            tau_h: lit(0.276),
            t: lit(0.2),
            mw_hourly: None,
            y0: lit(15.92),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t >= T::zero() && self.t < T::one()) {
            return Err(Error::InvalidParam(format!(
                "t must lie in [0,1), got {}",
                self.t
            )));
        }
        if !(self.tau_l < T::one()) || !(self.tau_h < T::one()) {
            return Err(Error::InvalidParam(format!(
                "wage tax rates must be below 1, got tau_l={} tau_h={}",
                self.tau_l, self.tau_h
            )));
        }
        if let Some(mw) = self.mw_hourly {
            if !(mw >= T::zero()) {
                return Err(Error::InvalidParam(format!(
                    "minimum wage must be nonnegative, got {mw}"
                )));
            }
        }
        if !self.y0.is_finite() {
            return Err(Error::InvalidParam("y0 must be finite".into()));
        }
        Ok(())
    }

    pub fn tau(&self, s: Skill) -> T {
        match s {
            Skill::Low => self.tau_l,
            Skill::High => self.tau_h,
        }
    }

    pub fn mw_annual(&self, params: &ModelParams<T>) -> Option<T> {
        self.mw_hourly.map(|h| params.hourly_to_annual(h))
    }
}

/// Job-finding and job-filling rates at a given tightness.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchRates<T> {
    pub p: T,
    pub q: T,
    pub p_capped: bool,
    pub q_capped: bool,
}

fn check_theta<T: Scalar>(theta: T) -> Result<()> {
    if theta > T::zero() && theta.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "tightness must be positive, got {theta}"
        )))
    }
}

/// `p(θ) = min(δ₀ θ^(1-δ₁), 1)`.
pub fn job_finding<T: Scalar>(theta: T, sp: &SkillParams<T>) -> Result<T> {
    Ok(matching_rates(theta, sp)?.p)
}

/// `q(θ) = min(δ₀ θ^(-δ₁), 1)`.
pub fn job_filling<T: Scalar>(theta: T, sp: &SkillParams<T>) -> Result<T> {
    Ok(matching_rates(theta, sp)?.q)
}

pub fn matching_rates<T: Scalar>(theta: T, sp: &SkillParams<T>) -> Result<MatchRates<T>> {
    check_theta(theta)?;
    let p_raw = sp.delta0 * theta.powf(T::one() - sp.delta1);
    let q_raw = sp.delta0 * theta.powf(-sp.delta1);
    Ok(MatchRates {
        p: p_raw.min(T::one()),
        q: q_raw.min(T::one()),
        p_capped: p_raw > T::one(),
        q_capped: q_raw > T::one(),
    })
}

/// Revenue and its analytic marginal products.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Revenue<T> {
    pub value: T,
    pub phi_n: T,
    pub phi_k: T,
}

/// `ψ k^βk n^βn` with marginal products. A zero exponent on capital makes
/// capital irrelevant (`0^0 = 1`) and its marginal product zero.
pub fn revenue<T: Scalar>(k: T, n: T, sector: &SectorParams<T>) -> Result<Revenue<T>> {
    if !(k >= T::zero()) || !(n >= T::zero()) {
        return Err(Error::Domain(format!(
            "revenue needs nonnegative inputs, got k={k} n={n}"
        )));
    }
    let kf = if sector.beta_k == T::zero() {
        T::one()
    } else {
        k.powf(sector.beta_k)
    };
    let value = sector.psi * kf * n.powf(sector.beta_n);
    let phi_n = sector.beta_n * sector.psi * kf * n.powf(sector.beta_n - T::one());
    let phi_k = if sector.beta_k == T::zero() {
        T::zero()
    } else {
        sector.beta_k * sector.psi * k.powf(sector.beta_k - T::one()) * n.powf(sector.beta_n)
    };
    Ok(Revenue {
        value,
        phi_n,
        phi_k,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VacancyCost<T> {
    pub cost: T,
    pub marginal: T,
}

/// `η(v) = κ₀ v^(1+κ₁)/(1+κ₁)` and `η_v = κ₀ v^κ₁`.
pub fn vacancy_cost<T: Scalar>(v: T, sp: &SkillParams<T>) -> Result<VacancyCost<T>> {
    if !(v >= T::zero()) {
        return Err(Error::Domain(format!(
            "vacancies must be nonnegative, got {v}"
        )));
    }
    let e = T::one() + sp.kappa1;
    Ok(VacancyCost {
        cost: sp.kappa0 * v.powf(e) / e,
        marginal: sp.kappa0 * v.powf(sp.kappa1),
    })
}

/// Employment surplus `Δy = (1-τ) w`.
pub fn employment_surplus<T: Scalar>(w: T, tau: T) -> T {
    (T::one() - tau) * w
}

/// Consumption of an employed worker, `(1-τ) w + y₀`.
pub fn after_tax_income<T: Scalar>(w: T, tau: T, y0: T) -> T {
    employment_surplus(w, tau) + y0
}
