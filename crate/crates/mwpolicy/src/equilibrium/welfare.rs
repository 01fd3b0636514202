use serde::{Deserialize, Serialize};

use super::{Equilibrium, WelfareOptions};
use crate::model::{ModelParams, Sector};
use crate::quadrature::gauss_legendre;
use crate::{lit, Error, Result, Scalar};

/// Points used for the worker integral when `ζ ≠ 1`.
const QUAD_NODES: usize = 48;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct WelfareBreakdown<T> {
    pub inactive: T,
    pub workers_low: T,
    pub workers_high: T,
    pub capitalists_services: T,
    pub capitalists_manufacturing: T,
    pub total: T,
}

/// `G(c) = c^(1-ζ)/(1-ζ)`, logarithmic at `ζ = 1`.
pub fn welfare_g<T: Scalar>(c: T, zeta: T) -> T {
    if zeta == T::one() {
        c.ln()
    } else {
        let e = T::one() - zeta;
        c.powf(e) / e
    }
}

/// `∫₀^X G(U - c) dc`, closed form at `ζ = 1`, Gauss-Legendre otherwise.
pub fn worker_integral<T: Scalar>(u: T, x: T, zeta: T) -> T {
    if x <= T::zero() {
        return T::zero();
    }
    if zeta == T::one() {
        let rest = u - x;
        let tail = if rest > T::zero() {
            rest * rest.ln()
        } else {
            T::zero()
        };
        return u * u.ln() - tail - x;
    }
    let half = x * lit(0.5);
    gauss_legendre::<T>(QUAD_NODES)
        .iter()
        .fold(T::zero(), |acc, &(node, weight)| {
            let c = half * (node + T::one());
            acc + weight * welfare_g(u - c, zeta)
        })
        * half
}

fn check_consumption<T: Scalar>(group: &str, c: T, zeta: T) -> Result<()> {
    let bad = if zeta >= T::one() {
        !(c > T::zero())
    } else {
        !(c >= T::zero())
    };
    if bad || !c.is_finite() {
        Err(Error::Infeasible(format!(
            "non-positive consumption {c} for {group} under zeta={zeta}"
        )))
    } else {
        Ok(())
    }
}

/// Social welfare
/// `L_I G(y0) + Σ α/λ ∫₀^{min(U-y0,λ)} G(U-c) dc + Σ K G((1-t)Π + y0)`.
pub fn social_welfare<T: Scalar>(
    eq: &Equilibrium<T>,
    params: &ModelParams<T>,
    opts: &WelfareOptions<T>,
) -> Result<WelfareBreakdown<T>> {
    let zeta = opts.zeta;
    let y0 = eq.y0_solved;
    let t = eq.policy.t;
    let inactive_mass = T::one() - eq.low.active - eq.high.active;
    let mut out = WelfareBreakdown::default();
    if inactive_mass > T::zero() {
        check_consumption("inactive workers", y0, zeta)?;
        out.inactive = inactive_mass * welfare_g(y0, zeta);
    }
    for s in Sector::ALL {
        let sk = params.skill(s.skill());
        let w = eq.workers(s);
        let x = (w.u - y0).min(sk.lambda);
        check_consumption("active workers", w.u - x, zeta)?;
        let val = sk.alpha / sk.lambda * worker_integral(w.u, x, zeta);
        match s {
            Sector::Services => out.workers_low = val,
            Sector::Manufacturing => out.workers_high = val,
        }
    }
    for s in Sector::ALL {
        let sec = params.sector(s);
        let se = eq.sector(s);
        let mut c = (T::one() - t) * se.profit_pre_tax;
        if opts.capitalists_receive_y0 {
            c = c + y0;
        }
        if opts.include_foreign_income {
            let (ks, km) = opts.capital_endowment.ok_or_else(|| {
                Error::Config("foreign income requires capital endowments".into())
            })?;
            let endow = match s {
                Sector::Services => ks,
                Sector::Manufacturing => km,
            };
            c = c + sec.foreign_return * (endow - se.capital_per_firm);
        }
        check_consumption(
            match s {
                Sector::Services => "services capitalists",
                Sector::Manufacturing => "manufacturing capitalists",
            },
            c,
            zeta,
        )?;
        let val = sec.mass * welfare_g(c, zeta);
        match s {
            Sector::Services => out.capitalists_services = val,
            Sector::Manufacturing => out.capitalists_manufacturing = val,
        }
    }
    out.total = out.inactive
        + out.workers_low
        + out.workers_high
        + out.capitalists_services
        + out.capitalists_manufacturing;
    Ok(out)
}
