//! Firm problem of one sector, written in logs.
//!
//! Given the workers' net value of search `x = U - y0`, indifference
//! `x = p(θ)(1-τ)w` pins tightness as a function of the posted wage, so
//! firms face `q̃(w) = q(θ(w))`. Unknowns are `(ln w, ln v, ln k)`, or
//! `(ln v, ln k)` when the minimum wage binds. Capital drops out when
//! `β_k = 0`.
//!
//! Below `θ = δ₀^(1/δ₁)` the job-filling rate is capped at one and stops
//! responding to the wage. That region is reachable only when a high
//! minimum wage holds tightness down; the constrained branch handles it
//! directly, since its FOCs do not involve `q̃_w`.

use crate::model::{SectorParams, SkillParams};
use crate::{lit, Result, Scalar};

use super::newton::{damped_newton, solve_dense};

#[derive(Debug, Clone, Copy)]
pub(crate) struct FirmCtx<T> {
    pub sec: SectorParams<T>,
    pub sk: SkillParams<T>,
    /// `ln(1-τ)`.
    pub ln_a: T,
    pub one_minus_t: T,
    /// Binding wage in annual units, if the constrained branch is solved.
    pub wbar: Option<T>,
}

/// Log-quantities of a firm at a candidate point.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Kin<T> {
    pub lw: T,
    pub lv: T,
    pub lk: T,
    pub lx: T,
    pub lth: T,
    pub lq: T,
    /// `q` sits at its cap of one.
    pub q_capped: bool,
    pub lphin: T,
    pub lphik: T,
}

/// Solution of the firm problem for a given `x`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct FirmSolution<T> {
    pub kin: Kin<T>,
    /// `d ln v / d ln x` and `d ln w / d ln x` along the solution.
    pub dlv_dlx: T,
    pub dlw_dlx: T,
    pub residual: T,
}

impl<T: Scalar> FirmCtx<T> {
    pub fn has_k(&self) -> bool {
        self.sec.beta_k > T::zero()
    }

    /// `1/(1-δ₁)`, the response of `ln θ` to `ln p`.
    fn c(&self) -> T {
        T::one() / (T::one() - self.sk.delta1)
    }

    pub fn kin(&self, lw: T, lv: T, lk: T, lx: T) -> Kin<T> {
        let d1 = self.sk.delta1;
        let lp = lx - self.ln_a - lw;
        let lth = (lp - self.sk.delta0.ln()) * self.c();
        let lq_raw = self.sk.delta0.ln() - d1 * lth;
        let q_capped = lq_raw > T::zero();
        let lq = if q_capped { T::zero() } else { lq_raw };
        let ln = lq + lv;
        let kpart = if self.has_k() {
            self.sec.beta_k * lk
        } else {
            T::zero()
        };
        let lr = self.sec.psi.ln() + kpart + self.sec.beta_n * ln;
        let lphin = self.sec.beta_n.ln() + lr - ln;
        let lphik = if self.has_k() {
            self.sec.beta_k.ln() + lr - lk
        } else {
            T::neg_infinity()
        };
        Kin {
            lw,
            lv,
            lk,
            lx,
            lth,
            lq,
            q_capped,
            lphin,
            lphik,
        }
    }

    fn capital_resid(&self, k: &Kin<T>) -> T {
        self.one_minus_t.ln() + k.lphik - self.sec.foreign_return.ln()
    }

    /// Unconstrained residuals: wage FOC `φ_n = w/δ₁`, vacancy FOC
    /// `(φ_n - w) q = η_v`, capital FOC `(1-t) φ_k = r*(1-t*)`.
    fn resid_free(&self, k: &Kin<T>) -> Vec<T> {
        let d1 = self.sk.delta1;
        let r1 = k.lphin - k.lw + d1.ln();
        let r2 =
            k.lw + ((T::one() - d1) / d1).ln() + k.lq - self.sk.kappa0.ln() - self.sk.kappa1 * k.lv;
        let mut out = vec![r1, r2];
        if self.has_k() {
            out.push(self.capital_resid(k));
        }
        out
    }

    /// Constrained residuals: vacancy and capital FOCs at `w = w̄`.
    fn resid_bound(&self, k: &Kin<T>) -> Option<Vec<T>> {
        let wbar = self.wbar?;
        let gap = k.lphin.exp() - wbar;
        if !(gap > T::zero()) {
            return None;
        }
        let r2 = gap.ln() + k.lq - self.sk.kappa0.ln() - self.sk.kappa1 * k.lv;
        let mut out = vec![r2];
        if self.has_k() {
            out.push(self.capital_resid(k));
        }
        Some(out)
    }

    /// Partial derivatives of each residual with respect to `ln p`
    /// (holding `ln v`, `ln k` fixed). `ln x` enters only through `ln p`.
    fn dp_free(&self, k: &Kin<T>) -> Vec<T> {
        let bn = self.sec.beta_n;
        let g = self.dlq_dlp(k);
        let mut out = vec![(bn - T::one()) * g, g];
        if self.has_k() {
            out.push(bn * g);
        }
        out
    }

    /// `d ln q / d ln p`: `-δ₁/(1-δ₁)` below the cap, zero on it.
    fn dlq_dlp(&self, k: &Kin<T>) -> T {
        if k.q_capped {
            T::zero()
        } else {
            -self.sk.delta1 * self.c()
        }
    }

    fn dp_bound(&self, k: &Kin<T>) -> Vec<T> {
        let bn = self.sec.beta_n;
        let g = self.dlq_dlp(k);
        let wbar = self.wbar.expect("constrained branch");
        let phin = k.lphin.exp();
        let s = phin / (phin - wbar);
        let mut out = vec![g * (s * (bn - T::one()) + T::one())];
        if self.has_k() {
            out.push(bn * g);
        }
        out
    }

    /// Jacobian of the unconstrained residuals in `(ln w, ln v[, ln k])`.
    fn jac_free(&self, k: &Kin<T>) -> Vec<Vec<T>> {
        let (bn, bk, k1) = (self.sec.beta_n, self.sec.beta_k, self.sk.kappa1);
        let dp = self.dp_free(k);
        // d ln p / d ln w = -1.
        let mut j = vec![
            vec![-T::one() - dp[0], bn - T::one()],
            vec![T::one() - dp[1], -k1],
        ];
        if self.has_k() {
            j[0].push(bk);
            j[1].push(T::zero());
            j.push(vec![-dp[2], bn, bk - T::one()]);
        }
        j
    }

    /// Jacobian of the constrained residuals in `(ln v[, ln k])`.
    fn jac_bound(&self, k: &Kin<T>) -> Vec<Vec<T>> {
        let (bn, bk, k1) = (self.sec.beta_n, self.sec.beta_k, self.sk.kappa1);
        let wbar = self.wbar.expect("constrained branch");
        let phin = k.lphin.exp();
        let s = phin / (phin - wbar);
        let mut j = vec![vec![s * (bn - T::one()) - k1]];
        if self.has_k() {
            j[0].push(s * bk);
            j.push(vec![bn, bk - T::one()]);
        }
        j
    }

    fn unpack_free(&self, z: &[T], lx: T) -> Kin<T> {
        let lk = if self.has_k() { z[2] } else { T::zero() };
        self.kin(z[0], z[1], lk, lx)
    }

    fn unpack_bound(&self, z: &[T], lx: T) -> Kin<T> {
        let lk = if self.has_k() { z[1] } else { T::zero() };
        self.kin(self.wbar.expect("constrained branch").ln(), z[0], lk, lx)
    }

    /// Solves the firm FOCs at fixed `ln x`. `guess` is `(ln w, ln v, ln k)`.
    pub fn solve(
        &self,
        lx: T,
        guess: (T, T, T),
        tol: T,
        max_iter: usize,
    ) -> Result<FirmSolution<T>> {
        match self.wbar {
            None => self.solve_free(lx, guess, tol, max_iter),
            Some(_) => self.solve_bound(lx, guess, tol, max_iter),
        }
    }

    fn solve_free(
        &self,
        lx: T,
        guess: (T, T, T),
        tol: T,
        max_iter: usize,
    ) -> Result<FirmSolution<T>> {
        let mut z0 = vec![guess.0, guess.1];
        if self.has_k() {
            z0.push(guess.2);
        }
        let res = damped_newton(
            &z0,
            |z: &[T]| {
                let r = self.resid_free(&self.unpack_free(z, lx));
                r.iter().all(|v| v.is_finite()).then_some(r)
            },
            Some(|z: &[T]| self.jac_free(&self.unpack_free(z, lx))),
            tol,
            max_iter,
        )?;
        let kin = self.unpack_free(&res.x, lx);
        // Implicit function theorem: dz/dlx = -J⁻¹ ∂F/∂lx with ∂F/∂lx = dp.
        let neg: Vec<T> = self.dp_free(&kin).iter().map(|v| -*v).collect();
        let dz =
            solve_dense(&self.jac_free(&kin), &neg).unwrap_or_else(|| vec![T::zero(); neg.len()]);
        Ok(FirmSolution {
            kin,
            dlw_dlx: dz[0],
            dlv_dlx: dz[1],
            residual: res.residual,
        })
    }

    fn solve_bound(
        &self,
        lx: T,
        guess: (T, T, T),
        tol: T,
        max_iter: usize,
    ) -> Result<FirmSolution<T>> {
        let wbar = self.wbar.expect("constrained branch");
        let mut lv = guess.1;
        let lk = guess.2;
        // Walk vacancies down until the wage gap φ_n - w̄ is positive.
        for _ in 0..400 {
            let k = self.kin(wbar.ln(), lv, lk, lx);
            if k.lphin.exp() > wbar * lit(1.0 + 1e-9) {
                break;
            }
            lv = lv - lit(0.5);
        }
        let mut z0 = vec![lv];
        if self.has_k() {
            z0.push(lk);
        }
        let res = damped_newton(
            &z0,
            |z: &[T]| {
                let r = self.resid_bound(&self.unpack_bound(z, lx))?;
                r.iter().all(|v| v.is_finite()).then_some(r)
            },
            Some(|z: &[T]| self.jac_bound(&self.unpack_bound(z, lx))),
            tol,
            max_iter,
        )?;
        let kin = self.unpack_bound(&res.x, lx);
        let neg: Vec<T> = self.dp_bound(&kin).iter().map(|v| -*v).collect();
        let dz =
            solve_dense(&self.jac_bound(&kin), &neg).unwrap_or_else(|| vec![T::zero(); neg.len()]);
        Ok(FirmSolution {
            kin,
            dlw_dlx: T::zero(),
            dlv_dlx: dz[0],
            residual: res.residual,
        })
    }

    /// `d ln v / d ln w̄` and `d ln θ / d ln w̄` at fixed `ln x` on the
    /// constrained branch, plus the same derivatives with respect to `ln x`.
    pub fn bound_sensitivities(&self, kin: &Kin<T>) -> BoundSens<T> {
        let c = self.c();
        let wbar = self.wbar.expect("constrained branch");
        let phin = kin.lphin.exp();
        let j = self.jac_bound(kin);
        let dp = self.dp_bound(kin);
        // Direct dependence of r2 on ln w̄: through ln p (d ln p/d ln w̄ = -1)
        // and the -w̄ inside the log gap.
        let mut dw = vec![-dp[0] - wbar / (phin - wbar)];
        if self.has_k() {
            dw.push(-dp[1]);
        }
        let neg_w: Vec<T> = dw.iter().map(|v| -*v).collect();
        let neg_x: Vec<T> = dp.iter().map(|v| -*v).collect();
        let zw = solve_dense(&j, &neg_w).unwrap_or_else(|| vec![T::zero(); dw.len()]);
        let zx = solve_dense(&j, &neg_x).unwrap_or_else(|| vec![T::zero(); dp.len()]);
        // Without capital the second unknown is absent and ln k does not move.
        let second = |z: &[T]| if z.len() > 1 { z[1] } else { T::zero() };
        BoundSens {
            dlv_dlw: zw[0],
            dlv_dlx: zx[0],
            dlk_dlw: second(&zw),
            dlk_dlx: second(&zx),
            dlth_dlx: c,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct BoundSens<T> {
    pub dlv_dlw: T,
    pub dlv_dlx: T,
    pub dlk_dlw: T,
    pub dlk_dlx: T,
    pub dlth_dlx: T,
}
