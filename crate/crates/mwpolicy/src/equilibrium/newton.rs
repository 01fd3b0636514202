//! Small dense damped Newton solver used by the firm and market layers.

use crate::scalar::f;
use crate::{lit, Error, Result, Scalar};

/// Gaussian elimination with partial pivoting on a row-major `n×n` system.
/// Returns `None` when a pivot vanishes.
pub(crate) fn solve_dense<T: Scalar>(a: &[Vec<T>], b: &[T]) -> Option<Vec<T>> {
    let n = b.len();
    let mut m: Vec<Vec<T>> = a.to_vec();
    let mut rhs = b.to_vec();
    for col in 0..n {
        let mut piv = col;
        for row in col + 1..n {
            if m[row][col].abs() > m[piv][col].abs() {
                piv = row;
            }
        }
        if !(m[piv][col].abs() > T::epsilon() * lit(1e-6)) {
            return None;
        }
        m.swap(col, piv);
        rhs.swap(col, piv);
        for row in col + 1..n {
            let factor = m[row][col] / m[col][col];
            let (top, bottom) = m.split_at_mut(row);
            for (dst, src) in bottom[0][col..].iter_mut().zip(&top[col][col..]) {
                *dst = *dst - factor * *src;
            }
            rhs[row] = rhs[row] - factor * rhs[col];
        }
    }
    let mut x = vec![T::zero(); n];
    for row in (0..n).rev() {
        let mut acc = rhs[row];
        for c in row + 1..n {
            acc = acc - m[row][c] * x[c];
        }
        x[row] = acc / m[row][row];
    }
    if x.iter().all(|v| v.is_finite()) {
        Some(x)
    } else {
        None
    }
}

fn norm_inf<T: Scalar>(r: &[T]) -> T {
    r.iter().fold(T::zero(), |acc, v| acc.max(v.abs()))
}

fn fd_jacobian<T: Scalar, F>(x: &[T], r0: &[T], resid: &F) -> Option<Vec<Vec<T>>>
where
    F: Fn(&[T]) -> Option<Vec<T>>,
{
    let n = x.len();
    let mut jac = vec![vec![T::zero(); n]; r0.len()];
    let h_base = T::epsilon().sqrt();
    for j in 0..n {
        let h = h_base * (T::one() + x[j].abs());
        let mut xp = x.to_vec();
        xp[j] = xp[j] + h;
        // Step backwards if the forward point leaves the domain.
        let (rp, hh) = match resid(&xp) {
            Some(r) => (r, h),
            None => {
                xp[j] = x[j] - h;
                (resid(&xp)?, -h)
            }
        };
        for i in 0..r0.len() {
            jac[i][j] = (rp[i] - r0[i]) / hh;
        }
    }
    Some(jac)
}

pub(crate) struct NewtonResult<T> {
    pub x: Vec<T>,
    pub residual: T,
}

/// Damped Newton iteration on `resid(x) = 0`.
///
/// `resid` returns `None` outside its domain; the line search backs off
/// until it lands inside. The analytic Jacobian is used when supplied and
/// a forward-difference one replaces it whenever it is singular or the
/// line search stalls.
pub(crate) fn damped_newton<T, F, J>(
    x0: &[T],
    resid: F,
    jac: Option<J>,
    tol: T,
    max_iter: usize,
) -> Result<NewtonResult<T>>
where
    T: Scalar,
    F: Fn(&[T]) -> Option<Vec<T>>,
    J: Fn(&[T]) -> Vec<Vec<T>>,
{
    let mut x = x0.to_vec();
    let mut r = resid(&x).ok_or_else(|| Error::solver("initial point outside residual domain"))?;
    let mut norm = norm_inf(&r);
    let mut trace = Vec::new();
    for it in 0..max_iter {
        if norm <= tol {
            return Ok(NewtonResult { x, residual: norm });
        }
        let mut accepted = false;
        for use_fd in [false, true] {
            let jm = match (&jac, use_fd) {
                (Some(j), false) => j(&x),
                (None, false) => continue,
                (_, true) => match fd_jacobian(&x, &r, &resid) {
                    Some(j) => j,
                    None => continue,
                },
            };
            let neg: Vec<T> = r.iter().map(|v| -*v).collect();
            let Some(step) = solve_dense(&jm, &neg) else {
                continue;
            };
            let mut lam = T::one();
            for _ in 0..60 {
                let trial: Vec<T> = x.iter().zip(&step).map(|(a, d)| *a + lam * *d).collect();
                if let Some(rt) = resid(&trial) {
                    let nt = norm_inf(&rt);
                    if nt.is_finite() && (nt < norm || nt <= tol) {
                        x = trial;
                        r = rt;
                        norm = nt;
                        accepted = true;
                        break;
                    }
                }
                lam = lam * lit(0.5);
            }
            if accepted {
                break;
            }
        }
        trace.push(format!(
            "iter {it}: |r|={:.3e} x={:?}",
            f(norm),
            x.iter().map(|v| f(*v)).collect::<Vec<_>>()
        ));
        if !accepted {
            if trace.len() > 8 {
                trace.drain(0..trace.len() - 8);
            }
            return Err(Error::Solver {
                msg: format!("line search failed with residual {:.3e}", f(norm)),
                trace,
            });
        }
    }
    if norm <= tol {
        return Ok(NewtonResult { x, residual: norm });
    }
    if trace.len() > 8 {
        trace.drain(0..trace.len() - 8);
    }
    Err(Error::Solver {
        msg: format!(
            "no convergence after {max_iter} iterations, residual {:.3e}",
            f(norm)
        ),
        trace,
    })
}
