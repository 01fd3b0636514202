//! Back-solves the income aggregates in `configs/table5.toml`.
//!
//! Only ratios enter the critical weight, so PTW is fixed at 1e11 and
//! IT = 0.14 PTW. With g_K = 1 the weight is affine in r = PTP/PTW and
//! does not depend on t; for each period we print the interval of r in
//! which both elasticity panels round to the reported two-decimal weights.
//! The per-capita profit of the past period then follows from requiring
//! the zeta = 1, high-elasticity, statutory-rate cell to equal 0.12.

use mwpolicy::suffstats::bundled_table5;

fn main() {
    let cfg = bundled_table5();
    let ratio = cfg.it_to_ptw_ratio;
    let base = cfg.eps_u_pretax + cfg.eps_it * ratio;
    // g(r) = (-eps_profit r + eps_it ratio) / base
    let r_for = |g: f64, eps: f64| (cfg.eps_it * ratio - g * base) / eps;
    let targets = [("past", 0.98, 1.52), ("today", 0.99, 1.54)];
    for (name, g_low, g_high) in targets {
        let lo_a = r_for(g_low - 0.005, cfg.eps_profit_low);
        let hi_a = r_for(g_low + 0.005, cfg.eps_profit_low);
        let lo_b = r_for(g_high - 0.005, cfg.eps_profit_high);
        let hi_b = r_for(g_high + 0.005, cfg.eps_profit_high);
        let (lo, hi) = (lo_a.max(lo_b), hi_a.min(hi_b));
        println!("{name}: PTP/PTW in [{lo:.5}, {hi:.5})");
    }

    let past = cfg
        .periods
        .iter()
        .find(|p| p.name == "past")
        .expect("past period");
    let (eps, t) = (cfg.eps_profit_high, past.t_statutory);
    let num = cfg.eps_it * past.it - eps * t * past.ptp;
    let worker = cfg.eps_u_pretax * past.ptw + cfg.eps_it * past.it;
    let omega_inv = (num / 0.12 - worker) / (eps * past.ptp * (1.0 - t));
    let u_post = past.u_per_capita * (1.0 + ratio);
    let profit = u_post / ((1.0 - t) * omega_inv);
    println!(
        "past: U_pre = {}, profit per capita = {profit:?}",
        past.u_per_capita
    );
}
