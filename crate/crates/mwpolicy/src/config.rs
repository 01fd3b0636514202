//! Run configuration: one TOML schema shared by every engine.
//!
//! Parameter keys mirror the symbols of the calibration tables
//! (`delta0_l`, `beta_n_S`, `K_M`, ...). Every section is optional; missing
//! values fall back to the bundled calibration. `--set key=value`
//! overrides are applied to the parsed TOML tree before it is
//! type-checked, so a misspelled key or a wrong type is a configuration
//! error rather than a silent no-op.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::equilibrium::{SolverOptions, WelfareOptions};
use crate::model::{ModelParams, Policy, SectorParams, SkillParams, DEFAULT_HOURS_ANNUALIZATION};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ParamsConfig {
    pub alpha_l: f64,
    pub alpha_h: f64,
    pub lambda_l: f64,
    pub lambda_h: f64,
    pub delta0_l: f64,
    pub delta0_h: f64,
    pub delta1_l: f64,
    pub delta1_h: f64,
    pub kappa0_l: f64,
    pub kappa0_h: f64,
    pub kappa1_l: f64,
    pub kappa1_h: f64,
    #[serde(rename = "psi_S")]
    pub psi_s: f64,
    #[serde(rename = "psi_M")]
    pub psi_m: f64,
    #[serde(rename = "beta_n_S")]
    pub beta_n_s: f64,
    #[serde(rename = "beta_k_S")]
    pub beta_k_s: f64,
    #[serde(rename = "beta_n_M")]
    pub beta_n_m: f64,
    #[serde(rename = "beta_k_M")]
    pub beta_k_m: f64,
    #[serde(rename = "K_S")]
    pub k_s: f64,
    #[serde(rename = "K_M")]
    pub k_m: f64,
    /// After-tax foreign return `r*(1-t*)` for services.
    #[serde(rename = "r_S")]
    pub r_s: f64,
    #[serde(rename = "r_M")]
    pub r_m: f64,
    pub hours_annualization: f64,
}

impl Default for ParamsConfig {
    /// The bundled calibration. Each value rounds (or, for `delta1_l`,
    /// truncates) to the published two- or three-decimal figure; the extra
    /// digits make the printed model moments reproducible.
    fn default() -> Self {
        ParamsConfig {
            alpha_l: 0.68,
            alpha_h: 0.32,
            lambda_l: 15.625,
            lambda_h: 77.971222,
            delta0_l: 0.85022994,
            delta0_h: 0.9210407,
            delta1_l: 0.516,
            delta1_h: 0.7940624,
            kappa0_l: 0.72740167,
            kappa0_h: 0.23870778,
            kappa1_l: 0.98738763,
            kappa1_h: 1.23301906,
            psi_s: 31.45949007,
            psi_m: 36.78,
            beta_n_s: 0.6467594,
            beta_k_s: 0.14340389,
            beta_n_m: 0.44026737,
            beta_k_m: 0.3494108,
            k_s: 0.03806488,
            k_m: 0.00790056,
            r_s: 0.032,
            r_m: 0.052,
            hours_annualization: DEFAULT_HOURS_ANNUALIZATION,
        }
    }
}

impl ParamsConfig {
    /// The two-decimal values exactly as printed in the calibration tables.
    pub fn printed() -> Self {
        ParamsConfig {
            alpha_l: 0.68,
            alpha_h: 0.32,
            lambda_l: 15.62,
            lambda_h: 77.97,
            delta0_l: 0.85,
            delta0_h: 0.92,
            delta1_l: 0.51,
            delta1_h: 0.79,
            kappa0_l: 0.727,
            kappa0_h: 0.239,
            kappa1_l: 0.987,
            kappa1_h: 1.233,
            psi_s: 31.46,
            psi_m: 36.78,
            beta_n_s: 0.65,
            beta_k_s: 0.14,
            beta_n_m: 0.44,
            beta_k_m: 0.35,
            k_s: 0.038,
            k_m: 0.008,
            r_s: 0.032,
            r_m: 0.052,
            hours_annualization: DEFAULT_HOURS_ANNUALIZATION,
        }
    }

    pub fn to_model(&self) -> Result<ModelParams<f64>> {
        ModelParams::new(
            SkillParams::new(
                self.alpha_l,
                self.lambda_l,
                self.delta0_l,
                self.delta1_l,
                self.kappa0_l,
                self.kappa1_l,
            )?,
            SkillParams::new(
                self.alpha_h,
                self.lambda_h,
                self.delta0_h,
                self.delta1_h,
                self.kappa0_h,
                self.kappa1_h,
            )?,
            SectorParams::new(self.psi_s, self.beta_n_s, self.beta_k_s, self.k_s, self.r_s)?,
            SectorParams::new(self.psi_m, self.beta_n_m, self.beta_k_m, self.k_m, self.r_m)?,
            self.hours_annualization,
        )
    }

    pub fn from_model(p: &ModelParams<f64>) -> Self {
        ParamsConfig {
            alpha_l: p.low.alpha,
            alpha_h: p.high.alpha,
            lambda_l: p.low.lambda,
            lambda_h: p.high.lambda,
            delta0_l: p.low.delta0,
            delta0_h: p.high.delta0,
            delta1_l: p.low.delta1,
            delta1_h: p.high.delta1,
            kappa0_l: p.low.kappa0,
            kappa0_h: p.high.kappa0,
            kappa1_l: p.low.kappa1,
            kappa1_h: p.high.kappa1,
            psi_s: p.services.psi,
            psi_m: p.manufacturing.psi,
            beta_n_s: p.services.beta_n,
            beta_k_s: p.services.beta_k,
            beta_n_m: p.manufacturing.beta_n,
            beta_k_m: p.manufacturing.beta_k,
            k_s: p.services.mass,
            k_m: p.manufacturing.mass,
            r_s: p.services.foreign_return,
            r_m: p.manufacturing.foreign_return,
            hours_annualization: p.hours_annualization,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PolicyConfig {
    pub tau_l: f64,
    pub tau_h: f64,
    pub t: f64,
    /// Statutory hourly minimum wage; absent means no minimum wage.
    pub mw_hourly: Option<f64>,
    /// Lump sum used when the budget is not closed.
    pub y0: f64,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        let b = Policy::<f64>::baseline();
        PolicyConfig {
            tau_l: b.tau_l,
            tau_h: b.tau_h,
            t: b.t,
            mw_hourly: None,
            y0: b.y0,
        }
    }
}

impl PolicyConfig {
    pub fn to_policy(&self) -> Result<Policy<f64>> {
        let p = Policy {
            tau_l: self.tau_l,
            tau_h: self.tau_h,
            t: self.t,
            mw_hourly: self.mw_hourly,
            y0: self.y0,
        };
        p.validate()?;
        Ok(p)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
#[allow(non_snake_case)]
pub struct WelfareConfig {
    pub zeta: f64,
    pub capitalists_receive_y0: bool,
    pub include_foreign_income: bool,
    pub capital_endowment_S: Option<f64>,
    pub capital_endowment_M: Option<f64>,
}

impl Default for WelfareConfig {
    fn default() -> Self {
        WelfareConfig {
            zeta: 1.0,
            capitalists_receive_y0: true,
            include_foreign_income: false,
            capital_endowment_S: None,
            capital_endowment_M: None,
        }
    }
}

impl WelfareConfig {
    pub fn to_options(&self) -> Result<WelfareOptions<f64>> {
        let endow = match (self.capital_endowment_S, self.capital_endowment_M) {
            (Some(s), Some(m)) => Some((s, m)),
            (None, None) => None,
            _ => {
                return Err(Error::Config(
                    "capital_endowment_S and capital_endowment_M must be given together".into(),
                ))
            }
        };
        if self.include_foreign_income && endow.is_none() {
            return Err(Error::Config(
                "include_foreign_income needs capital endowments".into(),
            ));
        }
        Ok(WelfareOptions {
            zeta: self.zeta,
            capitalists_receive_y0: self.capitalists_receive_y0,
            include_foreign_income: self.include_foreign_income,
            capital_endowment: endow,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub foc_tol: f64,
    pub foc_max_iter: usize,
    pub market_tol: f64,
    pub market_max_iter: usize,
    pub y0_lo: f64,
    pub y0_hi: f64,
    pub y0_max_iter: usize,
    pub budget_rel_tol: f64,
    pub bind_margin: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let d = SolverOptions::<f64>::default();
        SolverConfig {
            foc_tol: d.foc_tol,
            foc_max_iter: d.foc_max_iter,
            market_tol: d.market_tol,
            market_max_iter: d.market_max_iter,
            y0_lo: d.y0_lo,
            y0_hi: d.y0_hi,
            y0_max_iter: d.y0_max_iter,
            budget_rel_tol: d.budget_rel_tol,
            bind_margin: d.bind_margin,
        }
    }
}

impl SolverConfig {
    pub fn to_options(&self) -> Result<SolverOptions<f64>> {
        if !(self.y0_hi > self.y0_lo) || self.y0_lo < 0.0 {
            return Err(Error::Config(
                "y0 bracket must satisfy 0 <= y0_lo < y0_hi".into(),
            ));
        }
        Ok(SolverOptions {
            foc_tol: self.foc_tol,
            foc_max_iter: self.foc_max_iter,
            market_tol: self.market_tol,
            market_max_iter: self.market_max_iter,
            y0_lo: self.y0_lo,
            y0_hi: self.y0_hi,
            y0_max_iter: self.y0_max_iter,
            budget_rel_tol: self.budget_rel_tol,
            bind_margin: self.bind_margin,
        })
    }
}

/// Calibration settings. Moment tables use the moment keys of
/// [`crate::calibration::MOMENT_KEYS`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CalibrationConfig {
    /// `"data"` or `"model"` selects a bundled target column; `"custom"`
    /// uses `targets`.
    pub target_set: String,
    pub targets: BTreeMap<String, f64>,
    /// Per-moment weights; moments not listed get weight 1.
    pub weights: BTreeMap<String, f64>,
    /// Per-parameter `[lo, hi]` boxes overriding the defaults.
    pub bounds: BTreeMap<String, [f64; 2]>,
    pub max_evals: usize,
    pub restarts: usize,
    /// Additional Latin-hypercube starting points.
    pub multistart: usize,
    pub tolerance: f64,
    /// Estimate services and manufacturing parameters separately; valid
    /// because each block only moves its own moments.
    pub separable: bool,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        CalibrationConfig {
            target_set: "data".into(),
            targets: BTreeMap::new(),
            weights: BTreeMap::new(),
            bounds: BTreeMap::new(),
            max_evals: 20_000,
            restarts: 3,
            multistart: 0,
            tolerance: 1e-14,
            separable: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub tau_l_start: f64,
    pub tau_l_stop: f64,
    pub tau_l_step: f64,
    pub t_start: f64,
    pub t_stop: f64,
    pub t_step: f64,
    pub tau_h: f64,
    pub mw_start: f64,
    pub mw_stop: f64,
    pub mw_step: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            tau_l_start: -1.0,
            tau_l_stop: 0.3,
            tau_l_step: 0.1,
            t_start: 0.0,
            t_stop: 0.5,
            t_step: 0.05,
            tau_h: 0.3,
            mw_start: 4.0,
            mw_stop: 17.0,
            mw_step: 0.25,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub params: ParamsConfig,
    #[serde(default)]
    pub policy: PolicyConfig,
    #[serde(default)]
    pub welfare: WelfareConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub calibration: CalibrationConfig,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub suffstats: Option<crate::suffstats::Table5Config>,
    #[serde(default)]
    pub events: Option<crate::econpanel::EventsConfig>,
}

/// Parses one `key=value` override. The value is read as a TOML literal
/// and falls back to a bare string.
pub fn parse_override(s: &str) -> Result<(String, toml::Value)> {
    let (key, raw) = s
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override `{s}` is not of the form key=value")))?;
    let key = key.trim();
    if key.is_empty() {
        return Err(Error::Config(format!("override `{s}` has an empty key")));
    }
    let raw = raw.trim();
    let value = match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").expect("parsed key present"),
        Err(_) => toml::Value::String(raw.to_string()),
    };
    Ok((key.to_string(), value))
}

fn apply_override(root: &mut toml::Table, key: &str, value: toml::Value) -> Result<()> {
    let parts: Vec<&str> = key.split('.').collect();
    let mut node = root;
    for part in &parts[..parts.len() - 1] {
        let entry = node
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        node = entry.as_table_mut().ok_or_else(|| {
            Error::Config(format!("override path `{key}` crosses a non-table value"))
        })?;
    }
    node.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

impl Config {
    /// Parses TOML text and applies `key=value` overrides (dotted keys such
    /// as `params.delta0_l=0.9` or `policy.mw_hourly=12`).
    pub fn from_toml_with_overrides(text: &str, overrides: &[String]) -> Result<Self> {
        let mut root: toml::Table =
            toml::from_str(text).map_err(|e| Error::Config(format!("invalid TOML: {e}")))?;
        for o in overrides {
            let (k, v) = parse_override(o)?;
            apply_override(&mut root, &k, v)?;
        }
        let cfg: Config = toml::Value::Table(root)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        Self::from_toml_with_overrides(text, &[])
    }

    pub fn validate(&self) -> Result<()> {
        self.params.to_model()?;
        self.policy.to_policy()?;
        self.welfare.to_options()?;
        self.solver.to_options()?;
        Ok(())
    }

    /// Canonical TOML rendering; the CLI hashes this for output headers.
    pub fn to_canonical_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn model_params(&self) -> Result<ModelParams<f64>> {
        self.params.to_model()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_are_type_checked() {
        let cfg = Config::from_toml_with_overrides("", &["params.delta0_l=0.9".into()]).unwrap();
        assert_eq!(cfg.params.delta0_l, 0.9);
        let err = Config::from_toml_with_overrides("", &["params.delta0_q=0.9".into()]);
        assert!(matches!(err, Err(Error::Config(_))));
        let err = Config::from_toml_with_overrides("", &["params.delta0_l=abc".into()]);
        assert!(matches!(err, Err(Error::Config(_))));
    }

    #[test]
    fn canonical_round_trip() {
        let cfg = Config::default();
        let again = Config::from_toml(&cfg.to_canonical_toml()).unwrap();
        assert_eq!(cfg, again);
    }
}
