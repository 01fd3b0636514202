//! Empirical side: event detection on minimum-wage panels, stacked
//! event-specific datasets and fixed-effects estimation with clustered
//! errors, plus a synthetic-panel generator for validation.

pub mod events;
pub mod fit;
pub mod panel;
pub mod stack;
pub mod synth;

use serde::{Deserialize, Serialize};

pub use events::{detect_events, Detection, DetectionRules, Event, Increase, Status};
pub use fit::{
    fit_fe, fit_wls, implied_elasticity, ClusterKey, Design, EstimateReport, FeDim, FitSpec, Groups,
};
pub use panel::{MwPanel, MwRow, OutcomeRow};
pub use stack::{build_stack, StackRow, StackedPanel, WeightMode};
pub use synth::{synth_panel, SynthConfig, SynthPanel};

use crate::Result;

/// `[events]` section of the run configuration. Data paths are relative to
/// the working directory; without them the synthetic generator is used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct EventsConfig {
    pub mw_panel: Option<String>,
    pub deflator: Option<String>,
    pub outcomes: Option<String>,
    pub rules: DetectionRules,
    pub weight_mode: WeightMode,
    pub fit: FitSpec,
    pub synth: Option<SynthConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EventsRun {
    pub detection: Detection,
    pub stack_rows: usize,
    pub diagnostics: Vec<String>,
    pub report: EstimateReport,
}

/// Detection, stacking and estimation in one call.
pub fn run_events(
    panel: &MwPanel,
    outcomes: &[OutcomeRow],
    cfg: &EventsConfig,
) -> Result<EventsRun> {
    let detection = detect_events(panel, &cfg.rules)?;
    let stack = build_stack(
        outcomes,
        panel,
        &detection,
        cfg.rules.window,
        cfg.weight_mode,
    )?;
    let report = fit_fe(&stack, &cfg.fit)?;
    Ok(EventsRun {
        stack_rows: stack.rows.len(),
        diagnostics: stack.diagnostics,
        detection,
        report,
    })
}
