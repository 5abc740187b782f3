//! One runner per experiment family. Each returns per-ε rows for the CSV
//! table, a verdict against the configured thresholds and a JSON record.

mod metric;
mod transport;

use std::fmt;

use serde::Serialize;
use serde_json::Value;
use wanelab::bundle_models::BundleModel;
use wanelab::collapse_lab::CollapseSchedule;
use wanelab::error::{Result, WaneError};

use crate::config::{Experiment, ExperimentConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Verdict {
    Pass,
    Approx,
    Fail,
}

impl Verdict {
    /// `Pass` when every check holds, `Approx` when some do.
    pub fn grade(checks: &[bool]) -> Self {
        if checks.iter().all(|&c| c) {
            Verdict::Pass
        } else if checks.iter().any(|&c| c) {
            Verdict::Approx
        } else {
            Verdict::Fail
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "PASS",
            Verdict::Approx => "APPROX",
            Verdict::Fail => "FAIL",
        })
    }
}

/// One CSV row. Columns that do not apply to an experiment stay empty.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Row {
    pub eps: f64,
    pub coupling_norm: Option<f64>,
    pub hh_ortho_residual: Option<f64>,
    pub extra: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Outcome {
    pub verdict: Verdict,
    pub key_metric: &'static str,
    pub key_value: f64,
    pub extra_columns: Vec<&'static str>,
    pub rows: Vec<Row>,
    pub details: Value,
}

/// Chart geometry shared by the runners: the chart center and a length
/// scale `min(1, half of the narrowest chart side)`.
pub(crate) struct Chart {
    pub center: Vec<f64>,
    pub scale: f64,
}

impl Chart {
    pub fn of(b: &BundleModel) -> Result<Self> {
        if b.base_dim_n < 2 {
            return Err(WaneError::Unsupported {
                model: b.name.clone(),
                what: "the experiment loops need a base of dimension at least 2".into(),
            });
        }
        let d = &b.chart_domain;
        let half = d.lo.iter().zip(&d.hi).map(|(l, h)| 0.5 * (h - l)).fold(f64::INFINITY, f64::min);
        Ok(Chart { center: d.center().iter().copied().collect(), scale: half.min(1.0) })
    }

    /// The center shifted by `scale·(dx, dy)` in the first two coordinates.
    pub fn offset(&self, dx: f64, dy: f64) -> Vec<f64> {
        let mut p = self.center.clone();
        p[0] += self.scale * dx;
        p[1] += self.scale * dy;
        p
    }
}

pub fn run_experiment(cfg: &ExperimentConfig, b: &BundleModel) -> Result<Outcome> {
    let s = &cfg.schedule;
    let sched = CollapseSchedule::geometric(s.eps0, s.ratio, s.count)?;
    match cfg.experiment {
        Experiment::CollapseLimit => transport::collapse_limit(cfg, b, &sched),
        Experiment::ShrinkHolonomy => transport::shrink_holonomy(cfg, b, &sched),
        Experiment::WaneGroup => transport::wane_group(cfg, b, &sched),
        Experiment::Uniqueness => transport::uniqueness(cfg, b, &sched),
        Experiment::ParamdepdGap => transport::paramdepd_gap(cfg),
        Experiment::FiberGh => metric::fiber_gh(cfg, b, &sched),
        Experiment::BergerProduct => metric::berger_product(cfg, b, &sched),
    }
}
