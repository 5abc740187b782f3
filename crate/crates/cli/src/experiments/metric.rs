use serde_json::json;
use wanelab::bundle_models::{BuiltinBundle, BundleModel};
use wanelab::collapse_lab::{estimate_wane_group, CollapseSchedule, WaneOptions};
use wanelab::error::Result;
use wanelab::linalg::{operator_norm, Mat};
use wanelab::metric_lab::{
    berger_product_check, gh_upper_bound, model_metric, product_limit_check, sample_fiber_metric, FiberOptions,
    GhOptions, GhStatus, LimitFiberModel, ProductOptions,
};

use super::{Chart, Outcome, Row, Verdict};
use crate::config::ExperimentConfig;

const FIBER_SAMPLES: usize = 40;
const PRODUCT_SAMPLES: usize = 60;
const MODEL_GENERATORS: usize = 12;
const MODEL_WORD_DEPTH: usize = 4;

fn status_code(s: GhStatus) -> f64 {
    match s {
        GhStatus::Exact => 0.0,
        GhStatus::Heuristic => 1.0,
        GhStatus::BudgetExhausted => 2.0,
    }
}

/// `ℝ^k` modulo the wane group estimated on the default schedule, trivial
/// for abelian groups.
fn limit_model(cfg: &ExperimentConfig, b: &BundleModel, x0: &[f64]) -> Result<LimitFiberModel> {
    let k = b.total_dim();
    if b.group.is_abelian() {
        return Ok(LimitFiberModel::trivial(k));
    }
    let opts = WaneOptions { seed: cfg.seed, steps: cfg.steps, ..WaneOptions::default() };
    let w = estimate_wane_group(b, x0, &CollapseSchedule::default(), 100, &opts)?;
    let id = Mat::identity(k, k);
    let gens: Vec<Mat> =
        w.generators.into_iter().filter(|g| operator_norm(&(g - &id)) > w.tol).take(MODEL_GENERATORS).collect();
    LimitFiberModel::new(k, gens, MODEL_WORD_DEPTH)
}

/// Pointed GH bound between sampled tangent vectors at the chart center,
/// with the fiber distance at each ε, and the limit quotient.
pub(super) fn fiber_gh(cfg: &ExperimentConfig, b: &BundleModel, sched: &CollapseSchedule) -> Result<Outcome> {
    let chart = Chart::of(b)?;
    let model = limit_model(cfg, b, &chart.center)?;
    let opts = FiberOptions { seed: cfg.seed, ..FiberOptions::default() };
    let mut rows = Vec::with_capacity(sched.len());
    let mut statuses = Vec::with_capacity(sched.len());
    for &eps in sched.eps_list() {
        let s = sample_fiber_metric(b, eps, &chart.center, 1.0, FIBER_SAMPLES, &opts)?;
        let target = model_metric(&model, &s.vectors)?;
        let gh = gh_upper_bound(&s.space, &target, &GhOptions::default())?;
        statuses.push(gh.status);
        rows.push(Row {
            eps,
            coupling_norm: None,
            hh_ortho_residual: None,
            extra: vec![gh.bound, status_code(gh.status)],
        });
    }
    let last = rows.last().map_or(0.0, |r| r.extra[0]);
    Ok(Outcome {
        verdict: Verdict::grade(&[last < cfg.tol("gh_bound")]),
        key_metric: "gh_bound",
        key_value: last,
        extra_columns: vec!["gh_bound", "gh_status"],
        rows,
        details: json!({
            "samples": FIBER_SAMPLES,
            "model_generators": model.generators.len(),
            "statuses": statuses,
        }),
    })
}

/// Tangent bundle against the product with the fiber algebra. The Berger
/// sphere check is used for the Hopf bundle.
pub(super) fn berger_product(cfg: &ExperimentConfig, b: &BundleModel, sched: &CollapseSchedule) -> Result<Outcome> {
    let opts = ProductOptions { seed: cfg.seed, ..ProductOptions::default() };
    let hopf = b.builtin() == Some(BuiltinBundle::Hopf);
    let mut rows = Vec::with_capacity(sched.len());
    for &eps in sched.eps_list() {
        let c = if hopf {
            berger_product_check(eps, PRODUCT_SAMPLES, &opts)?
        } else {
            product_limit_check(b, eps, PRODUCT_SAMPLES, &opts)?
        };
        rows.push(Row {
            eps,
            coupling_norm: None,
            hh_ortho_residual: None,
            extra: vec![c.bound, status_code(c.status)],
        });
    }
    let bounds: Vec<f64> = rows.iter().map(|r| r.extra[0]).collect();
    let decreasing = bounds.windows(2).all(|p| p[1] < p[0]);
    let last = bounds.last().copied().unwrap_or(0.0);
    Ok(Outcome {
        verdict: Verdict::grade(&[decreasing, last < cfg.tol("gh_bound")]),
        key_metric: "gh_bound",
        key_value: last,
        extra_columns: vec!["gh_bound", "gh_status"],
        rows,
        details: json!({ "samples": PRODUCT_SAMPLES, "berger": hopf, "decreasing": decreasing }),
    })
}
