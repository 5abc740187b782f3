use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::CollapseSchedule;
use crate::bundle_models::{BaseCurve, BundleModel, TotalCurve};
use crate::error::{Result, WaneError};
use crate::lie_models::{GroupLoop, LOOP_CLOSURE_TOL};
use crate::linalg::{block_diag, ls_slope, operator_norm, Mat, PathFn, Vector};
use crate::transport_engine::{base_transport, block_decompose, parallel_transport, TransportMatrix};

/// Grid resolution attached to curves built here.
const CURVE_GRID: usize = 65;

/// Couplings at or below this are treated as exactly zero.
const ZERO_COUPLING: f64 = 1e-14;

/// How a base loop is lifted at each ε.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum LiftRule {
    Horizontal,
    /// Vertical components `d = ε·c`: the fiber point moves with the
    /// ε-independent algebra speed `c`.
    FixedVerticalDrift(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SlopeFit {
    Fitted(f64),
    /// Every coupling vanished, so no slope can be fitted.
    ExactZero,
}

impl SlopeFit {
    pub fn value(&self) -> Option<f64> {
        match self {
            SlopeFit::Fitted(s) => Some(*s),
            SlopeFit::ExactZero => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollapseLimit {
    pub eps: Vec<f64>,
    pub limits: Vec<TransportMatrix>,
    pub coupling_decay: Vec<f64>,
    /// Slope of `log coupling` against `log ε`.
    pub slope: SlopeFit,
    /// Transport of the base loop alone.
    pub base_transport: Mat,
    /// `‖hh(ε_last) − base_transport‖` (operator norm).
    pub hh_gap: f64,
    /// `‖hh·hhᵀ − I‖` at the last ε.
    pub hh_ortho_residual: f64,
}

pub fn lift_loop(b: &BundleModel, base: &BaseCurve, rule: &LiftRule, eps: f64) -> Result<TotalCurve> {
    let m = b.dim_m();
    let d: PathFn = match rule {
        LiftRule::Horizontal => Arc::new(move |_| Vector::zeros(m)),
        LiftRule::FixedVerticalDrift(c) => {
            if c.len() != m {
                return Err(WaneError::InvalidInput(format!(
                    "drift has {} components, the group has dimension {m}",
                    c.len()
                )));
            }
            let d = Vector::from_column_slice(c) * eps;
            Arc::new(move |_| d.clone())
        }
    };
    let curve = TotalCurve::over_base(b, base, d, CURVE_GRID);
    curve.check_in_chart(b)?;
    Ok(curve)
}

pub fn collapse_transport_limit(
    b: &BundleModel,
    base_loop: &BaseCurve,
    rule: &LiftRule,
    sched: &CollapseSchedule,
    steps: usize,
) -> Result<CollapseLimit> {
    let residual = base_loop.closure_residual();
    if residual > LOOP_CLOSURE_TOL {
        return Err(WaneError::NonClosedLoop { residual, tolerance: LOOP_CLOSURE_TOL });
    }
    let limits: Vec<TransportMatrix> = sched
        .eps_list()
        .par_iter()
        .map(|&eps| parallel_transport(b, eps, &lift_loop(b, base_loop, rule, eps)?, steps))
        .collect::<Result<_>>()?;
    let summaries: Vec<_> = limits.iter().map(block_decompose).collect();
    let coupling_decay: Vec<f64> = summaries.iter().map(|s| s.coupling_norm).collect();
    let (xs, ys): (Vec<f64>, Vec<f64>) = sched
        .eps_list()
        .iter()
        .zip(&coupling_decay)
        .filter(|(_, c)| **c > ZERO_COUPLING)
        .map(|(e, c)| (e.ln(), c.ln()))
        .unzip();
    let slope = if xs.len() >= 2 { SlopeFit::Fitted(ls_slope(&xs, &ys)) } else { SlopeFit::ExactZero };
    let base = base_transport(b, base_loop, steps);
    let last = limits.last().expect("schedules are nonempty");
    Ok(CollapseLimit {
        eps: sched.eps_list().to_vec(),
        hh_gap: operator_norm(&(&last.blocks().hh - &base)),
        hh_ortho_residual: summaries.last().unwrap().hh_dist_to_orthogonal,
        base_transport: base,
        limits,
        coupling_decay,
        slope,
    })
}

/// The vertical loop over `x0` traced by `lp` at each ε of `sched`, with
/// components `d = ε·(body velocity)` so the length is `ε·ℓ`.
pub fn vertical_loop_family(
    b: &BundleModel,
    x0: &[f64],
    lp: &GroupLoop,
    sched: &CollapseSchedule,
) -> Vec<TotalCurve> {
    sched
        .eps_list()
        .iter()
        .map(|&eps| {
            let (g, lp) = (b.group.clone(), lp.clone());
            let d: PathFn = Arc::new(move |t| lp.body_velocity(&g, t) * eps);
            TotalCurve::vertical(b, x0, d, CURVE_GRID)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShrinkResult {
    pub transports: Vec<TransportMatrix>,
    pub lengths: Vec<f64>,
    /// Operator-norm distance of each transport to `{diag(I, H)}`.
    pub distances: Vec<f64>,
    pub final_distance: f64,
}

/// Transports of a loop family with vanishing lengths, and their distance to
/// the block-diagonal set built from the `m×m` matrices in `reference`.
///
/// Loop `i` is transported at `sched.eps_list()[i]`.
pub fn shrink_loop_holonomy(
    b: &BundleModel,
    loop_family: &[TotalCurve],
    sched: &CollapseSchedule,
    steps: usize,
    reference: &[Mat],
) -> Result<ShrinkResult> {
    if loop_family.len() != sched.len() {
        return Err(WaneError::InvalidInput(format!(
            "{} loops for a schedule of {} entries",
            loop_family.len(),
            sched.len()
        )));
    }
    let (n, m) = (b.base_dim_n, b.dim_m());
    if reference.is_empty() || reference.iter().any(|h| h.shape() != (m, m)) {
        return Err(WaneError::InvalidInput(format!("reference needs {m}×{m} matrices")));
    }
    let lengths: Vec<f64> = loop_family.iter().map(|c| c.g_length(steps)).collect();
    for (index, w) in lengths.windows(2).enumerate() {
        let (previous, current) = (w[0], w[1]);
        if !(current < previous || current == 0.0) {
            return Err(WaneError::LengthNotVanishing { index: index + 1, previous, current });
        }
    }
    let targets: Vec<Mat> = reference.iter().map(|h| block_diag(&Mat::identity(n, n), h)).collect();
    let transports: Vec<TransportMatrix> = loop_family
        .par_iter()
        .zip(sched.eps_list())
        .map(|(c, &eps)| parallel_transport(b, eps, c, steps))
        .collect::<Result<_>>()?;
    let distances: Vec<f64> = transports
        .par_iter()
        .map(|p| {
            targets
                .iter()
                .map(|t| operator_norm(&(&p.matrix - t)))
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    Ok(ShrinkResult {
        final_distance: *distances.last().unwrap(),
        transports,
        lengths,
        distances,
    })
}
