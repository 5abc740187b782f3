use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::CollapseSchedule;
use crate::bundle_models::{BaseCurve, BundleModel, TotalCurve};
use crate::error::{Result, WaneError};
use crate::lie_models::GroupLoop;
use crate::linalg::{operator_norm, ortho_residual, polar_orthogonal, Mat, PathFn, Vector};
use crate::transport_engine::parallel_transport;

/// Estimated generators of the wane group acting on `ℝ^k`, `k = n + m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaneGroupEstimate {
    pub k: usize,
    /// Stabilised limit transports and their inverses, longest loops first.
    pub generators: Vec<Mat>,
    /// Length of the loop behind each generator at the last ε.
    pub residual_lengths: Vec<f64>,
    pub tol: f64,
}

impl WaneGroupEstimate {
    /// Largest operator-norm distance from a generator to the identity.
    pub fn max_distance_to_identity(&self) -> f64 {
        let id = Mat::identity(self.k, self.k);
        self.generators.iter().map(|g| operator_norm(&(g - &id))).fold(0.0, f64::max)
    }

    /// Lower-right `(k − n)×(k − n)` blocks of the generators.
    pub fn vertical_blocks(&self, n: usize) -> Vec<Mat> {
        let m = self.k - n;
        self.generators.iter().map(|g| g.view((n, n), (m, m)).into_owned()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaneOptions {
    pub seed: u64,
    pub steps: usize,
    /// Largest base-circle radius at schedule index 0.
    pub base_radius: f64,
    /// Standard deviation of the random vertical loop coefficients.
    pub vertical_amplitude: f64,
    /// Cauchy tolerance between the last two ε.
    pub tol: f64,
}

impl Default for WaneOptions {
    fn default() -> Self {
        WaneOptions { seed: 0, steps: 512, base_radius: 0.1, vertical_amplitude: 0.4, tol: 1e-3 }
    }
}

pub const MIN_LOOP_BUDGET: usize = 100;

/// One candidate family: a base circle shrinking like `2^{−i/2}` at schedule
/// index `i`, a vertical group loop with components `ε·v`, or both at once.
struct Family {
    radius: f64,
    vertical: Option<GroupLoop>,
}

impl Family {
    fn curve(&self, b: &BundleModel, x0: &[f64], index: usize, eps: f64) -> TotalCurve {
        let r = self.radius * 0.5f64.powf(index as f64 / 2.0);
        let base = if r > 0.0 {
            let mut center = x0.to_vec();
            center[0] -= r;
            BaseCurve::circle(&center, r)
        } else {
            BaseCurve::constant(x0)
        };
        let m = b.dim_m();
        let d: PathFn = match &self.vertical {
            Some(lp) => {
                let (g, lp) = (b.group.clone(), lp.clone());
                Arc::new(move |t| lp.body_velocity(&g, t) * eps)
            }
            None => Arc::new(move |_| Vector::zeros(m)),
        };
        TotalCurve::over_base(b, &base, d, 65)
    }
}

/// Samples loop families whose lengths at schedule index `i` stay below
/// `L₀·2^{−i/2}`, keeps the transports that change by less than `tol`
/// between the last two ε, and returns their extrapolated limits together
/// with the inverses.
pub fn estimate_wane_group(
    b: &BundleModel,
    base_point: &[f64],
    sched: &CollapseSchedule,
    loop_budget: usize,
    opts: &WaneOptions,
) -> Result<WaneGroupEstimate> {
    if loop_budget < MIN_LOOP_BUDGET {
        return Err(WaneError::InvalidInput(format!(
            "loop budget must be at least {MIN_LOOP_BUDGET}, got {loop_budget}"
        )));
    }
    if sched.len() < 2 {
        return Err(WaneError::InvalidInput("wane estimation needs two or more eps".into()));
    }
    if !b.chart_domain.contains(base_point) {
        return Err(WaneError::ChartExit { t: 0.0 });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let families: Vec<Family> = (0..loop_budget)
        .map(|j| {
            let radius = opts.base_radius * rng.gen_range(0.2..1.0);
            let vertical = GroupLoop::random(b.dim_m(), 2, opts.vertical_amplitude, &mut rng);
            match j % 3 {
                0 => Family { radius, vertical: None },
                1 => Family { radius: 0.0, vertical: Some(vertical) },
                _ => Family { radius, vertical: Some(vertical) },
            }
        })
        .collect();
    let eps = sched.eps_list();
    let last = eps.len() - 1;
    let k = b.base_dim_n + b.dim_m();
    let accepted: Vec<(Mat, f64)> = families
        .par_iter()
        .map(|f| -> Result<Option<(Mat, f64)>> {
            let lengths: Vec<f64> = eps
                .iter()
                .enumerate()
                .map(|(i, &e)| f.curve(b, base_point, i, e).g_length(opts.steps))
                .collect();
            let l0 = lengths[0];
            let vanishing = l0 > 0.0
                && lengths
                    .iter()
                    .enumerate()
                    .all(|(i, &l)| l <= l0 * 0.5f64.powf(i as f64 / 2.0) * (1.0 + 1e-9));
            if !vanishing {
                return Ok(None);
            }
            let curves = [f.curve(b, base_point, last - 1, eps[last - 1]), f.curve(b, base_point, last, eps[last])];
            for c in &curves {
                c.check_in_chart(b)?;
            }
            let p_prev = parallel_transport(b, eps[last - 1], &curves[0], opts.steps)?;
            let p_last = parallel_transport(b, eps[last], &curves[1], opts.steps)?;
            let stable = operator_norm(&(&p_last.matrix - &p_prev.matrix)) < opts.tol;
            // The transports approach their limit linearly in ε; one
            // Richardson step removes that term.
            let r = eps[last] / eps[last - 1];
            let limit = polar_orthogonal(&((&p_last.matrix - &p_prev.matrix * r) / (1.0 - r)));
            Ok(stable.then(|| (limit, lengths[last])))
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    if accepted.is_empty() {
        return Err(WaneError::BudgetExhausted(format!(
            "none of {loop_budget} loop families had vanishing, stabilising transports"
        )));
    }
    let mut pairs: Vec<(Mat, f64)> = accepted
        .into_iter()
        .flat_map(|(g, l)| [(g.transpose(), l), (g, l)])
        .collect();
    pairs.sort_by(|a, b| b.1.total_cmp(&a.1));
    debug_assert!(pairs.iter().all(|(g, _)| ortho_residual(g) < 1e-8));
    let (generators, residual_lengths) = pairs.into_iter().unzip();
    Ok(WaneGroupEstimate { k, generators, residual_lengths, tol: opts.tol })
}
