//! ε → 0 experiments on collapsing connection metrics.

use serde::{Deserialize, Serialize};

use crate::error::{Result, WaneError};
use crate::linalg::{operator_norm, Mat};
use crate::transport_engine::TransportGenerator;

mod limits;
mod uniqueness;
mod wane;

pub use limits::{
    collapse_transport_limit, lift_loop, shrink_loop_holonomy, vertical_loop_family, CollapseLimit,
    LiftRule, ShrinkResult, SlopeFit,
};
pub use uniqueness::{verify_parallel_uniqueness, UniquenessOptions, UniquenessReport};
pub use wane::{estimate_wane_group, WaneGroupEstimate, WaneOptions};

/// Smallest admissible ε in a schedule.
pub const MIN_SCHEDULE_EPS: f64 = 1e-6;

/// Condition number above which a subalgebra basis is rejected.
pub const MAX_GRAM_CONDITION: f64 = 1e12;

/// A strictly decreasing list of fiber scales.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollapseSchedule {
    eps_list: Vec<f64>,
}

impl CollapseSchedule {
    pub fn new(eps_list: Vec<f64>) -> Result<Self> {
        if eps_list.is_empty() {
            return Err(WaneError::InvalidInput("schedule is empty".into()));
        }
        if eps_list.iter().any(|e| !e.is_finite() || *e <= 0.0) {
            return Err(WaneError::InvalidInput("schedule entries must be positive".into()));
        }
        if eps_list.windows(2).any(|w| w[1] >= w[0]) {
            return Err(WaneError::InvalidInput("schedule must be strictly decreasing".into()));
        }
        let last = *eps_list.last().unwrap();
        if last < MIN_SCHEDULE_EPS {
            return Err(WaneError::InvalidInput(format!(
                "smallest eps {last:e} is below {MIN_SCHEDULE_EPS:e}"
            )));
        }
        Ok(CollapseSchedule { eps_list })
    }

    /// `eps0·ratio^k` for `k = 0..count`.
    pub fn geometric(eps0: f64, ratio: f64, count: usize) -> Result<Self> {
        if !(ratio > 0.0 && ratio < 1.0) {
            return Err(WaneError::InvalidInput(format!("ratio must lie in (0, 1), got {ratio}")));
        }
        CollapseSchedule::new((0..count).map(|k| eps0 * ratio.powi(k as i32)).collect())
    }

    pub fn eps_list(&self) -> &[f64] {
        &self.eps_list
    }

    pub fn len(&self) -> usize {
        self.eps_list.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eps_list.is_empty()
    }

    pub fn last(&self) -> f64 {
        *self.eps_list.last().expect("schedules are nonempty")
    }
}

impl Default for CollapseSchedule {
    /// `ε_k = 2^{−k}`, `k = 0..12`.
    fn default() -> Self {
        CollapseSchedule::geometric(1.0, 0.5, 13).expect("default schedule is valid")
    }
}

/// Frobenius-orthogonal projection onto the span of a fixed basis.
#[derive(Debug, Clone)]
pub struct SubalgebraProjector {
    basis: Vec<Mat>,
    gram_inverse: Mat,
}

impl SubalgebraProjector {
    pub fn new(basis: &[Mat]) -> Result<Self> {
        let k = basis.len();
        if k == 0 {
            return Err(WaneError::InvalidInput("basis is empty".into()));
        }
        let shape = basis[0].shape();
        if basis.iter().any(|b| b.shape() != shape) {
            return Err(WaneError::InvalidInput("basis matrices differ in shape".into()));
        }
        let gram = Mat::from_fn(k, k, |i, j| basis[i].dot(&basis[j]));
        let sv = gram.singular_values();
        let condition = sv.max() / sv.min();
        if !(condition <= MAX_GRAM_CONDITION) {
            return Err(WaneError::DegenerateBasis { condition });
        }
        let gram_inverse = gram.try_inverse().ok_or(WaneError::DegenerateBasis { condition })?;
        Ok(SubalgebraProjector { basis: basis.to_vec(), gram_inverse })
    }

    pub fn project(&self, q: &Mat) -> Mat {
        let rhs: Vec<f64> = self.basis.iter().map(|b| b.dot(q)).collect();
        let coeffs = &self.gram_inverse * crate::linalg::Vector::from_vec(rhs);
        self.basis
            .iter()
            .zip(coeffs.iter())
            .fold(Mat::zeros(q.nrows(), q.ncols()), |acc, (b, c)| acc + b * *c)
    }
}

pub fn project_to_subalgebra(q: &Mat, basis: &[Mat]) -> Result<Mat> {
    Ok(SubalgebraProjector::new(basis)?.project(q))
}

/// `‖Y_n(1) − Z_n(1)‖` for `Y' = Q_n·Y` and `Z' = L_n·Z`, where `L_n` is the
/// projection of `Q_n` onto the span of `basis`.
///
/// Each solve uses at least `steps` RK4 steps, more when `‖Q_n‖` is large,
/// so that `h·‖Q_n‖ ≤ 1/64`.
pub fn projected_solution_gap(
    qn_seq: &[TransportGenerator],
    basis: &[Mat],
    steps: usize,
) -> Result<Vec<f64>> {
    let projector = SubalgebraProjector::new(basis)?;
    let dim = basis[0].nrows();
    if qn_seq.iter().any(|g| g.dim() != dim) {
        return Err(WaneError::InvalidInput("generators and basis differ in dimension".into()));
    }
    Ok(qn_seq
        .iter()
        .map(|g| {
            let peak = (0..=32)
                .map(|i| operator_norm(&g.at(i as f64 / 32.0)))
                .fold(0.0, f64::max);
            let steps = steps.max((64.0 * peak).ceil() as usize);
            let y = g.solve(steps);
            let z = crate::linalg::rk4_matrix(|t| projector.project(&g.at(t)), dim, 0.0, 1.0, steps);
            operator_norm(&(y - z))
        })
        .collect())
}

/// How the in-algebra part of a test family scales with `n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Growth {
    Bounded,
    Unbounded,
}

fn so4_unit(a: usize, b: usize) -> Mat {
    let mut j = Mat::zeros(4, 4);
    j[(a, b)] = -1.0;
    j[(b, a)] = 1.0;
    j
}

/// `span{J₁₂, J₃₄}` inside so(4).
pub fn so4_test_basis() -> Vec<Mat> {
    vec![so4_unit(0, 1), so4_unit(2, 3)]
}

/// `Q_n(t) = s_n·B(t) + N/n` with `B(t) = (1 + t)J₁₂ + (2 − cos πt)J₃₄`,
/// `N = J₁₃` and `s_n = 1` or `n`.
pub fn projection_test_family(n: usize, growth: Growth) -> TransportGenerator {
    let scale = match growth {
        Growth::Bounded => 1.0,
        Growth::Unbounded => n as f64,
    };
    let (j12, j34, j13) = (so4_unit(0, 1), so4_unit(2, 3), so4_unit(0, 2));
    let inv = 1.0 / n as f64;
    TransportGenerator::new(
        move |t| {
            let b = &j12 * (1.0 + t) + &j34 * (2.0 - (std::f64::consts::PI * t).cos());
            b * scale + &j13 * inv
        },
        inv,
        0,
    )
}
