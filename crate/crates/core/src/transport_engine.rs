//! Parallel transport on the total space of a bundle with the rescaled
//! connection metric `π*g_M + ε² g_G`.
//!
//! In the orthonormal frame `{ξ_i♮, A_{ε,i} = ε⁻¹A_i}` a field `X` along a
//! curve is parallel iff `X' = Q·X`, where `Q` is assembled here from the
//! base Christoffel symbols, the curvature and the group connection.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::bundle_models::{BaseCurve, BundleModel, FiberPoint, TotalCurve};
use crate::error::{Result, WaneError};
use crate::linalg::{frobenius, ortho_residual, polar_orthogonal, Mat, PathFn, Vector};

/// Pre-polar orthogonality residual above which results are rejected.
pub const MAX_PRE_POLAR_RESIDUAL: f64 = 1e-3;
pub const MIN_TRANSPORT_STEPS: usize = 32;

/// `t ↦ Q(t)` together with the fiber scale and the horizontal dimension.
#[derive(Clone)]
pub struct TransportGenerator {
    pub matrix_fn: Arc<dyn Fn(f64) -> Mat + Send + Sync>,
    pub eps: f64,
    pub frame_split: usize,
}

impl std::fmt::Debug for TransportGenerator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TransportGenerator")
            .field("eps", &self.eps)
            .field("frame_split", &self.frame_split)
            .finish()
    }
}

impl TransportGenerator {
    pub fn new<F>(matrix_fn: F, eps: f64, frame_split: usize) -> Self
    where
        F: Fn(f64) -> Mat + Send + Sync + 'static,
    {
        TransportGenerator { matrix_fn: Arc::new(matrix_fn), eps, frame_split }
    }

    pub fn at(&self, t: f64) -> Mat {
        (self.matrix_fn)(t)
    }

    pub fn dim(&self) -> usize {
        self.at(0.0).nrows()
    }

    /// Solves `Y' = Q·Y`, `Y(0) = I`, on [0, 1] with RK4.
    pub fn solve(&self, steps: usize) -> Mat {
        crate::linalg::rk4_matrix(|t| self.at(t), self.dim(), 0.0, 1.0, steps)
    }
}

/// The four blocks of a square matrix split after `n` rows and columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Blocks {
    pub hh: Mat,
    pub hv: Mat,
    pub vh: Mat,
    pub vv: Mat,
}

impl Blocks {
    pub fn split(m: &Mat, n: usize) -> Self {
        let k = m.nrows() - n;
        Blocks {
            hh: m.view((0, 0), (n, n)).clone_owned(),
            hv: m.view((0, n), (n, k)).clone_owned(),
            vh: m.view((n, 0), (k, n)).clone_owned(),
            vv: m.view((n, n), (k, k)).clone_owned(),
        }
    }

    pub fn assemble(&self) -> Mat {
        let (n, k) = (self.hh.nrows(), self.vv.nrows());
        let mut m = Mat::zeros(n + k, n + k);
        m.view_mut((0, 0), (n, n)).copy_from(&self.hh);
        m.view_mut((0, n), (n, k)).copy_from(&self.hv);
        m.view_mut((n, 0), (k, n)).copy_from(&self.vh);
        m.view_mut((n, n), (k, k)).copy_from(&self.vv);
        m
    }
}

/// Result of integrating the transport ODE.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportMatrix {
    pub matrix: Mat,
    pub n: usize,
    /// `‖MᵀM − I‖` before the polar correction.
    pub ortho_residual: f64,
}

impl TransportMatrix {
    pub fn identity(n: usize, m: usize) -> Self {
        TransportMatrix { matrix: Mat::identity(n + m, n + m), n, ortho_residual: 0.0 }
    }

    pub fn blocks(&self) -> Blocks {
        Blocks::split(&self.matrix, self.n)
    }

    /// Row-major nested arrays, as written to JSON artifacts.
    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.matrix.row_iter().map(|r| r.iter().copied().collect()).collect()
    }
}

/// `Q` at one point of a curve, given the fiber point there.
pub fn assemble_q_at(
    b: &BundleModel,
    eps: f64,
    x: &[f64],
    a: &[f64],
    d: &[f64],
    fiber: &FiberPoint,
) -> Mat {
    let (n, m) = (b.base_dim_n, b.dim_m());
    let gamma = b.christoffel(x);
    let om = b.curvature_at(x, fiber);
    let mut q = Mat::zeros(n + m, n + m);
    for k in 0..n {
        for j in 0..n {
            let mut v = 0.0;
            for i in 0..n {
                v -= a[i] * gamma.get(i, j, k);
            }
            for s in 0..m {
                v += eps * d[s] * om.get(s, j, k);
            }
            q[(k, j)] = v;
        }
    }
    for k in 0..n {
        for j in 0..m {
            let w = eps * om.contract_first(a, j, k);
            q[(k, n + j)] = w;
            q[(n + j, k)] = -w;
        }
    }
    for k in 0..m {
        for j in 0..m {
            let mut v = 0.0;
            for i in 0..m {
                v -= d[i] * b.group.connection(i, j, k);
            }
            q[(n + k, n + j)] = v / eps;
        }
    }
    q
}

/// `Q(t)` along `curve`; for nonabelian groups the fiber point at `t` is
/// obtained by integrating the fiber equation from the start of the curve.
pub fn assemble_q(b: &BundleModel, eps: f64, curve: &TotalCurve, t: f64) -> Result<Mat> {
    let fiber = if b.group.is_abelian() || t == 0.0 {
        curve.start_fiber.clone()
    } else {
        crate::bundle_models::track_fiber(b, eps, curve, &[t], 8)?.remove(0)
    };
    let x = curve.base(t);
    Ok(assemble_q_at(b, eps, x.as_slice(), curve.a(t).as_slice(), curve.d(t).as_slice(), &fiber))
}

/// Generator of the transport along `curve` at scale `eps`.
pub fn generator(b: &BundleModel, eps: f64, curve: &TotalCurve) -> TransportGenerator {
    let (model, c) = (b.clone(), curve.clone());
    TransportGenerator::new(
        move |t| assemble_q(&model, eps, &c, t).expect("fiber tracking on a validated curve"),
        eps,
        b.base_dim_n,
    )
}

/// Parallel transport around `curve` on [0, 1].
pub fn parallel_transport(
    b: &BundleModel,
    eps: f64,
    curve: &TotalCurve,
    steps: usize,
) -> Result<TransportMatrix> {
    parallel_transport_interval(b, eps, curve, 0.0, 1.0, steps, &curve.start_fiber)
        .map(|(p, _)| p)
}

/// Transport over `[t0, t1]` starting from the fiber point `fiber0` at
/// `t0`; also returns the fiber point reached at `t1`.
pub fn parallel_transport_interval(
    b: &BundleModel,
    eps: f64,
    curve: &TotalCurve,
    t0: f64,
    t1: f64,
    steps: usize,
    fiber0: &FiberPoint,
) -> Result<(TransportMatrix, FiberPoint)> {
    if steps < MIN_TRANSPORT_STEPS {
        return Err(WaneError::InvalidInput(format!(
            "transport needs at least {MIN_TRANSPORT_STEPS} steps, got {steps}"
        )));
    }
    if !(eps > 0.0) {
        return Err(WaneError::InvalidInput("eps must be positive".into()));
    }
    let (n, m) = (b.base_dim_n, b.dim_m());
    let dim = n + m;
    let track = !b.group.is_abelian();
    let q_at = |t: f64, f: &Vector| -> Mat {
        let fiber = if track { FiberPoint::from_coords(fiber0, f) } else { fiber0.clone() };
        let x = curve.base(t);
        assemble_q_at(b, eps, x.as_slice(), curve.a(t).as_slice(), curve.d(t).as_slice(), &fiber)
    };
    let f_rate = |t: f64, f: &Vector| curve.fiber_rate(b, eps, t, f);
    let h = (t1 - t0) / steps as f64;
    let mut y = Mat::identity(dim, dim);
    let mut f = fiber0.coords();
    for s in 0..steps {
        let t = t0 + s as f64 * h;
        let (fa, ka) = (f.clone(), f_rate(t, &f)?);
        let fb = &f + &ka * (0.5 * h);
        let kb = f_rate(t + 0.5 * h, &fb)?;
        let fc = &f + &kb * (0.5 * h);
        let kc = f_rate(t + 0.5 * h, &fc)?;
        let fd = &f + &kc * h;
        let kd = f_rate(t + h, &fd)?;
        let k1 = q_at(t, &fa) * &y;
        let k2 = q_at(t + 0.5 * h, &fb) * (&y + &k1 * (0.5 * h));
        let k3 = q_at(t + 0.5 * h, &fc) * (&y + &k2 * (0.5 * h));
        let k4 = q_at(t + h, &fd) * (&y + &k3 * h);
        y += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        f += (ka + kb * 2.0 + kc * 2.0 + kd) * (h / 6.0);
        if track {
            f /= f.norm();
        }
    }
    let residual = ortho_residual(&y);
    if !(residual <= MAX_PRE_POLAR_RESIDUAL) {
        return Err(WaneError::StepTooLarge { residual, steps });
    }
    Ok((
        TransportMatrix { matrix: polar_orthogonal(&y), n, ortho_residual: residual },
        FiberPoint::from_coords(fiber0, &f),
    ))
}

/// Transport of the base alone: `Y' = (−a^kΓ_kj^i)·Y` on the `n×n` frame.
pub fn base_transport(b: &BundleModel, base: &BaseCurve, steps: usize) -> Mat {
    let n = b.base_dim_n;
    let q = |t: f64| {
        let x = base.position(t);
        let a = b.frame_coeffs(x.as_slice(), base.velocity(t).as_slice());
        let gamma = b.christoffel(x.as_slice());
        Mat::from_fn(n, n, |k, j| -(0..n).map(|i| a[i] * gamma.get(i, j, k)).sum::<f64>())
    };
    polar_orthogonal(&crate::linalg::rk4_matrix(q, n, 0.0, 1.0, steps))
}

/// Block diagnostics of a transport.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockSummary {
    /// `‖hh·hhᵀ − I‖`.
    pub hh_dist_to_orthogonal: f64,
    /// `‖hv‖ + ‖vh‖` (Frobenius).
    pub coupling_norm: f64,
    pub vv: Mat,
}

pub fn block_decompose(p: &TransportMatrix) -> BlockSummary {
    let blocks = p.blocks();
    let n = p.n;
    BlockSummary {
        hh_dist_to_orthogonal: frobenius(&(&blocks.hh * blocks.hh.transpose() - Mat::identity(n, n))),
        coupling_norm: frobenius(&blocks.hv) + frobenius(&blocks.vh),
        vv: blocks.vv,
    }
}

/// `‖P(δ) − P(δ_h)‖`, where `δ_h` has base path `x + h·sin(πt)·e` with
/// `e = (1, …, 1)/√n` and the same vertical components.
pub fn transport_stability_under_c1(
    b: &BundleModel,
    eps: f64,
    base: &BaseCurve,
    d: PathFn,
    h: f64,
    steps: usize,
) -> Result<f64> {
    let n = b.base_dim_n;
    let e = vec![1.0 / (n as f64).sqrt(); n];
    let perturbed = base.perturbed(h, &e);
    if let Some(t) = perturbed.first_exit(b, steps + 1) {
        return Err(WaneError::ChartExit { t });
    }
    let grid = steps + 1;
    let p0 = parallel_transport(b, eps, &TotalCurve::over_base(b, base, d.clone(), grid), steps)?;
    let p1 = parallel_transport(b, eps, &TotalCurve::over_base(b, &perturbed, d, grid), steps)?;
    Ok(frobenius(&(p0.matrix - p1.matrix)))
}

#[cfg(test)]
mod tests;
