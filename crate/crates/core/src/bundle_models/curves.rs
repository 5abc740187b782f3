//! Curves in the base and in the total space, fields along them, and
//! horizontal lifting.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use super::{BundleModel, FiberPoint};
use crate::error::{Result, WaneError};
use crate::linalg::{uniform_grid, PathFn, Vector};

/// Minimum number of grid samples for derivative-based operations.
pub const MIN_GRID: usize = 8;

/// A parametrised curve `x(t)`, `t ∈ [0, 1]`, in chart coordinates.
#[derive(Clone)]
pub struct BaseCurve {
    position: PathFn,
    velocity: PathFn,
}

impl fmt::Debug for BaseCurve {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BaseCurve")
            .field("start", &self.position(0.0).as_slice())
            .field("end", &self.position(1.0).as_slice())
            .finish()
    }
}

fn warp(u: f64) -> f64 {
    u - (2.0 * PI * u).sin() / (2.0 * PI)
}

fn dwarp(u: f64) -> f64 {
    1.0 - (2.0 * PI * u).cos()
}

impl BaseCurve {
    pub fn new<P, V>(position: P, velocity: V) -> Self
    where
        P: Fn(f64) -> Vector + Send + Sync + 'static,
        V: Fn(f64) -> Vector + Send + Sync + 'static,
    {
        BaseCurve { position: Arc::new(position), velocity: Arc::new(velocity) }
    }

    pub fn constant(p: &[f64]) -> Self {
        let p = Vector::from_column_slice(p);
        let n = p.len();
        BaseCurve::new(move |_| p.clone(), move |_| Vector::zeros(n))
    }

    pub fn segment(p: &[f64], q: &[f64]) -> Self {
        let p = Vector::from_column_slice(p);
        let dir = Vector::from_column_slice(q) - &p;
        let d2 = dir.clone();
        BaseCurve::new(move |t| &p + &dir * t, move |_| d2.clone())
    }

    /// Counter-clockwise circle in the first two coordinates, starting at
    /// `center + radius·e₁`.
    pub fn circle(center: &[f64], radius: f64) -> Self {
        let c = Vector::from_column_slice(center);
        let n = c.len();
        BaseCurve::new(
            move |t| {
                let mut x = c.clone();
                x[0] += radius * (2.0 * PI * t).cos();
                x[1] += radius * (2.0 * PI * t).sin();
                x
            },
            move |t| {
                let mut v = Vector::zeros(n);
                v[0] = -2.0 * PI * radius * (2.0 * PI * t).sin();
                v[1] = 2.0 * PI * radius * (2.0 * PI * t).cos();
                v
            },
        )
    }

    /// Counter-clockwise boundary of `corner + [0, side]²`, one edge per
    /// quarter of the parameter interval. Each edge is traversed with speed
    /// vanishing at the corners, so the velocity is continuous.
    pub fn square(corner: &[f64], side: f64) -> Self {
        let c = Vector::from_column_slice(corner);
        let n = c.len();
        let dirs = [(1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0)];
        let starts = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)];
        let edge = |t: f64| {
            let e = ((4.0 * t).floor() as usize).min(3);
            (e, 4.0 * t - e as f64)
        };
        BaseCurve::new(
            move |t| {
                let (e, s) = edge(t);
                let mut x = c.clone();
                x[0] += side * (starts[e].0 + warp(s) * dirs[e].0);
                x[1] += side * (starts[e].1 + warp(s) * dirs[e].1);
                x
            },
            move |t| {
                let (e, s) = edge(t);
                let mut v = Vector::zeros(n);
                v[0] = 4.0 * side * dwarp(s) * dirs[e].0;
                v[1] = 4.0 * side * dwarp(s) * dirs[e].1;
                v
            },
        )
    }

    pub fn position(&self, t: f64) -> Vector {
        (self.position)(t)
    }

    pub fn velocity(&self, t: f64) -> Vector {
        (self.velocity)(t)
    }

    pub fn closure_residual(&self) -> f64 {
        (self.position(1.0) - self.position(0.0)).norm()
    }

    /// Adds `h·sin(πt)·direction`, keeping both endpoints.
    pub fn perturbed(&self, h: f64, direction: &[f64]) -> Self {
        let (p, v) = (self.position.clone(), self.velocity.clone());
        let d1 = Vector::from_column_slice(direction);
        let d2 = d1.clone();
        BaseCurve::new(
            move |t| p(t) + &d1 * (h * (PI * t).sin()),
            move |t| v(t) + &d2 * (h * PI * (PI * t).cos()),
        )
    }

    /// `self` on [0, ½] then `next` on [½, 1], each reparametrised so that
    /// the velocity vanishes at the seam.
    pub fn concat(&self, next: &BaseCurve) -> Self {
        let (p1, p2) = (self.position.clone(), next.position.clone());
        let (v1, v2) = (self.velocity.clone(), next.velocity.clone());
        BaseCurve::new(
            move |t| if t <= 0.5 { p1(warp(2.0 * t)) } else { p2(warp(2.0 * t - 1.0)) },
            move |t| {
                if t <= 0.5 {
                    v1(warp(2.0 * t)) * (2.0 * dwarp(2.0 * t))
                } else {
                    v2(warp(2.0 * t - 1.0)) * (2.0 * dwarp(2.0 * t - 1.0))
                }
            },
        )
    }

    /// First grid parameter, on a `samples`-point grid, outside the chart.
    pub fn first_exit(&self, b: &BundleModel, samples: usize) -> Option<f64> {
        uniform_grid(samples.max(2))
            .into_iter()
            .find(|&t| !b.chart_domain.contains(self.position(t).as_slice()))
    }

    /// Riemannian length under the base metric (composite Simpson rule).
    pub fn length(&self, b: &BundleModel, steps: usize) -> f64 {
        let steps = steps.max(2) + steps % 2;
        let h = 1.0 / steps as f64;
        (0..=steps)
            .map(|i| {
                let t = i as f64 * h;
                let w = if i == 0 || i == steps { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
                let x = self.position(t);
                w * b.frame_coeffs(x.as_slice(), self.velocity(t).as_slice()).norm()
            })
            .sum::<f64>()
            * h
            / 3.0
    }
}

/// A curve `δ` in the total space: base path, horizontal frame components
/// `a(t)` and vertical components `d(t)` in the ε-scaled frame.
#[derive(Clone)]
pub struct TotalCurve {
    pub t_grid: Vec<f64>,
    base_path: PathFn,
    a_coeffs: PathFn,
    d_coeffs: PathFn,
    pub start_fiber: FiberPoint,
}

impl fmt::Debug for TotalCurve {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TotalCurve")
            .field("samples", &self.t_grid.len())
            .field("start", &self.base(0.0).as_slice())
            .field("start_fiber", &self.start_fiber)
            .finish()
    }
}

impl TotalCurve {
    pub fn new(
        t_grid: Vec<f64>,
        base_path: PathFn,
        a_coeffs: PathFn,
        d_coeffs: PathFn,
        start_fiber: FiberPoint,
    ) -> Self {
        TotalCurve { t_grid, base_path, a_coeffs, d_coeffs, start_fiber }
    }

    /// Curve over `base` with vertical components `d` (ε-scaled frame) and
    /// horizontal components read off the base velocity.
    pub fn over_base(b: &BundleModel, base: &BaseCurve, d: PathFn, samples: usize) -> Self {
        let model = Arc::new(b.clone());
        let base_a = base.clone();
        TotalCurve {
            t_grid: uniform_grid(samples.max(2)),
            base_path: base.position.clone(),
            a_coeffs: Arc::new(move |t| {
                model.frame_coeffs(base_a.position(t).as_slice(), base_a.velocity(t).as_slice())
            }),
            d_coeffs: d,
            start_fiber: FiberPoint::identity(&b.group),
        }
    }

    /// Purely vertical curve over the fixed base point `x0`.
    pub fn vertical(b: &BundleModel, x0: &[f64], d: PathFn, samples: usize) -> Self {
        TotalCurve::over_base(b, &BaseCurve::constant(x0), d, samples)
    }

    pub fn constant(b: &BundleModel, x0: &[f64], samples: usize) -> Self {
        let m = b.dim_m();
        TotalCurve::vertical(b, x0, Arc::new(move |_| Vector::zeros(m)), samples)
    }

    pub fn with_start_fiber(mut self, fiber: FiberPoint) -> Self {
        self.start_fiber = fiber;
        self
    }

    pub fn with_grid(mut self, samples: usize) -> Self {
        self.t_grid = uniform_grid(samples.max(2));
        self
    }

    pub fn base(&self, t: f64) -> Vector {
        (self.base_path)(t)
    }

    pub fn a(&self, t: f64) -> Vector {
        (self.a_coeffs)(t)
    }

    pub fn d(&self, t: f64) -> Vector {
        (self.d_coeffs)(t)
    }

    /// Length under the rescaled connection metric: `∫ √(|a|² + |d|²)`.
    pub fn g_length(&self, steps: usize) -> f64 {
        let steps = steps.max(2) + steps % 2;
        let h = 1.0 / steps as f64;
        (0..=steps)
            .map(|i| {
                let t = i as f64 * h;
                let w = if i == 0 || i == steps { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
                w * (self.a(t).norm_squared() + self.d(t).norm_squared()).sqrt()
            })
            .sum::<f64>()
            * h
            / 3.0
    }

    pub fn check_in_chart(&self, b: &BundleModel) -> Result<()> {
        let dense = uniform_grid(257);
        for &t in dense.iter().chain(&self.t_grid) {
            if !b.chart_domain.contains(self.base(t).as_slice()) {
                return Err(WaneError::ChartExit { t });
            }
        }
        Ok(())
    }

    /// Right-hand side of the fiber ODE at `t`.
    pub(crate) fn fiber_rate(
        &self,
        b: &BundleModel,
        eps: f64,
        t: f64,
        fiber: &Vector,
    ) -> Result<Vector> {
        let x = self.base(t);
        let xdot = b.coord_velocity(x.as_slice(), self.a(t).as_slice());
        let w = self.d(t) / eps;
        b.fiber_derivative(x.as_slice(), xdot.as_slice(), w.as_slice(), fiber)
    }
}

/// Integrates the fiber coordinates of `curve` at scale `eps` on `grid`,
/// with `substeps` RK4 steps per grid interval.
pub fn track_fiber(
    b: &BundleModel,
    eps: f64,
    curve: &TotalCurve,
    grid: &[f64],
    substeps: usize,
) -> Result<Vec<FiberPoint>> {
    let template = curve.start_fiber.clone();
    let mut f = template.coords();
    let mut out = Vec::with_capacity(grid.len());
    let mut t = grid.first().copied().unwrap_or(0.0);
    if t != 0.0 {
        f = rk4_fiber(b, eps, curve, f, 0.0, t, substeps * 8)?;
    }
    out.push(FiberPoint::from_coords(&template, &f));
    for &next in grid.iter().skip(1) {
        f = rk4_fiber(b, eps, curve, f, t, next, substeps)?;
        out.push(FiberPoint::from_coords(&template, &f));
        t = next;
    }
    Ok(out)
}

fn rk4_fiber(
    b: &BundleModel,
    eps: f64,
    curve: &TotalCurve,
    mut f: Vector,
    t0: f64,
    t1: f64,
    steps: usize,
) -> Result<Vector> {
    let h = (t1 - t0) / steps.max(1) as f64;
    for s in 0..steps.max(1) {
        let t = t0 + s as f64 * h;
        let k1 = curve.fiber_rate(b, eps, t, &f)?;
        let k2 = curve.fiber_rate(b, eps, t + 0.5 * h, &(&f + &k1 * (0.5 * h)))?;
        let k3 = curve.fiber_rate(b, eps, t + 0.5 * h, &(&f + &k2 * (0.5 * h)))?;
        let k4 = curve.fiber_rate(b, eps, t + h, &(&f + &k3 * h))?;
        f += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        if f.len() == 4 {
            f /= f.norm();
        }
    }
    Ok(f)
}

/// A horizontal lift together with its fiber coordinates on the grid.
#[derive(Debug, Clone)]
pub struct LiftedCurve {
    pub curve: TotalCurve,
    pub fiber: Vec<FiberPoint>,
    /// Largest `|ω(δ̇)|` over grid intervals, measured as a fourth-order
    /// collocation defect of the fiber samples.
    pub lift_residual: f64,
}

impl LiftedCurve {
    /// Net phase change for abelian groups.
    pub fn phase_change(&self) -> Option<Vec<f64>> {
        let start = self.fiber.first()?.phases()?;
        let end = self.fiber.last()?.phases()?;
        Some(end.iter().zip(start).map(|(e, s)| e - s).collect())
    }

    pub fn end_fiber(&self) -> &FiberPoint {
        self.fiber.last().expect("lift has samples")
    }
}

/// Horizontal lift of `base` starting at `start_fiber`, on `steps` uniform
/// intervals.
pub fn horizontal_lift(
    b: &BundleModel,
    base: &BaseCurve,
    start_fiber: FiberPoint,
    steps: usize,
) -> Result<LiftedCurve> {
    if let Some(t) = base.first_exit(b, steps + 1) {
        return Err(WaneError::ChartExit { t });
    }
    let m = b.dim_m();
    let curve = TotalCurve::over_base(b, base, Arc::new(move |_| Vector::zeros(m)), steps + 1)
        .with_start_fiber(start_fiber);
    let fiber = track_fiber(b, 1.0, &curve, &curve.t_grid, 1)?;
    let lift_residual = lift_residual(b, base, &curve.t_grid, &fiber)?;
    Ok(LiftedCurve { curve, fiber, lift_residual })
}

/// Defect of the fourth-order Lobatto collocation condition on each grid
/// interval, mapped to the algebra: zero exactly when the samples satisfy
/// `ω(δ̇) = 0` to that order.
fn lift_residual(
    b: &BundleModel,
    base: &BaseCurve,
    grid: &[f64],
    fiber: &[FiberPoint],
) -> Result<f64> {
    let zero = vec![0.0; b.dim_m()];
    let rate = |t: f64, f: &Vector| -> Result<Vector> {
        let x = base.position(t);
        b.fiber_derivative(x.as_slice(), base.velocity(t).as_slice(), &zero, f)
    };
    let mut worst: f64 = 0.0;
    for (w, f) in grid.windows(2).zip(fiber.windows(2)) {
        let (h, tm) = (w[1] - w[0], 0.5 * (w[0] + w[1]));
        let (f0, f1) = (f[0].coords(), f[1].coords());
        let (r0, r1) = (rate(w[0], &f0)?, rate(w[1], &f1)?);
        let fm = (&f0 + &f1) * 0.5 + (&r0 - &r1) * (h / 8.0);
        let rm = rate(tm, &fm)?;
        let defect = (&f1 - &f0) / h - (r0 + rm * 4.0 + r1) / 6.0;
        let omega = match &f[0] {
            FiberPoint::Abelian(_) => defect,
            FiberPoint::Quaternion(_) => {
                let q = nalgebra::Quaternion::new(fm[0], fm[1], fm[2], fm[3]);
                let d = nalgebra::Quaternion::new(defect[0], defect[1], defect[2], defect[3]);
                let body = q.conjugate() * d;
                Vector::from_column_slice(&[body.i, body.j, body.k]) * 2.0
            }
        };
        worst = worst.max(omega.norm());
    }
    Ok(worst)
}

/// A vector field along a curve, in frame components, with its derivative.
#[derive(Clone)]
pub struct FrameField {
    value: PathFn,
    derivative: PathFn,
}

impl fmt::Debug for FrameField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FrameField").field("start", &self.value(0.0).as_slice()).finish()
    }
}

impl FrameField {
    pub fn new(value: PathFn, derivative: PathFn) -> Self {
        FrameField { value, derivative }
    }

    pub fn constant(v: Vector) -> Self {
        let z = Vector::zeros(v.len());
        FrameField::new(Arc::new(move |_| v.clone()), Arc::new(move |_| z.clone()))
    }

    /// Field with a five-point finite-difference derivative; `f` must be
    /// defined slightly beyond [0, 1].
    pub fn from_fn<F>(f: F) -> Self
    where
        F: Fn(f64) -> Vector + Send + Sync + 'static,
    {
        let f = Arc::new(f);
        let g = f.clone();
        let h = 1e-3;
        FrameField::new(
            f,
            Arc::new(move |t| {
                (g(t - 2.0 * h) - g(t - h) * 8.0 + g(t + h) * 8.0 - g(t + 2.0 * h)) / (12.0 * h)
            }),
        )
    }

    /// Linear combination `α·self + β·other`.
    pub fn combine(&self, alpha: f64, other: &FrameField, beta: f64) -> Self {
        let (v1, v2) = (self.value.clone(), other.value.clone());
        let (d1, d2) = (self.derivative.clone(), other.derivative.clone());
        FrameField::new(
            Arc::new(move |t| v1(t) * alpha + v2(t) * beta),
            Arc::new(move |t| d1(t) * alpha + d2(t) * beta),
        )
    }

    pub fn value(&self, t: f64) -> Vector {
        (self.value)(t)
    }

    pub fn derivative(&self, t: f64) -> Vector {
        (self.derivative)(t)
    }
}

/// Samples of `∇_{δ̇}X` on the curve grid.
#[derive(Debug, Clone)]
pub struct CovariantDerivative {
    pub t_grid: Vec<f64>,
    pub values: Vec<Vector>,
}

impl CovariantDerivative {
    pub fn horizontal(&self, i: usize, n: usize) -> Vector {
        self.values[i].rows(0, n).clone_owned()
    }

    pub fn vertical(&self, i: usize, n: usize) -> Vector {
        let v = &self.values[i];
        v.rows(n, v.len() - n).clone_owned()
    }
}

/// Frame components of `∇_{δ̇}X` along `curve` at fiber scale `eps`.
pub fn covariant_derivative(
    b: &BundleModel,
    eps: f64,
    curve: &TotalCurve,
    field: &FrameField,
) -> Result<CovariantDerivative> {
    if curve.t_grid.len() < MIN_GRID {
        return Err(WaneError::GridTooCoarse { samples: curve.t_grid.len(), required: MIN_GRID });
    }
    let fibers = if b.group.is_abelian() {
        vec![curve.start_fiber.clone(); curve.t_grid.len()]
    } else {
        track_fiber(b, eps, curve, &curve.t_grid, 4)?
    };
    let values = curve
        .t_grid
        .iter()
        .zip(&fibers)
        .map(|(&t, fiber)| {
            let x = curve.base(t);
            field.derivative(t)
                + b.connection_term(
                    eps,
                    x.as_slice(),
                    curve.a(t).as_slice(),
                    curve.d(t).as_slice(),
                    fiber,
                    &field.value(t),
                )
        })
        .collect();
    Ok(CovariantDerivative { t_grid: curve.t_grid.clone(), values })
}
