//! Chart-level principal bundles with connection.
//!
//! A model lives on one coordinate box `U ⊂ ℝⁿ` with a trivialisation
//! `P|U = U × G`. The base carries an orthonormal frame `ξ_i = λ(x)⁻¹ ∂_i`
//! for a conformal factor `λ`, and the connection form in the trivialisation
//! is `ω = Ad(g⁻¹) A + g⁻¹dg`. Curvature values are reported at the identity
//! section; at other fiber points they are rotated by `Ad(g⁻¹)`.
//!
//! Normalisation follows `ω([X♮, Y♮]) = −2 Ω(X, Y)` on horizontal lifts.

mod curves;
mod custom;

use std::fmt;
use std::str::FromStr;

use nalgebra::{Quaternion, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Result, WaneError};
use crate::lie_models::{make_builtin_group, GroupKind, LieGroupModel};
use crate::linalg::{Mat, Vector};

pub use curves::{
    covariant_derivative, horizontal_lift, track_fiber, BaseCurve, CovariantDerivative, FrameField,
    LiftedCurve, TotalCurve,
};
pub use custom::{parse_bundle_file, BUNDLE_FILE_FORMAT};

/// Finite-difference stencil width for bracket checks.
pub const STENCIL: f64 = 1e-4;

/// Axis-aligned coordinate box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChartBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl ChartBox {
    pub fn square(lo: f64, hi: f64, n: usize) -> Self {
        ChartBox { lo: vec![lo; n], hi: vec![hi; n] }
    }

    /// Strict interior membership.
    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(v, (lo, hi))| v > lo && v < hi)
    }

    pub fn center(&self) -> Vector {
        Vector::from_iterator(
            self.lo.len(),
            self.lo.iter().zip(&self.hi).map(|(a, b)| 0.5 * (a + b)),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BuiltinBundle {
    FlatTorusBundle,
    Hopf,
    ChernTorus(i32),
    TrivialSu2,
}

impl fmt::Display for BuiltinBundle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BuiltinBundle::FlatTorusBundle => write!(f, "flat_torus_bundle"),
            BuiltinBundle::Hopf => write!(f, "hopf"),
            BuiltinBundle::ChernTorus(k) => write!(f, "chern_torus:{k}"),
            BuiltinBundle::TrivialSu2 => write!(f, "trivial_su2"),
        }
    }
}

impl FromStr for BuiltinBundle {
    type Err = WaneError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "flat_torus_bundle" => Ok(BuiltinBundle::FlatTorusBundle),
            "hopf" => Ok(BuiltinBundle::Hopf),
            "trivial_su2" => Ok(BuiltinBundle::TrivialSu2),
            _ => {
                let f = s
                    .strip_prefix("chern_torus:")
                    .and_then(|f| f.parse::<i32>().ok())
                    .ok_or_else(|| WaneError::UnknownModel(s.to_string()))?;
                if f == 0 {
                    return Err(WaneError::InvalidInput(
                        "chern_torus needs a nonzero integer".into(),
                    ));
                }
                Ok(BuiltinBundle::ChernTorus(f))
            }
        }
    }
}

/// Names accepted by [`make_builtin_bundle`], with `F` a nonzero integer.
pub const BUILTIN_BUNDLE_NAMES: [&str; 4] =
    ["flat_torus_bundle", "hopf", "chern_torus:F", "trivial_su2"];

/// `Γ[i][j][k]` with `∇_{ξ_i} ξ_j = Γ_ij^k ξ_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Christoffel {
    n: usize,
    data: Vec<f64>,
}

impl Christoffel {
    pub fn zeros(n: usize) -> Self {
        Christoffel { n, data: vec![0.0; n * n * n] }
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[(i * self.n + j) * self.n + k]
    }

    pub fn set(&mut self, i: usize, j: usize, k: usize, v: f64) {
        let n = self.n;
        self.data[(i * n + j) * n + k] = v;
    }

    pub fn dim(&self) -> usize {
        self.n
    }
}

/// `Om[a][i][j] = Ω^a(ξ_i♮, ξ_j♮)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Curvature {
    m: usize,
    n: usize,
    data: Vec<f64>,
}

impl Curvature {
    pub fn zeros(m: usize, n: usize) -> Self {
        Curvature { m, n, data: vec![0.0; m * n * n] }
    }

    pub fn get(&self, a: usize, i: usize, j: usize) -> f64 {
        self.data[(a * self.n + i) * self.n + j]
    }

    /// Sets `Om[a][i][j] = v` and `Om[a][j][i] = −v`.
    pub fn set_pair(&mut self, a: usize, i: usize, j: usize, v: f64) {
        let n = self.n;
        self.data[(a * n + i) * n + j] = v;
        self.data[(a * n + j) * n + i] = -v;
    }

    /// Algebra vector `Ω(ξ_i, ξ_j)`.
    pub fn pair(&self, i: usize, j: usize) -> Vector {
        Vector::from_fn(self.m, |a, _| self.get(a, i, j))
    }

    /// `Ω^a(α̇, ξ_j)` for `α̇ = a^i ξ_i`.
    pub fn contract_first(&self, a_coeffs: &[f64], a: usize, j: usize) -> f64 {
        (0..self.n).map(|i| a_coeffs[i] * self.get(a, i, j)).sum()
    }

    /// Applies `rot` to the algebra index.
    pub fn rotated(&self, rot: &Mat) -> Self {
        let mut out = Curvature::zeros(self.m, self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                let v = rot * self.pair(i, j);
                for a in 0..self.m {
                    out.data[(a * self.n + i) * self.n + j] = v[a];
                }
            }
        }
        out
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.m, self.n)
    }
}

/// A point of the fiber in group coordinates: phases for tori, a unit
/// quaternion (with `A_a = e_a / 2`) for `su2` and `so3`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FiberPoint {
    Abelian(Vec<f64>),
    Quaternion([f64; 4]),
}

impl FiberPoint {
    pub fn identity(group: &LieGroupModel) -> Self {
        if group.is_abelian() {
            FiberPoint::Abelian(vec![0.0; group.dim_m])
        } else {
            FiberPoint::Quaternion([1.0, 0.0, 0.0, 0.0])
        }
    }

    pub(crate) fn coords(&self) -> Vector {
        match self {
            FiberPoint::Abelian(v) => Vector::from_column_slice(v),
            FiberPoint::Quaternion(q) => Vector::from_column_slice(q),
        }
    }

    pub(crate) fn from_coords(template: &FiberPoint, c: &Vector) -> Self {
        match template {
            FiberPoint::Abelian(_) => FiberPoint::Abelian(c.iter().copied().collect()),
            FiberPoint::Quaternion(_) => {
                let n = c.norm();
                FiberPoint::Quaternion([c[0] / n, c[1] / n, c[2] / n, c[3] / n])
            }
        }
    }

    pub fn unit_quaternion(&self) -> Option<UnitQuaternion<f64>> {
        match self {
            FiberPoint::Quaternion(q) => Some(UnitQuaternion::from_quaternion(Quaternion::new(
                q[0], q[1], q[2], q[3],
            ))),
            FiberPoint::Abelian(_) => None,
        }
    }

    /// `Ad(g)` on algebra coefficients.
    pub fn adjoint(&self, m: usize) -> Mat {
        match self.unit_quaternion() {
            Some(q) => {
                let r = q.to_rotation_matrix();
                Mat::from_fn(3, 3, |i, j| r[(i, j)])
            }
            None => Mat::identity(m, m),
        }
    }

    pub fn phases(&self) -> Option<&[f64]> {
        match self {
            FiberPoint::Abelian(v) => Some(v),
            FiberPoint::Quaternion(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum ChartData {
    Builtin(BuiltinBundle),
    Custom(custom::CustomBundle),
}

/// A principal `G`-bundle over one chart.
#[derive(Debug, Clone, PartialEq)]
pub struct BundleModel {
    pub name: String,
    pub base_dim_n: usize,
    pub group: LieGroupModel,
    pub chart_domain: ChartBox,
    data: ChartData,
}

/// Builds one of the builtin bundles.
pub fn make_builtin_bundle(which: BuiltinBundle) -> BundleModel {
    let (group, domain) = match which {
        BuiltinBundle::FlatTorusBundle | BuiltinBundle::ChernTorus(_) => (
            make_builtin_group(GroupKind::Torus(1)),
            ChartBox::square(-0.25, 0.75, 2),
        ),
        BuiltinBundle::Hopf => (
            make_builtin_group(GroupKind::Torus(1)),
            ChartBox::square(-2.0, 2.0, 2),
        ),
        BuiltinBundle::TrivialSu2 => (
            make_builtin_group(GroupKind::Su2),
            ChartBox::square(-1.0, 1.0, 2),
        ),
    };
    BundleModel {
        name: which.to_string(),
        base_dim_n: 2,
        group,
        chart_domain: domain,
        data: ChartData::Builtin(which),
    }
}

/// Parses a bundle name: a builtin name or `file:<path>` for a custom file.
pub fn bundle_by_name(name: &str) -> Result<BundleModel> {
    if let Some(path) = name.strip_prefix("file:") {
        let text = std::fs::read_to_string(path)
            .map_err(|e| WaneError::BundleFile(format!("{path}: {e}")))?;
        return parse_bundle_file(&text);
    }
    Ok(make_builtin_bundle(name.parse()?))
}

/// Hopf curvature constant, fixed by the Maurer-Cartan check.
pub const HOPF_KAPPA: f64 = 1.0;

impl BundleModel {
    pub fn dim_m(&self) -> usize {
        self.group.dim_m
    }

    pub fn total_dim(&self) -> usize {
        self.base_dim_n + self.group.dim_m
    }

    pub fn builtin(&self) -> Option<BuiltinBundle> {
        match &self.data {
            ChartData::Builtin(b) => Some(*b),
            ChartData::Custom(_) => None,
        }
    }

    /// `(u, ∇u)` with `λ = eᵘ` the conformal factor of the base metric.
    fn conformal_log(&self, x: &[f64]) -> (f64, Vec<f64>) {
        match &self.data {
            ChartData::Builtin(BuiltinBundle::Hopf) => {
                // Stereographic chart of the sphere of radius ½.
                let r2: f64 = x.iter().map(|v| v * v).sum();
                (
                    -(1.0 + r2).ln(),
                    x.iter().map(|v| -2.0 * v / (1.0 + r2)).collect(),
                )
            }
            _ => (0.0, vec![0.0; self.base_dim_n]),
        }
    }

    /// Length of `ξ_i` in coordinates is `1/λ`.
    pub fn frame_scale(&self, x: &[f64]) -> f64 {
        self.conformal_log(x).0.exp()
    }

    /// Frame components `a` of a coordinate velocity.
    pub fn frame_coeffs(&self, x: &[f64], xdot: &[f64]) -> Vector {
        let lambda = self.frame_scale(x);
        Vector::from_iterator(xdot.len(), xdot.iter().map(|v| lambda * v))
    }

    /// Coordinate velocity with frame components `a`.
    pub fn coord_velocity(&self, x: &[f64], a: &[f64]) -> Vector {
        let lambda = self.frame_scale(x);
        Vector::from_iterator(a.len(), a.iter().map(|v| v / lambda))
    }

    /// Gram matrix `g(ξ_i, ξ_j)` of the frame under the base metric.
    pub fn frame_metric_check(&self, x: &[f64]) -> Mat {
        let n = self.base_dim_n;
        let lambda = self.frame_scale(x);
        let metric = Mat::identity(n, n) * (lambda * lambda);
        let frame = Mat::identity(n, n) / lambda;
        frame.transpose() * metric * frame
    }

    pub fn christoffel(&self, x: &[f64]) -> Christoffel {
        let n = self.base_dim_n;
        if let ChartData::Custom(c) = &self.data {
            return c.christoffel(x);
        }
        // Conformal metric e^{2u}δ: Γ_ij^k = e^{−u}(u_j δ_ik − δ_ij u_k).
        let (u, du) = self.conformal_log(x);
        let inv = (-u).exp();
        let mut g = Christoffel::zeros(n);
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let dik = if i == k { du[j] } else { 0.0 };
                    let dij = if i == j { du[k] } else { 0.0 };
                    g.set(i, j, k, inv * (dik - dij));
                }
            }
        }
        g
    }

    /// Curvature at the identity section over `x`.
    pub fn curvature(&self, x: &[f64]) -> Curvature {
        let (m, n) = (self.dim_m(), self.base_dim_n);
        let mut om = Curvature::zeros(m, n);
        match &self.data {
            ChartData::Builtin(BuiltinBundle::FlatTorusBundle) => {}
            ChartData::Builtin(BuiltinBundle::ChernTorus(f)) => om.set_pair(0, 0, 1, *f as f64),
            ChartData::Builtin(BuiltinBundle::Hopf) => om.set_pair(0, 0, 1, HOPF_KAPPA),
            ChartData::Builtin(BuiltinBundle::TrivialSu2) => {
                om.set_pair(0, 0, 1, 1.0);
                om.set_pair(1, 0, 1, x[0]);
            }
            ChartData::Custom(c) => return c.curvature(x),
        }
        om
    }

    /// Curvature at the fiber point `fiber` over `x`: `Ad(g⁻¹) Ω`.
    pub fn curvature_at(&self, x: &[f64], fiber: &FiberPoint) -> Curvature {
        let om = self.curvature(x);
        if self.group.is_abelian() {
            om
        } else {
            om.rotated(&fiber.adjoint(self.dim_m()).transpose())
        }
    }

    /// Connection one-form of the trivialisation: column `i` is `A(∂_i)` in
    /// algebra coordinates.
    pub fn connection_form(&self, x: &[f64]) -> Option<Mat> {
        let (m, n) = (self.dim_m(), self.base_dim_n);
        let mut a = Mat::zeros(m, n);
        match &self.data {
            ChartData::Builtin(BuiltinBundle::FlatTorusBundle) => {}
            ChartData::Builtin(BuiltinBundle::ChernTorus(f)) => a[(0, 1)] = 2.0 * *f as f64 * x[0],
            ChartData::Builtin(BuiltinBundle::Hopf) => {
                let s = HOPF_KAPPA / (1.0 + x[0] * x[0] + x[1] * x[1]);
                a[(0, 0)] = -s * x[1];
                a[(0, 1)] = s * x[0];
            }
            ChartData::Builtin(BuiltinBundle::TrivialSu2) => {
                a[(0, 1)] = 2.0 * x[0];
                a[(1, 1)] = x[0] * x[0];
            }
            ChartData::Custom(c) => return c.connection(x),
        }
        Some(a)
    }

    fn require_connection(&self, x: &[f64]) -> Result<Mat> {
        self.connection_form(x).ok_or_else(|| WaneError::Unsupported {
            model: self.name.clone(),
            what: "no connection one-form in the bundle file".into(),
        })
    }

    /// Time derivative of the fiber coordinates for base velocity `xdot`
    /// and vertical velocity `w` (unscaled algebra coordinates).
    pub(crate) fn fiber_derivative(
        &self,
        x: &[f64],
        xdot: &[f64],
        w: &[f64],
        fiber: &Vector,
    ) -> Result<Vector> {
        let a = self.require_connection(x)? * Vector::from_column_slice(xdot);
        if self.group.is_abelian() {
            return Ok(Vector::from_column_slice(w) - a);
        }
        let q = Quaternion::new(fiber[0], fiber[1], fiber[2], fiber[3]);
        let body = Quaternion::from_parts(0.0, Vector3::new(w[0], w[1], w[2]) * 0.5);
        let gauge = Quaternion::from_parts(0.0, Vector3::new(a[0], a[1], a[2]) * 0.5);
        let dq = q * body - gauge * q;
        Ok(Vector::from_column_slice(&[dq.w, dq.i, dq.j, dq.k]))
    }

    /// `|ω([ξ_i♮, ξ_j♮]) + 2 Ω(ξ_i♮, ξ_j♮)|` at the identity section over `x`,
    /// with the bracket of lifts taken by central differences of the ambient
    /// vector fields of the trivialisation.
    pub fn maurer_cartan_residual(&self, x: &[f64], i: usize, j: usize) -> Result<f64> {
        let n = self.base_dim_n;
        let reach = STENCIL * 2.0 / self.frame_scale(x);
        for axis in 0..n {
            for s in [-1.0, 1.0] {
                let mut p = x.to_vec();
                p[axis] += s * reach;
                if !self.chart_domain.contains(&p) {
                    return Err(WaneError::BoundaryPoint { point: x.to_vec() });
                }
            }
        }
        self.require_connection(x)?;
        let identity = FiberPoint::identity(&self.group).coords();
        let fiber_len = identity.len();
        let lift = |axis: usize, p: &Vector| -> Vector {
            let xs = &p.as_slice()[..n];
            let mut e = vec![0.0; n];
            e[axis] = 1.0 / self.frame_scale(xs);
            let f = p.rows(n, fiber_len).clone_owned();
            let df = self
                .fiber_derivative(xs, &e, &vec![0.0; self.dim_m()], &f)
                .expect("connection checked above");
            let mut out = Vector::zeros(n + fiber_len);
            out.rows_mut(0, n).copy_from_slice(&e);
            out.rows_mut(n, fiber_len).copy_from(&df);
            out
        };
        let mut p = Vector::zeros(n + fiber_len);
        p.rows_mut(0, n).copy_from_slice(x);
        p.rows_mut(n, fiber_len).copy_from(&identity);
        let directional = |field: usize, along: &Vector| -> Vector {
            (lift(field, &(&p + along * STENCIL)) - lift(field, &(&p - along * STENCIL)))
                / (2.0 * STENCIL)
        };
        let xi = lift(i, &p);
        let xj = lift(j, &p);
        let bracket = directional(j, &xi) - directional(i, &xj);
        let a = self.require_connection(x)? * bracket.rows(0, n).clone_owned();
        let vertical = if self.group.is_abelian() {
            bracket.rows(n, fiber_len).clone_owned()
        } else {
            bracket.rows(n + 1, 3).clone_owned() * 2.0
        };
        let omega = vertical + a;
        Ok((omega + self.curvature(x).pair(i, j) * 2.0).norm())
    }

    /// Connection term of `∇_{δ̇}X` in the orthonormal frame
    /// `{ξ_i♮, A_{ε,i} = ε⁻¹A_i}`, so that `∇_{δ̇}X = X' + connection_term`.
    /// Assembled from the covariant derivative identities of connection
    /// metrics term by term.
    #[allow(clippy::too_many_arguments)]
    pub fn connection_term(
        &self,
        eps: f64,
        x: &[f64],
        a: &[f64],
        d: &[f64],
        fiber: &FiberPoint,
        field: &Vector,
    ) -> Vector {
        let (n, m) = (self.base_dim_n, self.dim_m());
        let gamma = self.christoffel(x);
        let om = self.curvature_at(x, fiber);
        let c = &field.as_slice()[..n];
        let b = &field.as_slice()[n..];
        let mut out = Vector::zeros(n + m);
        for k in 0..n {
            let mut v = 0.0;
            for j in 0..n {
                // (∇_α̇ c)♮ part.
                for i in 0..n {
                    v += a[i] * c[j] * gamma.get(i, j, k);
                }
                // ∇_{A*} X♮ has horizontal part −⟨A, Ω(X, ·)⟩.
                for s in 0..m {
                    v -= eps * d[s] * c[j] * om.get(s, j, k);
                }
            }
            // ∇_{X♮} B* = ∇_{B*} X♮.
            for s in 0..m {
                v -= eps * b[s] * om.contract_first(a, s, k);
            }
            out[k] = v;
        }
        for k in 0..m {
            // Vertical part of ∇_{X♮}Y♮ is Ω(X, Y)*.
            let mut v: f64 = (0..n).map(|j| eps * c[j] * om.contract_first(a, k, j)).sum();
            // ∇_{A*} B* = (∇_A B)*.
            for i in 0..m {
                for j in 0..m {
                    v += d[i] * b[j] * self.group.connection(i, j, k) / eps;
                }
            }
            out[n + k] = v;
        }
        out
    }

    /// Canonical description used for content hashing of model definitions.
    pub fn describe(&self) -> String {
        match &self.data {
            ChartData::Builtin(b) => format!(
                "{b};group={};domain={:?}..{:?};kappa={HOPF_KAPPA}",
                self.group.kind, self.chart_domain.lo, self.chart_domain.hi
            ),
            ChartData::Custom(c) => c.describe(),
        }
    }
}

#[cfg(test)]
mod tests;
