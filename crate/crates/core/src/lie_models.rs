//! Compact structure groups with a fixed orthonormal algebra basis.
//!
//! Groups are described by their structure constants `c[i][j][k]`
//! (`[A_i, A_j] = c_ij^k A_k`) and the coefficients of the bi-invariant
//! connection, `∇_{A_i} A_j = C_ij^k A_k` with `C = c / 2`. Holonomy
//! elements live in the adjoint representation, as orthogonal `m × m`
//! matrices acting on the algebra.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, WaneError};
use crate::linalg::{expm, ortho_residual, Mat, PathFn, Vector};

/// Closure tolerance for loops, in exponential chart coordinates.
pub const LOOP_CLOSURE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GroupKind {
    Torus(usize),
    Su2,
    So3,
}

impl fmt::Display for GroupKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GroupKind::Torus(n) => write!(f, "torus:{n}"),
            GroupKind::Su2 => write!(f, "su2"),
            GroupKind::So3 => write!(f, "so3"),
        }
    }
}

impl FromStr for GroupKind {
    type Err = WaneError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "su2" => Ok(GroupKind::Su2),
            "so3" => Ok(GroupKind::So3),
            _ => {
                let n = s
                    .strip_prefix("torus:")
                    .and_then(|n| n.parse::<usize>().ok())
                    .filter(|&n| n > 0)
                    .ok_or_else(|| WaneError::UnknownModel(s.to_string()))?;
                Ok(GroupKind::Torus(n))
            }
        }
    }
}

/// A compact Lie group presented through its algebra in an orthonormal basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LieGroupModel {
    pub kind: GroupKind,
    pub dim_m: usize,
    pub basis_labels: Vec<String>,
    /// Flattened `c[i][j][k]`.
    structure_constants: Vec<f64>,
    /// Flattened `C[i][j][k]`.
    connection_coeffs: Vec<f64>,
}

impl LieGroupModel {
    fn idx(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.dim_m + j) * self.dim_m + k
    }

    pub fn structure(&self, i: usize, j: usize, k: usize) -> f64 {
        self.structure_constants[self.idx(i, j, k)]
    }

    pub fn connection(&self, i: usize, j: usize, k: usize) -> f64 {
        self.connection_coeffs[self.idx(i, j, k)]
    }

    pub fn is_abelian(&self) -> bool {
        self.structure_constants.iter().all(|&c| c == 0.0)
    }

    /// Adjoint representative `ad(a)`, with `ad(a)[k][j] = a^i c_ij^k`.
    pub fn ad(&self, a: &[f64]) -> Mat {
        let m = self.dim_m;
        Mat::from_fn(m, m, |k, j| {
            (0..m).map(|i| a[i] * self.structure(i, j, k)).sum()
        })
    }

    pub fn bracket(&self, a: &[f64], b: &[f64]) -> Vector {
        self.ad(a) * Vector::from_column_slice(b)
    }

    /// Transport generator on the algebra for velocity `v`:
    /// `Q[i][j] = −v^k C_kj^i`.
    pub fn transport_generator(&self, v: &[f64]) -> Mat {
        let m = self.dim_m;
        Mat::from_fn(m, m, |i, j| {
            -(0..m).map(|k| v[k] * self.connection(k, j, i)).sum::<f64>()
        })
    }

    /// Largest violation of the cyclic Jacobi identity over basis triples.
    pub fn jacobi_residual(&self) -> f64 {
        let m = self.dim_m;
        let e = |i: usize| {
            let mut v = vec![0.0; m];
            v[i] = 1.0;
            v
        };
        let mut worst: f64 = 0.0;
        for i in 0..m {
            for j in 0..m {
                for k in 0..m {
                    let (a, b, c) = (e(i), e(j), e(k));
                    let t1 = self.bracket(self.bracket(&a, &b).as_slice(), &c);
                    let t2 = self.bracket(self.bracket(&b, &c).as_slice(), &a);
                    let t3 = self.bracket(self.bracket(&c, &a).as_slice(), &b);
                    worst = worst.max((t1 + t2 + t3).amax());
                }
            }
        }
        worst
    }

    /// Checks antisymmetry, Jacobi, metric compatibility and `C = c/2`.
    pub fn validate(&self) -> Result<()> {
        let m = self.dim_m;
        for i in 0..m {
            for j in 0..m {
                for k in 0..m {
                    if self.structure(i, j, k) != -self.structure(j, i, k) {
                        return Err(WaneError::InvalidInput(format!(
                            "structure constants not antisymmetric at ({i},{j},{k})"
                        )));
                    }
                    if self.connection(i, j, k) != -self.connection(i, k, j) {
                        return Err(WaneError::InvalidInput(format!(
                            "connection not metric at ({i},{j},{k})"
                        )));
                    }
                    if self.connection(i, j, k) != 0.5 * self.structure(i, j, k) {
                        return Err(WaneError::InvalidInput(format!(
                            "connection is not bi-invariant at ({i},{j},{k})"
                        )));
                    }
                }
            }
        }
        if self.jacobi_residual() > 1e-12 {
            return Err(WaneError::InvalidInput("Jacobi identity fails".into()));
        }
        Ok(())
    }

    pub fn identity(&self) -> Mat {
        Mat::identity(self.dim_m, self.dim_m)
    }
}

/// Builds one of the builtin groups.
///
/// `su2` and `so3` share the algebra with `[A_1, A_2] = A_3` cyclically, so
/// bi-invariant one-parameter subgroups through a unit vector close after 2π
/// in the adjoint representation.
pub fn make_builtin_group(kind: GroupKind) -> LieGroupModel {
    let m = match kind {
        GroupKind::Torus(n) => n,
        GroupKind::Su2 | GroupKind::So3 => 3,
    };
    let mut c = vec![0.0; m * m * m];
    if matches!(kind, GroupKind::Su2 | GroupKind::So3) {
        for (i, j, k) in [(0, 1, 2), (1, 2, 0), (2, 0, 1)] {
            c[(i * 3 + j) * 3 + k] = 1.0;
            c[(j * 3 + i) * 3 + k] = -1.0;
        }
    }
    let connection = c.iter().map(|x| 0.5 * x).collect();
    LieGroupModel {
        kind,
        dim_m: m,
        basis_labels: (1..=m).map(|i| format!("A{i}")).collect(),
        structure_constants: c,
        connection_coeffs: connection,
    }
}

/// `exp(ad(a))`: the adjoint action of `exp(a)` on the algebra.
pub fn matrix_exponential(g: &LieGroupModel, a: &[f64]) -> Mat {
    expm(&g.ad(a))
}

/// Left-trivialised derivative of the exponential chart:
/// `v = Σ_k (−ad_x)^k x' / (k+1)!`, so that `exp(x)⁻¹ d/dt exp(x) = v`.
pub fn left_velocity(g: &LieGroupModel, x: &[f64], dx: &[f64]) -> Vector {
    let neg_ad = -g.ad(x);
    let mut term = Vector::from_column_slice(dx);
    let mut sum = term.clone();
    for k in 1..60 {
        term = &neg_ad * term / (k as f64 + 1.0);
        sum += &term;
        if term.amax() < 1e-18 {
            break;
        }
    }
    sum
}

/// A loop in the group based at the identity, given in exponential chart
/// coordinates `x(t)` with its derivative.
#[derive(Clone)]
pub struct GroupLoop {
    position: PathFn,
    velocity: PathFn,
}

impl fmt::Debug for GroupLoop {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GroupLoop")
            .field("start", &self.position(0.0).as_slice())
            .field("end", &self.position(1.0).as_slice())
            .finish()
    }
}

impl GroupLoop {
    pub fn new<P, V>(position: P, velocity: V) -> Self
    where
        P: Fn(f64) -> Vector + Send + Sync + 'static,
        V: Fn(f64) -> Vector + Send + Sync + 'static,
    {
        GroupLoop {
            position: Arc::new(position),
            velocity: Arc::new(velocity),
        }
    }

    /// The constant loop at the identity.
    pub fn constant(m: usize) -> Self {
        GroupLoop::new(move |_| Vector::zeros(m), move |_| Vector::zeros(m))
    }

    /// Circle of the given radius through the origin, in the plane spanned by
    /// the orthonormal pair `(e1, e2)`.
    pub fn planar_circle(e1: Vector, e2: Vector, radius: f64) -> Self {
        let (p1, p2) = (e1.clone(), e2.clone());
        GroupLoop::new(
            move |t| {
                let w = 2.0 * PI * t;
                (&p1 * (w.cos() - 1.0) + &p2 * w.sin()) * radius
            },
            move |t| {
                let w = 2.0 * PI * t;
                (&e1 * (-w.sin()) + &e2 * w.cos()) * (2.0 * PI * radius)
            },
        )
    }

    /// Circle through the origin in the plane orthogonal to `normal` (m = 3).
    pub fn circle_with_normal(normal: &Vector, radius: f64) -> Self {
        let (e1, e2) = orthonormal_complement(normal);
        GroupLoop::planar_circle(e1, e2, radius)
    }

    /// Random trigonometric loop with `harmonics` modes per coordinate and
    /// Gaussian coefficients of standard deviation `amplitude`.
    pub fn random<R: Rng + ?Sized>(
        m: usize,
        harmonics: usize,
        amplitude: f64,
        rng: &mut R,
    ) -> Self {
        let coeffs: Vec<(f64, f64)> = (0..m * harmonics)
            .map(|_| {
                (
                    amplitude * rng.sample::<f64, _>(StandardNormal),
                    amplitude * rng.sample::<f64, _>(StandardNormal),
                )
            })
            .collect();
        let cp = coeffs.clone();
        GroupLoop::new(
            move |t| {
                Vector::from_fn(m, |i, _| {
                    (1..=harmonics)
                        .map(|h| {
                            let (a, b) = cp[i * harmonics + h - 1];
                            let w = 2.0 * PI * h as f64 * t;
                            a * (w.cos() - 1.0) + b * w.sin()
                        })
                        .sum()
                })
            },
            move |t| {
                Vector::from_fn(m, |i, _| {
                    (1..=harmonics)
                        .map(|h| {
                            let (a, b) = coeffs[i * harmonics + h - 1];
                            let f = 2.0 * PI * h as f64;
                            let w = f * t;
                            f * (-a * w.sin() + b * w.cos())
                        })
                        .sum()
                })
            },
        )
    }

    /// Traverses `self` on [0, ½] and `next` on [½, 1]. Each half is
    /// reparametrised by `u − sin(2πu)/2π` so the velocity vanishes at the seam.
    pub fn concat(&self, next: &GroupLoop) -> Self {
        let (p1, p2) = (self.position.clone(), next.position.clone());
        let (v1, v2) = (self.velocity.clone(), next.velocity.clone());
        let warp = |u: f64| u - (2.0 * PI * u).sin() / (2.0 * PI);
        let dwarp = |u: f64| 1.0 - (2.0 * PI * u).cos();
        GroupLoop::new(
            move |t| {
                if t <= 0.5 {
                    p1(warp(2.0 * t))
                } else {
                    p2(warp(2.0 * t - 1.0))
                }
            },
            move |t| {
                if t <= 0.5 {
                    v1(warp(2.0 * t)) * (2.0 * dwarp(2.0 * t))
                } else {
                    v2(warp(2.0 * t - 1.0)) * (2.0 * dwarp(2.0 * t - 1.0))
                }
            },
        )
    }

    pub fn position(&self, t: f64) -> Vector {
        (self.position)(t)
    }

    pub fn chart_velocity(&self, t: f64) -> Vector {
        (self.velocity)(t)
    }

    /// Left-invariant velocity components at time `t`.
    pub fn body_velocity(&self, g: &LieGroupModel, t: f64) -> Vector {
        left_velocity(
            g,
            self.position(t).as_slice(),
            self.chart_velocity(t).as_slice(),
        )
    }

    /// max(|x(0)|, |x(1) − x(0)|).
    pub fn closure_residual(&self) -> f64 {
        let x0 = self.position(0.0);
        let x1 = self.position(1.0);
        x0.amax().max((x1 - &x0).amax())
    }

    /// Arclength under the bi-invariant metric (composite Simpson rule).
    pub fn length(&self, g: &LieGroupModel, steps: usize) -> f64 {
        let steps = steps + steps % 2;
        let h = 1.0 / steps as f64;
        let speed = |t: f64| self.body_velocity(g, t).norm();
        let mut sum = speed(0.0) + speed(1.0);
        for s in 1..steps {
            let w = if s % 2 == 1 { 4.0 } else { 2.0 };
            sum += w * speed(s as f64 * h);
        }
        sum * h / 3.0
    }
}

/// Two unit vectors completing `normal` to an orthonormal basis of ℝ³.
pub fn orthonormal_complement(normal: &Vector) -> (Vector, Vector) {
    let n = normal.normalize();
    let pick = if n[0].abs() < 0.9 {
        Vector::from_column_slice(&[1.0, 0.0, 0.0])
    } else {
        Vector::from_column_slice(&[0.0, 1.0, 0.0])
    };
    let e1 = (&pick - &n * n.dot(&pick)).normalize();
    let e2 = Vector::from_column_slice(&[
        n[1] * e1[2] - n[2] * e1[1],
        n[2] * e1[0] - n[0] * e1[2],
        n[0] * e1[1] - n[1] * e1[0],
    ]);
    (e1, e2)
}

/// A holonomy element paired with the length of a loop producing it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupElementSample {
    pub matrix: Mat,
    pub source_length: f64,
}

impl GroupElementSample {
    pub fn new(matrix: Mat, source_length: f64) -> Result<Self> {
        if source_length < 0.0 || !source_length.is_finite() {
            return Err(WaneError::InvalidInput(format!(
                "source length must be nonnegative, got {source_length}"
            )));
        }
        let res = ortho_residual(&matrix);
        if res > 1e-8 {
            return Err(WaneError::InvalidInput(format!(
                "holonomy sample not orthogonal (residual {res:e})"
            )));
        }
        Ok(GroupElementSample {
            matrix,
            source_length,
        })
    }

    pub fn identity(m: usize) -> Self {
        GroupElementSample {
            matrix: Mat::identity(m, m),
            source_length: 0.0,
        }
    }

    pub fn inverse(&self) -> Self {
        GroupElementSample {
            matrix: self.matrix.transpose(),
            source_length: self.source_length,
        }
    }
}

/// Bi-invariant parallel transport around one loop, in the left-invariant frame.
pub fn loop_holonomy(g: &LieGroupModel, lp: &GroupLoop, steps: usize) -> Result<Mat> {
    let residual = lp.closure_residual();
    if residual > LOOP_CLOSURE_TOL {
        return Err(WaneError::NonClosedLoop {
            residual,
            tolerance: LOOP_CLOSURE_TOL,
        });
    }
    if g.is_abelian() {
        return Ok(g.identity());
    }
    let q = |t: f64| g.transport_generator(lp.body_velocity(g, t).as_slice());
    let y = crate::linalg::rk4_matrix(q, g.dim_m, 0.0, 1.0, steps);
    Ok(crate::linalg::polar_orthogonal(&y))
}

/// Holonomy samples of the bi-invariant connection, one per loop, in input order.
pub fn group_holonomy_sample(
    g: &LieGroupModel,
    loops: &[GroupLoop],
    steps: usize,
) -> Result<Vec<GroupElementSample>> {
    if steps < 16 {
        return Err(WaneError::InvalidInput(format!(
            "holonomy sampling needs at least 16 steps, got {steps}"
        )));
    }
    loops
        .par_iter()
        .map(|lp| {
            let matrix = loop_holonomy(g, lp, steps)?;
            GroupElementSample::new(matrix, lp.length(g, steps))
        })
        .collect()
}
