//! Orbits of vectors under finitely generated matrix semigroups and
//! covering-radius measurements on round spheres.

use std::collections::HashSet;

use rayon::prelude::*;

use crate::linalg::{expm, frobenius, Mat, Vector};

/// Points reached from `v` by words of length at most `depth` in `gens`.
///
/// Points are deduplicated on a cubic grid of side `dedupe` centred on the
/// lattice points: one representative is kept per cell. The search stops early once `cap`
/// points are stored.
pub fn orbit(gens: &[Mat], v: &Vector, depth: usize, dedupe: f64, cap: usize) -> Vec<Vector> {
    let cell = |p: &Vector| -> Vec<i64> { p.iter().map(|x| (x / dedupe).round() as i64).collect() };
    let mut seen: HashSet<Vec<i64>> = HashSet::new();
    seen.insert(cell(v));
    let mut points = vec![v.clone()];
    let mut frontier = vec![v.clone()];
    for _ in 0..depth {
        if frontier.is_empty() || points.len() >= cap {
            break;
        }
        let images: Vec<Vector> = frontier
            .par_iter()
            .flat_map_iter(|p| gens.iter().map(move |g| g * p))
            .collect();
        frontier.clear();
        for q in images {
            if points.len() >= cap {
                break;
            }
            if seen.insert(cell(&q)) {
                points.push(q.clone());
                frontier.push(q);
            }
        }
    }
    points
}

/// Distance from `u` to the nearest point of `orbit_points`.
pub fn distance_to_set(orbit_points: &[Vector], u: &Vector) -> f64 {
    orbit_points
        .iter()
        .map(|o| (o - u).norm())
        .fold(f64::INFINITY, f64::min)
}

/// `count` nearly uniform unit vectors on S² (Fibonacci lattice).
pub fn fibonacci_sphere(count: usize) -> Vec<[f64; 3]> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..count)
        .map(|i| {
            let z = 1.0 - 2.0 * (i as f64 + 0.5) / count as f64;
            let r = (1.0 - z * z).sqrt();
            let phi = golden * i as f64;
            [r * phi.cos(), r * phi.sin(), z]
        })
        .collect()
}

/// Largest distance from a point of the radius-`radius` sphere (sampled on a
/// Fibonacci grid of `grid` points) to the nearest of `points`.
pub fn covering_radius(points: &[[f64; 3]], radius: f64, grid: usize) -> f64 {
    fibonacci_sphere(grid)
        .par_iter()
        .map(|g| {
            points
                .iter()
                .map(|p| {
                    let d: [f64; 3] = std::array::from_fn(|i| radius * g[i] - p[i]);
                    (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt()
                })
                .fold(f64::INFINITY, f64::min)
        })
        .reduce(|| 0.0, f64::max)
}

/// Logarithm of a matrix close to the identity, by its Mercator series.
fn log_near_identity(x: &Mat) -> Mat {
    let y = x - Mat::identity(x.nrows(), x.ncols());
    let mut term = y.clone();
    let mut out = y.clone();
    for k in 2..60 {
        term = &term * &y;
        let sign = if k % 2 == 0 { -1.0 } else { 1.0 };
        out += &term * (sign / k as f64);
        if term.amax() < 1e-18 {
            break;
        }
    }
    (&out - out.transpose()) * 0.5
}

/// Appends `h` to an orthonormal (Frobenius) family if it adds a new direction.
fn extend_basis(basis: &mut Vec<Mat>, h: &Mat, tol: f64) -> bool {
    let mut r = h.clone();
    for b in basis.iter() {
        r -= b * b.dot(&r);
    }
    let norm = frobenius(&r);
    if norm > tol * frobenius(h).max(1e-300) {
        basis.push(r / norm);
        true
    } else {
        false
    }
}

/// Quotient by the closure of the group generated by a finite set of
/// orthogonal matrices.
///
/// Candidate points come from words of bounded length; the identity
/// component of the closure is recovered as a Lie algebra spanned by logs of
/// word products near the identity, and each candidate is refined by
/// Gauss-Newton steps along that algebra.
#[derive(Debug, Clone)]
pub struct OrbitClosure {
    generators: Vec<Mat>,
    algebra: Vec<Mat>,
    pub depth: usize,
    pub dedupe: f64,
    pub cap: usize,
}

/// Products within this Frobenius distance from `I` are treated as exact.
const TRIVIAL_PRODUCT: f64 = 1e-4;
const LOG_RADIUS: f64 = 0.3;
const ELEMENT_POOL: usize = 3000;
const POOL_LAYERS: usize = 64;

/// Up to `cap` distinct group elements reached by breadth-first words.
fn element_pool(generators: &[Mat], cap: usize) -> Vec<Mat> {
    let k = generators[0].nrows();
    let key = |m: &Mat| -> Vec<i64> { m.iter().map(|x| (x * 1e6).round() as i64).collect() };
    let id = Mat::identity(k, k);
    let mut seen = HashSet::from([key(&id)]);
    let mut pool = vec![id.clone()];
    let mut frontier = vec![id];
    for _ in 0..POOL_LAYERS {
        let mut next = Vec::new();
        for w in &frontier {
            for g in generators {
                let x = g * w;
                if pool.len() < cap && seen.insert(key(&x)) {
                    pool.push(x.clone());
                    next.push(x);
                }
            }
        }
        if next.is_empty() {
            break;
        }
        frontier = next;
    }
    pool
}

impl OrbitClosure {
    /// Generators within `identity_tol` of `I` (operator norm) are dropped.
    pub fn new(gens: &[Mat], identity_tol: f64, depth: usize, dedupe: f64, cap: usize) -> Self {
        let generators: Vec<Mat> = gens
            .iter()
            .filter(|g| {
                let id = Mat::identity(g.nrows(), g.ncols());
                crate::linalg::operator_norm(&(*g - id)) > identity_tol
            })
            .cloned()
            .collect();
        let algebra = Self::lie_algebra(&generators);
        OrbitClosure { generators, algebra, depth, dedupe, cap }
    }

    fn lie_algebra(generators: &[Mat]) -> Vec<Mat> {
        let Some(first) = generators.first() else { return Vec::new() };
        let k = first.nrows();
        let words = element_pool(generators, ELEMENT_POOL);
        let logs: Vec<Mat> = (0..words.len())
            .into_par_iter()
            .flat_map_iter(|i| {
                let words = &words;
                // Orthogonal invariance: ‖W_iᵀW_j − I‖ = ‖W_i − W_j‖.
                (i + 1..words.len()).filter_map(move |j| {
                    let gap = frobenius(&(&words[i] - &words[j]));
                    (gap > TRIVIAL_PRODUCT && gap < LOG_RADIUS)
                        .then(|| log_near_identity(&(words[i].transpose() * &words[j])))
                })
            })
            .collect();
        let mut basis = Vec::new();
        let max_dim = k * (k - 1) / 2;
        for h in &logs {
            if basis.len() == max_dim {
                break;
            }
            extend_basis(&mut basis, h, 1e-3);
        }
        // Close under brackets.
        let mut grew = true;
        while grew && basis.len() < max_dim {
            grew = false;
            let current = basis.clone();
            for (i, a) in current.iter().enumerate() {
                for b in &current[i + 1..] {
                    if extend_basis(&mut basis, &(a * b - b * a), 1e-3) {
                        grew = true;
                    }
                }
            }
        }
        basis
    }

    pub fn generators(&self) -> &[Mat] {
        &self.generators
    }

    pub fn algebra_dim(&self) -> usize {
        self.algebra.len()
    }

    pub fn orbit(&self, v: &Vector) -> Vec<Vector> {
        orbit(&self.generators, v, self.depth, self.dedupe, self.cap)
    }

    /// Distance from `u` to the closure of the orbit whose word points are
    /// `orbit_points`.
    pub fn distance_from_orbit(&self, orbit_points: &[Vector], u: &Vector) -> f64 {
        let mut ranked: Vec<(f64, &Vector)> = orbit_points.iter().map(|o| ((o - u).norm(), o)).collect();
        ranked.sort_by(|a, b| a.0.total_cmp(&b.0));
        let coarse = ranked.first().map_or(f64::INFINITY, |r| r.0);
        if self.algebra.is_empty() {
            return coarse;
        }
        ranked
            .iter()
            .take(8)
            .map(|(_, o)| self.refine(o, u))
            .fold(coarse, f64::min)
    }

    fn refine(&self, start: &Vector, u: &Vector) -> f64 {
        let mut o = start.clone();
        let mut best = (&o - u).norm();
        for _ in 0..60 {
            let jac = Mat::from_columns(&self.algebra.iter().map(|h| h * &o).collect::<Vec<_>>());
            let rhs = jac.transpose() * (u - &o);
            let Ok(step) = (jac.transpose() * &jac).pseudo_inverse(1e-12).map(|p| p * rhs) else {
                break;
            };
            let generator = self
                .algebra
                .iter()
                .zip(step.iter())
                .fold(Mat::zeros(o.len(), o.len()), |acc, (h, c)| acc + h * *c);
            let next = expm(&generator) * &o;
            let d = (&next - u).norm();
            if d >= best {
                break;
            }
            best = d;
            o = next;
            if step.norm() < 1e-13 {
                break;
            }
        }
        best
    }

    /// Symmetrised quotient distance between `u` and `v`.
    pub fn distance(&self, u: &Vector, v: &Vector) -> f64 {
        let a = self.distance_from_orbit(&self.orbit(v), u);
        let b = self.distance_from_orbit(&self.orbit(u), v);
        a.min(b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rotation_z(angle: f64) -> Mat {
        let (c, s) = (angle.cos(), angle.sin());
        Mat::from_row_slice(3, 3, &[c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0])
    }

    #[test]
    fn identity_generators_give_a_single_point() {
        let v = Vector::from_column_slice(&[1.0, 0.0, 0.0]);
        let pts = orbit(&[Mat::identity(3, 3)], &v, 6, 0.01, 1000);
        assert_eq!(pts.len(), 1);
    }

    #[test]
    fn rational_rotation_orbit_is_finite() {
        let v = Vector::from_column_slice(&[1.0, 0.0, 0.0]);
        let pts = orbit(&[rotation_z(std::f64::consts::PI / 2.0)], &v, 10, 1e-6, 1000);
        assert_eq!(pts.len(), 4);
        let far = Vector::from_column_slice(&[0.0, 0.0, 1.0]);
        assert!((distance_to_set(&pts, &far) - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn cap_is_respected() {
        let v = Vector::from_column_slice(&[1.0, 0.0, 0.0]);
        let pts = orbit(&[rotation_z(1.0)], &v, 100, 1e-9, 17);
        assert_eq!(pts.len(), 17);
    }

    #[test]
    fn covering_radius_of_grid_and_pole() {
        let g = fibonacci_sphere(500);
        for p in &g {
            assert!((p[0] * p[0] + p[1] * p[1] + p[2] * p[2] - 1.0).abs() < 1e-12);
        }
        assert!(covering_radius(&g, 1.0, 500) < 1e-12);
        let pole = [[0.0, 0.0, 2.0]];
        let r = covering_radius(&pole, 2.0, 2000);
        assert!((r - 4.0).abs() < 0.01);
    }

    fn rotation_x(angle: f64) -> Mat {
        let (c, s) = (angle.cos(), angle.sin());
        Mat::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c])
    }

    #[test]
    fn closure_of_irrational_rotation_is_a_circle() {
        let closure = OrbitClosure::new(&[rotation_z(1.0), rotation_z(-1.0)], 1e-9, 6, 0.02, 10_000);
        assert_eq!(closure.algebra_dim(), 1);
        let u = Vector::from_column_slice(&[1.0, 0.0, 0.5]);
        let v = Vector::from_column_slice(&[0.3f64.cos(), 0.3f64.sin(), 0.5]);
        assert!(closure.distance(&u, &v) < 1e-10);
        let w = Vector::from_column_slice(&[1.0, 0.0, 0.7]);
        assert!((closure.distance(&u, &w) - 0.2).abs() < 1e-10);
    }

    #[test]
    fn closure_of_two_rotations_is_so3() {
        let gens = [rotation_z(1.0), rotation_x(0.7), rotation_z(-1.0), rotation_x(-0.7)];
        let closure = OrbitClosure::new(&gens, 1e-9, 4, 0.05, 10_000);
        assert_eq!(closure.algebra_dim(), 3);
        let u = Vector::from_column_slice(&[0.0, 0.6, 0.8]);
        let v = Vector::from_column_slice(&[0.48, 0.0, -0.64]);
        assert!((closure.distance(&u, &v) - 0.2).abs() < 1e-9);
    }

    #[test]
    fn finite_group_has_no_algebra() {
        let q = std::f64::consts::PI / 2.0;
        let closure = OrbitClosure::new(&[rotation_z(q), Mat::identity(3, 3)], 1e-6, 8, 1e-6, 100);
        assert_eq!(closure.generators().len(), 1);
        assert_eq!(closure.algebra_dim(), 0);
        let u = Vector::from_column_slice(&[1.0, 0.0, 0.0]);
        let v = Vector::from_column_slice(&[0.0, -1.0, 0.0]);
        assert!(closure.distance(&u, &v) < 1e-12);
    }
}
