use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::finite::index_labels;
use super::{gh_upper_bound, holonomic_distance, FiniteMetricSpace, GhOptions, GhStatus, HolonomyDictionary};
use crate::bundle_models::{horizontal_lift, BaseCurve, BundleModel, FiberPoint, TotalCurve};
use crate::error::{Result, WaneError};
use crate::lie_models::{GroupElementSample, GroupLoop};
use crate::linalg::{Mat, PathFn, Vector};
use crate::orbit::fibonacci_sphere;
use crate::transport_engine::{base_transport, parallel_transport};

pub const MAX_FIBER_SAMPLES: usize = 200;
pub const MAX_PRODUCT_SAMPLES: usize = 100;

/// Loop families used as competitors in fiber distances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiberOptions {
    pub seed: u64,
    pub steps: usize,
    /// Normals of vertical circles (for three-dimensional groups).
    pub normals: usize,
    /// Radii of vertical circles in the algebra chart.
    pub vertical_radii: Vec<f64>,
    /// Radii of base circles, closed up by a vertical segment.
    pub base_radii: Vec<f64>,
    /// Also use every concatenation of two dictionary loops.
    pub concatenate: bool,
}

impl Default for FiberOptions {
    fn default() -> Self {
        FiberOptions {
            seed: 0,
            steps: 256,
            normals: 24,
            vertical_radii: vec![0.25, 0.5, 0.75, 1.0, 1.25, 1.5],
            base_radii: vec![0.05, 0.1, 0.2, 0.3],
            concatenate: true,
        }
    }
}

/// Sampled vectors of one tangent space with their fiber distances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiberSample {
    pub space: FiniteMetricSpace,
    /// Frame components; entry 0 is the zero vector.
    pub vectors: Vec<Vector>,
}

pub(crate) fn ball_sample(dim: usize, radius: f64, rng: &mut ChaCha8Rng) -> Vector {
    let dir = Vector::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal)).normalize();
    dir * (radius * rng.gen::<f64>().powf(1.0 / dim as f64))
}

/// Algebra increment `w` with `q·exp(w/2) = 1`, or the negated phases.
fn closing_increment(end: &FiberPoint, start: &FiberPoint) -> Vector {
    match (end, start) {
        (FiberPoint::Abelian(e), FiberPoint::Abelian(s)) => {
            Vector::from_iterator(e.len(), s.iter().zip(e).map(|(s, e)| s - e))
        }
        _ => {
            let q = end.unit_quaternion().expect("nonabelian fibers are quaternions");
            let s = start.unit_quaternion().expect("nonabelian fibers are quaternions");
            let rel = q.inverse() * s;
            let v = rel.scaled_axis();
            Vector::from_column_slice(v.as_slice())
        }
    }
}

/// The horizontal lift of `base` followed by a vertical segment back to the
/// starting fiber point, as one curve at scale `eps`.
pub fn closed_base_loop(b: &BundleModel, eps: f64, base: &BaseCurve, x0: &[f64], steps: usize) -> Result<TotalCurve> {
    let start = FiberPoint::identity(&b.group);
    let lift = horizontal_lift(b, base, start.clone(), steps)?;
    let w = closing_increment(lift.end_fiber(), &start);
    let m = b.dim_m();
    let path = base.concat(&BaseCurve::constant(x0));
    // On the second half the fiber moves by `w`, with zero speed at the seam.
    let d: PathFn = Arc::new(move |t| {
        if t <= 0.5 {
            Vector::zeros(m)
        } else {
            &w * (2.0 * eps * (1.0 - (2.0 * PI * (2.0 * t - 1.0)).cos()))
        }
    });
    Ok(TotalCurve::over_base(b, &path, d, steps + 1))
}

/// Loop transports at `(x0, identity)`, tagged with their lengths at `eps`.
pub fn fiber_loop_dictionary(b: &BundleModel, eps: f64, x0: &[f64], opts: &FiberOptions) -> Result<HolonomyDictionary> {
    let m = b.dim_m();
    let mut curves: Vec<TotalCurve> = Vec::new();
    let g = Arc::new(b.group.clone());
    let vertical = |lp: GroupLoop| -> TotalCurve {
        let g = g.clone();
        TotalCurve::vertical(b, x0, Arc::new(move |t| lp.body_velocity(&g, t) * eps), 65)
    };
    if m == 3 {
        for normal in fibonacci_sphere(opts.normals) {
            let normal = Vector::from_column_slice(&normal);
            for &r in &opts.vertical_radii {
                curves.push(vertical(GroupLoop::circle_with_normal(&normal, r)));
            }
        }
    } else {
        // Full turns around each circle factor.
        for axis in 0..m {
            let mut turn = Vector::zeros(m);
            turn[axis] = 2.0 * PI * eps;
            curves.push(TotalCurve::vertical(b, x0, Arc::new(move |_| turn.clone()), 65));
        }
    }
    for &r in &opts.base_radii {
        let mut center = x0.to_vec();
        center[0] -= r;
        let circle = BaseCurve::circle(&center, r);
        if circle.first_exit(b, 257).is_none() {
            curves.push(closed_base_loop(b, eps, &circle, x0, opts.steps)?);
        }
    }
    let samples: Vec<GroupElementSample> = curves
        .par_iter()
        .map(|c| {
            let p = parallel_transport(b, eps, c, opts.steps)?;
            GroupElementSample::new(p.matrix, c.g_length(opts.steps))
        })
        .collect::<Result<_>>()?;
    HolonomyDictionary::from_samples(samples, b.base_dim_n + m)
}

/// Samples `count` vectors of norm at most `radius` in the tangent space at
/// `(base_point, identity)` and measures their holonomic distances.
pub fn sample_fiber_metric(
    b: &BundleModel,
    eps: f64,
    base_point: &[f64],
    radius: f64,
    count: usize,
    opts: &FiberOptions,
) -> Result<FiberSample> {
    if count == 0 || count > MAX_FIBER_SAMPLES {
        return Err(WaneError::InvalidInput(format!("sample count must be in 1..={MAX_FIBER_SAMPLES}")));
    }
    let k = b.base_dim_n + b.dim_m();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut vectors = vec![Vector::zeros(k)];
    vectors.extend((1..count).map(|_| ball_sample(k, radius, &mut rng)));
    let mut dict = fiber_loop_dictionary(b, eps, base_point, opts)?;
    if opts.concatenate {
        dict = dict.with_products();
    }
    let d = pairwise(&vectors, |u, v| holonomic_distance(&dict, u, v));
    Ok(FiberSample { space: FiniteMetricSpace::from_dissimilarity(index_labels(count), d, 0)?, vectors })
}

/// Distances of the quotient model on the same sample vectors.
pub fn model_metric(model: &super::LimitFiberModel, vectors: &[Vector]) -> Result<FiniteMetricSpace> {
    let d = pairwise(vectors, |u, v| super::limit_fiber_distance(model, u, v));
    FiniteMetricSpace::from_dissimilarity(index_labels(vectors.len()), d, 0)
}

fn pairwise<F>(points: &[Vector], f: F) -> Mat
where
    F: Fn(&Vector, &Vector) -> f64 + Sync,
{
    let n = points.len();
    let upper: Vec<(usize, usize, f64)> = (0..n)
        .into_par_iter()
        .flat_map_iter(|i| {
            let f = &f;
            (i + 1..n).map(move |j| (i, j, f(&points[i], &points[j])))
        })
        .collect();
    let mut d = Mat::zeros(n, n);
    for (i, j, v) in upper {
        d[(i, j)] = v;
        d[(j, i)] = v;
    }
    d
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductOptions {
    pub seed: u64,
    pub steps: usize,
    /// Radius of the chart disc holding the sampled base points.
    pub chart_radius: f64,
    /// Bound on the sampled tangent vectors.
    pub vector_radius: f64,
    /// Sideways bends of the connecting segments, relative to their length.
    pub bends: Vec<f64>,
    pub gh: GhOptions,
}

impl Default for ProductOptions {
    fn default() -> Self {
        ProductOptions {
            seed: 0,
            steps: 256,
            chart_radius: 0.5,
            vector_radius: 1.0,
            bends: vec![-0.2, 0.0, 0.2],
            gh: GhOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductCheck {
    pub eps: f64,
    pub bound: f64,
    pub status: GhStatus,
    pub seed: u64,
}

struct TangentPoint {
    x: Vec<f64>,
    phase: Vec<f64>,
    u: Vector,
}

fn wrap(phase: f64) -> f64 {
    let p = phase.rem_euclid(2.0 * PI);
    if p > PI { p - 2.0 * PI } else { p }
}

fn connecting_bases(p: &[f64], q: &[f64], bends: &[f64]) -> Vec<BaseCurve> {
    let seg = BaseCurve::segment(p, q);
    let delta: Vec<f64> = q.iter().zip(p).map(|(a, b)| a - b).collect();
    let len = crate::linalg::norm(&delta);
    if len == 0.0 || delta.len() != 2 {
        return vec![seg];
    }
    let normal = [-delta[1] / len, delta[0] / len];
    bends.iter().map(|&h| seg.perturbed(h * len, &normal)).collect()
}

/// Pointed GH bound between tangent vectors over an abelian bundle at scale
/// `eps` and the product of the base tangent bundle with `ℝ^m`.
///
/// Both sides use the same competitor curves: bent chart segments between
/// sampled base points, lifted horizontally and corrected by a constant
/// vertical drift onto the target fiber point.
pub fn product_limit_check(b: &BundleModel, eps: f64, sample_count: usize, opts: &ProductOptions) -> Result<ProductCheck> {
    if !b.group.is_abelian() {
        return Err(WaneError::Unsupported { model: b.name.clone(), what: "product check needs an abelian group".into() });
    }
    if sample_count == 0 || sample_count > MAX_PRODUCT_SAMPLES {
        return Err(WaneError::InvalidInput(format!("sample count must be in 1..={MAX_PRODUCT_SAMPLES}")));
    }
    let (n, m) = (b.base_dim_n, b.dim_m());
    let x0: Vec<f64> = b.chart_domain.center().iter().copied().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut pts = vec![TangentPoint { x: x0.clone(), phase: vec![0.0; m], u: Vector::zeros(n + m) }];
    for _ in 1..sample_count {
        let off = ball_sample(n, opts.chart_radius, &mut rng);
        pts.push(TangentPoint {
            x: x0.iter().zip(off.iter()).map(|(c, o)| c + o).collect(),
            phase: (0..m).map(|_| rng.gen_range(-PI..PI)).collect(),
            u: ball_sample(n + m, opts.vector_radius, &mut rng),
        });
    }
    let pairs: Vec<(usize, usize)> = (0..sample_count).flat_map(|i| (i + 1..sample_count).map(move |j| (i, j))).collect();
    let costs: Vec<(f64, f64)> = pairs
        .par_iter()
        .map(|&(i, j)| -> Result<(f64, f64)> {
            let (p, q) = (&pts[i], &pts[j]);
            let uh_p = p.u.rows(0, n).into_owned();
            let uh_q = q.u.rows(0, n).into_owned();
            let vertical = (p.u.rows(n, m) - q.u.rows(n, m)).norm();
            let mut total = f64::INFINITY;
            let mut model = f64::INFINITY;
            for base in connecting_bases(&p.x, &q.x, &opts.bends) {
                let lift = horizontal_lift(b, &base, FiberPoint::Abelian(p.phase.clone()), opts.steps)?;
                let drift = lift.phase_change().expect("abelian lift");
                let correction: Vec<f64> =
                    (0..m).map(|a| wrap(q.phase[a] - p.phase[a] - drift[a]) * eps).collect();
                let c = Vector::from_vec(correction);
                let curve = TotalCurve::over_base(b, &base, Arc::new(move |_| c.clone()), opts.steps + 1)
                    .with_start_fiber(FiberPoint::Abelian(p.phase.clone()));
                let transport = parallel_transport(b, eps, &curve, opts.steps)?;
                let len = curve.g_length(opts.steps);
                total = total.min((len * len + (&q.u - transport.matrix * &p.u).norm_squared()).sqrt());
                let base_len = base.length(b, opts.steps);
                let pb = base_transport(b, &base, opts.steps);
                let dt = (base_len * base_len + (&uh_q - pb * &uh_p).norm_squared()).sqrt();
                model = model.min((dt * dt + vertical * vertical).sqrt());
            }
            Ok((total, model))
        })
        .collect::<Result<_>>()?;
    let mut dx = Mat::zeros(sample_count, sample_count);
    let mut dy = Mat::zeros(sample_count, sample_count);
    for (&(i, j), &(t, mdl)) in pairs.iter().zip(&costs) {
        dx[(i, j)] = t;
        dx[(j, i)] = t;
        dy[(i, j)] = mdl;
        dy[(j, i)] = mdl;
    }
    let labels = index_labels(sample_count);
    let x = FiniteMetricSpace::from_dissimilarity(labels.clone(), dx, 0)?;
    let y = FiniteMetricSpace::from_dissimilarity(labels, dy, 0)?;
    let mut gh = opts.gh.clone();
    gh.pointed = true;
    if gh.initial.is_none() {
        gh.initial = Some((0..sample_count).map(|i| (i, i)).collect());
    }
    let res = gh_upper_bound(&x, &y, &gh)?;
    Ok(ProductCheck { eps, bound: res.bound, status: res.status, seed: opts.seed })
}

/// [`product_limit_check`] on the Hopf bundle, whose total space at scale ε
/// is a Berger sphere.
pub fn berger_product_check(eps: f64, sample_count: usize, opts: &ProductOptions) -> Result<ProductCheck> {
    let hopf = crate::bundle_models::make_builtin_bundle(crate::bundle_models::BuiltinBundle::Hopf);
    product_limit_check(&hopf, eps, sample_count, opts)
}
