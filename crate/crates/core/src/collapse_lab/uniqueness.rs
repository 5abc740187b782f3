use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, UnitSphere};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{CollapseSchedule, WaneGroupEstimate};
use crate::bundle_models::{BaseCurve, BundleModel, TotalCurve};
use crate::error::{Result, WaneError};
use crate::linalg::{PathFn, Vector};
use crate::orbit::OrbitClosure;
use crate::transport_engine::parallel_transport;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniquenessOptions {
    pub seed: u64,
    pub steps: usize,
    /// Word length bound for the candidate points of the quotient.
    pub depth: usize,
    pub dedupe: f64,
    /// At most this many generators enter the quotient words.
    pub max_generators: usize,
    pub orbit_cap: usize,
    /// Size of the perturbations, before multiplication by ε.
    pub perturbation: f64,
}

impl Default for UniquenessOptions {
    fn default() -> Self {
        UniquenessOptions {
            seed: 0,
            steps: 512,
            depth: 6,
            dedupe: 0.02,
            max_generators: 24,
            orbit_cap: 60_000,
            perturbation: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniquenessReport {
    pub eps: Vec<f64>,
    /// Largest pairwise quotient distance of endpoint data at each ε.
    pub spreads: Vec<f64>,
    pub final_spread: f64,
}

/// A transported initial vector along one lift.
struct Trial {
    curve_at: Box<dyn Fn(f64) -> TotalCurve + Send + Sync>,
    initial: Vector,
}

fn random_unit(dim: usize, rng: &mut ChaCha8Rng) -> Vector {
    if dim == 1 {
        return Vector::from_element(1, 1.0);
    }
    if dim == 3 {
        let u: [f64; 3] = UnitSphere.sample(rng);
        return Vector::from_column_slice(&u);
    }
    let v = Vector::from_fn(dim, |_, _| rand_distr::StandardNormal.sample(rng));
    v.normalize()
}

/// Transports the initial vector `(c₀, λ₀)` along several lifts of
/// `base_curve` that agree in the limit and reports how far the endpoints
/// stay apart modulo the estimated wane group.
///
/// Trial 0 is the horizontal lift. The others perturb it by a vertical
/// excursion `ε·κ·sin(πt)·v`, by a base bump of height `ε·κ`, by both, or
/// start from a generator image of the initial vector.
pub fn verify_parallel_uniqueness(
    b: &BundleModel,
    base_curve: &BaseCurve,
    c0: &[f64],
    lambda0: &[f64],
    sched: &CollapseSchedule,
    trials: usize,
    wane: &WaneGroupEstimate,
    opts: &UniquenessOptions,
) -> Result<UniquenessReport> {
    let (n, m) = (b.base_dim_n, b.dim_m());
    if c0.len() != n || lambda0.len() != m {
        return Err(WaneError::InvalidInput(format!("initial data needs {n} + {m} components")));
    }
    if trials < 2 {
        return Err(WaneError::InvalidInput("uniqueness needs at least two trials".into()));
    }
    if wane.k != n + m {
        return Err(WaneError::InvalidInput("wane estimate acts on the wrong dimension".into()));
    }
    if let Some(t) = base_curve.first_exit(b, 257) {
        return Err(WaneError::ChartExit { t });
    }
    let initial = Vector::from_iterator(n + m, c0.iter().chain(lambda0).copied());
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let kappa = opts.perturbation;
    let mut list = Vec::with_capacity(trials);
    for j in 0..trials {
        let v = random_unit(m, &mut rng);
        let dir = random_unit(n, &mut rng);
        let (vertical, bump, rotate) = match j % 4 {
            0 => (j > 0, j > 0, false),
            1 => (true, false, false),
            2 => (false, true, false),
            _ => (false, false, !wane.generators.is_empty()),
        };
        let start = if rotate {
            &wane.generators[(j / 4) % wane.generators.len()] * &initial
        } else {
            initial.clone()
        };
        let (model, base) = (b.clone(), base_curve.clone());
        let curve_at = move |eps: f64| {
            let base = if bump { base.perturbed(eps * kappa, dir.as_slice()) } else { base.clone() };
            let d: PathFn = if vertical {
                let v = v.clone() * (eps * kappa);
                Arc::new(move |t| &v * (std::f64::consts::PI * t).sin())
            } else {
                Arc::new(move |_| Vector::zeros(m))
            };
            TotalCurve::over_base(&model, &base, d, 65)
        };
        list.push(Trial { curve_at: Box::new(curve_at), initial: start });
    }
    let len = wane.generators.len();
    // Generators come in (inverse, element) pairs, so keep an even prefix.
    let gens = &wane.generators[..if len <= opts.max_generators { len } else { opts.max_generators & !1 }];
    let closure = OrbitClosure::new(gens, wane.tol, opts.depth, opts.dedupe, opts.orbit_cap);
    let spreads: Vec<f64> = sched
        .eps_list()
        .par_iter()
        .map(|&eps| -> Result<f64> {
            let ends: Vec<Vector> = list
                .iter()
                .map(|tr| {
                    let curve = (tr.curve_at)(eps);
                    curve.check_in_chart(b)?;
                    Ok(parallel_transport(b, eps, &curve, opts.steps)?.matrix * &tr.initial)
                })
                .collect::<Result<_>>()?;
            let orbits: Vec<Vec<Vector>> = ends.iter().map(|u| closure.orbit(u)).collect();
            let mut spread: f64 = 0.0;
            for i in 0..ends.len() {
                for j in i + 1..ends.len() {
                    let d = closure
                        .distance_from_orbit(&orbits[j], &ends[i])
                        .min(closure.distance_from_orbit(&orbits[i], &ends[j]));
                    spread = spread.max(d);
                }
            }
            Ok(spread)
        })
        .collect::<Result<_>>()?;
    Ok(UniquenessReport {
        eps: sched.eps_list().to_vec(),
        final_spread: *spreads.last().unwrap(),
        spreads,
    })
}
