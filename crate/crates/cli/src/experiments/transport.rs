use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;
use wanelab::bundle_models::{BaseCurve, BundleModel, TotalCurve};
use wanelab::collapse_lab::{
    collapse_transport_limit, estimate_wane_group, lift_loop, projected_solution_gap, projection_test_family,
    shrink_loop_holonomy, so4_test_basis, verify_parallel_uniqueness, vertical_loop_family, CollapseSchedule,
    Growth, LiftRule, SlopeFit, UniquenessOptions, WaneGroupEstimate, WaneOptions,
};
use wanelab::error::Result;
use wanelab::lie_models::{group_holonomy_sample, GroupLoop};
use wanelab::linalg::{Mat, Vector};
use wanelab::orbit::{covering_radius, orbit};
use wanelab::transport_engine::block_decompose;

use super::{Chart, Outcome, Row, Verdict};
use crate::config::ExperimentConfig;

const WANE_LOOP_BUDGET: usize = 100;
const REFERENCE_LOOPS: usize = 300;
const UNIQUENESS_TRIALS: usize = 6;
const GAP_SIZES: [usize; 4] = [4, 16, 64, 256];

pub(super) fn collapse_limit(cfg: &ExperimentConfig, b: &BundleModel, sched: &CollapseSchedule) -> Result<Outcome> {
    let chart = Chart::of(b)?;
    let lp = BaseCurve::circle(&chart.offset(0.3, 0.1), 0.5 * chart.scale);
    let out = collapse_transport_limit(b, &lp, &LiftRule::Horizontal, sched, cfg.steps)?;
    let rows = out
        .limits
        .iter()
        .enumerate()
        .map(|(i, p)| Row {
            eps: out.eps[i],
            coupling_norm: Some(out.coupling_decay[i]),
            hh_ortho_residual: Some(block_decompose(p).hh_dist_to_orthogonal),
            extra: vec![p.ortho_residual],
        })
        .collect();
    let (slope, slope_ok) = match out.slope {
        SlopeFit::Fitted(s) => (s, (cfg.tol("slope_min")..=cfg.tol("slope_max")).contains(&s)),
        SlopeFit::ExactZero => (0.0, true),
    };
    Ok(Outcome {
        verdict: Verdict::grade(&[slope_ok, out.hh_gap < cfg.tol("hh_gap")]),
        key_metric: "slope",
        key_value: slope,
        extra_columns: vec!["pre_polar_residual"],
        rows,
        details: json!({
            "slope": out.slope,
            "hh_gap": out.hh_gap,
            "hh_ortho_residual": out.hh_ortho_residual,
            "base_transport": rows_of(&out.base_transport),
            "final_transport": out.limits.last().map(|p| p.to_rows()),
        }),
    })
}

fn rows_of(m: &Mat) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// Horizontal lifts of shrinking base circles for abelian groups, compared
/// with the identity; shrinking vertical loops otherwise, compared with a
/// sample of loop holonomies in the group.
pub(super) fn shrink_holonomy(cfg: &ExperimentConfig, b: &BundleModel, sched: &CollapseSchedule) -> Result<Outcome> {
    let chart = Chart::of(b)?;
    let m = b.dim_m();
    let (family, reference, kind): (Vec<TotalCurve>, Vec<Mat>, &str) = if b.group.is_abelian() {
        let family = (0..sched.len())
            .map(|i| {
                let r = 0.4 * chart.scale * 0.5f64.powf(i as f64 / 2.0);
                let mut c = chart.center.clone();
                c[0] -= r;
                lift_loop(b, &BaseCurve::circle(&c, r), &LiftRule::Horizontal, sched.eps_list()[i])
            })
            .collect::<Result<_>>()?;
        (family, vec![Mat::identity(m, m)], "base_circles")
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let own = GroupLoop::random(m, 2, 0.4, &mut rng);
        let mut loops: Vec<GroupLoop> = (0..REFERENCE_LOOPS).map(|_| GroupLoop::random(m, 2, 0.4, &mut rng)).collect();
        loops.push(own.clone());
        let reference = group_holonomy_sample(&b.group, &loops, 256)?.into_iter().map(|s| s.matrix).collect();
        (vertical_loop_family(b, &chart.center, &own, sched), reference, "vertical_loops")
    };
    let out = shrink_loop_holonomy(b, &family, sched, cfg.steps, &reference)?;
    let rows = out
        .transports
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let s = block_decompose(p);
            Row {
                eps: sched.eps_list()[i],
                coupling_norm: Some(s.coupling_norm),
                hh_ortho_residual: Some(s.hh_dist_to_orthogonal),
                extra: vec![out.lengths[i], out.distances[i]],
            }
        })
        .collect();
    let shrinking = out.distances.len() < 2 || out.final_distance < out.distances[0];
    Ok(Outcome {
        verdict: Verdict::grade(&[shrinking, out.final_distance < cfg.tol("final_distance")]),
        key_metric: "final_distance",
        key_value: out.final_distance,
        extra_columns: vec!["length", "distance"],
        rows,
        details: json!({ "family": kind, "reference_size": reference.len(), "distances": out.distances }),
    })
}

fn wane_options(cfg: &ExperimentConfig) -> WaneOptions {
    WaneOptions { seed: cfg.seed, steps: cfg.steps, ..WaneOptions::default() }
}

/// Covering radius on the unit sphere of the orbit of `e₁` under the
/// vertical blocks of the generators, for three-dimensional groups.
pub(crate) fn vertical_orbit_density(w: &WaneGroupEstimate, n: usize) -> Option<f64> {
    let blocks = w.vertical_blocks(n);
    if blocks.first().map(|h| h.nrows()) != Some(3) {
        return None;
    }
    let pts = orbit(&blocks, &Vector::from_column_slice(&[1.0, 0.0, 0.0]), 10, 0.02, 40_000);
    let pts: Vec<[f64; 3]> = pts.iter().map(|p| [p[0], p[1], p[2]]).collect();
    Some(covering_radius(&pts, 1.0, 2000))
}

pub(super) fn wane_group(cfg: &ExperimentConfig, b: &BundleModel, sched: &CollapseSchedule) -> Result<Outcome> {
    let chart = Chart::of(b)?;
    let w = estimate_wane_group(b, &chart.center, sched, WANE_LOOP_BUDGET, &wane_options(cfg))?;
    let id = Mat::identity(w.k, w.k);
    let rows = w
        .generators
        .iter()
        .zip(&w.residual_lengths)
        .map(|(g, &len)| Row {
            eps: sched.last(),
            coupling_norm: None,
            hh_ortho_residual: None,
            extra: vec![len, wanelab::linalg::operator_norm(&(g - &id))],
        })
        .collect();
    let max_dist = w.max_distance_to_identity();
    let density = if b.group.is_abelian() { None } else { vertical_orbit_density(&w, b.base_dim_n) };
    let (verdict, key_metric, key_value) = match density {
        Some(d) => (Verdict::grade(&[d < cfg.tol("density")]), "covering_radius", d),
        None => (Verdict::grade(&[max_dist < cfg.tol("identity")]), "max_distance_to_identity", max_dist),
    };
    Ok(Outcome {
        verdict,
        key_metric,
        key_value,
        extra_columns: vec!["residual_length", "distance_to_identity"],
        rows,
        details: json!({
            "generators": w.generators.len(),
            "max_distance_to_identity": max_dist,
            "covering_radius": density,
        }),
    })
}

pub(super) fn uniqueness(cfg: &ExperimentConfig, b: &BundleModel, sched: &CollapseSchedule) -> Result<Outcome> {
    let chart = Chart::of(b)?;
    let (c, ax, ay) = (chart.center.clone(), 0.2 * chart.scale, 0.3 * chart.scale);
    let c2 = c.clone();
    let arc = BaseCurve::new(
        move |t| {
            let mut x = Vector::from_column_slice(&c);
            x[0] += ax * (PI * t).cos();
            x[1] += ay * (PI * t).sin();
            x
        },
        move |t| {
            let mut v = Vector::zeros(c2.len());
            v[0] = -ax * PI * (PI * t).sin();
            v[1] = ay * PI * (PI * t).cos();
            v
        },
    );
    let w = estimate_wane_group(b, &chart.offset(0.2, 0.0), sched, WANE_LOOP_BUDGET, &wane_options(cfg))?;
    let (n, m) = (b.base_dim_n, b.dim_m());
    let mut c0 = vec![0.0; n];
    c0[0] = 0.6;
    c0[1] = 0.8;
    let mut lambda0 = vec![0.0; m];
    if m == 1 {
        lambda0[0] = 1.0;
    } else {
        lambda0[m - 2] = 0.6;
        lambda0[m - 1] = 0.8;
    }
    let opts = UniquenessOptions { seed: cfg.seed, steps: cfg.steps, ..UniquenessOptions::default() };
    let out = verify_parallel_uniqueness(b, &arc, &c0, &lambda0, sched, UNIQUENESS_TRIALS, &w, &opts)?;
    let rows = out
        .eps
        .iter()
        .zip(&out.spreads)
        .map(|(&eps, &s)| Row { eps, coupling_norm: None, hh_ortho_residual: None, extra: vec![s] })
        .collect();
    let monotone = out.spreads.windows(2).all(|p| p[1] <= p[0]);
    Ok(Outcome {
        verdict: Verdict::grade(&[monotone, out.final_spread < cfg.tol("final_spread")]),
        key_metric: "final_spread",
        key_value: out.final_spread,
        extra_columns: vec!["spread"],
        rows,
        details: json!({ "monotone": monotone, "wane_generators": w.generators.len(), "trials": UNIQUENESS_TRIALS }),
    })
}

/// The model name is not used: the families live in so(4). The `eps`
/// column holds `1/n`.
pub(super) fn paramdepd_gap(cfg: &ExperimentConfig) -> Result<Outcome> {
    let basis = so4_test_basis();
    let gaps = |growth| {
        let family: Vec<_> = GAP_SIZES.iter().map(|&n| projection_test_family(n, growth)).collect();
        projected_solution_gap(&family, &basis, cfg.steps)
    };
    let (bounded, unbounded) = (gaps(Growth::Bounded)?, gaps(Growth::Unbounded)?);
    let rows = GAP_SIZES
        .iter()
        .enumerate()
        .map(|(i, &n)| Row {
            eps: 1.0 / n as f64,
            coupling_norm: None,
            hh_ortho_residual: None,
            extra: vec![n as f64, bounded[i], unbounded[i]],
        })
        .collect();
    let decreasing = |g: &[f64]| g.windows(2).all(|p| p[1] < p[0]);
    let last = bounded[3].max(unbounded[3]);
    Ok(Outcome {
        verdict: Verdict::grade(&[decreasing(&bounded) && decreasing(&unbounded), last < cfg.tol("final_gap")]),
        key_metric: "final_gap",
        key_value: last,
        extra_columns: vec!["n", "gap_bounded", "gap_unbounded"],
        rows,
        details: json!({ "n": GAP_SIZES, "bounded": bounded, "unbounded": unbounded }),
    })
}
