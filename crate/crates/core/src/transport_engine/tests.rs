use std::f64::consts::PI;
use std::sync::Arc;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::bundle_models::{make_builtin_bundle, BuiltinBundle};
use crate::linalg::{block_diag, skew_residual};

fn builtin(which: BuiltinBundle) -> BundleModel {
    make_builtin_bundle(which)
}

fn zero_d(m: usize) -> PathFn {
    Arc::new(move |_| Vector::zeros(m))
}

/// The transport generator in an orthonormal frame of the total space, written
/// from scaled tensors `Ω_ε = εΩ` and `C_ε = C/ε`.
fn substitution_oracle(b: &BundleModel, eps: f64, x: &[f64], a: &[f64], d: &[f64]) -> Mat {
    let (n, m) = (b.base_dim_n, b.dim_m());
    let gamma = b.christoffel(x);
    let om = b.curvature(x);
    let om_eps = |s: usize, i: usize, j: usize| eps * om.get(s, i, j);
    let c_eps = |i: usize, j: usize, k: usize| b.group.connection(i, j, k) / eps;
    let alpha_om = |s: usize, j: usize| -> f64 { (0..n).map(|i| a[i] * om_eps(s, i, j)).sum() };
    let mut q = Mat::zeros(n + m, n + m);
    for row in 0..n + m {
        for col in 0..n + m {
            q[(row, col)] = match (row < n, col < n) {
                (true, true) => {
                    let g: f64 = (0..n).map(|i| a[i] * gamma.get(i, col, row)).sum();
                    let o: f64 = (0..m).map(|s| d[s] * om_eps(s, col, row)).sum();
                    o - g
                }
                (true, false) => alpha_om(col - n, row),
                (false, true) => -alpha_om(row - n, col),
                (false, false) => -(0..m).map(|i| d[i] * c_eps(i, col - n, row - n)).sum::<f64>(),
            };
        }
    }
    q
}

#[test]
fn flat_generator_vanishes() {
    let b = builtin(BuiltinBundle::FlatTorusBundle);
    let q = assemble_q_at(&b, 0.3, &[0.1, 0.2], &[1.0, -2.0], &[0.7], &FiberPoint::identity(&b.group));
    assert_eq!(q.amax(), 0.0);
}

#[test]
fn eps_scaling_of_blocks() {
    let b = builtin(BuiltinBundle::TrivialSu2);
    let (x, a, d) = ([0.3, -0.4], [0.5, 1.2], [0.2, -0.7, 0.4]);
    let f = FiberPoint::identity(&b.group);
    let q1 = Blocks::split(&assemble_q_at(&b, 0.2, &x, &a, &d, &f), 2);
    let q2 = Blocks::split(&assemble_q_at(&b, 0.4, &x, &a, &d, &f), 2);
    assert!((&q2.hv - &q1.hv * 2.0).amax() < 1e-15);
    assert!((&q2.vh - &q1.vh * 2.0).amax() < 1e-15);
    assert!((&q2.vv - &q1.vv * 0.5).amax() < 1e-15);
}

#[test]
fn chern_coupling_block() {
    let b = builtin(BuiltinBundle::ChernTorus(1));
    let grid = 9;
    let base = BaseCurve::segment(&[0.0, 0.1], &[0.5, 0.1]);
    let curve = TotalCurve::over_base(&b, &base, zero_d(1), grid);
    let q = assemble_q(&b, 0.1, &curve, 0.3).unwrap();
    let vh = Blocks::split(&q, 2).vh;
    // Velocity 0.5 along ξ₁.
    assert!((vh[(0, 0)]).abs() < 1e-15);
    assert!((vh[(0, 1)] + 0.05).abs() < 1e-15);
    let unit = assemble_q_at(&b, 0.1, &[0.2, 0.1], &[1.0, 0.0], &[0.0], &FiberPoint::identity(&b.group));
    let vh = Blocks::split(&unit, 2).vh;
    assert!((vh[(0, 1)] + 0.1).abs() < 1e-15);
    let oracle = substitution_oracle(&b, 0.1, &[0.2, 0.1], &[1.0, 0.0], &[0.0]);
    assert!((unit - oracle).amax() < 1e-12);
}

#[test]
fn substitution_oracle_agrees_on_all_models() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for which in [BuiltinBundle::Hopf, BuiltinBundle::ChernTorus(3), BuiltinBundle::TrivialSu2] {
        let b = builtin(which);
        for _ in 0..50 {
            let x = [rng.gen_range(-0.2..0.6), rng.gen_range(-0.2..0.6)];
            let a = [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
            let d: Vec<f64> = (0..b.dim_m()).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let eps = 2f64.powf(-rng.gen_range(0.0..12.0));
            let ours = assemble_q_at(&b, eps, &x, &a, &d, &FiberPoint::identity(&b.group));
            let oracle = substitution_oracle(&b, eps, &x, &a, &d);
            assert!((&ours - &oracle).amax() <= 1e-12 * oracle.amax().max(1.0));
        }
    }
}

#[test]
fn connection_term_is_minus_q_times_field() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let b = builtin(BuiltinBundle::TrivialSu2);
    for _ in 0..20 {
        let x = [rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)];
        let a = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        let d: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let field = Vector::from_fn(5, |_, _| rng.gen_range(-1.0..1.0));
        let axis = Vector::from_fn(3, |_, _| rng.gen_range(-1.0..1.0)).normalize();
        let q = nalgebra::UnitQuaternion::from_axis_angle(
            &nalgebra::Unit::new_normalize(nalgebra::Vector3::new(axis[0], axis[1], axis[2])),
            rng.gen_range(0.0..3.0),
        );
        let fiber = FiberPoint::Quaternion([q.w, q.i, q.j, q.k]);
        let eps = rng.gen_range(0.01..1.0);
        let term = b.connection_term(eps, &x, &a, &d, &fiber, &field);
        let q = assemble_q_at(&b, eps, &x, &a, &d, &fiber);
        assert!((term + q * field).amax() < 1e-12);
    }
}

#[test]
fn constant_curve_transport_is_identity() {
    let b = builtin(BuiltinBundle::TrivialSu2);
    let curve = TotalCurve::constant(&b, &[0.2, 0.3], 2);
    let p = parallel_transport(&b, 0.5, &curve, 64).unwrap();
    assert!((p.matrix - Mat::identity(5, 5)).amax() < 1e-15);
}

#[test]
fn flat_loop_transport_is_identity() {
    let b = builtin(BuiltinBundle::FlatTorusBundle);
    let d: PathFn = Arc::new(|t| Vector::from_element(1, (2.0 * PI * t).sin()));
    let curve = TotalCurve::over_base(&b, &BaseCurve::circle(&[0.2, 0.2], 0.3), d, 2);
    let p = parallel_transport(&b, 0.01, &curve, 256).unwrap();
    assert!((p.matrix - Mat::identity(3, 3)).amax() < 1e-10);
}

/// `−∫∫ dA` over a chart disc for the Hopf trivialisation.
fn hopf_disc_phase(c: [f64; 2], r: f64) -> f64 {
    let (nr, nt) = (400, 400);
    let mut total = 0.0;
    for i in 0..nr {
        let rho = r * (i as f64 + 0.5) / nr as f64;
        for j in 0..nt {
            let th = 2.0 * PI * (j as f64 + 0.5) / nt as f64;
            let (x, y) = (c[0] + rho * th.cos(), c[1] + rho * th.sin());
            total += 2.0 / (1.0 + x * x + y * y).powi(2) * rho;
        }
    }
    -total * (r / nr as f64) * (2.0 * PI / nt as f64)
}

#[test]
fn hopf_lift_transport_refines_and_carries_stokes_phase() {
    let b = builtin(BuiltinBundle::Hopf);
    let (c, r) = ([0.3, -0.2], 0.1);
    let curve = TotalCurve::over_base(&b, &BaseCurve::circle(&c, r), zero_d(1), 2);
    let start = FiberPoint::identity(&b.group);
    let (coarse, end) = parallel_transport_interval(&b, 1.0, &curve, 0.0, 1.0, 256, &start).unwrap();
    let fine = parallel_transport(&b, 1.0, &curve, 2560).unwrap();
    assert!((coarse.matrix - fine.matrix).amax() < 1e-7);
    let phase = end.phases().unwrap()[0];
    let oracle = hopf_disc_phase(c, r);
    assert!(((phase - oracle) / oracle).abs() < 1e-4, "{phase} vs {oracle}");
}

#[test]
fn block_decomposition_basics() {
    let id = TransportMatrix::identity(2, 3);
    let s = block_decompose(&id);
    assert_eq!(s.coupling_norm, 0.0);
    assert_eq!(s.hh_dist_to_orthogonal, 0.0);
    let r = crate::linalg::expm(&Mat::from_row_slice(2, 2, &[0.0, -0.3, 0.3, 0.0]));
    let q = crate::lie_models::matrix_exponential(
        &crate::lie_models::make_builtin_group(crate::lie_models::GroupKind::So3),
        &[0.1, 0.5, -0.2],
    );
    let p = TransportMatrix { matrix: block_diag(&r, &q), n: 2, ortho_residual: 0.0 };
    let s = block_decompose(&p);
    assert_eq!(s.coupling_norm, 0.0);
    assert!(s.hh_dist_to_orthogonal < 1e-14);
    assert_eq!(s.vv, q);
    assert_eq!(p.blocks().assemble(), p.matrix);
}

#[test]
fn hopf_coupling_is_small_at_small_eps() {
    let b = builtin(BuiltinBundle::Hopf);
    let eps = 2f64.powi(-8);
    let curve = TotalCurve::over_base(&b, &BaseCurve::circle(&[0.3, 0.1], 0.4), zero_d(1), 2);
    let p = parallel_transport(&b, eps, &curve, 1024).unwrap();
    assert!(block_decompose(&p).coupling_norm < 10.0 * eps);
}

#[test]
fn stability_trivial_cases() {
    let hopf = builtin(BuiltinBundle::Hopf);
    let base = BaseCurve::circle(&[0.25, 0.25], 0.3);
    assert_eq!(transport_stability_under_c1(&hopf, 0.5, &base, zero_d(1), 0.0, 256).unwrap(), 0.0);
    let flat = builtin(BuiltinBundle::FlatTorusBundle);
    let d: PathFn = Arc::new(|t| Vector::from_element(1, t));
    let v = transport_stability_under_c1(&flat, 0.5, &base, d, 0.1, 256).unwrap();
    assert!(v < 1e-10);
}

#[test]
fn stability_scales_linearly() {
    let b = builtin(BuiltinBundle::Hopf);
    let base = BaseCurve::circle(&[0.2, 0.0], 0.3);
    let d: PathFn = Arc::new(|t| Vector::from_element(1, 0.3 * (2.0 * PI * t).sin()));
    let k: Vec<f64> = [1e-2, 1e-3, 1e-4]
        .iter()
        .map(|&h| transport_stability_under_c1(&b, 0.5, &base, d.clone(), h, 1024).unwrap() / h)
        .collect();
    assert!(k[0] > 0.0);
    for w in k.windows(2) {
        let ratio = w[1] / w[0];
        assert!((0.5..2.0).contains(&ratio), "constants {k:?}");
    }
}

#[test]
fn stability_rejects_chart_exit() {
    let b = builtin(BuiltinBundle::ChernTorus(1));
    let base = BaseCurve::segment(&[0.0, 0.0], &[0.7, 0.0]);
    assert!(matches!(
        transport_stability_under_c1(&b, 1.0, &base, zero_d(1), 0.8, 64),
        Err(WaneError::ChartExit { .. })
    ));
}

#[test]
fn composition_over_halves() {
    for which in [BuiltinBundle::Hopf, BuiltinBundle::TrivialSu2] {
        let b = builtin(which);
        let m = b.dim_m();
        let d: PathFn = Arc::new(move |t| Vector::from_fn(m, |i, _| (t * (i + 2) as f64).sin()));
        let curve = TotalCurve::over_base(&b, &BaseCurve::circle(&[0.1, 0.2], 0.3), d, 2);
        let start = curve.start_fiber.clone();
        let eps = 0.3;
        let whole = parallel_transport(&b, eps, &curve, 1024).unwrap();
        let (first, mid) = parallel_transport_interval(&b, eps, &curve, 0.0, 0.5, 512, &start).unwrap();
        let (second, _) = parallel_transport_interval(&b, eps, &curve, 0.5, 1.0, 512, &mid).unwrap();
        let composed = second.matrix * first.matrix;
        assert!((composed - whole.matrix).amax() < 1e-7, "{which}");
    }
}

#[test]
fn step_guards() {
    let b = builtin(BuiltinBundle::TrivialSu2);
    let d: PathFn = Arc::new(|_| Vector::from_column_slice(&[1.0, 0.5, 0.0]));
    let curve = TotalCurve::vertical(&b, &[0.0, 0.0], d, 2);
    assert!(matches!(parallel_transport(&b, 1e-3, &curve, 32), Err(WaneError::StepTooLarge { .. })));
    // Overflow to non-finite entries must be caught as well.
    assert!(matches!(parallel_transport(&b, 1e-150, &curve, 32), Err(WaneError::StepTooLarge { .. })));
    assert!(matches!(parallel_transport(&b, 1.0, &curve, 16), Err(WaneError::InvalidInput(_))));
}

#[test]
fn nonabelian_transport_tracks_fiber() {
    // Over a curved base loop the fiber point moves, and Q must follow it.
    let b = builtin(BuiltinBundle::TrivialSu2);
    let curve = TotalCurve::over_base(&b, &BaseCurve::circle(&[0.3, 0.0], 0.4), zero_d(3), 2);
    let moving = parallel_transport(&b, 1.0, &curve, 1024).unwrap();
    let frozen = crate::linalg::rk4_matrix(
        |t| {
            let x = curve.base(t);
            assemble_q_at(&b, 1.0, x.as_slice(), curve.a(t).as_slice(), &[0.0; 3], &curve.start_fiber)
        },
        5,
        0.0,
        1.0,
        1024,
    );
    assert!((moving.matrix - frozen).amax() > 1e-4);
    let via_q = assemble_q(&b, 1.0, &curve, 0.6).unwrap();
    assert!(skew_residual(&via_q) < 1e-12);
}

proptest! {
    #[test]
    fn generator_is_skew(
        which in 0usize..4,
        u in 0.05f64..0.95, v in 0.05f64..0.95,
        a0 in -3.0f64..3.0, a1 in -3.0f64..3.0,
        d in proptest::collection::vec(-3.0f64..3.0, 3),
        log_eps in -12.0f64..2.0,
        angle in 0.0f64..6.0,
    ) {
        let b = [BuiltinBundle::FlatTorusBundle, BuiltinBundle::Hopf, BuiltinBundle::ChernTorus(-2), BuiltinBundle::TrivialSu2]
            .map(builtin)[which].clone();
        let x: Vec<f64> = b.chart_domain.lo.iter().zip(&b.chart_domain.hi)
            .zip([u, v]).map(|((lo, hi), s)| lo + s * (hi - lo)).collect();
        let fiber = if b.group.is_abelian() {
            FiberPoint::identity(&b.group)
        } else {
            let h = 0.5 * angle;
            FiberPoint::Quaternion([h.cos(), 0.6 * h.sin(), 0.0, 0.8 * h.sin()])
        };
        let q = assemble_q_at(&b, 2f64.powf(log_eps), &x, &[a0, a1], &d[..b.dim_m()], &fiber);
        prop_assert!(skew_residual(&q) < 1e-12);
    }
}
