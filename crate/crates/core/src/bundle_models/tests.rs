use std::f64::consts::PI;
use std::sync::Arc;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::linalg::{PathFn, Vector};

fn all_builtins() -> Vec<BundleModel> {
    [
        BuiltinBundle::FlatTorusBundle,
        BuiltinBundle::Hopf,
        BuiltinBundle::ChernTorus(3),
        BuiltinBundle::TrivialSu2,
    ]
    .into_iter()
    .map(make_builtin_bundle)
    .collect()
}

fn interior_point(b: &BundleModel, rng: &mut impl Rng) -> Vec<f64> {
    b.chart_domain
        .lo
        .iter()
        .zip(&b.chart_domain.hi)
        .map(|(lo, hi)| {
            let pad = 0.1 * (hi - lo);
            rng.gen_range(lo + pad..hi - pad)
        })
        .collect()
}

#[test]
fn names_round_trip() {
    for b in all_builtins() {
        let again = bundle_by_name(&b.name).unwrap();
        assert_eq!(again, b);
    }
    assert!(matches!(bundle_by_name("klein"), Err(WaneError::UnknownModel(_))));
    assert!(bundle_by_name("chern_torus:0").is_err());
}

#[test]
fn flat_bundle_has_no_curvature() {
    let b = make_builtin_bundle(BuiltinBundle::FlatTorusBundle);
    let om = b.curvature(&[0.1, 0.3]);
    assert!((0..2).all(|i| (0..2).all(|j| om.get(0, i, j) == 0.0)));
}

#[test]
fn chern_curvature_entries() {
    let b = make_builtin_bundle(BuiltinBundle::ChernTorus(3));
    let om = b.curvature(&[0.2, 0.1]);
    assert_eq!(om.get(0, 0, 1), 3.0);
    assert_eq!(om.get(0, 1, 0), -3.0);
}

#[test]
fn frame_is_orthonormal() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for b in all_builtins() {
        for _ in 0..20 {
            let x = interior_point(&b, &mut rng);
            let gram = b.frame_metric_check(&x);
            assert!((gram - Mat::identity(2, 2)).amax() < 1e-9);
        }
    }
}

/// Koszul formula in the orthonormal frame with brackets of the coordinate
/// fields `ξ_i = λ⁻¹∂_i` taken by central differences.
fn koszul_christoffel(b: &BundleModel, x: &[f64]) -> Christoffel {
    let n = b.base_dim_n;
    let h = 1e-5;
    let field = |i: usize, p: &[f64]| -> Vector {
        let mut v = Vector::zeros(n);
        v[i] = 1.0 / b.frame_scale(p);
        v
    };
    let deriv = |i: usize, along: &Vector| -> Vector {
        let xp: Vec<f64> = x.iter().zip(along.iter()).map(|(a, d)| a + h * d).collect();
        let xm: Vec<f64> = x.iter().zip(along.iter()).map(|(a, d)| a - h * d).collect();
        (field(i, &xp) - field(i, &xm)) / (2.0 * h)
    };
    let lambda2 = b.frame_scale(x).powi(2);
    let inner = |u: &Vector, v: &Vector| lambda2 * u.dot(v);
    let bracket = |i: usize, j: usize| deriv(j, &field(i, x)) - deriv(i, &field(j, x));
    let mut g = Christoffel::zeros(n);
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let v = 0.5
                    * (inner(&bracket(i, j), &field(k, x)) - inner(&bracket(j, k), &field(i, x))
                        + inner(&bracket(k, i), &field(j, x)));
                g.set(i, j, k, v);
            }
        }
    }
    g
}

#[test]
fn hopf_christoffel_matches_koszul() {
    let b = make_builtin_bundle(BuiltinBundle::Hopf);
    for x in [[0.3, -0.2], [1.1, 0.4], [-0.7, -1.3]] {
        let ours = b.christoffel(&x);
        let oracle = koszul_christoffel(&b, &x);
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    assert!(
                        (ours.get(i, j, k) - oracle.get(i, j, k)).abs() < 1e-8,
                        "Γ[{i}][{j}][{k}] at {x:?}"
                    );
                }
            }
        }
    }
}

#[test]
fn maurer_cartan_flat() {
    let b = make_builtin_bundle(BuiltinBundle::FlatTorusBundle);
    assert!(b.maurer_cartan_residual(&[0.2, 0.3], 0, 1).unwrap() < 1e-10);
}

#[test]
fn maurer_cartan_chern_and_hopf() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for f in [1, 2, -3] {
        let b = make_builtin_bundle(BuiltinBundle::ChernTorus(f));
        for _ in 0..5 {
            let x = interior_point(&b, &mut rng);
            assert!(b.maurer_cartan_residual(&x, 0, 1).unwrap() < 1e-6);
        }
    }
    let hopf = make_builtin_bundle(BuiltinBundle::Hopf);
    for _ in 0..5 {
        let x = interior_point(&hopf, &mut rng);
        assert!(hopf.maurer_cartan_residual(&x, 0, 1).unwrap() < 1e-6);
    }
}

#[test]
fn maurer_cartan_nonabelian() {
    let b = make_builtin_bundle(BuiltinBundle::TrivialSu2);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..5 {
        let x = interior_point(&b, &mut rng);
        assert!(b.maurer_cartan_residual(&x, 0, 1).unwrap() < 1e-6);
        assert!(b.maurer_cartan_residual(&x, 1, 0).unwrap() < 1e-6);
    }
}

#[test]
fn maurer_cartan_detects_wrong_curvature() {
    // The chern trivialisation with doubled curvature violates the check.
    let b = make_builtin_bundle(BuiltinBundle::ChernTorus(1));
    let x = [0.2, 0.2];
    let bracket_part = b.maurer_cartan_residual(&x, 0, 1).unwrap();
    assert!(bracket_part < 1e-6);
    let text = r#"{"format":"wanelab-bundle/1","name":"off","group":"torus:1","base_dim":2,
        "domain":{"lo":[-1,-1],"hi":[1,1]},
        "curvature":[{"a":0,"i":0,"j":1,"poly":[{"coef":2.0,"powers":[0,0]}]}],
        "connection":[{"a":0,"i":1,"poly":[{"coef":2.0,"powers":[1,0]}]}]}"#;
    let wrong = parse_bundle_file(text).unwrap();
    assert!((wrong.maurer_cartan_residual(&x, 0, 1).unwrap() - 2.0).abs() < 1e-6);
}

#[test]
fn maurer_cartan_boundary() {
    let b = make_builtin_bundle(BuiltinBundle::ChernTorus(1));
    assert!(matches!(
        b.maurer_cartan_residual(&[0.75 - 1e-5, 0.0], 0, 1),
        Err(WaneError::BoundaryPoint { .. })
    ));
}

#[test]
fn vertical_field_on_torus_is_plain_derivative() {
    let b = make_builtin_bundle(BuiltinBundle::ChernTorus(2));
    let d: PathFn = Arc::new(|t| Vector::from_element(1, (2.0 * PI * t).cos()));
    let curve = TotalCurve::vertical(&b, &[0.1, 0.2], d, 33);
    let field = FrameField::from_fn(|t| Vector::from_column_slice(&[0.0, 0.0, t * t]));
    let cd = covariant_derivative(&b, 0.3, &curve, &field).unwrap();
    for (i, &t) in cd.t_grid.iter().enumerate() {
        assert!((cd.vertical(i, 2)[0] - 2.0 * t).abs() < 1e-9);
    }
}

#[test]
fn vertical_derivative_of_basic_field_along_fiber_vanishes() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for b in all_builtins() {
        for _ in 0..10 {
            let x = interior_point(&b, &mut rng);
            let m = b.dim_m();
            let dv: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let c: Vec<f64> = (0..2).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let d: PathFn = Arc::new(move |t| Vector::from_column_slice(&dv) * (1.0 + t));
            let curve = TotalCurve::vertical(&b, &x, d, 17);
            let mut v = vec![0.0; 2 + m];
            v[..2].copy_from_slice(&c);
            let field = FrameField::constant(Vector::from_vec(v));
            let eps = rng.gen_range(0.05..1.0);
            let cd = covariant_derivative(&b, eps, &curve, &field).unwrap();
            for i in 0..cd.t_grid.len() {
                assert!(cd.vertical(i, 2).amax() < 1e-9);
            }
        }
    }
}

#[test]
fn chern_vertical_part_of_lift_derivative() {
    let b = make_builtin_bundle(BuiltinBundle::ChernTorus(1));
    let base = BaseCurve::segment(&[0.0, 0.0], &[0.5, 0.0]);
    let m = b.dim_m();
    let curve = TotalCurve::over_base(&b, &base, Arc::new(move |_| Vector::zeros(m)), 9);
    let field = FrameField::constant(Vector::from_column_slice(&[0.0, 1.0, 0.0]));
    let cd = covariant_derivative(&b, 1.0, &curve, &field).unwrap();
    for i in 0..cd.t_grid.len() {
        // a = (0.5, 0): vertical part 0.5·Ω(ξ₁, ξ₂).
        assert!((cd.vertical(i, 2)[0] - 0.5).abs() < 1e-12);
        assert!(cd.horizontal(i, 2).amax() < 1e-12);
    }
}

#[test]
fn covariant_derivative_is_linear() {
    let b = make_builtin_bundle(BuiltinBundle::TrivialSu2);
    let base = BaseCurve::circle(&[0.2, -0.1], 0.3);
    let d: PathFn = Arc::new(|t| Vector::from_column_slice(&[t.sin(), 0.2, -t]));
    let curve = TotalCurve::over_base(&b, &base, d, 25);
    let f = FrameField::from_fn(|t| Vector::from_fn(5, |i, _| (t * (i + 1) as f64).sin()));
    let g = FrameField::from_fn(|t| Vector::from_fn(5, |i, _| t.powi(i as i32)));
    let (alpha, beta) = (0.7, -1.3);
    let eps = 0.25;
    let lhs = covariant_derivative(&b, eps, &curve, &f.combine(alpha, &g, beta)).unwrap();
    let cf = covariant_derivative(&b, eps, &curve, &f).unwrap();
    let cg = covariant_derivative(&b, eps, &curve, &g).unwrap();
    for i in 0..lhs.values.len() {
        let rhs = &cf.values[i] * alpha + &cg.values[i] * beta;
        assert!((&lhs.values[i] - rhs).amax() < 1e-9);
    }
}

#[test]
fn coarse_grid_rejected() {
    let b = make_builtin_bundle(BuiltinBundle::Hopf);
    let curve = TotalCurve::constant(&b, &[0.0, 0.0], 5);
    let field = FrameField::constant(Vector::zeros(3));
    assert!(matches!(
        covariant_derivative(&b, 1.0, &curve, &field),
        Err(WaneError::GridTooCoarse { samples: 5, required: 8 })
    ));
}

#[test]
fn flat_lift_keeps_fiber_constant() {
    let b = make_builtin_bundle(BuiltinBundle::FlatTorusBundle);
    let base = BaseCurve::segment(&[-0.1, 0.0], &[0.5, 0.4]);
    let lift = horizontal_lift(&b, &base, FiberPoint::Abelian(vec![0.3]), 256).unwrap();
    assert!(lift.fiber.iter().all(|f| (f.phases().unwrap()[0] - 0.3).abs() < 1e-14));
    assert!(lift.lift_residual < 1e-12);
}

#[test]
fn chern_square_phase_matches_stokes() {
    let b = make_builtin_bundle(BuiltinBundle::ChernTorus(1));
    for s in [0.1, 0.2, 0.4] {
        let lift = horizontal_lift(&b, &BaseCurve::square(&[0.0, 0.0], s), FiberPoint::identity(&b.group), 4096)
            .unwrap();
        // −2 ∫∫ Ω over the counter-clockwise square.
        let stokes = -2.0 * s * s;
        let phase = lift.phase_change().unwrap()[0];
        assert!(((phase - stokes) / stokes).abs() < 1e-9, "s = {s}: {phase} vs {stokes}");
        assert!(lift.lift_residual < 1e-7);
    }
}

/// `−∫∫ dA` over the disc of radius `r` about `c`, by tensor Gauss-Legendre
/// quadrature in polar coordinates.
fn hopf_stokes_phase(c: [f64; 2], r: f64) -> f64 {
    let nodes = [
        (-0.906_179_845_938_664, 0.236_926_885_056_189),
        (-0.538_469_310_105_683, 0.478_628_670_499_366),
        (0.0, 0.568_888_888_888_889),
        (0.538_469_310_105_683, 0.478_628_670_499_366),
        (0.906_179_845_938_664, 0.236_926_885_056_189),
    ];
    let panels = 64;
    let mut total = 0.0;
    for pr in 0..8 {
        for pt in 0..panels {
            for &(xr, wr) in &nodes {
                for &(xt, wt) in &nodes {
                    let rho = r * (pr as f64 + 0.5 * (xr + 1.0)) / 8.0;
                    let th = 2.0 * PI * (pt as f64 + 0.5 * (xt + 1.0)) / panels as f64;
                    let (x, y) = (c[0] + rho * th.cos(), c[1] + rho * th.sin());
                    let density = 2.0 * HOPF_KAPPA / (1.0 + x * x + y * y).powi(2);
                    total += wr * wt * density * rho * (r / 16.0) * (PI / panels as f64);
                }
            }
        }
    }
    -total
}

#[test]
fn hopf_circle_phase_matches_stokes() {
    let b = make_builtin_bundle(BuiltinBundle::Hopf);
    for r in [0.02, 0.05, 0.1] {
        let c = [0.4, -0.3];
        let lift =
            horizontal_lift(&b, &BaseCurve::circle(&c, r), FiberPoint::identity(&b.group), 2048).unwrap();
        let phase = lift.phase_change().unwrap()[0];
        let oracle = hopf_stokes_phase(c, r);
        assert!(((phase - oracle) / oracle).abs() < 1e-3, "r = {r}: {phase} vs {oracle}");
        assert!(lift.lift_residual < 1e-7);
    }
}

#[test]
fn nonabelian_lift_is_horizontal() {
    let b = make_builtin_bundle(BuiltinBundle::TrivialSu2);
    let lift =
        horizontal_lift(&b, &BaseCurve::circle(&[0.1, 0.0], 0.4), FiberPoint::identity(&b.group), 4096)
            .unwrap();
    assert!(lift.lift_residual < 1e-7);
    let q = lift.end_fiber().unit_quaternion().unwrap();
    assert!(q.angle() > 1e-3, "holonomy of a curved loop should be nontrivial");
}

#[test]
fn lift_of_concatenation() {
    let b = make_builtin_bundle(BuiltinBundle::TrivialSu2);
    let first = BaseCurve::segment(&[0.0, 0.0], &[0.3, 0.1]);
    let second = BaseCurve::circle(&[0.0, 0.1], 0.3);
    let start = FiberPoint::identity(&b.group);
    let a = horizontal_lift(&b, &first, start, 2048).unwrap();
    let ab = horizontal_lift(&b, &second, a.end_fiber().clone(), 2048).unwrap();
    let joined = first.concat(&second);
    let whole = horizontal_lift(&b, &joined, FiberPoint::identity(&b.group), 4096).unwrap();
    let diff: f64 = whole
        .end_fiber()
        .coords()
        .iter()
        .zip(ab.end_fiber().coords().iter())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    assert!(diff < 1e-6, "endpoint mismatch {diff}");
}

#[test]
fn lift_leaving_chart() {
    let b = make_builtin_bundle(BuiltinBundle::ChernTorus(1));
    let base = BaseCurve::segment(&[0.0, 0.0], &[1.0, 0.0]);
    assert!(matches!(
        horizontal_lift(&b, &base, FiberPoint::identity(&b.group), 64),
        Err(WaneError::ChartExit { .. })
    ));
}

#[test]
fn custom_file_matches_builtin() {
    let text = r#"{"format":"wanelab-bundle/1","name":"chern","group":"torus:1","base_dim":2,
        "domain":{"lo":[-0.25,-0.25],"hi":[0.75,0.75]},
        "curvature":[{"a":0,"i":0,"j":1,"poly":[{"coef":1.0,"powers":[0,0]}]}],
        "connection":[{"a":0,"i":1,"poly":[{"coef":2.0,"powers":[1,0]}]}]}"#;
    let custom = parse_bundle_file(text).unwrap();
    let chern = make_builtin_bundle(BuiltinBundle::ChernTorus(1));
    let x = [0.3, 0.1];
    assert_eq!(custom.curvature(&x), chern.curvature(&x));
    assert_eq!(custom.connection_form(&x), chern.connection_form(&x));
    assert!(custom.maurer_cartan_residual(&x, 0, 1).unwrap() < 1e-6);
    assert_ne!(custom.describe(), chern.describe());
}

#[test]
fn custom_christoffel_skew_completion() {
    let text = r#"{"format":"wanelab-bundle/1","name":"g","group":"torus:2","base_dim":2,
        "domain":{"lo":[-1,-1],"hi":[1,1]},
        "christoffel":[{"i":1,"j":0,"k":1,"poly":[{"coef":0.5,"powers":[0,1]}]}]}"#;
    let b = parse_bundle_file(text).unwrap();
    let g = b.christoffel(&[0.0, 0.4]);
    assert_eq!(g.get(1, 0, 1), 0.2);
    assert_eq!(g.get(1, 1, 0), -0.2);
    assert!(b.connection_form(&[0.0, 0.0]).is_none());
    assert!(matches!(b.maurer_cartan_residual(&[0.0, 0.0], 0, 1), Err(WaneError::Unsupported { .. })));
}

#[test]
fn custom_file_errors() {
    let wrong_version = r#"{"format":"wanelab-bundle/2","name":"x","group":"torus:1","base_dim":2,
        "domain":{"lo":[-1,-1],"hi":[1,1]}}"#;
    assert!(matches!(parse_bundle_file(wrong_version), Err(WaneError::BundleFile(_))));
    let bad_index = r#"{"format":"wanelab-bundle/1","name":"x","group":"torus:1","base_dim":2,
        "domain":{"lo":[-1,-1],"hi":[1,1]},
        "curvature":[{"a":0,"i":1,"j":0,"poly":[]}]}"#;
    assert!(parse_bundle_file(bad_index).is_err());
    let nonabelian = r#"{"format":"wanelab-bundle/1","name":"x","group":"su2","base_dim":2,
        "domain":{"lo":[-1,-1],"hi":[1,1]}}"#;
    assert!(parse_bundle_file(nonabelian).is_err());
    assert!(parse_bundle_file("not json").is_err());
}

proptest! {
    #[test]
    fn tensors_have_their_symmetries(u in 0.05f64..0.95, v in 0.05f64..0.95, which in 0usize..4) {
        let b = all_builtins().swap_remove(which);
        let x: Vec<f64> = b.chart_domain.lo.iter().zip(&b.chart_domain.hi)
            .zip([u, v]).map(|((lo, hi), s)| lo + s * (hi - lo)).collect();
        let om = b.curvature(&x);
        let g = b.christoffel(&x);
        for a in 0..b.dim_m() {
            for i in 0..2 {
                for j in 0..2 {
                    prop_assert_eq!(om.get(a, i, j), -om.get(a, j, i));
                    for k in 0..2 {
                        prop_assert_eq!(g.get(i, j, k), -g.get(i, k, j));
                    }
                }
            }
        }
    }
}
