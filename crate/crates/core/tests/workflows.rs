use std::sync::Arc;

use proptest::prelude::*;
use wanelab::bundle_models::{make_builtin_bundle, parse_bundle_file, BaseCurve, BuiltinBundle, TotalCurve};
use wanelab::linalg::{Mat, PathFn, Vector};
use wanelab::metric_lab::{gh_upper_bound, FiniteMetricSpace, GhOptions, GhStatus};
use wanelab::transport_engine::{parallel_transport, parallel_transport_interval};

const CHERN_TWO: &str = r#"{
  "format": "wanelab-bundle/1",
  "name": "chern-two",
  "group": "torus:1",
  "base_dim": 2,
  "domain": { "lo": [-0.25, -0.25], "hi": [0.75, 0.75] },
  "curvature": [ { "a": 0, "i": 0, "j": 1, "poly": [ { "coef": 2.0, "powers": [0, 0] } ] } ],
  "connection": [ { "a": 0, "i": 1, "poly": [ { "coef": 4.0, "powers": [1, 0] } ] } ]
}"#;

fn constant_d(w: Vec<f64>) -> PathFn {
    let w = Vector::from_vec(w);
    Arc::new(move |_| w.clone())
}

#[test]
fn bundle_file_reproduces_builtin_chern_torus() {
    let file = parse_bundle_file(CHERN_TWO).unwrap();
    let builtin = make_builtin_bundle(BuiltinBundle::ChernTorus(2));
    assert!(file.maurer_cartan_residual(&[0.2, 0.3], 0, 1).unwrap() < 1e-6);
    let base = BaseCurve::circle(&[0.2, 0.25], 0.2);
    for eps in [1.0, 0.25, 1.0 / 64.0] {
        let p: Vec<Mat> = [&file, &builtin]
            .iter()
            .map(|b| {
                let curve = TotalCurve::over_base(b, &base, constant_d(vec![0.3]), 129);
                parallel_transport(b, eps, &curve, 512).unwrap().matrix
            })
            .collect();
        assert!((&p[0] - &p[1]).amax() < 1e-12, "ε = {eps}");
    }
}

#[test]
fn metric_spaces_survive_serialisation() {
    let pts: Vec<Vector> = (0..7).map(|i| Vector::from_vec(vec![(i as f64).sin(), 0.1 * i as f64])).collect();
    let x = FiniteMetricSpace::from_points(&pts).unwrap();
    assert_eq!(FiniteMetricSpace::from_json(&x.to_json()).unwrap(), x);
    assert_eq!(FiniteMetricSpace::from_csv(&x.to_csv().unwrap()).unwrap(), x);
}

fn builtin(i: usize) -> BuiltinBundle {
    [BuiltinBundle::FlatTorusBundle, BuiltinBundle::Hopf, BuiltinBundle::ChernTorus(-2), BuiltinBundle::TrivialSu2][i]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// Running a curve backwards from its end fiber undoes the transport.
    #[test]
    fn reversed_curve_inverts_transport(
        which in 0usize..4,
        p in prop::array::uniform2(0.0f64..0.5),
        q in prop::array::uniform2(0.0f64..0.5),
        w in prop::collection::vec(-1.0f64..1.0, 3),
        log_eps in -6.0f64..0.0,
    ) {
        let b = make_builtin_bundle(builtin(which));
        let eps = log_eps.exp2();
        let w: Vec<f64> = w[..b.dim_m()].to_vec();
        let back: Vec<f64> = w.iter().map(|x| -x).collect();
        let forward = TotalCurve::over_base(&b, &BaseCurve::segment(&p, &q), constant_d(w), 65);
        let (there, end) = parallel_transport_interval(&b, eps, &forward, 0.0, 1.0, 512, &forward.start_fiber).unwrap();
        let reverse = TotalCurve::over_base(&b, &BaseCurve::segment(&q, &p), constant_d(back), 65).with_start_fiber(end);
        let home = parallel_transport(&b, eps, &reverse, 512).unwrap();
        let k = b.total_dim();
        prop_assert!((home.matrix * there.matrix - Mat::identity(k, k)).amax() < 1e-8);
    }

    #[test]
    fn exact_gh_is_symmetric(
        a in prop::collection::vec(0.0f64..1.0, 8),
        c in prop::collection::vec(0.0f64..1.0, 8),
        nx in 1usize..6,
        ny in 1usize..6,
    ) {
        let line = |v: &[f64], k: usize| {
            let pts: Vec<Vector> = v[..k].iter().map(|&t| Vector::from_vec(vec![t])).collect();
            FiniteMetricSpace::from_points(&pts).unwrap()
        };
        let (x, y) = (line(&a, nx), line(&c, ny));
        let opts = GhOptions::default();
        let (xy, yx) = (gh_upper_bound(&x, &y, &opts).unwrap(), gh_upper_bound(&y, &x, &opts).unwrap());
        prop_assert_eq!(xy.status, GhStatus::Exact);
        prop_assert_eq!(xy.bound, yx.bound);
        let diam = x.diameter().max(y.diameter());
        prop_assert!(xy.bound <= 0.5 * diam + 1e-15);
    }
}
