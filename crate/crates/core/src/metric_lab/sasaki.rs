use crate::bundle_models::{covariant_derivative, BundleModel, FrameField, TotalCurve};
use crate::error::Result;
use crate::linalg::trapezoid;

/// Length of the curve `t ↦ (δ(t), field(t))` in the tangent bundle, with
/// squared speed `‖δ̇‖² + ‖∇_δ̇ field‖²`, sampled on `steps + 1` grid points.
pub fn sasaki_curve_length(
    b: &BundleModel,
    eps: f64,
    curve: &TotalCurve,
    field: &FrameField,
    steps: usize,
) -> Result<f64> {
    let curve = curve.clone().with_grid(steps + 1);
    let cov = covariant_derivative(b, eps, &curve, field)?;
    let speeds: Vec<f64> = curve
        .t_grid
        .iter()
        .zip(&cov.values)
        .map(|(&t, nabla)| (curve.a(t).norm_squared() + curve.d(t).norm_squared() + nabla.norm_squared()).sqrt())
        .collect();
    Ok(trapezoid(&curve.t_grid, &speeds))
}
