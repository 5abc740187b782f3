//! Small dense helpers shared by the transport and metric layers.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

pub type Mat = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Shareable vector-valued function of the curve parameter.
pub type PathFn = Arc<dyn Fn(f64) -> Vector + Send + Sync>;

pub fn frobenius(m: &Mat) -> f64 {
    m.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Spectral norm via the largest singular value.
pub fn operator_norm(m: &Mat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .cloned()
        .fold(0.0, f64::max)
}

/// ‖MᵀM − I‖ in the Frobenius norm.
pub fn ortho_residual(m: &Mat) -> f64 {
    let n = m.ncols();
    frobenius(&(m.transpose() * m - Mat::identity(n, n)))
}

pub fn skew_residual(m: &Mat) -> f64 {
    frobenius(&(m + m.transpose()))
}

/// Closest orthogonal matrix (orthogonal polar factor).
pub fn polar_orthogonal(m: &Mat) -> Mat {
    let svd = m.clone().svd(true, true);
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested Vᵀ");
    u * v_t
}

/// Matrix exponential by scaling and squaring of a truncated Taylor series.
pub fn expm(a: &Mat) -> Mat {
    let n = a.nrows();
    let norm = a.iter().map(|x| x.abs()).fold(0.0, f64::max) * n as f64;
    let mut squarings = 0u32;
    let mut scale = 1.0;
    while norm * scale > 0.25 {
        scale *= 0.5;
        squarings += 1;
    }
    let scaled = a * scale;
    let mut term = Mat::identity(n, n);
    let mut sum = Mat::identity(n, n);
    for k in 1..=18 {
        term = &term * &scaled / k as f64;
        sum += &term;
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}

/// Integrates Y' = Q(t)·Y from Y(0) = I over [t0, t1] with classical RK4.
pub fn rk4_matrix<F>(q: F, dim: usize, t0: f64, t1: f64, steps: usize) -> Mat
where
    F: Fn(f64) -> Mat,
{
    let h = (t1 - t0) / steps as f64;
    let mut y = Mat::identity(dim, dim);
    for s in 0..steps {
        let t = t0 + s as f64 * h;
        let q0 = q(t);
        let qm = q(t + 0.5 * h);
        let q1 = q(t + h);
        let k1 = &q0 * &y;
        let k2 = &qm * (&y + &k1 * (0.5 * h));
        let k3 = &qm * (&y + &k2 * (0.5 * h));
        let k4 = &q1 * (&y + &k3 * h);
        y += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
    }
    y
}

pub fn block_diag(a: &Mat, b: &Mat) -> Mat {
    let n = a.nrows() + b.nrows();
    let mut m = Mat::zeros(n, n);
    m.view_mut((0, 0), (a.nrows(), a.ncols())).copy_from(a);
    m.view_mut((a.nrows(), a.ncols()), (b.nrows(), b.ncols()))
        .copy_from(b);
    m
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Least-squares slope of `ys` against `xs`.
pub fn ls_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Trapezoid rule on samples `ys` over a grid `ts`.
pub fn trapezoid(ts: &[f64], ys: &[f64]) -> f64 {
    ts.windows(2)
        .zip(ys.windows(2))
        .map(|(t, y)| 0.5 * (t[1] - t[0]) * (y[0] + y[1]))
        .sum()
}

pub fn uniform_grid(samples: usize) -> Vec<f64> {
    (0..samples)
        .map(|i| i as f64 / (samples - 1) as f64)
        .collect()
}
