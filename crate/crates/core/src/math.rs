//! Small dense-vector kernels shared by training, inference and prediction.
//!
//! Parameters are stored in a generic float type (`f32` in trained models,
//! `f64` in gradient checks); scalar losses are always accumulated in `f64`.

use num_traits::Float;

/// Logistic function, stable for large `|x|`.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln σ(x)` without overflow or catastrophic cancellation.
pub fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

#[inline]
pub fn dot<F: Float>(a: &[F], b: &[F]) -> F {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .fold(F::zero(), |acc, (&x, &y)| acc + x * y)
}

/// `y += a * x`
#[inline]
pub fn axpy<F: Float>(a: F, x: &[F], y: &mut [F]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi = *yi + a * xi;
    }
}

pub fn norm<F: Float>(a: &[F]) -> f64 {
    a.iter()
        .map(|x| {
            let v = x.to_f64().unwrap_or(f64::NAN);
            v * v
        })
        .sum::<f64>()
        .sqrt()
}

/// Cosine similarity in `f64`; `None` when either vector has zero norm.
pub fn cosine<F: Float>(a: &[F], b: &[F]) -> Option<f64> {
    let na = norm(a);
    let nb = norm(b);
    if na == 0.0 || nb == 0.0 {
        return None;
    }
    let d: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| x.to_f64().unwrap_or(f64::NAN) * y.to_f64().unwrap_or(f64::NAN))
        .sum();
    Some(d / (na * nb))
}

#[inline]
pub fn to_f64<F: Float>(x: F) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

#[inline]
pub fn from_f64<F: Float>(x: f64) -> F {
    F::from(x).unwrap_or_else(F::nan)
}
