//! Separable 1-D filtering with mirror boundaries.

use std::ops::{AddAssign, Mul};

use num_traits::Zero;

use crate::error::{Error, Result};
use crate::field::Field;
use crate::scalar::Scalar;

/// Half-width of the sampled support for a Gaussian of std `sigma`: ⌈3σ⌉.
pub fn half_width<T: Scalar>(sigma: T) -> usize {
    (T::lit(3.0) * sigma).ceil().to_usize().unwrap_or(0).max(1)
}

/// Samples `x^power · exp(-x²/2σ²)` on `-hw..=hw` (unnormalized).
pub fn moment_taps<T: Scalar>(sigma: T, power: u32, hw: usize) -> Vec<T> {
    let two_var = T::lit(2.0) * sigma * sigma;
    (-(hw as i64)..=hw as i64)
        .map(|i| {
            let x = T::lit(i as f64);
            x.powi(power as i32) * (-(x * x) / two_var).exp()
        })
        .collect()
}

/// Gaussian taps normalized to unit sum.
pub fn gaussian_taps<T: Scalar>(sigma: T) -> Vec<T> {
    let taps = moment_taps(sigma, 0, half_width(sigma));
    let sum = taps.iter().fold(T::zero(), |a, &b| a + b);
    taps.into_iter().map(|t| t / sum).collect()
}

/// First-derivative-of-Gaussian taps for correlation, scaled so that the
/// response to the ramp `f(x) = x` is exactly 1.
pub fn derivative_taps<T: Scalar>(sigma: T) -> Vec<T> {
    let hw = half_width(sigma);
    let taps = moment_taps(sigma, 1, hw);
    let norm = taps
        .iter()
        .enumerate()
        .fold(T::zero(), |a, (i, &t)| a + T::lit(i as f64 - hw as f64) * t);
    taps.into_iter().map(|t| t / norm).collect()
}

/// Mirror index (edge sample repeated: `-1 → 0`, `n → n-1`).
#[inline]
pub(crate) fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    let period = 2 * n;
    let mut m = i.rem_euclid(period);
    if m >= n {
        m = period - 1 - m;
    }
    m as usize
}

pub(crate) fn check_support<V>(field: &Field<V>, hw: usize, what: &str) -> Result<()> {
    let k = 2 * hw + 1;
    if k > field.width() || k > field.height() {
        return Err(Error::Dimension(format!(
            "{what}: {k}-tap kernel larger than {}x{} image",
            field.width(),
            field.height()
        )));
    }
    Ok(())
}

/// Correlates every row with `taps`: `out(x) = Σ_k in(x + k) · taps[k + hw]`.
pub fn correlate_rows<T, V>(field: &Field<V>, taps: &[T]) -> Field<V>
where
    T: Scalar,
    V: Copy + Zero + AddAssign + Mul<T, Output = V>,
{
    let (w, h) = field.dims();
    let hw = (taps.len() / 2) as isize;
    let src = field.values();
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h {
        let row = &src[y * w..(y + 1) * w];
        for x in 0..w {
            let mut acc = V::zero();
            for (k, &t) in taps.iter().enumerate() {
                acc += row[reflect(x as isize + k as isize - hw, w)] * t;
            }
            out.push(acc);
        }
    }
    Field::new(w, h, out).expect("dimensions preserved")
}

/// Correlates every column with `taps`.
pub fn correlate_cols<T, V>(field: &Field<V>, taps: &[T]) -> Field<V>
where
    T: Scalar,
    V: Copy + Zero + AddAssign + Mul<T, Output = V>,
{
    let (w, h) = field.dims();
    let hw = (taps.len() / 2) as isize;
    let src = field.values();
    let mut out = vec![V::zero(); w * h];
    for (k, &t) in taps.iter().enumerate() {
        for y in 0..h {
            let sy = reflect(y as isize + k as isize - hw, h);
            let (dst, row) = (&mut out[y * w..(y + 1) * w], &src[sy * w..(sy + 1) * w]);
            for (d, &s) in dst.iter_mut().zip(row) {
                *d += s * t;
            }
        }
    }
    Field::new(w, h, out).expect("dimensions preserved")
}

/// Separable correlation: rows with `x_taps`, then columns with `y_taps`.
pub fn correlate_separable<T, V>(field: &Field<V>, x_taps: &[T], y_taps: &[T]) -> Field<V>
where
    T: Scalar,
    V: Copy + Zero + AddAssign + Mul<T, Output = V>,
{
    correlate_cols(&correlate_rows(field, x_taps), y_taps)
}
