//! Brute-force references used by the acceptance checks.

use num_complex::Complex64;

fn mirror(i: i64, n: usize) -> usize {
    let n = n as i64;
    let m = i.rem_euclid(2 * n);
    (if m >= n { 2 * n - 1 - m } else { m }) as usize
}

fn kernel(order: i32, qx: i64, qy: i64, sigma: f64) -> Complex64 {
    let (x, y) = (qx as f64, qy as f64);
    let base = if order >= 0 {
        Complex64::new(x, y)
    } else {
        Complex64::new(x, -y)
    };
    base.powi(order.abs()) * (-(x * x + y * y) / (2.0 * sigma * sigma)).exp()
}

/// Normalized symmetry response by direct 2-D summation over the square
/// kernel support with mirrored borders.
pub fn dense_response(
    z: &[Complex64],
    w: usize,
    h: usize,
    order: i32,
    sigma: f64,
) -> Vec<Complex64> {
    let hw = (3.0 * sigma).ceil() as i64;
    let (mut abs_sum, mut g_sum) = (0.0, 0.0);
    for qy in -hw..=hw {
        for qx in -hw..=hw {
            abs_sum += kernel(order, qx, qy, sigma).norm();
            g_sum += kernel(0, qx, qy, sigma).re;
        }
    }
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h as i64 {
        for x in 0..w as i64 {
            let mut num = Complex64::new(0.0, 0.0);
            let mut den = 0.0;
            for qy in -hw..=hw {
                for qx in -hw..=hw {
                    let v = z[mirror(y + qy, h) * w + mirror(x + qx, w)];
                    num += v * kernel(order, qx, qy, sigma).conj();
                    den += v.norm() * kernel(0, qx, qy, sigma).re;
                }
            }
            let (num, den) = (num / abs_sum, den / g_sum);
            let s = if den < 1e-12 {
                Complex64::new(0.0, 0.0)
            } else {
                num / den
            };
            out.push(if s.norm() > 1.0 { s / s.norm() } else { s });
        }
    }
    out
}
