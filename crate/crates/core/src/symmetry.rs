//! Orientation tensor and its decomposition into symmetry responses.
//!
//! The orientation tensor `z = (∂f/∂x + i·∂f/∂y)²` stores local orientation
//! as a double angle. Correlating `z` with the complex filters
//! `hₙ = (x + iy)ⁿ·g` (or `(x − iy)^|n|·g` for `n < 0`) and dividing by the
//! local tensor energy `⟨|z|, h₀⟩` yields normalized symmetry responses
//! `sₙ`: the magnitude is the certainty that the neighbourhood follows the
//! pattern family of order `n`, the argument is the family member.
//!
//! Scalar products are evaluated as `⟨z, h⟩(p) = Σ_q z(p + q)·conj(h(q))`,
//! so a neighbourhood whose orientation field is `exp(i(nφ + α))` around `p`
//! gives `sₙ(p)` with argument `α`. Every filter is realized as a short sum
//! of separable real passes (binomial expansion of `(x ∓ iy)ⁿ`), with mirror
//! boundaries.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::field::{ComplexField, Field, Image, RealField};
use crate::filter::{self, correlate_separable, half_width, moment_taps};
use crate::scalar::Scalar;

/// Response denominators below this are treated as "no structure".
pub const DENOMINATOR_EPS: f64 = 1e-12;

/// Slack allowed on `|sₙ| ≤ 1` before [`inhibit`] reports a violation;
/// widened to a few ulps for `f32`.
pub const MAGNITUDE_SLACK: f64 = 1e-9;

/// Computes the orientation tensor with Gaussian-derivative filters of std `sigma`.
pub fn orientation_tensor<T: Scalar>(img: &Image<T>, sigma: T) -> Result<ComplexField<T>> {
    if !(sigma > T::zero()) {
        return Err(Error::InvalidParameter(format!(
            "tensor scale must be > 0, got {sigma}"
        )));
    }
    let g = filter::gaussian_taps(sigma);
    let d = filter::derivative_taps(sigma);
    tensor_with_taps(img, &g, &d)
}

fn tensor_with_taps<T: Scalar>(img: &Image<T>, g: &[T], d: &[T]) -> Result<ComplexField<T>> {
    let f = img.pixels();
    filter::check_support(f, g.len() / 2, "orientation tensor")?;
    let dx = correlate_separable(f, d, g);
    let dy = correlate_separable(f, g, d);
    let z = dx
        .values()
        .iter()
        .zip(dy.values())
        .map(|(&gx, &gy)| {
            let c = Complex::new(gx, gy);
            c * c
        })
        .collect();
    Field::new(f.width(), f.height(), z)
}

/// A sampled symmetry filter on a square support of half-width `⌈3σ⌉`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetryKernel<T> {
    order: i32,
    half_width: usize,
    taps: Vec<Complex<T>>,
    abs_sum: T,
}

impl<T: Scalar> SymmetryKernel<T> {
    pub fn order(&self) -> i32 {
        self.order
    }

    pub fn half_width(&self) -> usize {
        self.half_width
    }

    /// Side length of the support.
    pub fn size(&self) -> usize {
        2 * self.half_width + 1
    }

    /// Kernel value at integer offset `(dx, dy)` from the centre.
    pub fn at(&self, dx: i64, dy: i64) -> Complex<T> {
        let hw = self.half_width as i64;
        assert!(
            dx.abs() <= hw && dy.abs() <= hw,
            "offset outside kernel support"
        );
        self.taps[((dy + hw) as usize) * self.size() + (dx + hw) as usize]
    }

    /// Row-major samples, `dy` outer, `dx` inner.
    pub fn taps(&self) -> &[Complex<T>] {
        &self.taps
    }

    /// `Σ |hₙ|` over the support; the normalizer applied to responses of this order.
    pub fn abs_sum(&self) -> T {
        self.abs_sum
    }
}

/// Samples `hₙ = (x + iy)ⁿ·g` (`n ≥ 0`) or `(x − iy)^|n|·g` (`n < 0`), with
/// `g = exp(-(x² + y²)/2σ²)`.
pub fn build_symmetry_filter<T: Scalar>(order: i32, sigma: T) -> Result<SymmetryKernel<T>> {
    if !(sigma > T::zero()) {
        return Err(Error::InvalidParameter(format!(
            "symmetry scale must be > 0, got {sigma}"
        )));
    }
    let hw = half_width(sigma);
    let two_var = T::lit(2.0) * sigma * sigma;
    let mut taps = Vec::with_capacity((2 * hw + 1).pow(2));
    let h = hw as i64;
    for dy in -h..=h {
        for dx in -h..=h {
            let (x, y) = (T::lit(dx as f64), T::lit(dy as f64));
            let g = (-(x * x + y * y) / two_var).exp();
            let base = if order >= 0 {
                Complex::new(x, y)
            } else {
                Complex::new(x, -y)
            };
            taps.push(base.powi(order.abs()) * g);
        }
    }
    let abs_sum = taps.iter().fold(T::zero(), |a, t| a + t.norm());
    Ok(SymmetryKernel {
        order,
        half_width: hw,
        taps,
        abs_sum,
    })
}

fn binomial(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * f64::from(n - i) / f64::from(i + 1))
}

/// One separable component `coefficient · X(dx) · Y(dy)` of a conjugated filter.
#[derive(Debug, Clone, PartialEq)]
struct SeparableTerm<T> {
    coefficient: Complex<T>,
    x_taps: Vec<T>,
    y_taps: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
struct OrderFilter<T> {
    order: i32,
    terms: Vec<SeparableTerm<T>>,
    abs_sum: T,
}

impl<T: Scalar> OrderFilter<T> {
    /// Expands `conj(hₙ)` binomially: `(x ∓ iy)^m = Σ_k C(m,k)·x^{m-k}·(∓i)^k·y^k`.
    fn new(order: i32, sigma: T) -> Result<Self> {
        let kernel = build_symmetry_filter(order, sigma)?;
        let hw = kernel.half_width();
        let m = order.unsigned_abs();
        let unit = if order >= 0 {
            Complex::new(T::zero(), -T::one())
        } else {
            Complex::new(T::zero(), T::one())
        };
        let terms = (0..=m)
            .map(|k| SeparableTerm {
                coefficient: unit.powi(k as i32) * T::lit(binomial(m, k)),
                x_taps: moment_taps(sigma, m - k, hw),
                y_taps: moment_taps(sigma, k, hw),
            })
            .collect();
        Ok(Self {
            order,
            terms,
            abs_sum: kernel.abs_sum(),
        })
    }
}

/// Immutable set of tensor and symmetry filters for one parameter choice.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterBank<T> {
    sigma_tensor: T,
    sigma_symmetry: T,
    orders: Vec<i32>,
    tensor_gaussian: Vec<T>,
    tensor_derivative: Vec<T>,
    energy_taps: Vec<T>,
    energy_sum: T,
    filters: Vec<OrderFilter<T>>,
}

impl<T: Scalar> FilterBank<T> {
    pub fn new(sigma_tensor: T, sigma_symmetry: T, orders: &[i32]) -> Result<Self> {
        if !(sigma_tensor > T::zero()) || !(sigma_symmetry > T::zero()) {
            return Err(Error::InvalidParameter("filter scales must be > 0".into()));
        }
        if orders.is_empty() {
            return Err(Error::InvalidParameter(
                "at least one symmetry order is required".into(),
            ));
        }
        for (i, o) in orders.iter().enumerate() {
            if orders[..i].contains(o) {
                return Err(Error::InvalidParameter(format!(
                    "duplicate symmetry order {o}"
                )));
            }
        }
        let hw = half_width(sigma_symmetry);
        let energy_taps = moment_taps(sigma_symmetry, 0, hw);
        let s = energy_taps.iter().fold(T::zero(), |a, &b| a + b);
        let filters = orders
            .iter()
            .map(|&o| OrderFilter::new(o, sigma_symmetry))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            sigma_tensor,
            sigma_symmetry,
            orders: orders.to_vec(),
            tensor_gaussian: filter::gaussian_taps(sigma_tensor),
            tensor_derivative: filter::derivative_taps(sigma_tensor),
            energy_taps,
            energy_sum: s * s,
            filters,
        })
    }

    pub fn sigma_tensor(&self) -> T {
        self.sigma_tensor
    }

    pub fn sigma_symmetry(&self) -> T {
        self.sigma_symmetry
    }

    pub fn orders(&self) -> &[i32] {
        &self.orders
    }

    /// Half-width of the symmetry filter support.
    pub fn symmetry_half_width(&self) -> usize {
        self.energy_taps.len() / 2
    }

    /// Normalizer `Σ|hₙ|` used for order `n`, if the bank holds that order.
    pub fn filter_abs_sum(&self, order: i32) -> Option<T> {
        self.filters
            .iter()
            .find(|f| f.order == order)
            .map(|f| f.abs_sum)
    }

    /// Normalizer `Σh₀` of the energy denominator.
    pub fn energy_sum(&self) -> T {
        self.energy_sum
    }

    pub fn orientation_tensor(&self, img: &Image<T>) -> Result<ComplexField<T>> {
        tensor_with_taps(img, &self.tensor_gaussian, &self.tensor_derivative)
    }

    /// Local tensor energy `⟨|z|, h₀⟩ / Σh₀`.
    pub fn energy(&self, z: &ComplexField<T>) -> Result<RealField<T>> {
        filter::check_support(z, self.symmetry_half_width(), "symmetry filter")?;
        let mag = z.map(|c| c.norm());
        let den = correlate_separable(&mag, &self.energy_taps, &self.energy_taps);
        let inv = T::one() / self.energy_sum;
        Ok(den.map(|&d| d * inv))
    }

    /// Normalized response `sₙ` for one order held by the bank.
    pub fn response(&self, z: &ComplexField<T>, order: i32) -> Result<ComplexField<T>> {
        let den = self.energy(z)?;
        self.response_with_energy(z, &den, self.filter(order)?)
    }

    /// Normalized responses for every order of the bank, in bank order.
    pub fn responses(&self, z: &ComplexField<T>) -> Result<Vec<ComplexField<T>>> {
        let den = self.energy(z)?;
        self.filters
            .iter()
            .map(|f| self.response_with_energy(z, &den, f))
            .collect()
    }

    fn filter(&self, order: i32) -> Result<&OrderFilter<T>> {
        self.filters
            .iter()
            .find(|f| f.order == order)
            .ok_or_else(|| {
                Error::InvalidParameter(format!("order {order} is not in the filter bank"))
            })
    }

    /// Un-normalized `⟨z, hₙ⟩ / Σ|hₙ|` via separable passes.
    fn numerator(&self, z: &ComplexField<T>, f: &OrderFilter<T>) -> ComplexField<T> {
        let mut acc = vec![Complex::new(T::zero(), T::zero()); z.values().len()];
        for term in &f.terms {
            let part = correlate_separable(z, &term.x_taps, &term.y_taps);
            for (a, p) in acc.iter_mut().zip(part.values()) {
                *a += *p * term.coefficient;
            }
        }
        let inv = T::one() / f.abs_sum;
        Field::new(
            z.width(),
            z.height(),
            acc.into_iter().map(|c| c * inv).collect(),
        )
        .expect("dimensions preserved")
    }

    fn response_with_energy(
        &self,
        z: &ComplexField<T>,
        den: &RealField<T>,
        f: &OrderFilter<T>,
    ) -> Result<ComplexField<T>> {
        let num = self.numerator(z, f);
        let eps = T::lit(DENOMINATOR_EPS);
        let values = num
            .values()
            .iter()
            .zip(den.values())
            .map(|(&n, &d)| normalize(n, d, eps))
            .collect();
        Field::new(z.width(), z.height(), values)
    }

    /// Runs the whole decomposition on an image.
    pub fn decompose(&self, img: &Image<T>) -> Result<Decomposition<T>> {
        let tensor = self.orientation_tensor(img)?;
        let responses = self.responses(&tensor)?;
        let inhibited = inhibit(&responses)?;
        let total = total_symmetry(&inhibited)?;
        Ok(Decomposition {
            orders: self.orders.clone(),
            tensor,
            responses,
            inhibited,
            total,
        })
    }
}

/// Divides a filter response by the local energy, mapping empty
/// neighbourhoods to 0 and saturating the certainty at 1.
#[inline]
pub(crate) fn normalize<T: Scalar>(num: Complex<T>, den: T, eps: T) -> Complex<T> {
    if !(den >= eps) {
        return Complex::new(T::zero(), T::zero());
    }
    let s = num / den;
    let m = s.norm();
    if m > T::one() {
        s / m
    } else {
        s
    }
}

/// Normalized response `sₙ` of order `n` for a tensor field.
pub fn normalized_response<T: Scalar>(
    z: &ComplexField<T>,
    order: i32,
    bank: &FilterBank<T>,
) -> Result<ComplexField<T>> {
    bank.response(z, order)
}

/// Mutual inhibition: `sₙᴵ = sₙ · Π_{k≠n} (1 − |s_k|)`.
pub fn inhibit<T: Scalar>(responses: &[ComplexField<T>]) -> Result<Vec<ComplexField<T>>> {
    let Some(first) = responses.first() else {
        return Ok(Vec::new());
    };
    for r in responses {
        first.ensure_same_dims(r, "inhibition")?;
    }
    let limit = T::one() + T::lit(MAGNITUDE_SLACK).max(T::epsilon() * T::lit(16.0));
    let mags: Vec<Vec<T>> = responses
        .iter()
        .map(|r| r.values().iter().map(|c| c.norm()).collect())
        .collect();
    for (n, m) in mags.iter().enumerate() {
        if let Some(i) = m.iter().position(|&v| !(v <= limit)) {
            return Err(Error::Invariant(format!(
                "response #{n} has magnitude {} > 1 at pixel {i}",
                m[i]
            )));
        }
    }
    Ok(responses
        .iter()
        .enumerate()
        .map(|(n, r)| {
            let values = r
                .values()
                .iter()
                .enumerate()
                .map(|(i, &s)| {
                    let damp = mags
                        .iter()
                        .enumerate()
                        .filter(|&(k, _)| k != n)
                        .fold(T::one(), |acc, (_, m)| {
                            acc * (T::one() - m[i].min(T::one()))
                        });
                    s * damp
                })
                .collect();
            Field::new(r.width(), r.height(), values).expect("dimensions preserved")
        })
        .collect())
}

/// Pixel-wise sum of response magnitudes.
pub fn total_symmetry<T: Scalar>(inhibited: &[ComplexField<T>]) -> Result<RealField<T>> {
    let Some(first) = inhibited.first() else {
        return Err(Error::InvalidParameter("no responses to sum".into()));
    };
    let mut acc = vec![T::zero(); first.values().len()];
    for r in inhibited {
        first.ensure_same_dims(r, "total symmetry")?;
        for (a, c) in acc.iter_mut().zip(r.values()) {
            *a += c.norm();
        }
    }
    Field::new(first.width(), first.height(), acc)
}

/// Intermediate fields of one decomposition, kept for diagnostics.
#[derive(Debug, Clone)]
pub struct Decomposition<T> {
    pub orders: Vec<i32>,
    pub tensor: ComplexField<T>,
    pub responses: Vec<ComplexField<T>>,
    pub inhibited: Vec<ComplexField<T>>,
    pub total: RealField<T>,
}

impl<T: Scalar> Decomposition<T> {
    /// Magnitude field `|sₙᴵ|` of the given order.
    pub fn inhibited_magnitude(&self, order: i32) -> Option<RealField<T>> {
        let idx = self.orders.iter().position(|&o| o == order)?;
        Some(self.inhibited[idx].map(|c| c.norm()))
    }

    /// Magnitude field `|sₙ|` (before inhibition) of the given order.
    pub fn response_magnitude(&self, order: i32) -> Option<RealField<T>> {
        let idx = self.orders.iter().position(|&o| o == order)?;
        Some(self.responses[idx].map(|c| c.norm()))
    }
}
