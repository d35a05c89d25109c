//! Row-major 2-D containers.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// A dense row-major grid of values.
#[derive(Debug, Clone, PartialEq)]
pub struct Field<V> {
    width: usize,
    height: usize,
    data: Vec<V>,
}

impl<V> Field<V> {
    pub fn new(width: usize, height: usize, data: Vec<V>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Dimension(format!("empty field {width}x{height}")));
        }
        if data.len() != width * height {
            return Err(Error::Dimension(format!(
                "{} values for a {width}x{height} field",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> V) -> Self {
        assert!(width > 0 && height > 0, "empty field");
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn values(&self) -> &[V] {
        &self.data
    }

    pub fn into_values(self) -> Vec<V> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> &V {
        &self.data[y * self.width + x]
    }

    pub fn map<U>(&self, f: impl FnMut(&V) -> U) -> Field<U> {
        Field {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(f).collect(),
        }
    }

    pub(crate) fn same_dims<U>(&self, other: &Field<U>) -> bool {
        self.dims() == other.dims()
    }

    pub(crate) fn ensure_same_dims<U>(&self, other: &Field<U>, what: &str) -> Result<()> {
        if self.same_dims(other) {
            Ok(())
        } else {
            Err(Error::Dimension(format!(
                "{what}: {}x{} vs {}x{}",
                self.width, self.height, other.width, other.height
            )))
        }
    }
}

/// Complex per-pixel values (orientation tensor, symmetry responses).
pub type ComplexField<T> = Field<Complex<T>>;

/// Real per-pixel values (magnitudes, total symmetry).
pub type RealField<T> = Field<T>;

/// A grayscale image with intensities in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Image<T> {
    pixels: Field<T>,
}

impl<T: Scalar> Image<T> {
    pub fn new(width: usize, height: usize, intensities: Vec<T>) -> Result<Self> {
        let pixels = Field::new(width, height, intensities)?;
        if let Some(bad) = pixels
            .values()
            .iter()
            .position(|v| !(*v >= T::zero() && *v <= T::one()))
        {
            return Err(Error::Invariant(format!(
                "intensity {} at index {bad} outside [0,1]",
                pixels.values()[bad]
            )));
        }
        Ok(Self { pixels })
    }

    /// Builds an image from a closure, clamping every sample into `[0, 1]`.
    pub fn from_fn_clamped(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> T,
    ) -> Self {
        let pixels = Field::from_fn(width, height, |x, y| {
            let v = f(x, y);
            if v.is_nan() {
                T::zero()
            } else {
                v.max(T::zero()).min(T::one())
            }
        });
        Self { pixels }
    }

    pub fn constant(width: usize, height: usize, value: T) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.pixels.width()
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.pixels.height()
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> T {
        *self.pixels.get(x, y)
    }

    pub fn pixels(&self) -> &Field<T> {
        &self.pixels
    }

    /// Reduces resolution by averaging `factor`×`factor` tiles; edge tiles
    /// average only the pixels they cover.
    pub fn downsize(&self, factor: usize) -> Result<Self> {
        if factor == 0 {
            return Err(Error::InvalidParameter(
                "downsize factor must be >= 1".into(),
            ));
        }
        if factor == 1 {
            return Ok(self.clone());
        }
        let (w, h) = self.pixels.dims();
        let (dw, dh) = (w.div_ceil(factor), h.div_ceil(factor));
        let pixels = Field::from_fn(dw, dh, |bx, by| {
            let (x0, y0) = (bx * factor, by * factor);
            let (x1, y1) = ((x0 + factor).min(w), (y0 + factor).min(h));
            let mut acc = T::zero();
            for y in y0..y1 {
                for x in x0..x1 {
                    acc += self.get(x, y);
                }
            }
            (acc / T::from_count((x1 - x0) * (y1 - y0))).min(T::one())
        });
        Ok(Self { pixels })
    }

    /// Rotates the image by 90° counter-clockwise in display orientation.
    pub fn rotate90(&self) -> Self {
        let (w, h) = self.pixels.dims();
        let pixels = Field::from_fn(h, w, |x, y| self.get(w - 1 - y, x));
        Self { pixels }
    }
}
