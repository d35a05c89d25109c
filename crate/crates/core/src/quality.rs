//! Block-wise fingerprint quality from symmetry responses.
//!
//! Per block of side `b`: `s̄` is the mean total symmetry, `r̄` the mean
//! pairwise Pearson correlation between inhibited response magnitudes, and
//! `q̄ = ½(1 − r̄)·s̄`. Blocks with `s̄ > τ_s` are "interesting"; the overall
//! quality `Q` is the mean `q̄` over them.

use crate::error::{Error, Result};
use crate::field::{Image, RealField};
use crate::scalar::Scalar;
use crate::symmetry::FilterBank;

/// Variances below this make a block's correlation undefined.
pub const VARIANCE_EPS: f64 = 1e-12;

/// Images whose larger side exceeds this are halved before analysis when
/// the downsize policy is [`Downsize::Auto`].
pub const AUTO_DOWNSIZE_LIMIT: usize = 300;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Downsize {
    /// Factor 2 above [`AUTO_DOWNSIZE_LIMIT`] pixels, else 1.
    Auto,
    Factor(usize),
}

impl Downsize {
    pub fn factor_for(self, width: usize, height: usize) -> usize {
        match self {
            Downsize::Auto if width.max(height) > AUTO_DOWNSIZE_LIMIT => 2,
            Downsize::Auto => 1,
            Downsize::Factor(f) => f,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QualityConfig<T> {
    pub sigma_tensor: T,
    pub sigma_symmetry: T,
    pub block: usize,
    pub orders: Vec<i32>,
    /// Interest threshold on block-averaged total symmetry.
    pub tau_s: T,
    pub downsize: Downsize,
    /// `r̄` assigned to blocks where a response magnitude is constant.
    pub degenerate_correlation: T,
}

impl<T: Scalar> Default for QualityConfig<T> {
    fn default() -> Self {
        Self {
            sigma_tensor: T::lit(0.6),
            sigma_symmetry: T::lit(3.0),
            block: 8,
            orders: vec![0, 1],
            tau_s: T::lit(0.1),
            downsize: Downsize::Auto,
            degenerate_correlation: -T::one(),
        }
    }
}

impl<T: Scalar> QualityConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if self.block < 2 {
            return Err(Error::InvalidParameter(format!(
                "block side must be >= 2, got {}",
                self.block
            )));
        }
        if !(self.tau_s >= T::zero()) {
            return Err(Error::InvalidParameter(format!(
                "tau_s must be >= 0, got {}",
                self.tau_s
            )));
        }
        if let Downsize::Factor(0) = self.downsize {
            return Err(Error::InvalidParameter(
                "downsize factor must be >= 1".into(),
            ));
        }
        let d = self.degenerate_correlation;
        if !(d >= -T::one() && d <= T::one()) {
            return Err(Error::InvalidParameter(format!(
                "degenerate correlation {d} outside [-1,1]"
            )));
        }
        Ok(())
    }

    pub fn filter_bank(&self) -> Result<FilterBank<T>> {
        FilterBank::new(self.sigma_tensor, self.sigma_symmetry, &self.orders)
    }
}

/// Per-block values over a grid of `⌈w/b⌉ × ⌈h/b⌉` tiles.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockGrid<V> {
    block: usize,
    cols: usize,
    rows: usize,
    values: Vec<V>,
}

impl<V> BlockGrid<V> {
    pub fn new(block: usize, cols: usize, rows: usize, values: Vec<V>) -> Result<Self> {
        if values.len() != cols * rows {
            return Err(Error::Dimension(format!(
                "{} values for {cols}x{rows} blocks",
                values.len()
            )));
        }
        Ok(Self {
            block,
            cols,
            rows,
            values,
        })
    }

    pub fn block(&self) -> usize {
        self.block
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn values(&self) -> &[V] {
        &self.values
    }

    pub fn get(&self, col: usize, row: usize) -> &V {
        &self.values[row * self.cols + col]
    }

    fn ensure_same_shape<U>(&self, other: &BlockGrid<U>) -> Result<()> {
        if (self.cols, self.rows) == (other.cols, other.rows) {
            Ok(())
        } else {
            Err(Error::Dimension(format!(
                "block grids {}x{} vs {}x{}",
                self.cols, self.rows, other.cols, other.rows
            )))
        }
    }

    fn from_blocks<T>(
        field: &RealField<T>,
        b: usize,
        mut f: impl FnMut(&[(usize, usize)]) -> V,
    ) -> Self {
        let (w, h) = field.dims();
        let (cols, rows) = (w.div_ceil(b), h.div_ceil(b));
        let mut values = Vec::with_capacity(cols * rows);
        let mut coords = Vec::with_capacity(b * b);
        for by in 0..rows {
            for bx in 0..cols {
                coords.clear();
                for y in by * b..((by + 1) * b).min(h) {
                    for x in bx * b..((bx + 1) * b).min(w) {
                        coords.push((x, y));
                    }
                }
                values.push(f(&coords));
            }
        }
        Self {
            block: b,
            cols,
            rows,
            values,
        }
    }
}

fn check_block(b: usize) -> Result<()> {
    if b < 2 {
        return Err(Error::InvalidParameter(format!(
            "block side must be >= 2, got {b}"
        )));
    }
    Ok(())
}

/// Mean of each `b × b` tile; partial edge tiles average their actual pixels.
pub fn block_average<T: Scalar>(field: &RealField<T>, b: usize) -> Result<BlockGrid<T>> {
    check_block(b)?;
    Ok(BlockGrid::from_blocks(field, b, |px| {
        let sum = px.iter().fold(T::zero(), |a, &(x, y)| a + *field.get(x, y));
        sum / T::from_count(px.len())
    }))
}

/// Pearson correlation of two fields inside each tile, clamped to `[-1, 1]`.
///
/// Tiles where either variance falls below [`VARIANCE_EPS`] get `degenerate`.
pub fn block_correlation<T: Scalar>(
    a: &RealField<T>,
    c: &RealField<T>,
    b: usize,
    degenerate: T,
) -> Result<BlockGrid<T>> {
    check_block(b)?;
    a.ensure_same_dims(c, "block correlation")?;
    let eps = T::lit(VARIANCE_EPS);
    Ok(BlockGrid::from_blocks(a, b, |px| {
        let n = T::from_count(px.len());
        let (ma, mc) = px.iter().fold((T::zero(), T::zero()), |(sa, sc), &(x, y)| {
            (sa + *a.get(x, y), sc + *c.get(x, y))
        });
        let (ma, mc) = (ma / n, mc / n);
        let (mut va, mut vc, mut cov) = (T::zero(), T::zero(), T::zero());
        for &(x, y) in px {
            let (da, dc) = (*a.get(x, y) - ma, *c.get(x, y) - mc);
            va += da * da;
            vc += dc * dc;
            cov += da * dc;
        }
        let (va, vc, cov) = (va / n, vc / n, cov / n);
        if va < eps || vc < eps {
            degenerate
        } else {
            (cov / (va * vc).sqrt()).max(-T::one()).min(T::one())
        }
    }))
}

/// `q̄ = ½(1 − r̄)·s̄` per block.
pub fn block_quality<T: Scalar>(r: &BlockGrid<T>, s: &BlockGrid<T>) -> Result<BlockGrid<T>> {
    r.ensure_same_shape(s)?;
    let half = T::lit(0.5);
    let values = r
        .values
        .iter()
        .zip(&s.values)
        .map(|(&r, &s)| {
            if !(r >= -T::one() && r <= T::one()) {
                Err(Error::Invariant(format!("correlation {r} outside [-1,1]")))
            } else {
                Ok(half * (T::one() - r) * s)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    BlockGrid::new(r.block, r.cols, r.rows, values)
}

/// Blocks whose mean total symmetry strictly exceeds `tau_s`.
pub fn interest_mask<T: Scalar>(s: &BlockGrid<T>, tau_s: T) -> Result<BlockGrid<bool>> {
    if !(tau_s >= T::zero()) {
        return Err(Error::InvalidParameter(format!(
            "tau_s must be >= 0, got {tau_s}"
        )));
    }
    BlockGrid::new(
        s.block,
        s.cols,
        s.rows,
        s.values.iter().map(|&v| v > tau_s).collect(),
    )
}

/// Mean of `q̄` over masked blocks, 0 for an empty mask.
pub fn overall_quality<T: Scalar>(q: &BlockGrid<T>, mask: &BlockGrid<bool>) -> Result<T> {
    q.ensure_same_shape(mask)?;
    let (sum, n) = q
        .values
        .iter()
        .zip(&mask.values)
        .filter(|(_, &m)| m)
        .fold((T::zero(), 0usize), |(s, n), (&v, _)| (s + v, n + 1));
    Ok(if n == 0 {
        T::zero()
    } else {
        sum / T::from_count(n)
    })
}

/// Block-wise maps and overall score for one image.
#[derive(Debug, Clone, PartialEq)]
pub struct QualityReport<T> {
    /// Factor the image was downsized by before analysis; block `(c, r)`
    /// covers original pixels `[c·b·f, (c+1)·b·f)` horizontally.
    pub downsize_factor: usize,
    pub symmetry: BlockGrid<T>,
    pub correlation: BlockGrid<T>,
    pub quality: BlockGrid<T>,
    pub interesting: BlockGrid<bool>,
    pub overall: T,
}

/// Full pipeline: downsize, decompose, aggregate.
pub fn assess_fingerprint<T: Scalar>(
    img: &Image<T>,
    cfg: &QualityConfig<T>,
) -> Result<QualityReport<T>> {
    cfg.validate()?;
    let bank = cfg.filter_bank()?;
    assess_with_bank(img, cfg, &bank)
}

/// As [`assess_fingerprint`], reusing a prebuilt filter bank.
pub fn assess_with_bank<T: Scalar>(
    img: &Image<T>,
    cfg: &QualityConfig<T>,
    bank: &FilterBank<T>,
) -> Result<QualityReport<T>> {
    let factor = cfg.downsize.factor_for(img.width(), img.height());
    let small = img.downsize(factor)?;
    let dec = bank.decompose(&small)?;
    let b = cfg.block;
    let symmetry = block_average(&dec.total, b)?;

    let mags: Vec<RealField<T>> = dec.inhibited.iter().map(|f| f.map(|c| c.norm())).collect();
    let correlation = if mags.len() < 2 {
        let (c, r) = (symmetry.cols(), symmetry.rows());
        BlockGrid::new(b, c, r, vec![cfg.degenerate_correlation; c * r])?
    } else {
        let mut pairs = Vec::new();
        for k in 0..mags.len() {
            for l in k + 1..mags.len() {
                pairs.push(block_correlation(
                    &mags[k],
                    &mags[l],
                    b,
                    cfg.degenerate_correlation,
                )?);
            }
        }
        let n = T::from_count(pairs.len());
        let values = (0..symmetry.values().len())
            .map(|i| pairs.iter().fold(T::zero(), |a, g| a + g.values()[i]) / n)
            .collect();
        BlockGrid::new(b, symmetry.cols(), symmetry.rows(), values)?
    };

    let quality = block_quality(&correlation, &symmetry)?;
    let interesting = interest_mask(&symmetry, cfg.tau_s)?;
    let overall = overall_quality(&quality, &interesting)?;
    Ok(QualityReport {
        downsize_factor: factor,
        symmetry,
        correlation,
        quality,
        interesting,
        overall,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Field;

    fn grid(values: &[f64]) -> BlockGrid<f64> {
        BlockGrid::new(8, values.len(), 1, values.to_vec()).unwrap()
    }

    #[test]
    fn block_average_constant_and_spike() {
        let f = Field::from_fn(20, 12, |_, _| 0.7);
        let g = block_average(&f, 8).unwrap();
        assert!(g.values().iter().all(|v| (v - 0.7_f64).abs() < 1e-15));

        let f = Field::from_fn(8, 8, |x, y| if (x, y) == (3, 5) { 64.0 } else { 0.0 });
        let g = block_average(&f, 8).unwrap();
        assert_eq!(g.values(), &[1.0]);
    }

    #[test]
    fn block_average_partial_blocks() {
        let f = Field::from_fn(10, 10, |x, y| if x >= 8 && y >= 8 { 2.0 } else { 0.0 });
        let g = block_average(&f, 8).unwrap();
        assert_eq!((g.cols(), g.rows()), (2, 2));
        assert_eq!(*g.get(1, 1), 2.0);
        assert!(block_average(&f, 1).is_err());
    }

    #[test]
    fn correlation_conventions() {
        let a = Field::from_fn(8, 8, |x, y| (x * 3 + y) as f64 / 40.0);
        let same = block_correlation(&a, &a, 8, 0.0).unwrap();
        assert!((same.values()[0] - 1.0).abs() < 1e-12);
        let anti = a.map(|v| 1.0 - v);
        let neg = block_correlation(&a, &anti, 8, 0.0).unwrap();
        assert!((neg.values()[0] + 1.0).abs() < 1e-12);
        let flat = Field::from_fn(8, 8, |_, _| 0.3);
        assert_eq!(
            block_correlation(&flat, &a, 8, 0.0).unwrap().values()[0],
            0.0
        );
        assert_eq!(
            block_correlation(&flat, &a, 8, -1.0).unwrap().values()[0],
            -1.0
        );
    }

    #[test]
    fn correlation_rejects_mismatched_fields() {
        let a = Field::from_fn(8, 8, |_, _| 0.0);
        let c = Field::from_fn(9, 8, |_, _| 0.0);
        assert!(block_correlation(&a, &c, 8, 0.0).is_err());
    }

    #[test]
    fn quality_arithmetic() {
        let q = block_quality(&grid(&[-1.0, 1.0, 0.0]), &grid(&[0.9, 0.77, 0.6])).unwrap();
        assert!((q.values()[0] - 0.9).abs() < 1e-15);
        assert_eq!(q.values()[1], 0.0);
        assert!((q.values()[2] - 0.3).abs() < 1e-15);
        assert!(matches!(
            block_quality(&grid(&[1.5]), &grid(&[0.5])),
            Err(Error::Invariant(_))
        ));
    }

    #[test]
    fn mask_is_strict() {
        let m = interest_mask(&grid(&[0.0, 0.0]), 0.1).unwrap();
        assert_eq!(m.values(), &[false, false]);
        let m = interest_mask(&grid(&[0.5, 0.2, 0.3]), 0.3).unwrap();
        assert_eq!(m.values(), &[true, false, false]);
        assert!(interest_mask(&grid(&[0.5]), -0.1).is_err());
    }

    #[test]
    fn overall_quality_rules() {
        let none = BlockGrid::new(8, 2, 1, vec![false, false]).unwrap();
        assert_eq!(overall_quality(&grid(&[0.4, 0.9]), &none).unwrap(), 0.0);
        let all = BlockGrid::new(8, 3, 1, vec![true; 3]).unwrap();
        assert!((overall_quality(&grid(&[0.7; 3]), &all).unwrap() - 0.7).abs() < 1e-15);
        let two = BlockGrid::new(8, 3, 1, vec![true, false, true]).unwrap();
        assert!((overall_quality(&grid(&[0.2, 5.0, 0.8]), &two).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn black_image_has_zero_quality() {
        let img = Image::constant(64, 64, 0.0).unwrap();
        let r = assess_fingerprint(&img, &QualityConfig::default()).unwrap();
        assert_eq!(r.overall, 0.0);
        assert!(r.interesting.values().iter().all(|m| !m));
    }

    #[test]
    fn downsize_policy() {
        assert_eq!(Downsize::Auto.factor_for(300, 200), 1);
        assert_eq!(Downsize::Auto.factor_for(301, 200), 2);
        assert_eq!(Downsize::Factor(3).factor_for(10, 10), 3);
    }

    #[test]
    fn config_validation() {
        let mut c = QualityConfig::<f64>::default();
        assert!(c.validate().is_ok());
        c.block = 1;
        assert!(c.validate().is_err());
        let c = QualityConfig::<f64> {
            tau_s: -0.5,
            ..QualityConfig::default()
        };
        assert!(c.validate().is_err());
    }
}
