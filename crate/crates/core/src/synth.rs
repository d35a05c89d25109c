//! Synthetic ground truth: symmetry test patterns and expert score panels.

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};

use crate::error::{Error, Result};
use crate::field::Image;
use crate::fusion::{score_variance, ExpertScore, LabeledScore};
use crate::scalar::Scalar;

/// Renders a grating whose double-angle orientation is `exp(i(nφ + α))`.
///
/// The stripes are level lines of a harmonic phase `ξ = Re(w^p)` with
/// `w = x + iy` centred on the image and `p = (2 − n)/2`: its squared
/// gradient is `conj(p·w^{p−1})²`, whose angle is `(2 − 2p)φ = nφ`. The
/// plane is rotated by `α/(2 − n)` so that the constant term becomes `α`. Order 2 uses
/// `log w` (concentric rings). Intensities are `½(1 + cos(2πξ/λ))`.
pub fn generate_test_pattern<T: Scalar>(
    order: i32,
    alpha: T,
    size: usize,
    wavelength: T,
) -> Result<Image<T>> {
    if order < -2 {
        return Err(Error::InvalidParameter(format!(
            "pattern order must be >= -2, got {order}"
        )));
    }
    if size < 32 {
        return Err(Error::InvalidParameter(format!(
            "pattern size must be >= 32, got {size}"
        )));
    }
    if !(wavelength >= T::lit(4.0)) || !wavelength.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "wavelength must be >= 4 pixels, got {wavelength}"
        )));
    }
    if !alpha.is_finite() {
        return Err(Error::InvalidParameter("orientation must be finite".into()));
    }
    let centre = T::lit((size as f64 - 1.0) / 2.0);
    let radius = T::from_count(size) / T::lit(4.0);
    let half = T::lit(0.5);
    let tau = T::TAU();

    let phase = |w: Complex<T>| -> T {
        if w.norm() < T::lit(1e-12) {
            return T::zero();
        }
        if order == 2 {
            return radius * (Complex::from_polar(T::one(), -alpha * half) * w.ln()).re;
        }
        let p = T::lit(f64::from(2 - order) / 2.0);
        let theta = alpha / T::lit(f64::from(2 - order));
        let rotated = Complex::from_polar(T::one(), -theta) * w;
        radius.powf(T::one() - p) / p * rotated.powf(p).re
    };
    Ok(Image::from_fn_clamped(size, size, |x, y| {
        let w = Complex::new(T::from_count(x) - centre, T::from_count(y) - centre);
        half * (T::one() + (tau * phase(w) / wavelength).cos())
    }))
}

/// How expert qualities are drawn.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum QualityModel<T> {
    /// Every quality is 1 and noise ignores quality.
    None,
    /// Qualities uniform on `[min, max]`, independent of the noise.
    Independent { min: T, max: T },
    /// Qualities uniform on `[min, max]`; the error variance is scaled by
    /// `1/q²` so low quality means noisy scores.
    Coupled { min: T, max: T },
}

/// Error model of one synthetic expert.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpertSpec<T> {
    pub id: String,
    /// Mean error `b` on genuine shots.
    pub bias: T,
    /// Error standard deviation at normal quality.
    pub sigma: T,
    /// Mean error on impostor shots; defaults to `bias`.
    pub impostor_bias: Option<T>,
}

impl<T: Scalar> ExpertSpec<T> {
    pub fn new(id: impl Into<String>, bias: T, sigma: T) -> Self {
        Self {
            id: id.into(),
            bias,
            sigma,
            impostor_bias: None,
        }
    }
}

/// Shape of a synthetic score panel.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelSpec<T> {
    pub experts: Vec<ExpertSpec<T>>,
    pub claims: usize,
    pub genuine_per_claim: usize,
    pub impostor_per_claim: usize,
    pub quality: QualityModel<T>,
    /// Floor applied to qualities before they scale the variance.
    pub q_floor: T,
}

impl<T: Scalar> PanelSpec<T> {
    pub fn validate(&self) -> Result<()> {
        if self.experts.is_empty() {
            return Err(Error::EmptyPanel);
        }
        if self.claims == 0 || self.genuine_per_claim + self.impostor_per_claim == 0 {
            return Err(Error::InvalidParameter(
                "panel spec produces no shots".into(),
            ));
        }
        for e in &self.experts {
            let bad = |v: T| !v.is_finite();
            if bad(e.bias)
                || bad(e.sigma)
                || e.sigma < T::zero()
                || e.impostor_bias.is_some_and(bad)
            {
                return Err(Error::InvalidParameter(format!(
                    "expert `{}` has an invalid error model",
                    e.id
                )));
            }
        }
        if let QualityModel::Independent { min, max } | QualityModel::Coupled { min, max } =
            self.quality
        {
            if !(min >= T::zero() && min <= max && max.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "quality range [{min}, {max}] is invalid"
                )));
            }
        }
        if !(self.q_floor > T::zero()) {
            return Err(Error::InvalidParameter("q_floor must be > 0".into()));
        }
        Ok(())
    }
}

/// Draws a labelled panel: per claim, `genuine_per_claim` genuine shots then
/// `impostor_per_claim` impostor shots, each scored by every expert.
///
/// Scores are `clamp(y − z, 0, 1)` with `z ~ N(b, σ²·s)`, where `s = 1/q²`
/// under the coupled model and 1 otherwise. Shot qualities are drawn per
/// expert and shot; the claim quality is the top of the quality range.
/// Output is fully determined by `seed`.
pub fn generate_synthetic_panel<T: Scalar>(
    spec: &PanelSpec<T>,
    seed: u64,
) -> Result<Vec<LabeledScore<T>>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let range = match spec.quality {
        QualityModel::None => None,
        QualityModel::Independent { min, max } | QualityModel::Coupled { min, max } => {
            Some((min, max))
        }
    };
    let uniform = range
        .map(|(min, max)| Uniform::new_inclusive(min.as_f64(), max.as_f64()))
        .transpose()
        .map_err(|e| Error::InvalidParameter(format!("quality range: {e}")))?;
    let claim_quality = range.map_or(T::one(), |(_, max)| max);

    let mut out = Vec::with_capacity(
        spec.claims * (spec.genuine_per_claim + spec.impostor_per_claim) * spec.experts.len(),
    );
    let width = (spec.claims.max(1) - 1).to_string().len();
    for c in 0..spec.claims {
        let claim = format!("c{c:0width$}");
        let shots = (0..spec.genuine_per_claim)
            .map(|j| (format!("g{j}"), true))
            .chain((0..spec.impostor_per_claim).map(|j| (format!("i{j}"), false)));
        for (shot, genuine) in shots {
            for e in &spec.experts {
                let q = match &uniform {
                    Some(u) => T::lit(u.sample(&mut rng)),
                    None => T::one(),
                };
                let s = match spec.quality {
                    QualityModel::Coupled { .. } => score_variance(q, spec.q_floor),
                    _ => T::one(),
                };
                let (y, b) = if genuine {
                    (T::one(), e.bias)
                } else {
                    (T::zero(), e.impostor_bias.unwrap_or(e.bias))
                };
                let z = draw_normal(&mut rng, b.as_f64(), (e.sigma * s.sqrt()).as_f64())?;
                let x = (y - T::lit(z)).max(T::zero()).min(T::one());
                out.push(LabeledScore {
                    score: ExpertScore::new(e.id.clone(), shot.clone(), x)
                        .with_claim(claim.clone())
                        .with_quality(q, claim_quality),
                    genuine,
                });
            }
        }
    }
    Ok(out)
}

fn draw_normal<R: Rng>(rng: &mut R, mean: f64, sd: f64) -> Result<f64> {
    Ok(Normal::new(mean, sd)
        .map_err(|e| Error::InvalidParameter(format!("noise model: {e}")))?
        .sample(rng))
}
