//! Multi-expert score fusion.
//!
//! Three families are provided: the trained Bayesian supervisor
//! ([`supervisor`]), quality-triggered cascades ([`cascade`]) and the plain
//! SUM/MAX rules in this module. Scores live in `[0, 1]`; qualities are on
//! the supervisor scale `[0, q_max]` where 1 means normal quality.

pub mod cascade;
pub mod supervisor;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub use cascade::{
    cascaded_fuse, default_thresholds, expected_execution_fraction, CascadeConfig, CascadeOutcome,
};
pub use supervisor::{
    bayes_fuse, calibrate, train_supervisor, Calibrated, ExpertModel, Side, SideModel,
    TrainedSupervisor,
};

/// Tunables shared by the quality-aware fusion paths.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FusionParams<T> {
    /// Lower bound on the quality index before inversion.
    pub q_floor: T,
    /// Lower bound on trained variance scale factors.
    pub alpha_floor: T,
    /// Multiplier taking a raw image quality in `[0, 1]` to the supervisor scale.
    pub quality_scale: T,
}

impl<T: Scalar> Default for FusionParams<T> {
    fn default() -> Self {
        Self {
            q_floor: T::lit(0.05),
            alpha_floor: T::lit(1e-8),
            quality_scale: T::lit(2.0),
        }
    }
}

impl<T: Scalar> FusionParams<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.q_floor > T::zero()) {
            return Err(Error::InvalidParameter(format!(
                "q_floor must be > 0, got {}",
                self.q_floor
            )));
        }
        if !(self.alpha_floor > T::zero()) {
            return Err(Error::InvalidParameter(format!(
                "alpha_floor must be > 0, got {}",
                self.alpha_floor
            )));
        }
        if !(self.quality_scale > T::zero()) {
            return Err(Error::InvalidParameter(format!(
                "quality_scale must be > 0, got {}",
                self.quality_scale
            )));
        }
        Ok(())
    }

    /// Maps an overall image quality `Q ∈ [0, 1]` onto the supervisor scale.
    pub fn supervisor_quality(&self, raw: T) -> T {
        raw * self.quality_scale
    }
}

/// One expert's opinion on one shot.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpertScore<T> {
    pub expert: String,
    pub shot: String,
    /// Claimed identity; together with `shot` it identifies one trial.
    pub claim: String,
    pub score: T,
    /// Quality of the presented shot; `None` when the expert gives none.
    pub quality: Option<T>,
    /// Average quality of the samples enrolled for the claimed identity.
    pub claim_quality: Option<T>,
}

impl<T: Scalar> ExpertScore<T> {
    pub fn new(expert: impl Into<String>, shot: impl Into<String>, score: T) -> Self {
        Self {
            expert: expert.into(),
            shot: shot.into(),
            claim: String::new(),
            score,
            quality: None,
            claim_quality: None,
        }
    }

    pub fn with_claim(mut self, claim: impl Into<String>) -> Self {
        self.claim = claim.into();
        self
    }

    pub fn with_quality(mut self, quality: T, claim_quality: T) -> Self {
        self.quality = Some(quality);
        self.claim_quality = Some(claim_quality);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.score >= T::zero() && self.score <= T::one()) {
            return Err(Error::Invariant(format!(
                "score {} of expert `{}` on shot `{}` outside [0,1]",
                self.score, self.expert, self.shot
            )));
        }
        for q in [self.quality, self.claim_quality].into_iter().flatten() {
            if !(q >= T::zero()) {
                return Err(Error::Invariant(format!(
                    "negative quality {q} for expert `{}`",
                    self.expert
                )));
            }
        }
        Ok(())
    }

    /// Quality index `min(Q, Q_claim)`, or whichever of the two is present.
    pub fn quality_index(&self) -> Option<T> {
        match (self.quality, self.claim_quality) {
            (Some(q), Some(c)) => Some(quality_index(q, c)),
            (Some(q), None) | (None, Some(q)) => Some(q),
            (None, None) => None,
        }
    }

    /// Variance factor `s` for this score under the given weighting.
    pub fn variance_factor(&self, weighting: Weighting, params: &FusionParams<T>) -> T {
        match (weighting, self.quality_index()) {
            (Weighting::Quality, Some(q)) => score_variance(q, params.q_floor),
            _ => T::one(),
        }
    }
}

/// An [`ExpertScore`] with known ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledScore<T> {
    pub score: ExpertScore<T>,
    pub genuine: bool,
}

impl<T: Scalar> LabeledScore<T> {
    /// True authenticity `y ∈ {0, 1}`.
    pub fn truth(&self) -> T {
        if self.genuine {
            T::one()
        } else {
            T::zero()
        }
    }
}

/// How per-score variances are derived.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Weighting {
    /// `s = 1` for every score (non-adaptive).
    Uniform,
    /// `s = 1/max(q, q_floor)²` from the quality index (adaptive).
    Quality,
}

/// `q = min(Q, Q_claim)`.
pub fn quality_index<T: Scalar>(quality: T, claim_quality: T) -> T {
    quality.min(claim_quality)
}

/// `s = 1/q²` with `q` floored at `q_floor`.
pub fn score_variance<T: Scalar>(q: T, q_floor: T) -> T {
    let q = q.max(q_floor);
    T::one() / (q * q)
}

/// Inverse-variance weighted mean.
pub fn combine<T: Scalar>(means: &[T], variances: &[T]) -> Result<T> {
    if means.is_empty() {
        return Err(Error::EmptyPanel);
    }
    if means.len() != variances.len() {
        return Err(Error::Dimension(format!(
            "{} means vs {} variances",
            means.len(),
            variances.len()
        )));
    }
    let (mut num, mut den) = (T::zero(), T::zero());
    for (&m, &v) in means.iter().zip(variances) {
        if !(v > T::zero()) {
            return Err(Error::Invariant(format!(
                "non-positive calibrated variance {v}"
            )));
        }
        num += m / v;
        den += T::one() / v;
    }
    Ok(num / den)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    Client,
    Impostor,
}

/// Outcome of conciliating the client and impostor supervisors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FusionDecision<T> {
    pub score: T,
    pub branch: Branch,
    pub client: T,
    pub impostor: T,
}

/// Picks the supervisor closer to its ideal: client iff `|1 − M″_C| − |M″_I| < 0`.
///
/// Differences within a few ulps of zero count as ties, so that decimal
/// inputs such as `(0.8, 0.2)` resolve to the impostor branch regardless of
/// binary rounding.
pub fn decide<T: Scalar>(client: T, impostor: T) -> FusionDecision<T> {
    let tie = T::epsilon() * T::lit(8.0);
    let branch = if (T::one() - client).abs() - impostor.abs() < -tie {
        Branch::Client
    } else {
        Branch::Impostor
    };
    let score = match branch {
        Branch::Client => client,
        Branch::Impostor => impostor,
    };
    FusionDecision {
        score,
        branch,
        client,
        impostor,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FusionRule {
    Sum,
    Max,
}

impl FusionRule {
    pub fn apply<T: Scalar>(self, scores: &[T]) -> Result<T> {
        match self {
            FusionRule::Sum => fuse_sum(scores),
            FusionRule::Max => fuse_max(scores),
        }
    }
}

impl std::str::FromStr for FusionRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sum" => Ok(FusionRule::Sum),
            "max" => Ok(FusionRule::Max),
            other => Err(Error::InvalidParameter(format!(
                "unknown fusion rule `{other}`"
            ))),
        }
    }
}

impl std::fmt::Display for FusionRule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            FusionRule::Sum => "sum",
            FusionRule::Max => "max",
        })
    }
}

/// SUM rule: arithmetic mean of the scores.
pub fn fuse_sum<T: Scalar>(scores: &[T]) -> Result<T> {
    if scores.is_empty() {
        return Err(Error::EmptyPanel);
    }
    Ok(scores.iter().fold(T::zero(), |a, &b| a + b) / T::from_count(scores.len()))
}

/// MAX rule.
pub fn fuse_max<T: Scalar>(scores: &[T]) -> Result<T> {
    scores
        .iter()
        .copied()
        .reduce(|a, b| a.max(b))
        .ok_or(Error::EmptyPanel)
}
