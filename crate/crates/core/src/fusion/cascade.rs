//! Quality-triggered cascaded fusion.
//!
//! The primary expert always runs. Expert `i` (1-based, `i ≥ 2`) is only
//! consulted when the certainty `c` is below `τ_{i−1}`; since thresholds
//! strictly decrease, lower certainty switches on progressively more experts.

use std::fmt::Display;

use super::FusionRule;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct CascadeConfig<T> {
    experts: Vec<String>,
    thresholds: Vec<T>,
    rule: FusionRule,
}

impl<T: Scalar> CascadeConfig<T> {
    /// `thresholds` must hold one strictly decreasing entry per expert after
    /// the primary. Infinite thresholds are allowed.
    pub fn new(experts: Vec<String>, thresholds: Vec<T>, rule: FusionRule) -> Result<Self> {
        if experts.is_empty() {
            return Err(Error::EmptyPanel);
        }
        if thresholds.len() + 1 != experts.len() {
            return Err(Error::InvalidParameter(format!(
                "{} experts need {} thresholds, got {}",
                experts.len(),
                experts.len() - 1,
                thresholds.len()
            )));
        }
        if thresholds.iter().any(|t| t.is_nan()) {
            return Err(Error::InvalidParameter("NaN cascade threshold".into()));
        }
        if thresholds.windows(2).any(|w| !(w[0] > w[1])) {
            return Err(Error::InvalidParameter(
                "cascade thresholds must strictly decrease".into(),
            ));
        }
        Ok(Self {
            experts,
            thresholds,
            rule,
        })
    }

    pub fn experts(&self) -> &[String] {
        &self.experts
    }

    pub fn thresholds(&self) -> &[T] {
        &self.thresholds
    }

    pub fn rule(&self) -> FusionRule {
        self.rule
    }

    /// Number of experts that run at certainty `c`.
    pub fn experts_for(&self, c: T) -> usize {
        1 + self.thresholds.iter().take_while(|&&t| c < t).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CascadeOutcome<T> {
    pub score: T,
    /// How many experts were evaluated, primary included.
    pub used: usize,
}

/// Runs the cascade for one trial. `evaluate(i)` is called for the 0-based
/// expert index `i`, in order, only for the experts that are triggered.
pub fn cascaded_fuse<T, E, F>(
    cfg: &CascadeConfig<T>,
    certainty: T,
    mut evaluate: F,
) -> Result<CascadeOutcome<T>>
where
    T: Scalar,
    E: Display,
    F: FnMut(usize) -> Result<T, E>,
{
    if !(certainty >= T::zero()) {
        return Err(Error::InvalidParameter(format!(
            "certainty must be >= 0, got {certainty}"
        )));
    }
    let used = cfg.experts_for(certainty);
    let scores = (0..used)
        .map(|i| {
            evaluate(i).map_err(|e| Error::Evaluator {
                index: i,
                message: e.to_string(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CascadeOutcome {
        score: cfg.rule.apply(&scores)?,
        used,
    })
}

/// `τ₁ = q_best/2`, `τ_i = τ_{i−1}/2`.
pub fn default_thresholds<T: Scalar>(experts: usize, q_best: T) -> Result<Vec<T>> {
    if experts < 2 {
        return Err(Error::InvalidParameter(format!(
            "a cascade needs at least 2 experts, got {experts}"
        )));
    }
    if !(q_best > T::zero()) {
        return Err(Error::InvalidParameter(format!(
            "q_best must be > 0, got {q_best}"
        )));
    }
    let half = T::lit(0.5);
    Ok(
        std::iter::successors(Some(q_best * half), |&t| Some(t * half))
            .take(experts - 1)
            .collect(),
    )
}

/// Expected share of expert executions, `(2 − 2^{1−m})/m`, for certainty
/// uniform on `[0, q_best]` with default thresholds.
pub fn expected_execution_fraction<T: Scalar>(experts: usize) -> Result<T> {
    if experts == 0 {
        return Err(Error::InvalidParameter("expert count must be >= 1".into()));
    }
    let two = T::lit(2.0);
    let m = i32::try_from(experts)
        .map_err(|_| Error::InvalidParameter("expert count too large".into()))?;
    Ok((two - two.powi(1 - m)) / T::from_count(experts))
}
