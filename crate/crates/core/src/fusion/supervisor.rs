//! Bayesian client/impostor supervisor.
//!
//! Each expert's error `z = y − x` is modelled as `N(b, s·α)`. Training
//! estimates the bias `M` and its uncertainty `V` per expert and side; at
//! run time each side calibrates the expert scores, combines them by inverse
//! variance and the two sides are conciliated with [`decide`].

use std::collections::{BTreeMap, BTreeSet};

use super::{combine, decide, ExpertScore, FusionDecision, FusionParams, LabeledScore, Weighting};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Minimum number of training shots per expert and side.
pub const MIN_TRAINING_SHOTS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Client,
    Impostor,
}

/// Trained statistics of one expert on one side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SideModel<T> {
    /// Estimated bias `M`.
    pub bias: T,
    /// Posterior variance of the bias estimate `V`.
    pub variance: T,
    /// Variance scale factor `α`.
    pub alpha: T,
}

/// A calibrated expert opinion `(M′, V′)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Calibrated<T> {
    pub mean: T,
    pub variance: T,
}

impl<T: Scalar> SideModel<T> {
    /// Fits the model to errors `z` with variance factors `s`.
    pub fn fit(errors: &[T], factors: &[T], alpha_floor: T) -> Result<Self> {
        let n = errors.len();
        if n < MIN_TRAINING_SHOTS {
            return Err(Error::TrainingSize {
                needed: MIN_TRAINING_SHOTS,
                found: n,
            });
        }
        if factors.len() != n {
            return Err(Error::Dimension(format!(
                "{n} errors vs {} variance factors",
                factors.len()
            )));
        }
        if let Some(s) = factors.iter().find(|s| !(**s > T::zero() && s.is_finite())) {
            return Err(Error::Invariant(format!(
                "variance factor {s} must be positive and finite"
            )));
        }
        let (mut w, mut wz, mut wzz) = (T::zero(), T::zero(), T::zero());
        for (&z, &s) in errors.iter().zip(factors) {
            w += T::one() / s;
            wz += z / s;
            wzz += z * z / s;
        }
        let raw = (wzz - wz * wz / w) / T::from_count(n - 3);
        if raw < T::zero() {
            log::warn!(
                "negative variance scale {raw} from training scatter, flooring at {alpha_floor}"
            );
        }
        let alpha = if raw < alpha_floor { alpha_floor } else { raw };

        let (mut num, mut den) = (T::zero(), T::zero());
        for (&z, &s) in errors.iter().zip(factors) {
            let var = s * alpha;
            num += z / var;
            den += T::one() / var;
        }
        Ok(Self {
            bias: num / den,
            variance: T::one() / den,
            alpha,
        })
    }

    /// `M′ = x + M`, `V′ = s·α + V`.
    pub fn calibrate(&self, score: T, factor: T) -> Calibrated<T> {
        Calibrated {
            mean: score + self.bias,
            variance: factor * self.alpha + self.variance,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExpertModel<T> {
    pub id: String,
    pub client: SideModel<T>,
    pub impostor: SideModel<T>,
}

impl<T: Scalar> ExpertModel<T> {
    pub fn side(&self, side: Side) -> &SideModel<T> {
        match side {
            Side::Client => &self.client,
            Side::Impostor => &self.impostor,
        }
    }
}

/// Immutable result of training; safe to share between threads.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedSupervisor<T> {
    experts: Vec<ExpertModel<T>>,
    n_client: usize,
    n_impostor: usize,
    weighting: Weighting,
}

impl<T: Scalar> TrainedSupervisor<T> {
    /// Assembles a supervisor from stored parameters.
    pub fn from_parts(
        experts: Vec<ExpertModel<T>>,
        n_client: usize,
        n_impostor: usize,
        weighting: Weighting,
    ) -> Result<Self> {
        if experts.is_empty() {
            return Err(Error::EmptyPanel);
        }
        let mut seen = BTreeSet::new();
        for e in &experts {
            if !seen.insert(e.id.as_str()) {
                return Err(Error::Format(format!("duplicate expert `{}`", e.id)));
            }
            for m in [&e.client, &e.impostor] {
                if !(m.variance > T::zero() && m.alpha > T::zero()) {
                    return Err(Error::Invariant(format!(
                        "expert `{}` has non-positive variance parameters",
                        e.id
                    )));
                }
            }
        }
        Ok(Self {
            experts,
            n_client,
            n_impostor,
            weighting,
        })
    }

    pub fn experts(&self) -> &[ExpertModel<T>] {
        &self.experts
    }

    pub fn expert(&self, id: &str) -> Option<&ExpertModel<T>> {
        self.experts.iter().find(|e| e.id == id)
    }

    pub fn n_client(&self) -> usize {
        self.n_client
    }

    pub fn n_impostor(&self) -> usize {
        self.n_impostor
    }

    /// Weighting the training variances were derived with.
    pub fn weighting(&self) -> Weighting {
        self.weighting
    }
}

type ScoresByExpert<'a, T> = BTreeMap<&'a str, Vec<&'a ExpertScore<T>>>;

/// Groups one side's scores by expert, keyed by shot, checking completeness.
/// Returns the number of shots on the side.
fn collect_side<'a, T: Scalar>(
    records: &'a [LabeledScore<T>],
    genuine: bool,
    experts: &BTreeSet<&'a str>,
) -> Result<(usize, ScoresByExpert<'a, T>)> {
    type Key<'k> = (&'k str, &'k str);
    let mut by_expert: BTreeMap<&str, BTreeMap<Key, &ExpertScore<T>>> = BTreeMap::new();
    let mut shots = BTreeSet::new();
    for r in records.iter().filter(|r| r.genuine == genuine) {
        r.score.validate()?;
        let key = (r.score.claim.as_str(), r.score.shot.as_str());
        shots.insert(key);
        let slot = by_expert.entry(r.score.expert.as_str()).or_default();
        if slot.insert(key, &r.score).is_some() {
            return Err(Error::Format(format!(
                "duplicate score for expert `{}` on shot `{}`",
                r.score.expert, r.score.shot
            )));
        }
    }
    let mut out = BTreeMap::new();
    for &id in experts {
        let per_shot = by_expert.remove(id).unwrap_or_default();
        if let Some((claim, shot)) = shots.iter().find(|s| !per_shot.contains_key(*s)) {
            return Err(Error::IncompletePanel(format!(
                "expert `{id}` has no score for shot `{shot}` of claim `{claim}`"
            )));
        }
        out.insert(id, per_shot.into_values().collect());
    }
    Ok((shots.len(), out))
}

/// Trains the client supervisor on the genuine records and the impostor
/// supervisor on the impostor records.
///
/// Experts are kept in order of first appearance. A shot is identified by
/// its `(claim, shot)` pair; every expert must score every shot of a side, and each side needs at least
/// [`MIN_TRAINING_SHOTS`] shots.
pub fn train_supervisor<T: Scalar>(
    records: &[LabeledScore<T>],
    weighting: Weighting,
    params: &FusionParams<T>,
) -> Result<TrainedSupervisor<T>> {
    params.validate()?;
    let mut order: Vec<&str> = Vec::new();
    for r in records {
        if !order.contains(&r.score.expert.as_str()) {
            order.push(&r.score.expert);
        }
    }
    if order.is_empty() {
        return Err(Error::EmptyPanel);
    }
    let ids: BTreeSet<&str> = order.iter().copied().collect();
    let (n_client, client) = collect_side(records, true, &ids)?;
    let (n_impostor, impostor) = collect_side(records, false, &ids)?;

    let fit = |scores: &[&ExpertScore<T>], y: T| {
        let errors: Vec<T> = scores.iter().map(|e| y - e.score).collect();
        let factors: Vec<T> = scores
            .iter()
            .map(|e| e.variance_factor(weighting, params))
            .collect();
        SideModel::fit(&errors, &factors, params.alpha_floor)
    };
    let experts = order
        .iter()
        .map(|&id| {
            Ok(ExpertModel {
                id: id.to_string(),
                client: fit(&client[id], T::one())?,
                impostor: fit(&impostor[id], T::zero())?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    TrainedSupervisor::from_parts(experts, n_client, n_impostor, weighting)
}

/// Calibrates every expert of a complete panel on one side, in trained order.
pub fn calibrate<T: Scalar>(
    sup: &TrainedSupervisor<T>,
    side: Side,
    panel: &[ExpertScore<T>],
    weighting: Weighting,
    params: &FusionParams<T>,
) -> Result<Vec<Calibrated<T>>> {
    let by_id = index_panel(sup, panel)?;
    Ok(sup
        .experts()
        .iter()
        .map(|e| {
            let x = by_id[e.id.as_str()];
            e.side(side)
                .calibrate(x.score, x.variance_factor(weighting, params))
        })
        .collect())
}

fn index_panel<'a, T: Scalar>(
    sup: &TrainedSupervisor<T>,
    panel: &'a [ExpertScore<T>],
) -> Result<BTreeMap<&'a str, &'a ExpertScore<T>>> {
    let mut by_id = BTreeMap::new();
    for x in panel {
        x.validate()?;
        if sup.expert(&x.expert).is_none() {
            return Err(Error::UnknownExpert(x.expert.clone()));
        }
        if by_id.insert(x.expert.as_str(), x).is_some() {
            return Err(Error::Format(format!(
                "expert `{}` appears twice in one panel",
                x.expert
            )));
        }
    }
    if let Some(e) = sup
        .experts()
        .iter()
        .find(|e| !by_id.contains_key(e.id.as_str()))
    {
        return Err(Error::IncompletePanel(format!(
            "no score from expert `{}`",
            e.id
        )));
    }
    Ok(by_id)
}

/// Fuses one shot's panel. With `adaptive` the per-score variance follows
/// the quality index, otherwise every score gets `s = 1`.
pub fn bayes_fuse<T: Scalar>(
    sup: &TrainedSupervisor<T>,
    panel: &[ExpertScore<T>],
    adaptive: bool,
    params: &FusionParams<T>,
) -> Result<FusionDecision<T>> {
    let weighting = if adaptive {
        Weighting::Quality
    } else {
        Weighting::Uniform
    };
    let side = |side| -> Result<T> {
        let cal = calibrate(sup, side, panel, weighting, params)?;
        let means: Vec<T> = cal.iter().map(|c| c.mean).collect();
        let vars: Vec<T> = cal.iter().map(|c| c.variance).collect();
        combine(&means, &vars)
    };
    Ok(decide(side(Side::Client)?, side(Side::Impostor)?))
}
