//! Verification error rates, quality-group analysis and jackknife
//! evaluation of trained fusion.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::fusion::{
    bayes_fuse, train_supervisor, ExpertScore, FusionParams, LabeledScore, Weighting,
};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Genuine,
    Impostor,
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "genuine" | "1" => Ok(Label::Genuine),
            "impostor" | "0" => Ok(Label::Impostor),
            other => Err(Error::Format(format!("unknown label `{other}`"))),
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::Genuine => "genuine",
            Label::Impostor => "impostor",
        })
    }
}

/// One verification attempt.
#[derive(Debug, Clone, PartialEq)]
pub struct Trial<T> {
    pub score: T,
    pub label: Label,
    pub finger: Option<String>,
    pub shot: Option<String>,
}

impl<T> Trial<T> {
    pub fn new(score: T, label: Label) -> Self {
        Self {
            score,
            label,
            finger: None,
            shot: None,
        }
    }

    pub fn genuine(score: T) -> Self {
        Self::new(score, Label::Genuine)
    }

    pub fn impostor(score: T) -> Self {
        Self::new(score, Label::Impostor)
    }

    pub fn with_finger(mut self, finger: impl Into<String>) -> Self {
        self.finger = Some(finger.into());
        self
    }
}

/// Genuine and impostor scores, each sorted ascending.
struct SortedScores<T> {
    genuine: Vec<T>,
    impostor: Vec<T>,
}

impl<T: Scalar> SortedScores<T> {
    fn new(trials: &[Trial<T>]) -> Result<Self> {
        let (mut genuine, mut impostor) = (Vec::new(), Vec::new());
        for t in trials {
            if t.score.is_nan() {
                return Err(Error::Invariant("NaN trial score".into()));
            }
            match t.label {
                Label::Genuine => genuine.push(t.score),
                Label::Impostor => impostor.push(t.score),
            }
        }
        if genuine.is_empty() || impostor.is_empty() {
            return Err(Error::SingleClass);
        }
        genuine.sort_by(by_value);
        impostor.sort_by(by_value);
        Ok(Self { genuine, impostor })
    }

    /// `(#impostor ≥ t, #genuine < t)`.
    fn counts(&self, t: T) -> (usize, usize) {
        let false_accepts = self.impostor.len() - self.impostor.partition_point(|&s| s < t);
        let false_rejects = self.genuine.partition_point(|&s| s < t);
        (false_accepts, false_rejects)
    }

    fn rates(&self, t: T) -> (T, T) {
        let (fa, fr) = self.counts(t);
        (
            T::from_count(fa) / T::from_count(self.impostor.len()),
            T::from_count(fr) / T::from_count(self.genuine.len()),
        )
    }
}

/// Ordering for scalars already checked not to be NaN.
fn by_value<T: Scalar>(a: &T, b: &T) -> Ordering {
    a.partial_cmp(b).unwrap_or(Ordering::Equal)
}

/// `(FAR, FRR)` at `threshold`: FAR counts impostor scores `≥ threshold`,
/// FRR counts genuine scores `< threshold`.
pub fn far_frr<T: Scalar>(trials: &[Trial<T>], threshold: T) -> Result<(T, T)> {
    Ok(SortedScores::new(trials)?.rates(threshold))
}

/// Equal error rate.
///
/// Thresholds are swept over every distinct score plus `+∞`; the one
/// minimizing `|FAR − FRR|` is kept (the lowest on ties) and
/// `(FAR + FRR)/2` is reported there.
pub fn compute_eer<T: Scalar>(trials: &[Trial<T>]) -> Result<T> {
    let sorted = SortedScores::new(trials)?;
    let (n_gen, n_imp) = (sorted.genuine.len() as u128, sorted.impostor.len() as u128);

    let mut candidates: Vec<T> = sorted
        .genuine
        .iter()
        .chain(&sorted.impostor)
        .copied()
        .collect();
    candidates.sort_by(by_value);
    candidates.dedup();
    candidates.push(T::infinity());

    // |FA/nI − FR/nG| compared exactly as |FA·nG − FR·nI|.
    let mut best: Option<(u128, T)> = None;
    for t in candidates {
        let (fa, fr) = sorted.counts(t);
        let gap = (fa as u128 * n_gen).abs_diff(fr as u128 * n_imp);
        if best.is_none_or(|(g, _)| gap < g) {
            best = Some((gap, t));
        }
    }
    let (_, t) = best.expect("at least the infinite threshold");
    let (far, frr) = sorted.rates(t);
    Ok((far + frr) * T::lit(0.5))
}

/// One quality group.
#[derive(Debug, Clone, PartialEq)]
pub struct QualityGroup<T> {
    pub label: String,
    pub fingers: Vec<String>,
    pub mean_quality: T,
}

/// Fingers split into groups of increasing quality.
#[derive(Debug, Clone, PartialEq)]
pub struct QualityPartition<T> {
    pub groups: Vec<QualityGroup<T>>,
}

impl<T: Scalar> QualityPartition<T> {
    /// Index of the group holding `finger`.
    pub fn group_of(&self, finger: &str) -> Option<usize> {
        self.groups
            .iter()
            .position(|g| g.fingers.iter().any(|f| f == finger))
    }
}

/// Roman numeral group label (`1 → I`, `5 → V`).
pub fn group_label(index: usize) -> String {
    const NUMERALS: [(usize, &str); 13] = [
        (1000, "M"),
        (900, "CM"),
        (500, "D"),
        (400, "CD"),
        (100, "C"),
        (90, "XC"),
        (50, "L"),
        (40, "XL"),
        (10, "X"),
        (9, "IX"),
        (5, "V"),
        (4, "IV"),
        (1, "I"),
    ];
    let mut n = index;
    let mut out = String::new();
    for (value, digits) in NUMERALS {
        while n >= value {
            out.push_str(digits);
            n -= value;
        }
    }
    out
}

/// Mean genuine-trial quality per finger, sorted by finger id.
pub fn mean_genuine_quality<'a, T: Scalar>(
    items: impl IntoIterator<Item = (&'a str, T, Label)>,
) -> Vec<(String, T)> {
    let mut acc: BTreeMap<&str, (T, usize)> = BTreeMap::new();
    for (finger, q, label) in items {
        if label == Label::Genuine {
            let e = acc.entry(finger).or_insert((T::zero(), 0));
            e.0 += q;
            e.1 += 1;
        }
    }
    acc.into_iter()
        .map(|(f, (sum, n))| (f.to_string(), sum / T::from_count(n)))
        .collect()
}

/// Sorts fingers by ascending quality (finger id breaks ties) and cuts them
/// into `k` contiguous groups of `⌊n/k⌋`, handing the remainder out one per
/// group starting from the lowest.
pub fn quality_partition<T: Scalar>(
    fingers: &[(String, T)],
    k: usize,
) -> Result<QualityPartition<T>> {
    let n = fingers.len();
    if k == 0 || k > n {
        return Err(Error::InvalidParameter(format!(
            "cannot split {n} fingers into {k} groups"
        )));
    }
    if fingers.iter().any(|(_, q)| q.is_nan()) {
        return Err(Error::Invariant("NaN finger quality".into()));
    }
    let unique: BTreeSet<&str> = fingers.iter().map(|(f, _)| f.as_str()).collect();
    if unique.len() != n {
        return Err(Error::Format("duplicate finger id in quality list".into()));
    }
    let mut order: Vec<&(String, T)> = fingers.iter().collect();
    order.sort_by(|a, b| by_value(&a.1, &b.1).then_with(|| a.0.cmp(&b.0)));

    let (base, extra) = (n / k, n % k);
    let mut rest = order.as_slice();
    let groups = (0..k)
        .map(|g| {
            let size = base + usize::from(g < extra);
            let (chunk, tail) = rest.split_at(size);
            rest = tail;
            let sum = chunk.iter().fold(T::zero(), |a, (_, q)| a + *q);
            QualityGroup {
                label: group_label(g + 1),
                fingers: chunk.iter().map(|(f, _)| f.clone()).collect(),
                mean_quality: sum / T::from_count(size),
            }
        })
        .collect();
    Ok(QualityPartition { groups })
}

/// Error rate of one quality group.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupEer<T> {
    pub label: String,
    pub n_genuine: usize,
    pub n_impostor: usize,
    /// `None` when the group lacks one of the two classes.
    pub eer: Option<T>,
}

/// EER restricted to the trials of each group. Every trial needs a finger
/// that belongs to the partition.
pub fn per_group_eer<T: Scalar>(
    partition: &QualityPartition<T>,
    trials: &[Trial<T>],
) -> Result<Vec<GroupEer<T>>> {
    let mut buckets: Vec<Vec<Trial<T>>> = vec![Vec::new(); partition.groups.len()];
    for t in trials {
        let finger = t
            .finger
            .as_deref()
            .ok_or_else(|| Error::Format("trial without finger id".into()))?;
        let g = partition
            .group_of(finger)
            .ok_or_else(|| Error::Format(format!("finger `{finger}` is not in the partition")))?;
        buckets[g].push(t.clone());
    }
    partition
        .groups
        .iter()
        .zip(buckets)
        .map(|(g, b)| {
            let n_genuine = b.iter().filter(|t| t.label == Label::Genuine).count();
            let eer = match compute_eer(&b) {
                Ok(e) => Some(e),
                Err(Error::SingleClass) => None,
                Err(e) => return Err(e),
            };
            Ok(GroupEer {
                label: g.label.clone(),
                n_genuine,
                n_impostor: b.len() - n_genuine,
                eer,
            })
        })
        .collect()
}

/// How fold results are aggregated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum JackknifeMode {
    /// Pool the test scores of every fold, then compute one EER.
    #[default]
    Pooled,
    /// Average the EERs of the folds that contain both classes.
    FoldMean,
}

impl FromStr for JackknifeMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "pooled" => Ok(JackknifeMode::Pooled),
            "fold-mean" | "foldmean" | "mean" => Ok(JackknifeMode::FoldMean),
            other => Err(Error::InvalidParameter(format!(
                "unknown jackknife mode `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JackknifeOptions<T> {
    pub mode: JackknifeMode,
    /// Variance weighting used while training each fold.
    pub training: Weighting,
    /// Quality-adaptive fusion of the held-out panels.
    pub adaptive: bool,
    pub params: FusionParams<T>,
}

impl<T: Scalar> Default for JackknifeOptions<T> {
    fn default() -> Self {
        Self {
            mode: JackknifeMode::Pooled,
            training: Weighting::Uniform,
            adaptive: false,
            params: FusionParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JackknifeReport<T> {
    pub eer: T,
    pub folds: usize,
    /// Fused held-out trials of every fold, finger set to the claim.
    pub trials: Vec<Trial<T>>,
}

/// Leave-one-claim-out evaluation of Bayesian fusion.
///
/// For every distinct claim the supervisor is trained on all records of the
/// other claims, and each held-out panel (records sharing claim, shot and
/// label) is fused.
pub fn jackknife_eer<T: Scalar>(
    records: &[LabeledScore<T>],
    options: &JackknifeOptions<T>,
) -> Result<JackknifeReport<T>> {
    let claims: BTreeSet<&str> = records.iter().map(|r| r.score.claim.as_str()).collect();
    if claims.len() < 2 {
        return Err(Error::InvalidParameter(
            "jackknife needs at least two claims".into(),
        ));
    }
    let mut trials = Vec::new();
    let mut fold_eers = Vec::new();
    for &held in &claims {
        let training: Vec<LabeledScore<T>> = records
            .iter()
            .filter(|r| r.score.claim != held)
            .cloned()
            .collect();
        let sup = train_supervisor(&training, options.training, &options.params)?;

        let mut panels: BTreeMap<(&str, bool), Vec<ExpertScore<T>>> = BTreeMap::new();
        for r in records.iter().filter(|r| r.score.claim == held) {
            panels
                .entry((r.score.shot.as_str(), r.genuine))
                .or_default()
                .push(r.score.clone());
        }
        let fold: Vec<Trial<T>> = panels
            .into_iter()
            .map(|((shot, genuine), panel)| {
                let d = bayes_fuse(&sup, &panel, options.adaptive, &options.params)?;
                let label = if genuine {
                    Label::Genuine
                } else {
                    Label::Impostor
                };
                Ok(Trial {
                    score: d.score,
                    label,
                    finger: Some(held.to_string()),
                    shot: Some(shot.to_string()),
                })
            })
            .collect::<Result<_>>()?;
        if options.mode == JackknifeMode::FoldMean {
            match compute_eer(&fold) {
                Ok(e) => fold_eers.push(e),
                Err(Error::SingleClass) => {}
                Err(e) => return Err(e),
            }
        }
        trials.extend(fold);
    }
    let eer = match options.mode {
        JackknifeMode::Pooled => compute_eer(&trials)?,
        JackknifeMode::FoldMean => {
            if fold_eers.is_empty() {
                return Err(Error::SingleClass);
            }
            fold_eers.iter().fold(T::zero(), |a, &b| a + b) / T::from_count(fold_eers.len())
        }
    };
    Ok(JackknifeReport {
        eer,
        folds: claims.len(),
        trials,
    })
}
