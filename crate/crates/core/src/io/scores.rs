//! Score interchange CSV.
//!
//! ```text
//! # symfuse-scores v1
//! expert_id,shot_id,claim_id,score,quality,claim_quality,label
//! A,g0,c01,0.93,1.1,1.2,genuine
//! ```
//!
//! `label` is `genuine`, `impostor` or `unknown` (empty is unknown). Lines
//! starting with `#` are comments.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::eval::{Label, Trial};
use crate::fusion::{ExpertScore, LabeledScore};
use crate::scalar::Scalar;

pub const SCORES_VERSION_LINE: &str = "# symfuse-scores v1";
pub const SCORES_HEADER: [&str; 7] = [
    "expert_id",
    "shot_id",
    "claim_id",
    "score",
    "quality",
    "claim_quality",
    "label",
];

/// One CSV row.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreRecord<T> {
    pub score: ExpertScore<T>,
    pub label: Option<Label>,
}

impl<T: Scalar> ScoreRecord<T> {
    pub fn labeled(&self) -> Result<LabeledScore<T>> {
        let label = self.label.ok_or_else(|| {
            Error::Format(format!(
                "record of expert `{}` on shot `{}` has no label",
                self.score.expert, self.score.shot
            ))
        })?;
        Ok(LabeledScore {
            score: self.score.clone(),
            genuine: label == Label::Genuine,
        })
    }

    pub fn trial(&self) -> Result<Trial<T>> {
        let l = self.labeled()?;
        Ok(Trial {
            score: l.score.score,
            label: if l.genuine {
                Label::Genuine
            } else {
                Label::Impostor
            },
            finger: Some(self.score.claim.clone()),
            shot: Some(self.score.shot.clone()),
        })
    }
}

impl<T: Scalar> From<LabeledScore<T>> for ScoreRecord<T> {
    fn from(l: LabeledScore<T>) -> Self {
        let label = Some(if l.genuine {
            Label::Genuine
        } else {
            Label::Impostor
        });
        Self {
            score: l.score,
            label,
        }
    }
}

/// Accepted range of the `score` column.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScoreRange {
    /// Expert scores: must lie in `[0, 1]`.
    Unit,
    /// Any finite value, e.g. conciliated fusion outputs.
    Finite,
}

#[derive(Debug, Deserialize)]
struct Row {
    expert_id: String,
    shot_id: String,
    claim_id: String,
    score: f64,
    quality: f64,
    claim_quality: f64,
    label: String,
}

fn parse_label(s: &str) -> Result<Option<Label>> {
    match s.trim() {
        "" => Ok(None),
        l if l.eq_ignore_ascii_case("unknown") => Ok(None),
        l => l.parse().map(Some),
    }
}

/// Reads score records, rejecting out-of-range values instead of clamping.
pub fn read_scores<T: Scalar, R: Read>(input: R, range: ScoreRange) -> Result<Vec<ScoreRecord<T>>> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(input);
    let headers = reader.headers().map_err(csv_err)?.clone();
    if headers.iter().ne(SCORES_HEADER) {
        return Err(Error::Format(format!(
            "score CSV header must be `{}`, got `{}`",
            SCORES_HEADER.join(","),
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut out = Vec::new();
    for (i, row) in reader.deserialize::<Row>().enumerate() {
        let line = i + 2;
        let row = row.map_err(csv_err)?;
        let ok = match range {
            ScoreRange::Unit => (0.0..=1.0).contains(&row.score),
            ScoreRange::Finite => row.score.is_finite(),
        };
        if !ok {
            return Err(Error::Format(format!(
                "row {line}: score {} out of range",
                row.score
            )));
        }
        for (name, q) in [
            ("quality", row.quality),
            ("claim_quality", row.claim_quality),
        ] {
            if !(q >= 0.0 && q.is_finite()) {
                return Err(Error::Format(format!(
                    "row {line}: {name} {q} must be a finite value >= 0"
                )));
            }
        }
        if row.expert_id.is_empty() || row.shot_id.is_empty() {
            return Err(Error::Format(format!(
                "row {line}: empty expert or shot id"
            )));
        }
        let label =
            parse_label(&row.label).map_err(|e| Error::Format(format!("row {line}: {e}")))?;
        out.push(ScoreRecord {
            score: ExpertScore::new(row.expert_id, row.shot_id, T::lit(row.score))
                .with_claim(row.claim_id)
                .with_quality(T::lit(row.quality), T::lit(row.claim_quality)),
            label,
        });
    }
    Ok(out)
}

/// Writes records with the version line and header. Missing qualities are
/// written as 1 (normal quality).
pub fn write_scores<T: Scalar, W: Write>(mut out: W, records: &[ScoreRecord<T>]) -> Result<()> {
    writeln!(out, "{SCORES_VERSION_LINE}")?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SCORES_HEADER).map_err(csv_err)?;
    for r in records {
        let s = &r.score;
        let q = |v: Option<T>| v.unwrap_or_else(T::one).to_string();
        let label = r
            .label
            .map_or_else(|| "unknown".to_string(), |l| l.to_string());
        w.write_record([
            s.expert.as_str(),
            s.shot.as_str(),
            s.claim.as_str(),
            &s.score.to_string(),
            &q(s.quality),
            &q(s.claim_quality),
            &label,
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// All records of one trial: same claim, shot and label.
#[derive(Debug, Clone, PartialEq)]
pub struct Panel<T> {
    pub claim: String,
    pub shot: String,
    pub label: Option<Label>,
    pub scores: Vec<ExpertScore<T>>,
}

impl<T: Scalar> Panel<T> {
    /// Trial certainty: the lowest quality index over the panel.
    pub fn certainty(&self) -> T {
        self.scores
            .iter()
            .map(|s| s.quality_index().unwrap_or_else(T::one))
            .reduce(|a, b| a.min(b))
            .unwrap_or_else(T::one)
    }
}

/// Groups records into panels, in order of first appearance.
pub fn group_panels<T: Scalar>(records: &[ScoreRecord<T>]) -> Vec<Panel<T>> {
    let mut index: BTreeMap<(&str, &str, Option<Label>), usize> = BTreeMap::new();
    let mut panels: Vec<Panel<T>> = Vec::new();
    for r in records {
        let key = (r.score.claim.as_str(), r.score.shot.as_str(), r.label);
        let i = *index.entry(key).or_insert_with(|| {
            panels.push(Panel {
                claim: key.0.into(),
                shot: key.1.into(),
                label: key.2,
                scores: Vec::new(),
            });
            panels.len() - 1
        });
        panels[i].scores.push(r.score.clone());
    }
    panels
}

pub(crate) fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Format(format!("CSV: {other:?}")),
    }
}
