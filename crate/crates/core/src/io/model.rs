//! Plain-text supervisor model.
//!
//! ```text
//! symfuse-model v1
//! train.mode=uniform
//! train.nC=40
//! train.nI=40
//! expert.A.MC=1.4999999999999999e-1
//! ...
//! ```

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::fusion::{ExpertModel, SideModel, TrainedSupervisor, Weighting};
use crate::scalar::Scalar;

pub const MODEL_HEADER: &str = "symfuse-model v1";
const FIELDS: [&str; 6] = ["MC", "VC", "alphaC", "MI", "VI", "alphaI"];

fn weighting_name(w: Weighting) -> &'static str {
    match w {
        Weighting::Uniform => "uniform",
        Weighting::Quality => "quality",
    }
}

fn check_id(id: &str) -> Result<()> {
    if id.is_empty() || id.chars().any(|c| c == '=' || c.is_whitespace()) {
        return Err(Error::Format(format!(
            "expert id `{id}` cannot be stored in a model file"
        )));
    }
    Ok(())
}

/// Writes every parameter with 17 significant digits, enough to restore an
/// `f64` exactly.
pub fn write_model<T: Scalar, W: Write>(sup: &TrainedSupervisor<T>, mut out: W) -> Result<()> {
    writeln!(out, "{MODEL_HEADER}")?;
    writeln!(out, "train.mode={}", weighting_name(sup.weighting()))?;
    writeln!(out, "train.nC={}", sup.n_client())?;
    writeln!(out, "train.nI={}", sup.n_impostor())?;
    for e in sup.experts() {
        check_id(&e.id)?;
        let values = [
            e.client.bias,
            e.client.variance,
            e.client.alpha,
            e.impostor.bias,
            e.impostor.variance,
            e.impostor.alpha,
        ];
        for (field, v) in FIELDS.iter().zip(values) {
            writeln!(out, "expert.{}.{field}={:.16e}", e.id, v.as_f64())?;
        }
    }
    Ok(())
}

pub fn read_model<T: Scalar, R: BufRead>(input: R) -> Result<TrainedSupervisor<T>> {
    let mut lines = input.lines();
    match lines.next().transpose()? {
        Some(h) if h.trim() == MODEL_HEADER => {}
        Some(h) if h.starts_with("symfuse-model") => {
            return Err(Error::Unsupported(format!("model version `{}`", h.trim())));
        }
        _ => return Err(Error::Format(format!("missing `{MODEL_HEADER}` header"))),
    }
    let mut order: Vec<String> = Vec::new();
    let mut params: BTreeMap<(String, &'static str), f64> = BTreeMap::new();
    let (mut mode, mut n_c, mut n_i) = (Weighting::Uniform, 0usize, 0usize);
    for (i, line) in lines.enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let at = || format!("model line {}", i + 2);
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Format(format!("{}: expected key=value", at())))?;
        let (key, value) = (key.trim(), value.trim());
        let count = || {
            value
                .parse::<usize>()
                .map_err(|_| Error::Format(format!("{}: bad count `{value}`", at())))
        };
        match key {
            "train.mode" => {
                mode = match value {
                    "uniform" => Weighting::Uniform,
                    "quality" => Weighting::Quality,
                    _ => return Err(Error::Format(format!("{}: unknown mode `{value}`", at()))),
                }
            }
            "train.nC" => n_c = count()?,
            "train.nI" => n_i = count()?,
            _ => {
                let (id, field) = key
                    .strip_prefix("expert.")
                    .and_then(|rest| rest.rsplit_once('.'))
                    .ok_or_else(|| Error::Format(format!("{}: unknown key `{key}`", at())))?;
                let field = *FIELDS.iter().find(|f| **f == field).ok_or_else(|| {
                    Error::Format(format!("{}: unknown parameter `{field}`", at()))
                })?;
                let v: f64 = value
                    .parse()
                    .map_err(|_| Error::Format(format!("{}: bad number `{value}`", at())))?;
                if !order.iter().any(|o| o == id) {
                    order.push(id.to_string());
                }
                if params.insert((id.to_string(), field), v).is_some() {
                    return Err(Error::Format(format!("{}: duplicate key `{key}`", at())));
                }
            }
        }
    }
    let experts = order
        .into_iter()
        .map(|id| {
            let get = |f: &'static str| {
                params
                    .get(&(id.clone(), f))
                    .map(|&v| T::lit(v))
                    .ok_or_else(|| Error::Format(format!("expert `{id}` lacks `{f}`")))
            };
            let client = SideModel {
                bias: get("MC")?,
                variance: get("VC")?,
                alpha: get("alphaC")?,
            };
            let impostor = SideModel {
                bias: get("MI")?,
                variance: get("VI")?,
                alpha: get("alphaI")?,
            };
            Ok(ExpertModel {
                id,
                client,
                impostor,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    TrainedSupervisor::from_parts(experts, n_c, n_i, mode)
}
