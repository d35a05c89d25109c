//! `key = value` configuration files.
//!
//! Blank lines and lines starting with `#` are ignored; unknown keys are
//! rejected so that typos do not silently fall back to defaults.

use std::collections::BTreeMap;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::eval::JackknifeMode;
use crate::fusion::{FusionParams, FusionRule};
use crate::quality::{Downsize, QualityConfig};
use crate::scalar::Scalar;
use crate::synth::{ExpertSpec, PanelSpec, QualityModel};

/// Splits a file into `(line number, key, value)` entries, rejecting
/// duplicate keys.
pub fn parse_key_values(text: &str) -> Result<Vec<(usize, String, String)>> {
    let mut seen = BTreeMap::new();
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Format(format!("line {}: expected key = value", i + 1)))?;
        let key = k.trim().to_string();
        if let Some(prev) = seen.insert(key.clone(), i + 1) {
            return Err(Error::Format(format!(
                "line {}: `{key}` already set on line {prev}",
                i + 1
            )));
        }
        out.push((i + 1, key, v.trim().to_string()));
    }
    Ok(out)
}

fn value<V: FromStr>(line: usize, key: &str, v: &str) -> Result<V> {
    v.parse()
        .map_err(|_| Error::Format(format!("line {line}: invalid value `{v}` for `{key}`")))
}

fn real<T: Scalar>(line: usize, key: &str, v: &str) -> Result<T> {
    value::<f64>(line, key, v).map(T::lit)
}

fn list<V: FromStr>(line: usize, key: &str, v: &str) -> Result<Vec<V>> {
    v.split(',').map(|s| value(line, key, s.trim())).collect()
}

fn flag(line: usize, key: &str, v: &str) -> Result<bool> {
    match v.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::Format(format!(
            "line {line}: `{key}` expects true or false, got `{v}`"
        ))),
    }
}

/// Every tunable of the command line tool.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig<T> {
    pub quality: QualityConfig<T>,
    pub fusion: FusionParams<T>,
    pub adaptive: bool,
    /// Explicit cascade thresholds; `None` selects the halving schedule.
    pub cascade_thresholds: Option<Vec<T>>,
    pub cascade_rule: FusionRule,
    /// Expected best quality used by the default cascade schedule.
    pub cascade_q_best: T,
    pub groups: usize,
    pub jackknife: JackknifeMode,
}

impl<T: Scalar> Default for RunConfig<T> {
    fn default() -> Self {
        Self {
            quality: QualityConfig::default(),
            fusion: FusionParams::default(),
            adaptive: true,
            cascade_thresholds: None,
            cascade_rule: FusionRule::Max,
            cascade_q_best: T::lit(2.0),
            groups: 5,
            jackknife: JackknifeMode::Pooled,
        }
    }
}

impl<T: Scalar> FromStr for RunConfig<T> {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (line, key, v) in parse_key_values(text)? {
            let v = v.as_str();
            match key.as_str() {
                "sigma_tensor" => cfg.quality.sigma_tensor = real(line, &key, v)?,
                "sigma_symmetry" => cfg.quality.sigma_symmetry = real(line, &key, v)?,
                "block" => cfg.quality.block = value(line, &key, v)?,
                "orders" => cfg.quality.orders = list(line, &key, v)?,
                "tau_s" => cfg.quality.tau_s = real(line, &key, v)?,
                "downsize" => {
                    cfg.quality.downsize = if v.eq_ignore_ascii_case("auto") {
                        Downsize::Auto
                    } else {
                        Downsize::Factor(value(line, &key, v)?)
                    }
                }
                "degenerate_correlation" => {
                    cfg.quality.degenerate_correlation = real(line, &key, v)?
                }
                "adaptive" => cfg.adaptive = flag(line, &key, v)?,
                "quality_scale" => cfg.fusion.quality_scale = real(line, &key, v)?,
                "q_floor" => cfg.fusion.q_floor = real(line, &key, v)?,
                "alpha_floor" => cfg.fusion.alpha_floor = real(line, &key, v)?,
                "cascade_thresholds" => {
                    cfg.cascade_thresholds = Some(
                        list::<f64>(line, &key, v)?
                            .into_iter()
                            .map(T::lit)
                            .collect(),
                    )
                }
                "cascade_rule" => cfg.cascade_rule = v.parse()?,
                "cascade_q_best" => cfg.cascade_q_best = real(line, &key, v)?,
                "groups" => cfg.groups = value(line, &key, v)?,
                "jackknife" => cfg.jackknife = v.parse()?,
                _ => return Err(Error::Format(format!("line {line}: unknown key `{key}`"))),
            }
        }
        cfg.quality.validate()?;
        cfg.fusion.validate()?;
        Ok(cfg)
    }
}

/// Parses a synthetic panel description:
///
/// ```text
/// claims = 50
/// genuine_per_claim = 9
/// impostor_per_claim = 9
/// quality = coupled        # none | independent | coupled
/// quality_min = 0.25
/// quality_max = 2
/// expert.A.bias = 0.15
/// expert.A.sigma = 0.05
/// expert.A.impostor_bias = 0.1   # optional
/// ```
pub fn parse_panel_spec<T: Scalar>(text: &str) -> Result<PanelSpec<T>> {
    let mut claims = None;
    let (mut genuine, mut impostor) = (None, None);
    let mut model = "none".to_string();
    let (mut q_min, mut q_max) = (T::lit(0.5), T::lit(2.0));
    let mut q_floor = FusionParams::<T>::default().q_floor;
    // id, bias, sigma, impostor bias
    type Partial<T> = (String, Option<T>, Option<T>, Option<T>);
    let mut experts: Vec<Partial<T>> = Vec::new();
    for (line, key, v) in parse_key_values(text)? {
        let v = v.as_str();
        match key.as_str() {
            "claims" => claims = Some(value(line, &key, v)?),
            "genuine_per_claim" => genuine = Some(value(line, &key, v)?),
            "impostor_per_claim" => impostor = Some(value(line, &key, v)?),
            "quality" => model = v.to_ascii_lowercase(),
            "quality_min" => q_min = real(line, &key, v)?,
            "quality_max" => q_max = real(line, &key, v)?,
            "q_floor" => q_floor = real(line, &key, v)?,
            _ => {
                let (id, field) = key
                    .strip_prefix("expert.")
                    .and_then(|rest| rest.rsplit_once('.'))
                    .ok_or_else(|| Error::Format(format!("line {line}: unknown key `{key}`")))?;
                let i = match experts.iter().position(|e| e.0 == id) {
                    Some(i) => i,
                    None => {
                        experts.push((id.to_string(), None, None, None));
                        experts.len() - 1
                    }
                };
                let x = real(line, &key, v)?;
                match field {
                    "bias" => experts[i].1 = Some(x),
                    "sigma" => experts[i].2 = Some(x),
                    "impostor_bias" => experts[i].3 = Some(x),
                    _ => {
                        return Err(Error::Format(format!(
                            "line {line}: unknown expert field `{field}`"
                        )))
                    }
                }
            }
        }
    }
    let need = |v: Option<usize>, k: &str| {
        v.ok_or_else(|| Error::Format(format!("panel spec lacks `{k}`")))
    };
    let quality = match model.as_str() {
        "none" => QualityModel::None,
        "independent" => QualityModel::Independent {
            min: q_min,
            max: q_max,
        },
        "coupled" => QualityModel::Coupled {
            min: q_min,
            max: q_max,
        },
        other => return Err(Error::Format(format!("unknown quality model `{other}`"))),
    };
    let experts = experts
        .into_iter()
        .map(|(id, bias, sigma, impostor_bias)| {
            let need = |v: Option<T>, f: &str| {
                v.ok_or_else(|| Error::Format(format!("expert `{id}` lacks `{f}`")))
            };
            Ok(ExpertSpec {
                bias: need(bias, "bias")?,
                sigma: need(sigma, "sigma")?,
                impostor_bias,
                id: id.clone(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let spec = PanelSpec {
        experts,
        claims: need(claims, "claims")?,
        genuine_per_claim: need(genuine, "genuine_per_claim")?,
        impostor_per_claim: need(impostor, "impostor_per_claim")?,
        quality,
        q_floor,
    };
    spec.validate()?;
    Ok(spec)
}
