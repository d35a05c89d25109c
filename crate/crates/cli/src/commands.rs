use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use symfuse::eval::{self, GroupEer, JackknifeMode, JackknifeOptions, Label, Trial};
use symfuse::fusion::{self, CascadeConfig, ExpertScore, FusionRule, LabeledScore, Weighting};
use symfuse::io::{self, Panel, RunConfig, ScoreRange, ScoreRecord};
use symfuse::{quality, synth, Error, TrainedSupervisor};

use crate::{
    CascadeCommand, Cli, Command, EvalCommand, Failure, FuseCommand, FuseMode, JackknifeArg,
    SynthCommand, TrainWeighting,
};

type Outcome = Result<(), Failure>;

/// Runs one command; report lines go to `out`.
pub fn run(cli: Cli, out: &mut dyn Write) -> Outcome {
    let cfg = match &cli.config {
        Some(path) => fs::read_to_string(path).map_err(Error::from)?.parse()?,
        None => RunConfig::default(),
    };
    match cli.command {
        Command::Quality { image, map } => assess(&cfg, &image, map.as_deref(), out),
        Command::Synth(c) => synthesize(c),
        Command::Fuse(c) => fuse(&cfg, c),
        Command::Cascade(c) => cascade(&cfg, c, out),
        Command::Eval(c) => evaluate(&cfg, c, out),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, Error> {
    Ok(BufWriter::new(File::create(path)?))
}

fn read_records(path: &Path, range: ScoreRange) -> Result<Vec<ScoreRecord<f64>>, Error> {
    io::read_scores(BufReader::new(File::open(path)?), range)
}

fn labeled(records: &[ScoreRecord<f64>]) -> Result<Vec<LabeledScore<f64>>, Error> {
    records.iter().map(ScoreRecord::labeled).collect()
}

/// Expert ids in order of first appearance.
fn expert_ids(records: &[ScoreRecord<f64>]) -> Vec<String> {
    let mut ids: Vec<String> = Vec::new();
    for r in records {
        if !ids.contains(&r.score.expert) {
            ids.push(r.score.expert.clone());
        }
    }
    ids
}

fn assess(cfg: &RunConfig<f64>, image: &Path, map: Option<&Path>, out: &mut dyn Write) -> Outcome {
    let img = io::load_image::<f64>(image)?;
    let report = quality::assess_fingerprint(&img, &cfg.quality)?;
    if let Some(path) = map {
        let mut w = create(path)?;
        io::write_quality_map(&mut w, &report)?;
        w.flush().map_err(Error::from)?;
    }
    writeln!(out, "Q={:.6}", report.overall).map_err(Error::from)?;
    Ok(())
}

fn synthesize(cmd: SynthCommand) -> Outcome {
    match cmd {
        SynthCommand::Pattern {
            order,
            alpha,
            size,
            wavelength,
            out,
        } => {
            let img = synth::generate_test_pattern(order, alpha, size, wavelength)?;
            let mut w = create(&out)?;
            let png = out
                .extension()
                .is_some_and(|e| e.eq_ignore_ascii_case("png"));
            if png {
                io::write_png(&img, &mut w)?;
            } else {
                io::write_pgm(&img, &mut w)?;
            }
            w.flush().map_err(Error::from)?;
        }
        SynthCommand::Scores { spec, seed, out } => {
            let text = fs::read_to_string(&spec).map_err(Error::from)?;
            let spec = io::parse_panel_spec::<f64>(&text)?;
            let records: Vec<ScoreRecord<f64>> = synth::generate_synthetic_panel(&spec, seed)?
                .into_iter()
                .map(ScoreRecord::from)
                .collect();
            let mut w = create(&out)?;
            io::write_scores(&mut w, &records)?;
            w.flush().map_err(Error::from)?;
        }
    }
    Ok(())
}

/// Output row for one fused panel; qualities are the panel minima.
fn fused_record(name: &str, panel: &Panel<f64>, score: f64) -> ScoreRecord<f64> {
    let min = |f: fn(&ExpertScore<f64>) -> Option<f64>| {
        panel.scores.iter().filter_map(f).reduce(f64::min)
    };
    let mut s = ExpertScore::new(name, panel.shot.clone(), score).with_claim(panel.claim.clone());
    s.quality = min(|e| e.quality);
    s.claim_quality = min(|e| e.claim_quality);
    ScoreRecord {
        score: s,
        label: panel.label,
    }
}

fn fuse(cfg: &RunConfig<f64>, cmd: FuseCommand) -> Outcome {
    match cmd {
        FuseCommand::Train {
            scores,
            out,
            weighting,
        } => {
            let records = labeled(&read_records(&scores, ScoreRange::Unit)?)?;
            let weighting = match weighting {
                TrainWeighting::Uniform => Weighting::Uniform,
                TrainWeighting::Quality => Weighting::Quality,
            };
            let sup = fusion::train_supervisor(&records, weighting, &cfg.fusion)?;
            let mut w = create(&out)?;
            io::write_model(&sup, &mut w)?;
            w.flush().map_err(Error::from)?;
        }
        FuseCommand::Run {
            model,
            scores,
            mode,
            out,
        } => {
            let panels = io::group_panels(&read_records(&scores, ScoreRange::Unit)?);
            let (name, fused) = match mode {
                FuseMode::Sum | FuseMode::Max => {
                    let (name, rule) = match mode {
                        FuseMode::Sum => ("sum", FusionRule::Sum),
                        _ => ("max", FusionRule::Max),
                    };
                    let scores = panels
                        .iter()
                        .map(|p| rule.apply(&p.scores.iter().map(|s| s.score).collect::<Vec<_>>()))
                        .collect::<Result<Vec<_>, _>>()?;
                    (name, scores)
                }
                FuseMode::Bayes | FuseMode::BayesAdaptive => {
                    let path = model.ok_or_else(|| {
                        Failure::Usage("--model is required for Bayesian fusion".into())
                    })?;
                    let sup: TrainedSupervisor =
                        io::read_model(BufReader::new(File::open(path).map_err(Error::from)?))?;
                    let adaptive = mode == FuseMode::BayesAdaptive;
                    let name = if adaptive { "bayes-adaptive" } else { "bayes" };
                    let scores = panels
                        .iter()
                        .map(|p| {
                            fusion::bayes_fuse(&sup, &p.scores, adaptive, &cfg.fusion)
                                .map(|d| d.score)
                        })
                        .collect::<Result<Vec<_>, _>>()?;
                    (name, scores)
                }
            };
            let records: Vec<_> = panels
                .iter()
                .zip(fused)
                .map(|(p, s)| fused_record(name, p, s))
                .collect();
            let mut w = create(&out)?;
            io::write_scores(&mut w, &records)?;
            w.flush().map_err(Error::from)?;
        }
    }
    Ok(())
}

fn cascade(cfg: &RunConfig<f64>, cmd: CascadeCommand, out: &mut dyn Write) -> Outcome {
    let CascadeCommand::Run {
        scores,
        thresholds,
        rule,
        out: path,
    } = cmd;
    let records = read_records(&scores, ScoreRange::Unit)?;
    let experts = expert_ids(&records);
    let rule = match rule {
        Some(r) => r.parse()?,
        None => cfg.cascade_rule,
    };
    let thresholds = match thresholds.or_else(|| cfg.cascade_thresholds.clone()) {
        Some(t) => t,
        None if experts.len() < 2 => Vec::new(),
        None => fusion::default_thresholds(experts.len(), cfg.cascade_q_best)?,
    };
    let cascade = CascadeConfig::new(experts, thresholds, rule)?;
    let ids = cascade.experts();

    let panels = io::group_panels(&records);
    let mut runs = vec![0usize; ids.len()];
    let mut fused = Vec::with_capacity(panels.len());
    for p in &panels {
        let ordered = ids
            .iter()
            .map(|id| {
                p.scores.iter().find(|s| &s.expert == id).ok_or_else(|| {
                    Error::IncompletePanel(format!(
                        "shot `{}` of claim `{}` has no score from `{id}`",
                        p.shot, p.claim
                    ))
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        // certainty: quality index of the primary expert's shot
        let certainty = ordered[0].quality_index().unwrap_or(1.0);
        let outcome =
            fusion::cascaded_fuse(&cascade, certainty, |i| Ok::<_, Error>(ordered[i].score))?;
        runs.iter_mut().take(outcome.used).for_each(|r| *r += 1);
        fused.push(fused_record("cascade", p, outcome.score));
    }
    let mut w = create(&path)?;
    io::write_scores(&mut w, &fused)?;
    w.flush().map_err(Error::from)?;

    let n = panels.len().max(1) as f64;
    let total: usize = runs.iter().sum();
    writeln!(
        out,
        "executions={:.6}",
        total as f64 / (n * ids.len() as f64)
    )
    .map_err(Error::from)?;
    for (id, r) in ids.iter().zip(&runs) {
        writeln!(out, "executions[{id}]={:.6}", *r as f64 / n).map_err(Error::from)?;
    }
    Ok(())
}

fn trials(records: &[ScoreRecord<f64>]) -> Result<Vec<Trial<f64>>, Error> {
    records.iter().map(ScoreRecord::trial).collect()
}

fn evaluate(cfg: &RunConfig<f64>, cmd: EvalCommand, report: &mut dyn Write) -> Outcome {
    match cmd {
        EvalCommand::Eer { input } => {
            let records = read_records(&input.scores, ScoreRange::Finite)?;
            let ids = expert_ids(&records);
            for id in &ids {
                let own: Vec<_> = records
                    .iter()
                    .filter(|r| &r.score.expert == id)
                    .cloned()
                    .collect();
                let eer = eval::compute_eer(&trials(&own)?)?;
                if ids.len() == 1 {
                    writeln!(report, "EER={eer:.6}").map_err(Error::from)?;
                } else {
                    writeln!(report, "EER[{id}]={eer:.6}").map_err(Error::from)?;
                }
            }
            if ids.is_empty() {
                return Err(Error::SingleClass.into());
            }
        }
        EvalCommand::Groups {
            input,
            k,
            expert,
            out,
        } => {
            let records = read_records(&input.scores, ScoreRange::Finite)?;
            let ids = expert_ids(&records);
            let id = match (expert, ids.as_slice()) {
                (Some(e), _) if ids.contains(&e) => e,
                (Some(e), _) => return Err(Error::UnknownExpert(e).into()),
                (None, [only]) => only.clone(),
                (None, _) => {
                    return Err(Failure::Usage(
                        "the score file holds several experts; pick one with --expert".into(),
                    ))
                }
            };
            let own: Vec<_> = records
                .into_iter()
                .filter(|r| r.score.expert == id)
                .collect();
            let trials = trials(&own)?;
            let qualities = eval::mean_genuine_quality(own.iter().zip(&trials).map(|(r, t)| {
                (
                    r.score.claim.as_str(),
                    r.score.quality_index().unwrap_or(1.0),
                    t.label,
                )
            }));
            let partition = eval::quality_partition(&qualities, k.unwrap_or(cfg.groups))?;
            // fingers without genuine trials have no quality and join no group
            let grouped: Vec<_> = trials
                .iter()
                .filter(|t| {
                    partition
                        .group_of(t.finger.as_deref().unwrap_or_default())
                        .is_some()
                })
                .cloned()
                .collect();
            let mut rows = eval::per_group_eer(&partition, &grouped)?;
            let n_genuine = trials.iter().filter(|t| t.label == Label::Genuine).count();
            rows.push(GroupEer {
                label: "all".into(),
                n_genuine,
                n_impostor: trials.len() - n_genuine,
                eer: Some(eval::compute_eer(&trials)?),
            });
            match out {
                Some(path) => {
                    let mut w = create(&path)?;
                    io::write_group_results(&mut w, &rows)?;
                    w.flush().map_err(Error::from)?;
                }
                None => io::write_group_results(report, &rows)?,
            }
        }
        EvalCommand::Jackknife {
            input,
            mode,
            adaptive,
        } => {
            let records = labeled(&read_records(&input.scores, ScoreRange::Unit)?)?;
            let adaptive = adaptive.unwrap_or(cfg.adaptive);
            let options = JackknifeOptions {
                mode: match mode {
                    Some(JackknifeArg::Pooled) => JackknifeMode::Pooled,
                    Some(JackknifeArg::FoldMean) => JackknifeMode::FoldMean,
                    None => cfg.jackknife,
                },
                training: if adaptive {
                    Weighting::Quality
                } else {
                    Weighting::Uniform
                },
                adaptive,
                params: cfg.fusion,
            };
            let result = eval::jackknife_eer(&records, &options)?;
            writeln!(report, "folds={}\nEER={:.6}", result.folds, result.eer)
                .map_err(Error::from)?;
        }
    }
    Ok(())
}
