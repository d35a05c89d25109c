//! Acceptance checks, one PASS/FAIL line each. Exits non-zero when any
//! check fails.

mod oracle;

use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use symfuse::eval::{
    compute_eer, mean_genuine_quality, per_group_eer, quality_partition, Label, Trial,
};
use symfuse::field::Image;
use symfuse::fusion::{
    bayes_fuse, cascaded_fuse, default_thresholds, expected_execution_fraction, train_supervisor,
    CascadeConfig, ExpertScore, FusionParams, FusionRule, LabeledScore, Weighting,
};
use symfuse::io::{read_model, read_scores, write_model, ScoreRange};
use symfuse::quality::{assess_fingerprint, block_average};
use symfuse::symmetry::FilterBank;
use symfuse::synth::{
    generate_synthetic_panel, generate_test_pattern, ExpertSpec, PanelSpec, QualityModel,
};
use symfuse::{GrayImage, QualityConfig};

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
        }
    }
}

type Check = fn() -> Outcome;

fn main() -> ExitCode {
    let checks: [(&str, Option<u64>, Check); 10] = [
        ("filtering oracle equivalence", Some(10), filtering_oracle),
        ("pattern ground truth", Some(5), pattern_ground_truth),
        (
            "singular-point robustness",
            Some(5),
            singular_point_robustness,
        ),
        ("monotone degradation", Some(5), monotone_degradation),
        ("supervisor recovery", None, supervisor_recovery),
        ("quality-adaptive gain", Some(120), adaptive_gain),
        ("cascade efficiency", None, cascade_efficiency),
        ("EER estimator", None, eer_estimator),
        ("partition correctness", None, partition_correctness),
        ("determinism and round trip", None, determinism),
    ];
    let mut failed = 0;
    for (i, (name, budget, check)) in checks.iter().enumerate() {
        let start = Instant::now();
        let mut out = check();
        let elapsed = start.elapsed();
        if let Some(limit) = budget {
            if elapsed > Duration::from_secs(*limit) {
                out.pass = false;
                out.detail.push_str(&format!("; over the {limit} s budget"));
            }
        }
        let verdict = if out.pass { "PASS" } else { "FAIL" };
        println!(
            "{verdict} {:>2} {name}: {} [{:.2} s]",
            i + 1,
            out.detail,
            elapsed.as_secs_f64()
        );
        failed += usize::from(!out.pass);
    }
    println!(
        "{} of {} acceptance checks passed",
        checks.len() - failed,
        checks.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn random_image(seed: u64, size: usize) -> GrayImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Image::from_fn_clamped(size, size, |_, _| rng.random::<f64>())
}

fn filtering_oracle() -> Outcome {
    let orders = [-2, -1, 0, 1, 2];
    let bank = FilterBank::new(0.6, 3.0, &orders).unwrap();
    let mut worst = 0.0_f64;
    for seed in 0..20 {
        let img = random_image(seed, 32);
        let z = bank.orientation_tensor(&img).unwrap();
        for &n in &orders {
            let fast = bank.response(&z, n).unwrap();
            let slow = oracle::dense_response(z.values(), 32, 32, n, 3.0);
            let scale = slow
                .iter()
                .map(|c| c.norm())
                .fold(0.0, f64::max)
                .max(1e-300);
            let err = fast
                .values()
                .iter()
                .zip(&slow)
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max)
                / scale;
            worst = worst.max(err);
        }
    }
    Outcome::new(
        worst <= 1e-6,
        format!("max relative error {worst:.2e} over 20 images, orders -2..2"),
    )
}

fn pattern_ground_truth() -> Outcome {
    let bank = FilterBank::new(0.6, 3.0, &[0, 1]).unwrap();
    let mut margins = Vec::new();
    for order in [0, 1] {
        let d = bank
            .decompose(&generate_test_pattern(order, 0.0, 128, 8.0).unwrap())
            .unwrap();
        let matched = d.response_magnitude(order).unwrap();
        let other = d.response_magnitude(1 - order).unwrap();
        let margin = [(63, 63), (64, 63), (63, 64), (64, 64)]
            .iter()
            .map(|&(x, y)| matched.get(x, y) - other.get(x, y))
            .fold(f64::INFINITY, f64::min);
        margins.push(margin);
    }
    Outcome::new(
        margins.iter().all(|&m| m >= 0.2),
        format!(
            "centre margin order 0: {:.3}, order 1: {:.3}",
            margins[0], margins[1]
        ),
    )
}

fn singular_point_robustness() -> Outcome {
    // The order-1 pattern is a parabolic core whose flow is locally linear away
    // from the centre. At 120 px the centre (59.5, 59.5) is the middle of block (7, 7).
    let size = 120;
    let cfg = QualityConfig::default();
    let img = generate_test_pattern(1, 0.0, size, 8.0).unwrap();
    let report = assess_fingerprint(&img, &cfg).unwrap();
    let bank = cfg.filter_bank().unwrap();
    let s0 = block_average(
        &bank.decompose(&img).unwrap().response_magnitude(0).unwrap(),
        cfg.block,
    )
    .unwrap();

    let centre = (size as f64 - 1.0) / 2.0;
    let (cols, rows) = (s0.cols(), s0.rows());
    let (mut core, mut background) = (Vec::new(), Vec::new());
    for r in 0..rows {
        for c in 0..cols {
            let bx = (c * cfg.block) as f64 + (cfg.block as f64 - 1.0) / 2.0;
            let by = (r * cfg.block) as f64 + (cfg.block as f64 - 1.0) / 2.0;
            let dist = (bx - centre).hypot(by - centre);
            let border = c == 0 || r == 0 || c + 1 == cols || r + 1 == rows;
            if dist <= 4.0 {
                core.push((c, r));
            } else if dist > 28.0 && !border {
                background.push((c, r));
            }
        }
    }
    let mean = |cells: &[(usize, usize)], f: &dyn Fn(usize, usize) -> f64| {
        cells.iter().map(|&(c, r)| f(c, r)).sum::<f64>() / cells.len() as f64
    };
    let q_ratio = mean(&core, &|c, r| *report.quality.get(c, r))
        / mean(&background, &|c, r| *report.quality.get(c, r));
    let s0_ratio = mean(&core, &|c, r| *s0.get(c, r)) / mean(&background, &|c, r| *s0.get(c, r));
    Outcome::new(
        q_ratio >= 0.8 && s0_ratio <= 0.5,
        format!(
            "core/background q ratio {q_ratio:.3} (need >= 0.8), |s0| ratio {s0_ratio:.3} (need <= 0.5), {} core and {} background blocks",
            core.len(),
            background.len()
        ),
    )
}

fn monotone_degradation() -> Outcome {
    let grating = generate_test_pattern(0, 0.0, 128, 8.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let unit = Normal::new(0.0, 1.0).unwrap();
    let noise: Vec<f64> = (0..128 * 128).map(|_| unit.sample(&mut rng)).collect();
    let cfg = QualityConfig::default();
    let qs: Vec<f64> = [0.0, 0.1, 0.2, 0.4]
        .iter()
        .map(|&sigma| {
            let img = Image::from_fn_clamped(128, 128, |x, y| {
                grating.get(x, y) + sigma * noise[y * 128 + x]
            });
            assess_fingerprint(&img, &cfg).unwrap().overall
        })
        .collect();
    let strict = qs.windows(2).all(|w| w[0] > w[1]);
    Outcome::new(
        strict,
        format!(
            "Q at sigma 0/0.1/0.2/0.4: {:.4} {:.4} {:.4} {:.4}",
            qs[0], qs[1], qs[2], qs[3]
        ),
    )
}

fn spec(
    experts: Vec<ExpertSpec<f64>>,
    per_side: usize,
    quality: QualityModel<f64>,
) -> PanelSpec<f64> {
    PanelSpec {
        experts,
        claims: 1,
        genuine_per_claim: per_side,
        impostor_per_claim: per_side,
        quality,
        q_floor: 0.05,
    }
}

fn single_eer(records: &[LabeledScore<f64>], expert: &str) -> f64 {
    let trials: Vec<Trial<f64>> = records
        .iter()
        .filter(|r| r.score.expert == expert)
        .map(|r| {
            Trial::new(
                r.score.score,
                if r.genuine {
                    Label::Genuine
                } else {
                    Label::Impostor
                },
            )
        })
        .collect();
    compute_eer(&trials).unwrap()
}

/// EER of Bayesian fusion over panels of `experts` consecutive records.
fn fused_eer(
    sup: &symfuse::TrainedSupervisor,
    records: &[LabeledScore<f64>],
    experts: usize,
    adaptive: bool,
) -> f64 {
    let params = FusionParams::default();
    let trials: Vec<Trial<f64>> = records
        .chunks(experts)
        .map(|panel| {
            let scores: Vec<ExpertScore<f64>> = panel.iter().map(|r| r.score.clone()).collect();
            let fused = bayes_fuse(sup, &scores, adaptive, &params).unwrap().score;
            Trial::new(
                fused,
                if panel[0].genuine {
                    Label::Genuine
                } else {
                    Label::Impostor
                },
            )
        })
        .collect();
    compute_eer(&trials).unwrap()
}

fn supervisor_recovery() -> Outcome {
    let truth = [("A", 0.15, 0.05), ("B", -0.1, 0.15)];
    let experts: Vec<ExpertSpec<f64>> = truth
        .iter()
        .map(|&(id, b, s)| ExpertSpec::new(id, b, s))
        .collect();
    let params = FusionParams::default();
    let (mut covered, mut covered_each, mut wins) = (0, [0; 2], 0);
    for seed in 0..100 {
        let train =
            generate_synthetic_panel(&spec(experts.clone(), 4, QualityModel::None), 2 * seed)
                .unwrap();
        let test = generate_synthetic_panel(
            &spec(experts.clone(), 5000, QualityModel::None),
            2 * seed + 1,
        )
        .unwrap();
        let sup = train_supervisor(&train, Weighting::Uniform, &params).unwrap();
        let mut all = true;
        for (i, &(id, b, _)) in truth.iter().enumerate() {
            let m = sup.expert(id).unwrap().client;
            let ok = (m.bias - b).abs() <= 3.0 * m.variance.sqrt();
            covered_each[i] += usize::from(ok);
            all &= ok;
        }
        covered += usize::from(all);
        let best = truth
            .iter()
            .map(|t| single_eer(&test, t.0))
            .fold(f64::INFINITY, f64::min);
        wins += usize::from(fused_eer(&sup, &test, 2, false) <= best);
    }
    Outcome::new(
        covered >= 95 && wins >= 95,
        format!(
            "bias within 3 sd: {covered}/100 seeds (A {}, B {}); fused EER <= best single: {wins}/100",
            covered_each[0], covered_each[1]
        ),
    )
}

fn adaptive_gain() -> Outcome {
    let experts = vec![
        ExpertSpec::new("A", 0.1, 0.2),
        ExpertSpec::new("B", 0.05, 0.3),
    ];
    let quality = QualityModel::Coupled {
        min: 0.25,
        max: 2.0,
    };
    let params = FusionParams::default();
    let (mut wins, mut sum_gain) = (0, 0.0);
    for seed in 0..100 {
        let train =
            generate_synthetic_panel(&spec(experts.clone(), 4, quality), 1000 + 2 * seed).unwrap();
        let test = generate_synthetic_panel(&spec(experts.clone(), 5000, quality), 1001 + 2 * seed)
            .unwrap();
        let adaptive = fused_eer(
            &train_supervisor(&train, Weighting::Quality, &params).unwrap(),
            &test,
            2,
            true,
        );
        let uniform = fused_eer(
            &train_supervisor(&train, Weighting::Uniform, &params).unwrap(),
            &test,
            2,
            false,
        );
        wins += usize::from(adaptive <= uniform);
        sum_gain += uniform - adaptive;
    }
    Outcome::new(
        wins >= 95,
        format!(
            "adaptive EER <= non-adaptive in {wins}/100 seeds, mean EER reduction {:.4}",
            sum_gain / 100.0
        ),
    )
}

fn cascade_efficiency() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut notes = Vec::new();
    let mut pass = true;
    for m in [2, 3] {
        let ids: Vec<String> = (0..m).map(|i| format!("e{i}")).collect();
        let cfg =
            CascadeConfig::new(ids, default_thresholds(m, 1.0).unwrap(), FusionRule::Max).unwrap();
        let trials = 100_000;
        let mut runs = 0;
        for _ in 0..trials {
            let c: f64 = rng.random();
            runs += cascaded_fuse(&cfg, c, |_| Ok::<f64, String>(0.5))
                .unwrap()
                .used;
        }
        let observed = runs as f64 / (trials * m) as f64;
        let expected: f64 = expected_execution_fraction(m).unwrap();
        pass &= (observed - expected).abs() <= 0.02;
        notes.push(format!("m={m}: {observed:.4} vs {expected:.4}"));
    }

    // Thresholds below every certainty run the primary alone; thresholds above
    // every certainty run the full fusion.
    let mut exact = true;
    for rule in [FusionRule::Max, FusionRule::Sum] {
        let settings: [(usize, Vec<f64>, bool); 4] = [
            (2, vec![0.0], false),
            (2, vec![f64::INFINITY], true),
            (3, vec![0.0, -1.0], false),
            (3, vec![f64::INFINITY, f64::MAX], true),
        ];
        for (m, thresholds, full) in settings {
            let ids: Vec<String> = (0..m).map(|i| format!("e{i}")).collect();
            let cfg = CascadeConfig::new(ids, thresholds, rule).unwrap();
            for _ in 0..1000 {
                let scores: Vec<f64> = (0..m).map(|_| rng.random()).collect();
                let c: f64 = rng.random::<f64>() * 2.0;
                let got = cascaded_fuse(&cfg, c, |i| Ok::<f64, String>(scores[i]))
                    .unwrap()
                    .score;
                let want = if full {
                    rule.apply(&scores).unwrap()
                } else {
                    scores[0]
                };
                exact &= got.to_bits() == want.to_bits();
            }
        }
    }
    pass &= exact;
    notes.push(format!("threshold extremes bit-exact: {exact}"));
    Outcome::new(pass, notes.join(", "))
}

fn eer_estimator() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut draw = |mean: f64, label: Label, n: usize| -> Vec<Trial<f64>> {
        let d = Normal::new(mean, 1.0).unwrap();
        (0..n)
            .map(|_| Trial::new(d.sample(&mut rng), label))
            .collect()
    };
    let n = 100_000;
    let mut shifted = draw(2.0, Label::Genuine, n);
    shifted.extend(draw(0.0, Label::Impostor, n));
    let mut same = draw(0.0, Label::Genuine, n);
    same.extend(draw(0.0, Label::Impostor, n));
    let separated: Vec<Trial<f64>> = (0..1000)
        .map(|i| Trial::genuine(2.0 + i as f64 / 1000.0))
        .chain((0..1000).map(|i| Trial::impostor(i as f64 / 1000.0)))
        .collect();

    let gauss = compute_eer(&shifted).unwrap();
    let split = compute_eer(&separated).unwrap();
    let equal = compute_eer(&same).unwrap();
    Outcome::new(
        (gauss - 0.1587).abs() <= 0.005 && split == 0.0 && (equal - 0.5).abs() <= 0.01,
        format!("N(0,1)/N(2,1): {gauss:.4}, separated: {split}, identical: {equal:.4}"),
    )
}

fn fingers(list: &[(&str, f64)]) -> Vec<(String, f64)> {
    list.iter().map(|&(f, q)| (f.to_string(), q)).collect()
}

fn partition_correctness() -> Outcome {
    let mut problems = Vec::new();

    // ties broken by finger id, remainder to the lowest groups
    let p = quality_partition(
        &fingers(&[
            ("f3", 0.5),
            ("f1", 0.2),
            ("f2", 0.5),
            ("f0", 0.9),
            ("f4", 0.1),
            ("f5", 0.5),
            ("f6", 0.3),
        ]),
        3,
    )
    .unwrap();
    let got: Vec<(&str, Vec<&str>)> = p
        .groups
        .iter()
        .map(|g| {
            (
                g.label.as_str(),
                g.fingers.iter().map(String::as_str).collect(),
            )
        })
        .collect();
    let want = vec![
        ("I", vec!["f4", "f1", "f6"]),
        ("II", vec!["f2", "f3"]),
        ("III", vec!["f5", "f0"]),
    ];
    if got != want {
        problems.push(format!("7 into 3: {got:?}"));
    }
    if (p.groups[0].mean_quality - 0.2).abs() > 1e-12
        || (p.groups[2].mean_quality - 0.7).abs() > 1e-12
    {
        problems.push("group mean qualities".to_string());
    }

    let ten: Vec<(String, f64)> = (0..10)
        .map(|i| (format!("u{i}"), f64::from(9 - i)))
        .collect();
    let p = quality_partition(&ten, 5).unwrap();
    let labels: Vec<&str> = p.groups.iter().map(|g| g.label.as_str()).collect();
    if labels != ["I", "II", "III", "IV", "V"]
        || p.groups[0].fingers != ["u9", "u8"]
        || p.groups[4].fingers != ["u1", "u0"]
    {
        problems.push(format!("10 into 5: {:?}", p.groups));
    }
    if quality_partition(&ten, 1).unwrap().groups[0].fingers.len() != 10
        || quality_partition(&ten, 10)
            .unwrap()
            .groups
            .iter()
            .any(|g| g.fingers.len() != 1)
        || quality_partition(&ten, 0).is_ok()
        || quality_partition(&ten, 11).is_ok()
    {
        problems.push("edge group counts".to_string());
    }

    // genuine scores of group g centred at 0.5 + 0.5g, impostors at 0
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let unit = Normal::new(0.0, 1.0).unwrap();
    let mut trials = Vec::new();
    for i in 0..25 {
        let finger = format!("p{i:02}");
        let mu = 0.5 + 0.5 * (i / 5) as f64;
        for _ in 0..300 {
            trials.push((
                finger.clone(),
                mu + unit.sample(&mut rng),
                Label::Genuine,
                i as f64 / 25.0,
            ));
            trials.push((finger.clone(), unit.sample(&mut rng), Label::Impostor, 0.0));
        }
    }
    let qualities = mean_genuine_quality(trials.iter().map(|(f, _, l, q)| (f.as_str(), *q, *l)));
    let partition = quality_partition(&qualities, 5).unwrap();
    let scored: Vec<Trial<f64>> = trials
        .iter()
        .map(|(f, s, l, _)| Trial::new(*s, *l).with_finger(f.clone()))
        .collect();
    let eers: Vec<f64> = per_group_eer(&partition, &scored)
        .unwrap()
        .iter()
        .map(|g| g.eer.unwrap())
        .collect();
    if !eers.windows(2).all(|w| w[0] > w[1]) {
        problems.push(format!("group EERs not decreasing: {eers:?}"));
    }
    let listed: Vec<String> = eers.iter().map(|e| format!("{e:.3}")).collect();
    if problems.is_empty() {
        Outcome::new(
            true,
            format!(
                "crafted partitions exact; group EERs I..V {}",
                listed.join(" ")
            ),
        )
    } else {
        Outcome::new(false, problems.join("; "))
    }
}

fn symfuse(args: &[&str], dir: &Path) -> Vec<u8> {
    let out = Command::new(env!("CARGO_BIN_EXE_symfuse"))
        .args(args)
        .current_dir(dir)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "symfuse {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out.stdout
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(
        d.join("panel.txt"),
        "claims = 6\ngenuine_per_claim = 5\nimpostor_per_claim = 5\nquality = coupled\nquality_min = 0.25\nquality_max = 2\n\
         expert.A.bias = 0.1\nexpert.A.sigma = 0.2\nexpert.B.bias = 0.05\nexpert.B.sigma = 0.3\n",
    )
    .unwrap();

    let runs: Vec<Vec<&str>> = vec![
        vec![
            "synth",
            "scores",
            "--spec",
            "panel.txt",
            "--seed",
            "7",
            "--out",
            "scores{}.csv",
        ],
        vec![
            "synth",
            "pattern",
            "--order",
            "1",
            "--size",
            "96",
            "--out",
            "core{}.pgm",
        ],
        vec!["quality", "core1.pgm", "--map", "map{}.csv"],
        vec![
            "fuse",
            "train",
            "--scores",
            "scores1.csv",
            "--out",
            "model{}.txt",
        ],
        vec![
            "fuse",
            "run",
            "--model",
            "model1.txt",
            "--scores",
            "scores1.csv",
            "--mode",
            "bayes-adaptive",
            "--out",
            "fused{}.csv",
        ],
        vec![
            "cascade",
            "run",
            "--scores",
            "scores1.csv",
            "--out",
            "cascade{}.csv",
        ],
        vec!["eval", "eer", "--scores", "fused1.csv"],
        vec![
            "eval",
            "groups",
            "--scores",
            "scores1.csv",
            "--expert",
            "A",
            "--k",
            "3",
            "--out",
            "groups{}.csv",
        ],
        vec!["eval", "jackknife", "--scores", "scores1.csv"],
    ];
    let mut differing = Vec::new();
    for args in &runs {
        let mut outputs = Vec::new();
        for rep in 1..=2 {
            let concrete: Vec<String> = args
                .iter()
                .map(|a| a.replace("{}", &rep.to_string()))
                .collect();
            let refs: Vec<&str> = concrete.iter().map(String::as_str).collect();
            let stdout = symfuse(&refs, d);
            // the argument with a placeholder names the written file
            let written = args
                .iter()
                .position(|a| a.contains("{}"))
                .map(|i| &concrete[i]);
            let bytes = written
                .map(|f| std::fs::read(d.join(f)).unwrap())
                .unwrap_or_default();
            outputs.push((stdout, bytes));
        }
        if outputs[0] != outputs[1] {
            differing.push(args[..2].join(" "));
        }
    }

    // the model file stores every parameter exactly
    let text = std::fs::read(d.join("model1.txt")).unwrap();
    let model: symfuse::TrainedSupervisor = read_model(text.as_slice()).unwrap();
    let mut again = Vec::new();
    write_model(&model, &mut again).unwrap();
    let records = read_scores(
        std::fs::File::open(d.join("scores1.csv")).unwrap(),
        ScoreRange::Unit,
    )
    .unwrap();
    let labeled: Vec<LabeledScore<f64>> = records.iter().map(|r| r.labeled().unwrap()).collect();
    let direct = train_supervisor(&labeled, Weighting::Quality, &FusionParams::default()).unwrap();
    let round_trip = again == text && model == direct;

    let detail = format!(
        "{} commands byte-identical across runs{}; model round trip exact: {round_trip}",
        runs.len() - differing.len(),
        if differing.is_empty() {
            String::new()
        } else {
            format!(" (differ: {})", differing.join(", "))
        }
    );
    Outcome::new(differing.is_empty() && round_trip, detail)
}
