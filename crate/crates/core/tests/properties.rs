use num_complex::Complex64;
use proptest::prelude::*;
use symfuse::eval::{
    compute_eer, per_group_eer, quality_partition, QualityGroup, QualityPartition, Trial,
};
use symfuse::field::Field;
use symfuse::fusion::{combine, decide, Branch, SideModel};
use symfuse::symmetry::{inhibit, total_symmetry};

fn unit_disc() -> impl Strategy<Value = Complex64> {
    (0.0..=1.0f64, -3.2..3.2f64).prop_map(|(r, a)| Complex64::from_polar(r, a))
}

proptest! {
    #[test]
    fn inhibition_never_amplifies(values in prop::collection::vec((unit_disc(), unit_disc(), unit_disc()), 1..20)) {
        let n = values.len();
        let fields: Vec<Field<Complex64>> = (0..3)
            .map(|k| Field::new(n, 1, values.iter().map(|v| [v.0, v.1, v.2][k]).collect()).unwrap())
            .collect();
        let inhibited = inhibit(&fields).unwrap();
        for (raw, inh) in fields.iter().zip(&inhibited) {
            for (a, b) in raw.values().iter().zip(inh.values()) {
                prop_assert!(b.norm() <= a.norm() + 1e-15);
            }
        }
        let total = total_symmetry(&inhibited).unwrap();
        prop_assert!(total.values().iter().all(|&s| s >= 0.0));
    }

    #[test]
    fn combination_is_convex(pairs in prop::collection::vec((-2.0..2.0f64, 1e-4..10.0f64), 1..8)) {
        let (m, v): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let c = combine(&m, &v).unwrap();
        let lo = m.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = m.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(c >= lo - 1e-12 && c <= hi + 1e-12);
    }

    #[test]
    fn bias_estimate_ignores_variance_scale(
        data in prop::collection::vec((-0.5..0.5f64, 0.1..5.0f64), 4..12),
        scale in 0.01..100.0f64,
    ) {
        let (z, s): (Vec<f64>, Vec<f64>) = data.into_iter().unzip();
        let scaled: Vec<f64> = s.iter().map(|v| v * scale).collect();
        let a = SideModel::fit(&z, &s, 1e-300).unwrap();
        let b = SideModel::fit(&z, &scaled, 1e-300).unwrap();
        prop_assert!((a.bias - b.bias).abs() < 1e-9);
        prop_assert!((a.variance - b.variance).abs() <= 1e-9 * a.variance.max(1e-12));
    }

    #[test]
    fn decision_flips_under_reflection(c in -1.0..2.0f64, i in -1.0..2.0f64) {
        let gap = (1.0 - c).abs() - i.abs();
        prop_assume!(gap.abs() > 1e-9);
        let d = decide(c, i);
        let r = decide(1.0 - i, 1.0 - c);
        prop_assert_ne!(d.branch, r.branch);
        prop_assert_eq!(d.branch == Branch::Client, gap < 0.0);
    }

    #[test]
    fn eer_bounds_and_monotone_invariance(
        genuine in prop::collection::vec(-5.0..5.0f64, 1..40),
        impostor in prop::collection::vec(-5.0..5.0f64, 1..40),
    ) {
        let trials: Vec<Trial<f64>> = genuine.iter().map(|&s| Trial::genuine(s))
            .chain(impostor.iter().map(|&s| Trial::impostor(s)))
            .collect();
        let e = compute_eer(&trials).unwrap();
        prop_assert!((0.0..=1.0).contains(&e));
        let warped: Vec<Trial<f64>> = trials.iter()
            .map(|t| Trial::new((t.score * 0.7).exp() + 3.0, t.label))
            .collect();
        prop_assert_eq!(compute_eer(&warped).unwrap(), e);
    }

    #[test]
    fn partition_is_ordered_and_exhaustive(qs in prop::collection::vec(0.0..2.0f64, 1..40), k in 1usize..8) {
        prop_assume!(k <= qs.len());
        let fingers: Vec<(String, f64)> = qs.iter().enumerate().map(|(i, &q)| (format!("f{i:03}"), q)).collect();
        let p = quality_partition(&fingers, k).unwrap();
        let mut seen: Vec<&String> = p.groups.iter().flat_map(|g| &g.fingers).collect();
        prop_assert_eq!(seen.len(), fingers.len());
        seen.sort();
        seen.dedup();
        prop_assert_eq!(seen.len(), fingers.len());
        let sizes: Vec<usize> = p.groups.iter().map(|g| g.fingers.len()).collect();
        prop_assert!(sizes.windows(2).all(|w| w[0] >= w[1] && w[0] - w[1] <= 1));
        let quality = |f: &String| fingers.iter().find(|(id, _)| id == f).unwrap().1;
        for w in p.groups.windows(2) {
            let top = w[0].fingers.iter().map(quality).fold(f64::NEG_INFINITY, f64::max);
            let bottom = w[1].fingers.iter().map(quality).fold(f64::INFINITY, f64::min);
            prop_assert!(top <= bottom);
        }
    }

    #[test]
    fn single_group_matches_pooled_eer(scores in prop::collection::vec((0.0..1.0f64, any::<bool>(), 0usize..4), 2..60)) {
        let trials: Vec<Trial<f64>> = scores.iter()
            .map(|&(s, g, f)| Trial::new(s, if g { symfuse::eval::Label::Genuine } else { symfuse::eval::Label::Impostor }).with_finger(format!("f{f}")))
            .collect();
        prop_assume!(compute_eer(&trials).is_ok());
        let partition = QualityPartition {
            groups: vec![QualityGroup { label: "I".into(), fingers: (0..4).map(|f| format!("f{f}")).collect(), mean_quality: 1.0 }],
        };
        let groups = per_group_eer(&partition, &trials).unwrap();
        prop_assert_eq!(groups[0].eer, Some(compute_eer(&trials).unwrap()));
    }
}
