use proptest::prelude::*;
use rand::Rng;

use super::*;
use crate::cohort::{Attribute, GroupAssignment};
use crate::error::Error;
use crate::rng;

fn brute_auc(s: &[f64], y: &[u8]) -> f64 {
    let mut num = 0.0;
    let mut pairs = 0.0;
    for i in 0..s.len() {
        for j in 0..s.len() {
            if y[i] == 1 && y[j] == 0 {
                pairs += 1.0;
                if s[i] > s[j] {
                    num += 1.0;
                } else if s[i] == s[j] {
                    num += 0.5;
                }
            }
        }
    }
    num / pairs
}

fn brute_ap(s: &[f64], y: &[u8]) -> f64 {
    let n_pos = y.iter().filter(|&&v| v == 1).count() as f64;
    let mut total = 0.0;
    for i in 0..s.len() {
        if y[i] != 1 {
            continue;
        }
        let above = (0..s.len()).filter(|&j| s[j] >= s[i]).count() as f64;
        let pos_above = (0..s.len()).filter(|&j| s[j] >= s[i] && y[j] == 1).count() as f64;
        total += pos_above / above;
    }
    total / n_pos
}

/// Transport LP with uniform masses, solved by simplex.
fn lp_emd(a: &[f64], b: &[f64]) -> f64 {
    use minilp::{ComparisonOp, OptimizationDirection, Problem};
    let mut p = Problem::new(OptimizationDirection::Minimize);
    let vars: Vec<Vec<_>> = a
        .iter()
        .map(|x| b.iter().map(|y| p.add_var((x - y).abs(), (0.0, f64::INFINITY))).collect())
        .collect();
    for row in &vars {
        p.add_constraint(row.iter().map(|&v| (v, 1.0)).collect::<Vec<_>>(), ComparisonOp::Eq, 1.0 / a.len() as f64);
    }
    for j in 0..b.len() {
        p.add_constraint(vars.iter().map(|row| (row[j], 1.0)).collect::<Vec<_>>(), ComparisonOp::Eq, 1.0 / b.len() as f64);
    }
    p.solve().unwrap().objective()
}

fn random_instance(r: &mut impl Rng, n: usize, ties: bool) -> (Vec<f64>, Vec<u8>) {
    let s = (0..n)
        .map(|_| if ties { r.random_range(0..8) as f64 / 8.0 } else { r.random::<f64>() })
        .collect();
    let y = (0..n).map(|_| r.random_range(0..2)).collect();
    (s, y)
}

#[test]
fn auc_roc_examples() {
    assert_eq!(auc_roc(&[0.9, 0.1], &[1, 0]).unwrap(), 1.0);
    assert_eq!(auc_roc(&[0.3; 4], &[1, 0, 1, 0]).unwrap(), 0.5);
    assert_eq!(auc_roc(&[0.8, 0.6, 0.4, 0.2], &[1, 0, 1, 0]).unwrap(), 0.75);
    assert!(matches!(auc_roc(&[0.1, 0.2], &[1, 1]), Err(Error::UndefinedMetric { .. })));
    assert!(matches!(auc_roc(&[0.1], &[1, 0]), Err(Error::Contract(_))));
}

#[test]
fn auc_roc_matches_pairwise_brute_force() {
    let mut r = rng::stream(11, "auc");
    for trial in 0..200 {
        let n = r.random_range(2..=500);
        let (s, y) = random_instance(&mut r, n, trial % 2 == 0);
        if !y.contains(&0) || !y.contains(&1) {
            continue;
        }
        let got = auc_roc(&s, &y).unwrap();
        assert!((got - brute_auc(&s, &y)).abs() < 1e-12);
    }
}

#[test]
fn auc_prc_examples() {
    assert_eq!(auc_prc(&[0.9, 0.8, 0.2, 0.1], &[1, 1, 0, 0]).unwrap(), 1.0);
    assert_eq!(auc_prc(&[0.9, 0.8], &[0, 1]).unwrap(), 0.5);
    assert!(matches!(auc_prc(&[0.9], &[0]), Err(Error::UndefinedMetric { .. })));
    // a tie block shares the precision measured after the whole block
    assert_eq!(auc_prc(&[0.5, 0.5], &[1, 0]).unwrap(), 0.5);
}

#[test]
fn auc_prc_matches_quadratic_reference() {
    let mut r = rng::stream(12, "ap");
    for trial in 0..200 {
        let n = r.random_range(1..=500);
        let (s, y) = random_instance(&mut r, n, trial % 2 == 0);
        if !y.contains(&1) {
            continue;
        }
        assert!((auc_prc(&s, &y).unwrap() - brute_ap(&s, &y)).abs() < 1e-12);
    }
}

#[test]
fn brier_examples() {
    assert_eq!(brier(&[1.0, 0.0], &[1, 0]).unwrap(), 0.0);
    assert_eq!(brier(&[0.5; 3], &[1, 0, 1]).unwrap(), 0.25);
    assert!((brier(&[0.2, 0.6], &[0, 1]).unwrap() - 0.1).abs() < 1e-15);
    assert!(brier(&[], &[]).is_err());
}

#[test]
fn confusion_examples() {
    let c = confusion_at(&[0.1, 0.05], &[0, 0], DEFAULT_THRESHOLD).unwrap();
    assert_eq!(c.fpr, Some(0.5));
    assert_eq!(c.fnr, None);
    let c = confusion_at(&[0.075], &[1], 0.075).unwrap();
    assert_eq!((c.tp, c.fn_), (1, 0));
    let c = confusion_at(&[0.5, 0.9, 0.075], &[1, 1, 1], 0.075).unwrap();
    assert_eq!(c.fnr, Some(0.0));
    assert_eq!(c.fpr, None);
}

#[test]
fn cv_examples_agree_with_reference_statistics() {
    use statrs::statistics::Statistics;
    assert_eq!(coefficient_of_variation(&[0.3, 0.3, 0.3]).unwrap(), 0.0);
    assert!((coefficient_of_variation(&[1.0, 3.0]).unwrap() - 0.5).abs() < 1e-15);
    let v = [2.0, 4.0, 6.0, 8.0];
    let cv = coefficient_of_variation(&v).unwrap();
    assert!((cv - 5f64.sqrt() / 5.0).abs() < 1e-12);
    assert!((cv - v.iter().population_std_dev() / v.iter().mean()).abs() < 1e-12);
    assert!(matches!(coefficient_of_variation(&[0.0, 0.0]), Err(Error::UndefinedMetric { .. })));
    assert!(coefficient_of_variation(&[]).is_err());
    assert!((cv_of_rates("t", &[Some(1.0), None, Some(3.0)]).unwrap() - 0.5).abs() < 1e-15);
}

#[test]
fn emd_examples() {
    assert_eq!(emd_1d(&[0.2, 0.4, 0.4], &[0.4, 0.2, 0.4]).unwrap(), 0.0);
    assert_eq!(emd_1d(&[0.0], &[1.0]).unwrap(), 1.0);
    assert!((emd_1d(&[0.1, 0.3, 0.5], &[0.2, 0.4, 0.6]).unwrap() - 0.1).abs() < 1e-15);
    assert!((lp_emd(&[0.1, 0.3, 0.5], &[0.2, 0.4, 0.6]) - 0.1).abs() < 1e-9);
    assert!(emd_1d(&[], &[0.5]).is_err());
}

#[test]
fn emd_matches_lp_transport_oracle() {
    let mut r = rng::stream(13, "emd-lp");
    for _ in 0..60 {
        let n = r.random_range(1..=50);
        let m = r.random_range(1..=50);
        let a: Vec<f64> = (0..n).map(|_| r.random()).collect();
        let b: Vec<f64> = (0..m).map(|_| r.random::<f64>().powi(2)).collect();
        let got = emd_1d(&a, &b).unwrap();
        let lp = lp_emd(&a, &b);
        assert!((got - lp).abs() < 1e-9, "n={n} m={m}: {got} vs {lp}");
    }
}

#[test]
fn emd_equal_counts_is_mean_sorted_difference() {
    let mut r = rng::stream(14, "emd-eq");
    for _ in 0..100 {
        let n = r.random_range(1..100);
        let mut a: Vec<f64> = (0..n).map(|_| r.random()).collect();
        let mut b: Vec<f64> = (0..n).map(|_| r.random()).collect();
        let got = emd_1d(&a, &b).unwrap();
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        let direct = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).sum::<f64>() / n as f64;
        assert!((got - direct).abs() < 1e-12);
    }
}

proptest! {
    #[test]
    fn emd_is_a_metric(
        a in prop::collection::vec(0.0f64..=1.0, 1..40),
        b in prop::collection::vec(0.0f64..=1.0, 1..40),
        c in prop::collection::vec(0.0f64..=1.0, 1..40),
    ) {
        let ab = emd_1d(&a, &b).unwrap();
        prop_assert_eq!(ab, emd_1d(&b, &a).unwrap());
        prop_assert!(ab >= 0.0);
        prop_assert!(ab <= emd_1d(&a, &c).unwrap() + emd_1d(&c, &b).unwrap() + 1e-12);
        let mut shuffled = a.clone();
        shuffled.reverse();
        prop_assert_eq!(emd_1d(&a, &shuffled).unwrap(), 0.0);
    }

    #[test]
    fn permutation_invariance(
        data in prop::collection::vec((0.0f64..=1.0, 0u8..2), 1..80),
        seed in any::<u64>(),
    ) {
        use rand::seq::SliceRandom;
        let (s, y): (Vec<f64>, Vec<u8>) = data.iter().copied().unzip();
        let mut idx: Vec<usize> = (0..s.len()).collect();
        idx.shuffle(&mut rng::stream(seed, "perm"));
        let ps: Vec<f64> = idx.iter().map(|&i| s[i]).collect();
        let py: Vec<u8> = idx.iter().map(|&i| y[i]).collect();
        let c1 = confusion_at(&s, &y, 0.5).unwrap();
        let c2 = confusion_at(&ps, &py, 0.5).unwrap();
        prop_assert_eq!(c1, c2);
        prop_assert!((brier(&s, &y).unwrap() - brier(&ps, &py).unwrap()).abs() < 1e-12);
        if let Ok(a) = auc_roc(&s, &y) {
            prop_assert_eq!(a, auc_roc(&ps, &py).unwrap());
        }
        let cv1 = coefficient_of_variation(&s);
        let cv2 = coefficient_of_variation(&ps);
        if let (Ok(a), Ok(b)) = (cv1, cv2) {
            prop_assert!((a - b).abs() < 1e-9 * a.max(1.0));
        }
    }

    #[test]
    fn metrics_do_not_mutate_inputs(data in prop::collection::vec((0.0f64..=1.0, 0u8..2), 2..50)) {
        let (s, y): (Vec<f64>, Vec<u8>) = data.iter().copied().unzip();
        let (s0, y0) = (s.clone(), y.clone());
        let _ = auc_roc(&s, &y);
        let _ = auc_prc(&s, &y);
        let _ = emd_1d(&s, &s[..1]);
        prop_assert_eq!(s, s0);
        prop_assert_eq!(y, y0);
    }
}

fn example(score: f64, label: u8, race: usize, gender: usize, age: usize) -> ScoredExample {
    ScoredExample {
        score,
        label,
        groups: GroupAssignment { race_group: race, gender_group: gender, age_group: age },
    }
}

#[test]
fn identical_groups_give_zero_disparity() {
    let mut ex = Vec::new();
    for g in 0..2 {
        for (s, y) in [(0.02, 0), (0.1, 0), (0.5, 1), (0.05, 1)] {
            ex.push(example(s, y, 0, g, 0));
        }
    }
    let r = fairness_report(&ex, &[Attribute::Gender], DEFAULT_THRESHOLD).unwrap();
    let a = r.attribute(Attribute::Gender).unwrap();
    assert_eq!(a.mean_emd_y0, Some(0.0));
    assert_eq!(a.mean_emd_y1, Some(0.0));
    assert_eq!(a.cv_fpr, Some(0.0));
    assert_eq!(a.cv_fnr, Some(0.0));
}

#[test]
fn shifted_group_gives_emd_of_the_shift() {
    let mut r = rng::stream(15, "shift");
    let mut ex = Vec::new();
    for _ in 0..2000 {
        let y = r.random_range(0..2);
        let base = if y == 1 { 0.4 } else { 0.1 };
        let g = r.random_range(0..2);
        let s = base + 0.3 * r.random::<f64>() + 0.1 * g as f64;
        ex.push(example(s, y, 0, g, 0));
    }
    let rep = fairness_report(&ex, &[Attribute::Gender], DEFAULT_THRESHOLD).unwrap();
    let a = rep.attribute(Attribute::Gender).unwrap();
    assert!((a.mean_emd_y0.unwrap() - 0.1).abs() < 0.02);
    assert!((a.mean_emd_y1.unwrap() - 0.1).abs() < 0.02);
}

#[test]
fn report_shape_and_absent_groups() {
    let mut r = rng::stream(16, "report");
    let ex: Vec<ScoredExample> = (0..300)
        .map(|_| example(r.random(), r.random_range(0..2), r.random_range(0..5), r.random_range(0..2), r.random_range(0..4)))
        .collect();
    let rep = fairness_report(&ex, &Attribute::ALL, DEFAULT_THRESHOLD).unwrap();
    assert_eq!(rep.groups.len(), 12);
    for attr in Attribute::ALL {
        let n: usize = rep.groups.iter().filter(|g| g.attribute == attr).map(|g| g.metrics.n).sum();
        assert_eq!(n, 300);
        let a = rep.attribute(attr).unwrap();
        assert!(a.cv_fpr.unwrap() >= 0.0 && a.cv_fnr.unwrap() >= 0.0);
    }
    // race group 5 (White) never drawn
    assert_eq!(rep.attribute(Attribute::Race).unwrap().absent_groups, vec![5]);
    assert_eq!(rep.group(Attribute::Race, 5).unwrap().metrics.auc_roc, None);
    assert_eq!(rep.histograms.len(), 24);
    assert!(rep.histograms.iter().all(|h| h.counts.len() == 50));
    let hist_total: u64 = rep.histograms.iter().filter(|h| h.attribute == Attribute::Age).flat_map(|h| &h.counts).sum();
    assert_eq!(hist_total, 300);

    let t2 = table2_csv(&[("Standard", &rep), ("EQ", &rep)]);
    let lines: Vec<&str> = t2.lines().collect();
    assert_eq!(lines[0], "attribute,metric,Standard,EQ");
    assert_eq!(lines.len(), 1 + 3 * 4);
    assert!(lines[1].starts_with("race,FNR CV,"));
    assert!(lines[4].starts_with("race,Mean EMD | y=1,"));
    assert_eq!(table3_csv(&[("Standard", &rep)]).lines().count(), 2);
    assert_eq!(table4_csv(&[("Standard", &rep)]).lines().count(), 1 + 12 * 5);
    let hist = rep.histogram_csv();
    assert!(hist.starts_with("group,y,bin_left,bin_right,count\nrace:Asian,0,0,0.02,"));
    let text = rep.to_text();
    assert!(text.starts_with("threshold = 0.075\noverall.n = 300\n"));
    assert!(text.contains("attribute.race.absent_groups = [White]"));
}

#[test]
fn threshold_changes_confusion_not_emd() {
    let mut r = rng::stream(17, "thr");
    let ex: Vec<ScoredExample> = (0..500)
        .map(|_| example(r.random(), r.random_range(0..2), 0, r.random_range(0..2), 0))
        .collect();
    let a = fairness_report(&ex, &[Attribute::Gender], 0.075).unwrap();
    let b = fairness_report(&ex, &[Attribute::Gender], 0.2).unwrap();
    assert_ne!(a.overall.confusion, b.overall.confusion);
    assert_eq!(a.attributes[0].mean_emd_y0, b.attributes[0].mean_emd_y0);
    assert_eq!(a.attributes[0].mean_emd_y1, b.attributes[0].mean_emd_y1);
}

#[test]
fn histogram_edges() {
    assert_eq!(histogram([0.0, 0.019, 0.02, 1.0], 50)[..2], [2, 1]);
    assert_eq!(histogram([1.0], 50)[49], 1);
}

#[test]
fn alignment_and_parity() {
    let s = [0.1, 0.2, 0.3, 0.5];
    let y = [0, 0, 1, 1];
    let g = [0, 1, 0, 1];
    assert!((alignment_score(&s, &y, &g, 2).unwrap() - 0.15).abs() < 1e-15);
    assert!((demographic_parity_gap(&s, &g, 2, 0.25).unwrap() - 0.0).abs() < 1e-15);
    assert_eq!(demographic_parity_gap(&s, &g, 2, 0.15).unwrap(), 0.5);
    assert_eq!(mean_pairwise_emd(&s, &y, &[0, 0, 0, 0], 2, 0), None);
}
