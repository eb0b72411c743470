use std::collections::BTreeSet;

use pairlink::sampling::{holdout_split, sample_fraction, stratified_split, Labeled, SamplingPlan, Split};
use pairlink::PartitionedTable;
use proptest::prelude::*;

#[derive(Debug, Clone, PartialEq)]
struct Item(Option<bool>);

impl Labeled for Item {
    fn class(&self) -> Option<bool> {
        self.0
    }
}

fn z(count: usize, n: usize, p: f64) -> f64 {
    (count as f64 - n as f64 * p) / (n as f64 * p * (1.0 - p)).sqrt()
}

fn ids<R: Clone + Send + Sync + 'static>(t: &PartitionedTable<R>) -> BTreeSet<u64> {
    t.collect().unwrap().iter().map(|r| r.id.0).collect()
}

#[test]
fn bernoulli_counts_within_three_sigma() {
    let n = 200_000;
    let t = PartitionedTable::from_values(vec![(); n], 5).unwrap();
    for (fraction, seed) in [(0.1, 3), (0.5, 11), (0.02, 99), (0.9, 1)] {
        let kept = sample_fraction(&t, fraction, seed).unwrap().len().unwrap();
        let score = z(kept, n, fraction);
        assert!(score.abs() <= 3.0, "fraction {fraction} seed {seed}: kept {kept}, z {score:.2}");
    }
}

#[test]
fn fraction_extremes() {
    let t = PartitionedTable::from_values(vec![0u8; 1000], 3).unwrap();
    assert_eq!(sample_fraction(&t, 0.0, 3).unwrap().len().unwrap(), 0);
    assert_eq!(sample_fraction(&t, 1.0, 3).unwrap().len().unwrap(), 1000);
    assert!(sample_fraction(&t, 1.5, 3).is_err());
    assert!(sample_fraction(&t, -0.1, 3).is_err());
}

#[test]
fn different_seeds_different_samples() {
    let t = PartitionedTable::from_values(vec![0u8; 10_000], 3).unwrap();
    let a = ids(&sample_fraction(&t, 0.1, 3).unwrap());
    let b = ids(&sample_fraction(&t, 0.1, 4).unwrap());
    assert_ne!(a, b);
    assert_eq!(a, ids(&sample_fraction(&t, 0.1, 3).unwrap()));
}

#[test]
fn stratified_fractions_within_three_sigma() {
    let pos = 30_000;
    let neg = 400_000;
    let mut values = vec![Item(Some(true)); pos];
    values.extend(std::iter::repeat(Item(Some(false))).take(neg));
    let t = PartitionedTable::from_values(values, 7).unwrap();
    let plan = SamplingPlan {
        neg_split: [0.6, 0.3, 0.1],
        ..SamplingPlan::default()
    };
    let r = stratified_split(&t, &plan).unwrap();
    let sampled = r.counts.class_total(false);
    assert!(z(sampled, neg, 0.1).abs() <= 3.0, "sampled negatives {sampled}");
    assert_eq!(r.counts.class_total(true), pos);
    for (class, n, fracs) in [(true, pos, plan.pos_split), (false, sampled, plan.neg_split)] {
        for (sp, p) in Split::ALL.iter().zip(fracs) {
            let c = r.counts.get(*sp, class);
            let score = z(c, n, p);
            assert!(score.abs() <= 3.0, "{sp} class {class}: {c} of {n}, z {score:.2}");
        }
    }
    assert!(r.warnings.is_empty());
}

#[test]
fn missing_class_warns() {
    let t = PartitionedTable::from_values(vec![Item(Some(true)); 100], 2).unwrap();
    let r = stratified_split(&t, &SamplingPlan::default()).unwrap();
    assert_eq!(r.warnings.len(), 1);
    assert!(r.warnings[0].contains("negative"));
    assert_eq!(r.counts.class_total(false), 0);
    let m = r.manifest(&SamplingPlan::default());
    assert_eq!(m.get("input.positive"), Some("100"));
    assert!(m.get("warning.0").is_some());
}

#[test]
fn invalid_plans_rejected() {
    let t = PartitionedTable::from_values(vec![Item(Some(true)); 10], 2).unwrap();
    for plan in [
        SamplingPlan {
            pos_split: [0.7, 0.2, 0.2],
            ..SamplingPlan::default()
        },
        SamplingPlan {
            neg_fraction: 1.2,
            ..SamplingPlan::default()
        },
    ] {
        assert!(stratified_split(&t, &plan).is_err());
    }
    assert!(holdout_split(&t, 0.0, 3).is_err());
    assert!(holdout_split(&t, 1.0, 3).is_err());
}

#[test]
fn holdout_fraction_and_complement() {
    let n = 100_000;
    let t = PartitionedTable::from_values(vec![0u8; n], 4).unwrap();
    let (train, test) = holdout_split(&t, 0.2, 3).unwrap();
    let (tr, te) = (ids(&train), ids(&test));
    assert!(tr.is_disjoint(&te));
    assert_eq!(tr.len() + te.len(), n);
    assert!(z(te.len(), n, 0.2).abs() <= 3.0, "test rows {}", te.len());
    // the 0.8 split tests on a superset of the 0.2 split's test rows
    let (train8, test8) = holdout_split(&t, 0.8, 3).unwrap();
    assert!(te.is_subset(&ids(&test8)));
    assert!(ids(&train8).is_subset(&tr));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn stratified_split_is_partition_invariant_and_disjoint(
        labels in prop::collection::vec(prop::option::weighted(0.95, any::<bool>()), 1..600),
        a in 1usize..9,
        b in 1usize..9,
        seed in any::<u64>(),
    ) {
        let values: Vec<Item> = labels.iter().map(|l| Item(*l)).collect();
        let plan = SamplingPlan { seed, neg_fraction: 0.5, ..SamplingPlan::default() };
        let run = |n: usize| {
            let t = PartitionedTable::from_values(values.clone(), n).unwrap();
            let r = stratified_split(&t, &plan).unwrap();
            Split::ALL.map(|sp| r.get(sp).collect().unwrap())
        };
        let ra = run(a);
        prop_assert_eq!(&ra, &run(b));
        let sets: Vec<BTreeSet<u64>> = ra.iter().map(|rows| rows.iter().map(|r| r.id.0).collect()).collect();
        for i in 0..3 {
            for j in i + 1..3 {
                prop_assert!(sets[i].is_disjoint(&sets[j]));
            }
        }
        let assigned: BTreeSet<u64> = sets.iter().flatten().copied().collect();
        for (i, l) in labels.iter().enumerate() {
            match l {
                // every positive lands in some split
                Some(true) => prop_assert!(assigned.contains(&(i as u64))),
                None => prop_assert!(!assigned.contains(&(i as u64))),
                Some(false) => {}
            }
        }
        // within each split rows keep their original relative order
        for rows in &ra {
            prop_assert!(rows.windows(2).all(|w| w[0].id < w[1].id));
        }
    }
}
