use std::collections::HashMap;

use ate_repair::data::{satisfies, AttrKind, Attribute, Column, Predicate};
use ate_repair::oracle::fixtures::four_treated;
use ate_repair::oracle::{generate, PlantSpec, SynthSpec};
use ate_repair::pattern::{most_specific_groups, remove_predicate, PredicateWeights};
use ate_repair::{repair_pattern, CausalQuery, Dataset, Pattern, PatternConfig, Schema, StopReason};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn categorical_table(cats: &[(&str, Vec<String>)]) -> (Dataset, CausalQuery) {
    let n = cats[0].1.len();
    let mut attrs = vec![
        Attribute {
            name: "T".into(),
            kind: AttrKind::NumericBinary,
        },
        Attribute {
            name: "O".into(),
            kind: AttrKind::NumericContinuous,
        },
    ];
    let mut cols = vec![
        Column::Numeric((0..n).map(|i| (i % 2) as f64).collect()),
        Column::Numeric((0..n).map(|i| i as f64).collect()),
    ];
    for (name, values) in cats {
        attrs.push(Attribute {
            name: (*name).into(),
            kind: AttrKind::Categorical,
        });
        cols.push(Column::categorical_from(values));
    }
    let data = Dataset::from_columns(Schema::new(attrs).unwrap(), cols).unwrap();
    (data, CausalQuery::new("T", "O", Vec::<String>::new(), 0.0, 0.0))
}

fn strings(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

#[test]
fn full_grid_yields_one_group_per_combination() {
    let a = strings(&["x", "x", "y", "y", "x", "y", "x", "y"]);
    let b = strings(&["p", "q", "p", "q", "p", "q", "q", "p"]);
    let (data, q) = categorical_table(&[("A", a), ("B", b)]);
    let groups = most_specific_groups(&data, &q).unwrap();
    assert_eq!(groups.len(), 4);
    assert_eq!(groups.iter().map(|(_, s)| s).sum::<usize>(), 8);
    for (p, s) in &groups {
        assert_eq!(p.len(), 2);
        assert_eq!(satisfies(p, &data).unwrap().len(), *s);
    }
}

#[test]
fn absent_combinations_are_not_reported() {
    let a = strings(&["x", "x", "y", "y"]);
    let b = strings(&["p", "q", "p", "p"]);
    let (data, q) = categorical_table(&[("A", a), ("B", b)]);
    let groups = most_specific_groups(&data, &q).unwrap();
    assert_eq!(groups.len(), 3);
    let absent = Pattern::new([("A", "y"), ("B", "q")]).unwrap();
    assert!(groups.iter().all(|(p, _)| *p != absent));
}

#[test]
fn groups_match_a_group_by() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let domains = [("A", 2), ("B", 3), ("C", 2), ("D", 4), ("E", 3)];
    let cats: Vec<(&str, Vec<String>)> = domains
        .iter()
        .map(|&(name, k)| (name, (0..10_000).map(|_| format!("v{}", rng.random_range(0..k))).collect()))
        .collect();
    let mut expect: HashMap<Pattern, usize> = HashMap::new();
    for row in 0..10_000 {
        let p = Pattern::new(cats.iter().map(|(name, v)| (*name, v[row].as_str()))).unwrap();
        *expect.entry(p).or_default() += 1;
    }
    let (data, q) = categorical_table(&cats);
    let got: HashMap<Pattern, usize> = most_specific_groups(&data, &q).unwrap().into_iter().collect();
    assert_eq!(got, expect);
}

#[test]
fn cold_start_drops_predicates_uniformly() {
    let pattern = Pattern::new([("A", "1"), ("B", "1"), ("C", "1")]).unwrap();
    let weights = PredicateWeights::new(1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut counts: HashMap<String, u32> = HashMap::new();
    let draws = 10_000;
    for _ in 0..draws {
        let next = remove_predicate(&pattern, &weights, &mut rng).unwrap();
        let dropped = ["A", "B", "C"].into_iter().find(|a| !next.references(a)).unwrap();
        *counts.entry(dropped.into()).or_default() += 1;
    }
    let e = draws as f64 / 3.0;
    let chi2: f64 = counts.values().map(|&c| (c as f64 - e).powi(2) / e).sum();
    // 99th percentile of chi-square with two degrees of freedom
    assert!(chi2 < 9.21, "{counts:?} chi2 = {chi2}");
}

#[test]
fn heavy_predicate_is_dropped_almost_always() {
    let pattern = Pattern::new([("A", "1"), ("B", "1"), ("C", "1")]).unwrap();
    let mut weights = PredicateWeights::new(1.0);
    let heavy = Predicate {
        attribute: "B".into(),
        value: "1".into(),
    };
    weights.record(&heavy, 100.0);
    assert_eq!(weights.stat(&heavy).success_count, 1);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let hits = (0..2000)
        .filter(|_| !remove_predicate(&pattern, &weights, &mut rng).unwrap().references("B"))
        .count();
    assert!(hits as f64 / 2000.0 > 0.9, "{hits}");
}

#[test]
fn single_predicate_leaves_the_empty_pattern() {
    let p = Pattern::new([("A", "1")]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    assert!(remove_predicate(&p, &PredicateWeights::new(1.0), &mut rng).unwrap().is_empty());
    assert!(remove_predicate(&Pattern::empty(), &PredicateWeights::new(1.0), &mut rng).is_err());
}

fn planted(seed: u64) -> (Dataset, ate_repair::oracle::GroundTruth) {
    let spec = SynthSpec {
        n: 1500,
        categoricals: vec![3, 3, 2],
        planted: PlantSpec {
            fraction: 0.05,
            pattern: vec![(0, 1)],
            ..PlantSpec::default()
        },
        ..SynthSpec::default()
    };
    generate(&spec, seed).unwrap()
}

#[test]
fn planted_subpopulation_is_recovered() {
    let (data, truth) = planted(6);
    let clean = truth.clean_ate;
    let q = truth.query.with_target(clean, 1e-6 * clean.abs());
    let r = repair_pattern(&data, &q, &PatternConfig::default()).unwrap();
    assert!(r.hit_range, "{r:?}");
    assert!(q.contains(r.ate_after));
    let p = r.pattern.unwrap();
    assert_eq!(satisfies(&p, &data).unwrap(), r.removed_ids);
    assert!(r.removed_fraction <= 0.2);
}

#[test]
fn zero_tau_reports_best_effort_pattern() {
    let (data, truth) = planted(2);
    let q = truth.query.with_target(truth.clean_ate, 1e-6);
    let cfg = PatternConfig {
        tau: 0.0,
        k_walks: 20,
        ..PatternConfig::default()
    };
    let r = repair_pattern(&data, &q, &cfg).unwrap();
    assert!(!r.hit_range);
    assert_eq!(r.stop_reason, Some(StopReason::NoSolutionFound));
    assert!(r.pattern.is_some());
}

#[test]
fn interval_already_reached_needs_no_pattern() {
    let (data, truth) = planted(2);
    let q = truth.query.with_target(truth.ate, 0.01);
    let r = repair_pattern(&data, &q, &PatternConfig::default()).unwrap();
    assert!(r.hit_range);
    assert_eq!(r.removed_count, 0);
    assert!(r.pattern.is_none());
}

#[test]
fn identifier_columns_select_any_subset() {
    let (_, augmented) = four_treated();
    let p = Pattern::new([("S1", "0"), ("S4", "0")]).unwrap();
    assert_eq!(satisfies(&p, &augmented).unwrap(), vec![1, 2]);
    for mask in 0u32..16 {
        let keep: Vec<usize> = (0..4).filter(|i| mask & (1 << i) != 0).collect();
        let names: Vec<String> = (0..4).filter(|i| mask & (1 << i) == 0).map(|i| format!("S{}", i + 1)).collect();
        let p = Pattern::new(names.iter().map(|n| (n.as_str(), "0"))).unwrap();
        assert_eq!(satisfies(&p, &augmented).unwrap(), keep, "mask {mask:04b}");
    }
}
