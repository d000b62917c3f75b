use ate_repair::estimator::{self, EstimatorConfig};
use ate_repair::oracle::fixtures::subset_sum;
use ate_repair::oracle::{generate, PlantSpec, SynthSpec};
use ate_repair::tuple::{
    amplify_with_knn, build_cluster_index, influence, repair_tuples, repair_tuples_single_update, InfluenceEngine,
};
use ate_repair::TupleConfig;

#[test]
fn fixture_influences() {
    let (data, query) = subset_sum();
    let engine = InfluenceEngine::new(&data, &query, &EstimatorConfig::default()).unwrap();
    assert!((influence(&engine, 2).unwrap() - 1.25).abs() < 1e-12);
    for control in 4..7 {
        assert!(influence(&engine, control).unwrap().abs() < 1e-12);
    }
}

#[test]
fn fixture_single_removal() {
    let (data, query) = subset_sum();
    let cfg = TupleConfig::default();
    for r in [repair_tuples(&data, &query, &cfg).unwrap(), repair_tuples_single_update(&data, &query, &cfg).unwrap()] {
        assert!(r.hit_range);
        assert_eq!(r.removed_ids, vec![2]);
        assert!(r.ate_after.abs() < 1e-12);
    }
}

#[test]
fn already_in_range_is_vacuous() {
    let (data, query) = subset_sum();
    let q = query.with_target(1.0, 0.5);
    let r = repair_tuples(&data, &q, &TupleConfig::default()).unwrap();
    assert!(r.hit_range);
    assert_eq!(r.removed_count, 0);
}

#[test]
fn planted_noise_upper_bound() {
    let spec = SynthSpec {
        planted: PlantSpec { fraction: 0.02, ..PlantSpec::default() },
        ..SynthSpec::default()
    };
    let (data, truth) = generate(&spec, 11).unwrap();
    let q = truth.query.with_target(truth.clean_ate, 1e-6 * truth.clean_ate.abs());
    let t = std::time::Instant::now();
    let r = repair_tuples(&data, &q, &TupleConfig::default()).unwrap();
    eprintln!("removed {} planted {} hit {} stop {:?} in {:?}", r.removed_count, truth.planted_ids.len(), r.hit_range, r.stop_reason, t.elapsed());
    assert!(r.hit_range);
    assert!(r.removed_count <= truth.planted_ids.len());
    let check = estimator::refit_ate(&data, &q, &EstimatorConfig::default(), &r.removed_ids).unwrap();
    assert!(q.contains(check));
}

#[test]
fn trace_moves_toward_target() {
    let spec = SynthSpec { n: 2000, planted: PlantSpec { fraction: 0.05, ..PlantSpec::default() }, ..SynthSpec::default() };
    let (data, truth) = generate(&spec, 3).unwrap();
    let q = truth.query.with_target(truth.clean_ate, 1e-3);
    let r = repair_tuples(&data, &q, &TupleConfig::default()).unwrap();
    let mut prev = r.ate_before;
    for rec in r.trace() {
        if rec.action.starts_with("remove") {
            assert!((q.target - prev).signum() * (rec.ate - prev) > 0.0, "{rec:?}");
        }
        prev = rec.ate;
    }
    let again = repair_tuples(&data, &q, &TupleConfig::default()).unwrap();
    assert_eq!(again.removed_ids, r.removed_ids);
    assert_eq!(again.trace, r.trace);
}

#[test]
fn blobs_are_recovered() {
    use ate_repair::data::{AttrKind, Attribute, Column, Dataset, Schema};
    use ate_repair::CausalQuery;
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
    let centres = [(-10.0, 0.0), (0.0, 10.0), (10.0, -10.0)];
    let (mut t, mut o, mut z, mut label) = (vec![], vec![], vec![], vec![]);
    for i in 0..300 {
        let (cz, co) = centres[i % 3];
        t.push((i % 2) as f64);
        z.push(cz + rng.random_range(-1.0..1.0));
        o.push(co + rng.random_range(-1.0..1.0));
        label.push(i % 3);
    }
    let schema = Schema::new(vec![
        Attribute { name: "T".into(), kind: AttrKind::NumericBinary },
        Attribute { name: "O".into(), kind: AttrKind::NumericContinuous },
        Attribute { name: "Z".into(), kind: AttrKind::NumericContinuous },
    ])
    .unwrap();
    let data = Dataset::from_columns(schema, vec![Column::Numeric(t), Column::Numeric(o), Column::Numeric(z)]).unwrap();
    let q = CausalQuery::new("T", "O", ["Z"], 0.0, 0.0);
    let index = build_cluster_index(&data, &q, Some(3), 2, 1).unwrap();
    let mut pure = 0;
    for c in 0..index.k {
        let mut counts = [0; 3];
        for &m in &index.members[c] {
            counts[label[m]] += 1;
        }
        pure += counts.iter().max().unwrap();
    }
    assert!(pure as f64 / 300.0 >= 0.95, "purity {pure}");
    for (c, reps) in index.representatives.iter().enumerate() {
        assert_eq!(reps[0], index.members[c][0]);
    }
}

#[test]
fn knn_picks_up_duplicates() {
    use ate_repair::data::{AttrKind, Attribute, Column, Dataset, Schema};
    use ate_repair::CausalQuery;
    let mut t = vec![1.0; 101];
    let mut o = vec![7.0; 101];
    for i in 0..200 {
        t.push((i % 2) as f64);
        o.push(i as f64 / 10.0);
    }
    let schema = Schema::new(vec![
        Attribute { name: "T".into(), kind: AttrKind::NumericBinary },
        Attribute { name: "O".into(), kind: AttrKind::NumericContinuous },
    ])
    .unwrap();
    let data = Dataset::from_columns(schema, vec![Column::Numeric(t), Column::Numeric(o)]).unwrap();
    let q = CausalQuery::new("T", "O", Vec::<String>::new(), 0.0, 0.0);
    let out = amplify_with_knn(&data, &q, &[0], 100).unwrap();
    assert_eq!(out.len(), 101);
    let mut sorted = out.clone();
    sorted.sort();
    assert_eq!(sorted, (0..101).collect::<Vec<_>>());
    assert_eq!(amplify_with_knn(&data, &q, &[3, 3], 0).unwrap(), vec![3]);
}
