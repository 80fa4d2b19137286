use credit_ri::dataset::{
    generate_synthetic, simulate_rejection_with, ApplicantRecord, Dataset, FeatureKind, FeatureValue, RejectionConfig,
    Schema,
};
use credit_ri::metrics::{banded_gini, global_indicators, kr, lift_curve, LiftCurve};
use credit_ri::reject_inference::{
    augmentation_weights, control_plan, fit_extrapolation, fit_technique, parcel_labels, parcel_plan, ControlStrategy,
    Technique, TechniqueConfig,
};
use credit_ri::rng::seeded;
use credit_ri::scoring::{fit_logistic, make_bands, BandDirection};

/// One numeric feature; `rows` are (outcome, decision).
fn dataset(rows: &[(Option<u8>, u8)]) -> Dataset {
    let schema = Schema::new(vec!["x".into()], vec![FeatureKind::Numeric]).unwrap();
    let records = rows
        .iter()
        .enumerate()
        .map(|(i, &(y, d))| ApplicantRecord::new(i, vec![FeatureValue::Num(i as f64)], y, d))
        .collect();
    Dataset::new(schema, records).unwrap()
}

fn descending_scores(n: usize) -> Vec<(usize, f64)> {
    (0..n).map(|i| (i, 1.0 - i as f64 / n as f64)).collect()
}

#[test]
fn kr_matches_hand_evaluation() {
    let grid = vec![0.2, 0.4, 0.6, 0.8, 1.0];
    let est = LiftCurve {
        grid: grid.clone(),
        values: vec![0.3, 0.6, 0.8, 0.95, 1.0],
        target_class: 1,
        prevalence: 0.5,
    };
    let val = LiftCurve {
        values: vec![0.25, 0.5, 0.75, 0.9, 1.0],
        ..est.clone()
    };
    // Mean gap 0.25 / 5 = 0.05; ideal minus diagonal: 0.2, 0.4, 0.4, 0.2, 0 → 0.24.
    assert!((kr(&est, &val).unwrap() - 19.0 / 24.0).abs() < 1e-12);
}

#[test]
fn lift_of_constant_scores_follows_the_diagonal() {
    let n = 97;
    let s = vec![0.3; n];
    let y: Vec<u8> = (0..n).map(|i| u8::from(i % 3 != 0)).collect();
    let grid: Vec<f64> = (1..=20).map(|i| i as f64 / 20.0).collect();
    let targets = y.iter().filter(|&&v| v == 1).count() as f64;
    let curve = lift_curve(&s, &y, 1, &grid).unwrap();
    for (a, v) in grid.iter().zip(&curve.values) {
        // Ties keep id order, so the first ⌈a·n⌉ records are captured.
        let m = (a * n as f64 - 1e-9).ceil() as usize;
        let direct = y[..m].iter().filter(|&&v| v == 1).count() as f64 / targets;
        assert!((v - direct).abs() < 1e-12);
        assert!((v - a).abs() <= 2.0 / n as f64 + 1e-12, "a = {a}, lift = {v}");
    }
}

#[test]
fn augmentation_weight_examples() {
    // Band 1: ids 0..10, two rejects. Band 2: ids 10..20, all accepted.
    let rows: Vec<(Option<u8>, u8)> = (0..20)
        .map(|i| {
            if i == 3 || i == 7 {
                (None, 0)
            } else {
                (Some(u8::from(i % 4 != 0)), 1)
            }
        })
        .collect();
    let ds = dataset(&rows);
    let table = make_bands(&descending_scores(20), 2, BandDirection::HighFirst).unwrap();
    let aw = augmentation_weights(&ds, &table);
    assert_eq!(aw.bands[0].weight, Some(1.25));
    assert_eq!(aw.bands[1].weight, Some(1.0));
    assert!(aw.excluded.is_empty());
    assert_eq!(aw.weights.len(), 18);
    assert_eq!(aw.weights.values().sum::<f64>(), 20.0);
}

#[test]
fn parcelling_band_arithmetic() {
    // 90 good and 10 defaulted accepted applicants, 50 rejects, one band.
    let mut rows: Vec<(Option<u8>, u8)> = (0..100).map(|i| (Some(u8::from(i >= 10)), 1)).collect();
    rows.extend((0..50).map(|_| (None, 0)));
    let ds = dataset(&rows);
    let table = make_bands(&descending_scores(150), 1, BandDirection::HighFirst).unwrap();
    let plan = parcel_plan(&ds, &table, 2.0).unwrap();
    assert!((plan[0].reject_rate - 0.2).abs() < 1e-15);
    assert_eq!(plan[0].reject_defaults, 10);
    let labels = parcel_labels(&plan, 11);
    assert_eq!(labels.len(), 50);
    assert_eq!(labels.values().filter(|&&y| y == 0).count(), 10);
    assert_eq!(labels, parcel_labels(&plan, 11));
    assert_eq!(ds.audit().illegal_reads, 0);
}

#[test]
fn parcelling_rate_is_capped() {
    let mut rows: Vec<(Option<u8>, u8)> = (0..10).map(|i| (Some(u8::from(i >= 6)), 1)).collect();
    rows.extend((0..5).map(|_| (None, 0)));
    let ds = dataset(&rows);
    let table = make_bands(&descending_scores(15), 1, BandDirection::HighFirst).unwrap();
    let plan = parcel_plan(&ds, &table, 2.0).unwrap();
    assert_eq!(plan[0].reject_rate, 1.0);
    assert!(parcel_labels(&plan, 3).values().all(|&y| y == 0));
}

#[test]
fn extrapolation_without_rejects_is_the_plain_fit() {
    let ds = generate_synthetic(500, 6, 0.85, 8).unwrap();
    let cfg = TechniqueConfig::new(Technique::Extrapolation);
    let ids = ds.ids();
    let a = fit_extrapolation(&ds, &ids, &cfg).unwrap();
    let b = fit_logistic(&ds, &ids, &vec![1.0; ids.len()], cfg.lambda, 0).unwrap();
    assert_eq!(a.coefficients, b.coefficients);
    assert_eq!(a.intercept, b.intercept);
    assert_eq!(a.to_text(), fit_extrapolation(&ds, &ids, &cfg).unwrap().to_text());
}

#[test]
fn only_control_groups_unmask_outcomes() {
    let raw = generate_synthetic(1200, 8, 0.85, 21).unwrap();
    let ds = simulate_rejection_with(&raw, &RejectionConfig::default(), 21)
        .unwrap()
        .dataset;
    let ids = ds.ids();
    for t in [
        Technique::Extrapolation,
        Technique::Reclassification,
        Technique::Augmentation,
        Technique::Parcelling,
    ] {
        let fit = fit_technique(&ds, &ids, &TechniqueConfig::new(t)).unwrap();
        assert!(fit.provenance.control_sample.is_empty());
        let audit = ds.audit();
        assert_eq!((audit.illegal_reads, audit.unmask_events), (0, 0), "{t}");
    }
    let fit = fit_technique(
        &ds,
        &ids,
        &TechniqueConfig::new(Technique::ControlGroup(ControlStrategy::Gc2)),
    )
    .unwrap();
    assert_eq!(ds.audit().unmask_events, fit.provenance.control_sample.len() as u64);
    assert_eq!(ds.audit().illegal_reads, 0);
}

#[test]
fn rejected_applicants_default_more_than_the_population() {
    let raw = generate_synthetic(6000, 30, 0.9, 4).unwrap();
    let sim = simulate_rejection_with(&raw, &RejectionConfig::default(), 4).unwrap();
    let ds = &sim.dataset;
    assert_eq!(ds.n_rejected(), 300);
    let default_rate =
        |ids: &[usize]| ids.iter().filter(|&&id| ds.oracle_outcome(id).unwrap() == 0).count() as f64 / ids.len() as f64;
    let population = default_rate(&ds.ids());
    assert!((population - sim.population_default_rate).abs() < 1e-12);
    assert!(sim.segment_default_rate >= population);
    assert!(default_rate(&ds.rejected_ids()) >= population);
    let again = simulate_rejection_with(&raw, &RejectionConfig::default(), 4).unwrap();
    assert_eq!(again.dataset.rejected_ids(), ds.rejected_ids());
}

#[test]
fn gc1_gives_every_reject_the_same_inclusion_probability() {
    let scores = descending_scores(300);
    let plan = control_plan(&scores, ControlStrategy::Gc1, 0.3, 20).unwrap();
    assert_eq!(plan.size, 90);
    let draws = 4000;
    let mut hits = vec![0u32; 300];
    let mut rng = seeded(77);
    for _ in 0..draws {
        let ids = plan.draw(&mut rng);
        assert_eq!(ids.len(), 90);
        for id in ids {
            hits[id] += 1;
        }
    }
    let se = (0.3f64 * 0.7 / draws as f64).sqrt();
    for (id, h) in hits.iter().enumerate() {
        let freq = f64::from(*h) / draws as f64;
        assert!((freq - 0.3).abs() < 5.0 * se, "reject {id}: {freq}");
    }
}

#[test]
fn banded_gini_stays_below_ki_and_tightens_with_more_bands() {
    let ds = generate_synthetic(2000, 10, 0.85, 12).unwrap();
    let ids = ds.ids();
    let truth = ds.truth().unwrap();
    let s: Vec<f64> = ids
        .iter()
        .map(|&id| truth.probability(&ds.record(id).features))
        .collect();
    let y: Vec<u8> = ids.iter().map(|&id| ds.oracle_outcome(id).unwrap()).collect();
    let ki = global_indicators(&s, &y, 20).unwrap().ki;
    let mut last = f64::NEG_INFINITY;
    for b in [5, 10, 20, 40, 80] {
        let g = banded_gini(&s, &y, b).unwrap().unwrap();
        assert!(g <= ki + 1e-9, "B = {b}: {g} > {ki}");
        assert!(g >= last - 1e-12, "B = {b}: {g} < {last}");
        last = g;
    }
    let gap20 = ki - banded_gini(&s, &y, 20).unwrap().unwrap();
    assert!(ki - last < gap20 / 2.0);
}
