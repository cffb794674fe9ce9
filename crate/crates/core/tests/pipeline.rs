//! End-to-end pass through the public API: generate synthetic corpora,
//! round-trip them through the on-disk formats, then run every audit and a
//! strategy comparison on the reloaded data.

use emobias::biastests::{
    conditional_entropy_analysis, cross_generalization, name_that_dataset, negative_bias_test,
    EntropyOpts, NegBiasCounts, SplitPair,
};
use emobias::corpus::{align, load_manifest, save_manifest, stratified_split, ConceptKind, FeatureStore};
use emobias::curriculum::{comparison_rows, curriculum_train, direct_train, StagePlan};
use emobias::hierarchy::build_parrott_hierarchy;
use emobias::probe::TrainConfig;
use emobias::synthkit::{
    generate_synthetic_suite, inject_negative_set_bias, polarity_axis, ConceptSpec,
    SynthDatasetSpec, SynthSpec, TruthTable,
};

#[test]
fn full_pipeline_over_disk_formats() {
    let h = build_parrott_hierarchy();
    let dir = tempfile::tempdir().unwrap();

    // A three-dataset suite: one clean target, one shifted, one with a
    // concept that only the target's positive set carries.
    let dim = 12;
    let axis = polarity_axis(dim, &h, 7).unwrap();
    let spec = SynthSpec {
        dim,
        sep_level1: 4.0,
        sep_level2: 2.2,
        sep_level3: 1.2,
        noise_sigma: 1.1,
        samples_per_leaf: 16,
        label_noise: 0.0,
        datasets: vec![
            SynthDatasetSpec::unshifted("target"),
            SynthDatasetSpec {
                id: "shifted".into(),
                shift: axis.iter().map(|a| a * 2.5).collect(),
            },
            SynthDatasetSpec::unshifted("plain"),
        ],
        concepts: vec![ConceptSpec {
            name: "balloon".into(),
            kind: ConceptKind::Objects,
            attach_prob: 0.5,
            feature_gain: 2.0,
            restriction: None,
        }],
    };
    let spec = inject_negative_set_bias(&spec, "sadness", "balloon").unwrap();
    let suite = generate_synthetic_suite(&spec, &h, 7).unwrap();

    // Round-trip everything through the disk formats.
    let mut loaded = Vec::new();
    for ds in &suite.datasets {
        let id = &ds.manifest.dataset_id;
        let m_path = dir.path().join(format!("{id}.manifest.jsonl"));
        let f_path = dir.path().join(format!("{id}.features.json"));
        let t_path = dir.path().join(format!("{id}.truth.jsonl"));
        save_manifest(&ds.manifest, &m_path).unwrap();
        ds.store.write(&f_path).unwrap();
        ds.truth.save(&t_path).unwrap();

        let manifest = load_manifest(&m_path, &h).unwrap();
        let store = FeatureStore::read(&f_path).unwrap();
        let truth = TruthTable::load(&t_path).unwrap();
        // Provenance is an in-memory note; the record stream must survive.
        assert_eq!(manifest.dataset_id, ds.manifest.dataset_id);
        assert_eq!(manifest.records, ds.manifest.records);
        assert_eq!(truth, ds.truth);
        assert_eq!(store.ids(), ds.store.ids());
        loaded.push((manifest, store));
    }

    let views: Vec<_> = loaded.iter().map(|(m, s)| align(m, s).unwrap()).collect();
    let cfg = TrainConfig {
        epochs: 5,
        ..TrainConfig::default()
    };

    // Origin classification sees the shifted dataset's signature.
    let origin = name_that_dataset(&views, 150, 50, &cfg).unwrap();
    assert_eq!(origin.confusion.classes.len(), 3);
    assert!(origin.accuracy > origin.chance);

    // Cross-dataset generalization over stratified splits.
    let partitions: Vec<_> = loaded
        .iter()
        .map(|(m, s)| {
            let (train, test) = stratified_split(m, 0.8, 3, 7).unwrap();
            (train, test, s)
        })
        .collect();
    let splits: Vec<SplitPair> = partitions
        .iter()
        .map(|(train, test, store)| SplitPair {
            train: align(train, store).unwrap(),
            test: align(test, store).unwrap(),
        })
        .collect();
    let matrix = cross_generalization(&splits, &h, &[], &cfg).unwrap();
    assert_eq!(matrix.acc.len(), 3);
    for row in &matrix.rows {
        assert!(row.self_acc > 50.0, "{}: self {}", row.dataset, row.self_acc);
    }

    // The injected concept shows up as a zero-entropy category.
    let entropy = conditional_entropy_analysis(
        &loaded[0].0,
        &h,
        "sadness",
        ConceptKind::Objects,
        &EntropyOpts::default(),
    )
    .unwrap();
    let balloon = entropy.records.iter().find(|r| r.name == "balloon").unwrap();
    assert_eq!(balloon.entropy, 0.0);

    // Negative-bias probe runs on reduced counts.
    let counts = NegBiasCounts {
        train_pos: 40,
        train_neg: 150,
        test_pos: 20,
        test_neg: 120,
    };
    let neg = negative_bias_test(&views[0], &views[1..], &h, "sadness", &counts, &[], &cfg).unwrap();
    assert!(neg.self_acc > 50.0);

    // Strategy comparison over the target dataset.
    let (train_m, test_m) = stratified_split(&loaded[0].0, 0.8, 3, 7).unwrap();
    let train = align(&train_m, &loaded[0].1).unwrap();
    let test = align(&test_m, &loaded[0].1).unwrap();
    let plan = StagePlan::uniform(&[1, 2, 3], 3);
    let mut curriculum = curriculum_train(&train, &h, &plan, &[16], &cfg).unwrap();
    let mut direct = direct_train(&train, &h, &[16], &cfg).unwrap();
    curriculum
        .evaluate_on(std::slice::from_ref(&test), 1, &h)
        .unwrap();
    direct
        .evaluate_on(std::slice::from_ref(&test), 1, &h)
        .unwrap();
    let rows = comparison_rows(&[curriculum, direct], "target");
    assert_eq!(rows.len(), 2);
    for row in &rows {
        // Quality orderings live in the acceptance suite; this checks the
        // comparison plumbing end to end.
        assert!((0.0..=100.0).contains(&row.self_accuracy), "{row:?}");
        assert!(row.mean_others.is_none());
        assert_eq!(row.per_dataset.len(), 1);
    }
}
