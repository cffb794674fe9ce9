use std::collections::BTreeMap;
use std::io::Write;

use proptest::prelude::*;

use super::*;
use crate::hierarchy::build_parrott_hierarchy;

fn record(id: &str, level: u8, label: &str) -> SampleRecord {
    SampleRecord {
        id: id.to_string(),
        dataset_id: "ds".to_string(),
        labels: BTreeMap::from([(level, label.to_string())]),
        caption: None,
        tags: None,
        concepts: None,
        split: None,
        feature_id: id.to_string(),
    }
}

fn manifest(records: Vec<SampleRecord>) -> DatasetManifest {
    DatasetManifest {
        dataset_id: "ds".to_string(),
        records,
        provenance: String::new(),
    }
}

#[test]
fn load_three_line_manifest() {
    let h = build_parrott_hierarchy();
    let mut f = tempfile::NamedTempFile::new().unwrap();
    writeln!(f, r#"{{"id":"a","dataset_id":"ds","labels":{{"3":"cheerfulness"}},"feature_id":"a"}}"#).unwrap();
    writeln!(f, r#"{{"id":"b","dataset_id":"ds","labels":{{"2":"joy"}},"unknown_field":1}}"#).unwrap();
    writeln!(f, r#"{{"id":"c","dataset_id":"ds","labels":{{"1":"negative"}}}}"#).unwrap();
    let m = load_manifest(f.path(), &h).unwrap();
    assert_eq!(m.len(), 3);
    assert_eq!(m.records[0].labels[&3], "cheerfulness");
    // feature_id falls back to id when omitted
    assert_eq!(m.records[1].feature_id, "b");
}

#[test]
fn load_rejects_duplicate_id() {
    let h = build_parrott_hierarchy();
    let mut f = tempfile::NamedTempFile::new().unwrap();
    writeln!(f, r#"{{"id":"a","dataset_id":"ds","labels":{{"2":"joy"}}}}"#).unwrap();
    writeln!(f, r#"{{"id":"a","dataset_id":"ds","labels":{{"2":"fear"}}}}"#).unwrap();
    assert!(matches!(
        load_manifest(f.path(), &h),
        Err(Error::DuplicateId { .. })
    ));
}

#[test]
fn load_rejects_unknown_label_with_line() {
    let h = build_parrott_hierarchy();
    let mut f = tempfile::NamedTempFile::new().unwrap();
    writeln!(f, r#"{{"id":"a","dataset_id":"ds","labels":{{"2":"melancholy"}}}}"#).unwrap();
    assert!(matches!(
        load_manifest(f.path(), &h),
        Err(Error::UnknownLabel { .. })
    ));
}

#[test]
fn label_at_derives_coarser_levels() {
    let h = build_parrott_hierarchy();
    let r = record("a", 3, "rage");
    assert_eq!(r.label_at(3, &h).unwrap().name, "rage");
    assert_eq!(r.label_at(2, &h).unwrap().name, "anger");
    assert_eq!(r.label_at(1, &h).unwrap().name, "negative");
    let r1 = record("b", 1, "positive");
    assert!(matches!(
        r1.label_at(2, &h),
        Err(Error::MissingLabel { .. })
    ));
}

fn with_meta(mut r: SampleRecord, caption: &str, tags: &[&str]) -> SampleRecord {
    r.caption = Some(caption.to_string());
    r.tags = Some(tags.iter().map(|t| t.to_string()).collect());
    r
}

#[test]
fn dedup_same_caption_and_tags_collapses() {
    let tags = ["sun", "park", "dog", "walk", "fun", "extra"];
    let m = manifest(vec![
        with_meta(record("a", 2, "joy"), "A Sunny day", &tags),
        with_meta(record("b", 2, "joy"), "a sunny  DAY", &tags),
    ]);
    let d = dedup_by_metadata(&m);
    assert_eq!(d.len(), 1);
    assert_eq!(d.records[0].id, "a");
}

#[test]
fn dedup_differs_on_fifth_tag() {
    let m = manifest(vec![
        with_meta(record("a", 2, "joy"), "day", &["1", "2", "3", "4", "5"]),
        with_meta(record("b", 2, "joy"), "day", &["1", "2", "3", "4", "six"]),
    ]);
    assert_eq!(dedup_by_metadata(&m).len(), 2);
}

#[test]
fn dedup_ignores_sixth_tag() {
    let m = manifest(vec![
        with_meta(record("a", 2, "joy"), "day", &["1", "2", "3", "4", "5", "x"]),
        with_meta(record("b", 2, "joy"), "day", &["1", "2", "3", "4", "5", "y"]),
    ]);
    assert_eq!(dedup_by_metadata(&m).len(), 1);
}

#[test]
fn dedup_never_groups_bare_records() {
    let m = manifest(vec![record("a", 2, "joy"), record("b", 2, "joy")]);
    assert_eq!(dedup_by_metadata(&m).len(), 2);
}

#[test]
fn dedup_idempotent_on_randomized_manifest() {
    // 1,000 records drawn from a small caption/tag pool so collisions abound.
    let mut rng = crate::seeding::rng_from_seed(11);
    use rand::Rng;
    let records = (0..1000)
        .map(|i| {
            let caption = format!("caption {}", rng.random_range(0..40u32));
            let tags: Vec<String> = (0..rng.random_range(0..7u32))
                .map(|_| format!("t{}", rng.random_range(0..9u32)))
                .collect();
            let mut r = record(&format!("r{i}"), 2, "joy");
            if rng.random_range(0..4u32) > 0 {
                r.caption = Some(caption);
            }
            if !tags.is_empty() {
                r.tags = Some(tags);
            }
            r
        })
        .collect();
    let m = manifest(records);
    let once = dedup_by_metadata(&m);
    let twice = dedup_by_metadata(&once);
    assert!(once.len() <= m.len());
    assert_eq!(once, twice);
}

#[test]
fn non_english_filter_examples() {
    let kept = with_meta(record("a", 2, "joy"), "c", &["happy", "park"]);
    let dropped = with_meta(record("b", 2, "joy"), "c", &["gl\u{fc}ck"]);
    let mut no_tags = record("c", 2, "joy");
    no_tags.tags = Some(vec![]);
    let m = manifest(vec![kept, dropped, no_tags]);
    let filtered = filter_non_english_tags(&m);
    let ids: Vec<&str> = filtered.records.iter().map(|r| r.id.as_str()).collect();
    assert_eq!(ids, vec!["a", "c"]);
}

#[test]
fn stratified_split_exact_fractions() {
    let m = manifest((0..100).map(|i| record(&format!("r{i}"), 2, "joy")).collect());
    let (train, test) = stratified_split(&m, 0.8, 2, 7).unwrap();
    assert_eq!((train.len(), test.len()), (80, 20));

    let m = manifest((0..10).map(|i| record(&format!("r{i}"), 2, "joy")).collect());
    let (train, test) = stratified_split(&m, 0.9, 2, 7).unwrap();
    assert_eq!((train.len(), test.len()), (9, 1));
}

#[test]
fn stratified_split_deterministic() {
    let m = manifest(
        (0..50)
            .map(|i| record(&format!("r{i}"), 2, if i % 3 == 0 { "joy" } else { "fear" }))
            .collect(),
    );
    let (a_train, a_test) = stratified_split(&m, 0.8, 2, 42).unwrap();
    let (b_train, b_test) = stratified_split(&m, 0.8, 2, 42).unwrap();
    assert_eq!(a_train, b_train);
    assert_eq!(a_test, b_test);
}

#[test]
fn stratified_split_missing_label() {
    let m = manifest(vec![record("a", 3, "rage")]);
    assert!(matches!(
        stratified_split(&m, 0.8, 2, 7),
        Err(Error::MissingLabel { .. })
    ));
}

#[test]
fn stratified_split_rejects_degenerate_fractions() {
    let m = manifest(vec![record("a", 2, "joy")]);
    for frac in [0.0, 1.0, 1.5, -0.2] {
        assert!(matches!(
            stratified_split(&m, frac, 2, 7),
            Err(Error::InvalidArgument(_))
        ));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn split_is_disjoint_covering_and_stratified(
        sizes in proptest::collection::vec(1usize..60, 1..5),
        frac in 0.1f64..0.9,
        seed in 0u64..1000,
    ) {
        let classes = ["anger", "fear", "joy", "love", "sadness", "surprise"];
        let mut records = Vec::new();
        for (c, &n) in sizes.iter().enumerate() {
            for i in 0..n {
                records.push(record(&format!("r{c}-{i}"), 2, classes[c]));
            }
        }
        let m = manifest(records);
        let (train, test) = stratified_split(&m, frac, 2, seed).unwrap();

        let train_ids: HashSet<&str> = train.records.iter().map(|r| r.id.as_str()).collect();
        let test_ids: HashSet<&str> = test.records.iter().map(|r| r.id.as_str()).collect();
        prop_assert!(train_ids.is_disjoint(&test_ids));
        prop_assert_eq!(train_ids.len() + test_ids.len(), m.len());

        for (c, &n) in sizes.iter().enumerate() {
            let got = train.records.iter().filter(|r| r.labels[&2] == classes[c]).count();
            let want = frac * n as f64;
            prop_assert!((got as f64 - want).abs() <= 1.0,
                "class {} got {} want {:.2} of {}", classes[c], got, want, n);
        }
    }

    #[test]
    fn dedup_shrinks_or_keeps(count in 1usize..80, pool in 1usize..6) {
        let records = (0..count)
            .map(|i| with_meta(record(&format!("r{i}"), 2, "joy"), &format!("c{}", i % pool), &[]))
            .collect();
        let m = manifest(records);
        let d = dedup_by_metadata(&m);
        prop_assert!(d.len() <= m.len());
        prop_assert_eq!(dedup_by_metadata(&d), d);
    }
}

#[test]
fn sample_per_class_counts() {
    let mut records = Vec::new();
    for i in 0..600 {
        records.push(record(&format!("p{i}"), 1, "positive"));
    }
    for i in 0..2100 {
        records.push(record(&format!("n{i}"), 1, "negative"));
    }
    let m = manifest(records);
    let counts = BTreeMap::from([
        ("positive".to_string(), 500usize),
        ("negative".to_string(), 2000usize),
    ]);
    let s = sample_per_class(&m, &counts, 1, 7).unwrap();
    assert_eq!(s.len(), 2500);
    assert_eq!(
        s.records.iter().filter(|r| r.labels[&1] == "positive").count(),
        500
    );
}

#[test]
fn sample_per_class_zero_and_insufficient() {
    let m = manifest((0..5).map(|i| record(&format!("r{i}"), 1, "positive")).collect());
    let zero = BTreeMap::from([("positive".to_string(), 0usize)]);
    assert_eq!(sample_per_class(&m, &zero, 1, 7).unwrap().len(), 0);

    let ten = BTreeMap::from([("positive".to_string(), 10usize)]);
    match sample_per_class(&m, &ten, 1, 7) {
        Err(Error::InsufficientSamples {
            class, available, ..
        }) => {
            assert_eq!(class, "positive");
            assert_eq!(available, 5);
        }
        other => panic!("expected InsufficientSamples, got {other:?}"),
    }
}

#[test]
fn align_pairs_records_with_rows() {
    let store = FeatureStore::new(
        3,
        vec!["a".into(), "b".into(), "c".into(), "d".into()],
        (0..12).map(|v| v as f32).collect(),
    )
    .unwrap();
    let m = manifest(vec![
        record("d", 2, "joy"),
        record("a", 2, "joy"),
        record("b", 2, "fear"),
        record("c", 2, "fear"),
    ]);
    let view = align(&m, &store).unwrap();
    assert_eq!(view.len(), 4);
    assert_eq!(view.feature(0), &[9.0, 10.0, 11.0]);
    assert_eq!(view.record(1).id, "a");
}

#[test]
fn view_subsetting_by_predicate() {
    let store = FeatureStore::new(
        2,
        vec!["a".into(), "b".into(), "c".into()],
        vec![0.0; 6],
    )
    .unwrap();
    let m = manifest(vec![
        record("a", 2, "joy"),
        record("b", 2, "fear"),
        record("c", 2, "joy"),
    ]);
    let view = align(&m, &store).unwrap();
    let joyful = view.positions_where(|r| r.labels[&2] == "joy");
    assert_eq!(joyful, vec![0, 2]);
    let sub = view.subset(&joyful);
    assert_eq!(sub.len(), 2);
    assert_eq!(sub.record(1).id, "c");
}

#[test]
fn align_reports_missing_ids() {
    let store = FeatureStore::new(2, vec!["a".into()], vec![0.0, 1.0]).unwrap();
    let m = manifest(vec![record("a", 2, "joy"), record("zz", 2, "joy")]);
    match align(&m, &store) {
        Err(Error::MissingFeature { ids }) => assert_eq!(ids, vec!["zz".to_string()]),
        other => panic!("expected MissingFeature, got {other:?}"),
    }
}

#[test]
fn csv_ingest_then_binary_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let csv_path = dir.path().join("f.csv");
    std::fs::write(&csv_path, "id,f0,f1\na,0.25,-1.5\nb,3.75,0.125\n").unwrap();
    let store = FeatureStore::from_csv(&csv_path).unwrap();
    assert_eq!(store.dim(), 2);
    assert_eq!(store.row_by_id("a").unwrap(), &[0.25, -1.5]);

    let header = dir.path().join("f.features.json");
    store.write(&header).unwrap();
    let loaded = FeatureStore::read(&header).unwrap();
    assert_eq!(loaded, store);
}

#[test]
fn binary_round_trip_is_bit_exact() {
    let mut rng = crate::seeding::rng_from_seed(3);
    use rand::Rng;
    let n = 57;
    let d = 13;
    let data: Vec<f32> = (0..n * d)
        .map(|_| (rng.random::<f64>() * 2e3 - 1e3) as f32)
        .collect();
    let ids = (0..n).map(|i| format!("id{i}")).collect();
    let store = FeatureStore::new(d, ids, data).unwrap();

    let dir = tempfile::tempdir().unwrap();
    let header = dir.path().join("s.features.json");
    store.write(&header).unwrap();
    let loaded = FeatureStore::read(&header).unwrap();
    for i in 0..n {
        for (x, y) in store.row(i).iter().zip(loaded.row(i)) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }
}

#[test]
fn store_rejects_non_finite() {
    assert!(FeatureStore::new(1, vec!["a".into()], vec![f32::NAN]).is_err());
}

#[test]
fn stats_summarize_manifest() {
    let mut r = record("a", 3, "rage");
    r.caption = Some("x".into());
    let m = manifest(vec![r, record("b", 3, "rage"), record("c", 3, "relief")]);
    let stats = ManifestStats::compute(&m);
    assert_eq!(stats.records, 3);
    assert_eq!(stats.label_counts[&3]["rage"], 2);
    assert_eq!(stats.with_caption, 1);
}
