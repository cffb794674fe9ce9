use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use emobias::biastests::{conditional_entropy_analysis, EntropyOpts};
use emobias::corpus::{align, dedup_by_metadata, ConceptKind};
use emobias::probe::{init_model, train_sgd, TrainConfig, TrainSet};
use emobias::synthkit::generate_synthetic_suite;
use emobias_bench::{bench_suite, duplicate_heavy_manifest, hierarchy};

fn probe_benches(c: &mut Criterion) {
    let h = hierarchy();
    let suite = bench_suite(32, 40);
    let ds = &suite.datasets[0];
    let view = align(&ds.manifest, &ds.store).unwrap();
    let classes = h.level_labels(3).unwrap().to_vec();
    let data = TrainSet::from_view_level(&view, 3, &h, &classes).unwrap();
    let model = init_model(32, &[64], &classes, 7).unwrap();

    c.bench_function("forward_1000x32_h64_c25", |b| {
        let batch: Vec<&[f32]> = data.features.iter().take(1000).copied().collect();
        b.iter(|| black_box(model.forward(&batch).unwrap()))
    });

    c.bench_function("sgd_epoch_1000x32_h64_c25", |b| {
        let cfg = TrainConfig {
            epochs: 1,
            ..TrainConfig::default()
        };
        b.iter(|| black_box(train_sgd(&model, &data, &cfg).unwrap()))
    });
}

fn audit_benches(c: &mut Criterion) {
    let h = hierarchy();
    let mut spec = emobias::synthkit::benchmark_spec(&["bench"]);
    spec.samples_per_leaf = 40;
    spec.concepts = (0..16)
        .map(|i| emobias::synthkit::ConceptSpec {
            name: format!("concept-{i}"),
            kind: ConceptKind::Objects,
            attach_prob: 0.3,
            feature_gain: 0.0,
            restriction: None,
        })
        .collect();
    let suite = generate_synthetic_suite(&spec, &h, 7).unwrap();
    let manifest = &suite.datasets[0].manifest;

    c.bench_function("conditional_entropy_1000_records", |b| {
        b.iter(|| {
            black_box(
                conditional_entropy_analysis(
                    manifest,
                    &h,
                    "sadness",
                    ConceptKind::Objects,
                    &EntropyOpts::default(),
                )
                .unwrap(),
            )
        })
    });

    c.bench_function("dedup_4096_records", |b| {
        let manifest = duplicate_heavy_manifest(4096);
        b.iter(|| black_box(dedup_by_metadata(&manifest)))
    });
}

fn synth_benches(c: &mut Criterion) {
    c.bench_function("generate_suite_25x40x32", |b| {
        b.iter(|| black_box(bench_suite(32, 40)))
    });
}

criterion_group!(benches, probe_benches, audit_benches, synth_benches);
criterion_main!(benches);
