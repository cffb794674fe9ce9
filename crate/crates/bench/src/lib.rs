//! Shared fixtures for the criterion benchmarks.

use emobias::corpus::{DatasetManifest, SampleRecord};
use emobias::hierarchy::{build_parrott_hierarchy, EmotionHierarchy};
use emobias::synthkit::{generate_synthetic_suite, SynthDatasetSpec, SynthSpec, SynthSuite};
use std::collections::BTreeMap;

pub fn hierarchy() -> EmotionHierarchy {
    build_parrott_hierarchy()
}

/// One mid-sized synthetic dataset for training and audit benchmarks.
pub fn bench_suite(dim: usize, samples_per_leaf: usize) -> SynthSuite {
    let spec = SynthSpec {
        dim,
        sep_level1: 4.0,
        sep_level2: 2.5,
        sep_level3: 1.5,
        noise_sigma: 1.2,
        samples_per_leaf,
        label_noise: 0.1,
        datasets: vec![SynthDatasetSpec::unshifted("bench")],
        concepts: vec![],
    };
    generate_synthetic_suite(&spec, &hierarchy(), 7).expect("valid spec")
}

/// A manifest dense with caption/tag collisions for the dedup benchmark.
pub fn duplicate_heavy_manifest(records: usize) -> DatasetManifest {
    let make = |i: usize| SampleRecord {
        id: format!("r{i}"),
        dataset_id: "dup".into(),
        labels: BTreeMap::from([(2u8, "joy".to_string())]),
        caption: Some(format!("caption {}", i % 64)),
        tags: Some((0..6).map(|t| format!("tag-{}-{}", i % 32, t)).collect()),
        concepts: None,
        split: None,
        feature_id: format!("r{i}"),
    };
    DatasetManifest {
        dataset_id: "dup".into(),
        records: (0..records).map(make).collect(),
        provenance: String::new(),
    }
}
