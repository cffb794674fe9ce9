//! Dataset manifests, metadata hygiene, splits, and feature alignment.
//!
//! Manifests are JSON Lines (one record per line, unknown fields ignored).
//! Feature stores are a JSON sidecar header plus a raw little-endian `f32`
//! payload; see [`features::FeatureStore`].

mod features;

pub use features::FeatureStore;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hierarchy::{EmotionHierarchy, Label};
use crate::seeding::{derive_seed, rng_from_seed};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

/// Externally predicted object/scene categories attached to a sample.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConceptAnnotations {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub objects: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub scenes: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConceptKind {
    Objects,
    Scenes,
}

impl std::fmt::Display for ConceptKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ConceptKind::Objects => write!(f, "objects"),
            ConceptKind::Scenes => write!(f, "scenes"),
        }
    }
}

impl std::str::FromStr for ConceptKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "objects" => Ok(ConceptKind::Objects),
            "scenes" => Ok(ConceptKind::Scenes),
            other => Err(Error::Parse {
                line: None,
                msg: format!("concept kind must be `objects` or `scenes`, got `{other}`"),
            }),
        }
    }
}

/// One weakly labeled sample: metadata plus a key into a feature store.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub id: String,
    pub dataset_id: String,
    /// Partial map from level to label name; at least one level present.
    pub labels: BTreeMap<u8, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub caption: Option<String>,
    /// Source order is preserved; dedup keys use the first five tags.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tags: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub concepts: Option<ConceptAnnotations>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<Split>,
    /// Defaults to `id` when omitted in the file.
    #[serde(default)]
    pub feature_id: String,
}

impl SampleRecord {
    /// Resolve this record's label at `level`, mapping down from the finest
    /// explicit label when no explicit one exists at `level`.
    pub fn label_at(&self, level: u8, hierarchy: &EmotionHierarchy) -> Result<Label> {
        if let Some(name) = self.labels.get(&level) {
            return Ok(Label::new(name.clone(), level));
        }
        let finest = self.labels.keys().next_back().copied().unwrap_or(0);
        if finest < level {
            return Err(Error::MissingLabel {
                id: self.id.clone(),
                level,
            });
        }
        let name = self.labels[&finest].clone();
        hierarchy.map_label(&Label::new(name, finest), level)
    }

    /// Finest level this record is explicitly labeled at.
    pub fn finest_level(&self) -> Option<u8> {
        self.labels.keys().next_back().copied()
    }

    fn concept_list(&self, kind: ConceptKind) -> &[String] {
        match (&self.concepts, kind) {
            (Some(c), ConceptKind::Objects) => &c.objects,
            (Some(c), ConceptKind::Scenes) => &c.scenes,
            (None, _) => &[],
        }
    }

    /// Concept categories of `kind`, deduplicated, in source order.
    pub fn concepts_of(&self, kind: ConceptKind) -> Vec<&str> {
        let mut seen = HashSet::new();
        self.concept_list(kind)
            .iter()
            .map(String::as_str)
            .filter(|c| seen.insert(*c))
            .collect()
    }
}

/// An ordered collection of records from one dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub dataset_id: String,
    pub records: Vec<SampleRecord>,
    #[serde(default)]
    pub provenance: String,
}

impl DatasetManifest {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

/// Parse and validate a JSONL manifest against the active hierarchy.
pub fn load_manifest(path: impl AsRef<Path>, hierarchy: &EmotionHierarchy) -> Result<DatasetManifest> {
    let file = std::fs::File::open(path.as_ref())?;
    let reader = BufReader::new(file);
    let mut records = Vec::new();
    let mut ids = HashSet::new();
    let mut dataset_id: Option<String> = None;

    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut record: SampleRecord =
            serde_json::from_str(&line).map_err(|e| Error::Parse {
                line: Some(i + 1),
                msg: e.to_string(),
            })?;
        if record.feature_id.is_empty() {
            record.feature_id = record.id.clone();
        }
        if record.labels.is_empty() {
            return Err(Error::Parse {
                line: Some(i + 1),
                msg: format!("record `{}` carries no labels", record.id),
            });
        }
        for (&level, name) in &record.labels {
            if !hierarchy.contains(name, level) {
                return Err(Error::UnknownLabel {
                    label: name.clone(),
                    level,
                });
            }
        }
        if !ids.insert(record.id.clone()) {
            return Err(Error::DuplicateId {
                id: record.id.clone(),
            });
        }
        match &dataset_id {
            None => dataset_id = Some(record.dataset_id.clone()),
            Some(d) if *d != record.dataset_id => {
                return Err(Error::Parse {
                    line: Some(i + 1),
                    msg: format!(
                        "mixed dataset ids in one manifest: `{d}` and `{}`",
                        record.dataset_id
                    ),
                });
            }
            Some(_) => {}
        }
        records.push(record);
    }

    let dataset_id = dataset_id.ok_or(Error::Parse {
        line: None,
        msg: "manifest contains no records".into(),
    })?;
    Ok(DatasetManifest {
        dataset_id,
        records,
        provenance: String::new(),
    })
}

/// Write a manifest as JSON Lines.
pub fn save_manifest(manifest: &DatasetManifest, path: impl AsRef<Path>) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    for record in &manifest.records {
        serde_json::to_writer(&mut out, record)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

fn dedup_key(record: &SampleRecord) -> Option<String> {
    let caption = record
        .caption
        .as_deref()
        .map(|c| c.to_lowercase().split_whitespace().collect::<Vec<_>>().join(" "))
        .filter(|c| !c.is_empty());
    let tags: Vec<String> = record
        .tags
        .iter()
        .flatten()
        .take(5)
        .map(|t| t.to_lowercase())
        .collect();
    if caption.is_none() && tags.is_empty() {
        return None;
    }
    let mut key = caption.unwrap_or_default();
    for t in &tags {
        key.push('\u{1f}');
        key.push_str(t);
    }
    Some(key)
}

/// Drop duplicates keyed on normalized caption plus the first five tags,
/// keeping the first record of each group. Records with neither caption nor
/// tags are never grouped.
pub fn dedup_by_metadata(manifest: &DatasetManifest) -> DatasetManifest {
    let mut seen = HashSet::new();
    let records = manifest
        .records
        .iter()
        .filter(|r| match dedup_key(r) {
            Some(key) => seen.insert(key),
            None => true,
        })
        .cloned()
        .collect();
    DatasetManifest {
        dataset_id: manifest.dataset_id.clone(),
        records,
        provenance: manifest.provenance.clone(),
    }
}

fn tag_is_english(tag: &str) -> bool {
    tag.chars()
        .all(|c| c.is_ascii_alphanumeric() || c == '-' || c == ' ')
}

/// Drop records where any tag falls outside basic Latin letters, digits,
/// hyphen, or space. Records without tags are kept.
pub fn filter_non_english_tags(manifest: &DatasetManifest) -> DatasetManifest {
    filter_tags_by(manifest, tag_is_english)
}

/// Generalized tag filter: keep a record iff every tag passes `keep`.
pub fn filter_tags_by(
    manifest: &DatasetManifest,
    keep: impl Fn(&str) -> bool,
) -> DatasetManifest {
    let records = manifest
        .records
        .iter()
        .filter(|r| r.tags.iter().flatten().all(|t| keep(t)))
        .cloned()
        .collect();
    DatasetManifest {
        dataset_id: manifest.dataset_id.clone(),
        records,
        provenance: manifest.provenance.clone(),
    }
}

/// Split per class at `level`: each class's train count is
/// `round(train_frac * n)`, so the train fraction is within one sample of
/// `train_frac`. Labels must be explicit at `level`.
pub fn stratified_split(
    manifest: &DatasetManifest,
    train_frac: f64,
    level: u8,
    seed: u64,
) -> Result<(DatasetManifest, DatasetManifest)> {
    if !(train_frac > 0.0 && train_frac < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "train_frac must lie in (0, 1), got {train_frac}"
        )));
    }
    let mut by_class: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, record) in manifest.records.iter().enumerate() {
        let name = record.labels.get(&level).ok_or(Error::MissingLabel {
            id: record.id.clone(),
            level,
        })?;
        by_class.entry(name).or_default().push(i);
    }

    let mut in_train = vec![false; manifest.records.len()];
    for (class, mut indices) in by_class {
        let mut rng = rng_from_seed(derive_seed(seed, &format!("split:{class}")));
        indices.shuffle(&mut rng);
        let n_train = (train_frac * indices.len() as f64).round() as usize;
        for &i in indices.iter().take(n_train) {
            in_train[i] = true;
        }
    }

    let pick = |want_train: bool, tag: Split| DatasetManifest {
        dataset_id: manifest.dataset_id.clone(),
        provenance: manifest.provenance.clone(),
        records: manifest
            .records
            .iter()
            .enumerate()
            .filter(|(i, _)| in_train[*i] == want_train)
            .map(|(_, r)| {
                let mut r = r.clone();
                r.split = Some(tag);
                r
            })
            .collect(),
    };
    Ok((pick(true, Split::Train), pick(false, Split::Test)))
}

/// Partition by existing split tags; `None` unless every record is tagged.
pub fn split_by_tags(manifest: &DatasetManifest) -> Option<(DatasetManifest, DatasetManifest)> {
    if manifest.records.iter().any(|r| r.split.is_none()) {
        return None;
    }
    let pick = |tag: Split| DatasetManifest {
        dataset_id: manifest.dataset_id.clone(),
        provenance: manifest.provenance.clone(),
        records: manifest
            .records
            .iter()
            .filter(|r| r.split == Some(tag))
            .cloned()
            .collect(),
    };
    Some((pick(Split::Train), pick(Split::Test)))
}

/// Draw exactly `counts[class]` records per class at `level`, seeded.
pub fn sample_per_class(
    manifest: &DatasetManifest,
    counts: &BTreeMap<String, usize>,
    level: u8,
    seed: u64,
) -> Result<DatasetManifest> {
    let mut by_class: HashMap<&str, Vec<usize>> = HashMap::new();
    for (i, record) in manifest.records.iter().enumerate() {
        if let Some(name) = record.labels.get(&level) {
            by_class.entry(name).or_default().push(i);
        }
    }

    let mut chosen = Vec::new();
    for (class, &want) in counts {
        let pool = by_class.get(class.as_str()).cloned().unwrap_or_default();
        if pool.len() < want {
            return Err(Error::InsufficientSamples {
                class: class.clone(),
                available: pool.len(),
                requested: want,
            });
        }
        let mut pool = pool;
        let mut rng = rng_from_seed(derive_seed(seed, &format!("sample:{class}")));
        pool.shuffle(&mut rng);
        chosen.extend(pool.into_iter().take(want));
    }
    chosen.sort_unstable();

    Ok(DatasetManifest {
        dataset_id: manifest.dataset_id.clone(),
        provenance: manifest.provenance.clone(),
        records: chosen
            .into_iter()
            .map(|i| manifest.records[i].clone())
            .collect(),
    })
}

/// Records paired with their feature rows. Cheap to subset; never copies
/// feature data.
#[derive(Debug, Clone)]
pub struct CorpusView<'a> {
    manifest: &'a DatasetManifest,
    store: &'a FeatureStore,
    /// (record index, feature row) pairs.
    entries: Vec<(usize, usize)>,
}

impl<'a> CorpusView<'a> {
    pub fn dataset_id(&self) -> &str {
        &self.manifest.dataset_id
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.store.dim()
    }

    pub fn record(&self, i: usize) -> &'a SampleRecord {
        &self.manifest.records[self.entries[i].0]
    }

    pub fn feature(&self, i: usize) -> &'a [f32] {
        self.store.row(self.entries[i].1)
    }

    pub fn store(&self) -> &'a FeatureStore {
        self.store
    }

    /// New view over the positions in `keep` (indices into this view).
    pub fn subset(&self, keep: &[usize]) -> CorpusView<'a> {
        CorpusView {
            manifest: self.manifest,
            store: self.store,
            entries: keep.iter().map(|&i| self.entries[i]).collect(),
        }
    }

    /// Positions whose record satisfies `pred`.
    pub fn positions_where(&self, pred: impl Fn(&SampleRecord) -> bool) -> Vec<usize> {
        (0..self.len()).filter(|&i| pred(self.record(i))).collect()
    }

    /// Finest level at which every record in the view resolves a label.
    pub fn native_level(&self) -> Option<u8> {
        (0..self.len())
            .map(|i| self.record(i).finest_level().unwrap_or(0))
            .min()
            .filter(|&l| l > 0)
    }
}

/// Pair each manifest record with its feature row.
pub fn align<'a>(
    manifest: &'a DatasetManifest,
    store: &'a FeatureStore,
) -> Result<CorpusView<'a>> {
    let mut entries = Vec::with_capacity(manifest.records.len());
    let mut missing = Vec::new();
    for (i, record) in manifest.records.iter().enumerate() {
        match store.row_index(&record.feature_id) {
            Some(row) => entries.push((i, row)),
            None => missing.push(record.feature_id.clone()),
        }
    }
    if !missing.is_empty() {
        return Err(Error::MissingFeature { ids: missing });
    }
    Ok(CorpusView {
        manifest,
        store,
        entries,
    })
}

/// Per-manifest summary used by the `corpus stats` subcommand.
#[derive(Debug, Clone, Serialize)]
pub struct ManifestStats {
    pub dataset_id: String,
    pub records: usize,
    pub label_counts: BTreeMap<u8, BTreeMap<String, usize>>,
    pub with_caption: usize,
    pub with_tags: usize,
    pub with_concepts: usize,
    pub split_train: usize,
    pub split_test: usize,
}

impl ManifestStats {
    pub fn compute(manifest: &DatasetManifest) -> Self {
        let mut label_counts: BTreeMap<u8, BTreeMap<String, usize>> = BTreeMap::new();
        let mut with_caption = 0;
        let mut with_tags = 0;
        let mut with_concepts = 0;
        let mut split_train = 0;
        let mut split_test = 0;
        for r in &manifest.records {
            for (&level, name) in &r.labels {
                *label_counts
                    .entry(level)
                    .or_default()
                    .entry(name.clone())
                    .or_default() += 1;
            }
            with_caption += usize::from(r.caption.is_some());
            with_tags += usize::from(r.tags.as_ref().is_some_and(|t| !t.is_empty()));
            with_concepts += usize::from(r.concepts.is_some());
            match r.split {
                Some(Split::Train) => split_train += 1,
                Some(Split::Test) => split_test += 1,
                None => {}
            }
        }
        ManifestStats {
            dataset_id: manifest.dataset_id.clone(),
            records: manifest.records.len(),
            label_counts,
            with_caption,
            with_tags,
            with_concepts,
            split_train,
            split_test,
        }
    }
}

#[cfg(test)]
mod tests;
