use std::collections::HashMap;

use serde::Serialize;

use crate::corpus::{ConceptKind, DatasetManifest};
use crate::error::{Error, Result};
use crate::hierarchy::EmotionHierarchy;

/// Binary entropy of a two-way count split, in bits, so the range is [0, 1].
/// Zero iff exactly one side is empty; symmetric in its arguments.
pub fn binary_entropy_bits(count_a: u64, count_b: u64) -> f64 {
    if count_a == 0 || count_b == 0 {
        return 0.0;
    }
    let total = (count_a + count_b) as f64;
    let p = count_a as f64 / total;
    let q = count_b as f64 / total;
    -(p * p.log2() + q * q.log2())
}

#[derive(Debug, Clone, Serialize)]
pub struct EntropyRecord {
    pub name: String,
    pub count_pos: u64,
    pub count_neg: u64,
    pub entropy: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct HistogramBin {
    pub low: f64,
    pub high: f64,
    pub count: usize,
}

/// Ten width-0.1 bins over [0, 1] plus an explicit zero-entropy bucket.
#[derive(Debug, Clone, Serialize)]
pub struct EntropyHistogram {
    pub bins: Vec<HistogramBin>,
    pub zero_count: usize,
    pub total: usize,
}

impl EntropyHistogram {
    fn build(entropies: &[f64]) -> Self {
        let mut bins: Vec<HistogramBin> = (0..10)
            .map(|i| HistogramBin {
                low: i as f64 / 10.0,
                high: (i + 1) as f64 / 10.0,
                count: 0,
            })
            .collect();
        let mut zero_count = 0;
        for &h in entropies {
            let idx = ((h * 10.0).floor() as usize).min(9);
            bins[idx].count += 1;
            if h == 0.0 {
                zero_count += 1;
            }
        }
        Self {
            bins,
            zero_count,
            total: entropies.len(),
        }
    }

    /// Fraction of categories with exactly zero entropy — the headline
    /// bias indicator.
    pub fn zero_fraction(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.zero_count as f64 / self.total as f64
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EntropyOpts {
    pub top_k: usize,
    pub min_count: u64,
}

impl Default for EntropyOpts {
    fn default() -> Self {
        Self {
            top_k: 200,
            min_count: 5,
        }
    }
}

/// Per-category conditional entropy of emotion polarity.
#[derive(Debug, Clone, Serialize)]
pub struct EntropyAnalysis {
    pub emotion: String,
    pub kind: ConceptKind,
    pub records: Vec<EntropyRecord>,
    pub histogram: EntropyHistogram,
}

/// For each frequent concept category, compute the entropy of "does a
/// record bearing it sit in `emotion`'s positive or negative set".
///
/// Candidates are the union of the `top_k` most frequent categories in each
/// set; categories seen fewer than `min_count` times in total are dropped.
pub fn conditional_entropy_analysis(
    manifest: &DatasetManifest,
    hierarchy: &EmotionHierarchy,
    emotion: &str,
    kind: ConceptKind,
    opts: &EntropyOpts,
) -> Result<EntropyAnalysis> {
    if !hierarchy.contains(emotion, 2) {
        return Err(Error::UnknownLabel {
            label: emotion.to_string(),
            level: 2,
        });
    }

    let mut count_pos: HashMap<&str, u64> = HashMap::new();
    let mut count_neg: HashMap<&str, u64> = HashMap::new();
    let mut any = false;
    for record in &manifest.records {
        let categories = record.concepts_of(kind);
        if categories.is_empty() {
            continue;
        }
        any = true;
        let positive = record.label_at(2, hierarchy)?.name == emotion;
        let side = if positive { &mut count_pos } else { &mut count_neg };
        for c in categories {
            *side.entry(c).or_default() += 1;
        }
    }
    if !any {
        return Err(Error::NoConcepts {
            kind: kind.to_string(),
        });
    }

    let top = |counts: &HashMap<&str, u64>| -> Vec<String> {
        let mut entries: Vec<(&str, u64)> = counts.iter().map(|(&c, &n)| (c, n)).collect();
        entries.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
        entries
            .into_iter()
            .take(opts.top_k)
            .map(|(c, _)| c.to_string())
            .collect()
    };
    let mut candidates = top(&count_pos);
    for c in top(&count_neg) {
        if !candidates.contains(&c) {
            candidates.push(c);
        }
    }
    candidates.sort();

    let mut records = Vec::new();
    for name in candidates {
        let pos = count_pos.get(name.as_str()).copied().unwrap_or(0);
        let neg = count_neg.get(name.as_str()).copied().unwrap_or(0);
        if pos + neg < opts.min_count {
            continue;
        }
        records.push(EntropyRecord {
            entropy: binary_entropy_bits(pos, neg),
            name,
            count_pos: pos,
            count_neg: neg,
        });
    }

    let entropies: Vec<f64> = records.iter().map(|r| r.entropy).collect();
    Ok(EntropyAnalysis {
        emotion: emotion.to_string(),
        kind,
        histogram: EntropyHistogram::build(&entropies),
        records,
    })
}
