//! Three-level emotion taxonomy and the coarse-to-fine label mapping operator.
//!
//! The default taxonomy is Parrott's tree: two primary polarities, six basic
//! emotions, and 25 fine-grained categories. Alternative taxonomies can be
//! loaded from a JSON file, so other emotion wheels are auditable without
//! code changes.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A label name pinned to a hierarchy level (1-based, 1 = coarsest).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Label {
    pub name: String,
    pub level: u8,
}

impl Label {
    pub fn new(name: impl Into<String>, level: u8) -> Self {
        Self {
            name: name.into(),
            level,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@{}", self.name, self.level)
    }
}

/// An ordered list of label spaces plus a child-to-parent map.
///
/// Immutable after construction; share freely across threads.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EmotionHierarchy {
    pub version: String,
    /// `levels[k]` is the label space at level `k + 1`, coarsest first.
    pub levels: Vec<Vec<String>>,
    /// Maps each label at level k (k > 1) to its parent at level k - 1.
    pub parents: HashMap<String, String>,
    #[serde(skip)]
    index: HashMap<String, u8>,
}

/// One structural violation found by [`EmotionHierarchy::validate`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum Violation {
    EmptyLevel { level: u8 },
    DuplicateName { name: String },
    MissingParent { label: String, level: u8 },
    BadParent { label: String, parent: String },
    DanglingParentEntry { child: String },
}

/// Violations collected over a hierarchy; empty iff the hierarchy is well-formed.
#[derive(Debug, Clone, Default, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }
}

impl EmotionHierarchy {
    /// Assemble a hierarchy from raw parts and build the lookup index.
    pub fn new(
        version: impl Into<String>,
        levels: Vec<Vec<String>>,
        parents: HashMap<String, String>,
    ) -> Self {
        let mut h = Self {
            version: version.into(),
            levels,
            parents,
            index: HashMap::new(),
        };
        h.rebuild_index();
        h
    }

    fn rebuild_index(&mut self) {
        self.index.clear();
        for (k, names) in self.levels.iter().enumerate() {
            for name in names {
                // First occurrence wins; duplicates surface via validate().
                self.index.entry(name.clone()).or_insert(k as u8 + 1);
            }
        }
    }

    /// Number of levels.
    pub fn depth(&self) -> u8 {
        self.levels.len() as u8
    }

    /// Label space at `level` (1-based).
    pub fn level_labels(&self, level: u8) -> Result<&[String]> {
        self.levels
            .get(level as usize - 1)
            .map(Vec::as_slice)
            .ok_or(Error::UnknownLabel {
                label: format!("<level {level}>"),
                level,
            })
    }

    /// Whether `name` is a valid label at `level`.
    pub fn contains(&self, name: &str, level: u8) -> bool {
        self.index.get(name) == Some(&level)
    }

    /// The level of `name`, if it is a known label.
    pub fn level_of(&self, name: &str) -> Option<u8> {
        self.index.get(name).copied()
    }

    /// Map `label` to its unique ancestor at `target_level`.
    ///
    /// Identity when `target_level == label.level`; `InvalidDirection` when
    /// asked to go finer.
    pub fn map_label(&self, label: &Label, target_level: u8) -> Result<Label> {
        if !self.contains(&label.name, label.level) {
            return Err(Error::UnknownLabel {
                label: label.name.clone(),
                level: label.level,
            });
        }
        if target_level > label.level {
            return Err(Error::InvalidDirection {
                from: label.level,
                to: target_level,
            });
        }
        if target_level == 0 {
            return Err(Error::InvalidDirection {
                from: label.level,
                to: 0,
            });
        }
        let mut name = label.name.clone();
        let mut level = label.level;
        while level > target_level {
            name = self
                .parents
                .get(&name)
                .cloned()
                .ok_or_else(|| Error::UnknownLabel {
                    label: name.clone(),
                    level,
                })?;
            level -= 1;
        }
        Ok(Label::new(name, target_level))
    }

    /// Convenience wrapper over [`map_label`](Self::map_label) for bare names.
    pub fn map_name(&self, name: &str, level: u8, target_level: u8) -> Result<String> {
        Ok(self.map_label(&Label::new(name, level), target_level)?.name)
    }

    /// Check structural invariants: nonempty levels, unique names, and a
    /// valid parent for every label below the top level.
    ///
    /// Level sizes are not pinned here; loaded taxonomies may have any shape.
    pub fn validate(&self) -> ValidationReport {
        let mut report = ValidationReport::default();
        let mut seen: HashMap<&str, u8> = HashMap::new();

        for (k, names) in self.levels.iter().enumerate() {
            let level = k as u8 + 1;
            if names.is_empty() {
                report.violations.push(Violation::EmptyLevel { level });
            }
            for name in names {
                if seen.insert(name.as_str(), level).is_some() {
                    report
                        .violations
                        .push(Violation::DuplicateName { name: name.clone() });
                }
            }
        }

        for (k, names) in self.levels.iter().enumerate().skip(1) {
            let level = k as u8 + 1;
            let above = &self.levels[k - 1];
            for name in names {
                match self.parents.get(name) {
                    None => report.violations.push(Violation::MissingParent {
                        label: name.clone(),
                        level,
                    }),
                    Some(p) if !above.contains(p) => {
                        report.violations.push(Violation::BadParent {
                            label: name.clone(),
                            parent: p.clone(),
                        })
                    }
                    Some(_) => {}
                }
            }
        }

        let known: Vec<&String> = self.levels.iter().skip(1).flatten().collect();
        for child in self.parents.keys() {
            if !known.contains(&child) {
                report
                    .violations
                    .push(Violation::DanglingParentEntry {
                        child: child.clone(),
                    });
            }
        }

        report
    }

    /// Load a taxonomy from a JSON file (`{version, levels, parents}`).
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let mut h: EmotionHierarchy = serde_json::from_str(text)?;
        h.rebuild_index();
        let report = h.validate();
        if !report.is_empty() {
            return Err(Error::Parse {
                line: None,
                msg: format!("taxonomy file is malformed: {:?}", report.violations),
            });
        }
        Ok(h)
    }

    pub fn to_json(&self) -> Result<String> {
        // Sort the parent map for byte-stable output.
        #[derive(Serialize)]
        struct Stable<'a> {
            version: &'a str,
            levels: &'a [Vec<String>],
            parents: std::collections::BTreeMap<&'a str, &'a str>,
        }
        let stable = Stable {
            version: &self.version,
            levels: &self.levels,
            parents: self
                .parents
                .iter()
                .map(|(k, v)| (k.as_str(), v.as_str()))
                .collect(),
        };
        Ok(serde_json::to_string_pretty(&stable)?)
    }

    pub fn to_file(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }
}

/// Level-2 emotions with their level-1 polarity and level-3 children.
///
/// The fine roster follows Parrott's secondary tier. Two secondary names
/// collide with their own basic emotion (sadness, surprise); the tertiary
/// stand-ins `sorrow` and `amazement` keep names unique across levels. The
/// `version` string records this edit.
const PARROTT: &[(&str, &str, &[&str])] = &[
    (
        "anger",
        "negative",
        &["irritation", "exasperation", "rage", "disgust", "envy", "torment"],
    ),
    ("fear", "negative", &["horror", "nervousness"]),
    (
        "joy",
        "positive",
        &[
            "cheerfulness",
            "zest",
            "contentment",
            "pride",
            "optimism",
            "enthrallment",
            "relief",
        ],
    ),
    ("love", "positive", &["affection", "lust", "longing"]),
    (
        "sadness",
        "negative",
        &["suffering", "sorrow", "disappointment", "shame", "neglect", "sympathy"],
    ),
    ("surprise", "positive", &["amazement"]),
];

/// Build the default 2/6/25 taxonomy.
pub fn build_parrott_hierarchy() -> EmotionHierarchy {
    let level1 = vec!["positive".to_string(), "negative".to_string()];
    let mut level2 = Vec::with_capacity(6);
    let mut level3 = Vec::with_capacity(25);
    let mut parents = HashMap::new();

    for (basic, polarity, fine) in PARROTT {
        level2.push(basic.to_string());
        parents.insert(basic.to_string(), polarity.to_string());
        for f in *fine {
            level3.push(f.to_string());
            parents.insert(f.to_string(), basic.to_string());
        }
    }

    EmotionHierarchy::new(
        "parrott-2001.r1 (sorrow/amazement stand in for duplicated secondary names)",
        vec![level1, level2, level3],
        parents,
    )
}
