//! Dataset-bias audits and webly-supervised training strategies for labeled
//! image-emotion corpora.
//!
//! The toolkit works over precomputed feature vectors: manifests describe
//! weakly labeled samples, feature stores hold their embeddings, and from
//! there the bias battery (origin classification, cross-dataset
//! generalization, negative-set probes, conditional-entropy concept
//! analysis) and the training strategies (curriculum, direct, self-directed,
//! joint) are pure, seeded computations.

pub mod biastests;
pub mod corpus;
pub mod curriculum;
pub mod error;
pub mod hierarchy;
pub mod probe;
pub mod report;
pub mod seeding;
pub mod synthkit;

pub use error::{Error, Result};
pub use hierarchy::{build_parrott_hierarchy, EmotionHierarchy, Label};
