use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

/// Dataset-bias audits and probe training over precomputed features.
#[derive(Debug, Parser)]
#[command(name = "emobias", version, about)]
pub struct Cli {
    /// Seed for every stochastic step.
    #[arg(long, global = true, default_value_t = 7)]
    pub seed: u64,

    /// Report format written to --out.
    #[arg(long, global = true, default_value = "json", value_parser = ["json", "csv", "table"])]
    pub format: String,

    /// Report output path. Relative paths resolve against $EMOBIAS_OUT_DIR.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Taxonomy JSON overriding the built-in hierarchy.
    #[arg(long, global = true)]
    pub taxonomy: Option<PathBuf>,

    /// JSON file of flag defaults; explicit flags win.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Bias audits over one or more datasets.
    Audit {
        #[command(subcommand)]
        audit: AuditCommand,
    },
    /// Train a webly-supervised strategy and report generalization.
    Train(TrainArgs),
    /// Synthetic corpora with known ground truth.
    Synth {
        #[command(subcommand)]
        synth: SynthCommand,
    },
    /// Manifest hygiene and summaries.
    Corpus {
        #[command(subcommand)]
        corpus: CorpusCommand,
    },
}

/// SGD settings shared by every training-backed command.
#[derive(Debug, Clone, Args)]
pub struct SgdOpts {
    #[arg(long, default_value_t = 10)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.01)]
    pub lr: f64,
    #[arg(long, default_value_t = 0.9)]
    pub momentum: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub weight_decay: f64,
    #[arg(long, default_value_t = 24)]
    pub batch_size: usize,
}

impl SgdOpts {
    pub fn to_config(&self, seed: u64) -> emobias::probe::TrainConfig {
        emobias::probe::TrainConfig {
            learning_rate: self.lr,
            momentum: self.momentum,
            weight_decay: self.weight_decay,
            batch_size: self.batch_size,
            epochs: self.epochs,
            seed,
            lr_transition_factor: 0.1,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum AuditCommand {
    /// Train an origin classifier over the given datasets.
    #[command(name = "name-dataset")]
    NameDataset(NameDatasetArgs),
    /// Binary cross-dataset generalization matrix.
    #[command(name = "cross-gen")]
    CrossGen(CrossGenArgs),
    /// Negative-set bias probe for one emotion.
    #[command(name = "neg-bias")]
    NegBias(NegBiasArgs),
    /// Conditional entropy of concept categories.
    Entropy(EntropyArgs),
    /// Relative %-drop from a self accuracy and others accuracies.
    Drop(DropArgs),
}

#[derive(Debug, Args)]
pub struct NameDatasetArgs {
    /// Manifest per dataset (JSONL).
    #[arg(long, num_args = 2.., required = true)]
    pub manifests: Vec<PathBuf>,
    /// Feature-store header per dataset, same order as --manifests.
    #[arg(long, num_args = 2.., required = true)]
    pub features: Vec<PathBuf>,
    #[arg(long, default_value_t = 500)]
    pub train_per: usize,
    #[arg(long, default_value_t = 100)]
    pub test_per: usize,
    #[command(flatten)]
    pub sgd: SgdOpts,
}

#[derive(Debug, Args)]
pub struct CrossGenArgs {
    #[arg(long, num_args = 1.., required = true)]
    pub manifests: Vec<PathBuf>,
    #[arg(long, num_args = 1.., required = true)]
    pub features: Vec<PathBuf>,
    /// Used when records carry no split tags.
    #[arg(long, default_value_t = 0.8)]
    pub train_frac: f64,
    /// Hidden layer widths, e.g. `64` or `64,32`; empty means linear.
    #[arg(long, default_value = "")]
    pub hidden: String,
    #[command(flatten)]
    pub sgd: SgdOpts,
}

#[derive(Debug, Args)]
pub struct NegBiasArgs {
    #[arg(long)]
    pub target_manifest: PathBuf,
    #[arg(long)]
    pub target_features: PathBuf,
    #[arg(long, num_args = 1.., required = true)]
    pub others_manifests: Vec<PathBuf>,
    #[arg(long, num_args = 1.., required = true)]
    pub others_features: Vec<PathBuf>,
    /// Level-2 emotion defining the positive set.
    #[arg(long)]
    pub emotion: String,
    #[arg(long, default_value_t = 500)]
    pub train_pos: usize,
    #[arg(long, default_value_t = 2000)]
    pub train_neg: usize,
    #[arg(long, default_value_t = 200)]
    pub test_pos: usize,
    #[arg(long, default_value_t = 4000)]
    pub test_neg: usize,
    #[arg(long, default_value = "")]
    pub hidden: String,
    #[command(flatten)]
    pub sgd: SgdOpts,
}

#[derive(Debug, Args)]
pub struct EntropyArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub emotion: String,
    /// Concept kind: objects or scenes.
    #[arg(long, default_value = "objects")]
    pub kind: String,
    #[arg(long, default_value_t = 200)]
    pub top_k: usize,
    #[arg(long, default_value_t = 5)]
    pub min_count: u64,
}

#[derive(Debug, Args)]
pub struct DropArgs {
    /// Self accuracy (diagonal).
    #[arg(long = "self")]
    pub self_acc: f64,
    /// Accuracies away from home.
    #[arg(long, num_args = 1.., required = true)]
    pub others: Vec<f64>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub features: PathBuf,
    /// curriculum | direct | self-directed | joint | all
    #[arg(long, default_value = "curriculum")]
    pub strategy: String,
    /// Curriculum stage levels, coarse to fine.
    #[arg(long, default_value = "1,2,3")]
    pub plan: String,
    /// Hidden layer widths; empty means linear.
    #[arg(long, default_value = "64")]
    pub hidden: String,
    #[arg(long, default_value_t = 0.8)]
    pub train_frac: f64,
    /// Extra datasets scored at level 1 (Table-style transfer columns).
    #[arg(long, num_args = 0..)]
    pub eval_manifests: Vec<PathBuf>,
    #[arg(long, num_args = 0..)]
    pub eval_features: Vec<PathBuf>,
    /// Clean-seed size for self-directed training.
    #[arg(long, default_value_t = 500)]
    pub clean_count: usize,
    /// Self-directed retention threshold.
    #[arg(long, default_value_t = 0.5)]
    pub tau: f64,
    #[arg(long, default_value_t = 3)]
    pub max_rounds: usize,
    /// Joint-training head weights, one per hierarchy level.
    #[arg(long, default_value = "1,1,1")]
    pub loss_weights: String,
    /// Checkpoint path for the trained model (single strategy only).
    #[arg(long)]
    pub save_model: Option<PathBuf>,
    #[command(flatten)]
    pub sgd: SgdOpts,
}

#[derive(Debug, Subcommand)]
pub enum SynthCommand {
    Generate(SynthGenerateArgs),
}

#[derive(Debug, Args)]
pub struct SynthGenerateArgs {
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Comma-separated dataset ids; the first is the bias-injection target.
    #[arg(long, default_value = "synth-a,synth-b,synth-c")]
    pub dataset_ids: String,
    #[arg(long, default_value_t = 32)]
    pub dim: usize,
    #[arg(long, default_value_t = 200)]
    pub samples_per_leaf: usize,
    /// Level separations `s1,s2,s3`.
    #[arg(long, default_value = "6,3,1.5")]
    pub sep: String,
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
    /// Weak-label noise rate in [0, 1).
    #[arg(long, default_value_t = 0.0)]
    pub noise_rate: f64,
    /// Per-dataset shift scale along the polarity axis, comma-separated.
    #[arg(long, default_value = "")]
    pub axis_shifts: String,
    /// Number of balanced concepts attached everywhere.
    #[arg(long, default_value_t = 0)]
    pub balanced_concepts: usize,
    /// Emotion whose negative set loses --bias-concept in the target.
    #[arg(long)]
    pub bias_emotion: Option<String>,
    #[arg(long)]
    pub bias_concept: Option<String>,
    #[arg(long, default_value_t = 0.5)]
    pub bias_attach_prob: f64,
    #[arg(long, default_value_t = 4.0)]
    pub bias_gain: f64,
}

#[derive(Debug, Subcommand)]
pub enum CorpusCommand {
    /// Remove metadata duplicates (caption plus first five tags).
    Dedup(DedupArgs),
    /// Stratified train/test split.
    Split(SplitArgs),
    /// Label, metadata, and split counts.
    Stats(StatsArgs),
}

#[derive(Debug, Args)]
pub struct DedupArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub out_manifest: PathBuf,
    /// Also drop records with tags outside basic Latin.
    #[arg(long, default_value_t = false)]
    pub drop_non_english: bool,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, default_value_t = 0.8)]
    pub train_frac: f64,
    #[arg(long, default_value_t = 3)]
    pub level: u8,
    #[arg(long)]
    pub out_train: PathBuf,
    #[arg(long)]
    pub out_test: PathBuf,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[arg(long)]
    pub manifest: PathBuf,
}
