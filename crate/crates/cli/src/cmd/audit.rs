use std::path::PathBuf;

use emobias::biastests::{
    conditional_entropy_analysis, cross_generalization, name_that_dataset, negative_bias_test,
    percent_drop, CrossGenMatrix, EntropyAnalysis, EntropyOpts, NameThatDatasetOutcome,
    NegBiasCounts, NegBiasResult, SplitPair,
};
use emobias::corpus::{align, split_by_tags, stratified_split, ConceptKind, DatasetManifest, FeatureStore};
use emobias::probe::ConfusionMatrix;
use emobias::report::{csv_row, ReportFormat, Table};
use emobias::seeding::derive_seed;
use emobias::{EmotionHierarchy, Result};
use serde::Serialize;

use crate::args::{CrossGenArgs, DropArgs, EntropyArgs, NameDatasetArgs, NegBiasArgs};
use crate::report::{emit, pct, Render};
use crate::{ensure_exists, load_dataset, parse_hidden, GlobalOpts};

#[derive(Serialize)]
struct DropConfig {
    self_acc: f64,
    others: Vec<f64>,
    seed: u64,
}

#[derive(Serialize)]
pub struct DropReport {
    command: String,
    config: DropConfig,
    percent_drop: f64,
}

impl Render for DropReport {
    fn csv(&self) -> String {
        let mut out = String::from("self,others,percent_drop\n");
        out.push_str(&csv_row(&[
            self.config.self_acc.to_string(),
            self.config
                .others
                .iter()
                .map(f64::to_string)
                .collect::<Vec<_>>()
                .join(" "),
            self.percent_drop.to_string(),
        ]));
        out.push('\n');
        out
    }

    fn table(&self) -> String {
        format!("{}\n", pct(self.percent_drop))
    }
}

pub fn run_drop(args: &DropArgs, globals: &GlobalOpts) -> Result<()> {
    let report = DropReport {
        command: "audit drop".into(),
        percent_drop: percent_drop(args.self_acc, &args.others)?,
        config: DropConfig {
            self_acc: args.self_acc,
            others: args.others.clone(),
            seed: globals.seed,
        },
    };
    emit(&report, globals.format, globals.out.as_deref())
}

fn confusion_table(t: &mut Table, confusion: &ConfusionMatrix) {
    for (i, class) in confusion.classes.iter().enumerate() {
        let mut row = vec![class.clone()];
        row.extend(confusion.counts[i].iter().map(u64::to_string));
        t.push(row);
    }
}

#[derive(Serialize)]
struct NameDatasetConfig {
    manifests: Vec<PathBuf>,
    features: Vec<PathBuf>,
    train_per: usize,
    test_per: usize,
    seed: u64,
    epochs: usize,
    learning_rate: f64,
    momentum: f64,
    weight_decay: f64,
    batch_size: usize,
}

#[derive(Serialize)]
pub struct NameDatasetReport {
    command: String,
    config: NameDatasetConfig,
    accuracy_pct: f64,
    chance_pct: f64,
    result: NameThatDatasetOutcome,
}

impl Render for NameDatasetReport {
    fn csv(&self) -> String {
        let mut out = String::from("kind,truth,prediction,value\n");
        out.push_str(&csv_row(&[
            "accuracy_pct".into(),
            String::new(),
            String::new(),
            self.accuracy_pct.to_string(),
        ]));
        out.push('\n');
        out.push_str(&csv_row(&[
            "chance_pct".into(),
            String::new(),
            String::new(),
            self.chance_pct.to_string(),
        ]));
        out.push('\n');
        let cm = &self.result.confusion;
        for (i, truth) in cm.classes.iter().enumerate() {
            for (j, pred) in cm.classes.iter().enumerate() {
                out.push_str(&csv_row(&[
                    "confusion".into(),
                    truth.clone(),
                    pred.clone(),
                    cm.counts[i][j].to_string(),
                ]));
                out.push('\n');
            }
        }
        out
    }

    fn table(&self) -> String {
        let mut header = vec!["truth \\ prediction"];
        let classes: Vec<&str> = self.result.confusion.classes.iter().map(String::as_str).collect();
        header.extend(classes);
        let mut t = Table::new(&header);
        confusion_table(&mut t, &self.result.confusion);
        format!(
            "name-that-dataset accuracy: {}% (chance {}%)\n{}",
            pct(self.accuracy_pct),
            pct(self.chance_pct),
            t.render()
        )
    }
}

pub fn run_name_dataset(args: &NameDatasetArgs, globals: &GlobalOpts) -> Result<()> {
    ensure_exists(args.manifests.iter().chain(&args.features))?;
    let hierarchy = globals.hierarchy()?;
    let datasets = load_datasets(&args.manifests, &args.features, &hierarchy)?;
    let views: Vec<_> = datasets
        .iter()
        .map(|(m, s)| align(m, s))
        .collect::<Result<_>>()?;

    let cfg = args.sgd.to_config(globals.seed);
    let result = name_that_dataset(&views, args.train_per, args.test_per, &cfg)?;
    let report = NameDatasetReport {
        command: "audit name-dataset".into(),
        accuracy_pct: result.accuracy * 100.0,
        chance_pct: result.chance * 100.0,
        config: NameDatasetConfig {
            manifests: args.manifests.clone(),
            features: args.features.clone(),
            train_per: args.train_per,
            test_per: args.test_per,
            seed: globals.seed,
            epochs: cfg.epochs,
            learning_rate: cfg.learning_rate,
            momentum: cfg.momentum,
            weight_decay: cfg.weight_decay,
            batch_size: cfg.batch_size,
        },
        result,
    };
    emit(&report, globals.format, globals.out.as_deref())
}

fn load_datasets(
    manifests: &[PathBuf],
    features: &[PathBuf],
    hierarchy: &EmotionHierarchy,
) -> Result<Vec<(DatasetManifest, FeatureStore)>> {
    if manifests.len() != features.len() {
        return Err(emobias::Error::Parse {
            line: None,
            msg: format!(
                "{} manifests but {} feature stores",
                manifests.len(),
                features.len()
            ),
        });
    }
    manifests
        .iter()
        .zip(features)
        .map(|(m, f)| load_dataset(m, f, hierarchy))
        .collect()
}

#[derive(Serialize)]
struct CrossGenConfig {
    manifests: Vec<PathBuf>,
    features: Vec<PathBuf>,
    train_frac: f64,
    hidden: Vec<usize>,
    seed: u64,
    epochs: usize,
    learning_rate: f64,
}

#[derive(Serialize)]
pub struct CrossGenReport {
    command: String,
    config: CrossGenConfig,
    result: CrossGenMatrix,
}

impl Render for CrossGenReport {
    fn csv(&self) -> String {
        let mut out = String::from("kind,train_on,test_on,value\n");
        let m = &self.result;
        for (i, train) in m.datasets.iter().enumerate() {
            for (j, test) in m.datasets.iter().enumerate() {
                out.push_str(&csv_row(&[
                    "accuracy_pct".into(),
                    train.clone(),
                    test.clone(),
                    m.acc[i][j].to_string(),
                ]));
                out.push('\n');
            }
        }
        for row in &m.rows {
            out.push_str(&csv_row(&[
                "self_pct".into(),
                row.dataset.clone(),
                String::new(),
                row.self_acc.to_string(),
            ]));
            out.push('\n');
            if let Some(v) = row.mean_others {
                out.push_str(&csv_row(&[
                    "mean_others_pct".into(),
                    row.dataset.clone(),
                    String::new(),
                    v.to_string(),
                ]));
                out.push('\n');
            }
            if let Some(v) = row.percent_drop {
                out.push_str(&csv_row(&[
                    "percent_drop".into(),
                    row.dataset.clone(),
                    String::new(),
                    v.to_string(),
                ]));
                out.push('\n');
            }
        }
        out
    }

    fn table(&self) -> String {
        let m = &self.result;
        let mut header = vec!["train \\ test".to_string()];
        header.extend(m.datasets.iter().cloned());
        header.extend(["Self".into(), "Mean Others".into(), "% Drop".into()]);
        let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
        let mut t = Table::new(&header_refs);
        for (i, row) in m.rows.iter().enumerate() {
            let mut cells = vec![row.dataset.clone()];
            for (j, &acc) in m.acc[i].iter().enumerate() {
                // Self cells are starred.
                cells.push(if i == j {
                    format!("{}*", pct(acc))
                } else {
                    pct(acc)
                });
            }
            cells.push(pct(row.self_acc));
            cells.push(row.mean_others.map(pct).unwrap_or_else(|| "-".into()));
            cells.push(row.percent_drop.map(pct).unwrap_or_else(|| "-".into()));
            t.push(cells);
        }
        format!("{}(* marks Self cells)\n", t.render())
    }
}

pub fn run_cross_gen(args: &CrossGenArgs, globals: &GlobalOpts) -> Result<()> {
    ensure_exists(args.manifests.iter().chain(&args.features))?;
    let hierarchy = globals.hierarchy()?;
    let datasets = load_datasets(&args.manifests, &args.features, &hierarchy)?;

    // Honor existing split tags; otherwise split stratified at the native level.
    let mut partitions = Vec::with_capacity(datasets.len());
    for (manifest, store) in &datasets {
        let (train, test) = match split_by_tags(manifest) {
            Some(pair) => pair,
            None => {
                let native = manifest
                    .records
                    .iter()
                    .map(|r| r.finest_level().unwrap_or(0))
                    .min()
                    .unwrap_or(0);
                stratified_split(
                    manifest,
                    args.train_frac,
                    native,
                    derive_seed(globals.seed, &format!("cli:split:{}", manifest.dataset_id)),
                )?
            }
        };
        partitions.push((train, test, store));
    }
    let splits: Vec<SplitPair> = partitions
        .iter()
        .map(|(train, test, store)| {
            Ok(SplitPair {
                train: align(train, store)?,
                test: align(test, store)?,
            })
        })
        .collect::<Result<_>>()?;

    let hidden = parse_hidden(&args.hidden)?;
    let cfg = args.sgd.to_config(globals.seed);
    let result = cross_generalization(&splits, &hierarchy, &hidden, &cfg)?;
    let report = CrossGenReport {
        command: "audit cross-gen".into(),
        config: CrossGenConfig {
            manifests: args.manifests.clone(),
            features: args.features.clone(),
            train_frac: args.train_frac,
            hidden,
            seed: globals.seed,
            epochs: cfg.epochs,
            learning_rate: cfg.learning_rate,
        },
        result,
    };
    emit(&report, globals.format, globals.out.as_deref())
}

#[derive(Serialize)]
struct NegBiasConfig {
    target_manifest: PathBuf,
    others_manifests: Vec<PathBuf>,
    emotion: String,
    counts: NegBiasCounts,
    hidden: Vec<usize>,
    seed: u64,
    epochs: usize,
}

#[derive(Serialize)]
pub struct NegBiasReport {
    command: String,
    config: NegBiasConfig,
    result: NegBiasResult,
}

impl Render for NegBiasReport {
    fn csv(&self) -> String {
        let mut out = String::from("emotion,self_pct,others_pct,percent_drop\n");
        out.push_str(&csv_row(&[
            self.result.emotion.clone(),
            self.result.self_acc.to_string(),
            self.result.others_acc.to_string(),
            self.result.percent_drop.to_string(),
        ]));
        out.push('\n');
        out
    }

    fn table(&self) -> String {
        let mut t = Table::new(&["emotion", "Self", "Others", "% Drop"]);
        t.push(vec![
            self.result.emotion.clone(),
            pct(self.result.self_acc),
            pct(self.result.others_acc),
            pct(self.result.percent_drop),
        ]);
        t.render()
    }
}

pub fn run_neg_bias(args: &NegBiasArgs, globals: &GlobalOpts) -> Result<()> {
    ensure_exists(
        [&args.target_manifest, &args.target_features]
            .into_iter()
            .chain(&args.others_manifests)
            .chain(&args.others_features),
    )?;
    let hierarchy = globals.hierarchy()?;
    let target = load_dataset(&args.target_manifest, &args.target_features, &hierarchy)?;
    let others = load_datasets(&args.others_manifests, &args.others_features, &hierarchy)?;

    let target_view = align(&target.0, &target.1)?;
    let other_views: Vec<_> = others
        .iter()
        .map(|(m, s)| align(m, s))
        .collect::<Result<_>>()?;

    let counts = NegBiasCounts {
        train_pos: args.train_pos,
        train_neg: args.train_neg,
        test_pos: args.test_pos,
        test_neg: args.test_neg,
    };
    let hidden = parse_hidden(&args.hidden)?;
    let cfg = args.sgd.to_config(globals.seed);
    let result = negative_bias_test(
        &target_view,
        &other_views,
        &hierarchy,
        &args.emotion,
        &counts,
        &hidden,
        &cfg,
    )?;
    let report = NegBiasReport {
        command: "audit neg-bias".into(),
        config: NegBiasConfig {
            target_manifest: args.target_manifest.clone(),
            others_manifests: args.others_manifests.clone(),
            emotion: args.emotion.clone(),
            counts,
            hidden,
            seed: globals.seed,
            epochs: cfg.epochs,
        },
        result,
    };
    emit(&report, globals.format, globals.out.as_deref())
}

#[derive(Serialize)]
struct EntropyConfig {
    manifest: PathBuf,
    emotion: String,
    kind: ConceptKind,
    top_k: usize,
    min_count: u64,
    seed: u64,
}

#[derive(Serialize)]
pub struct EntropyReport {
    command: String,
    config: EntropyConfig,
    zero_fraction: f64,
    result: EntropyAnalysis,
}

impl EntropyReport {
    pub fn histogram_csv(&self) -> String {
        let mut out = String::from("bin_low,bin_high,count\n");
        for bin in &self.result.histogram.bins {
            out.push_str(&format!("{},{},{}\n", bin.low, bin.high, bin.count));
        }
        out
    }
}

impl Render for EntropyReport {
    fn csv(&self) -> String {
        let mut out = String::from("category,count_pos,count_neg,entropy\n");
        for r in &self.result.records {
            out.push_str(&csv_row(&[
                r.name.clone(),
                r.count_pos.to_string(),
                r.count_neg.to_string(),
                r.entropy.to_string(),
            ]));
            out.push('\n');
        }
        out
    }

    fn table(&self) -> String {
        let mut t = Table::new(&["category", "pos", "neg", "H(Y|X=c)"]);
        for r in &self.result.records {
            t.push(vec![
                r.name.clone(),
                r.count_pos.to_string(),
                r.count_neg.to_string(),
                format!("{:.4}", r.entropy),
            ]);
        }
        let mut hist = Table::new(&["bin", "count"]);
        for bin in &self.result.histogram.bins {
            hist.push(vec![
                format!("[{:.1}, {:.1})", bin.low, bin.high),
                bin.count.to_string(),
            ]);
        }
        format!(
            "{}\nzero-entropy categories: {} of {} ({}%)\n{}",
            t.render(),
            self.result.histogram.zero_count,
            self.result.histogram.total,
            pct(self.zero_fraction * 100.0),
            hist.render()
        )
    }
}

pub fn run_entropy(args: &EntropyArgs, globals: &GlobalOpts) -> Result<()> {
    ensure_exists([&args.manifest])?;
    let hierarchy = globals.hierarchy()?;
    let manifest = emobias::corpus::load_manifest(&args.manifest, &hierarchy)?;
    let kind: ConceptKind = args.kind.parse()?;
    let opts = EntropyOpts {
        top_k: args.top_k,
        min_count: args.min_count,
    };
    let result = conditional_entropy_analysis(&manifest, &hierarchy, &args.emotion, kind, &opts)?;
    let report = EntropyReport {
        command: "audit entropy".into(),
        zero_fraction: result.histogram.zero_fraction(),
        config: EntropyConfig {
            manifest: args.manifest.clone(),
            emotion: args.emotion.clone(),
            kind,
            top_k: args.top_k,
            min_count: args.min_count,
            seed: globals.seed,
        },
        result,
    };
    emit(&report, globals.format, globals.out.as_deref())?;

    // Histogram rows ride along as a sidecar when writing CSV.
    if globals.format == ReportFormat::Csv {
        if let Some(out) = &globals.out {
            let hist_path = out.with_extension("hist.csv");
            std::fs::write(hist_path, report.histogram_csv())?;
        }
    }
    Ok(())
}
