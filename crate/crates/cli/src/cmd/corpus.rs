use std::path::PathBuf;

use emobias::corpus::{
    dedup_by_metadata, filter_non_english_tags, load_manifest, save_manifest, stratified_split,
    ManifestStats,
};
use emobias::report::{csv_row, Table};
use emobias::Result;
use serde::Serialize;

use crate::args::{DedupArgs, SplitArgs, StatsArgs};
use crate::report::{emit, Render};
use crate::{ensure_exists, GlobalOpts};

#[derive(Serialize)]
struct DedupConfig {
    manifest: PathBuf,
    out_manifest: PathBuf,
    drop_non_english: bool,
    seed: u64,
}

#[derive(Serialize)]
pub struct DedupReport {
    command: String,
    config: DedupConfig,
    records_before: usize,
    records_after: usize,
    dropped: usize,
}

impl Render for DedupReport {
    fn csv(&self) -> String {
        format!(
            "records_before,records_after,dropped\n{},{},{}\n",
            self.records_before, self.records_after, self.dropped
        )
    }

    fn table(&self) -> String {
        let mut t = Table::new(&["before", "after", "dropped"]);
        t.push(vec![
            self.records_before.to_string(),
            self.records_after.to_string(),
            self.dropped.to_string(),
        ]);
        t.render()
    }
}

pub fn run_dedup(args: &DedupArgs, globals: &GlobalOpts) -> Result<()> {
    ensure_exists([&args.manifest])?;
    let hierarchy = globals.hierarchy()?;
    let manifest = load_manifest(&args.manifest, &hierarchy)?;
    let mut cleaned = dedup_by_metadata(&manifest);
    if args.drop_non_english {
        cleaned = filter_non_english_tags(&cleaned);
    }
    save_manifest(&cleaned, &args.out_manifest)?;
    let report = DedupReport {
        command: "corpus dedup".into(),
        records_before: manifest.len(),
        records_after: cleaned.len(),
        dropped: manifest.len() - cleaned.len(),
        config: DedupConfig {
            manifest: args.manifest.clone(),
            out_manifest: args.out_manifest.clone(),
            drop_non_english: args.drop_non_english,
            seed: globals.seed,
        },
    };
    emit(&report, globals.format, globals.out.as_deref())
}

#[derive(Serialize)]
struct SplitConfig {
    manifest: PathBuf,
    train_frac: f64,
    level: u8,
    out_train: PathBuf,
    out_test: PathBuf,
    seed: u64,
}

#[derive(Serialize)]
pub struct SplitReport {
    command: String,
    config: SplitConfig,
    train_records: usize,
    test_records: usize,
}

impl Render for SplitReport {
    fn csv(&self) -> String {
        format!(
            "side,records\ntrain,{}\ntest,{}\n",
            self.train_records, self.test_records
        )
    }

    fn table(&self) -> String {
        let mut t = Table::new(&["side", "records"]);
        t.push(vec!["train".into(), self.train_records.to_string()]);
        t.push(vec!["test".into(), self.test_records.to_string()]);
        t.render()
    }
}

pub fn run_split(args: &SplitArgs, globals: &GlobalOpts) -> Result<()> {
    ensure_exists([&args.manifest])?;
    let hierarchy = globals.hierarchy()?;
    let manifest = load_manifest(&args.manifest, &hierarchy)?;
    let (train, test) = stratified_split(&manifest, args.train_frac, args.level, globals.seed)?;
    save_manifest(&train, &args.out_train)?;
    save_manifest(&test, &args.out_test)?;
    let report = SplitReport {
        command: "corpus split".into(),
        train_records: train.len(),
        test_records: test.len(),
        config: SplitConfig {
            manifest: args.manifest.clone(),
            train_frac: args.train_frac,
            level: args.level,
            out_train: args.out_train.clone(),
            out_test: args.out_test.clone(),
            seed: globals.seed,
        },
    };
    emit(&report, globals.format, globals.out.as_deref())
}

#[derive(Serialize)]
struct StatsConfig {
    manifest: PathBuf,
    seed: u64,
}

#[derive(Serialize)]
pub struct StatsReport {
    command: String,
    config: StatsConfig,
    result: ManifestStats,
}

impl Render for StatsReport {
    fn csv(&self) -> String {
        let mut out = String::from("kind,level,label,count\n");
        let s = &self.result;
        out.push_str(&format!("records,,,{}\n", s.records));
        for (level, classes) in &s.label_counts {
            for (label, count) in classes {
                out.push_str(&csv_row(&[
                    "label".into(),
                    level.to_string(),
                    label.clone(),
                    count.to_string(),
                ]));
                out.push('\n');
            }
        }
        out.push_str(&format!("with_caption,,,{}\n", s.with_caption));
        out.push_str(&format!("with_tags,,,{}\n", s.with_tags));
        out.push_str(&format!("with_concepts,,,{}\n", s.with_concepts));
        out.push_str(&format!("split_train,,,{}\n", s.split_train));
        out.push_str(&format!("split_test,,,{}\n", s.split_test));
        out
    }

    fn table(&self) -> String {
        let s = &self.result;
        let mut t = Table::new(&["level", "label", "count"]);
        for (level, classes) in &s.label_counts {
            for (label, count) in classes {
                t.push(vec![level.to_string(), label.clone(), count.to_string()]);
            }
        }
        format!(
            "dataset {}: {} records ({} caption, {} tags, {} concepts, {} train / {} test)\n{}",
            s.dataset_id,
            s.records,
            s.with_caption,
            s.with_tags,
            s.with_concepts,
            s.split_train,
            s.split_test,
            t.render()
        )
    }
}

pub fn run_stats(args: &StatsArgs, globals: &GlobalOpts) -> Result<()> {
    ensure_exists([&args.manifest])?;
    let hierarchy = globals.hierarchy()?;
    let manifest = load_manifest(&args.manifest, &hierarchy)?;
    let report = StatsReport {
        command: "corpus stats".into(),
        result: ManifestStats::compute(&manifest),
        config: StatsConfig {
            manifest: args.manifest.clone(),
            seed: globals.seed,
        },
    };
    emit(&report, globals.format, globals.out.as_deref())
}
