//! Command-line front end: argument parsing, report emission, exit codes.
//!
//! Exit status: 0 on success, 1 on usage errors, 2 on data errors.

pub mod args;
pub mod report;

mod cmd {
    pub mod audit;
    pub mod corpus;
    pub mod synth;
    pub mod train;
}

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::Parser;
use emobias::corpus::{load_manifest, DatasetManifest, FeatureStore};
use emobias::report::ReportFormat;
use emobias::{build_parrott_hierarchy, EmotionHierarchy, Error, Result};

use args::{AuditCommand, Cli, Command, CorpusCommand, SynthCommand};

/// Effective global options after defaulting and environment resolution.
pub struct GlobalOpts {
    pub seed: u64,
    pub format: ReportFormat,
    pub out: Option<PathBuf>,
    pub taxonomy: Option<PathBuf>,
}

impl GlobalOpts {
    pub fn hierarchy(&self) -> Result<EmotionHierarchy> {
        match &self.taxonomy {
            Some(path) => EmotionHierarchy::from_file(path),
            None => Ok(build_parrott_hierarchy()),
        }
    }
}

/// Relative output paths resolve against `$EMOBIAS_OUT_DIR` when it is set.
fn resolve_out(out: Option<PathBuf>) -> Option<PathBuf> {
    let out = out?;
    if out.is_relative() {
        if let Ok(dir) = std::env::var("EMOBIAS_OUT_DIR") {
            if !dir.is_empty() {
                return Some(Path::new(&dir).join(out));
            }
        }
    }
    Some(out)
}

pub(crate) fn ensure_exists<'a>(paths: impl IntoIterator<Item = &'a PathBuf>) -> Result<()> {
    for path in paths {
        if !path.exists() {
            return Err(Error::Io(std::io::Error::new(
                std::io::ErrorKind::NotFound,
                format!("{} does not exist", path.display()),
            )));
        }
    }
    Ok(())
}

pub(crate) fn load_dataset(
    manifest: &Path,
    features: &Path,
    hierarchy: &EmotionHierarchy,
) -> Result<(DatasetManifest, FeatureStore)> {
    Ok((
        load_manifest(manifest, hierarchy)?,
        FeatureStore::read(features)?,
    ))
}

/// Hidden widths like `64,32`; empty means a linear probe.
pub(crate) fn parse_hidden(s: &str) -> Result<Vec<usize>> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<usize>().map_err(|e| Error::Parse {
                line: None,
                msg: format!("bad hidden width `{t}`: {e}"),
            })
        })
        .collect()
}

fn dispatch(cli: Cli) -> Result<()> {
    let globals = GlobalOpts {
        seed: cli.seed,
        format: cli.format.parse()?,
        out: resolve_out(cli.out),
        taxonomy: cli.taxonomy,
    };
    match &cli.command {
        Command::Audit { audit } => match audit {
            AuditCommand::NameDataset(args) => cmd::audit::run_name_dataset(args, &globals),
            AuditCommand::CrossGen(args) => cmd::audit::run_cross_gen(args, &globals),
            AuditCommand::NegBias(args) => cmd::audit::run_neg_bias(args, &globals),
            AuditCommand::Entropy(args) => cmd::audit::run_entropy(args, &globals),
            AuditCommand::Drop(args) => cmd::audit::run_drop(args, &globals),
        },
        Command::Train(args) => cmd::train::run_train(args, &globals),
        Command::Synth { synth } => match synth {
            SynthCommand::Generate(args) => cmd::synth::run_generate(args, &globals),
        },
        Command::Corpus { corpus } => match corpus {
            CorpusCommand::Dedup(args) => cmd::corpus::run_dedup(args, &globals),
            CorpusCommand::Split(args) => cmd::corpus::run_split(args, &globals),
            CorpusCommand::Stats(args) => cmd::corpus::run_stats(args, &globals),
        },
    }
}

/// Expand `--config <json>`: each key supplies a flag that was not given
/// explicitly. Explicit flags always win; `true` enables a bare switch and
/// arrays spread into repeated values.
fn apply_config_file(mut argv: Vec<OsString>) -> Result<Vec<OsString>> {
    let position = argv.iter().position(|a| {
        a.to_str()
            .is_some_and(|s| s == "--config" || s.starts_with("--config="))
    });
    let Some(i) = position else {
        return Ok(argv);
    };
    let token = argv.remove(i).to_string_lossy().into_owned();
    let path: OsString = match token.split_once('=') {
        Some((_, p)) => p.to_string().into(),
        None => {
            if i >= argv.len() {
                return Err(Error::Parse {
                    line: None,
                    msg: "--config needs a file path".into(),
                });
            }
            argv.remove(i)
        }
    };

    let text = std::fs::read_to_string(&path)?;
    let values: serde_json::Map<String, serde_json::Value> = serde_json::from_str(&text)?;
    for (key, value) in values {
        let flag = format!("--{key}");
        if argv.iter().any(|a| a.to_str() == Some(flag.as_str())) {
            continue;
        }
        match value {
            serde_json::Value::Bool(true) => argv.push(flag.into()),
            serde_json::Value::Bool(false) | serde_json::Value::Null => {}
            serde_json::Value::Array(items) => {
                argv.push(flag.into());
                for item in items {
                    let token = match item {
                        serde_json::Value::String(s) => s,
                        other => other.to_string(),
                    };
                    argv.push(token.into());
                }
            }
            serde_json::Value::String(s) => {
                argv.push(flag.into());
                argv.push(s.into());
            }
            other => {
                argv.push(flag.into());
                argv.push(other.to_string().into());
            }
        }
    }
    Ok(argv)
}

/// Parse and execute; returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let argv = match apply_config_file(argv) {
        Ok(argv) => argv,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests are successes, not usage errors.
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}
