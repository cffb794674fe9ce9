use std::path::PathBuf;

use emobias::corpus::{save_manifest, ConceptKind};
use emobias::report::{csv_row, Table};
use emobias::synthkit::{
    generate_synthetic_suite, inject_negative_set_bias, polarity_axis, ConceptSpec,
    SynthDatasetSpec, SynthSpec,
};
use emobias::{Error, Result};
use serde::Serialize;

use crate::args::SynthGenerateArgs;
use crate::report::{emit, Render};
use crate::GlobalOpts;

#[derive(Serialize)]
struct SynthConfigEcho {
    out_dir: PathBuf,
    dataset_ids: Vec<String>,
    dim: usize,
    samples_per_leaf: usize,
    sep: [f64; 3],
    sigma: f64,
    noise_rate: f64,
    axis_shifts: Vec<f64>,
    balanced_concepts: usize,
    bias_emotion: Option<String>,
    bias_concept: Option<String>,
    seed: u64,
}

#[derive(Serialize)]
struct GeneratedDataset {
    dataset_id: String,
    records: usize,
    manifest: PathBuf,
    features: PathBuf,
    truth: PathBuf,
}

#[derive(Serialize)]
pub struct SynthReport {
    command: String,
    config: SynthConfigEcho,
    datasets: Vec<GeneratedDataset>,
}

impl Render for SynthReport {
    fn csv(&self) -> String {
        let mut out = String::from("dataset,records,manifest,features,truth\n");
        for d in &self.datasets {
            out.push_str(&csv_row(&[
                d.dataset_id.clone(),
                d.records.to_string(),
                d.manifest.display().to_string(),
                d.features.display().to_string(),
                d.truth.display().to_string(),
            ]));
            out.push('\n');
        }
        out
    }

    fn table(&self) -> String {
        let mut t = Table::new(&["dataset", "records", "manifest"]);
        for d in &self.datasets {
            t.push(vec![
                d.dataset_id.clone(),
                d.records.to_string(),
                d.manifest.display().to_string(),
            ]);
        }
        t.render()
    }
}

fn parse_f64_list(s: &str, what: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<f64>().map_err(|e| Error::Parse {
                line: None,
                msg: format!("bad {what} `{t}`: {e}"),
            })
        })
        .collect()
}

pub fn run_generate(args: &SynthGenerateArgs, globals: &GlobalOpts) -> Result<()> {
    let hierarchy = globals.hierarchy()?;
    let ids: Vec<String> = args
        .dataset_ids
        .split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(String::from)
        .collect();
    if ids.is_empty() {
        return Err(Error::InvalidSpec("no dataset ids given".into()));
    }
    let sep = parse_f64_list(&args.sep, "separation")?;
    if sep.len() != 3 {
        return Err(Error::InvalidSpec(format!(
            "--sep needs three values, got {}",
            sep.len()
        )));
    }
    let shifts = if args.axis_shifts.trim().is_empty() {
        vec![0.0; ids.len()]
    } else {
        parse_f64_list(&args.axis_shifts, "axis shift")?
    };
    if shifts.len() != ids.len() {
        return Err(Error::InvalidSpec(format!(
            "{} axis shifts for {} datasets",
            shifts.len(),
            ids.len()
        )));
    }

    let axis = polarity_axis(args.dim, &hierarchy, globals.seed)?;
    let datasets = ids
        .iter()
        .zip(&shifts)
        .map(|(id, &scale)| SynthDatasetSpec {
            id: id.clone(),
            shift: if scale == 0.0 {
                Vec::new()
            } else {
                axis.iter().map(|a| a * scale).collect()
            },
        })
        .collect();

    let mut concepts: Vec<ConceptSpec> = (0..args.balanced_concepts)
        .map(|i| ConceptSpec {
            name: format!("concept-{i}"),
            kind: ConceptKind::Objects,
            attach_prob: 0.3,
            feature_gain: 0.0,
            restriction: None,
        })
        .collect();
    if let Some(name) = &args.bias_concept {
        concepts.push(ConceptSpec {
            name: name.clone(),
            kind: ConceptKind::Objects,
            attach_prob: args.bias_attach_prob,
            feature_gain: args.bias_gain,
            restriction: None,
        });
    }

    let mut spec = SynthSpec {
        dim: args.dim,
        sep_level1: sep[0],
        sep_level2: sep[1],
        sep_level3: sep[2],
        noise_sigma: args.sigma,
        samples_per_leaf: args.samples_per_leaf,
        label_noise: args.noise_rate,
        datasets,
        concepts,
    };
    match (&args.bias_emotion, &args.bias_concept) {
        (Some(emotion), Some(concept)) => {
            spec = inject_negative_set_bias(&spec, emotion, concept)?;
        }
        (None, None) => {}
        _ => {
            return Err(Error::InvalidSpec(
                "--bias-emotion and --bias-concept must be given together".into(),
            ))
        }
    }

    let suite = generate_synthetic_suite(&spec, &hierarchy, globals.seed)?;
    std::fs::create_dir_all(&args.out_dir)?;

    let mut generated = Vec::with_capacity(suite.datasets.len());
    for ds in &suite.datasets {
        let id = &ds.manifest.dataset_id;
        let manifest_path = args.out_dir.join(format!("{id}.manifest.jsonl"));
        let features_path = args.out_dir.join(format!("{id}.features.json"));
        let truth_path = args.out_dir.join(format!("{id}.truth.jsonl"));
        save_manifest(&ds.manifest, &manifest_path)?;
        ds.store.write(&features_path)?;
        ds.truth.save(&truth_path)?;
        generated.push(GeneratedDataset {
            dataset_id: id.clone(),
            records: ds.manifest.len(),
            manifest: manifest_path,
            features: features_path,
            truth: truth_path,
        });
    }

    let report = SynthReport {
        command: "synth generate".into(),
        config: SynthConfigEcho {
            out_dir: args.out_dir.clone(),
            dataset_ids: ids,
            dim: args.dim,
            samples_per_leaf: args.samples_per_leaf,
            sep: [sep[0], sep[1], sep[2]],
            sigma: args.sigma,
            noise_rate: args.noise_rate,
            axis_shifts: shifts,
            balanced_concepts: args.balanced_concepts,
            bias_emotion: args.bias_emotion.clone(),
            bias_concept: args.bias_concept.clone(),
            seed: globals.seed,
        },
        datasets: generated,
    };
    emit(&report, globals.format, globals.out.as_deref())
}
