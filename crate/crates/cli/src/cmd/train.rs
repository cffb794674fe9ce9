use std::collections::BTreeMap;
use std::path::PathBuf;

use emobias::corpus::{align, split_by_tags, stratified_split, CorpusView};
use emobias::curriculum::{
    self, comparison_rows, ComparisonRow, SelfDirectedOpts, StagePlan, StageOutcome,
    StrategyResult,
};
use emobias::probe::evaluate_on_view;
use emobias::report::{csv_row, Table};
use emobias::seeding::derive_seed;
use emobias::{Error, Result};
use serde::Serialize;

use crate::args::TrainArgs;
use crate::report::{emit, pct, Render};
use crate::{ensure_exists, load_dataset, parse_hidden, GlobalOpts};

#[derive(Serialize)]
struct TrainConfigEcho {
    manifest: PathBuf,
    features: PathBuf,
    strategies: Vec<String>,
    plan: Vec<u8>,
    hidden: Vec<usize>,
    train_frac: f64,
    eval_manifests: Vec<PathBuf>,
    clean_count: usize,
    tau: f64,
    max_rounds: usize,
    loss_weights: Vec<f64>,
    seed: u64,
    epochs: usize,
    learning_rate: f64,
    momentum: f64,
    weight_decay: f64,
    batch_size: usize,
}

#[derive(Serialize)]
struct LevelAccuracy {
    level: u8,
    accuracy_pct: f64,
}

#[derive(Serialize)]
struct StrategySummary {
    strategy: String,
    stages: Vec<StageOutcome>,
    self_fine_accuracy_pct: f64,
    evaluations: BTreeMap<String, LevelAccuracy>,
}

#[derive(Serialize)]
pub struct TrainReport {
    command: String,
    config: TrainConfigEcho,
    rows: Vec<ComparisonRow>,
    strategies: Vec<StrategySummary>,
}

impl Render for TrainReport {
    fn csv(&self) -> String {
        let mut out = String::from("strategy,dataset,level,accuracy_pct\n");
        for s in &self.strategies {
            for (dataset, acc) in &s.evaluations {
                out.push_str(&csv_row(&[
                    s.strategy.clone(),
                    dataset.clone(),
                    acc.level.to_string(),
                    acc.accuracy_pct.to_string(),
                ]));
                out.push('\n');
            }
        }
        for row in &self.rows {
            out.push_str(&csv_row(&[
                row.strategy.clone(),
                "(mean others)".into(),
                "1".into(),
                row.mean_others.map(|v| v.to_string()).unwrap_or_default(),
            ]));
            out.push('\n');
        }
        out
    }

    fn table(&self) -> String {
        let datasets: Vec<String> = self
            .rows
            .first()
            .map(|r| r.per_dataset.keys().cloned().collect())
            .unwrap_or_default();
        let mut header = vec!["strategy".to_string()];
        header.extend(datasets.iter().cloned());
        header.extend(["Self".into(), "Mean Others".into()]);
        let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
        let mut t = Table::new(&header_refs);
        for row in &self.rows {
            let mut cells = vec![row.strategy.clone()];
            for d in &datasets {
                let marker = if *d == row.self_dataset { "*" } else { "" };
                cells.push(
                    row.per_dataset
                        .get(d)
                        .map(|&v| format!("{}{marker}", pct(v)))
                        .unwrap_or_else(|| "-".into()),
                );
            }
            cells.push(pct(row.self_accuracy));
            cells.push(row.mean_others.map(pct).unwrap_or_else(|| "-".into()));
            t.push(cells);
        }
        format!("{}(* marks Self cells)\n", t.render())
    }
}

fn parse_strategies(s: &str) -> Result<Vec<String>> {
    let known = ["curriculum", "direct", "self-directed", "joint"];
    if s == "all" {
        return Ok(known.iter().map(|s| s.to_string()).collect());
    }
    let mut out = Vec::new();
    for token in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        if !known.contains(&token) {
            return Err(Error::Parse {
                line: None,
                msg: format!("unknown strategy `{token}` (expected one of {known:?} or `all`)"),
            });
        }
        out.push(token.to_string());
    }
    if out.is_empty() {
        return Err(Error::Parse {
            line: None,
            msg: "no strategy given".into(),
        });
    }
    Ok(out)
}

pub fn run_train(args: &TrainArgs, globals: &GlobalOpts) -> Result<()> {
    ensure_exists(
        [&args.manifest, &args.features]
            .into_iter()
            .chain(&args.eval_manifests)
            .chain(&args.eval_features),
    )?;
    if args.eval_manifests.len() != args.eval_features.len() {
        return Err(Error::Parse {
            line: None,
            msg: "eval manifests and eval features must pair up".into(),
        });
    }
    let hierarchy = globals.hierarchy()?;
    let (manifest, store) = load_dataset(&args.manifest, &args.features, &hierarchy)?;

    let (train_m, test_m) = match split_by_tags(&manifest) {
        Some(pair) => pair,
        None => stratified_split(
            &manifest,
            args.train_frac,
            hierarchy.depth(),
            derive_seed(globals.seed, "cli:train:split"),
        )?,
    };
    let train_view = align(&train_m, &store)?;
    let test_view = align(&test_m, &store)?;

    let eval_data: Vec<_> = args
        .eval_manifests
        .iter()
        .zip(&args.eval_features)
        .map(|(m, f)| load_dataset(m, f, &hierarchy))
        .collect::<Result<_>>()?;
    let eval_views: Vec<CorpusView> = eval_data
        .iter()
        .map(|(m, s)| align(m, s))
        .collect::<Result<_>>()?;

    let strategies = parse_strategies(&args.strategy)?;
    let hidden = parse_hidden(&args.hidden)?;
    let plan_levels: Vec<u8> = args
        .plan
        .split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| {
            t.trim().parse::<u8>().map_err(|e| Error::Parse {
                line: None,
                msg: format!("bad plan level `{t}`: {e}"),
            })
        })
        .collect::<Result<_>>()?;
    let loss_weights: Vec<f64> = args
        .loss_weights
        .split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| {
            t.trim().parse::<f64>().map_err(|e| Error::Parse {
                line: None,
                msg: format!("bad loss weight `{t}`: {e}"),
            })
        })
        .collect::<Result<_>>()?;
    let cfg = args.sgd.to_config(globals.seed);

    let mut results: Vec<StrategyResult> = Vec::new();
    for strategy in &strategies {
        let mut result = match strategy.as_str() {
            "curriculum" => {
                let plan = StagePlan::uniform(&plan_levels, cfg.epochs);
                curriculum::curriculum_train(&train_view, &hierarchy, &plan, &hidden, &cfg)?
            }
            "direct" => curriculum::direct_train(&train_view, &hierarchy, &hidden, &cfg)?,
            "self-directed" => {
                let clean_frac = args.clean_count as f64 / train_m.len() as f64;
                if !(0.0..1.0).contains(&clean_frac) || clean_frac == 0.0 {
                    return Err(Error::InsufficientSamples {
                        class: "clean seed".into(),
                        available: train_m.len(),
                        requested: args.clean_count,
                    });
                }
                let (clean_m, noisy_m) = stratified_split(
                    &train_m,
                    clean_frac,
                    hierarchy.depth(),
                    derive_seed(globals.seed, "cli:clean"),
                )?;
                let clean = align(&clean_m, &store)?;
                let noisy = align(&noisy_m, &store)?;
                let opts = SelfDirectedOpts {
                    tau: args.tau,
                    max_rounds: args.max_rounds,
                    ..SelfDirectedOpts::default()
                };
                let (result, _) = curriculum::self_directed_train(
                    &clean, &noisy, &hierarchy, &hidden, &cfg, &opts,
                )?;
                result
            }
            "joint" => {
                curriculum::joint_train(&train_view, &hierarchy, &hidden, &cfg, &loss_weights)?
            }
            other => unreachable!("validated strategy `{other}`"),
        };

        // Self test at level 1 plus any external datasets.
        result.evaluate_on(std::slice::from_ref(&test_view), 1, &hierarchy)?;
        result.evaluate_on(&eval_views, 1, &hierarchy)?;
        results.push(result);
    }

    if let Some(path) = &args.save_model {
        if strategies.len() == 1 {
            results[0].final_probe().save(path)?;
        } else {
            return Err(Error::Parse {
                line: None,
                msg: "--save-model requires a single strategy".into(),
            });
        }
    }

    let rows = comparison_rows(&results, &manifest.dataset_id);
    let strategies_summary: Vec<StrategySummary> = results
        .iter()
        .map(|r| {
            let probe = r.final_probe();
            let fine =
                evaluate_on_view(&probe, &test_view, hierarchy.depth(), &hierarchy).map(|x| x.0);
            Ok(StrategySummary {
                strategy: r.strategy.clone(),
                stages: r.stages.clone(),
                self_fine_accuracy_pct: fine? * 100.0,
                evaluations: r
                    .evaluations
                    .iter()
                    .map(|(k, &(level, acc))| {
                        (
                            k.clone(),
                            LevelAccuracy {
                                level,
                                accuracy_pct: acc * 100.0,
                            },
                        )
                    })
                    .collect(),
            })
        })
        .collect::<Result<_>>()?;

    let report = TrainReport {
        command: "train".into(),
        config: TrainConfigEcho {
            manifest: args.manifest.clone(),
            features: args.features.clone(),
            strategies,
            plan: plan_levels,
            hidden,
            train_frac: args.train_frac,
            eval_manifests: args.eval_manifests.clone(),
            clean_count: args.clean_count,
            tau: args.tau,
            max_rounds: args.max_rounds,
            loss_weights,
            seed: globals.seed,
            epochs: cfg.epochs,
            learning_rate: cfg.learning_rate,
            momentum: cfg.momentum,
            weight_decay: cfg.weight_decay,
            batch_size: cfg.batch_size,
        },
        rows,
        strategies: strategies_summary,
    };
    emit(&report, globals.format, globals.out.as_deref())
}
