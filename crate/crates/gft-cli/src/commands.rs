//! The five subcommands. Each writes its artifacts under the configured
//! output directory, embedding the resolved configuration in every file,
//! and prints a short deterministic summary to stdout.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path as FsPath;

use serde::Serialize;

use gft::bound::{gft_bound_on_graph, BoundBreakdown};
use gft::otdist::{DisparityMatrix, DisparityProvenance};
use gft::routing::{enumerate_paths, route_mst, route_shortest_paths, score_paths, select_optimal, Path};
use gft::simulate::{
    path_length_ablation, run_default_comparison, AblationReport, ComparisonReport, DEFAULT_SEEDS,
    SCENARIO_TRAIN,
};
use gft::trainer::{
    accuracy, baseline_all_sources, baseline_closest, closest_source_id, train_sequence,
    ModelRecord, TrainConfig,
};

use crate::config::{RunConfig, Strategy};
use crate::pipeline;
use crate::CmdError;

fn io_err(path: &FsPath, source: std::io::Error) -> CmdError {
    CmdError::Lib(gft::Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn ensure_out(config: &RunConfig) -> Result<(), CmdError> {
    fs::create_dir_all(&config.out).map_err(|err| io_err(&config.out, err))
}

fn write_text(path: &FsPath, text: &str) -> Result<(), CmdError> {
    fs::write(path, text).map_err(|err| io_err(path, err))
}

fn write_json<T: Serialize>(path: &FsPath, value: &T) -> Result<(), CmdError> {
    let text = serde_json::to_string_pretty(value).map_err(gft::Error::from)?;
    write_text(path, &(text + "\n"))
}

/// CSV artifacts open with one comment line carrying the resolved config,
/// keeping the full-provenance invariant without breaking the tabular body.
fn csv_with_config(config: &RunConfig, body: &str) -> Result<String, CmdError> {
    let json = serde_json::to_string(config).map_err(gft::Error::from)?;
    Ok(format!("# config: {json}\n{body}"))
}

#[derive(Serialize)]
struct DistancesArtifact<'a> {
    config: &'a RunConfig,
    cache_key: &'a str,
    provenance: DisparityProvenance,
    matrix: &'a DisparityMatrix,
}

pub fn distances(config: &RunConfig) -> Result<(), CmdError> {
    let collection = pipeline::load_data(config)?;
    ensure_out(config)?;
    let (matrix, cache_key, cached) = pipeline::disparity_matrix(config, &collection)?;
    write_json(
        &config.out.join("distances.json"),
        &DistancesArtifact {
            config,
            cache_key: &cache_key,
            provenance: pipeline::provenance(config, &collection),
            matrix: &matrix,
        },
    )?;
    write_text(
        &config.out.join("distances.csv"),
        &csv_with_config(config, &matrix.to_csv())?,
    )?;
    println!(
        "distances: {} domains, cache {}, wrote {}",
        matrix.len(),
        if cached { "hit" } else { "miss" },
        config.out.join("distances.{csv,json}").display()
    );
    Ok(())
}

#[derive(Serialize)]
struct StrategyResult {
    path: Path,
    bound: BoundBreakdown,
    /// The per-source candidates the preference order reduced (sp and mst).
    #[serde(skip_serializing_if = "Option::is_none")]
    per_source: Option<Vec<Path>>,
}

#[derive(Serialize)]
struct RouteArtifact<'a> {
    config: &'a RunConfig,
    cache_key: &'a str,
    warnings: &'a [String],
    strategies: &'a BTreeMap<&'static str, StrategyResult>,
    /// Every simple path with its bound breakdown, smallest total first;
    /// present for tgft routing or under --explain.
    #[serde(skip_serializing_if = "Option::is_none")]
    candidates: &'a Option<Vec<BoundBreakdown>>,
}

/// Routes every selected strategy to a chosen path plus its bound breakdown.
fn strategy_results(
    config: &RunConfig,
    graph: &gft::graph::DisparityGraph,
    eps1: &BTreeMap<String, f64>,
) -> Result<BTreeMap<&'static str, StrategyResult>, CmdError> {
    let mut results = BTreeMap::new();
    for strategy in config.strategy.expanded() {
        let (path, per_source) = match strategy {
            Strategy::Sp => {
                let candidates = route_shortest_paths(graph)?;
                (select_optimal(&candidates)?, Some(candidates))
            }
            Strategy::Mst => {
                let candidates = route_mst(graph)?;
                (select_optimal(&candidates)?, Some(candidates))
            }
            other => (pipeline::route_with(other, graph, config, eps1)?, None),
        };
        let eps = *eps1
            .get(path.start())
            .expect("every source has an eps1 entry");
        let bound = gft_bound_on_graph(&path, graph, &config.bound, eps)?;
        results.insert(
            strategy.name(),
            StrategyResult {
                path,
                bound,
                per_source,
            },
        );
    }
    Ok(results)
}

/// All simple paths scored with the bound, smallest total first (ties in
/// lexicographic domain order).
fn scored_candidates(
    config: &RunConfig,
    graph: &gft::graph::DisparityGraph,
    eps1: &BTreeMap<String, f64>,
) -> Result<Vec<BoundBreakdown>, CmdError> {
    let paths = enumerate_paths(graph, None)?;
    let mut scored = score_paths(graph, &paths, &config.bound, eps1)?;
    scored.sort_by(|a, b| {
        a.total
            .total_cmp(&b.total)
            .then_with(|| a.path.domains.cmp(&b.path.domains))
    });
    Ok(scored)
}

pub fn route(config: &RunConfig) -> Result<(), CmdError> {
    let collection = pipeline::load_data(config)?;
    ensure_out(config)?;
    let (matrix, cache_key, _) = pipeline::disparity_matrix(config, &collection)?;
    let (graph, warnings) = pipeline::graph_with_warnings(config, &collection, &matrix)?;
    let eps1 = pipeline::eps1_map(config, &collection)?;

    let strategies = strategy_results(config, &graph, &eps1)?;
    let want_candidates =
        config.explain || config.strategy.expanded().contains(&Strategy::Tgft);
    let candidates = if want_candidates {
        Some(scored_candidates(config, &graph, &eps1)?)
    } else {
        None
    };

    write_json(
        &config.out.join("route.json"),
        &RouteArtifact {
            config,
            cache_key: &cache_key,
            warnings: &warnings,
            strategies: &strategies,
            candidates: &candidates,
        },
    )?;

    for (name, result) in &strategies {
        println!(
            "{name}: {} → target (weight {:.6}, magnitude {}, bound {:.6})",
            result.path.domains.join(" → "),
            result.path.weight,
            result.path.magnitude,
            result.bound.total
        );
    }
    if config.explain {
        if let Some(candidates) = &candidates {
            println!("candidates (total | term1..term6 | path):");
            for c in candidates {
                let terms = c.terms().map(|t| format!("{t:.6}")).join(" ");
                println!("{:.6} | {terms} | {}", c.total, c.path.domains.join(" → "));
            }
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct AccuracyRow {
    method: String,
    stages: Vec<String>,
    accuracy: f64,
}

#[derive(Serialize)]
struct AccuracyArtifact<'a> {
    config: &'a RunConfig,
    cache_key: &'a str,
    warnings: &'a [String],
    rows: &'a [AccuracyRow],
}

#[derive(Serialize)]
struct ModelsArtifact<'a> {
    config: &'a RunConfig,
    cache_key: &'a str,
    models: &'a BTreeMap<String, ModelRecord>,
}

pub fn train(config: &RunConfig) -> Result<(), CmdError> {
    let collection = pipeline::load_data(config)?;
    ensure_out(config)?;
    let (matrix, cache_key, _) = pipeline::disparity_matrix(config, &collection)?;
    let (graph, warnings) = pipeline::graph_with_warnings(config, &collection, &matrix)?;
    let eps1 = pipeline::eps1_map(config, &collection)?;

    let mut rows = Vec::new();
    let mut models = BTreeMap::new();
    for strategy in config.strategy.expanded() {
        let path = pipeline::route_with(strategy, &graph, config, &eps1)?;
        let model = train_sequence(&path.domains, &collection, &config.train)?;
        let acc = accuracy(&model, &collection.target.test)?;
        let method = format!("gft-{}", strategy.name());
        models.insert(
            method.clone(),
            ModelRecord::new(&model, &config.train, path.domains.clone()),
        );
        rows.push(AccuracyRow {
            method,
            stages: path.domains,
            accuracy: acc,
        });
    }

    let union_model = baseline_all_sources(&collection, &config.train)?;
    let union_acc = accuracy(&union_model, &collection.target.test)?;
    models.insert(
        "all-sources".into(),
        ModelRecord::new(&union_model, &config.train, vec!["union".into()]),
    );
    rows.push(AccuracyRow {
        method: "all-sources".into(),
        stages: vec!["union".into()],
        accuracy: union_acc,
    });

    let closest = closest_source_id(&matrix)?;
    let closest_model = baseline_closest(&collection, &matrix, &config.train)?;
    let closest_acc = accuracy(&closest_model, &collection.target.test)?;
    models.insert(
        "closest".into(),
        ModelRecord::new(&closest_model, &config.train, vec![closest.clone()]),
    );
    rows.push(AccuracyRow {
        method: "closest".into(),
        stages: vec![closest],
        accuracy: closest_acc,
    });

    write_json(
        &config.out.join("models.json"),
        &ModelsArtifact {
            config,
            cache_key: &cache_key,
            models: &models,
        },
    )?;
    write_json(
        &config.out.join("accuracy.json"),
        &AccuracyArtifact {
            config,
            cache_key: &cache_key,
            warnings: &warnings,
            rows: &rows,
        },
    )?;
    let mut body = String::from("method,stages,accuracy\n");
    for row in &rows {
        body.push_str(&format!(
            "{},{},{}\n",
            row.method,
            row.stages.join("|"),
            row.accuracy
        ));
    }
    write_text(
        &config.out.join("accuracy.csv"),
        &csv_with_config(config, &body)?,
    )?;

    for row in &rows {
        println!(
            "{:<12} accuracy {:.4} (stages: {})",
            row.method,
            row.accuracy,
            row.stages.join(" → ")
        );
    }
    Ok(())
}

#[derive(Serialize)]
struct SimulateArtifact<'a> {
    config: &'a RunConfig,
    /// The scenario's frozen optimizer settings (`config.train` only
    /// contributes the seed offset below).
    scenario_train: TrainConfig,
    seeds: &'a [u64],
    report: &'a ComparisonReport,
}

pub fn simulate(config: &RunConfig) -> Result<(), CmdError> {
    ensure_out(config)?;
    let base = config.train.seed;
    let seeds: Vec<u64> = (0..DEFAULT_SEEDS.len() as u64)
        .map(|i| base.wrapping_add(i))
        .collect();
    let report = run_default_comparison(&seeds)?;

    write_json(
        &config.out.join("comparison.json"),
        &SimulateArtifact {
            config,
            scenario_train: SCENARIO_TRAIN,
            seeds: &seeds,
            report: &report,
        },
    )?;
    write_text(
        &config.out.join("comparison.csv"),
        &csv_with_config(config, &report.to_csv())?,
    )?;

    for method in &report.methods {
        println!(
            "{:<8} mean {:.4} ± {:.4}, median {:.4}",
            method.method, method.mean, method.std, method.median
        );
    }
    Ok(())
}

#[derive(Serialize)]
struct AblateArtifact<'a> {
    config: &'a RunConfig,
    cache_key: &'a str,
    warnings: &'a [String],
    report: &'a AblationReport,
}

pub fn ablate(config: &RunConfig) -> Result<(), CmdError> {
    if config.strategy == Strategy::All {
        return Err(CmdError::Usage(
            "ablate needs a single routing strategy, not \"all\"".into(),
        ));
    }
    let collection = pipeline::load_data(config)?;
    ensure_out(config)?;
    let (matrix, cache_key, _) = pipeline::disparity_matrix(config, &collection)?;
    let (graph, warnings) = pipeline::graph_with_warnings(config, &collection, &matrix)?;
    let eps1 = pipeline::eps1_map(config, &collection)?;
    let path = pipeline::route_with(config.strategy, &graph, config, &eps1)?;
    let report = path_length_ablation(
        &collection,
        &path,
        &config.train,
        &matrix,
        &collection.sizes(),
    )?;

    write_json(
        &config.out.join("ablation.json"),
        &AblateArtifact {
            config,
            cache_key: &cache_key,
            warnings: &warnings,
            report: &report,
        },
    )?;
    write_text(
        &config.out.join("ablation.csv"),
        &csv_with_config(config, &report.to_csv())?,
    )?;

    println!("path: {} → target", report.path.join(" → "));
    for row in &report.rows {
        println!("k={} accuracy {:.4}", row.kappa, row.accuracy);
    }
    Ok(())
}
