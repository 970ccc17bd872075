//! Steps shared by the data-driven commands: loading, the content-addressed
//! disparity-matrix cache, graph assembly with pruning warnings, and the
//! strategy dispatch.

use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use gft::dataset::{self, DomainCollection};
use gft::graph::{build_graph, reachable_sources, DisparityGraph};
use gft::otdist::{pairwise_disparity, DisparityMatrix, DisparityProvenance};
use gft::routing::{
    route_exhaustive_bound_min, route_mst, route_nearest_neighbor, route_shortest_paths,
    select_optimal, Path,
};
use gft::trainer::{first_stage_losses, pseudo_label_target};

use crate::config::{Eps1Mode, RunConfig, Strategy};
use crate::CmdError;

/// Loads the configured data file and normalizes features into the unit
/// ball (the geometry the bound's Lipschitz constants refer to). Distances
/// and training both see the normalized collection.
pub fn load_data(config: &RunConfig) -> Result<DomainCollection, CmdError> {
    let path = config.data.as_ref().ok_or_else(|| {
        CmdError::Usage("no data file given; pass --data or set \"data\" in the config".into())
    })?;
    let collection = dataset::load_collection(path, config.format)?;
    Ok(dataset::normalize_to_unit_ball(&collection))
}

/// One cached matrix: the full content key it was computed under, the
/// provenance block, and the matrix itself.
#[derive(Debug, Serialize, Deserialize)]
struct CacheEntry {
    key: String,
    provenance: DisparityProvenance,
    matrix: DisparityMatrix,
}

/// Content hash of everything the matrix depends on: the raw data bytes,
/// the Sinkhorn configuration, the subsample policy, and the full training
/// configuration behind the target's pseudo-labels (a superset of the seed,
/// since every knob of that fit shifts the labels).
fn cache_key(config: &RunConfig) -> Result<String, CmdError> {
    let path = config.data.as_ref().expect("caller loaded data");
    let bytes = fs::read(path).map_err(|source| gft::Error::Io {
        path: path.clone(),
        source,
    })?;
    let fingerprint = serde_json::to_string(&(
        &config.sinkhorn,
        &config.subsample,
        &config.train,
    ))
    .map_err(gft::Error::from)?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    hasher.update([0]);
    hasher.update(fingerprint.as_bytes());
    Ok(hex::encode(hasher.finalize()))
}

fn cache_path(config: &RunConfig, key: &str) -> PathBuf {
    config.out.join("cache").join(format!("matrix-{}.json", &key[..16]))
}

/// The disparity matrix for the collection, via the cache when an entry
/// with the same content key exists, recomputed (and stored) otherwise.
/// Returns the matrix, its cache key, and whether the cache was hit.
pub fn disparity_matrix(
    config: &RunConfig,
    collection: &DomainCollection,
) -> Result<(DisparityMatrix, String, bool), CmdError> {
    let key = cache_key(config)?;
    let path = cache_path(config, &key);
    if let Ok(text) = fs::read_to_string(&path) {
        if let Ok(entry) = serde_json::from_str::<CacheEntry>(&text) {
            if entry.key == key {
                return Ok((entry.matrix, key, true));
            }
        }
    }

    let pseudo = pseudo_label_target(collection, &config.train)?;
    let matrix = pairwise_disparity(collection, &pseudo, &config.sinkhorn, config.subsample)?;
    let entry = CacheEntry {
        key: key.clone(),
        provenance: provenance(config, collection),
        matrix,
    };
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|source| gft::Error::Io {
            path: parent.to_path_buf(),
            source,
        })?;
    }
    let text = serde_json::to_string_pretty(&entry).map_err(gft::Error::from)?;
    fs::write(&path, text + "\n").map_err(|source| gft::Error::Io { path, source })?;
    Ok((entry.matrix, key, false))
}

pub fn provenance(config: &RunConfig, collection: &DomainCollection) -> DisparityProvenance {
    DisparityProvenance {
        sinkhorn: config.sinkhorn,
        subsample: config.subsample,
        sizes: collection.sizes(),
    }
}

/// Builds the (possibly tau-pruned) graph and reports every source that
/// pruning disconnected from the target, both on stderr and in the returned
/// warning list.
pub fn graph_with_warnings(
    config: &RunConfig,
    collection: &DomainCollection,
    matrix: &DisparityMatrix,
) -> Result<(DisparityGraph, Vec<String>), CmdError> {
    let graph = build_graph(matrix, &collection.sizes(), config.tau)?;
    let mut warnings = Vec::new();
    if let Some(tau) = config.tau {
        let reachable = reachable_sources(&graph);
        for id in graph.source_ids() {
            if !reachable.contains(id) {
                let message = format!(
                    "source {id:?} is disconnected from the target under tau = {tau} \
                     and is excluded from routing"
                );
                eprintln!("warning: {message}");
                warnings.push(message);
            }
        }
    }
    Ok((graph, warnings))
}

/// The ε̂₁ lookup used for bound evaluations: each source's final training
/// loss when fit alone, or zero for every source.
pub fn eps1_map(
    config: &RunConfig,
    collection: &DomainCollection,
) -> Result<BTreeMap<String, f64>, CmdError> {
    match config.eps1_mode {
        Eps1Mode::Trained => Ok(first_stage_losses(collection, &config.train)?),
        Eps1Mode::Zero => Ok(collection
            .sources
            .iter()
            .map(|d| (d.domain_id.clone(), 0.0))
            .collect()),
    }
}

/// Runs one concrete strategy to a single chosen path. The per-source
/// strategies reduce their candidate sets with the magnitude/weight
/// preference order.
pub fn route_with(
    strategy: Strategy,
    graph: &DisparityGraph,
    config: &RunConfig,
    eps1: &BTreeMap<String, f64>,
) -> Result<Path, CmdError> {
    let path = match strategy {
        Strategy::Nn => route_nearest_neighbor(graph)?,
        Strategy::Sp => select_optimal(&route_shortest_paths(graph)?)?,
        Strategy::Mst => select_optimal(&route_mst(graph)?)?,
        Strategy::Tgft => route_exhaustive_bound_min(graph, &config.bound, eps1, None)?,
        Strategy::All => {
            return Err(CmdError::Usage(
                "\"all\" is not a concrete strategy; expand it first".into(),
            ))
        }
    };
    Ok(path)
}
