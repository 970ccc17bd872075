//! Gradual fine-tuning (GFT) across multiple source domains.
//!
//! Given labeled datasets from `K` source domains and an unlabeled target,
//! this crate estimates pairwise Wasserstein disparities with a debiased
//! Sinkhorn solver, assembles the domains into a weighted disparity graph,
//! routes candidate training orders through the graph (nearest-neighbor,
//! shortest-path, minimum-spanning-tree, or exhaustive bound-minimizing
//! search), scores paths with a generalization bound, and trains a linear
//! classifier sequentially along the chosen path, warm-starting every stage
//! from the previous one.
//!
//! The typical flow:
//!
//! ```
//! use gft::dataset;
//! use gft::otdist::{SinkhornConfig, Subsample};
//! use gft::trainer::{self, TrainConfig};
//! use gft::{graph, otdist, routing};
//!
//! # fn main() -> gft::Result<()> {
//! let collection = gft::simulate::two_source_scenario(7);
//! let collection = dataset::normalize_to_unit_ball(&collection);
//!
//! let train_cfg = TrainConfig::default();
//! let pseudo = trainer::pseudo_label_target(&collection, &train_cfg)?;
//!
//! let sinkhorn = SinkhornConfig::default();
//! let subsample = Some(Subsample { cap: 60, seed: 0 });
//! let matrix = otdist::pairwise_disparity(&collection, &pseudo, &sinkhorn, subsample)?;
//!
//! let g = graph::build_graph(&matrix, &collection.sizes(), None)?;
//! let path = routing::route_nearest_neighbor(&g)?;
//! let model = trainer::gft_train(&path, &collection, &train_cfg)?;
//! let accuracy = trainer::accuracy(&model, &collection.target.test)?;
//! assert!(accuracy > 0.5);
//! # Ok(())
//! # }
//! ```

pub mod bound;
pub mod dataset;
pub mod error;
pub mod graph;
pub mod otdist;
pub mod routing;
pub mod simulate;
pub mod trainer;

pub use error::{Error, Result};
