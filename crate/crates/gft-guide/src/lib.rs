//! Doctest bridge for the guide in `book/`.
//!
//! mdbook renders the chapters but cannot compile them against the crate,
//! so each chapter is also included here as module documentation: `cargo
//! test` then runs every code block as a doctest. One module per chapter
//! keeps a failing block's origin obvious.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/data-model.md")]
pub mod data_model {}

#[doc = include_str!("../../../book/src/optimal-transport.md")]
pub mod optimal_transport {}

#[doc = include_str!("../../../book/src/disparity-graph.md")]
pub mod disparity_graph {}

#[doc = include_str!("../../../book/src/routing.md")]
pub mod routing {}

#[doc = include_str!("../../../book/src/bounds.md")]
pub mod bounds {}

#[doc = include_str!("../../../book/src/training.md")]
pub mod training {}

#[doc = include_str!("../../../book/src/simulation.md")]
pub mod simulation {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
