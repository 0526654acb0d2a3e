//! Topographical maps of a model's input space.
//!
//! The pipeline embeds a dataset ([`embedding`]), partitions the embedding
//! into regions ([`clustering`], with [`kselect`] choosing the region count),
//! scores candidate maps by how well a classifier can tell regions apart
//! ([`evaluator`]), and then uses the winning map to locate small groups of
//! regions whose inputs statistically kill model mutants ([`mutation`]).
//! [`topograph`] exports the map as a pruned graph.

pub mod clustering;
pub mod datamodel;
pub mod embedding;
pub mod error;
pub mod evaluator;
pub mod io;
pub mod kselect;
pub mod mutation;
pub mod synthetic;
pub mod topograph;

pub use error::{Error, Result};
