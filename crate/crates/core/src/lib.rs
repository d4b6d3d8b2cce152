//! Core library for `litrank`, a trainable biomedical literature ranking
//! engine.
//!
//! The pipeline: documents and concept annotations are ingested into a
//! [`corpus::Corpus`], linked into a document-concept graph
//! ([`dcgraph::DocConceptGraph`]), and encoded by a BiLSTM encoder plus a
//! restricted graph convolution ([`docrep`]). Structured queries are
//! expanded through a synonym lexicon and encoded by a small text CNN
//! ([`queryrep`]). A pairwise margin objective ([`ranker`]) ties the two
//! sides together, trained with Adagrad ([`trainer`]) and evaluated with
//! standard ranked-retrieval metrics ([`metrics`]).
//!
//! All numeric kernels live in [`numkit`]: dense f64 tensors with
//! hand-written forward and backward passes, checked against central
//! finite differences.

pub mod corpus;
pub mod dcgraph;
pub mod docrep;
pub mod metrics;
pub mod model;
pub mod numkit;
pub mod queryrep;
pub mod ranker;
pub mod trainer;

#[cfg(test)]
pub(crate) mod testutil;
