//! Multilingual toxicity detection toolkit.
//!
//! The crate is organised around the stages of a toxicity-labelling pipeline:
//!
//! - [`corpus`]: utterance manifests, external classifier scores, embedding
//!   vectors and label files.
//! - [`wordlist`]: lexical (wordlist) detection and per-token analysis.
//! - [`classifier`]: the feed-forward classifier head over fixed-size
//!   embeddings, with training, scoring and the `MTXM` model format.
//! - [`selection`]: pre-selection of candidate utterances for annotation and
//!   stratified split generation.
//! - [`evaluation`]: AUC, precision/recall, recall at fixed precision,
//!   correlations, category breakdowns, quantile curves and report emission.
//! - [`annotation`]: annotation campaigns backed by an append-only label log.

pub mod annotation;
pub mod classifier;
pub mod corpus;
pub mod evaluation;
pub mod rng;
pub mod selection;
pub mod wordlist;
