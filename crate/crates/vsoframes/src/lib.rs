//! Semantic frame induction from verb-subject-object tuples.
//!
//! The library ingests dependency-parsed text (or pre-extracted tuple files)
//! into a vocabulary-mapped corpus of document-grouped VSO tuples, fits
//! Dirichlet-multinomial mixture models to it by collapsed Gibbs sampling
//! (with slice-sampled concentration parameters), and evaluates the learned
//! lexicon against reference wordsets with Dice/Jaccard/Tversky alignment.
//!
//! Three model variants are supported:
//!
//! * model 0 — independent tuples: each tuple's frame is drawn from a fixed
//!   uniform prior; frames only share per-argument word distributions.
//! * model 1 — document-tuples: frames are drawn from a per-document
//!   multinomial with a Dirichlet prior, so tuples in one document prefer a
//!   sparse set of frames.
//! * model 2 — cross-cutting classes: frames pick latent word classes per
//!   argument position through a per-(frame, position) "linker" distribution,
//!   and classes own the word distributions, shared across frames.
//!
//! Document label masking (a binary label-to-frame permission matrix) can be
//! layered on any variant to restrict which frames a document may use.

pub mod cli;
pub mod corpus;
pub mod diagnostics;
pub mod dirmult;
pub mod error;
pub mod evalx;
pub mod fit;
pub mod hyper;
pub mod model;
pub mod parallel;

pub use error::{Error, Result};
