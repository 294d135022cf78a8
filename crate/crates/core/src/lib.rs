//! Toolkit for analogically organized sentence-matrix completion tasks.
//!
//! - [`lexicon`]: lexicons, paradigm rendering, answer sets with a seven-way
//!   distractor taxonomy, dataset generation and splits.
//! - [`ablate`]: the five context organizations (base, shuffled, no-analogy,
//!   no-soft-cue, transposed) and grid flattening.
//! - [`embed`]: the binary sentence-embedding cache, pseudo-embeddings and
//!   model input assembly.
//! - [`nn`]: CNN/FFNN heads, the cosine max-margin loss, Adam and gradient
//!   checking.
//! - [`train`]: training with early stopping, prediction, F1 reports,
//!   learning-curve sweeps and generalization gaps.
//! - [`llm`]: prompt construction, response parsing and scoring for
//!   externally run language models.

pub mod ablate;
pub mod embed;
pub mod lexicon;
pub mod llm;
pub mod nn;
pub mod seed;
pub mod text;
pub mod train;
