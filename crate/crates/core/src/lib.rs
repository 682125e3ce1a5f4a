//! Probbase auditing for verbal autopsy by held-out block imputation.
//!
//! A probbase `q[j][k] = P(answer k is Yes | cause j)` is scored by how well
//! it lets a VA algorithm impute answers that were hidden one block at a
//! time. The crate provides the scorer, a finite-difference audit of single
//! entries, a coordinate-descent calibrator, a latent-Gaussian probit
//! simulator for validation, block learning from answer correlations, and
//! scripted experiments.
//!
//! The numeric core is generic over [`Scalar`] (`f32`/`f64`); the aliases at
//! the crate root fix it to `f64`.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod audit;
pub mod blocks;
pub mod error;
pub mod experiments;
pub mod imputation;
pub mod io;
pub mod model;
pub mod optimize;
pub mod rng;
pub mod scalar;
pub mod simulate;
pub mod va;

pub use error::{Error, Result};
pub use imputation::{cross_entropy, imputation_accuracy, Denominator, ScoringContext};
pub use model::{
    clamp_probbase, decode_letter_probbase, mask_block, validate_inputs, Answer, AnswerMatrix,
    BlockPartition, LetterCodeTable, DEFAULT_CLAMP,
};
pub use scalar::Scalar;
pub use va::{
    impute_question_prob, interva4_posterior, naive_bayes_posterior, Algorithm, VaAlgorithm,
};

pub type Probbase = model::Probbase<f64>;
pub type Prior = model::Prior<f64>;
pub type CauseDistribution = model::CauseDistribution<f64>;
pub type ImputationResult = imputation::ImputationResult<f64>;

pub type Probbase32 = model::Probbase<f32>;
pub type Prior32 = model::Prior<f32>;
