//! Transformer building blocks, the encoder-decoder, encoder-only and
//! decoder-only architectures, their training loops and samplers, all on a
//! small `f64` reverse-mode autodiff engine.
//!
//! Token IDs are one-based and the last three IDs of every vocabulary are
//! `mask_token`, `bos_token` and `eos_token`, in that order. Sequences of
//! vectors are matrices with one column per token.

pub mod error;
pub mod infer;
pub mod layers;
pub mod models;
pub mod persist;
pub mod rng;
pub mod tensor;
pub mod tokenizer;
pub mod train;

pub use error::{Error, ErrorClass, Result};
