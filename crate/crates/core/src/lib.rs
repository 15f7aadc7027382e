//! Data engineering toolkit for building a financial-domain language model:
//! corpus chunking, cleaning and SimHash dedup, mix planning and vocabulary
//! extension, instruction-data construction and filtering, preference-pair
//! assembly, the calculator tool language, alignment numerics, and a
//! multiple-choice evaluation harness.
//!
//! External models (embedding, scoring, judging, chat) are reached through
//! the traits in [`providers`], each of which has a deterministic offline stub.

pub mod calc;
pub mod dpo;
pub mod embed_dedup;
pub mod error;
pub mod eval;
pub mod hash;
pub mod ifd;
pub mod jsonl;
pub mod pipeline;
pub mod planner;
pub mod prefs;
pub mod pretrain;
pub mod providers;
pub mod sft;
pub mod simhash;
pub mod tool;

pub use error::{Error, Result};
