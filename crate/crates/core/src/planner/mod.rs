//! Token accounting, domain/general mix planning and domain vocabulary
//! extension.

mod mix;
mod vocab;

pub use mix::{plan_mix, reduce_ratio, MixPlan, Ratio, DOMAIN_KEY};
pub use vocab::{
    count_tokens, extend_vocab, CharHeuristic, TokenCounter, VocabConfig, VocabCounter,
    VocabExtension,
};
