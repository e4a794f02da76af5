//! Toolkit for synthesizing poor→good English sentence pairs by pairing a
//! deliberately degraded phrase-based translator with high-quality
//! translation sources, plus the evaluation stack (BLEU, perplexity,
//! M2-style F-beta, error typing) used to validate the synthesized data.

pub mod align;
pub mod decode;
pub mod lm;
pub mod mert;
pub mod metrics;
pub mod pipeline;
pub mod provider;
pub mod synth;
pub mod text;
