//! End-to-end training: word alignment in both directions, phrase
//! extraction, target-side language model, and MERT weight tuning, bundled
//! into a ready-to-use translator.

use rayon::prelude::*;

use crate::align::{
    build_phrase_table, em_model1, symmetrize, viterbi_align, AlignError, AlignmentMatrix,
    TranslationTable,
};
use crate::decode::{DecodeError, DecoderParams, LogLinearWeights, SmtSystem};
use crate::lm::{train_lm, LmError, NGramModel};
use crate::mert::{mert_tune, MertConfig, MertError};
use crate::text::ParallelCorpus;

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Lm(#[from] LmError),
    #[error(transparent)]
    Align(#[from] AlignError),
    #[error(transparent)]
    Mert(#[from] MertError),
    #[error(transparent)]
    Decode(#[from] DecodeError),
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct TrainConfig {
    pub lm_order: usize,
    pub em_iterations: usize,
    pub max_phrase_len: usize,
    pub params: DecoderParams,
    pub mert: MertConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lm_order: 3,
            em_iterations: 10,
            max_phrase_len: 7,
            params: DecoderParams::default(),
            mert: MertConfig::default(),
        }
    }
}

/// Both word-alignment models and the symmetrized per-pair alignments.
pub struct AlignmentOutcome {
    pub forward: TranslationTable,
    pub reverse: TranslationTable,
    pub alignments: Vec<AlignmentMatrix>,
    pub log_likelihood: Vec<f64>,
}

/// Word-aligns the corpus: EM in both directions, Viterbi links, then
/// grow-diag symmetrization.
pub fn align_corpus(
    corpus: &ParallelCorpus,
    em_iterations: usize,
) -> Result<AlignmentOutcome, PipelineError> {
    let fwd = em_model1(corpus, em_iterations)?;
    let rev = em_model1(&corpus.swapped(), em_iterations)?;
    let alignments: Vec<AlignmentMatrix> = corpus
        .pairs()
        .par_iter()
        .map(|(src, tgt)| {
            let f = viterbi_align(&fwd.table, (src, tgt));
            let r = viterbi_align(&rev.table, (tgt, src)).transposed();
            symmetrize(&f, &r)
        })
        .collect::<Result<_, _>>()?;
    Ok(AlignmentOutcome {
        forward: fwd.table,
        reverse: rev.table,
        alignments,
        log_likelihood: fwd.log_likelihood,
    })
}

/// Trains the full translator on a parallel corpus and tunes its weights
/// on the dev set.
pub fn train_smt_system(
    train: &ParallelCorpus,
    dev: &ParallelCorpus,
    config: &TrainConfig,
) -> Result<SmtSystem, PipelineError> {
    let targets: Vec<_> = train.targets().cloned().collect();
    let lm = train_lm(&targets, config.lm_order)?;
    let aligned = align_corpus(train, config.em_iterations)?;
    let phrase_table = build_phrase_table(
        train,
        &aligned.alignments,
        config.max_phrase_len,
        &aligned.forward,
        &aligned.reverse,
    )?;
    let tuned = mert_tune(
        dev,
        &phrase_table,
        &lm,
        &LogLinearWeights::default(),
        &config.params,
        &config.mert,
    )?;
    Ok(SmtSystem { phrase_table, lm, weights: tuned.weights, params: config.params })
}

/// Convenience for callers that need the untuned system (default weights),
/// e.g. when weights are tuned or supplied separately.
pub fn assemble_system(
    phrase_table: crate::align::PhraseTable,
    lm: NGramModel,
    weights: LogLinearWeights,
    params: DecoderParams,
) -> SmtSystem {
    SmtSystem { phrase_table, lm, weights, params }
}
