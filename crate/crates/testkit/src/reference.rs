//! Brute-force reference decoder: enumerates every complete derivation and
//! scores it from scratch, with no stacks, recombination, or pruning. Slow
//! and only usable on short sources, but its answer is exact, so it serves
//! as the ground truth the production search is checked against.

use pairforge::align::{PhraseTable, PhraseTableEntry};
use pairforge::decode::{DecoderParams, LogLinearWeights};
use pairforge::lm::{train_lm, NGramModel};
use pairforge::text::{tokenize, Sentence, Token};

const COPY_LOG_PENALTY: f64 = -4.0;
const LOG_FLOOR: f64 = -99.0;

fn entry(src: &str, tgt: &str, features: [f64; 4]) -> PhraseTableEntry {
    PhraseTableEntry {
        src: tokenize(src).tokens().to_vec(),
        tgt: tokenize(tgt).tokens().to_vec(),
        features,
    }
}

/// Fixed ambiguous phrase table over sources {a, b, c} with overlapping
/// multi-token spans; "d" stays out-of-vocabulary. Small enough for
/// exhaustive enumeration, ambiguous enough to exercise real search.
pub fn oracle_table() -> PhraseTable {
    let mut pt = PhraseTable::new(7);
    for e in [
        entry("a", "x", [0.6, 0.5, 0.6, 0.5]),
        entry("a", "y", [0.4, 0.5, 0.4, 0.5]),
        entry("b", "z", [1.0, 1.0, 1.0, 1.0]),
        entry("a b", "w", [0.3, 0.8, 0.3, 0.8]),
        entry("a b", "x z", [0.2, 0.2, 0.2, 0.2]),
        entry("c", "x y", [0.5, 0.5, 0.5, 0.5]),
        entry("b c", "q", [0.4, 0.6, 0.4, 0.6]),
    ] {
        pt.insert(e).expect("fixed entries are well-formed");
    }
    pt
}

/// Trigram model over the oracle table's target vocabulary.
pub fn oracle_lm() -> NGramModel {
    train_lm(
        &[
            tokenize("x z w"),
            tokenize("y q x"),
            tokenize("w x y z"),
            tokenize("q w"),
            tokenize("x y z w q"),
        ],
        3,
    )
    .expect("fixed corpus trains")
}

struct Candidate {
    start: usize,
    end: usize,
    tgt: Vec<Token>,
    phrase_log: [f64; 4],
}

fn candidates(pt: &PhraseTable, src: &[Token], copy_all: bool) -> Vec<Candidate> {
    let n = src.len();
    let mut out = Vec::new();
    let mut covered = vec![false; n];
    for start in 0..n {
        for end in start + 1..=n.min(start + pt.max_phrase_len.max(1)) {
            for entry in pt.options(&src[start..end]) {
                covered[start..end].iter_mut().for_each(|c| *c = true);
                out.push(Candidate {
                    start,
                    end,
                    tgt: entry.tgt.clone(),
                    phrase_log: entry.features.map(|p| {
                        if p > 0.0 {
                            p.log10()
                        } else {
                            LOG_FLOOR
                        }
                    }),
                });
            }
        }
    }
    for (i, tok) in src.iter().enumerate() {
        if copy_all || !covered[i] {
            out.push(Candidate {
                start: i,
                end: i + 1,
                tgt: vec![tok.clone()],
                phrase_log: [COPY_LOG_PENALTY, 0.0, 0.0, 0.0],
            });
        }
    }
    out
}

struct Derivation {
    target: Vec<Token>,
    phrase_log: [f64; 4],
    distortion: f64,
}

fn enumerate(
    opts: &[Candidate],
    n: usize,
    limit: usize,
    covered: &mut Vec<bool>,
    last_end: isize,
    partial: &mut Derivation,
    out: &mut Vec<(Vec<Token>, [f64; 4], f64)>,
) {
    if covered.iter().all(|c| *c) {
        out.push((partial.target.clone(), partial.phrase_log, partial.distortion));
        return;
    }
    let first_gap = covered.iter().position(|c| !*c).expect("gap exists");
    for opt in opts {
        if covered[opt.start..opt.end].iter().any(|c| *c) {
            continue;
        }
        let jump = (opt.start as isize - 1 - last_end).unsigned_abs();
        if jump as usize > limit && opt.start != first_gap {
            continue;
        }
        covered[opt.start..opt.end].iter_mut().for_each(|c| *c = true);
        let tgt_len = opt.tgt.len();
        partial.target.extend(opt.tgt.iter().cloned());
        for (acc, d) in partial.phrase_log.iter_mut().zip(opt.phrase_log) {
            *acc += d;
        }
        partial.distortion -= jump as f64;
        enumerate(opts, n, limit, covered, opt.end as isize - 1, partial, out);
        partial.distortion += jump as f64;
        for (acc, d) in partial.phrase_log.iter_mut().zip(opt.phrase_log) {
            *acc -= d;
        }
        partial.target.truncate(partial.target.len() - tgt_len);
        covered[opt.start..opt.end].iter_mut().for_each(|c| *c = false);
    }
}

/// Best translation of `src` by exhaustive enumeration under the same
/// phrase options, movement rule, and scoring as the production decoder:
/// highest total score, ties broken toward the lexicographically smaller
/// target. Returns None only for an empty source.
pub fn exhaustive_best(
    pt: &PhraseTable,
    lm: &NGramModel,
    weights: &LogLinearWeights,
    params: &DecoderParams,
    src: &Sentence,
) -> Option<(Sentence, f64)> {
    let toks = src.tokens();
    if toks.is_empty() {
        return None;
    }
    let mut complete = Vec::new();
    for copy_all in [false, true] {
        let opts = candidates(pt, toks, copy_all);
        let mut covered = vec![false; toks.len()];
        let mut partial = Derivation {
            target: Vec::new(),
            phrase_log: [0.0; 4],
            distortion: 0.0,
        };
        enumerate(
            &opts,
            toks.len(),
            params.distortion_limit,
            &mut covered,
            -1,
            &mut partial,
            &mut complete,
        );
        // The copy-everything retry only applies when the table's own
        // options cannot cover the source at all.
        if !complete.is_empty() {
            break;
        }
    }
    let mut best: Option<(Sentence, f64)> = None;
    for (target, phrase_log, distortion) in complete {
        let sentence = Sentence::new(target);
        let lm_score = lm.logprob(&sentence);
        let score = weights.lm * lm_score
            + weights
                .phrase
                .iter()
                .zip(phrase_log)
                .map(|(w, f)| w * f)
                .sum::<f64>()
            + weights.word_penalty * sentence.len() as f64
            + weights.distortion * distortion;
        let better = match &best {
            None => true,
            Some((bs, bv)) => {
                score > *bv || (score == *bv && sentence.tokens() < bs.tokens())
            }
        };
        if better {
            best = Some((sentence, score));
        }
    }
    best
}
