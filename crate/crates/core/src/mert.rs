//! Minimum error rate training: tunes the log-linear weights to maximize
//! corpus BLEU on a development set using exact line search over the
//! per-sentence upper envelopes of hypothesis score lines.

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::align::PhraseTable;
use crate::decode::{nbest_id, DecodeError, DecoderParams, LogLinearWeights, NBestEntry};
use crate::lm::NGramModel;
use crate::metrics::BleuStats;
use crate::text::{ParallelCorpus, Sentence};

/// Accepting a candidate requires improving pooled BLEU by more than this.
const ACCEPT_EPS: f64 = 1e-12;

#[derive(Debug, thiserror::Error)]
pub enum MertError {
    #[error("n-best pool contains no hypotheses")]
    EmptyPool,
    #[error("direction vector is zero")]
    ZeroDirection,
    #[error("development corpus is empty")]
    EmptyDev,
    #[error("{refs} references for {pool} pooled sentences")]
    PoolMismatch { refs: usize, pool: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Decode(#[from] DecodeError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct MertConfig {
    pub outer_iters: usize,
    pub directions_per_iter: usize,
    pub nbest_size: usize,
    pub seed: u64,
}

impl Default for MertConfig {
    fn default() -> Self {
        MertConfig { outer_iters: 10, directions_per_iter: 10, nbest_size: 100, seed: 0 }
    }
}

#[derive(Debug, Clone)]
pub struct MertOutcome {
    pub weights: LogLinearWeights,
    /// Pooled dev BLEU after each outer iteration's acceptance step.
    pub dev_bleu_history: Vec<f64>,
}

// ---------------------------------------------------------- line search --

#[derive(Clone, Copy)]
struct ScoreLine {
    slope: f64,
    intercept: f64,
    entry: usize,
}

/// One upper-envelope segment: the hypothesis selected on [lo, hi).
struct Segment {
    lo: f64,
    stats: BleuStats,
}

/// Upper envelope of the score lines of one sentence's pool.
fn envelope(entries: &[NBestEntry], reference: &Sentence, w: &LogLinearWeights, d: &[f64; 7]) -> Vec<Segment> {
    let mut lines: Vec<ScoreLine> = entries
        .iter()
        .enumerate()
        .map(|(i, e)| {
            let f = e.features.as_array();
            ScoreLine {
                slope: f.iter().zip(d).map(|(a, b)| a * b).sum(),
                intercept: e.features.dot(w),
                entry: i,
            }
        })
        .collect();
    lines.sort_by(|a, b| {
        a.slope
            .partial_cmp(&b.slope)
            .expect("finite slopes")
            .then(b.intercept.partial_cmp(&a.intercept).expect("finite intercepts"))
            .then(a.entry.cmp(&b.entry))
    });
    lines.dedup_by(|next, kept| next.slope == kept.slope);

    // Convex hull sweep: each new (steeper) line takes over from some x on;
    // pop lines whose reign collapses to nothing.
    let mut hull: Vec<(ScoreLine, f64)> = Vec::new();
    for line in lines {
        loop {
            match hull.last() {
                None => {
                    hull.push((line, f64::NEG_INFINITY));
                    break;
                }
                Some(&(last, lo)) => {
                    let x = (last.intercept - line.intercept) / (line.slope - last.slope);
                    if x <= lo {
                        hull.pop();
                    } else {
                        hull.push((line, x));
                        break;
                    }
                }
            }
        }
    }
    hull.into_iter()
        .map(|(line, lo)| Segment {
            lo,
            stats: BleuStats::between(&entries[line.entry].target, reference),
        })
        .collect()
}

struct Interval {
    lo: f64,
    hi: f64,
    bleu: f64,
}

/// Sweeps all per-sentence envelopes left to right, maintaining corpus-level
/// BLEU statistics, and reports BLEU on every maximal interval of gamma.
fn sweep(
    pool: &[Vec<NBestEntry>],
    refs: &[Sentence],
    w: &LogLinearWeights,
    d: &[f64; 7],
) -> Result<Vec<Interval>, MertError> {
    if refs.len() != pool.len() {
        return Err(MertError::PoolMismatch { refs: refs.len(), pool: pool.len() });
    }
    if d.iter().all(|&v| v == 0.0) {
        return Err(MertError::ZeroDirection);
    }
    let mut total = BleuStats::default();
    // (boundary, stats leaving, stats entering)
    let mut events: Vec<(f64, BleuStats, BleuStats)> = Vec::new();
    let mut any = false;
    for (entries, reference) in pool.iter().zip(refs) {
        if entries.is_empty() {
            continue;
        }
        any = true;
        let segs = envelope(entries, reference, w, d);
        total += segs[0].stats;
        for k in 1..segs.len() {
            events.push((segs[k].lo, segs[k - 1].stats, segs[k].stats));
        }
    }
    if !any {
        return Err(MertError::EmptyPool);
    }
    events.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite boundaries"));

    let mut intervals = Vec::new();
    let mut lo = f64::NEG_INFINITY;
    let mut i = 0;
    while i < events.len() {
        let boundary = events[i].0;
        if boundary > lo {
            intervals.push(Interval { lo, hi: boundary, bleu: total.score() });
            lo = boundary;
        }
        while i < events.len() && events[i].0 == boundary {
            sub_stats(&mut total, events[i].1);
            total += events[i].2;
            i += 1;
        }
    }
    intervals.push(Interval { lo, hi: f64::INFINITY, bleu: total.score() });
    Ok(intervals)
}

fn sub_stats(total: &mut BleuStats, s: BleuStats) {
    for n in 0..4 {
        total.clipped[n] -= s.clipped[n];
        total.hyp_ngrams[n] -= s.hyp_ngrams[n];
    }
    total.hyp_len -= s.hyp_len;
    total.ref_len -= s.ref_len;
}

/// Exact line search along `d` from `w`: returns the step that maximizes
/// pooled corpus BLEU and the BLEU reached. Stays at 0 unless some interval
/// beats the BLEU at gamma = 0.
pub fn line_search(
    pool: &[Vec<NBestEntry>],
    refs: &[Sentence],
    w: &LogLinearWeights,
    d: &[f64; 7],
) -> Result<(f64, f64), MertError> {
    let intervals = sweep(pool, refs, w, d)?;
    // Half-open [lo, hi) intervals: the one holding 0 is the status quo.
    let at_zero = intervals
        .iter()
        .find(|iv| iv.lo <= 0.0 && 0.0 < iv.hi)
        .expect("intervals cover the line");
    let bleu_zero = at_zero.bleu;
    let best = intervals
        .iter()
        .max_by(|a, b| a.bleu.partial_cmp(&b.bleu).expect("finite bleu"))
        .expect("at least one interval");
    if best.bleu <= bleu_zero + ACCEPT_EPS {
        return Ok((0.0, bleu_zero));
    }
    let gamma = if best.lo.is_infinite() {
        best.hi - 1.0
    } else if best.hi.is_infinite() {
        best.lo + 1.0
    } else {
        0.5 * (best.lo + best.hi)
    };
    Ok((gamma, best.bleu))
}

// -------------------------------------------------------------- tuning --

/// Pooled BLEU under `w`: per sentence, the highest-scoring pool entry is
/// selected and scored against the reference.
fn pool_bleu(pool: &[Vec<NBestEntry>], refs: &[Sentence], w: &LogLinearWeights) -> f64 {
    let mut total = BleuStats::default();
    for (entries, reference) in pool.iter().zip(refs) {
        let best = entries.iter().max_by(|a, b| {
            a.features
                .dot(w)
                .partial_cmp(&b.features.dot(w))
                .expect("finite scores")
                .then_with(|| b.target.cmp(&a.target))
        });
        if let Some(e) = best {
            total += BleuStats::between(&e.target, reference);
        }
    }
    total.score()
}

fn normalized(w: &LogLinearWeights) -> LogLinearWeights {
    let mut out = w.clone();
    out.lm = out.lm.max(0.0);
    let norm = out.l1_norm();
    if norm > 0.0 {
        LogLinearWeights::from_array(out.as_array().map(|v| v / norm))
    } else {
        out
    }
}

/// Iteratively decodes the dev set into a growing n-best pool and climbs
/// pooled BLEU along coordinate plus seeded random directions, accepting a
/// step only when it strictly improves. Stops early once an iteration adds
/// no new hypotheses to the pool.
pub fn mert_tune(
    dev: &ParallelCorpus,
    pt: &PhraseTable,
    lm: &NGramModel,
    init: &LogLinearWeights,
    params: &DecoderParams,
    config: &MertConfig,
) -> Result<MertOutcome, MertError> {
    if dev.is_empty() {
        return Err(MertError::EmptyDev);
    }
    if config.outer_iters == 0 {
        return Err(MertError::InvalidConfig("outer_iters must be at least 1".into()));
    }
    if config.nbest_size == 0 {
        return Err(MertError::InvalidConfig("nbest_size must be at least 1".into()));
    }
    init.validate()?;
    let refs: Vec<Sentence> = dev.targets().cloned().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let mut w = normalized(init);
    let mut pool: Vec<Vec<NBestEntry>> = vec![Vec::new(); dev.len()];
    let mut surfaces: Vec<HashMap<Sentence, usize>> = vec![HashMap::new(); dev.len()];
    let mut history = Vec::new();

    for _ in 0..config.outer_iters {
        let lists = dev
            .pairs()
            .par_iter()
            .enumerate()
            .map(|(i, (src, _))| nbest_id(pt, lm, &w, src, config.nbest_size, params, i))
            .collect::<Result<Vec<_>, _>>()?;
        let mut grew = false;
        for list in lists {
            let i = list.sentence_id;
            for e in list.entries {
                match surfaces[i].get(&e.target) {
                    None => {
                        surfaces[i].insert(e.target.clone(), pool[i].len());
                        pool[i].push(e);
                        grew = true;
                    }
                    Some(&at) => {
                        // Same surface reached by a better-scoring path.
                        if e.features.dot(&w) > pool[i][at].features.dot(&w) {
                            pool[i][at] = e;
                        }
                    }
                }
            }
        }
        if !grew && !history.is_empty() {
            break;
        }

        let mut directions: Vec<[f64; 7]> = (0..7)
            .map(|k| {
                let mut d = [0.0; 7];
                d[k] = 1.0;
                d
            })
            .collect();
        for _ in 7..config.directions_per_iter {
            let mut d = [0.0; 7];
            for v in &mut d {
                *v = rng.gen_range(-1.0..=1.0);
            }
            directions.push(d);
        }

        let base = pool_bleu(&pool, &refs, &w);
        let mut best: Option<(LogLinearWeights, f64)> = None;
        for d in &directions {
            let (gamma, _) = line_search(&pool, &refs, &w, d)?;
            if gamma == 0.0 {
                continue;
            }
            let stepped = LogLinearWeights::from_array(
                w.as_array()
                    .iter()
                    .zip(d)
                    .map(|(a, b)| a + gamma * b)
                    .collect::<Vec<_>>()
                    .try_into()
                    .expect("seven components"),
            );
            let candidate = normalized(&stepped);
            let actual = pool_bleu(&pool, &refs, &candidate);
            if actual > base + ACCEPT_EPS
                && best.as_ref().map(|(_, b)| actual > *b).unwrap_or(true)
            {
                best = Some((candidate, actual));
            }
        }
        if let Some((candidate, _)) = best {
            w = candidate;
        }
        history.push(pool_bleu(&pool, &refs, &w));
    }
    Ok(MertOutcome { weights: w, dev_bleu_history: history })
}

/// Deterministic development sample: `n` pairs drawn without replacement,
/// returned in corpus order.
pub fn sample_dev(corpus: &ParallelCorpus, n: usize, seed: u64) -> ParallelCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx: Vec<usize> = (0..corpus.len()).collect();
    idx.shuffle(&mut rng);
    idx.truncate(n);
    idx.sort_unstable();
    let pairs = idx
        .into_iter()
        .map(|i| corpus.pairs()[i].clone())
        .collect();
    ParallelCorpus::new(format!("{}-dev", corpus.name), pairs)
}

/// Writes the per-iteration pooled dev BLEU as `iteration,dev_bleu` CSV.
pub fn write_mert_log(path: impl AsRef<Path>, history: &[f64]) -> Result<(), MertError> {
    let path = path.as_ref();
    let mut out = String::from("iteration,dev_bleu\n");
    for (i, b) in history.iter().enumerate() {
        out.push_str(&format!("{i},{b}\n"));
    }
    let mut f = std::fs::File::create(path)
        .map_err(|e| MertError::Io { path: path.display().to_string(), source: e })?;
    f.write_all(out.as_bytes())
        .map_err(|e| MertError::Io { path: path.display().to_string(), source: e })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::align::PhraseTableEntry;
    use crate::decode::FeatureVector;
    use crate::text::{tokenize, Token};

    fn entry(text: &str, features: FeatureVector) -> NBestEntry {
        NBestEntry { target: tokenize(text), features, total: 0.0 }
    }

    fn feat(phrase0: f64, lm: f64) -> FeatureVector {
        FeatureVector { phrase: [phrase0, 0.0, 0.0, 0.0], lm, ..Default::default() }
    }

    #[test]
    fn line_search_hand_envelope() {
        // Along the lm axis from unit-lm weights: h1 scores 1 + 2g, h2
        // scores 2 + 1g. h2 matches the reference, h1 does not. The switch
        // is at g = 1; the best interval is (-inf, 1) and its midpoint
        // convention clamps to 0.
        let w = LogLinearWeights {
            lm: 1.0,
            phrase: [1.0, 0.0, 0.0, 0.0],
            word_penalty: 0.0,
            distortion: 0.0,
        };
        let d = [0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0];
        let pool = vec![vec![entry("bad bad", feat(-1.0, 2.0)), entry("good good", feat(1.0, 1.0))]];
        let refs = vec![tokenize("good good")];
        let (gamma, bleu) = line_search(&pool, &refs, &w, &d).unwrap();
        assert_eq!(gamma, 0.0);
        assert_eq!(bleu, 100.0);

        let intervals = sweep(&pool, &refs, &w, &d).unwrap();
        assert_eq!(intervals.len(), 2);
        assert_eq!(intervals[0].hi, 1.0);
        assert_eq!(intervals[1].lo, 1.0);
        assert_eq!(intervals[0].bleu, 100.0);
        assert_eq!(intervals[1].bleu, 0.0);
    }

    #[test]
    fn line_search_moves_toward_better_interval() {
        // Same pool, but now the matching hypothesis has the steeper slope:
        // it wins for g >= 1, so the search must move right of 1.
        let w = LogLinearWeights {
            lm: 1.0,
            phrase: [1.0, 0.0, 0.0, 0.0],
            word_penalty: 0.0,
            distortion: 0.0,
        };
        let d = [0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0];
        let pool = vec![vec![entry("good good", feat(-1.0, 2.0)), entry("bad bad", feat(1.0, 1.0))]];
        let refs = vec![tokenize("good good")];
        let (gamma, bleu) = line_search(&pool, &refs, &w, &d).unwrap();
        assert_eq!(gamma, 2.0);
        assert_eq!(bleu, 100.0);
    }

    #[test]
    fn line_search_flat_cases_stay_put() {
        let w = LogLinearWeights::default();
        let d = [0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0];
        // Identical surfaces: BLEU constant everywhere.
        let pool = vec![vec![entry("same", feat(0.0, 1.0)), entry("same", feat(0.0, 2.0))]];
        let refs = vec![tokenize("same")];
        let (gamma, _) = line_search(&pool, &refs, &w, &d).unwrap();
        assert_eq!(gamma, 0.0);

        // Direction orthogonal to every feature difference: flat envelope.
        let d2 = [0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0];
        let pool2 = vec![vec![entry("a", feat(1.0, 0.0)), entry("b", feat(0.0, 1.0))]];
        let refs2 = vec![tokenize("a")];
        let (gamma2, _) = line_search(&pool2, &refs2, &w, &d2).unwrap();
        assert_eq!(gamma2, 0.0);
    }

    #[test]
    fn line_search_input_validation() {
        let w = LogLinearWeights::default();
        let refs = vec![tokenize("a")];
        let pool: Vec<Vec<NBestEntry>> = vec![Vec::new()];
        assert!(matches!(
            line_search(&pool, &refs, &w, &[0.0; 7]),
            Err(MertError::ZeroDirection)
        ));
        let d = [1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        assert!(matches!(line_search(&pool, &refs, &w, &d), Err(MertError::EmptyPool)));
        let two_refs = vec![tokenize("a"), tokenize("b")];
        assert!(matches!(
            line_search(&pool, &two_refs, &w, &d),
            Err(MertError::PoolMismatch { .. })
        ));
    }

    #[test]
    fn line_search_selection_invariant_to_direction_scale() {
        let w = LogLinearWeights::default();
        let pool = vec![
            vec![entry("x y", feat(2.0, -1.0)), entry("x z", feat(-1.0, 2.0))],
            vec![entry("p", feat(0.5, 0.3)), entry("q", feat(0.1, 0.9))],
        ];
        let refs = vec![tokenize("x z"), tokenize("q")];
        let d1 = [1.0, 0.0, 0.0, 0.0, 2.0, 0.0, 0.0];
        let d2 = d1.map(|v| v * 3.5);
        let (g1, b1) = line_search(&pool, &refs, &w, &d1).unwrap();
        let (g2, b2) = line_search(&pool, &refs, &w, &d2).unwrap();
        assert_eq!(b1, b2);
        let select = |d: &[f64; 7], g: f64| -> Vec<String> {
            pool.iter()
                .map(|entries| {
                    entries
                        .iter()
                        .max_by(|a, b| {
                            let sa = a.features.dot(&w)
                                + g * a.features.as_array().iter().zip(d).map(|(x, y)| x * y).sum::<f64>();
                            let sb = b.features.dot(&w)
                                + g * b.features.as_array().iter().zip(d).map(|(x, y)| x * y).sum::<f64>();
                            sa.partial_cmp(&sb).unwrap()
                        })
                        .unwrap()
                        .target
                        .detokenize()
                })
                .collect()
        };
        assert_eq!(select(&d1, g1), select(&d2, g2));
    }

    #[test]
    fn sweep_matches_brute_force_sampling() {
        let w = LogLinearWeights::default();
        let d = [0.3, -0.2, 0.0, 0.1, 1.0, -0.4, 0.05];
        let mk = |p: [f64; 4], lm: f64, wp: f64| FeatureVector {
            phrase: p,
            lm,
            word_penalty: wp,
            distortion: 0.0,
        };
        let pool = vec![
            vec![
                entry("the cat sat", mk([0.1, 0.4, -0.2, 0.0], -2.0, 3.0)),
                entry("a cat sat", mk([0.5, -0.1, 0.3, 0.2], -3.0, 3.0)),
                entry("the cat", mk([-0.2, 0.2, 0.1, -0.3], -1.5, 2.0)),
            ],
            vec![
                entry("dogs bark", mk([0.0, 0.1, 0.2, 0.3], -1.0, 2.0)),
                entry("dog barks", mk([0.4, -0.3, 0.1, 0.0], -2.5, 2.0)),
            ],
        ];
        let refs = vec![tokenize("the cat sat"), tokenize("dogs bark")];
        let intervals = sweep(&pool, &refs, &w, &d).unwrap();

        let brute = |gamma: f64| -> f64 {
            let mut total = BleuStats::default();
            for (entries, reference) in pool.iter().zip(&refs) {
                let best = entries
                    .iter()
                    .max_by(|a, b| {
                        let sa = a.features.dot(&w)
                            + gamma * a.features.as_array().iter().zip(&d).map(|(x, y)| x * y).sum::<f64>();
                        let sb = b.features.dot(&w)
                            + gamma * b.features.as_array().iter().zip(&d).map(|(x, y)| x * y).sum::<f64>();
                        sa.partial_cmp(&sb).unwrap()
                    })
                    .unwrap();
                total += BleuStats::between(&best.target, reference);
            }
            total.score()
        };

        let boundaries: Vec<f64> = intervals.iter().skip(1).map(|iv| iv.lo).collect();
        for k in 0..1000 {
            let gamma = -5.0 + 10.0 * k as f64 / 999.0;
            if boundaries.iter().any(|b| (gamma - b).abs() < 1e-6) {
                continue;
            }
            let from_sweep = intervals
                .iter()
                .find(|iv| iv.lo <= gamma && gamma < iv.hi)
                .unwrap()
                .bleu;
            assert_eq!(from_sweep, brute(gamma), "gamma {gamma}");
        }
    }

    /// Two dev sentences pin down the improving move: on "x" only the LM
    /// separates the right answer (its phrase feature is worse), while on
    /// "y" the phrase feature must keep its sign or BLEU drops. Raising
    /// the lm weight is therefore the unique pooled-BLEU improvement.
    fn toy_system() -> (PhraseTable, NGramModel, ParallelCorpus) {
        let mut pt = PhraseTable::new(7);
        for (src, tgt, f1) in [("x", "a", 0.6), ("x", "b", 0.4), ("y", "c", 0.6), ("y", "d", 0.4)] {
            pt.insert(PhraseTableEntry {
                src: vec![Token::new(src).unwrap()],
                tgt: vec![Token::new(tgt).unwrap()],
                features: [f1, 1.0, 1.0, 1.0],
            })
            .unwrap();
        }
        let dir = tempfile::tempdir().unwrap();
        let arpa = dir.path().join("toy.arpa");
        std::fs::write(
            &arpa,
            "\\data\\\nngram 1=7\n\n\\1-grams:\n-3\ta\n-0.2\tb\n-1\tc\n-1\td\n-0.5\t</s>\n-2\t<unk>\n-99\t<s>\n\n\\end\\\n",
        )
        .unwrap();
        let lm = NGramModel::read_arpa(&arpa).unwrap();
        let dev = ParallelCorpus::new(
            "toy",
            vec![(tokenize("x"), tokenize("b")), (tokenize("y"), tokenize("c"))],
        );
        (pt, lm, dev)
    }

    #[test]
    fn mert_raises_lm_weight_when_lm_disambiguates() {
        let (pt, lm, dev) = toy_system();
        // The LM prefers "b" by 2.8 log10; the phrase feature prefers "a"
        // by about 0.18. With a tiny lm weight the decoder starts on "a".
        let init = LogLinearWeights {
            lm: 0.005,
            phrase: [0.2; 4],
            word_penalty: -1.0,
            distortion: 0.3,
        };
        let params = DecoderParams::default();
        let start = crate::decode::decode(&pt, &lm, &init, &tokenize("x"), &params)
            .unwrap()
            .0;
        assert_eq!(start.detokenize(), "a");

        let config = MertConfig { outer_iters: 6, ..Default::default() };
        let out = mert_tune(&dev, &pt, &lm, &init, &params, &config).unwrap();
        let tuned = crate::decode::decode(&pt, &lm, &out.weights, &tokenize("x"), &params)
            .unwrap()
            .0;
        assert_eq!(tuned.detokenize(), "b");
        let init_norm = normalized(&init);
        assert!(out.weights.lm > init_norm.lm);
        assert_eq!(*out.dev_bleu_history.last().unwrap(), 100.0);
    }

    #[test]
    fn mert_history_non_decreasing_and_fixed_point_holds() {
        let (pt, lm, dev) = toy_system();
        // Already-optimal weights: the pool saturates immediately and no
        // move is accepted.
        let init = LogLinearWeights::default();
        let params = DecoderParams::default();
        let config = MertConfig { outer_iters: 5, ..Default::default() };
        let out = mert_tune(&dev, &pt, &lm, &init, &params, &config).unwrap();
        assert!(!out.dev_bleu_history.is_empty());
        for pair in out.dev_bleu_history.windows(2) {
            assert!(pair[1] >= pair[0]);
        }
        assert_eq!(out.dev_bleu_history[0], 100.0);
        assert_eq!(out.weights, normalized(&LogLinearWeights::default()));
    }

    #[test]
    fn mert_weights_stay_normalized_with_non_negative_lm() {
        let (pt, lm, dev) = toy_system();
        let init = LogLinearWeights {
            lm: 0.005,
            phrase: [0.2; 4],
            word_penalty: -1.0,
            distortion: 0.3,
        };
        let out = mert_tune(
            &dev,
            &pt,
            &lm,
            &init,
            &DecoderParams::default(),
            &MertConfig { outer_iters: 4, ..Default::default() },
        )
        .unwrap();
        assert!((out.weights.l1_norm() - 1.0).abs() < 1e-9);
        assert!(out.weights.lm >= 0.0);
    }

    #[test]
    fn sample_dev_is_deterministic_ordered_subset() {
        let pairs: Vec<(Sentence, Sentence)> = (0..20)
            .map(|i| (tokenize(&format!("s{i}")), tokenize(&format!("t{i}"))))
            .collect();
        let corpus = ParallelCorpus::new("c", pairs);
        let a = sample_dev(&corpus, 5, 7);
        let b = sample_dev(&corpus, 5, 7);
        assert_eq!(a.pairs(), b.pairs());
        assert_eq!(a.len(), 5);
        // Order preserved: sampled items appear in original relative order.
        let texts: Vec<String> = a.sources().map(Sentence::detokenize).collect();
        let mut sorted = texts.clone();
        sorted.sort_by_key(|t| t[1..].parse::<usize>().unwrap());
        assert_eq!(texts, sorted);
        // Oversampling returns the whole corpus.
        assert_eq!(sample_dev(&corpus, 100, 7).len(), 20);
        // A different seed picks a different subset on 20 choose 5 odds.
        let c = sample_dev(&corpus, 5, 8);
        assert_ne!(a.pairs(), c.pairs());
    }

    #[test]
    fn mert_log_format() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("mert_log.csv");
        write_mert_log(&path, &[12.5, 30.0, 30.0]).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text, "iteration,dev_bleu\n0,12.5\n1,30\n2,30\n");
    }
}
