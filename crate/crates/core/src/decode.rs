//! Log-linear phrase-based stack decoder.
//!
//! Hypotheses grow left to right over the target while covering arbitrary
//! source spans, organized in stacks by covered-token count with beam
//! pruning and recombination. The language-model weight is an explicit
//! knob: scaling it down degrades output fluency without touching the
//! translation features.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;

use crate::align::PhraseTable;
use crate::lm::{NGramModel, BOS, EOS};
use crate::text::{Sentence, Token};

/// Finite stand-in for log10 of a zero probability.
const LOG_FLOOR: f64 = -99.0;

/// Applied to the first phrase feature of copied-through unknown tokens.
const OOV_LOG_PENALTY: f64 = -4.0;

#[derive(Debug, thiserror::Error)]
pub enum DecodeError {
    #[error("cannot decode an empty source sentence")]
    EmptySource,
    #[error("scale factor must be non-negative, got {0}")]
    NegativeFactor(f64),
    #[error("invalid weights: {0}")]
    InvalidWeights(String),
    #[error("beam size must be at least 1")]
    InvalidBeam,
    #[error("n-best line {line}: {msg}")]
    NBestFormat { line: usize, msg: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {detail}")]
    WeightsFormat { path: String, detail: String },
}

fn io_err(path: &Path, source: std::io::Error) -> DecodeError {
    DecodeError::Io { path: path.display().to_string(), source }
}

// -------------------------------------------------------------- weights --

/// Log-linear model weights. The LM weight stays non-negative so scaling
/// it can only dampen fluency pressure, never invert it.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogLinearWeights {
    pub lm: f64,
    pub phrase: [f64; 4],
    pub word_penalty: f64,
    pub distortion: f64,
}

impl Default for LogLinearWeights {
    fn default() -> Self {
        LogLinearWeights { lm: 0.5, phrase: [0.2; 4], word_penalty: -1.0, distortion: 0.3 }
    }
}

impl LogLinearWeights {
    pub fn validate(&self) -> Result<(), DecodeError> {
        let all = self.as_array();
        if all.iter().any(|v| !v.is_finite()) {
            return Err(DecodeError::InvalidWeights("non-finite weight".into()));
        }
        if self.lm < 0.0 {
            return Err(DecodeError::InvalidWeights(format!("lm weight {} < 0", self.lm)));
        }
        Ok(())
    }

    pub fn as_array(&self) -> [f64; 7] {
        [
            self.phrase[0],
            self.phrase[1],
            self.phrase[2],
            self.phrase[3],
            self.lm,
            self.word_penalty,
            self.distortion,
        ]
    }

    pub fn from_array(a: [f64; 7]) -> LogLinearWeights {
        LogLinearWeights {
            phrase: [a[0], a[1], a[2], a[3]],
            lm: a[4],
            word_penalty: a[5],
            distortion: a[6],
        }
    }

    /// Sum of absolute weight values.
    pub fn l1_norm(&self) -> f64 {
        self.as_array().iter().map(|v| v.abs()).sum()
    }
}

/// Returns a copy with the LM weight multiplied by `factor`.
pub fn scale_lm_weight(
    w: &LogLinearWeights,
    factor: f64,
) -> Result<LogLinearWeights, DecodeError> {
    if !(factor >= 0.0) {
        return Err(DecodeError::NegativeFactor(factor));
    }
    let mut out = w.clone();
    out.lm *= factor;
    Ok(out)
}

pub fn write_weights(path: impl AsRef<Path>, w: &LogLinearWeights) -> Result<(), DecodeError> {
    let path = path.as_ref();
    w.validate()?;
    let json = serde_json::to_string_pretty(w).expect("weights serialize");
    std::fs::write(path, json + "\n").map_err(|e| io_err(path, e))
}

pub fn read_weights(path: impl AsRef<Path>) -> Result<LogLinearWeights, DecodeError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let w: LogLinearWeights = serde_json::from_str(&text).map_err(|e| {
        DecodeError::WeightsFormat { path: path.display().to_string(), detail: e.to_string() }
    })?;
    w.validate()?;
    Ok(w)
}

// ------------------------------------------------------------- features --

/// Per-hypothesis feature totals. Phrase and LM components are log10
/// values; `word_penalty` counts target tokens; `distortion` accumulates
/// negative absolute jump distances.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FeatureVector {
    pub phrase: [f64; 4],
    pub lm: f64,
    pub word_penalty: f64,
    pub distortion: f64,
}

impl FeatureVector {
    pub fn as_array(&self) -> [f64; 7] {
        [
            self.phrase[0],
            self.phrase[1],
            self.phrase[2],
            self.phrase[3],
            self.lm,
            self.word_penalty,
            self.distortion,
        ]
    }

    pub fn dot(&self, w: &LogLinearWeights) -> f64 {
        self.as_array()
            .iter()
            .zip(w.as_array())
            .map(|(f, l)| f * l)
            .sum()
    }
}

impl std::ops::AddAssign for FeatureVector {
    fn add_assign(&mut self, rhs: FeatureVector) {
        for k in 0..4 {
            self.phrase[k] += rhs.phrase[k];
        }
        self.lm += rhs.lm;
        self.word_penalty += rhs.word_penalty;
        self.distortion += rhs.distortion;
    }
}

// --------------------------------------------------------------- n-best --

#[derive(Debug, Clone, PartialEq)]
pub struct NBestEntry {
    pub target: Sentence,
    pub features: FeatureVector,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NBestList {
    pub sentence_id: usize,
    pub entries: Vec<NBestEntry>,
}

/// One hypothesis per line: `id ||| tokens ||| 7 features ||| total`.
pub fn write_nbest(path: impl AsRef<Path>, lists: &[NBestList]) -> Result<(), DecodeError> {
    let path = path.as_ref();
    let f = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(f);
    for list in lists {
        for e in &list.entries {
            let feats = e
                .features
                .as_array()
                .iter()
                .map(f64::to_string)
                .collect::<Vec<_>>()
                .join(" ");
            writeln!(
                w,
                "{} ||| {} ||| {} ||| {}",
                list.sentence_id,
                e.target.detokenize(),
                feats,
                e.total
            )
            .map_err(|e| io_err(path, e))?;
        }
    }
    Ok(())
}

pub fn read_nbest(path: impl AsRef<Path>) -> Result<Vec<NBestList>, DecodeError> {
    let path = path.as_ref();
    let f = File::open(path).map_err(|e| io_err(path, e))?;
    let mut lists: Vec<NBestList> = Vec::new();
    for (idx, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| io_err(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let err = |msg: String| DecodeError::NBestFormat { line: idx + 1, msg };
        let fields: Vec<&str> = line.split(" ||| ").collect();
        if fields.len() != 4 {
            return Err(err(format!("expected 4 fields, got {}", fields.len())));
        }
        let id: usize = fields[0].trim().parse().map_err(|_| err("bad sentence id".into()))?;
        let target = crate::text::tokenize(fields[1]);
        let nums: Vec<f64> = fields[2]
            .split_whitespace()
            .map(|v| v.parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| err("bad feature value".into()))?;
        if nums.len() != 7 {
            return Err(err(format!("expected 7 features, got {}", nums.len())));
        }
        let features = FeatureVector {
            phrase: [nums[0], nums[1], nums[2], nums[3]],
            lm: nums[4],
            word_penalty: nums[5],
            distortion: nums[6],
        };
        let total: f64 = fields[3].trim().parse().map_err(|_| err("bad total".into()))?;
        if lists.last().map(|l| l.sentence_id) != Some(id) {
            lists.push(NBestList { sentence_id: id, entries: Vec::new() });
        }
        lists
            .last_mut()
            .expect("list pushed above")
            .entries
            .push(NBestEntry { target, features, total });
    }
    Ok(lists)
}

// -------------------------------------------------------------- decoder --

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct DecoderParams {
    pub beam_size: usize,
    pub distortion_limit: usize,
}

impl Default for DecoderParams {
    fn default() -> Self {
        DecoderParams { beam_size: 4, distortion_limit: 6 }
    }
}

#[derive(Clone, PartialEq, Eq, Hash)]
struct Coverage {
    bits: Vec<u64>,
    len: usize,
}

impl Coverage {
    fn empty(len: usize) -> Coverage {
        Coverage { bits: vec![0; len.div_ceil(64)], len }
    }

    fn test(&self, i: usize) -> bool {
        self.bits[i / 64] >> (i % 64) & 1 == 1
    }

    fn set_range(&mut self, start: usize, end: usize) {
        for i in start..end {
            self.bits[i / 64] |= 1 << (i % 64);
        }
    }

    fn free(&self, start: usize, end: usize) -> bool {
        (start..end).all(|i| !self.test(i))
    }

    fn count(&self) -> usize {
        self.bits.iter().map(|w| w.count_ones() as usize).sum()
    }

    fn first_gap(&self) -> usize {
        (0..self.len).find(|&i| !self.test(i)).unwrap_or(self.len)
    }
}

struct Node {
    parent: usize,
    tgt: Vec<Token>,
}

struct Hyp {
    node: usize,
    coverage: Coverage,
    lm_ctx: Vec<String>,
    last_end: isize,
    features: FeatureVector,
    score: f64,
}

fn safe_log10(p: f64) -> f64 {
    if p > 0.0 {
        p.log10()
    } else {
        LOG_FLOOR
    }
}

struct SpanOption {
    start: usize,
    end: usize,
    tgt: Vec<Token>,
    phrase_log: [f64; 4],
}

/// All applicable translation options, plus penalized copy-through entries
/// for tokens with no covering table span (every token when `force_copy`,
/// the fallback that guarantees a complete hypothesis exists).
fn collect_options(pt: &PhraseTable, src: &[Token], force_copy: bool) -> Vec<SpanOption> {
    let n = src.len();
    let mut opts = Vec::new();
    let mut covered = vec![false; n];
    for start in 0..n {
        for end in start + 1..=n.min(start + pt.max_phrase_len.max(1)) {
            let entries = pt.options(&src[start..end]);
            if !entries.is_empty() {
                for i in start..end {
                    covered[i] = true;
                }
            }
            for e in entries {
                opts.push(SpanOption {
                    start,
                    end,
                    tgt: e.tgt.clone(),
                    phrase_log: e.features.map(safe_log10),
                });
            }
        }
    }
    for (i, token) in src.iter().enumerate() {
        if force_copy || !covered[i] {
            opts.push(SpanOption {
                start: i,
                end: i + 1,
                tgt: vec![token.clone()],
                phrase_log: [OOV_LOG_PENALTY, 0.0, 0.0, 0.0],
            });
        }
    }
    opts
}

fn surface(arena: &[Node], mut node: usize) -> Vec<Token> {
    let mut chunks: Vec<&[Token]> = Vec::new();
    while node != usize::MAX {
        chunks.push(&arena[node].tgt);
        node = arena[node].parent;
    }
    chunks.reverse();
    chunks.into_iter().flatten().cloned().collect()
}

/// `n` best complete hypotheses, distinct by target surface. The working
/// beam is widened to at least `n` so alternatives survive pruning.
pub fn nbest(
    pt: &PhraseTable,
    lm: &NGramModel,
    w: &LogLinearWeights,
    src: &Sentence,
    n: usize,
    params: &DecoderParams,
) -> Result<NBestList, DecodeError> {
    nbest_id(pt, lm, w, src, n, params, 0)
}

pub fn nbest_id(
    pt: &PhraseTable,
    lm: &NGramModel,
    w: &LogLinearWeights,
    src: &Sentence,
    n: usize,
    params: &DecoderParams,
    sentence_id: usize,
) -> Result<NBestList, DecodeError> {
    if src.is_empty() {
        return Err(DecodeError::EmptySource);
    }
    if params.beam_size == 0 || n == 0 {
        return Err(DecodeError::InvalidBeam);
    }
    w.validate()?;
    let beam = params.beam_size.max(n);
    let entries = search(pt, lm, w, src, beam, params, false);
    // Mutually overlapping multi-token spans can strand a position with no
    // legal option; redo with per-token copies so decoding always finishes.
    let entries = if entries.is_empty() {
        search(pt, lm, w, src, beam, params, true)
    } else {
        entries
    };
    let mut out = entries;
    out.truncate(n);
    Ok(NBestList { sentence_id, entries: out })
}

fn search(
    pt: &PhraseTable,
    lm: &NGramModel,
    w: &LogLinearWeights,
    src: &Sentence,
    beam: usize,
    params: &DecoderParams,
    force_copy: bool,
) -> Vec<NBestEntry> {
    let src_toks = src.tokens();
    let len = src_toks.len();
    let opts = collect_options(pt, src_toks, force_copy);
    let ctx_width = lm.order().saturating_sub(1);

    let mut arena: Vec<Node> = Vec::new();
    let root = Hyp {
        node: usize::MAX,
        coverage: Coverage::empty(len),
        lm_ctx: trim_ctx(vec![BOS.to_string()], ctx_width),
        last_end: -1,
        features: FeatureVector::default(),
        score: 0.0,
    };

    // stacks[k] holds hypotheses covering k source tokens.
    let mut stacks: Vec<Vec<Hyp>> = (0..=len).map(|_| Vec::new()).collect();
    stacks[0].push(root);

    for k in 0..len {
        // Recombine, then beam-prune the stack before expanding it.
        let stack = std::mem::take(&mut stacks[k]);
        let stack = prune(stack, &arena, beam);
        for hyp in &stack {
            for opt in &opts {
                if !hyp.coverage.free(opt.start, opt.end) {
                    continue;
                }
                let jump = (opt.start as isize - 1 - hyp.last_end).unsigned_abs();
                if jump > params.distortion_limit && opt.start != hyp.coverage.first_gap() {
                    continue;
                }
                let mut features = hyp.features;
                for (f, d) in features.phrase.iter_mut().zip(opt.phrase_log) {
                    *f += d;
                }
                features.word_penalty += opt.tgt.len() as f64;
                features.distortion -= jump as f64;
                let mut ctx = hyp.lm_ctx.clone();
                for t in &opt.tgt {
                    let refs: Vec<&str> = ctx.iter().map(String::as_str).collect();
                    features.lm += lm.cond_logprob(&refs, t.as_str());
                    ctx.push(t.as_str().to_string());
                    ctx = trim_ctx(ctx, ctx_width);
                }
                let mut coverage = hyp.coverage.clone();
                coverage.set_range(opt.start, opt.end);
                if coverage.count() == len {
                    let refs: Vec<&str> = ctx.iter().map(String::as_str).collect();
                    features.lm += lm.cond_logprob(&refs, EOS);
                }
                arena.push(Node { parent: hyp.node, tgt: opt.tgt.clone() });
                let score = features.dot(w);
                stacks[k + (opt.end - opt.start)].push(Hyp {
                    node: arena.len() - 1,
                    coverage,
                    lm_ctx: ctx,
                    last_end: opt.end as isize - 1,
                    features,
                    score,
                });
            }
        }
    }

    let mut finals: Vec<(Vec<Token>, FeatureVector, f64)> = std::mem::take(&mut stacks[len])
        .into_iter()
        .map(|h| (surface(&arena, h.node), h.features, h.score))
        .collect();
    finals.sort_by(|a, b| {
        b.2.partial_cmp(&a.2)
            .expect("finite scores")
            .then_with(|| a.0.cmp(&b.0))
    });
    let mut seen: HashMap<Vec<Token>, ()> = HashMap::new();
    let mut entries = Vec::new();
    for (toks, features, total) in finals {
        if seen.insert(toks.clone(), ()).is_none() {
            entries.push(NBestEntry { target: Sentence::new(toks), features, total });
        }
    }
    entries
}

fn trim_ctx(mut ctx: Vec<String>, width: usize) -> Vec<String> {
    if ctx.len() > width {
        ctx.drain(..ctx.len() - width);
    }
    ctx
}

/// Recombination plus histogram pruning: one survivor per
/// (coverage, lm context, last source position) signature, then the best
/// `beam` by score. Ties prefer the lexicographically smaller surface.
fn prune(stack: Vec<Hyp>, arena: &[Node], beam: usize) -> Vec<Hyp> {
    let mut best: HashMap<(Vec<u64>, Vec<String>, isize), Hyp> = HashMap::new();
    for h in stack {
        let key = (h.coverage.bits.clone(), h.lm_ctx.clone(), h.last_end);
        match best.entry(key) {
            std::collections::hash_map::Entry::Vacant(v) => {
                v.insert(h);
            }
            std::collections::hash_map::Entry::Occupied(mut o) => {
                let cur = o.get();
                let replace = h.score > cur.score
                    || (h.score == cur.score && surface(arena, h.node) < surface(arena, cur.node));
                if replace {
                    o.insert(h);
                }
            }
        }
    }
    let mut kept: Vec<Hyp> = best.into_values().collect();
    kept.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .expect("finite scores")
            .then_with(|| surface(arena, a.node).cmp(&surface(arena, b.node)))
    });
    kept.truncate(beam);
    kept
}

/// Single best translation with its feature totals.
pub fn decode(
    pt: &PhraseTable,
    lm: &NGramModel,
    w: &LogLinearWeights,
    src: &Sentence,
    params: &DecoderParams,
) -> Result<(Sentence, FeatureVector), DecodeError> {
    let list = nbest(pt, lm, w, src, 1, params)?;
    let e = list.entries.into_iter().next().expect("beam >= 1 yields a hypothesis");
    Ok((e.target, e.features))
}

// ---------------------------------------------------------- full system --

/// A trained phrase-based translator: models plus tuned weights.
pub struct SmtSystem {
    pub phrase_table: PhraseTable,
    pub lm: NGramModel,
    pub weights: LogLinearWeights,
    pub params: DecoderParams,
}

impl SmtSystem {
    pub fn translate(&self, src: &Sentence) -> Result<(Sentence, FeatureVector), DecodeError> {
        decode(&self.phrase_table, &self.lm, &self.weights, src, &self.params)
    }

    /// Translates sentences independently in parallel, preserving order.
    pub fn translate_batch(&self, srcs: &[Sentence]) -> Result<Vec<Sentence>, DecodeError> {
        srcs.par_iter()
            .map(|s| self.translate(s).map(|(t, _)| t))
            .collect()
    }

    pub fn nbest(&self, src: &Sentence, n: usize, id: usize) -> Result<NBestList, DecodeError> {
        nbest_id(&self.phrase_table, &self.lm, &self.weights, src, n, &self.params, id)
    }
}
