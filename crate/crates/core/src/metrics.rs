//! Corpus BLEU, span-edit extraction with rule-based error typing,
//! F-beta scoring over edit sets, error-profile statistics, and the M2
//! text format.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;
use std::sync::OnceLock;

use crate::text::{Sentence, Token};

#[derive(Debug, thiserror::Error)]
pub enum MetricsError {
    #[error("reference and hypothesis counts differ: {refs} vs {hyps}")]
    LengthMismatch { refs: usize, hyps: usize },
    #[error("input is empty")]
    EmptyInput,
    #[error("beta must be positive, got {0}")]
    InvalidBeta(f64),
    #[error("M2 parse error at line {line}: {msg}")]
    M2Format { line: usize, msg: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn io_err(path: &Path, source: std::io::Error) -> MetricsError {
    MetricsError::Io { path: path.display().to_string(), source }
}

// ---------------------------------------------------------------- BLEU --

/// Sufficient statistics for corpus BLEU-4. Additive: statistics of a
/// concatenated corpus are the sums of the parts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BleuStats {
    pub clipped: [u64; 4],
    pub hyp_ngrams: [u64; 4],
    pub hyp_len: u64,
    pub ref_len: u64,
}

impl BleuStats {
    /// Statistics of one hypothesis against one reference.
    pub fn between(hyp: &Sentence, reference: &Sentence) -> BleuStats {
        let mut s = BleuStats { hyp_len: hyp.len() as u64, ref_len: reference.len() as u64, ..Default::default() };
        for n in 1..=4usize {
            if hyp.len() < n {
                break;
            }
            let mut ref_counts: HashMap<&[Token], u64> = HashMap::new();
            for g in reference.tokens().windows(n) {
                *ref_counts.entry(g).or_insert(0) += 1;
            }
            let mut hyp_counts: HashMap<&[Token], u64> = HashMap::new();
            for g in hyp.tokens().windows(n) {
                *hyp_counts.entry(g).or_insert(0) += 1;
            }
            s.hyp_ngrams[n - 1] = (hyp.len() + 1 - n) as u64;
            s.clipped[n - 1] = hyp_counts
                .iter()
                .map(|(g, &c)| c.min(ref_counts.get(g).copied().unwrap_or(0)))
                .sum();
        }
        s
    }

    /// Clipped modified precisions; an order with no hypothesis n-grams
    /// reports 1.0 (no evidence either way).
    pub fn precisions(&self) -> [f64; 4] {
        let mut p = [1.0f64; 4];
        for n in 0..4 {
            if self.hyp_ngrams[n] > 0 {
                p[n] = self.clipped[n] as f64 / self.hyp_ngrams[n] as f64;
            }
        }
        p
    }

    /// Corpus BLEU in [0, 100]: geometric mean of the four clipped
    /// precisions times the brevity penalty, no smoothing. Any order with
    /// hypothesis n-grams but zero matches yields 0.
    pub fn score(&self) -> f64 {
        if self.hyp_len == 0 {
            return 0.0;
        }
        let mut log_sum = 0.0;
        for n in 0..4 {
            if self.hyp_ngrams[n] == 0 {
                continue;
            }
            if self.clipped[n] == 0 {
                return 0.0;
            }
            log_sum += 0.25 * (self.clipped[n] as f64 / self.hyp_ngrams[n] as f64).ln();
        }
        let c = self.hyp_len as f64;
        let r = self.ref_len as f64;
        let bp = if c < r { (1.0 - r / c).exp() } else { 1.0 };
        100.0 * bp * log_sum.exp()
    }
}

impl std::ops::Add for BleuStats {
    type Output = BleuStats;
    fn add(self, rhs: BleuStats) -> BleuStats {
        let mut out = self;
        out += rhs;
        out
    }
}

impl std::ops::AddAssign for BleuStats {
    fn add_assign(&mut self, rhs: BleuStats) {
        for n in 0..4 {
            self.clipped[n] += rhs.clipped[n];
            self.hyp_ngrams[n] += rhs.hyp_ngrams[n];
        }
        self.hyp_len += rhs.hyp_len;
        self.ref_len += rhs.ref_len;
    }
}

/// Corpus BLEU-4 of aligned hypothesis/reference lists.
pub fn bleu(refs: &[Sentence], hyps: &[Sentence]) -> Result<f64, MetricsError> {
    if refs.len() != hyps.len() {
        return Err(MetricsError::LengthMismatch { refs: refs.len(), hyps: hyps.len() });
    }
    if refs.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let mut total = BleuStats::default();
    for (r, h) in refs.iter().zip(hyps) {
        total += BleuStats::between(h, r);
    }
    Ok(total.score())
}

// --------------------------------------------------------------- edits --

/// Categories assigned to extracted edits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ErrorType {
    VerbForm,
    NounNum,
    Det,
    Prep,
    Orth,
    WordOrder,
    Missing,
    Unnecessary,
    Other,
}

impl ErrorType {
    pub const ALL: [ErrorType; 9] = [
        ErrorType::VerbForm,
        ErrorType::NounNum,
        ErrorType::Det,
        ErrorType::Prep,
        ErrorType::Orth,
        ErrorType::WordOrder,
        ErrorType::Missing,
        ErrorType::Unnecessary,
        ErrorType::Other,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ErrorType::VerbForm => "VERB_FORM",
            ErrorType::NounNum => "NOUN_NUM",
            ErrorType::Det => "DET",
            ErrorType::Prep => "PREP",
            ErrorType::Orth => "ORTH",
            ErrorType::WordOrder => "WORD_ORDER",
            ErrorType::Missing => "MISSING",
            ErrorType::Unnecessary => "UNNECESSARY",
            ErrorType::Other => "OTHER",
        }
    }
}

impl fmt::Display for ErrorType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ErrorType {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ErrorType::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| format!("unknown error type {s:?}"))
    }
}

/// One span edit: replace source[start..end] with `replacement`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Edit {
    pub start: usize,
    pub end: usize,
    pub replacement: Vec<Token>,
    pub etype: ErrorType,
}

impl Edit {
    /// Span and replacement, the identity used for F-beta matching.
    pub fn signature(&self) -> (usize, usize, &[Token]) {
        (self.start, self.end, &self.replacement)
    }
}

/// The ordered, non-overlapping edits that turn `source` into the target
/// sentence they were extracted from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EditScript {
    pub source: Sentence,
    pub edits: Vec<Edit>,
}

impl EditScript {
    /// Applies the edits left to right.
    pub fn apply(&self) -> Sentence {
        let src = self.source.tokens();
        let mut out: Vec<Token> = Vec::with_capacity(src.len());
        let mut cursor = 0usize;
        for e in &self.edits {
            out.extend_from_slice(&src[cursor..e.start]);
            out.extend_from_slice(&e.replacement);
            cursor = e.end;
        }
        out.extend_from_slice(&src[cursor..]);
        Sentence::new(out)
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Op {
    Match,
    Sub,
    Del,
    Ins,
}

/// Levenshtein-aligns source to target (match 0, sub/ins/del 1; traceback
/// ties prefer match, then substitution, deletion, insertion) and merges
/// adjacent non-match operations into typed span edits.
pub fn extract_edits(source: &Sentence, target: &Sentence) -> EditScript {
    let s = source.tokens();
    let t = target.tokens();
    let (n, m) = (s.len(), t.len());
    let mut d = vec![vec![0usize; m + 1]; n + 1];
    for i in 0..=n {
        d[i][0] = i;
    }
    for (j, cell) in d[0].iter_mut().enumerate() {
        *cell = j;
    }
    for i in 1..=n {
        for j in 1..=m {
            let sub = d[i - 1][j - 1] + usize::from(s[i - 1] != t[j - 1]);
            d[i][j] = sub.min(d[i - 1][j] + 1).min(d[i][j - 1] + 1);
        }
    }

    let mut ops: Vec<Op> = Vec::new();
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        let cur = d[i][j];
        if i > 0 && j > 0 && s[i - 1] == t[j - 1] && d[i - 1][j - 1] == cur {
            ops.push(Op::Match);
            i -= 1;
            j -= 1;
        } else if i > 0 && j > 0 && s[i - 1] != t[j - 1] && d[i - 1][j - 1] + 1 == cur {
            ops.push(Op::Sub);
            i -= 1;
            j -= 1;
        } else if i > 0 && d[i - 1][j] + 1 == cur {
            ops.push(Op::Del);
            i -= 1;
        } else {
            ops.push(Op::Ins);
            j -= 1;
        }
    }
    ops.reverse();

    let mut edits = Vec::new();
    let (mut si, mut ti) = (0usize, 0usize);
    let mut run: Option<(usize, usize, Vec<Token>)> = None;
    for op in ops {
        match op {
            Op::Match => {
                if let Some((start, end, repl)) = run.take() {
                    edits.push((start, end, repl));
                }
                si += 1;
                ti += 1;
            }
            Op::Sub => {
                let r = run.get_or_insert((si, si, Vec::new()));
                r.1 = si + 1;
                r.2.push(t[ti].clone());
                si += 1;
                ti += 1;
            }
            Op::Del => {
                let r = run.get_or_insert((si, si, Vec::new()));
                r.1 = si + 1;
                si += 1;
            }
            Op::Ins => {
                let r = run.get_or_insert((si, si, Vec::new()));
                r.2.push(t[ti].clone());
                ti += 1;
            }
        }
    }
    if let Some((start, end, repl)) = run.take() {
        edits.push((start, end, repl));
    }

    let edits = edits
        .into_iter()
        .map(|(start, end, replacement)| {
            let etype = classify_span(&s[start..end], &replacement);
            Edit { start, end, replacement, etype }
        })
        .collect();
    EditScript { source: source.clone(), edits }
}

/// Assigns the edit's category; used by [`extract_edits`] and exposed for
/// re-typing parsed edits.
pub fn classify_edit(edit: &Edit, source: &Sentence) -> ErrorType {
    classify_span(&source.tokens()[edit.start..edit.end], &edit.replacement)
}

static DETERMINERS: OnceLock<HashSet<&'static str>> = OnceLock::new();
static PREPOSITIONS: OnceLock<HashSet<&'static str>> = OnceLock::new();
static VERBS: OnceLock<HashSet<&'static str>> = OnceLock::new();

fn determiners() -> &'static HashSet<&'static str> {
    DETERMINERS.get_or_init(|| include_str!("../data/determiners.txt").lines().collect())
}

fn prepositions() -> &'static HashSet<&'static str> {
    PREPOSITIONS.get_or_init(|| include_str!("../data/prepositions.txt").lines().collect())
}

fn verbs() -> &'static HashSet<&'static str> {
    VERBS.get_or_init(|| include_str!("../data/verbs.txt").lines().collect())
}

fn is_punct_token(t: &Token) -> bool {
    t.as_str().chars().all(|c| c.is_ascii_punctuation())
}

/// Whether the token is in the closed determiner list (case-insensitive).
pub(crate) fn is_determiner(t: &Token) -> bool {
    determiners().contains(t.as_str().to_lowercase().as_str())
}

fn classify_span(span: &[Token], repl: &[Token]) -> ErrorType {
    if span.is_empty() {
        return ErrorType::Missing;
    }
    if repl.is_empty() {
        return ErrorType::Unnecessary;
    }
    let norm = |toks: &[Token]| -> Vec<String> {
        toks.iter()
            .filter(|t| !is_punct_token(t))
            .map(|t| t.as_str().to_lowercase())
            .collect()
    };
    if norm(span) == norm(repl) {
        return ErrorType::Orth;
    }
    if span.len() == 1 && repl.len() == 1 {
        let a = span[0].as_str().to_lowercase();
        let b = repl[0].as_str().to_lowercase();
        if verb_form_related(&a, &b) {
            return ErrorType::VerbForm;
        }
        if number_related(&a, &b) {
            return ErrorType::NounNum;
        }
    }
    let all_in = |toks: &[Token], list: &HashSet<&str>| {
        toks.iter().all(|t| list.contains(t.as_str().to_lowercase().as_str()))
    };
    if all_in(span, determiners()) && all_in(repl, determiners()) {
        return ErrorType::Det;
    }
    if all_in(span, prepositions()) && all_in(repl, prepositions()) {
        return ErrorType::Prep;
    }
    let mut a: Vec<&Token> = span.iter().collect();
    let mut b: Vec<&Token> = repl.iter().collect();
    a.sort();
    b.sort();
    if a == b {
        return ErrorType::WordOrder;
    }
    ErrorType::Other
}

/// Stems reachable by stripping one of ing/ed/en, with final-consonant
/// de-doubling and silent-e restoration variants.
fn strong_stems(w: &str) -> HashSet<String> {
    let mut out = HashSet::new();
    for suf in ["ing", "ed", "en"] {
        if w.len() > suf.len() + 1 {
            if let Some(base) = w.strip_suffix(suf) {
                out.insert(base.to_string());
                out.insert(format!("{base}e"));
                let chars: Vec<char> = base.chars().collect();
                if chars.len() >= 2 && chars[chars.len() - 1] == chars[chars.len() - 2] {
                    out.insert(chars[..chars.len() - 1].iter().collect());
                }
            }
        }
    }
    out
}

/// True when one side is an s/es/ies inflection of the other.
fn number_related(a: &str, b: &str) -> bool {
    let rel = |long: &str, short: &str| {
        long == format!("{short}s")
            || long == format!("{short}es")
            || (long.ends_with("ies")
                && short.ends_with('y')
                && long[..long.len() - 3] == short[..short.len() - 1])
    };
    a != b && (rel(a, b) || rel(b, a))
}

/// ing/ed/en inflections always count as verb forms; s/es pairs only when
/// the base is in the closed verb list (otherwise they read as number).
fn verb_form_related(a: &str, b: &str) -> bool {
    if a == b || !a.chars().all(char::is_alphabetic) || !b.chars().all(char::is_alphabetic) {
        return false;
    }
    let sa = strong_stems(a);
    let sb = strong_stems(b);
    if sa.contains(b) || sb.contains(a) || sa.intersection(&sb).next().is_some() {
        return true;
    }
    if number_related(a, b) {
        let base = if a.len() < b.len() { a } else { b };
        return verbs().contains(base);
    }
    false
}

// -------------------------------------------------------------- F-beta --

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrecisionRecall {
    pub precision: f64,
    pub recall: f64,
    pub f: f64,
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
}

/// Edit-level F-beta: system edits count as true positives when a gold
/// edit with the same span and replacement exists (type ignored).
/// Conventions: P and R are 1.0 on 0/0; F is 0.0 on 0/0.
pub fn f_beta(
    system: &[EditScript],
    gold: &[EditScript],
    beta: f64,
) -> Result<PrecisionRecall, MetricsError> {
    if system.len() != gold.len() {
        return Err(MetricsError::LengthMismatch { refs: gold.len(), hyps: system.len() });
    }
    if !(beta > 0.0) {
        return Err(MetricsError::InvalidBeta(beta));
    }
    let (mut tp, mut fp, mut fn_) = (0u64, 0u64, 0u64);
    for (sys, gld) in system.iter().zip(gold) {
        let mut unmatched: Vec<&Edit> = gld.edits.iter().collect();
        for e in &sys.edits {
            if let Some(pos) = unmatched.iter().position(|g| g.signature() == e.signature()) {
                unmatched.swap_remove(pos);
                tp += 1;
            } else {
                fp += 1;
            }
        }
        fn_ += unmatched.len() as u64;
    }
    let precision = if tp + fp == 0 { 1.0 } else { tp as f64 / (tp + fp) as f64 };
    let recall = if tp + fn_ == 0 { 1.0 } else { tp as f64 / (tp + fn_) as f64 };
    let b2 = beta * beta;
    let denom = b2 * precision + recall;
    let f = if denom == 0.0 { 0.0 } else { (1.0 + b2) * precision * recall / denom };
    Ok(PrecisionRecall { precision, recall, f, tp, fp, fn_ })
}

// ------------------------------------------------------- error profile --

/// Aggregate error profile of a pair corpus.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ErrorStats {
    /// Percent of poor-side tokens covered by edit spans.
    pub error_rate: f64,
    /// Percent of edits classified as something other than OTHER
    /// (100.0 when there are no edits at all).
    pub pct_in_rules: f64,
    pub per_type: BTreeMap<String, u64>,
}

/// Computes the error profile over (poor, good) pairs.
pub fn error_stats<'a>(
    pairs: impl IntoIterator<Item = (&'a Sentence, &'a Sentence)>,
) -> Result<ErrorStats, MetricsError> {
    let mut total_tokens = 0u64;
    let mut edited_tokens = 0u64;
    let mut total_edits = 0u64;
    let mut typed_edits = 0u64;
    let mut per_type: BTreeMap<String, u64> = BTreeMap::new();
    let mut any = false;
    for (poor, good) in pairs {
        any = true;
        total_tokens += poor.len() as u64;
        let script = extract_edits(poor, good);
        for e in &script.edits {
            total_edits += 1;
            edited_tokens += (e.end - e.start) as u64;
            if e.etype != ErrorType::Other {
                typed_edits += 1;
            }
            *per_type.entry(e.etype.name().to_string()).or_insert(0) += 1;
        }
    }
    if !any {
        return Err(MetricsError::EmptyInput);
    }
    let error_rate = if total_tokens == 0 {
        0.0
    } else {
        100.0 * edited_tokens as f64 / total_tokens as f64
    };
    let pct_in_rules = if total_edits == 0 {
        100.0
    } else {
        100.0 * typed_edits as f64 / total_edits as f64
    };
    Ok(ErrorStats { error_rate, pct_in_rules, per_type })
}

// ------------------------------------------------------------ M2 format --

/// Writes edit scripts in M2 form: an `S` line with the source tokens,
/// one `A` line per edit, and a blank line after each sentence.
pub fn write_m2<'a>(
    path: impl AsRef<Path>,
    scripts: impl IntoIterator<Item = &'a EditScript>,
) -> Result<(), MetricsError> {
    let path = path.as_ref();
    let f = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(f);
    for script in scripts {
        write_m2_entry(&mut w, script).map_err(|e| io_err(path, e))?;
    }
    Ok(())
}

pub(crate) fn write_m2_entry(w: &mut impl Write, script: &EditScript) -> std::io::Result<()> {
    writeln!(w, "S {}", script.source.detokenize())?;
    for e in &script.edits {
        let correction = e
            .replacement
            .iter()
            .map(Token::as_str)
            .collect::<Vec<_>>()
            .join(" ");
        writeln!(
            w,
            "A {} {}|||{}|||{}|||REQUIRED|||-NONE-|||0",
            e.start, e.end, e.etype, correction
        )?;
    }
    writeln!(w)
}

/// Parses a file produced by [`write_m2`].
pub fn read_m2(path: impl AsRef<Path>) -> Result<Vec<EditScript>, MetricsError> {
    let path = path.as_ref();
    let f = File::open(path).map_err(|e| io_err(path, e))?;
    let mut scripts = Vec::new();
    let mut current: Option<EditScript> = None;
    for (idx, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| io_err(path, e))?;
        let err = |msg: String| MetricsError::M2Format { line: idx + 1, msg };
        if line.is_empty() {
            if let Some(s) = current.take() {
                scripts.push(s);
            }
            continue;
        }
        if let Some(rest) = line.strip_prefix("S ") {
            if current.is_some() {
                return Err(err("sentence without terminating blank line".into()));
            }
            current = Some(EditScript { source: crate::text::tokenize(rest), edits: Vec::new() });
        } else if let Some(rest) = line.strip_prefix("A ") {
            let script = current
                .as_mut()
                .ok_or_else(|| err("edit before any S line".into()))?;
            let fields: Vec<&str> = rest.split("|||").collect();
            if fields.len() != 6 {
                return Err(err(format!("expected 6 fields, got {}", fields.len())));
            }
            let mut span = fields[0].split(' ');
            let start: usize = span
                .next()
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| err("bad span start".into()))?;
            let end: usize = span
                .next()
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| err("bad span end".into()))?;
            let etype = fields[1].parse::<ErrorType>().map_err(err)?;
            let replacement = fields[2]
                .split(' ')
                .filter(|w| !w.is_empty())
                .map(|w| Token::new(w).map_err(|e| err(e.to_string())))
                .collect::<Result<Vec<_>, _>>()?;
            script.edits.push(Edit { start, end, replacement, etype });
        } else {
            return Err(err(format!("unrecognized line {line:?}")));
        }
    }
    if let Some(s) = current.take() {
        scripts.push(s);
    }
    Ok(scripts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::tokenize;

    fn sents(lines: &[&str]) -> Vec<Sentence> {
        lines.iter().map(|l| tokenize(l)).collect()
    }

    #[test]
    fn bleu_identity_is_exactly_100() {
        let refs = sents(&["the cat sat on the mat", "a dog"]);
        assert_eq!(bleu(&refs, &refs).unwrap(), 100.0);
    }

    #[test]
    fn bleu_clipping_hand_case() {
        let s = BleuStats::between(&tokenize("the the the"), &tokenize("the cat"));
        assert_eq!(s.clipped[0], 1);
        assert_eq!(s.hyp_ngrams[0], 3);
        let p1 = s.precisions()[0];
        assert!((p1 - 1.0 / 3.0).abs() < 1e-15);
        // Bigram "the the" never occurs in the reference.
        assert_eq!(s.score(), 0.0);
    }

    #[test]
    fn bleu_stats_are_additive() {
        let refs = sents(&["the cat sat on the mat", "dogs bark at the moon loudly"]);
        let hyps = sents(&["the cat sat on a mat", "dogs bark at a moon loudly"]);
        let summed: BleuStats = refs
            .iter()
            .zip(&hyps)
            .map(|(r, h)| BleuStats::between(h, r))
            .fold(BleuStats::default(), |acc, s| acc + s);
        assert_eq!(bleu(&refs, &hyps).unwrap(), summed.score());
        assert!(summed.score() > 0.0 && summed.score() < 100.0);
    }

    #[test]
    fn bleu_brevity_penalty_applies() {
        let refs = sents(&["a b c d e f g h"]);
        let full = bleu(&refs, &sents(&["a b c d e f g h"])).unwrap();
        let short = bleu(&refs, &sents(&["a b c d e f"])).unwrap();
        let expect = 100.0 * (1.0f64 - 8.0 / 6.0).exp();
        assert_eq!(full, 100.0);
        assert!((short - expect).abs() < 1e-9);
    }

    #[test]
    fn bleu_input_validation() {
        let refs = sents(&["a"]);
        assert!(matches!(bleu(&refs, &[]), Err(MetricsError::LengthMismatch { .. })));
        assert!(matches!(bleu(&[], &[]), Err(MetricsError::EmptyInput)));
    }

    #[test]
    fn edits_identical_sentences_empty() {
        let s = tokenize("a b c");
        assert!(extract_edits(&s, &s).edits.is_empty());
    }

    #[test]
    fn edits_merge_span_replacement() {
        let src = tokenize("We should keep a body healthy .");
        let tgt = tokenize("We should stay healthy .");
        let script = extract_edits(&src, &tgt);
        assert_eq!(script.edits.len(), 1);
        let e = &script.edits[0];
        assert_eq!((e.start, e.end), (2, 5));
        assert_eq!(e.replacement, tokenize("stay").tokens().to_vec());
        assert_eq!(script.apply(), tgt);
    }

    #[test]
    fn edits_single_insertion() {
        let src = tokenize("a b");
        let tgt = tokenize("a c b");
        let script = extract_edits(&src, &tgt);
        assert_eq!(script.edits.len(), 1);
        let e = &script.edits[0];
        assert_eq!((e.start, e.end), (1, 1));
        assert_eq!(e.replacement, tokenize("c").tokens().to_vec());
        assert_eq!(e.etype, ErrorType::Missing);
        assert_eq!(script.apply(), tgt);
    }

    #[test]
    fn edits_apply_invariant_samples() {
        let cases = [
            ("", "a b c"),
            ("a b c", ""),
            ("a b c d", "d c b a"),
            ("the cat sat", "a cat sat down"),
            ("x y z", "x q z"),
        ];
        for (s, t) in cases {
            let src = tokenize(s);
            let tgt = tokenize(t);
            assert_eq!(extract_edits(&src, &tgt).apply(), tgt, "case {s:?} -> {t:?}");
        }
    }

    #[test]
    fn f_beta_perfect_system() {
        let gold = vec![extract_edits(&tokenize("a b"), &tokenize("a c"))];
        let pr = f_beta(&gold, &gold, 0.5).unwrap();
        assert_eq!((pr.precision, pr.recall, pr.f), (1.0, 1.0, 1.0));
    }

    #[test]
    fn f_beta_empty_system_convention() {
        let src = tokenize("a b");
        let gold = vec![extract_edits(&src, &tokenize("a c"))];
        let sys = vec![extract_edits(&src, &src)];
        let pr = f_beta(&sys, &gold, 0.5).unwrap();
        assert_eq!(pr.precision, 1.0);
        assert_eq!(pr.recall, 0.0);
        assert_eq!(pr.f, 0.0);
    }

    #[test]
    fn f_beta_formula_hand_value() {
        // P = 1, R = 0.5, beta = 0.5: F = 1.25 * 0.5 / (0.25 + 0.5).
        let src = tokenize("a b c d");
        let gold = vec![EditScript {
            source: src.clone(),
            edits: extract_edits(&src, &tokenize("x b y d")).edits,
        }];
        let sys = vec![EditScript {
            source: src.clone(),
            edits: vec![gold[0].edits[0].clone()],
        }];
        let pr = f_beta(&sys, &gold, 0.5).unwrap();
        assert_eq!(pr.precision, 1.0);
        assert_eq!(pr.recall, 0.5);
        assert!((pr.f - 0.8333333333333334).abs() < 1e-6);
    }

    #[test]
    fn f_beta_type_is_ignored() {
        let src = tokenize("a b");
        let mut sys = extract_edits(&src, &tokenize("a c"));
        sys.edits[0].etype = ErrorType::Other;
        let gold = extract_edits(&src, &tokenize("a c"));
        let pr = f_beta(&[sys], &[gold], 1.0).unwrap();
        assert_eq!(pr.f, 1.0);
    }

    #[test]
    fn classify_rule_chain() {
        let cases: [(&str, &str, ErrorType); 12] = [
            ("", "the", ErrorType::Missing),
            ("the", "", ErrorType::Unnecessary),
            ("The", "the", ErrorType::Orth),
            ("go", "goes", ErrorType::VerbForm),
            ("walk", "walking", ErrorType::VerbForm),
            ("walked", "walking", ErrorType::VerbForm),
            ("running", "run", ErrorType::VerbForm),
            ("cat", "cats", ErrorType::NounNum),
            ("a", "the", ErrorType::Det),
            ("in", "on", ErrorType::Prep),
            ("cat dog", "dog cat", ErrorType::WordOrder),
            ("cat", "dog", ErrorType::Other),
        ];
        for (span, repl, want) in cases {
            let got = classify_span(
                tokenize(span).tokens(),
                tokenize(repl).tokens().to_vec().as_slice(),
            );
            assert_eq!(got, want, "{span:?} -> {repl:?}");
        }
    }

    #[test]
    fn classify_is_exposed_on_edits() {
        let src = tokenize("he go home");
        let script = extract_edits(&src, &tokenize("he goes home"));
        assert_eq!(script.edits[0].etype, ErrorType::VerbForm);
        assert_eq!(classify_edit(&script.edits[0], &src), ErrorType::VerbForm);
    }

    #[test]
    fn error_stats_identical_pairs() {
        let a = tokenize("a b c");
        let stats = error_stats([(&a, &a), (&a, &a)]).unwrap();
        assert_eq!(stats.error_rate, 0.0);
        assert_eq!(stats.pct_in_rules, 100.0);
        assert!(stats.per_type.is_empty());
    }

    #[test]
    fn error_stats_hand_constructed() {
        // 10 poor tokens, 2 inside edits, both DET.
        let poor1 = tokenize("a cat sat on mat");
        let good1 = tokenize("the cat sat on mat");
        let poor2 = tokenize("this dog ran so far");
        let good2 = tokenize("that dog ran so far");
        let stats = error_stats([(&poor1, &good1), (&poor2, &good2)]).unwrap();
        assert_eq!(stats.error_rate, 20.0);
        assert_eq!(stats.pct_in_rules, 100.0);
        assert_eq!(stats.per_type.get("DET"), Some(&2));
    }

    #[test]
    fn error_stats_rejects_empty() {
        assert!(matches!(error_stats([]), Err(MetricsError::EmptyInput)));
    }

    #[test]
    fn m2_round_trip_and_exact_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.m2");
        let scripts = vec![
            extract_edits(&tokenize("a cat sat"), &tokenize("the cat sat")),
            extract_edits(&tokenize("dogs runs"), &tokenize("dogs run")),
            extract_edits(&tokenize("fine here"), &tokenize("fine here")),
        ];
        write_m2(&path, &scripts).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let want = "S a cat sat\n\
                    A 0 1|||DET|||the|||REQUIRED|||-NONE-|||0\n\
                    \n\
                    S dogs runs\n\
                    A 1 2|||VERB_FORM|||run|||REQUIRED|||-NONE-|||0\n\
                    \n\
                    S fine here\n\
                    \n";
        assert_eq!(text, want);
        let back = read_m2(&path).unwrap();
        assert_eq!(back, scripts);
    }

    #[test]
    fn m2_parse_rejects_malformed() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.m2");
        std::fs::write(&path, "A 0 1|||DET|||the|||REQUIRED|||-NONE-|||0\n").unwrap();
        assert!(matches!(read_m2(&path), Err(MetricsError::M2Format { .. })));
    }
}
