//! Word alignment (IBM Model 1 EM), grow-diag symmetrization,
//! consistent-phrase extraction, and phrase-table construction.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;

use crate::text::{ParallelCorpus, Sentence, Token};

#[derive(Debug, thiserror::Error)]
pub enum AlignError {
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("iteration count must be at least 1")]
    InvalidIterations,
    #[error("alignment dimensions differ: {a:?} vs {b:?}")]
    DimensionMismatch { a: (usize, usize), b: (usize, usize) },
    #[error("{pairs} corpus pairs but {alignments} alignments")]
    LengthMismatch { pairs: usize, alignments: usize },
    #[error("link ({src}, {tgt}) out of range for {src_len}x{tgt_len} pair")]
    LinkOutOfRange { src: usize, tgt: usize, src_len: usize, tgt_len: usize },
    #[error("phrase table entry has an empty {0} phrase")]
    EmptyPhrase(&'static str),
    #[error("malformed phrase table line {line}: {msg}")]
    TableFormat { line: usize, msg: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn io_err(path: &Path, source: std::io::Error) -> AlignError {
    AlignError::Io { path: path.display().to_string(), source }
}

/// Lexical translation probabilities t(target | source), with `None` as
/// the NULL source word. Every row sums to 1 over its targets.
#[derive(Debug, Clone, Default)]
pub struct TranslationTable {
    rows: HashMap<Option<Token>, HashMap<Token, f64>>,
}

impl TranslationTable {
    /// t(target | source); 0.0 for unseen pairs.
    pub fn prob(&self, source: Option<&Token>, target: &Token) -> f64 {
        self.rows
            .get(&source.cloned())
            .and_then(|row| row.get(target))
            .copied()
            .unwrap_or(0.0)
    }

    pub fn rows(&self) -> impl Iterator<Item = (Option<&Token>, &HashMap<Token, f64>)> {
        self.rows.iter().map(|(s, row)| (s.as_ref(), row))
    }

    pub fn insert(&mut self, source: Option<Token>, target: Token, p: f64) {
        self.rows.entry(source).or_default().insert(target, p);
    }

    /// One `source<TAB>target<TAB>prob` row per entry, sorted, with the
    /// source prefixed `t:` (token) or `n:` (the NULL word) so no real
    /// token can masquerade as NULL.
    pub fn write(&self, path: impl AsRef<Path>) -> Result<(), AlignError> {
        let path = path.as_ref();
        let f = File::create(path).map_err(|e| io_err(path, e))?;
        let mut w = BufWriter::new(f);
        let mut lines: Vec<(String, &Token, f64)> = Vec::new();
        for (src, row) in &self.rows {
            let key = match src {
                Some(t) => format!("t:{}", t.as_str()),
                None => "n:".to_string(),
            };
            for (tgt, p) in row {
                lines.push((key.clone(), tgt, *p));
            }
        }
        lines.sort_by(|a, b| (&a.0, a.1).cmp(&(&b.0, b.1)));
        for (src, tgt, p) in lines {
            writeln!(w, "{src}\t{}\t{p}", tgt.as_str()).map_err(|e| io_err(path, e))?;
        }
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<TranslationTable, AlignError> {
        let path = path.as_ref();
        let f = File::open(path).map_err(|e| io_err(path, e))?;
        let mut table = TranslationTable::default();
        for (idx, line) in BufReader::new(f).lines().enumerate() {
            let line = line.map_err(|e| io_err(path, e))?;
            if line.is_empty() {
                continue;
            }
            let bad = |msg: &str| AlignError::TableFormat { line: idx + 1, msg: msg.to_string() };
            let mut parts = line.split('\t');
            let (src, tgt, prob) = match (parts.next(), parts.next(), parts.next(), parts.next()) {
                (Some(s), Some(t), Some(p), None) => (s, t, p),
                _ => return Err(bad("expected three tab-separated fields")),
            };
            let source = match src.split_once(':') {
                Some(("t", word)) => {
                    Some(Token::new(word).map_err(|_| bad("empty source token"))?)
                }
                Some(("n", "")) => None,
                _ => return Err(bad("source must be prefixed t: or n:")),
            };
            let target = Token::new(tgt).map_err(|_| bad("empty target token"))?;
            let p: f64 = prob.parse().map_err(|_| bad("bad probability"))?;
            table.insert(source, target, p);
        }
        Ok(table)
    }
}

/// Result of EM training: the table plus the per-iteration data
/// log10-likelihood (computed under the parameters in force during each
/// E-step, so the sequence is non-decreasing).
#[derive(Debug, Clone)]
pub struct EmOutcome {
    pub table: TranslationTable,
    pub log_likelihood: Vec<f64>,
}

/// IBM Model 1 EM with a NULL source word, initialized uniformly over
/// co-occurring pairs.
pub fn em_model1(corpus: &ParallelCorpus, iterations: usize) -> Result<EmOutcome, AlignError> {
    if corpus.is_empty() {
        return Err(AlignError::EmptyCorpus);
    }
    if iterations == 0 {
        return Err(AlignError::InvalidIterations);
    }

    let mut table = TranslationTable::default();
    for (src, tgt) in corpus.pairs() {
        for t in tgt.tokens() {
            table.rows.entry(None).or_default().insert(t.clone(), 0.0);
            for s in src.tokens() {
                table
                    .rows
                    .entry(Some(s.clone()))
                    .or_default()
                    .insert(t.clone(), 0.0);
            }
        }
    }
    for row in table.rows.values_mut() {
        let u = 1.0 / row.len() as f64;
        for p in row.values_mut() {
            *p = u;
        }
    }

    let mut history = Vec::with_capacity(iterations);
    for _ in 0..iterations {
        // E-step, parallel over pairs with a reduction in pair order.
        let partials: Vec<(HashMap<(Option<Token>, Token), f64>, f64)> = corpus
            .pairs()
            .par_iter()
            .map(|(src, tgt)| {
                let mut counts: HashMap<(Option<Token>, Token), f64> = HashMap::new();
                let mut ll = 0.0;
                for t in tgt.tokens() {
                    let p_null = table.prob(None, t);
                    let mut denom = p_null;
                    for s in src.tokens() {
                        denom += table.prob(Some(s), t);
                    }
                    ll += (denom / (src.len() + 1) as f64).log10();
                    if denom == 0.0 {
                        continue;
                    }
                    *counts.entry((None, t.clone())).or_insert(0.0) += p_null / denom;
                    for s in src.tokens() {
                        *counts.entry((Some(s.clone()), t.clone())).or_insert(0.0) +=
                            table.prob(Some(s), t) / denom;
                    }
                }
                (counts, ll)
            })
            .collect();

        let mut counts: HashMap<(Option<Token>, Token), f64> = HashMap::new();
        let mut ll = 0.0;
        for (partial, partial_ll) in partials {
            ll += partial_ll;
            for (k, v) in partial {
                *counts.entry(k).or_insert(0.0) += v;
            }
        }
        history.push(ll);

        // M-step: renormalize each source row from expected counts.
        let mut next = TranslationTable::default();
        for ((s, t), c) in counts {
            next.rows.entry(s).or_default().insert(t, c);
        }
        for row in next.rows.values_mut() {
            // key-sorted accumulation keeps the total bit-identical across
            // runs; map iteration order is not stable between processes
            let mut sorted: Vec<(Token, f64)> = row.iter().map(|(t, &c)| (t.clone(), c)).collect();
            sorted.sort_by(|a, b| a.0.cmp(&b.0));
            let total: f64 = sorted.iter().map(|(_, c)| *c).sum();
            if total > 0.0 {
                for p in row.values_mut() {
                    *p /= total;
                }
            }
        }
        table = next;
    }
    Ok(EmOutcome { table, log_likelihood: history })
}

/// Set of alignment links between a source and a target sentence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AlignmentMatrix {
    links: BTreeSet<(usize, usize)>,
    pub source_len: usize,
    pub target_len: usize,
}

impl AlignmentMatrix {
    pub fn new(
        source_len: usize,
        target_len: usize,
        links: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self, AlignError> {
        let links: BTreeSet<(usize, usize)> = links.into_iter().collect();
        for &(s, t) in &links {
            if s >= source_len || t >= target_len {
                return Err(AlignError::LinkOutOfRange {
                    src: s,
                    tgt: t,
                    src_len: source_len,
                    tgt_len: target_len,
                });
            }
        }
        Ok(AlignmentMatrix { links, source_len, target_len })
    }

    pub fn links(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.links.iter().copied()
    }

    pub fn contains(&self, link: (usize, usize)) -> bool {
        self.links.contains(&link)
    }

    pub fn len(&self) -> usize {
        self.links.len()
    }

    pub fn is_empty(&self) -> bool {
        self.links.is_empty()
    }

    /// Swaps the two sides (used to bring a reverse-direction alignment
    /// into the forward coordinate system).
    pub fn transposed(&self) -> AlignmentMatrix {
        AlignmentMatrix {
            links: self.links.iter().map(|&(s, t)| (t, s)).collect(),
            source_len: self.target_len,
            target_len: self.source_len,
        }
    }

    /// Pharaoh text form: space-separated `src-tgt` pairs in link order.
    pub fn to_pharaoh(&self) -> String {
        let mut out = String::new();
        for (i, (s, t)) in self.links().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            out.push_str(&format!("{s}-{t}"));
        }
        out
    }

    pub fn from_pharaoh(
        line: &str,
        source_len: usize,
        target_len: usize,
    ) -> Result<Self, AlignError> {
        let mut links = Vec::new();
        for part in line.split_whitespace() {
            let bad = || AlignError::TableFormat {
                line: 0,
                msg: format!("bad pharaoh link {part:?}"),
            };
            let (s, t) = part.split_once('-').ok_or_else(bad)?;
            links.push((s.parse().map_err(|_| bad())?, t.parse().map_err(|_| bad())?));
        }
        AlignmentMatrix::new(source_len, target_len, links)
    }
}

/// Links every target position to its most probable source position, or to
/// NULL (no link). Ties go to the lowest source index; a source word wins a
/// tie against NULL.
pub fn viterbi_align(table: &TranslationTable, pair: (&Sentence, &Sentence)) -> AlignmentMatrix {
    let (src, tgt) = pair;
    let mut links = BTreeSet::new();
    for (j, t) in tgt.tokens().iter().enumerate() {
        let p_null = table.prob(None, t);
        let mut best: Option<(usize, f64)> = None;
        for (i, s) in src.tokens().iter().enumerate() {
            let p = table.prob(Some(s), t);
            if best.map_or(true, |(_, bp)| p > bp) {
                best = Some((i, p));
            }
        }
        if let Some((i, p)) = best {
            if p >= p_null && p > 0.0 {
                links.insert((i, j));
            }
        }
    }
    AlignmentMatrix { links, source_len: src.len(), target_len: tgt.len() }
}

/// Grow-diag symmetrization: start from the intersection, repeatedly adopt
/// union links in the 8-neighborhood of current links whenever one of their
/// endpoints is still unaligned. No final step.
pub fn symmetrize(
    forward: &AlignmentMatrix,
    reverse: &AlignmentMatrix,
) -> Result<AlignmentMatrix, AlignError> {
    if forward.source_len != reverse.source_len || forward.target_len != reverse.target_len {
        return Err(AlignError::DimensionMismatch {
            a: (forward.source_len, forward.target_len),
            b: (reverse.source_len, reverse.target_len),
        });
    }
    let union: BTreeSet<(usize, usize)> =
        forward.links.union(&reverse.links).copied().collect();
    let mut links: BTreeSet<(usize, usize)> =
        forward.links.intersection(&reverse.links).copied().collect();
    let mut src_done: HashSet<usize> = links.iter().map(|&(s, _)| s).collect();
    let mut tgt_done: HashSet<usize> = links.iter().map(|&(_, t)| t).collect();

    loop {
        let mut added = Vec::new();
        for &(s, t) in &links {
            for ds in -1i64..=1 {
                for dt in -1i64..=1 {
                    if ds == 0 && dt == 0 {
                        continue;
                    }
                    let (ns, nt) = (s as i64 + ds, t as i64 + dt);
                    if ns < 0 || nt < 0 {
                        continue;
                    }
                    let cand = (ns as usize, nt as usize);
                    if links.contains(&cand) || !union.contains(&cand) {
                        continue;
                    }
                    if !src_done.contains(&cand.0) || !tgt_done.contains(&cand.1) {
                        added.push(cand);
                    }
                }
            }
        }
        if added.is_empty() {
            break;
        }
        for cand in added {
            // Re-check: an earlier adoption this round may have covered it.
            if !src_done.contains(&cand.0) || !tgt_done.contains(&cand.1) {
                links.insert(cand);
                src_done.insert(cand.0);
                tgt_done.insert(cand.1);
            }
        }
    }
    Ok(AlignmentMatrix {
        links,
        source_len: forward.source_len,
        target_len: forward.target_len,
    })
}

/// One extracted phrase-pair occurrence.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PhrasePair {
    pub src: Vec<Token>,
    pub tgt: Vec<Token>,
}

/// Extracts every phrase pair up to `max_len` tokens per side that is
/// consistent with the alignment: the block contains at least one link and
/// no link crosses its boundary. Unaligned boundary target words extend the
/// block. Output is sorted and deduplicated per occurrence block.
pub fn extract_phrases(
    pair: (&Sentence, &Sentence),
    alignment: &AlignmentMatrix,
    max_len: usize,
) -> Vec<PhrasePair> {
    let (src, tgt) = pair;
    let n = src.len();
    let m = tgt.len();
    let tgt_aligned: Vec<bool> = {
        let mut v = vec![false; m];
        for (_, t) in alignment.links() {
            v[t] = true;
        }
        v
    };
    let mut out = Vec::new();
    for i1 in 0..n {
        for i2 in i1..n.min(i1 + max_len) {
            // Target projection of the source block [i1, i2].
            let mut j_min = m;
            let mut j_max = 0usize;
            let mut any = false;
            for (s, t) in alignment.links() {
                if s >= i1 && s <= i2 {
                    any = true;
                    j_min = j_min.min(t);
                    j_max = j_max.max(t);
                }
            }
            if !any {
                continue;
            }
            // Consistency: links into the projected span must start inside.
            let consistent = alignment
                .links()
                .all(|(s, t)| !(t >= j_min && t <= j_max) || (s >= i1 && s <= i2));
            if !consistent {
                continue;
            }
            // Extend over unaligned boundary target words.
            let mut j1 = j_min as i64;
            while j1 >= 0 && (j1 == j_min as i64 || !tgt_aligned[j1 as usize]) {
                let mut j2 = j_max;
                loop {
                    if j2 - j1 as usize + 1 <= max_len {
                        out.push(PhrasePair {
                            src: src.tokens()[i1..=i2].to_vec(),
                            tgt: tgt.tokens()[j1 as usize..=j2].to_vec(),
                        });
                    }
                    if j2 + 1 < m && !tgt_aligned[j2 + 1] {
                        j2 += 1;
                    } else {
                        break;
                    }
                }
                j1 -= 1;
            }
        }
    }
    out.sort();
    out
}

/// One phrase-table row: four features, all probabilities in (0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct PhraseTableEntry {
    pub src: Vec<Token>,
    pub tgt: Vec<Token>,
    /// [phi(tgt|src), phi(src|tgt), lex(tgt|src), lex(src|tgt)]
    pub features: [f64; 4],
}

/// Phrase table indexed by source phrase.
#[derive(Debug, Clone, Default)]
pub struct PhraseTable {
    entries: HashMap<Vec<Token>, Vec<PhraseTableEntry>>,
    pub max_phrase_len: usize,
}

impl PhraseTable {
    pub fn new(max_phrase_len: usize) -> PhraseTable {
        PhraseTable { entries: HashMap::new(), max_phrase_len }
    }

    pub fn options(&self, src: &[Token]) -> &[PhraseTableEntry] {
        self.entries.get(src).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn iter(&self) -> impl Iterator<Item = &PhraseTableEntry> {
        self.entries.values().flatten()
    }

    pub fn len(&self) -> usize {
        self.entries.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn insert(&mut self, entry: PhraseTableEntry) -> Result<(), AlignError> {
        if entry.src.is_empty() {
            return Err(AlignError::EmptyPhrase("source"));
        }
        if entry.tgt.is_empty() {
            return Err(AlignError::EmptyPhrase("target"));
        }
        self.entries.entry(entry.src.clone()).or_default().push(entry);
        Ok(())
    }

    /// Moses-style text export: `src ||| tgt ||| f1 f2 f3 f4`, sorted.
    pub fn write(&self, path: impl AsRef<Path>) -> Result<(), AlignError> {
        let path = path.as_ref();
        let f = File::create(path).map_err(|e| io_err(path, e))?;
        let mut w = BufWriter::new(f);
        let mut rows: Vec<&PhraseTableEntry> = self.iter().collect();
        rows.sort_by(|a, b| (&a.src, &a.tgt).cmp(&(&b.src, &b.tgt)));
        for e in rows {
            let src = join(&e.src);
            let tgt = join(&e.tgt);
            let [a, b, c, d] = e.features;
            writeln!(w, "{src} ||| {tgt} ||| {a} {b} {c} {d}").map_err(|e| io_err(path, e))?;
        }
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>, max_phrase_len: usize) -> Result<Self, AlignError> {
        let path = path.as_ref();
        let f = File::open(path).map_err(|e| io_err(path, e))?;
        let mut table = PhraseTable { entries: HashMap::new(), max_phrase_len };
        for (idx, line) in BufReader::new(f).lines().enumerate() {
            let line = line.map_err(|e| io_err(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let bad = |msg: &str| AlignError::TableFormat { line: idx + 1, msg: msg.to_string() };
            let mut parts = line.split(" ||| ");
            let src = parts.next().ok_or_else(|| bad("missing source"))?;
            let tgt = parts.next().ok_or_else(|| bad("missing target"))?;
            let feats = parts.next().ok_or_else(|| bad("missing features"))?;
            let mut features = [0.0f64; 4];
            let mut it = feats.split(' ');
            for slot in &mut features {
                *slot = it
                    .next()
                    .and_then(|v| v.parse().ok())
                    .ok_or_else(|| bad("expected four numeric features"))?;
            }
            table.insert(PhraseTableEntry {
                src: split_tokens(src),
                tgt: split_tokens(tgt),
                features,
            })?;
        }
        Ok(table)
    }
}

fn join(tokens: &[Token]) -> String {
    tokens
        .iter()
        .map(Token::as_str)
        .collect::<Vec<_>>()
        .join(" ")
}

fn split_tokens(s: &str) -> Vec<Token> {
    s.split(' ')
        .filter(|w| !w.is_empty())
        .map(|w| Token::new(w).expect("phrase words contain no whitespace"))
        .collect()
}

/// Builds the phrase table: relative-frequency phi in both directions from
/// extraction counts, and lexical weights from the word-level tables using
/// the max-over-source (plus NULL) formulation.
pub fn build_phrase_table(
    corpus: &ParallelCorpus,
    alignments: &[AlignmentMatrix],
    max_len: usize,
    lex_fwd: &TranslationTable,
    lex_rev: &TranslationTable,
) -> Result<PhraseTable, AlignError> {
    if corpus.len() != alignments.len() {
        return Err(AlignError::LengthMismatch {
            pairs: corpus.len(),
            alignments: alignments.len(),
        });
    }
    let mut pair_counts: HashMap<PhrasePair, u64> = HashMap::new();
    let mut src_counts: HashMap<Vec<Token>, u64> = HashMap::new();
    let mut tgt_counts: HashMap<Vec<Token>, u64> = HashMap::new();
    for ((src, tgt), alignment) in corpus.pairs().iter().zip(alignments) {
        for pp in extract_phrases((src, tgt), alignment, max_len) {
            *src_counts.entry(pp.src.clone()).or_insert(0) += 1;
            *tgt_counts.entry(pp.tgt.clone()).or_insert(0) += 1;
            *pair_counts.entry(pp).or_insert(0) += 1;
        }
    }
    let mut table = PhraseTable { entries: HashMap::new(), max_phrase_len: max_len };
    for (pp, c) in pair_counts {
        let phi_fwd = c as f64 / src_counts[&pp.src] as f64;
        let phi_rev = c as f64 / tgt_counts[&pp.tgt] as f64;
        let lex_f = lexical_weight(&pp.src, &pp.tgt, lex_fwd);
        let lex_r = lexical_weight(&pp.tgt, &pp.src, lex_rev);
        table.insert(PhraseTableEntry {
            src: pp.src,
            tgt: pp.tgt,
            features: [phi_fwd, phi_rev, lex_f, lex_r],
        })?;
    }
    for opts in table.entries.values_mut() {
        opts.sort_by(|a, b| (&a.tgt).cmp(&b.tgt));
    }
    Ok(table)
}

/// Product over `to` words of the best word-level probability from any
/// `from` word or NULL.
fn lexical_weight(from: &[Token], to: &[Token], t: &TranslationTable) -> f64 {
    let mut w = 1.0;
    for tok in to {
        let mut best = t.prob(None, tok);
        for f in from {
            best = best.max(t.prob(Some(f), tok));
        }
        w *= best;
    }
    w
}
