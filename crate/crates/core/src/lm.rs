//! N-gram language model: interpolated Kneser-Ney training with a fixed
//! discount, log10 scoring with sentence boundaries, perplexity, and ARPA
//! text import/export.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::text::Sentence;

pub const BOS: &str = "<s>";
pub const EOS: &str = "</s>";
pub const UNK: &str = "<unk>";

/// Fixed absolute discount applied at every order.
const DISCOUNT: f64 = 0.75;

/// ARPA stand-in for log10(0): <s> is never a predicted event.
const LOG_ZERO: f64 = -99.0;

#[derive(Debug, thiserror::Error)]
pub enum LmError {
    #[error("training corpus is empty")]
    EmptyCorpus,
    #[error("order {0} outside supported range 1..=5")]
    InvalidOrder(usize),
    #[error("ARPA parse error at line {line}: {msg}")]
    ArpaFormat { line: usize, msg: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn io_err(path: &Path, source: std::io::Error) -> LmError {
    LmError::Io { path: path.display().to_string(), source }
}

#[derive(Debug, Clone, Copy)]
struct Entry {
    logp: f64,
    backoff: Option<f64>,
}

/// Backoff n-gram model over interned token ids. Probabilities are stored as
/// log10; every context's distribution over the event vocabulary sums to 1.
#[derive(Debug, Clone)]
pub struct NGramModel {
    order: usize,
    ids: HashMap<String, u32>,
    words: Vec<String>,
    /// grams[k] holds (k+1)-gram entries keyed by interned id sequences.
    grams: Vec<HashMap<Box<[u32]>, Entry>>,
}

impl NGramModel {
    pub fn order(&self) -> usize {
        self.order
    }

    /// Event vocabulary: every scoreable token (includes </s> and <unk>,
    /// excludes <s>).
    pub fn event_vocab(&self) -> impl Iterator<Item = &str> {
        self.words.iter().map(|s| s.as_str()).filter(|w| *w != BOS)
    }

    pub fn vocab_contains(&self, word: &str) -> bool {
        self.ids.contains_key(word)
    }

    fn id(&self, word: &str) -> u32 {
        match self.ids.get(word) {
            Some(&i) => i,
            None => self.ids[UNK],
        }
    }

    /// log10 P(word | context), backing off through shorter contexts.
    /// `context` is oldest-first and may be any length.
    pub fn cond_logprob(&self, context: &[&str], word: &str) -> f64 {
        let w = self.id(word);
        let start = context.len().saturating_sub(self.order - 1);
        let ctx: Vec<u32> = context[start..].iter().map(|t| self.id(t)).collect();
        self.cond_ids(&ctx, w)
    }

    fn cond_ids(&self, context: &[u32], word: u32) -> f64 {
        let mut gram: Vec<u32> = Vec::with_capacity(context.len() + 1);
        gram.extend_from_slice(context);
        gram.push(word);
        if let Some(e) = self.grams[gram.len() - 1].get(gram.as_slice()) {
            return e.logp;
        }
        if context.is_empty() {
            // Unigrams cover the whole event vocabulary; only <s> lacks one.
            return LOG_ZERO;
        }
        let backoff = self.grams[context.len() - 1]
            .get(context)
            .and_then(|e| e.backoff)
            .unwrap_or(0.0);
        backoff + self.cond_ids(&context[1..], word)
    }

    /// log10 probability of the sentence including the terminal </s> event,
    /// with <s> supplied as initial context. OOV tokens score as <unk>.
    pub fn logprob(&self, sentence: &Sentence) -> f64 {
        let mut history: Vec<u32> = vec![self.ids[BOS]];
        let mut total = 0.0;
        for tok in sentence.tokens() {
            let w = self.id(tok.as_str());
            total += self.scored(&history, w);
            history.push(w);
        }
        total += self.scored(&history, self.ids[EOS]);
        total
    }

    fn scored(&self, history: &[u32], word: u32) -> f64 {
        let start = history.len().saturating_sub(self.order - 1);
        self.cond_ids(&history[start..], word)
    }

    /// 10^(−(Σ logprob) / N) where N counts every scored event (token and
    /// terminal </s>) across the corpus.
    pub fn perplexity(&self, corpus: &[Sentence]) -> Result<f64, LmError> {
        if corpus.is_empty() {
            return Err(LmError::EmptyCorpus);
        }
        let mut total = 0.0;
        let mut events = 0usize;
        for s in corpus {
            total += self.logprob(s);
            events += s.len() + 1;
        }
        Ok(10f64.powf(-total / events as f64))
    }

    /// Writes the model in ARPA text format, entries sorted per order.
    pub fn write_arpa(&self, path: impl AsRef<Path>) -> Result<(), LmError> {
        let path = path.as_ref();
        let f = File::create(path).map_err(|e| io_err(path, e))?;
        let mut w = BufWriter::new(f);
        let emit = |w: &mut BufWriter<File>| -> std::io::Result<()> {
            writeln!(w, "\\data\\")?;
            for k in 0..self.order {
                writeln!(w, "ngram {}={}", k + 1, self.grams[k].len())?;
            }
            for k in 0..self.order {
                writeln!(w, "\n\\{}-grams:", k + 1)?;
                let mut rows: Vec<(Vec<&str>, Entry)> = self.grams[k]
                    .iter()
                    .map(|(g, e)| (g.iter().map(|&i| self.words[i as usize].as_str()).collect(), *e))
                    .collect();
                rows.sort_by(|a, b| a.0.cmp(&b.0));
                for (gram, e) in rows {
                    write!(w, "{}\t{}", e.logp, gram.join(" "))?;
                    match e.backoff {
                        Some(b) => writeln!(w, "\t{b}")?,
                        None => writeln!(w)?,
                    }
                }
            }
            writeln!(w, "\n\\end\\")
        };
        emit(&mut w).map_err(|e| io_err(path, e))
    }

    /// Parses a model previously written by [`write_arpa`] (tolerates any
    /// well-formed ARPA file with <s>, </s> and <unk> entries).
    pub fn read_arpa(path: impl AsRef<Path>) -> Result<NGramModel, LmError> {
        let path = path.as_ref();
        let f = File::open(path).map_err(|e| io_err(path, e))?;
        let mut lines = Vec::new();
        for l in BufReader::new(f).lines() {
            lines.push(l.map_err(|e| io_err(path, e))?);
        }
        Self::parse_arpa(&lines)
    }

    fn parse_arpa(lines: &[String]) -> Result<NGramModel, LmError> {
        let err = |line: usize, msg: &str| LmError::ArpaFormat { line: line + 1, msg: msg.to_string() };
        let mut counts: Vec<usize> = Vec::new();
        let mut i = 0;
        while i < lines.len() && lines[i].trim() != "\\data\\" {
            i += 1;
        }
        if i == lines.len() {
            return Err(err(0, "missing \\data\\ header"));
        }
        i += 1;
        while i < lines.len() {
            let l = lines[i].trim();
            if l.is_empty() {
                i += 1;
                continue;
            }
            if l.starts_with("ngram ") {
                let rest = &l["ngram ".len()..];
                let (_, c) = rest
                    .split_once('=')
                    .ok_or_else(|| err(i, "malformed ngram count"))?;
                counts.push(c.parse().map_err(|_| err(i, "malformed ngram count"))?);
                i += 1;
            } else {
                break;
            }
        }
        let order = counts.len();
        if order == 0 {
            return Err(err(i.min(lines.len() - 1), "no ngram counts"));
        }
        let mut model = NGramModel {
            order,
            ids: HashMap::new(),
            words: Vec::new(),
            grams: vec![HashMap::new(); order],
        };
        for k in 0..order {
            while i < lines.len() && lines[i].trim() != format!("\\{}-grams:", k + 1) {
                if !lines[i].trim().is_empty() {
                    return Err(err(i, "expected n-gram section header"));
                }
                i += 1;
            }
            if i == lines.len() {
                return Err(err(lines.len() - 1, "missing n-gram section"));
            }
            i += 1;
            let mut seen = 0usize;
            while i < lines.len() && seen < counts[k] {
                let l = &lines[i];
                if l.trim().is_empty() {
                    i += 1;
                    continue;
                }
                let mut fields = l.split('\t');
                let logp: f64 = fields
                    .next()
                    .and_then(|v| v.parse().ok())
                    .ok_or_else(|| err(i, "missing log probability"))?;
                let gram_str = fields.next().ok_or_else(|| err(i, "missing ngram"))?;
                let backoff: Option<f64> = match fields.next() {
                    Some(b) => Some(b.parse().map_err(|_| err(i, "malformed backoff"))?),
                    None => None,
                };
                let gram: Vec<u32> = gram_str
                    .split(' ')
                    .map(|t| model.intern(t))
                    .collect();
                if gram.len() != k + 1 {
                    return Err(err(i, "ngram arity does not match its section"));
                }
                model.grams[k].insert(gram.into_boxed_slice(), Entry { logp, backoff });
                seen += 1;
                i += 1;
            }
            if seen < counts[k] {
                return Err(err(lines.len() - 1, "section shorter than declared count"));
            }
        }
        for special in [BOS, EOS, UNK] {
            model.intern(special);
        }
        Ok(model)
    }

    fn intern(&mut self, word: &str) -> u32 {
        if let Some(&i) = self.ids.get(word) {
            return i;
        }
        let i = self.words.len() as u32;
        self.words.push(word.to_string());
        self.ids.insert(word.to_string(), i);
        i
    }
}

/// Trains an interpolated Kneser-Ney model of the given order. Tokens seen
/// exactly once in the corpus are replaced by <unk> before counting.
pub fn train_lm(corpus: &[Sentence], order: usize) -> Result<NGramModel, LmError> {
    if corpus.is_empty() {
        return Err(LmError::EmptyCorpus);
    }
    if !(1..=5).contains(&order) {
        return Err(LmError::InvalidOrder(order));
    }

    let mut model = NGramModel {
        order,
        ids: HashMap::new(),
        words: Vec::new(),
        grams: vec![HashMap::new(); order],
    };
    let bos = model.intern(BOS);
    let eos = model.intern(EOS);
    let unk = model.intern(UNK);

    let mut freq: HashMap<&str, usize> = HashMap::new();
    for s in corpus {
        for t in s.tokens() {
            *freq.entry(t.as_str()).or_insert(0) += 1;
        }
    }

    // Raw counts per order over the padded streams [<s>, w1.., </s>].
    let mut raw: Vec<HashMap<Box<[u32]>, u64>> = vec![HashMap::new(); order];
    for s in corpus {
        let mut ids: Vec<u32> = Vec::with_capacity(s.len() + 2);
        ids.push(bos);
        for t in s.tokens() {
            if freq[t.as_str()] == 1 {
                ids.push(unk);
            } else {
                ids.push(model.intern(t.as_str()));
            }
        }
        ids.push(eos);
        for k in 1..=order {
            for win in ids.windows(k) {
                if *win.last().unwrap() == bos {
                    continue;
                }
                *raw[k - 1].entry(win.into()).or_insert(0) += 1;
            }
        }
    }

    // Adjusted counts: raw at the highest order and for grams starting with
    // <s> (nothing ever precedes them); continuation counts elsewhere.
    let mut adjusted: Vec<HashMap<Box<[u32]>, u64>> = Vec::with_capacity(order);
    for k in 1..=order {
        if k == order {
            adjusted.push(raw[k - 1].clone());
            continue;
        }
        let mut adj: HashMap<Box<[u32]>, u64> = HashMap::new();
        for (gram, &c) in &raw[k - 1] {
            if gram[0] == bos {
                adj.insert(gram.clone(), c);
            }
        }
        for gram in raw[k].keys() {
            let suffix = &gram[1..];
            if suffix[0] == bos {
                continue;
            }
            *adj.entry(suffix.into()).or_insert(0) += 1;
        }
        adjusted.push(adj);
    }

    // The event vocabulary always contains <unk> so OOV queries stay finite.
    let mut events: Vec<u32> = vec![eos, unk];
    for s in corpus {
        for t in s.tokens() {
            if freq[t.as_str()] > 1 {
                events.push(model.ids[t.as_str()]);
            }
        }
    }
    events.sort_unstable();
    events.dedup();
    let v_events = events.len() as f64;

    // Unigram distribution, interpolated with the uniform floor.
    let uni_total: u64 = adjusted[0].values().sum();
    let uni_types = adjusted[0].len() as f64;
    let floor = DISCOUNT * uni_types / uni_total as f64 / v_events;
    let mut unigram: HashMap<u32, f64> = HashMap::new();
    for &w in &events {
        let a = adjusted[0].get([w].as_slice()).copied().unwrap_or(0) as f64;
        let p = (a - DISCOUNT).max(0.0) / uni_total as f64 + floor;
        unigram.insert(w, p);
    }

    // Interpolate down the orders; store probabilities and backoff weights.
    // probs[gram] is linear-space P(last | prefix).
    let mut probs: Vec<HashMap<Box<[u32]>, f64>> = vec![HashMap::new(); order];
    let mut backoffs: Vec<HashMap<Box<[u32]>, f64>> = vec![HashMap::new(); order];
    for (&w, &p) in &unigram {
        probs[0].insert(vec![w].into_boxed_slice(), p);
    }
    for k in 2..=order {
        let mut ctx_total: HashMap<&[u32], u64> = HashMap::new();
        let mut ctx_types: HashMap<&[u32], u64> = HashMap::new();
        for (gram, &a) in &adjusted[k - 1] {
            let ctx = &gram[..k - 1];
            *ctx_total.entry(ctx).or_insert(0) += a;
            *ctx_types.entry(ctx).or_insert(0) += 1;
        }
        let mut level: HashMap<Box<[u32]>, f64> = HashMap::new();
        for (gram, &a) in &adjusted[k - 1] {
            let ctx = &gram[..k - 1];
            let total = ctx_total[ctx] as f64;
            let gamma = DISCOUNT * ctx_types[ctx] as f64 / total;
            let lower = lower_prob(&probs, &unigram, &gram[1..]);
            let p = (a as f64 - DISCOUNT).max(0.0) / total + gamma * lower;
            level.insert(gram.clone(), p);
        }
        for (ctx, &total) in &ctx_total {
            let gamma = DISCOUNT * ctx_types[ctx] as f64 / total as f64;
            backoffs[k - 2].insert((*ctx).into(), gamma);
        }
        probs[k - 1] = level;
    }

    for k in 0..order {
        for (gram, &p) in &probs[k] {
            model.grams[k].insert(gram.clone(), Entry { logp: p.log10(), backoff: None });
        }
    }
    // <s> carries no probability mass but is a valid context.
    model.grams[0].entry(vec![bos].into_boxed_slice()).or_insert(Entry {
        logp: LOG_ZERO,
        backoff: None,
    });
    for k in 0..order.saturating_sub(1) {
        for (ctx, &g) in &backoffs[k] {
            let e = model.grams[k].entry(ctx.clone()).or_insert(Entry {
                logp: LOG_ZERO,
                backoff: None,
            });
            e.backoff = Some(g.log10());
        }
    }
    Ok(model)
}

/// P(last token of `gram` | its prefix) from already-built lower levels.
fn lower_prob(
    probs: &[HashMap<Box<[u32]>, f64>],
    unigram: &HashMap<u32, f64>,
    gram: &[u32],
) -> f64 {
    if gram.len() == 1 {
        return unigram.get(&gram[0]).copied().unwrap_or(0.0);
    }
    // Lower levels are dense over their counted grams; fall through to the
    // level below when the suffix was never counted.
    match probs[gram.len() - 1].get(gram) {
        Some(&p) => p,
        None => lower_prob(probs, unigram, &gram[1..]),
    }
}
