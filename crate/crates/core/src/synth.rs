//! Poor→good sentence pair synthesis: translator-based generation with
//! edit-rate filtering, rule-based corruption, round-trip noising, and a
//! seed-trained error generator, plus the pair file formats.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::decode::{DecodeError, SmtSystem};
use crate::metrics::{extract_edits, is_determiner, MetricsError};
use crate::pipeline::{train_smt_system, PipelineError, TrainConfig};
use crate::provider::{GoodProvider, ProviderError};
use crate::text::{edit_rate, ParallelCorpus, Sentence, TextError, Token};

/// Batch size used when the good-sentence provider has no batching of its
/// own; bounds memory during streaming synthesis.
const LOCAL_BATCH: usize = 64;

#[derive(Debug, thiserror::Error)]
pub enum SynthError {
    #[error("edit-rate threshold must be positive, got {0}")]
    InvalidThreshold(f64),
    #[error("pair file line {line}: {msg}")]
    Format { line: usize, msg: String },
    #[error(transparent)]
    Text(#[from] TextError),
    #[error(transparent)]
    Decode(#[from] DecodeError),
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error(transparent)]
    Training(#[from] PipelineError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn io_err(path: &Path, source: std::io::Error) -> SynthError {
    SynthError::Io { path: path.display().to_string(), source }
}

// ---------------------------------------------------------------- types --

/// Which pipeline produced a pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Generator {
    SmtNmt,
    SmtGold,
    Corruption,
    RoundTrip,
    BackTranslation,
}

impl Generator {
    pub fn name(self) -> &'static str {
        match self {
            Generator::SmtNmt => "SMT_NMT",
            Generator::SmtGold => "SMT_GOLD",
            Generator::Corruption => "CORRUPTION",
            Generator::RoundTrip => "ROUND_TRIP",
            Generator::BackTranslation => "BACK_TRANSLATION",
        }
    }
}

impl fmt::Display for Generator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Generator {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        [
            Generator::SmtNmt,
            Generator::SmtGold,
            Generator::Corruption,
            Generator::RoundTrip,
            Generator::BackTranslation,
        ]
        .into_iter()
        .find(|g| g.name() == s)
        .ok_or_else(|| format!("unknown generator {s:?}"))
    }
}

/// One poor→good training pair.
#[derive(Debug, Clone, PartialEq)]
pub struct PairRecord {
    pub poor: Sentence,
    pub good: Sentence,
    pub generator: Generator,
    pub edit_rate: f64,
    pub source_id: usize,
}

impl PairRecord {
    /// Builds a record, computing the edit rate at emission time.
    pub fn new(
        poor: Sentence,
        good: Sentence,
        generator: Generator,
        source_id: usize,
    ) -> Result<PairRecord, TextError> {
        let rate = if poor.is_empty() && good.is_empty() {
            0.0
        } else {
            edit_rate(&poor, &good)?
        };
        Ok(PairRecord { poor, good, generator, edit_rate: rate, source_id })
    }
}

/// Synthesis/filter accounting. Retained plus dropped equals total, and
/// the per-generator maps partition both counts.
#[derive(Debug, Clone, Default, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SynthReport {
    pub total: u64,
    pub retained: u64,
    pub dropped: u64,
    pub retained_by_generator: BTreeMap<String, u64>,
    pub dropped_by_generator: BTreeMap<String, u64>,
}

impl SynthReport {
    fn record(&mut self, r: &PairRecord, kept: bool) {
        self.total += 1;
        let map = if kept {
            self.retained += 1;
            &mut self.retained_by_generator
        } else {
            self.dropped += 1;
            &mut self.dropped_by_generator
        };
        *map.entry(r.generator.name().to_string()).or_insert(0) += 1;
    }
}

/// Streaming consumer of retained records.
pub type PairSink<'a> = dyn FnMut(PairRecord) -> Result<(), SynthError> + 'a;

// ----------------------------------------------------------- generation --

/// Translates a source stream with the degraded translator, pairs each
/// output with the provider's good sentence, and hands records with
/// edit_rate ≤ threshold to the sink. Sources are processed in provider
/// sized batches, so memory stays bounded regardless of stream length.
pub fn generate_pairs<I>(
    sources: I,
    beginner: &SmtSystem,
    good: &GoodProvider,
    threshold: f64,
    sink: &mut PairSink,
) -> Result<SynthReport, SynthError>
where
    I: IntoIterator<Item = Result<Sentence, TextError>>,
{
    if !(threshold > 0.0) {
        return Err(SynthError::InvalidThreshold(threshold));
    }
    let tag = match good {
        GoodProvider::GoldReference(_) => Generator::SmtGold,
        _ => Generator::SmtNmt,
    };
    let batch_size = match good {
        GoodProvider::ExternalService(cfg) => cfg.batch_size.max(1),
        _ => LOCAL_BATCH,
    };
    let mut report = SynthReport::default();
    let mut iter = sources.into_iter();
    let mut batch: Vec<Sentence> = Vec::with_capacity(batch_size);
    let mut next_id = 0usize;
    loop {
        batch.clear();
        while batch.len() < batch_size {
            match iter.next() {
                Some(s) => batch.push(s?),
                None => break,
            }
        }
        if batch.is_empty() {
            break;
        }
        let poors = beginner.translate_batch(&batch)?;
        let goods: Vec<Sentence> = match good {
            // Gold references pair by position against the full corpus, so
            // the stream must be exactly its source side, in order.
            GoodProvider::GoldReference(corpus) => batch
                .iter()
                .enumerate()
                .map(|(k, src)| {
                    let idx = next_id + k;
                    match corpus.pairs().get(idx) {
                        Some((s, t)) if s == src => Ok(t.clone()),
                        _ => Err(ProviderError::AlignmentError { index: idx }),
                    }
                })
                .collect::<Result<_, _>>()?,
            other => other.good_sentences(&batch)?,
        };
        for (poor, goodsent) in poors.into_iter().zip(goods) {
            let record = PairRecord::new(poor, goodsent, tag, next_id)?;
            next_id += 1;
            let keep = record.edit_rate <= threshold;
            report.record(&record, keep);
            if keep {
                sink(record)?;
            }
        }
    }
    if let GoodProvider::GoldReference(corpus) = good {
        if next_id != corpus.len() {
            return Err(ProviderError::AlignmentError { index: next_id }.into());
        }
    }
    Ok(report)
}

/// Noises clean text through the trained corrected→erroneous generator:
/// poor = generator(clean), good = the input itself.
pub fn backtranslate_pairs<I>(
    sources: I,
    generator: &SmtSystem,
    threshold: f64,
    sink: &mut PairSink,
) -> Result<SynthReport, SynthError>
where
    I: IntoIterator<Item = Result<Sentence, TextError>>,
{
    if !(threshold > 0.0) {
        return Err(SynthError::InvalidThreshold(threshold));
    }
    let mut report = SynthReport::default();
    let mut iter = sources.into_iter();
    let mut batch: Vec<Sentence> = Vec::with_capacity(LOCAL_BATCH);
    let mut next_id = 0usize;
    loop {
        batch.clear();
        while batch.len() < LOCAL_BATCH {
            match iter.next() {
                Some(s) => batch.push(s?),
                None => break,
            }
        }
        if batch.is_empty() {
            break;
        }
        let poors = generator.translate_batch(&batch)?;
        for (poor, goodsent) in poors.into_iter().zip(batch.drain(..)) {
            let record = PairRecord::new(poor, goodsent, Generator::BackTranslation, next_id)?;
            next_id += 1;
            let keep = record.edit_rate <= threshold;
            report.record(&record, keep);
            if keep {
                sink(record)?;
            }
        }
    }
    Ok(report)
}

// ----------------------------------------------------------- corruption --

/// Per-rule application probabilities, applied per token position in a
/// fixed order with one action per position at most.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CorruptionRuleSet {
    pub determiner_drop: f64,
    pub inflection_substitute: f64,
    pub swap_adjacent: f64,
    pub duplicate: f64,
    pub delete: f64,
}

impl Default for CorruptionRuleSet {
    fn default() -> Self {
        CorruptionRuleSet {
            determiner_drop: 0.15,
            inflection_substitute: 0.15,
            swap_adjacent: 0.05,
            duplicate: 0.05,
            delete: 0.1,
        }
    }
}

impl CorruptionRuleSet {
    pub fn validate(&self) -> Result<(), SynthError> {
        let all = [
            self.determiner_drop,
            self.inflection_substitute,
            self.swap_adjacent,
            self.duplicate,
            self.delete,
        ];
        if all.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(SynthError::InvalidThreshold(f64::NAN));
        }
        Ok(())
    }
}

enum Action {
    DropToken,
    Substitute(Token),
    SwapWithNext,
    Duplicate,
}

/// Applies the corruption rules left to right with seeded randomness.
/// Any two actions are separated by at least two untouched tokens (an
/// action at i blocks through i+2, swaps through i+3). One gap token is
/// not enough: the edit aligner can smear a swap across it at equal cost,
/// pairing unrelated tokens into an untypeable substitution. With two, the
/// direct alignment is strictly cheaper, so every edit the pair yields
/// falls under exactly one rule type.
pub fn corrupt(sentence: &Sentence, rules: &CorruptionRuleSet, seed: u64) -> PairRecord {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let toks = sentence.tokens();
    let n = toks.len();
    let mut actions: Vec<Option<Action>> = Vec::with_capacity(n);
    let mut blocked_until = 0usize;
    for i in 0..n {
        if i < blocked_until {
            actions.push(None);
            continue;
        }
        let action = choose_action(toks, i, rules, &mut rng);
        if let Some(a) = &action {
            blocked_until = match a {
                Action::SwapWithNext => i + 4,
                _ => i + 3,
            };
        }
        actions.push(action);
    }

    let mut out: Vec<Token> = Vec::with_capacity(n + 1);
    let mut skip_next = false;
    for (i, action) in actions.iter().enumerate() {
        if skip_next {
            skip_next = false;
            continue;
        }
        match action {
            None => out.push(toks[i].clone()),
            Some(Action::DropToken) => {}
            Some(Action::Substitute(t)) => out.push(t.clone()),
            Some(Action::SwapWithNext) => {
                out.push(toks[i + 1].clone());
                out.push(toks[i].clone());
                skip_next = true;
            }
            Some(Action::Duplicate) => {
                out.push(toks[i].clone());
                out.push(toks[i].clone());
            }
        }
    }
    let poor = if out.is_empty() { sentence.clone() } else { Sentence::new(out) };
    PairRecord::new(poor, sentence.clone(), Generator::Corruption, 0)
        .expect("poor side kept non-empty")
}

fn choose_action(
    toks: &[Token],
    i: usize,
    rules: &CorruptionRuleSet,
    rng: &mut ChaCha8Rng,
) -> Option<Action> {
    let n = toks.len();
    let word = toks[i].as_str();
    // Removals need a survivor, so single-token sentences are left alone.
    if n > 1 && is_determiner(&toks[i]) && rng.gen::<f64>() < rules.determiner_drop {
        return Some(Action::DropToken);
    }
    let inflectable =
        word.len() >= 3 && word.chars().all(char::is_alphabetic) && !word.ends_with('s');
    if inflectable && rng.gen::<f64>() < rules.inflection_substitute {
        let suffix = if rng.gen::<bool>() { "s" } else { "ing" };
        let t = Token::new(format!("{word}{suffix}")).expect("non-empty token");
        return Some(Action::Substitute(t));
    }
    if i + 1 < n && toks[i] != toks[i + 1] && rng.gen::<f64>() < rules.swap_adjacent {
        return Some(Action::SwapWithNext);
    }
    if rng.gen::<f64>() < rules.duplicate {
        return Some(Action::Duplicate);
    }
    if n > 1 && rng.gen::<f64>() < rules.delete {
        return Some(Action::DropToken);
    }
    None
}

// ------------------------------------------------------------ roundtrip --

/// Bridges the sentence out and back: poor = rev(fwd(sentence)).
pub fn roundtrip(
    sentence: &Sentence,
    fwd: &SmtSystem,
    rev: &SmtSystem,
) -> Result<PairRecord, SynthError> {
    let (bridged, _) = fwd.translate(sentence)?;
    let (back, _) = rev.translate(&bridged)?;
    Ok(PairRecord::new(back, sentence.clone(), Generator::RoundTrip, 0)?)
}

// ------------------------------------------------------ error generator --

/// Trains a corrected→erroneous translator from seed pairs (corrected side
/// as source). Its MERT dev set is a deterministic sample of the seed.
pub fn train_error_generator(
    seed_pairs: &ParallelCorpus,
    config: &TrainConfig,
) -> Result<SmtSystem, SynthError> {
    let dev_size = seed_pairs.len().min(100);
    let dev = crate::mert::sample_dev(seed_pairs, dev_size, config.mert.seed);
    Ok(train_smt_system(seed_pairs, &dev, config)?)
}

// ------------------------------------------------------------ filtering --

/// Re-applies the edit-rate filter to existing records.
pub fn filter_pairs<I>(
    records: I,
    threshold: f64,
    sink: &mut PairSink,
) -> Result<SynthReport, SynthError>
where
    I: IntoIterator<Item = PairRecord>,
{
    if !(threshold > 0.0) {
        return Err(SynthError::InvalidThreshold(threshold));
    }
    let mut report = SynthReport::default();
    for record in records {
        let keep = record.edit_rate <= threshold;
        report.record(&record, keep);
        if keep {
            sink(record)?;
        }
    }
    Ok(report)
}

// ----------------------------------------------------------- pair files --

/// Streaming TSV writer: `poor<TAB>good<TAB>generator<TAB>edit_rate`.
pub struct TsvWriter {
    w: BufWriter<File>,
    path: std::path::PathBuf,
}

impl TsvWriter {
    pub fn create(path: impl AsRef<Path>) -> Result<TsvWriter, SynthError> {
        let path = path.as_ref().to_path_buf();
        let f = File::create(&path).map_err(|e| io_err(&path, e))?;
        Ok(TsvWriter { w: BufWriter::new(f), path })
    }

    pub fn append(&mut self, r: &PairRecord) -> Result<(), SynthError> {
        writeln!(
            self.w,
            "{}\t{}\t{}\t{}",
            r.poor.detokenize(),
            r.good.detokenize(),
            r.generator,
            r.edit_rate
        )
        .map_err(|e| io_err(&self.path, e))
    }

    pub fn finish(mut self) -> Result<(), SynthError> {
        self.w.flush().map_err(|e| io_err(&self.path, e))
    }
}

pub fn write_pairs_tsv<'a>(
    path: impl AsRef<Path>,
    records: impl IntoIterator<Item = &'a PairRecord>,
) -> Result<(), SynthError> {
    let mut w = TsvWriter::create(path)?;
    for r in records {
        w.append(r)?;
    }
    w.finish()
}

/// Reads a TSV pair file; source_id is the zero-based line number.
pub fn read_pairs_tsv(path: impl AsRef<Path>) -> Result<Vec<PairRecord>, SynthError> {
    let path = path.as_ref();
    let f = File::open(path).map_err(|e| io_err(path, e))?;
    let mut out = Vec::new();
    for (idx, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| io_err(path, e))?;
        if line.is_empty() {
            continue;
        }
        let err = |msg: String| SynthError::Format { line: idx + 1, msg };
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 4 {
            return Err(err(format!("expected 4 tab-separated fields, got {}", fields.len())));
        }
        let generator = fields[2].parse::<Generator>().map_err(err)?;
        let rate: f64 = fields[3].parse().map_err(|_| err("bad edit_rate".into()))?;
        out.push(PairRecord {
            poor: crate::text::tokenize(fields[0]),
            good: crate::text::tokenize(fields[1]),
            generator,
            edit_rate: rate,
            source_id: idx,
        });
    }
    Ok(out)
}

/// Streaming writer for the two aligned plain-text files.
pub struct TextPairWriter {
    poor: BufWriter<File>,
    good: BufWriter<File>,
    poor_path: std::path::PathBuf,
    good_path: std::path::PathBuf,
}

impl TextPairWriter {
    pub fn create(
        poor_path: impl AsRef<Path>,
        good_path: impl AsRef<Path>,
    ) -> Result<TextPairWriter, SynthError> {
        let poor_path = poor_path.as_ref().to_path_buf();
        let good_path = good_path.as_ref().to_path_buf();
        let poor = File::create(&poor_path).map_err(|e| io_err(&poor_path, e))?;
        let good = File::create(&good_path).map_err(|e| io_err(&good_path, e))?;
        Ok(TextPairWriter {
            poor: BufWriter::new(poor),
            good: BufWriter::new(good),
            poor_path,
            good_path,
        })
    }

    pub fn append(&mut self, r: &PairRecord) -> Result<(), SynthError> {
        writeln!(self.poor, "{}", r.poor.detokenize()).map_err(|e| io_err(&self.poor_path, e))?;
        writeln!(self.good, "{}", r.good.detokenize()).map_err(|e| io_err(&self.good_path, e))
    }

    pub fn finish(mut self) -> Result<(), SynthError> {
        self.poor.flush().map_err(|e| io_err(&self.poor_path, e))?;
        self.good.flush().map_err(|e| io_err(&self.good_path, e))
    }
}

/// Streaming M2 writer: each record becomes an `S` line for the poor side
/// with the edits that produce the good side.
pub struct M2PairWriter {
    w: BufWriter<File>,
    path: std::path::PathBuf,
}

impl M2PairWriter {
    pub fn create(path: impl AsRef<Path>) -> Result<M2PairWriter, SynthError> {
        let path = path.as_ref().to_path_buf();
        let f = File::create(&path).map_err(|e| io_err(&path, e))?;
        Ok(M2PairWriter { w: BufWriter::new(f), path })
    }

    pub fn append(&mut self, r: &PairRecord) -> Result<(), SynthError> {
        let script = extract_edits(&r.poor, &r.good);
        crate::metrics::write_m2_entry(&mut self.w, &script).map_err(|e| io_err(&self.path, e))
    }

    pub fn finish(mut self) -> Result<(), SynthError> {
        self.w.flush().map_err(|e| io_err(&self.path, e))
    }
}

/// Error profile over records, poor side against good side.
pub fn profile_records(
    records: &[PairRecord],
) -> Result<crate::metrics::ErrorStats, MetricsError> {
    crate::metrics::error_stats(records.iter().map(|r| (&r.poor, &r.good)))
}
