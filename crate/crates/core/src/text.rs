//! Tokenization, corpus I/O and string-distance primitives shared by the
//! rest of the toolkit.

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use unicode_normalization::UnicodeNormalization;

/// Punctuation characters that are split off into their own tokens.
const SPLIT_PUNCT: &[char] = &['.', ',', ';', ':', '!', '?', '"', '\'', '(', ')'];

#[derive(Debug, thiserror::Error)]
pub enum TextError {
    #[error("token must be non-empty")]
    EmptyToken,
    #[error("token {0:?} contains whitespace")]
    WhitespaceInToken(String),
    #[error("parallel files differ in line count: {source_lines} vs {target_lines}")]
    LineCountMismatch {
        source_lines: usize,
        target_lines: usize,
    },
    #[error("edit rate is undefined for an empty poor sentence")]
    EmptySource,
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl TextError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        TextError::Io { path: path.display().to_string(), source }
    }
}

/// A single token: a non-empty string with no interior whitespace.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Token(String);

impl Token {
    /// Builds a token, rejecting empty strings and whitespace.
    pub fn new(s: impl Into<String>) -> Result<Self, TextError> {
        let s = s.into();
        if s.is_empty() {
            return Err(TextError::EmptyToken);
        }
        if s.chars().any(char::is_whitespace) {
            return Err(TextError::WhitespaceInToken(s));
        }
        Ok(Token(s))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl AsRef<str> for Token {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

/// An ordered sequence of tokens.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
pub struct Sentence(Vec<Token>);

impl Sentence {
    pub fn new(tokens: Vec<Token>) -> Self {
        Sentence(tokens)
    }

    pub fn tokens(&self) -> &[Token] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Token> {
        self.0.iter()
    }

    /// Joins the tokens back into a single-space separated string.
    pub fn detokenize(&self) -> String {
        let mut out = String::new();
        for (i, tok) in self.0.iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            out.push_str(tok.as_str());
        }
        out
    }
}

impl fmt::Display for Sentence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.detokenize())
    }
}

impl FromIterator<Token> for Sentence {
    fn from_iter<I: IntoIterator<Item = Token>>(iter: I) -> Self {
        Sentence(iter.into_iter().collect())
    }
}

impl<'a> IntoIterator for &'a Sentence {
    type Item = &'a Token;
    type IntoIter = std::slice::Iter<'a, Token>;
    fn into_iter(self) -> Self::IntoIter {
        self.0.iter()
    }
}

/// An aligned list of (source, target) sentence pairs.
#[derive(Debug, Clone, Default)]
pub struct ParallelCorpus {
    pub name: String,
    pairs: Vec<(Sentence, Sentence)>,
}

impl ParallelCorpus {
    /// Builds a corpus, dropping any pair with an empty side.
    pub fn new(name: impl Into<String>, pairs: Vec<(Sentence, Sentence)>) -> Self {
        let pairs = pairs
            .into_iter()
            .filter(|(s, t)| !s.is_empty() && !t.is_empty())
            .collect();
        ParallelCorpus { name: name.into(), pairs }
    }

    pub fn pairs(&self) -> &[(Sentence, Sentence)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn sources(&self) -> impl Iterator<Item = &Sentence> {
        self.pairs.iter().map(|(s, _)| s)
    }

    pub fn targets(&self) -> impl Iterator<Item = &Sentence> {
        self.pairs.iter().map(|(_, t)| t)
    }

    /// Swaps source and target sides.
    pub fn swapped(&self) -> ParallelCorpus {
        ParallelCorpus {
            name: format!("{}-swapped", self.name),
            pairs: self.pairs.iter().map(|(s, t)| (t.clone(), s.clone())).collect(),
        }
    }
}

/// Counts reported by [`load_parallel`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LoadStats {
    pub total_lines: usize,
    pub dropped: usize,
}

/// Splits text into tokens: NFC-normalize, split on whitespace, then split
/// the punctuation characters `.,;:!?"'()` into separate tokens wherever
/// they occur. Casing is preserved.
pub fn tokenize(text: &str) -> Sentence {
    let text: String = text.nfc().collect();
    let mut tokens = Vec::new();
    for chunk in text.split_whitespace() {
        let mut word = String::new();
        for c in chunk.chars() {
            if SPLIT_PUNCT.contains(&c) {
                if !word.is_empty() {
                    tokens.push(Token(std::mem::take(&mut word)));
                }
                tokens.push(Token(c.to_string()));
            } else {
                word.push(c);
            }
        }
        if !word.is_empty() {
            tokens.push(Token(word));
        }
    }
    Sentence(tokens)
}

/// Loads a parallel corpus from two line-aligned UTF-8 files.
///
/// Line i of each file becomes pair i. Pairs where either side tokenizes to
/// nothing are dropped and counted in the returned [`LoadStats`].
pub fn load_parallel(
    source_path: impl AsRef<Path>,
    target_path: impl AsRef<Path>,
) -> Result<(ParallelCorpus, LoadStats), TextError> {
    let src_lines = read_lines(source_path.as_ref())?;
    let tgt_lines = read_lines(target_path.as_ref())?;
    if src_lines.len() != tgt_lines.len() {
        return Err(TextError::LineCountMismatch {
            source_lines: src_lines.len(),
            target_lines: tgt_lines.len(),
        });
    }
    let total_lines = src_lines.len();
    let mut pairs = Vec::with_capacity(total_lines);
    let mut dropped = 0usize;
    for (s, t) in src_lines.iter().zip(tgt_lines.iter()) {
        let src = tokenize(s);
        let tgt = tokenize(t);
        if src.is_empty() || tgt.is_empty() {
            dropped += 1;
        } else {
            pairs.push((src, tgt));
        }
    }
    let name = source_path
        .as_ref()
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "corpus".to_string());
    Ok((ParallelCorpus { name, pairs }, LoadStats { total_lines, dropped }))
}

/// Reads a plain-text file into one [`Sentence`] per line, keeping blank
/// lines out.
pub fn load_sentences(path: impl AsRef<Path>) -> Result<Vec<Sentence>, TextError> {
    let lines = read_lines(path.as_ref())?;
    Ok(lines.iter().map(|l| tokenize(l)).filter(|s| !s.is_empty()).collect())
}

/// Writes sentences as one detokenized line each, LF-terminated.
pub fn write_sentences<'a>(
    path: impl AsRef<Path>,
    sentences: impl IntoIterator<Item = &'a Sentence>,
) -> Result<(), TextError> {
    let path = path.as_ref();
    let mut f = File::create(path).map_err(|e| TextError::io(path, e))?;
    for s in sentences {
        writeln!(f, "{}", s.detokenize()).map_err(|e| TextError::io(path, e))?;
    }
    Ok(())
}

/// Streams one tokenized sentence per line without loading the whole file.
/// Blank lines are skipped.
pub fn stream_sentences(
    path: impl AsRef<Path>,
) -> Result<impl Iterator<Item = Result<Sentence, TextError>>, TextError> {
    let path = path.as_ref().to_path_buf();
    let file = File::open(&path).map_err(|e| TextError::io(&path, e))?;
    let reader = BufReader::new(file);
    Ok(reader.lines().filter_map(move |line| match line {
        Ok(l) => {
            let s = tokenize(&l);
            if s.is_empty() {
                None
            } else {
                Some(Ok(s))
            }
        }
        Err(e) => Some(Err(TextError::io(&path, e))),
    }))
}

fn read_lines(path: &Path) -> Result<Vec<String>, TextError> {
    let file = File::open(path).map_err(|e| TextError::io(path, e))?;
    let mut lines = Vec::new();
    for line in BufReader::new(file).lines() {
        lines.push(line.map_err(|e| TextError::io(path, e))?);
    }
    Ok(lines)
}

/// Token-level Levenshtein distance with unit insert/delete/substitute costs.
pub fn edit_distance(a: &Sentence, b: &Sentence) -> usize {
    let a = a.tokens();
    let b = b.tokens();
    if a.is_empty() {
        return b.len();
    }
    if b.is_empty() {
        return a.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0usize; b.len() + 1];
    for (i, at) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, bt) in b.iter().enumerate() {
            let cost = usize::from(at != bt);
            cur[j + 1] = (cur[j] + 1).min(prev[j + 1] + 1).min(prev[j] + cost);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Edit distance between the pair, normalized by the poor side's length.
pub fn edit_rate(poor: &Sentence, good: &Sentence) -> Result<f64, TextError> {
    if poor.is_empty() {
        return Err(TextError::EmptySource);
    }
    Ok(edit_distance(poor, good) as f64 / poor.len() as f64)
}
