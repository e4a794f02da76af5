//! The eight pipeline commands. Each one reads its declared inputs, writes
//! its artifacts into the output directory, prints a one-line counter, and
//! records a provenance manifest. Nothing here mutates an input file, and
//! every write is deterministic, so reruns reproduce identical bytes.

use std::fs;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use pairforge::align::{build_phrase_table, AlignmentMatrix, PhraseTable, TranslationTable};
use pairforge::decode::{read_weights, scale_lm_weight, write_weights, LogLinearWeights};
use pairforge::lm::{train_lm as train_ngram, NGramModel};
use pairforge::mert::{mert_tune, write_mert_log};
use pairforge::metrics::{bleu, extract_edits, f_beta, EditScript};
use pairforge::pipeline::{align_corpus, assemble_system, train_smt_system};
use pairforge::provider::GoodProvider;
use pairforge::synth::{
    backtranslate_pairs, corrupt, filter_pairs, generate_pairs, profile_records, read_pairs_tsv,
    roundtrip, train_error_generator, M2PairWriter, PairRecord, SynthError, SynthReport,
    TextPairWriter, TsvWriter,
};
use pairforge::text::{
    load_sentences, stream_sentences, tokenize, write_sentences, ParallelCorpus, Sentence,
};
use serde::Serialize;

use crate::config::{PipelineConfig, ProviderKind, GENERATOR_NAMES};
use crate::manifest::Manifest;
use crate::CliError;

pub const LM_FILE: &str = "lm.arpa";
pub const TTABLE_FWD_FILE: &str = "ttable_fwd.txt";
pub const TTABLE_REV_FILE: &str = "ttable_rev.txt";
pub const ALIGNMENTS_FILE: &str = "alignments.txt";
pub const PHRASE_TABLE_FILE: &str = "phrase_table.txt";
pub const WEIGHTS_FILE: &str = "weights.json";
pub const MERT_LOG_FILE: &str = "mert_log.csv";
pub const DECODED_FILE: &str = "decoded.txt";
pub const PAIRS_TSV_FILE: &str = "pairs.tsv";
pub const PAIRS_M2_FILE: &str = "pairs.m2";
pub const POOR_FILE: &str = "poor.txt";
pub const GOOD_FILE: &str = "good.txt";
pub const SYNTH_REPORT_FILE: &str = "synth_report.json";
pub const EVALUATION_FILE: &str = "evaluation.json";
pub const PROFILE_FILE: &str = "profile.json";

// ---------------------------------------------------------------- helpers --

fn artifact(cfg: &PipelineConfig, name: &str) -> PathBuf {
    cfg.paths.output_dir.join(name)
}

/// The configured path, or a config error naming the field.
fn require_path<'a>(
    path: &'a Option<PathBuf>,
    field: &str,
    needed_by: &str,
) -> Result<&'a Path, CliError> {
    path.as_deref()
        .ok_or_else(|| CliError::config(field, format!("required by {needed_by}")))
}

fn require_file(path: &Path) -> Result<(), CliError> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::MissingArtifact(path.to_path_buf()))
    }
}

/// Path of a previously produced artifact; missing means the prerequisite
/// command has not run against this output directory.
fn require_artifact(cfg: &PipelineConfig, name: &str) -> Result<PathBuf, CliError> {
    let path = artifact(cfg, name);
    require_file(&path)?;
    Ok(path)
}

/// Loads `source<TAB>target` pairs. Blank lines and pairs with an empty
/// side after tokenization are skipped.
fn read_parallel_tsv(path: &Path, name: &str) -> Result<ParallelCorpus, CliError> {
    let file =
        File::open(path).map_err(|e| CliError::Runtime(format!("read {}: {e}", path.display())))?;
    let mut pairs = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line =
            line.map_err(|e| CliError::Runtime(format!("read {}: {e}", path.display())))?;
        if line.trim().is_empty() {
            continue;
        }
        let (src, tgt) = line.split_once('\t').ok_or_else(|| {
            CliError::Runtime(format!(
                "{} line {}: expected source<TAB>target",
                path.display(),
                i + 1
            ))
        })?;
        let (src, tgt) = (tokenize(src), tokenize(tgt));
        if src.is_empty() || tgt.is_empty() {
            continue;
        }
        pairs.push((src, tgt));
    }
    Ok(ParallelCorpus::new(name, pairs))
}

/// Evenly spaced decimation: index i survives when the running quota
/// floor((i+1)*f) advances past floor(i*f). At f = 1.0 everything does.
fn keep_index(i: usize, fraction: f64) -> bool {
    if fraction >= 1.0 {
        return true;
    }
    ((i + 1) as f64 * fraction).floor() > (i as f64 * fraction).floor()
}

fn thin_corpus(corpus: &ParallelCorpus, fraction: f64) -> ParallelCorpus {
    let pairs = corpus
        .pairs()
        .iter()
        .enumerate()
        .filter(|(i, _)| keep_index(*i, fraction))
        .map(|(_, p)| p.clone())
        .collect();
    ParallelCorpus::new(corpus.name.clone(), pairs)
}

fn merge_report(total: &mut SynthReport, part: &SynthReport) {
    total.total += part.total;
    total.retained += part.retained;
    total.dropped += part.dropped;
    for (k, v) in &part.retained_by_generator {
        *total.retained_by_generator.entry(k.clone()).or_insert(0) += v;
    }
    for (k, v) in &part.dropped_by_generator {
        *total.dropped_by_generator.entry(k.clone()).or_insert(0) += v;
    }
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let json = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Runtime(format!("serialize {}: {e}", path.display())))?;
    fs::write(path, json + "\n")
        .map_err(|e| CliError::Runtime(format!("write {}: {e}", path.display())))
}

struct LoadedSystem {
    system: pairforge::decode::SmtSystem,
    lm_path: PathBuf,
    phrase_table_path: PathBuf,
    weights_path: PathBuf,
}

/// Reassembles the tuned translator from the three saved artifacts.
fn load_tuned_system(cfg: &PipelineConfig) -> Result<LoadedSystem, CliError> {
    let lm_path = require_artifact(cfg, LM_FILE)?;
    let phrase_table_path = require_artifact(cfg, PHRASE_TABLE_FILE)?;
    let weights_path = require_artifact(cfg, WEIGHTS_FILE)?;
    let lm = NGramModel::read_arpa(&lm_path)?;
    let phrase_table = PhraseTable::read(&phrase_table_path, cfg.max_phrase_len)?;
    let weights = read_weights(&weights_path)?;
    Ok(LoadedSystem {
        system: assemble_system(phrase_table, lm, weights, cfg.decoder_params()),
        lm_path,
        phrase_table_path,
        weights_path,
    })
}

// --------------------------------------------------------------- train-lm --

pub fn train_lm(cfg: &PipelineConfig) -> Result<(), CliError> {
    let corpus_path = require_path(&cfg.paths.parallel_corpus, "paths.parallel_corpus", "train-lm")?;
    require_file(corpus_path)?;
    let corpus = read_parallel_tsv(corpus_path, "train")?;
    let targets: Vec<Sentence> = corpus.targets().cloned().collect();
    let lm = train_ngram(&targets, cfg.lm_order)?;
    lm.write_arpa(artifact(cfg, LM_FILE))?;
    println!(
        "trained {}-gram model on {} sentences -> {}",
        cfg.lm_order,
        targets.len(),
        artifact(cfg, LM_FILE).display()
    );
    let mut man = Manifest::new("train-lm");
    man.input(corpus_path)?;
    man.output(LM_FILE);
    man.setting("lm_order", cfg.lm_order);
    man.write(&cfg.paths.output_dir)
}

// ------------------------------------------------------------------ align --

pub fn align(cfg: &PipelineConfig) -> Result<(), CliError> {
    let corpus_path = require_path(&cfg.paths.parallel_corpus, "paths.parallel_corpus", "align")?;
    require_file(corpus_path)?;
    let corpus = read_parallel_tsv(corpus_path, "train")?;
    let outcome = align_corpus(&corpus, cfg.em_iterations)?;
    outcome.forward.write(artifact(cfg, TTABLE_FWD_FILE))?;
    outcome.reverse.write(artifact(cfg, TTABLE_REV_FILE))?;
    // one Pharaoh line per corpus pair, matched up again by line number
    let mut text = String::new();
    for matrix in &outcome.alignments {
        text.push_str(&matrix.to_pharaoh());
        text.push('\n');
    }
    let alignments_path = artifact(cfg, ALIGNMENTS_FILE);
    fs::write(&alignments_path, text)
        .map_err(|e| CliError::Runtime(format!("write {}: {e}", alignments_path.display())))?;
    let final_ll = outcome.log_likelihood.last().copied().unwrap_or(f64::NAN);
    println!(
        "aligned {} pairs in {} EM iterations (final log10 likelihood {final_ll:.4})",
        corpus.len(),
        cfg.em_iterations
    );
    let mut man = Manifest::new("align");
    man.input(corpus_path)?;
    man.output(TTABLE_FWD_FILE);
    man.output(TTABLE_REV_FILE);
    man.output(ALIGNMENTS_FILE);
    man.setting("em_iterations", cfg.em_iterations);
    man.write(&cfg.paths.output_dir)
}

// ---------------------------------------------------------------- phrases --

pub fn phrases(cfg: &PipelineConfig) -> Result<(), CliError> {
    let corpus_path = require_path(&cfg.paths.parallel_corpus, "paths.parallel_corpus", "phrases")?;
    require_file(corpus_path)?;
    let corpus = read_parallel_tsv(corpus_path, "train")?;
    let fwd_path = require_artifact(cfg, TTABLE_FWD_FILE)?;
    let rev_path = require_artifact(cfg, TTABLE_REV_FILE)?;
    let alignments_path = require_artifact(cfg, ALIGNMENTS_FILE)?;
    let forward = TranslationTable::read(&fwd_path)?;
    let reverse = TranslationTable::read(&rev_path)?;
    let text = fs::read_to_string(&alignments_path)
        .map_err(|e| CliError::Runtime(format!("read {}: {e}", alignments_path.display())))?;
    let lines: Vec<&str> = text.lines().collect();
    if lines.len() != corpus.len() {
        return Err(CliError::Runtime(format!(
            "{}: {} alignment lines for {} corpus pairs",
            alignments_path.display(),
            lines.len(),
            corpus.len()
        )));
    }
    let alignments = corpus
        .pairs()
        .iter()
        .zip(&lines)
        .map(|((src, tgt), line)| AlignmentMatrix::from_pharaoh(line, src.len(), tgt.len()))
        .collect::<Result<Vec<_>, _>>()?;
    let table = build_phrase_table(&corpus, &alignments, cfg.max_phrase_len, &forward, &reverse)?;
    table.write(artifact(cfg, PHRASE_TABLE_FILE))?;
    println!("extracted {} phrase entries (max length {})", table.len(), cfg.max_phrase_len);
    let mut man = Manifest::new("phrases");
    man.input(corpus_path)?;
    man.input(&fwd_path)?;
    man.input(&rev_path)?;
    man.input(&alignments_path)?;
    man.output(PHRASE_TABLE_FILE);
    man.setting("max_phrase_len", cfg.max_phrase_len);
    man.write(&cfg.paths.output_dir)
}

// ------------------------------------------------------------------- tune --

pub fn tune(cfg: &PipelineConfig) -> Result<(), CliError> {
    let dev_path = require_path(&cfg.paths.dev_corpus, "paths.dev_corpus", "tune")?;
    require_file(dev_path)?;
    let dev = read_parallel_tsv(dev_path, "dev")?;
    let lm_path = require_artifact(cfg, LM_FILE)?;
    let phrase_table_path = require_artifact(cfg, PHRASE_TABLE_FILE)?;
    let lm = NGramModel::read_arpa(&lm_path)?;
    let table = PhraseTable::read(&phrase_table_path, cfg.max_phrase_len)?;
    let outcome = mert_tune(
        &dev,
        &table,
        &lm,
        &LogLinearWeights::default(),
        &cfg.decoder_params(),
        &cfg.mert_config(),
    )?;
    write_weights(artifact(cfg, WEIGHTS_FILE), &outcome.weights)?;
    write_mert_log(artifact(cfg, MERT_LOG_FILE), &outcome.dev_bleu_history)?;
    let final_bleu = outcome.dev_bleu_history.last().copied().unwrap_or(0.0);
    println!("tuned weights on {} dev pairs (pooled dev BLEU {final_bleu:.3})", dev.len());
    let mut man = Manifest::new("tune");
    man.input(dev_path)?;
    man.input(&lm_path)?;
    man.input(&phrase_table_path)?;
    man.output(WEIGHTS_FILE);
    man.output(MERT_LOG_FILE);
    man.setting("beam_size", cfg.beam_size);
    man.setting("distortion_limit", cfg.distortion_limit);
    man.setting("outer_iters", cfg.mert.outer_iters);
    man.setting("directions_per_iter", cfg.mert.directions_per_iter);
    man.setting("nbest_size", cfg.mert.nbest_size);
    man.setting("seed", cfg.seed);
    man.write(&cfg.paths.output_dir)
}

// ----------------------------------------------------------------- decode --

pub fn decode(cfg: &PipelineConfig) -> Result<(), CliError> {
    let loaded = load_tuned_system(cfg)?;
    let (input_path, sentences): (PathBuf, Vec<Sentence>) =
        match (&cfg.paths.monolingual, &cfg.paths.parallel_corpus) {
            (Some(mono), _) => {
                require_file(mono)?;
                (mono.clone(), load_sentences(mono)?)
            }
            (None, Some(parallel)) => {
                require_file(parallel)?;
                let corpus = read_parallel_tsv(parallel, "train")?;
                (parallel.clone(), corpus.sources().cloned().collect())
            }
            (None, None) => {
                return Err(CliError::config(
                    "paths.monolingual",
                    "decode needs monolingual text or a parallel corpus",
                ))
            }
        };
    let translated = loaded.system.translate_batch(&sentences)?;
    write_sentences(artifact(cfg, DECODED_FILE), translated.iter())?;
    println!("decoded {} sentences -> {}", translated.len(), artifact(cfg, DECODED_FILE).display());
    let mut man = Manifest::new("decode");
    man.input(&input_path)?;
    man.input(&loaded.lm_path)?;
    man.input(&loaded.phrase_table_path)?;
    man.input(&loaded.weights_path)?;
    man.output(DECODED_FILE);
    man.setting("beam_size", cfg.beam_size);
    man.setting("distortion_limit", cfg.distortion_limit);
    man.write(&cfg.paths.output_dir)
}

// ------------------------------------------------------------- synthesize --

pub fn synthesize(cfg: &PipelineConfig) -> Result<(), CliError> {
    let mix = cfg.generator_mix();
    if mix.is_empty() {
        return Err(CliError::config(
            "generators",
            "nothing to generate: set paths.parallel_corpus, paths.monolingual, or an explicit mix",
        ));
    }

    let loaded = load_tuned_system(cfg)?;
    let tuned = &loaded.system;
    let degraded_weights = scale_lm_weight(&tuned.weights, cfg.lm_scale)?;
    let beginner = assemble_system(
        tuned.phrase_table.clone(),
        tuned.lm.clone(),
        degraded_weights,
        cfg.decoder_params(),
    );
    // filtering off means an unbounded threshold, not a bypassed code path
    let threshold = if cfg.filter_enabled { cfg.edit_rate_threshold } else { f64::INFINITY };

    let mut man = Manifest::new("synthesize");
    man.input(&loaded.lm_path)?;
    man.input(&loaded.phrase_table_path)?;
    man.input(&loaded.weights_path)?;

    let mut tsv = TsvWriter::create(artifact(cfg, PAIRS_TSV_FILE))?;
    let mut m2 = M2PairWriter::create(artifact(cfg, PAIRS_M2_FILE))?;
    let mut text = TextPairWriter::create(artifact(cfg, POOR_FILE), artifact(cfg, GOOD_FILE))?;
    let mut sink = |record: PairRecord| -> Result<(), SynthError> {
        tsv.append(&record)?;
        m2.append(&record)?;
        text.append(&record)?;
        Ok(())
    };

    let mut total = SynthReport::default();
    for name in GENERATOR_NAMES {
        let Some(&fraction) = mix.get(name) else { continue };
        let report = match name {
            "smt_gold" => {
                let path = require_path(
                    &cfg.paths.parallel_corpus,
                    "paths.parallel_corpus",
                    "the smt_gold generator",
                )?;
                require_file(path)?;
                man.input(path)?;
                let corpus = thin_corpus(&read_parallel_tsv(path, "train")?, fraction);
                let sources: Vec<Sentence> = corpus.sources().cloned().collect();
                let provider = GoodProvider::GoldReference(corpus);
                generate_pairs(sources.into_iter().map(Ok), &beginner, &provider, threshold, &mut sink)?
            }
            "smt_nmt" => {
                let path = require_path(
                    &cfg.paths.monolingual,
                    "paths.monolingual",
                    "the smt_nmt generator",
                )?;
                require_file(path)?;
                man.input(path)?;
                let provider = match cfg.provider.kind {
                    ProviderKind::Local => GoodProvider::LocalTuned(assemble_system(
                        tuned.phrase_table.clone(),
                        tuned.lm.clone(),
                        tuned.weights.clone(),
                        cfg.decoder_params(),
                    )),
                    ProviderKind::External => {
                        GoodProvider::ExternalService(cfg.provider.service_config()?)
                    }
                    ProviderKind::Gold => {
                        return Err(CliError::config(
                            "provider.kind",
                            "gold pairing is the smt_gold generator; use local or external here",
                        ))
                    }
                };
                let stream = stream_sentences(path)?
                    .enumerate()
                    .filter(|(i, _)| keep_index(*i, fraction))
                    .map(|(_, r)| r);
                generate_pairs(stream, &beginner, &provider, threshold, &mut sink)?
            }
            "corruption" => {
                let path = require_path(
                    &cfg.paths.parallel_corpus,
                    "paths.parallel_corpus",
                    "the corruption generator",
                )?;
                require_file(path)?;
                man.input(path)?;
                let corpus = read_parallel_tsv(path, "train")?;
                let records = corpus
                    .pairs()
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| keep_index(*i, fraction))
                    .map(|(i, (_, tgt))| {
                        corrupt(tgt, &cfg.corruption, cfg.seed.wrapping_add(i as u64))
                    });
                filter_pairs(records, threshold, &mut sink)?
            }
            "round_trip" => {
                let train_path = require_path(
                    &cfg.paths.parallel_corpus,
                    "paths.parallel_corpus",
                    "the round_trip generator",
                )?;
                let dev_path = require_path(
                    &cfg.paths.dev_corpus,
                    "paths.dev_corpus",
                    "the round_trip generator",
                )?;
                require_file(train_path)?;
                require_file(dev_path)?;
                man.input(train_path)?;
                man.input(dev_path)?;
                let train = read_parallel_tsv(train_path, "train")?;
                let dev = read_parallel_tsv(dev_path, "dev")?;
                println!("round_trip: training the bridge translator (reverse direction)");
                let bridge = train_smt_system(&train.swapped(), &dev.swapped(), &cfg.train_config())?;
                let records = train
                    .pairs()
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| keep_index(*i, fraction))
                    .map(|(_, (_, tgt))| roundtrip(tgt, &bridge, &beginner))
                    .collect::<Result<Vec<_>, _>>()?;
                filter_pairs(records, threshold, &mut sink)?
            }
            "back_translation" => {
                let seed_path = require_path(
                    &cfg.paths.gec_seed,
                    "paths.gec_seed",
                    "the back_translation generator",
                )?;
                let parallel_path = require_path(
                    &cfg.paths.parallel_corpus,
                    "paths.parallel_corpus",
                    "the back_translation generator",
                )?;
                require_file(seed_path)?;
                require_file(parallel_path)?;
                man.input(seed_path)?;
                man.input(parallel_path)?;
                // seed file columns are poor<TAB>good; the generator wants
                // the corrected side as its source language
                let seed_pairs = read_parallel_tsv(seed_path, "gec-seed")?.swapped();
                println!(
                    "back_translation: training the error generator on {} seed pairs",
                    seed_pairs.len()
                );
                let generator = train_error_generator(&seed_pairs, &cfg.train_config())?;
                let corpus = read_parallel_tsv(parallel_path, "train")?;
                let stream = corpus
                    .targets()
                    .cloned()
                    .enumerate()
                    .filter(|(i, _)| keep_index(*i, fraction))
                    .map(|(_, s)| Ok(s));
                backtranslate_pairs(stream, &generator, threshold, &mut sink)?
            }
            _ => unreachable!("mix validated against GENERATOR_NAMES"),
        };
        println!("{name}: retained {} dropped {}", report.retained, report.dropped);
        merge_report(&mut total, &report);
    }

    drop(sink);
    tsv.finish()?;
    m2.finish()?;
    text.finish()?;
    write_json(&artifact(cfg, SYNTH_REPORT_FILE), &total)?;
    println!(
        "synthesized {} pairs ({} dropped by the edit-rate filter) -> {}",
        total.retained,
        total.dropped,
        artifact(cfg, PAIRS_TSV_FILE).display()
    );

    man.output(PAIRS_TSV_FILE);
    man.output(PAIRS_M2_FILE);
    man.output(POOR_FILE);
    man.output(GOOD_FILE);
    man.output(SYNTH_REPORT_FILE);
    man.setting("lm_scale", cfg.lm_scale);
    man.setting("edit_rate_threshold", cfg.edit_rate_threshold);
    man.setting("filter_enabled", cfg.filter_enabled);
    man.setting("seed", cfg.seed);
    man.setting("generators", &mix);
    man.write(&cfg.paths.output_dir)
}

// --------------------------------------------------------------- evaluate --

#[derive(Serialize)]
struct Comparison {
    tuned: f64,
    degraded: f64,
}

#[derive(Serialize)]
struct FScore {
    precision: f64,
    recall: f64,
    f: f64,
    tp: u64,
    fp: u64,
    #[serde(rename = "fn")]
    fn_: u64,
}

#[derive(Serialize)]
struct Evaluation {
    bleu: Comparison,
    perplexity: Comparison,
    f05: FScore,
}

pub fn evaluate(cfg: &PipelineConfig) -> Result<(), CliError> {
    let dev_path = require_path(&cfg.paths.dev_corpus, "paths.dev_corpus", "evaluate")?;
    require_file(dev_path)?;
    let dev = read_parallel_tsv(dev_path, "dev")?;
    if dev.is_empty() {
        return Err(CliError::Runtime(format!("{}: no usable pairs", dev_path.display())));
    }
    let loaded = load_tuned_system(cfg)?;
    let tuned = &loaded.system;
    let beginner = assemble_system(
        tuned.phrase_table.clone(),
        tuned.lm.clone(),
        scale_lm_weight(&tuned.weights, cfg.lm_scale)?,
        cfg.decoder_params(),
    );

    let sources: Vec<Sentence> = dev.sources().cloned().collect();
    let refs: Vec<Sentence> = dev.targets().cloned().collect();
    let tuned_out = tuned.translate_batch(&sources)?;
    let degraded_out = beginner.translate_batch(&sources)?;

    // F0.5 treats the tuned output as a correction of the degraded output,
    // scored against the reference as the gold correction of the same text
    let system: Vec<EditScript> =
        degraded_out.iter().zip(&tuned_out).map(|(d, t)| extract_edits(d, t)).collect();
    let gold: Vec<EditScript> =
        degraded_out.iter().zip(&refs).map(|(d, r)| extract_edits(d, r)).collect();
    let pr = f_beta(&system, &gold, 0.5)?;

    let evaluation = Evaluation {
        bleu: Comparison {
            tuned: bleu(&refs, &tuned_out)?,
            degraded: bleu(&refs, &degraded_out)?,
        },
        perplexity: Comparison {
            tuned: tuned.lm.perplexity(&tuned_out)?,
            degraded: tuned.lm.perplexity(&degraded_out)?,
        },
        f05: FScore {
            precision: pr.precision,
            recall: pr.recall,
            f: pr.f,
            tp: pr.tp,
            fp: pr.fp,
            fn_: pr.fn_,
        },
    };
    write_json(&artifact(cfg, EVALUATION_FILE), &evaluation)?;
    println!(
        "bleu: tuned {:.3} degraded {:.3} | perplexity: tuned {:.3} degraded {:.3} | F0.5 {:.4}",
        evaluation.bleu.tuned,
        evaluation.bleu.degraded,
        evaluation.perplexity.tuned,
        evaluation.perplexity.degraded,
        evaluation.f05.f
    );
    let mut man = Manifest::new("evaluate");
    man.input(dev_path)?;
    man.input(&loaded.lm_path)?;
    man.input(&loaded.phrase_table_path)?;
    man.input(&loaded.weights_path)?;
    man.output(EVALUATION_FILE);
    man.setting("lm_scale", cfg.lm_scale);
    man.setting("beam_size", cfg.beam_size);
    man.setting("distortion_limit", cfg.distortion_limit);
    man.write(&cfg.paths.output_dir)
}

// ---------------------------------------------------------------- profile --

pub fn profile(cfg: &PipelineConfig) -> Result<(), CliError> {
    let pairs_path = require_artifact(cfg, PAIRS_TSV_FILE)?;
    let records = read_pairs_tsv(&pairs_path)?;
    let stats = profile_records(&records)?;
    write_json(&artifact(cfg, PROFILE_FILE), &stats)?;
    println!(
        "profiled {} pairs: error rate {:.2}%, {:.2}% of edits in known types",
        records.len(),
        stats.error_rate,
        stats.pct_in_rules
    );
    for (etype, count) in &stats.per_type {
        println!("  {etype}: {count}");
    }
    let mut man = Manifest::new("profile");
    man.input(&pairs_path)?;
    man.output(PROFILE_FILE);
    man.write(&cfg.paths.output_dir)
}
