//! Randomized checks of the cross-cutting invariants each module promises:
//! metric laws for edit distance, round-trip laws for tokenization and
//! edit scripts, conservation laws for probability tables, and the
//! bookkeeping contracts of filtering and scoring.

use std::collections::BTreeMap;

use pairforge::align::{
    build_phrase_table, em_model1, symmetrize, AlignmentMatrix, PhraseTable, PhraseTableEntry,
};
use pairforge::decode::{nbest, DecoderParams, LogLinearWeights};
use pairforge::lm::train_lm;
use pairforge::metrics::{classify_edit, extract_edits, f_beta, BleuStats, Edit, ErrorType};
use pairforge::pipeline::align_corpus;
use pairforge::provider::GoodProvider;
use pairforge::synth::{filter_pairs, Generator, PairRecord, PairSink};
use pairforge::text::{edit_distance, tokenize, ParallelCorpus, Sentence, Token};
use proptest::prelude::*;

const WORDS: &[&str] = &["a", "b", "the", "cat", "dog", "runs"];

fn tok(s: &str) -> Token {
    Token::new(s).expect("fixture token")
}

fn sentence(min: usize, max: usize) -> impl Strategy<Value = Sentence> {
    prop::collection::vec(prop::sample::select(WORDS), min..=max)
        .prop_map(|ws| Sentence::new(ws.into_iter().map(tok).collect()))
}

fn corpus(min_pairs: usize, max_pairs: usize) -> impl Strategy<Value = ParallelCorpus> {
    prop::collection::vec((sentence(1, 4), sentence(1, 4)), min_pairs..=max_pairs)
        .prop_map(|pairs| ParallelCorpus::new("prop", pairs))
}

// ---------------------------------------------------------------- text --

proptest! {
    #[test]
    fn edit_distance_is_a_metric(
        a in sentence(0, 8),
        b in sentence(0, 8),
        c in sentence(0, 8),
    ) {
        let dab = edit_distance(&a, &b);
        prop_assert_eq!(dab, edit_distance(&b, &a));
        prop_assert_eq!(edit_distance(&a, &a), 0);
        if dab == 0 {
            prop_assert_eq!(&a, &b);
        }
        prop_assert!(dab <= edit_distance(&a, &c) + edit_distance(&c, &b));
        prop_assert!(dab <= a.len().max(b.len()));
        prop_assert!(dab >= a.len().abs_diff(b.len()));
    }

    #[test]
    fn tokenize_round_trips_through_detokenize(raw in "[ -~]{0,40}") {
        let s = tokenize(&raw);
        prop_assert_eq!(tokenize(&s.detokenize()), s);
    }
}

// ------------------------------------------------------------- metrics --

proptest! {
    // Apply-invariant fuzz: every extracted script must rebuild its
    // target, and every edit must be a well-formed non-trivial span.
    #![proptest_config(ProptestConfig::with_cases(10_000))]
    #[test]
    fn edit_scripts_reproduce_their_target(a in sentence(0, 8), b in sentence(0, 8)) {
        let script = extract_edits(&a, &b);
        for e in &script.edits {
            prop_assert!(e.start <= e.end);
            prop_assert!(e.end <= a.len());
            prop_assert!(!(e.start == e.end && e.replacement.is_empty()));
        }
        prop_assert_eq!(script.apply(), b);
    }
}

fn edit_case() -> impl Strategy<Value = (Sentence, usize, usize, Vec<Token>)> {
    (sentence(1, 8), any::<usize>(), any::<usize>(), sentence(0, 4)).prop_map(|(s, x, y, r)| {
        let mut a = x % (s.len() + 1);
        let mut b = y % (s.len() + 1);
        if a > b {
            std::mem::swap(&mut a, &mut b);
        }
        let repl = r.tokens().to_vec();
        (s, a, b, repl)
    })
}

proptest! {
    #[test]
    fn f1_is_symmetric_under_role_swap(
        src in sentence(1, 6),
        x in sentence(0, 6),
        y in sentence(0, 6),
    ) {
        let sys = vec![extract_edits(&src, &x)];
        let gold = vec![extract_edits(&src, &y)];
        let fwd = f_beta(&sys, &gold, 1.0).unwrap();
        let rev = f_beta(&gold, &sys, 1.0).unwrap();
        prop_assert_eq!(fwd.precision, rev.recall);
        prop_assert_eq!(fwd.recall, rev.precision);
        prop_assert_eq!(fwd.f, rev.f);
    }

    // Classification must be total (never panic) and a pure function of
    // the span and replacement.
    #[test]
    fn classification_is_total_and_stable((s, start, end, repl) in edit_case()) {
        let e = Edit { start, end, replacement: repl, etype: ErrorType::Other };
        let first = classify_edit(&e, &s);
        prop_assert_eq!(first, classify_edit(&e, &s));
    }

    #[test]
    fn bleu_stats_add_like_corpus_concatenation(
        a in prop::collection::vec((sentence(1, 6), sentence(1, 6)), 0..4),
        b in prop::collection::vec((sentence(1, 6), sentence(1, 6)), 0..4),
    ) {
        let stats = |pairs: &[(Sentence, Sentence)]| {
            pairs
                .iter()
                .map(|(h, r)| BleuStats::between(h, r))
                .fold(BleuStats::default(), |acc, s| acc + s)
        };
        for (h, r) in a.iter().chain(&b) {
            let s = BleuStats::between(h, r);
            for n in 0..4 {
                prop_assert!(s.clipped[n] <= s.hyp_ngrams[n]);
            }
        }
        let merged = stats(&a) + stats(&b);
        let concat: Vec<(Sentence, Sentence)> =
            a.iter().cloned().chain(b.iter().cloned()).collect();
        let whole = stats(&concat);
        prop_assert_eq!(merged, whole);
        prop_assert_eq!(merged.score(), whole.score());
    }
}

// ------------------------------------------------------------------ lm --

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn conditional_distributions_sum_to_one(
        corpus in prop::collection::vec(sentence(1, 5), 1..5),
        order in 1usize..=3,
        ctx in prop::collection::vec(prop::sample::select(WORDS), 0..=2),
    ) {
        let lm = train_lm(&corpus, order).unwrap();
        let sum: f64 = lm
            .event_vocab()
            .map(|w| 10f64.powf(lm.cond_logprob(&ctx, w)))
            .sum();
        prop_assert!((sum - 1.0).abs() <= 1e-6, "P(.|{:?}) sums to {}", ctx, sum);
    }

    #[test]
    fn perplexity_is_positive_and_finite(
        train in prop::collection::vec(sentence(1, 5), 1..5),
        test in prop::collection::vec(sentence(1, 5), 1..4),
    ) {
        let lm = train_lm(&train, 2).unwrap();
        let p = lm.perplexity(&test).unwrap();
        prop_assert!(p > 0.0 && p.is_finite(), "perplexity {}", p);
    }
}

// --------------------------------------------------------------- align --

fn two_link_sets() -> impl Strategy<Value = (usize, usize, Vec<(usize, usize)>, Vec<(usize, usize)>)>
{
    (1usize..=5, 1usize..=5).prop_flat_map(|(s, t)| {
        let links = prop::collection::vec((0..s, 0..t), 0..=s * t);
        (Just(s), Just(t), links.clone(), links)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn em_rows_stay_normalized_and_likelihood_climbs(corpus in corpus(1, 5)) {
        let out = em_model1(&corpus, 3).unwrap();
        for w in out.log_likelihood.windows(2) {
            prop_assert!(w[1] >= w[0] - 1e-9, "likelihood fell {} -> {}", w[0], w[1]);
        }
        for (src, row) in out.table.rows() {
            let sum: f64 = row.values().sum();
            prop_assert!((sum - 1.0).abs() <= 1e-6, "row {:?} sums to {}", src, sum);
            for p in row.values() {
                prop_assert!((0.0..=1.0 + 1e-12).contains(p));
            }
        }
    }

    #[test]
    fn symmetrize_stays_between_intersection_and_union((s, t, lf, lr) in two_link_sets()) {
        let f = AlignmentMatrix::new(s, t, lf).unwrap();
        let r = AlignmentMatrix::new(s, t, lr).unwrap();
        let sym = symmetrize(&f, &r).unwrap();
        for l in f.links() {
            if r.contains(l) {
                prop_assert!(sym.contains(l), "intersection link {:?} missing", l);
            }
        }
        for l in sym.links() {
            prop_assert!(f.contains(l) || r.contains(l), "invented link {:?}", l);
        }
    }

    #[test]
    fn phrase_extraction_ignores_corpus_order(corpus in corpus(2, 5)) {
        let out = align_corpus(&corpus, 3).unwrap();
        let table =
            build_phrase_table(&corpus, &out.alignments, 4, &out.forward, &out.reverse).unwrap();

        let mut rev_pairs = corpus.pairs().to_vec();
        rev_pairs.reverse();
        let mut rev_aligns = out.alignments.clone();
        rev_aligns.reverse();
        let reversed = ParallelCorpus::new("prop-reversed", rev_pairs);
        let rev_table =
            build_phrase_table(&reversed, &rev_aligns, 4, &out.forward, &out.reverse).unwrap();

        let dump = |t: &PhraseTable| {
            let mut v: Vec<PhraseTableEntry> = t.iter().cloned().collect();
            v.sort_by(|a, b| a.src.cmp(&b.src).then_with(|| a.tgt.cmp(&b.tgt)));
            v
        };
        prop_assert_eq!(dump(&table), dump(&rev_table));
    }
}

// -------------------------------------------------------------- decode --

fn toy_table() -> PhraseTable {
    let entry = |src: &str, tgt: &str, features: [f64; 4]| PhraseTableEntry {
        src: tokenize(src).tokens().to_vec(),
        tgt: tokenize(tgt).tokens().to_vec(),
        features,
    };
    let mut pt = PhraseTable::new(4);
    for e in [
        entry("a", "x", [0.6, 0.5, 0.6, 0.5]),
        entry("a", "y", [0.4, 0.5, 0.4, 0.5]),
        entry("b", "z", [1.0, 1.0, 1.0, 1.0]),
        entry("a b", "w", [0.3, 0.8, 0.3, 0.8]),
        entry("c", "x y", [0.5, 0.5, 0.5, 0.5]),
    ] {
        pt.insert(e).expect("well-formed entries");
    }
    pt
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    // Every reported hypothesis total must equal its feature vector dotted
    // with the weights, for arbitrary positive weights.
    #[test]
    fn hypothesis_totals_equal_feature_dot_weights(
        toks in prop::collection::vec(prop::sample::select(&["a", "b", "c", "d"][..]), 1..=4),
        warr in [0.05f64..1.0, 0.05..1.0, 0.05..1.0, 0.05..1.0, 0.05..1.0, 0.05..1.0, 0.05..1.0],
    ) {
        let pt = toy_table();
        let lm = train_lm(&[tokenize("x z w"), tokenize("y w x"), tokenize("x y z")], 2).unwrap();
        let w = LogLinearWeights::from_array(warr);
        let src = Sentence::new(toks.into_iter().map(tok).collect());
        let params = DecoderParams { beam_size: 16, distortion_limit: 4 };
        let list = nbest(&pt, &lm, &w, &src, 5, &params).unwrap();
        prop_assert!(!list.entries.is_empty());
        for e in &list.entries {
            prop_assert!(
                (e.total - e.features.dot(&w)).abs() <= 1e-6,
                "total {} != dot {}",
                e.total,
                e.features.dot(&w)
            );
        }
        for pair in list.entries.windows(2) {
            prop_assert!(pair[0].total >= pair[1].total, "n-best not sorted");
        }
    }
}

// --------------------------------------------------- provider / synth --

proptest! {
    #[test]
    fn gold_provider_echoes_targets_in_order(corpus in corpus(1, 6)) {
        let sources: Vec<Sentence> = corpus.sources().cloned().collect();
        let targets: Vec<Sentence> = corpus.targets().cloned().collect();
        let provider = GoodProvider::GoldReference(corpus);
        let out = provider.good_sentences(&sources).unwrap();
        prop_assert_eq!(out, targets);
    }

    // The filter must pass through exactly the records at or under the
    // threshold and account for every input in the report.
    #[test]
    fn filtered_records_respect_the_threshold(
        pairs in prop::collection::vec((sentence(1, 6), sentence(0, 6)), 1..12),
        threshold in 0.05f64..2.0,
    ) {
        let records: Vec<PairRecord> = pairs
            .iter()
            .enumerate()
            .map(|(i, (p, g))| {
                PairRecord::new(p.clone(), g.clone(), Generator::Corruption, i).unwrap()
            })
            .collect();
        let expected_kept: Vec<&PairRecord> =
            records.iter().filter(|r| r.edit_rate <= threshold).collect();

        let mut kept: Vec<PairRecord> = Vec::new();
        let report = {
            let mut sink = |r: PairRecord| {
                kept.push(r);
                Ok(())
            };
            let sink: &mut PairSink = &mut sink;
            filter_pairs(records.iter().cloned(), threshold, sink).unwrap()
        };

        prop_assert_eq!(kept.len(), expected_kept.len());
        for (got, want) in kept.iter().zip(&expected_kept) {
            prop_assert_eq!(&got.poor, &want.poor);
            prop_assert_eq!(&got.good, &want.good);
            prop_assert!(got.edit_rate <= threshold);
        }
        prop_assert_eq!(report.total, records.len() as u64);
        prop_assert_eq!(report.retained, kept.len() as u64);
        prop_assert_eq!(report.total, report.retained + report.dropped);
        let by_gen: BTreeMap<String, u64> =
            [(Generator::Corruption.name().to_string(), report.retained)]
                .into_iter()
                .filter(|(_, v)| *v > 0)
                .collect();
        prop_assert_eq!(&report.retained_by_generator, &by_gen);
    }
}
