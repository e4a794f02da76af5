//! Synthetic bilingual corpus from a small template grammar, engineered so
//! that the tuned language-model weight is pivotal and scaling it down
//! visibly degrades translations.
//!
//! The trick is verb synonym pairs with controlled disagreement between
//! the phrase table and the language model:
//!
//! * tension verbs translate mostly to the WRONG synonym in the training
//!   targets (so every phrase-table feature prefers the wrong word), while
//!   a decoy verb translating only to the right synonym pumps up that
//!   word's language-model probability in verb position. Only a large
//!   enough language-model weight makes the system output the right word.
//!   The wrong-majority rates form a ladder, so the required weight grows
//!   verb by verb.
//! * ceiling verbs are the mirror image: training prefers the right word,
//!   a decoy pumps the wrong one, so an overgrown language-model weight
//!   starts breaking them. This keeps tuning from pushing the weight far
//!   past the ladder, leaving the tuned value close enough to the top rung
//!   that a 20% reduction falls below it.
//!
//! Held-out references are deterministic (articled, correct synonym), so a
//! fully tuned system can match them exactly and any post-degradation
//! deviation strictly hurts BLEU; the flipped words are also rarer in the
//! training targets, so fluency measured by the trained model strictly
//! drops as well.

use pairforge::text::{ParallelCorpus, Sentence, Token};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const NOUNS: [(&str, &str); 9] = [
    ("gato", "cat"),
    ("perro", "dog"),
    ("pajaro", "bird"),
    ("casa", "house"),
    ("arbol", "tree"),
    ("luna", "moon"),
    ("sol", "sun"),
    ("rio", "river"),
    ("libro", "book"),
];

/// Verbs with a single rendering and no tension.
const PLAIN_VERBS: [(&str, &str); 4] = [
    ("corre", "runs"),
    ("salta", "jumps"),
    ("duerme", "sleeps"),
    ("canta", "sings"),
];

/// (source verb, correct target, wrong target, training rate of the wrong
/// target). Rates above 0.5 make the phrase table prefer the wrong word.
const TENSION_VERBS: [(&str, &str, &str, f64); 4] = [
    ("mira", "looks", "stares", 0.55),
    ("lee", "reads", "studies", 0.60),
    ("habla", "talks", "chats", 0.64),
    ("nada", "swims", "floats", 0.69),
];

/// (source verb, correct target, wrong target, training rate of the wrong
/// target). Rates below 0.5; the decoy pumps the wrong word instead.
const CEILING_VERBS: [(&str, &str, &str, f64); 2] = [
    ("pinta", "paints", "draws", 0.25),
    ("cocina", "cooks", "bakes", 0.25),
];

/// Decoy source verbs with one fixed rendering; the first four pump the
/// correct synonyms of the tension verbs, the last two pump the wrong
/// synonyms of the ceiling verbs.
const DECOY_VERBS: [(&str, &str); 6] = [
    ("vigila", "looks"),
    ("estudia", "reads"),
    ("charla", "talks"),
    ("flota", "swims"),
    ("dibuja", "draws"),
    ("hornea", "bakes"),
];

const ADVERBS: [(&str, &str); 4] = [
    ("hoy", "today"),
    ("ahora", "now"),
    ("siempre", "always"),
    ("lento", "slowly"),
];

const VERB_SLOTS: usize = PLAIN_VERBS.len() + TENSION_VERBS.len() + CEILING_VERBS.len() + DECOY_VERBS.len();

pub const TRAIN_SIZE: usize = 5000;
pub const DEV_SIZE: usize = 400;
pub const TEST_SIZE: usize = 400;

/// Training corpus plus held-out dev and test sets.
pub struct TemplateCorpus {
    pub train: ParallelCorpus,
    pub dev: ParallelCorpus,
    pub test: ParallelCorpus,
}

fn tok(s: &str) -> Token {
    Token::new(s).expect("static vocabulary")
}

fn sample_pair(rng: &mut ChaCha8Rng, noisy: bool, verb_slots: usize) -> (Sentence, Sentence) {
    let (noun_src, noun_tgt) = NOUNS[rng.gen_range(0..NOUNS.len())];
    let slot = rng.gen_range(0..verb_slots);
    let (verb_src, verb_tgt) = pick_verb(slot, rng, noisy);
    let adverb = if rng.gen::<f64>() < 0.5 {
        Some(ADVERBS[rng.gen_range(0..ADVERBS.len())])
    } else {
        None
    };

    let mut src = vec![tok(noun_src), tok(verb_src)];
    let mut tgt = vec![tok("the"), tok(noun_tgt), tok(verb_tgt)];
    if let Some((adv_src, adv_tgt)) = adverb {
        src.push(tok(adv_src));
        tgt.push(tok(adv_tgt));
    }
    (Sentence::new(src), Sentence::new(tgt))
}

fn pick_verb(slot: usize, rng: &mut ChaCha8Rng, noisy: bool) -> (&'static str, &'static str) {
    let mut idx = slot;
    if idx < PLAIN_VERBS.len() {
        return PLAIN_VERBS[idx];
    }
    idx -= PLAIN_VERBS.len();
    if idx < TENSION_VERBS.len() {
        let (src, correct, wrong, rate) = TENSION_VERBS[idx];
        let flip = noisy && rng.gen::<f64>() < rate;
        return (src, if flip { wrong } else { correct });
    }
    idx -= TENSION_VERBS.len();
    if idx < CEILING_VERBS.len() {
        let (src, correct, wrong, rate) = CEILING_VERBS[idx];
        let flip = noisy && rng.gen::<f64>() < rate;
        return (src, if flip { wrong } else { correct });
    }
    DECOY_VERBS[idx - CEILING_VERBS.len()]
}

fn sample_corpus(
    name: &str,
    size: usize,
    rng: &mut ChaCha8Rng,
    noisy: bool,
    verb_slots: usize,
) -> ParallelCorpus {
    let pairs = (0..size).map(|_| sample_pair(rng, noisy, verb_slots)).collect();
    ParallelCorpus::new(name, pairs)
}

/// Generates the full train/dev/test split from one seed. Only training
/// targets carry the synonym noise; held-out references are canonical.
/// The test set draws only plain and tension verbs: ceiling and decoy
/// verbs exist to shape tuning, and translate the same under any weights
/// that keep them intact, so they would only dilute the measured effect.
pub fn template_corpus(seed: u64) -> TemplateCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let test_slots = PLAIN_VERBS.len() + TENSION_VERBS.len();
    TemplateCorpus {
        train: sample_corpus("template-train", TRAIN_SIZE, &mut rng, true, VERB_SLOTS),
        dev: sample_corpus("template-dev", DEV_SIZE, &mut rng, false, VERB_SLOTS),
        test: sample_corpus("template-test", TEST_SIZE, &mut rng, false, test_slots),
    }
}
