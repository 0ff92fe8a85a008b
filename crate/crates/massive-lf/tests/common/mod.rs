#![allow(dead_code)] // each integration target uses its own slice of this module

//! Deterministic corpus generators and independent reference computations
//! shared by the integration suites.
//!
//! The generators build records from scratch (ids, utterances, inline
//! annotations) without going through the library's serializers, so that a
//! round trip through the library is a genuine check rather than a tautology.
//! The oracle functions re-derive intent and exact-match verdicts with their
//! own token-level parser.

use massive_lf::io::{DatasetExample, Partition, PredictionRecord, SlotMethod, SlotMethodEntry};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

/// Whitespace-tokenized locales with a stem used to mint distinct words.
pub const WS_LOCALES: &[(&str, &str)] = &[
    ("en_US", "word"),
    ("de_DE", "wort"),
    ("es_ES", "palabra"),
    ("fr_FR", "mot"),
    ("hi_IN", "शब्द"),
    ("kn_IN", "ಪದ"),
    ("sw_KE", "neno"),
    ("tr_TR", "sozcuk"),
    ("vi_VN", "chu"),
];

/// Locales written without spaces: (locale, first codepoint, alphabet size).
/// The ranges are chosen to contain only assigned, non-combining letters.
pub const CJK_LOCALES: &[(&str, u32, u32)] = &[
    ("zh_CN", 0x4E00, 80), // CJK unified ideographs
    ("ja_JP", 0x3041, 80), // hiragana
    ("th_TH", 0x0E01, 46), // Thai consonants
];

pub const INTENTS: &[&str] = &[
    "alarm_set",
    "weather_query",
    "play_music",
    "calendar_set",
    "iot_hue_lightoff",
    "transport_query",
];

pub const SLOT_NAMES: &[&str] = &[
    "time",
    "date",
    "place_name",
    "person",
    "media_type",
    "event_name",
];

/// One generated record plus the raw pieces it was built from.
pub struct GenRecord {
    pub example: DatasetExample,
    pub intent: String,
    /// (name, value) pairs in utterance order.
    pub slots: Vec<(String, String)>,
}

/// Builds an inline annotation by splicing `[name : value]` wrappers into the
/// utterance at the given character spans (sorted, non-overlapping).
pub fn splice_annotation(utt: &str, slots: &[(String, usize, usize)]) -> String {
    let chars: Vec<char> = utt.chars().collect();
    let mut out = String::new();
    let mut cursor = 0;
    for (name, start, end) in slots {
        out.extend(&chars[cursor..*start]);
        out.push('[');
        out.push_str(name);
        out.push_str(" : ");
        out.extend(&chars[*start..*end]);
        out.push(']');
        cursor = *end;
    }
    out.extend(&chars[cursor..]);
    out
}

/// Picks `2k` distinct sorted boundaries out of `0..=n`, yielding `k`
/// non-empty, non-overlapping intervals.
fn pick_intervals(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Vec<(usize, usize)> {
    let mut positions: Vec<usize> = (0..=n).collect();
    positions.shuffle(rng);
    let mut bounds: Vec<usize> = positions.into_iter().take(2 * k).collect();
    bounds.sort_unstable();
    bounds.chunks(2).map(|c| (c[0], c[1])).collect()
}

fn gen_record(
    rng: &mut ChaCha8Rng,
    id: String,
    locale: &str,
    localized: bool,
    min_slots: usize,
    partition: Partition,
) -> GenRecord {
    let cjk = CJK_LOCALES.iter().find(|(l, _, _)| *l == locale);

    // utterance pieces: words for whitespace locales, single characters for
    // the rest; all pieces within one utterance are distinct and equal-width
    // so no piece sequence can occur anywhere but at its own position
    let pieces: Vec<String> = if let Some((_, base, span)) = cjk {
        let mut offsets: Vec<u32> = (0..*span).collect();
        offsets.shuffle(rng);
        let len = rng.gen_range(8..=16);
        offsets
            .into_iter()
            .take(len)
            .map(|o| {
                char::from_u32(base + o)
                    .expect("alphabet range is assigned")
                    .to_string()
            })
            .collect()
    } else {
        let stem = WS_LOCALES
            .iter()
            .find(|(l, _)| *l == locale)
            .map(|(_, s)| *s)
            .unwrap_or("word");
        let mut indices: Vec<usize> = (0..30).collect();
        indices.shuffle(rng);
        let len = rng.gen_range(4..=9);
        indices
            .into_iter()
            .take(len)
            .map(|i| format!("{stem}{i:02}"))
            .collect()
    };
    let sep = if cjk.is_some() { "" } else { " " };
    let utt = pieces.join(sep);

    let max_slots = (pieces.len() / 2).min(3);
    let k = rng.gen_range(min_slots..=max_slots.max(min_slots));
    let intervals = pick_intervals(rng, pieces.len(), k);

    let mut names: Vec<&str> = SLOT_NAMES.to_vec();
    names.shuffle(rng);

    // piece interval -> character span within the joined utterance
    let piece_char_len = |p: &String| p.chars().count();
    let char_start = |piece_idx: usize| {
        pieces[..piece_idx]
            .iter()
            .map(piece_char_len)
            .sum::<usize>()
            + sep.len() * piece_idx
    };
    let mut spans: Vec<(String, usize, usize)> = Vec::new();
    let mut slots: Vec<(String, String)> = Vec::new();
    for (slot_idx, (a, b)) in intervals.iter().enumerate() {
        let start = char_start(*a);
        let end = char_start(*b - 1) + piece_char_len(&pieces[*b - 1]);
        let name = names[slot_idx].to_string();
        let value: String = pieces[*a..*b].join(sep);
        spans.push((name.clone(), start, end));
        slots.push((name, value));
    }

    let annot_utt = splice_annotation(&utt, &spans);
    let intent = INTENTS[rng.gen_range(0..INTENTS.len())].to_string();

    let methods: Vec<SlotMethodEntry> = slots
        .iter()
        .enumerate()
        .map(|(i, (name, _))| SlotMethodEntry {
            slot: name.clone(),
            method: if localized && i == 0 {
                SlotMethod::Localization
            } else {
                SlotMethod::Translation
            },
        })
        .collect();

    GenRecord {
        example: DatasetExample {
            id,
            locale: locale.to_string(),
            partition,
            intent: intent.clone(),
            utt,
            annot_utt,
            slot_methods: Some(methods),
            scenario: None,
        },
        intent,
        slots,
    }
}

/// 216 records over 12 locales (including three written without spaces),
/// every fifth one flagged localized. Fully deterministic.
pub fn round_trip_corpus() -> Vec<DatasetExample> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x00C0_FFEE);
    let locales: Vec<&str> = WS_LOCALES
        .iter()
        .map(|(l, _)| *l)
        .chain(CJK_LOCALES.iter().map(|(l, _, _)| *l))
        .collect();
    let mut out = Vec::new();
    let mut counter = 0;
    for locale in locales {
        for _ in 0..18 {
            let localized = counter % 5 == 4;
            out.push(
                gen_record(
                    &mut rng,
                    format!("rt{counter:04}"),
                    locale,
                    localized,
                    usize::from(localized),
                    Partition::Test,
                )
                .example,
            );
            counter += 1;
        }
    }
    out
}

/// What the independent oracle says about one prediction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OracleOutcome {
    pub ia: bool,
    pub em: bool,
}

/// Renders a compact logical form by plain string pasting, independently of
/// the library serializer. `pad` doubles the separators, which must not
/// change how the form is read.
pub fn render_compact_local(intent: &str, slots: &[(String, String)], pad: bool) -> String {
    let sep = if pad { "  " } else { " " };
    let mut out = format!("[IN:{}", intent.to_uppercase());
    for (name, value) in slots {
        out.push_str(sep);
        out.push_str(&format!("[SL:{} {value}{sep}]", name.to_uppercase()));
    }
    out.push_str(sep);
    out.push(']');
    out
}

fn oracle_tokens(text: &str) -> Vec<String> {
    text.replace('[', " [ ")
        .replace(']', " ] ")
        .split_whitespace()
        .map(str::to_string)
        .collect()
}

/// Intent verdict: the first token with an `IN:` prefix (any case) names the
/// intent; brackets and everything else are ignored.
pub fn oracle_intent_hit(prediction: &str, gold_intent: &str) -> bool {
    oracle_tokens(prediction)
        .iter()
        .find_map(|t| {
            t.get(..3)
                .filter(|p| p.eq_ignore_ascii_case("IN:"))
                .map(|_| t[3..].to_string())
        })
        .is_some_and(|name| name.eq_ignore_ascii_case(gold_intent))
}

/// Exact-match verdict re-derived from the token stream: the prediction must
/// spell one intent group holding slot groups whose names (case-insensitive)
/// and values (verbatim) equal the gold pairs in order.
pub fn oracle_exact_match(
    prediction: &str,
    gold_intent: &str,
    gold_slots: &[(String, String)],
) -> bool {
    let toks = oracle_tokens(prediction);
    let mut i = 0;
    let mut next = |expect: Option<&str>| -> Option<String> {
        let t = toks.get(i)?.clone();
        i += 1;
        match expect {
            Some(e) if t != e => None,
            _ => Some(t),
        }
    };
    let mut parsed: Vec<(String, String)> = Vec::new();
    if next(Some("[")).is_none() {
        return false;
    }
    let intent_tok = match next(None) {
        Some(t) if t.get(..3).is_some_and(|p| p.eq_ignore_ascii_case("IN:")) => t[3..].to_string(),
        _ => return false,
    };
    loop {
        match toks.get(i).map(String::as_str) {
            Some("[") => {
                i += 1;
                let name = match toks.get(i) {
                    Some(t) if t.get(..3).is_some_and(|p| p.eq_ignore_ascii_case("SL:")) => {
                        t[3..].to_lowercase()
                    }
                    _ => return false,
                };
                i += 1;
                let mut value_words = Vec::new();
                while let Some(t) = toks.get(i) {
                    if t == "]" {
                        break;
                    }
                    if t == "[" {
                        return false;
                    }
                    value_words.push(t.clone());
                    i += 1;
                }
                if toks.get(i).map(String::as_str) != Some("]") || value_words.is_empty() {
                    return false;
                }
                i += 1;
                parsed.push((name, value_words.join(" ")));
            }
            Some("]") => {
                i += 1;
                break;
            }
            _ => return false,
        }
    }
    if i != toks.len() {
        return false;
    }
    intent_tok.eq_ignore_ascii_case(gold_intent)
        && parsed.len() == gold_slots.len()
        && parsed
            .iter()
            .zip(gold_slots)
            .all(|(p, g)| p.0 == g.0.to_lowercase() && p.1 == g.1)
}

/// Builds gold record number `i` plus its prediction. Index classes modulo
/// ten: 6 swaps the intent, 7 reverses the slots, 8 corrupts a value,
/// 9 breaks the bracketing, 5 is correct but rendered with doubled spacing,
/// everything else is correct verbatim.
fn planted_pair(
    rng: &mut ChaCha8Rng,
    i: usize,
    locale: &str,
) -> (DatasetExample, PredictionRecord, OracleOutcome) {
    let localized = i % 5 == 4;
    let min_slots = match i % 10 {
        7 => 2,
        8 => 1,
        _ => usize::from(localized),
    };
    let rec = gen_record(
        rng,
        format!("ev{i:04}"),
        locale,
        localized,
        min_slots,
        Partition::Test,
    );
    let prediction = match i % 10 {
        5 => render_compact_local(&rec.intent, &rec.slots, true),
        6 => render_compact_local("bogus_intent", &rec.slots, false),
        7 => {
            let mut reversed = rec.slots.clone();
            reversed.reverse();
            render_compact_local(&rec.intent, &reversed, false)
        }
        8 => {
            let mut corrupted = rec.slots.clone();
            corrupted[0].1.push('q');
            render_compact_local(&rec.intent, &corrupted, false)
        }
        9 => {
            let full = render_compact_local(&rec.intent, &rec.slots, false);
            full[..full.len() - 1].to_string()
        }
        _ => render_compact_local(&rec.intent, &rec.slots, false),
    };
    let outcome = OracleOutcome {
        ia: oracle_intent_hit(&prediction, &rec.intent),
        em: oracle_exact_match(&prediction, &rec.intent, &rec.slots),
    };
    let pred = PredictionRecord {
        id: rec.example.id.clone(),
        locale: rec.example.locale.clone(),
        lf: prediction,
    };
    (rec.example, pred, outcome)
}

/// 1000 gold examples with one prediction each, a defect planted in every
/// tenth pair per [`planted_pair`]. Returns the oracle's verdict for every
/// pair. Fully deterministic.
pub fn eval_corpus_with_planted_errors() -> (
    Vec<DatasetExample>,
    Vec<PredictionRecord>,
    Vec<OracleOutcome>,
) {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5EED_CAFE);
    let locales = ["en_US", "es_ES", "hi_IN", "zh_CN"];
    let mut gold = Vec::new();
    let mut preds = Vec::new();
    let mut oracle = Vec::new();
    for i in 0..1000usize {
        let (g, p, o) = planted_pair(&mut rng, i, locales[i % locales.len()]);
        gold.push(g);
        preds.push(p);
        oracle.push(o);
    }
    (gold, preds, oracle)
}

/// A small gold/prediction set with the same planted-defect mix, sized for
/// per-case use inside property tests.
pub fn small_eval_set(seed: u64, n: usize) -> (Vec<DatasetExample>, Vec<PredictionRecord>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let locales = ["en_US", "es_ES", "zh_CN"];
    let mut gold = Vec::new();
    let mut preds = Vec::new();
    for i in 0..n {
        let (g, p, _) = planted_pair(&mut rng, i, locales[i % locales.len()]);
        gold.push(g);
        preds.push(p);
    }
    (gold, preds)
}

/// Uniform random cells in [0, 1), reproducible from the seed.
pub fn random_cells(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n * n).map(|_| rng.gen::<f64>()).collect()
}

pub fn small_language_names() -> Vec<String> {
    ["aa", "bb", "cc", "dd", "ee"].map(str::to_string).to_vec()
}

/// Proptest strategies shared by the property and acceptance suites.
pub mod strat {
    use massive_lf::lf::{LogicalForm, SlotSpan};
    use proptest::prelude::*;
    use rand::seq::SliceRandom as _;
    use rand::{Rng as _, SeedableRng as _};
    use rand_chacha::ChaCha8Rng;

    use super::{pick_intervals, splice_annotation, SLOT_NAMES};

    /// A logical form with 0..4 slots; names and values are free-form text
    /// within the grammar (no brackets, single internal spaces).
    pub fn logical_form() -> impl Strategy<Value = LogicalForm> {
        let name = "[a-z][a-z_]{0,9}";
        let value = "[a-z0-9]{1,6}( [a-z0-9]{1,6}){0,2}";
        (
            "[a-z][a-z_]{0,12}",
            prop::collection::vec((name, value), 0..4),
        )
            .prop_map(|(intent, slots)| {
                let slots = slots.iter().map(|(n, v)| SlotSpan::new(n, v)).collect();
                LogicalForm::with_slots(&intent, slots)
            })
    }

    /// An utterance of distinct equal-width words plus a logical form over
    /// word-run slots, with everything needed to predict the library's
    /// behavior exactly.
    #[derive(Debug, Clone)]
    pub struct SpannedCase {
        pub utt: String,
        /// slots in shuffled order, spans stripped
        pub shuffled: LogicalForm,
        /// (name, start, end, value) in utterance order
        pub ordered: Vec<(String, usize, usize, String)>,
        pub intent: String,
    }

    pub fn spanned_case() -> impl Strategy<Value = SpannedCase> {
        (prop::collection::btree_set("[a-z]{3}", 4..10), any::<u64>()).prop_map(
            |(word_set, seed)| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let mut words: Vec<String> = word_set.into_iter().collect();
                words.shuffle(&mut rng);
                let n = words.len();
                let k = rng.gen_range(0..=(n / 2).min(3));
                let intervals = pick_intervals(&mut rng, n, k);
                let mut names: Vec<&str> = SLOT_NAMES.to_vec();
                names.shuffle(&mut rng);
                let utt = words.join(" ");
                let char_start =
                    |w: usize| words[..w].iter().map(|p| p.chars().count()).sum::<usize>() + w;
                let mut ordered = Vec::new();
                for (idx, (a, b)) in intervals.iter().enumerate() {
                    let start = char_start(*a);
                    let end = char_start(b - 1) + words[b - 1].chars().count();
                    ordered.push((names[idx].to_string(), start, end, words[*a..*b].join(" ")));
                }
                let mut shuffled_slots: Vec<SlotSpan> = ordered
                    .iter()
                    .map(|(name, _, _, value)| SlotSpan::new(name, value))
                    .collect();
                shuffled_slots.shuffle(&mut rng);
                let intent = "alarm_set".to_string();
                SpannedCase {
                    shuffled: LogicalForm::with_slots(&intent, shuffled_slots),
                    utt,
                    ordered,
                    intent,
                }
            },
        )
    }

    impl SpannedCase {
        /// The inline annotation built by splicing, not by the library.
        pub fn annotation(&self) -> String {
            let spans: Vec<(String, usize, usize)> = self
                .ordered
                .iter()
                .map(|(name, start, end, _)| (name.clone(), *start, *end))
                .collect();
            splice_annotation(&self.utt, &spans)
        }
    }
}
