//! Synthetic review corpora with known coefficients.
//!
//! Each review independently mentions each affordance at its low pole, its
//! high pole, or not at all; the star rating is then drawn from the ordered
//! logit at the true coefficients. Mentions are rendered from templates that
//! carry gold dependency annotations, so the corpus can be fed to the
//! extractor without a parser.

use std::collections::BTreeMap;

use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::aggregator::AffordanceKey;
use crate::corpus::ReviewRecord;
use crate::kano::{classify, compute_km, KanoCategory, KanoThresholds};
use crate::linguistics::{parse_conllu, LexiconSet, ParsedSentence, Pole, Token, Upos};
use crate::ologit::{category_probs, ModelParams, OrdinalData};

pub const RNG_NAME: &str = "ChaCha8";

#[derive(Debug, Error, PartialEq)]
pub enum SynthError {
    #[error("{field}: {message}")]
    Invalid { field: String, message: String },
    #[error("no template for affordance {key} at pole {pole:?}")]
    MissingTemplate { key: String, pole: Pole },
    #[error("template for {key}: {message}")]
    BadTemplate { key: String, message: String },
}

fn invalid(field: impl Into<String>, message: impl Into<String>) -> SynthError {
    SynthError::Invalid {
        field: field.into(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthContext {
    pub preposition: String,
    pub object: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthAffordance {
    pub action: String,
    #[serde(default)]
    pub receiver: Option<String>,
    #[serde(default)]
    pub context: Option<SynthContext>,
    pub alpha: f64,
    pub beta: f64,
    /// Per-review probability of a low-pole mention.
    pub p_low: f64,
    /// Per-review probability of a high-pole mention.
    pub p_high: f64,
}

impl SynthAffordance {
    pub fn key(&self) -> AffordanceKey {
        AffordanceKey::new(
            &self.action,
            self.receiver.as_deref(),
            self.context.as_ref().map(|c| (c.preposition.as_str(), c.object.as_str())),
        )
    }
}

/// A user-supplied sentence for one (key, pole): a CoNLL-U block with gold
/// annotations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Template {
    pub key: String,
    pub pole: Pole,
    pub conllu: String,
}

fn default_product() -> String {
    "synth".into()
}

fn default_start() -> NaiveDate {
    NaiveDate::from_ymd_opt(2012, 1, 1).unwrap()
}

fn default_end() -> NaiveDate {
    NaiveDate::from_ymd_opt(2013, 1, 1).unwrap()
}

fn default_distractor() -> f64 {
    0.3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub n_reviews: usize,
    pub affordances: Vec<SynthAffordance>,
    /// True cutpoints in reported orientation (`eps_1 <= ... <= eps_4`).
    pub cutpoints: [f64; 4],
    pub seed: u64,
    #[serde(default = "default_product")]
    pub product_id: String,
    #[serde(default = "default_start")]
    pub start: NaiveDate,
    /// Exclusive.
    #[serde(default = "default_end")]
    pub end: NaiveDate,
    /// Probability of adding a sentence without any action word.
    #[serde(default = "default_distractor")]
    pub distractor_prob: f64,
    /// When present, must cover every (key, pole); otherwise built-in
    /// templates are used.
    #[serde(default)]
    pub templates: Option<Vec<Template>>,
}

impl SynthSpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        if self.n_reviews == 0 {
            return Err(invalid("n_reviews", "must be at least 1"));
        }
        if !self.cutpoints.iter().all(|c| c.is_finite()) || !self.cutpoints.windows(2).all(|w| w[0] <= w[1]) {
            return Err(invalid("cutpoints", "must be finite and non-decreasing"));
        }
        if self.end <= self.start {
            return Err(invalid("end", "must be after start"));
        }
        if !(0.0..=1.0).contains(&self.distractor_prob) {
            return Err(invalid("distractor_prob", "must lie in [0, 1]"));
        }
        let mut seen = BTreeMap::new();
        for (i, a) in self.affordances.iter().enumerate() {
            let f = |name: &str| format!("affordances[{i}].{name}");
            if a.action.trim().is_empty() || a.action.contains(char::is_whitespace) {
                return Err(invalid(f("action"), "must be a single word"));
            }
            for (name, p) in [("p_low", a.p_low), ("p_high", a.p_high)] {
                if !(0.0..=1.0).contains(&p) {
                    return Err(invalid(f(name), "must lie in [0, 1]"));
                }
            }
            if a.p_low + a.p_high > 1.0 {
                return Err(invalid(f("p_high"), "p_low + p_high must not exceed 1"));
            }
            if !(a.alpha.is_finite() && a.beta.is_finite()) {
                return Err(invalid(f("alpha"), "coefficients must be finite"));
            }
            if let Some(j) = seen.insert(a.key(), i) {
                return Err(invalid(f("action"), format!("duplicates affordances[{j}]")));
            }
        }
        Ok(())
    }

    pub fn params(&self) -> ModelParams {
        ModelParams {
            epsilon: self.cutpoints,
            slopes: self.affordances.iter().flat_map(|a| [a.alpha, a.beta]).collect(),
        }
    }
}

/// Draw a rating at the true coefficients.
pub fn sample_rating<R: Rng>(x1: &[bool], x2: &[bool], spec: &SynthSpec, rng: &mut R) -> u8 {
    let eta: f64 = spec
        .affordances
        .iter()
        .zip(x1.iter().zip(x2))
        .map(|(a, (&l, &h))| a.alpha * l as u8 as f64 + a.beta * h as u8 as f64)
        .sum();
    let probs = category_probs(
        eta,
        &ModelParams {
            epsilon: spec.cutpoints,
            slopes: Vec::new(),
        },
    );
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (j, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return j as u8 + 1;
        }
    }
    5
}

/// Which pole, if any, a review mentions for one affordance.
fn draw_pole<R: Rng>(a: &SynthAffordance, rng: &mut R) -> Option<Pole> {
    let u: f64 = rng.gen();
    if u < a.p_low {
        Some(Pole::LowPole)
    } else if u < a.p_low + a.p_high {
        Some(Pole::HighPole)
    } else {
        None
    }
}

/// Rating data only, skipping text: same draws as the corpus generator's
/// indicators, for fast model checks.
pub fn simulate_data(spec: &SynthSpec) -> Result<OrdinalData, SynthError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let p = spec.affordances.len();
    let mut x = Vec::with_capacity(spec.n_reviews * 2 * p);
    let mut y = Vec::with_capacity(spec.n_reviews);
    for _ in 0..spec.n_reviews {
        let poles: Vec<Option<Pole>> = spec.affordances.iter().map(|a| draw_pole(a, &mut rng)).collect();
        let x1: Vec<bool> = poles.iter().map(|p| *p == Some(Pole::LowPole)).collect();
        let x2: Vec<bool> = poles.iter().map(|p| *p == Some(Pole::HighPole)).collect();
        y.push(sample_rating(&x1, &x2, spec, &mut rng));
        for (l, h) in x1.iter().zip(&x2) {
            x.push(*l as u8 as f64);
            x.push(*h as u8 as f64);
        }
    }
    let names = spec
        .affordances
        .iter()
        .flat_map(|a| {
            let k = a.key().to_string();
            [format!("{k}__x1"), format!("{k}__x2")]
        })
        .collect();
    let mut data = OrdinalData::new(names, x, y).map_err(|e| invalid("affordances", e.to_string()))?;
    data.affordances = spec.affordances.iter().map(|a| a.key().to_string()).collect();
    Ok(data)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlantedMention {
    pub review_id: String,
    pub sentence_index: usize,
    pub pole: Pole,
    pub template: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestAffordance {
    pub key: String,
    pub alpha: f64,
    pub beta: f64,
    pub category: KanoCategory,
    pub planted_mentions: Vec<PlantedMention>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    pub rng: String,
    pub product_id: String,
    pub n_reviews: usize,
    pub cutpoints: [f64; 4],
    pub thresholds: KanoThresholds,
    pub affordances: Vec<ManifestAffordance>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthCorpus {
    pub reviews: Vec<ReviewRecord>,
    pub sentences: Vec<ParsedSentence>,
    pub manifest: Manifest,
}

#[derive(Clone, Copy)]
enum Head {
    Root,
    Verb,
    Receiver,
    Object,
}

struct Piece {
    surface: String,
    lemma: String,
    upos: Upos,
    head: Head,
    deprel: &'static str,
    role: Option<Head>,
}

fn piece(surface: &str, lemma: &str, upos: Upos, head: Head, deprel: &'static str) -> Piece {
    Piece {
        surface: surface.into(),
        lemma: lemma.into(),
        upos,
        head,
        deprel,
        role: None,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Variant {
    Plain,
    Negated,
    Adverb(&'static str),
    NegatedAdverb(&'static str),
}

const HIGH_VARIANTS: [(Variant, &str); 3] = [
    (Variant::Plain, "affirmative"),
    (Variant::Adverb("easily"), "adverb_easily"),
    (Variant::Adverb("quickly"), "adverb_quickly"),
];

const LOW_VARIANTS: [(Variant, &str); 3] = [
    (Variant::Negated, "negated"),
    (Variant::Adverb("slowly"), "adverb_slowly"),
    (Variant::NegatedAdverb("easily"), "negated_adverb_easily"),
];

/// Built-in sentence: `I [can] [not] V [the R] [ADV] [P O] .`
fn builtin_sentence(a: &SynthAffordance, variant: Variant) -> Vec<Piece> {
    let mut p = vec![piece("I", "I", Upos::Pron, Head::Verb, "nsubj")];
    match variant {
        Variant::Plain => p.push(piece("can", "can", Upos::Aux, Head::Verb, "aux")),
        Variant::Negated | Variant::NegatedAdverb(_) => {
            p.push(piece("can", "can", Upos::Aux, Head::Verb, "aux"));
            p.push(piece("not", "not", Upos::Part, Head::Verb, "advmod"));
        }
        Variant::Adverb(_) => {}
    }
    let mut verb = piece(&a.action, &a.action, Upos::Verb, Head::Root, "root");
    verb.role = Some(Head::Verb);
    p.push(verb);
    if let Some(r) = &a.receiver {
        p.push(piece("the", "the", Upos::Det, Head::Receiver, "det"));
        let mut rec = piece(r, r, Upos::Noun, Head::Verb, "obj");
        rec.role = Some(Head::Receiver);
        p.push(rec);
    }
    if let Variant::Adverb(adv) | Variant::NegatedAdverb(adv) = variant {
        p.push(piece(adv, adv, Upos::Adv, Head::Verb, "advmod"));
    }
    if let Some(c) = &a.context {
        p.push(piece(&c.preposition, &c.preposition, Upos::Adp, Head::Object, "case"));
        let mut obj = piece(&c.object, &c.object, Upos::Noun, Head::Verb, "obl");
        obj.role = Some(Head::Object);
        p.push(obj);
    }
    p.push(piece(".", ".", Upos::Punct, Head::Verb, "punct"));
    p
}

const DISTRACTORS: [&[(&str, &str, Upos, usize, &str)]; 3] = [
    &[
        ("I", "I", Upos::Pron, 2, "nsubj"),
        ("love", "love", Upos::Verb, 0, "root"),
        ("this", "this", Upos::Det, 4, "det"),
        ("kindle", "kindle", Upos::Propn, 2, "obj"),
        (".", ".", Upos::Punct, 2, "punct"),
    ],
    &[
        ("The", "the", Upos::Det, 2, "det"),
        ("screen", "screen", Upos::Noun, 4, "nsubj"),
        ("is", "be", Upos::Aux, 4, "cop"),
        ("great", "great", Upos::Adj, 0, "root"),
        (".", ".", Upos::Punct, 4, "punct"),
    ],
    &[
        ("It", "it", Upos::Pron, 4, "nsubj"),
        ("was", "be", Upos::Aux, 4, "cop"),
        ("a", "a", Upos::Det, 4, "det"),
        ("gift", "gift", Upos::Noun, 0, "root"),
        (".", ".", Upos::Punct, 4, "punct"),
    ],
];

fn render(tokens: Vec<Token>, review_id: &str, sentence_index: usize) -> ParsedSentence {
    let mut text = String::new();
    for (i, t) in tokens.iter().enumerate() {
        if i > 0 && t.upos != Upos::Punct {
            text.push(' ');
        }
        text.push_str(&t.surface);
    }
    ParsedSentence {
        review_id: review_id.into(),
        sentence_index,
        text: Some(text),
        tokens,
    }
}

fn resolve(pieces: Vec<Piece>) -> Vec<Token> {
    let find = |h: Head| -> usize {
        pieces
            .iter()
            .position(|p| matches!((p.role, h), (Some(Head::Verb), Head::Verb) | (Some(Head::Receiver), Head::Receiver) | (Some(Head::Object), Head::Object)))
            .map_or(0, |i| i + 1)
    };
    pieces
        .iter()
        .enumerate()
        .map(|(i, p)| Token {
            index: i + 1,
            surface: p.surface.clone(),
            lemma: p.lemma.clone(),
            upos: p.upos,
            head: match p.head {
                Head::Root => 0,
                h => find(h),
            },
            deprel: p.deprel.into(),
        })
        .collect()
}

/// Template pool for one (affordance, pole): (name, tokens).
type Pool = Vec<(String, Vec<Token>)>;

fn template_pools(spec: &SynthSpec) -> Result<Vec<[Pool; 2]>, SynthError> {
    match &spec.templates {
        None => Ok(spec
            .affordances
            .iter()
            .map(|a| {
                let build = |vs: &[(Variant, &str)]| -> Pool {
                    vs.iter()
                        .map(|(v, name)| (name.to_string(), resolve(builtin_sentence(a, *v))))
                        .collect()
                };
                [build(&LOW_VARIANTS), build(&HIGH_VARIANTS)]
            })
            .collect()),
        Some(bank) => {
            let mut pools: Vec<[Pool; 2]> = spec.affordances.iter().map(|_| [Vec::new(), Vec::new()]).collect();
            let index: BTreeMap<String, usize> =
                spec.affordances.iter().enumerate().map(|(i, a)| (a.key().to_string(), i)).collect();
            for (n, t) in bank.iter().enumerate() {
                let Some(&i) = index.get(&t.key) else {
                    return Err(invalid(format!("templates[{n}].key"), format!("'{}' is not an affordance of this spec", t.key)));
                };
                let text = format!("# review_id = template\n{}", t.conllu);
                let rep = parse_conllu(text.as_bytes()).map_err(|e| SynthError::BadTemplate {
                    key: t.key.clone(),
                    message: e.to_string(),
                })?;
                let [s] = rep.sentences.as_slice() else {
                    let detail = rep.diagnostics.first().map(|d| format!(" ({d})")).unwrap_or_default();
                    return Err(SynthError::BadTemplate {
                        key: t.key.clone(),
                        message: format!("expected exactly one sentence, found {}{detail}", rep.sentences.len()),
                    });
                };
                let slot = usize::from(t.pole == Pole::HighPole);
                pools[i][slot].push((format!("bank_{n}"), s.tokens.clone()));
            }
            for (a, p) in spec.affordances.iter().zip(&pools) {
                for (slot, pole) in [(0, Pole::LowPole), (1, Pole::HighPole)] {
                    if p[slot].is_empty() {
                        return Err(SynthError::MissingTemplate {
                            key: a.key().to_string(),
                            pole,
                        });
                    }
                }
            }
            Ok(pools)
        }
    }
}

/// Generate reviews, gold parses and the ground-truth manifest. The action
/// verbs must not be listed as non-action in `lex`, or the planted mentions
/// could never be recovered.
pub fn generate_corpus(spec: &SynthSpec, lex: &LexiconSet, thresholds: KanoThresholds) -> Result<SynthCorpus, SynthError> {
    spec.validate()?;
    for (i, a) in spec.affordances.iter().enumerate() {
        if lex.is_non_action(&a.action.to_lowercase()) {
            return Err(invalid(format!("affordances[{i}].action"), format!("'{}' is a non-action verb", a.action)));
        }
    }
    let pools = template_pools(spec)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    // text choices on their own stream keep the model draws identical to
    // simulate_data
    let mut text_rng = ChaCha8Rng::seed_from_u64(spec.seed);
    text_rng.set_stream(1);
    let days = (spec.end - spec.start).num_days().max(1) as usize;
    let width = spec.n_reviews.to_string().len().max(6);
    let mut reviews = Vec::with_capacity(spec.n_reviews);
    let mut sentences = Vec::new();
    let mut planted: Vec<Vec<PlantedMention>> = vec![Vec::new(); spec.affordances.len()];

    for r in 0..spec.n_reviews {
        let id = format!("{}-{:0width$}", spec.product_id, r);
        // same draw order as simulate_data: poles, then rating
        let poles: Vec<Option<Pole>> = spec.affordances.iter().map(|a| draw_pole(a, &mut rng)).collect();
        let x1: Vec<bool> = poles.iter().map(|p| *p == Some(Pole::LowPole)).collect();
        let x2: Vec<bool> = poles.iter().map(|p| *p == Some(Pole::HighPole)).collect();
        let stars = sample_rating(&x1, &x2, spec, &mut rng);

        let mut review_sentences = Vec::new();
        for (i, pole) in poles.iter().enumerate() {
            let Some(pole) = pole else { continue };
            let pool = &pools[i][usize::from(*pole == Pole::HighPole)];
            let (name, tokens) = &pool[text_rng.gen_range(0..pool.len())];
            let idx = review_sentences.len();
            planted[i].push(PlantedMention {
                review_id: id.clone(),
                sentence_index: idx,
                pole: *pole,
                template: name.clone(),
            });
            review_sentences.push(render(tokens.clone(), &id, idx));
        }
        if review_sentences.is_empty() || text_rng.gen::<f64>() < spec.distractor_prob {
            let d = DISTRACTORS[text_rng.gen_range(0..DISTRACTORS.len())];
            let tokens = d
                .iter()
                .enumerate()
                .map(|(i, (s, l, u, h, rel))| Token {
                    index: i + 1,
                    surface: s.to_string(),
                    lemma: l.to_string(),
                    upos: *u,
                    head: *h,
                    deprel: rel.to_string(),
                })
                .collect();
            review_sentences.push(render(tokens, &id, review_sentences.len()));
        }
        let body = review_sentences
            .iter()
            .filter_map(|s| s.text.clone())
            .collect::<Vec<_>>()
            .join(" ");
        let helpful_votes = text_rng.gen_range(1..20);
        reviews.push(ReviewRecord {
            id,
            body,
            stars,
            posted_at: spec.start + chrono::Duration::days((r * days / spec.n_reviews) as i64),
            verified: true,
            helpful_votes,
            product_id: spec.product_id.clone(),
        });
        sentences.extend(review_sentences);
    }

    let manifest = Manifest {
        seed: spec.seed,
        rng: RNG_NAME.into(),
        product_id: spec.product_id.clone(),
        n_reviews: spec.n_reviews,
        cutpoints: spec.cutpoints,
        thresholds,
        affordances: spec
            .affordances
            .iter()
            .zip(planted)
            .map(|(a, planted_mentions)| {
                let (k, m) = compute_km(a.alpha, a.beta);
                ManifestAffordance {
                    key: a.key().to_string(),
                    alpha: a.alpha,
                    beta: a.beta,
                    category: classify(k, m, thresholds),
                    planted_mentions,
                }
            })
            .collect(),
    };
    Ok(SynthCorpus {
        reviews,
        sentences,
        manifest,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extractor::extract_affordances;
    use crate::linguistics::write_conllu;

    fn spec(n: usize) -> SynthSpec {
        SynthSpec {
            n_reviews: n,
            affordances: vec![SynthAffordance {
                action: "read".into(),
                receiver: Some("book".into()),
                context: Some(SynthContext {
                    preposition: "at".into(),
                    object: "night".into(),
                }),
                alpha: -1.36,
                beta: 1.02,
                p_low: 0.3,
                p_high: 0.4,
            }],
            cutpoints: [-1.0, 0.0, 0.5, 1.5],
            seed: 7,
            product_id: "kp".into(),
            start: default_start(),
            end: default_end(),
            distractor_prob: 0.3,
            templates: None,
        }
    }

    #[test]
    fn bookkeeping() {
        let c = generate_corpus(&spec(10), &LexiconSet::seed(), KanoThresholds::default()).unwrap();
        assert_eq!(c.reviews.len(), 10);
        assert!(c.manifest.affordances[0].planted_mentions.len() <= 10);
        assert_eq!(c.manifest.affordances[0].category, KanoCategory::Performance);
        assert_eq!(c.manifest.affordances[0].key, "read/book/at-night");
        assert_eq!(c.manifest.rng, RNG_NAME);
    }

    #[test]
    fn deterministic_and_seed_sensitive() {
        let lex = LexiconSet::seed();
        let t = KanoThresholds::default();
        let a = generate_corpus(&spec(200), &lex, t).unwrap();
        let b = generate_corpus(&spec(200), &lex, t).unwrap();
        assert_eq!(a, b);
        let mut s = spec(200);
        s.seed = 8;
        let c = generate_corpus(&s, &lex, t).unwrap();
        assert_ne!(a.reviews, c.reviews);
    }

    #[test]
    fn text_free_simulation_matches_corpus_ratings() {
        let s = spec(300);
        let d = simulate_data(&s).unwrap();
        let c = generate_corpus(&s, &LexiconSet::seed(), KanoThresholds::default()).unwrap();
        assert_eq!(d.y, c.reviews.iter().map(|r| r.stars).collect::<Vec<_>>());
    }

    #[test]
    fn planted_mentions_are_extracted_with_their_pole() {
        let lex = LexiconSet::seed();
        let c = generate_corpus(&spec(200), &lex, KanoThresholds::default()).unwrap();
        for pm in &c.manifest.affordances[0].planted_mentions {
            let s = c
                .sentences
                .iter()
                .find(|s| s.review_id == pm.review_id && s.sentence_index == pm.sentence_index)
                .unwrap();
            let ms = extract_affordances(s, &lex);
            assert_eq!(ms.len(), 1, "{:?}", s.text);
            assert_eq!(crate::aggregator::canonicalize(&ms[0]).to_string(), "read/book/at-night");
            assert_eq!(crate::aggregator::assign_polarity(&ms[0], &lex).0, pm.pole);
        }
        // the gold parses survive a CoNLL-U round trip
        let text = write_conllu(&c.sentences);
        assert_eq!(parse_conllu(text.as_bytes()).unwrap().sentences, c.sentences);
    }

    #[test]
    fn builtin_sentences_are_valid_trees() {
        for d in DISTRACTORS {
            let tokens = d
                .iter()
                .enumerate()
                .map(|(i, (s, l, u, h, rel))| Token {
                    index: i + 1,
                    surface: s.to_string(),
                    lemma: l.to_string(),
                    upos: *u,
                    head: *h,
                    deprel: rel.to_string(),
                })
                .collect();
            render(tokens, "d", 0).validate().unwrap();
        }
        let a = &spec(1).affordances[0];
        for (v, _) in LOW_VARIANTS.iter().chain(&HIGH_VARIANTS) {
            render(resolve(builtin_sentence(a, *v)), "t", 0).validate().unwrap();
        }
    }

    #[test]
    fn degenerate_cutpoints_give_five_stars() {
        let mut s = spec(1);
        s.cutpoints = [40.0, 40.0, 40.0, 40.0];
        s.affordances[0].p_low = 0.0;
        s.affordances[0].p_high = 0.0;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            assert_eq!(sample_rating(&[false], &[false], &s, &mut rng), 5);
        }
    }

    #[test]
    fn empirical_frequencies_match_model() {
        let mut s = spec(1);
        s.cutpoints = [-(4.0f64).ln(), -0.4, 0.4, (4.0f64).ln()];
        let probs = category_probs(0.0, &s.params());
        let n = 100_000;
        let mut counts = [0usize; 5];
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..n {
            counts[sample_rating(&[false], &[false], &s, &mut rng) as usize - 1] += 1;
        }
        for (c, p) in counts.iter().zip(probs) {
            let sd = (n as f64 * p * (1.0 - p)).sqrt();
            assert!((*c as f64 - n as f64 * p).abs() < 3.0 * sd, "{counts:?} vs {probs:?}");
        }
    }

    #[test]
    fn validation_names_fields() {
        let mut s = spec(10);
        s.affordances[0].p_low = 0.8;
        s.affordances[0].p_high = 0.3;
        assert!(matches!(s.validate(), Err(SynthError::Invalid { field, .. }) if field == "affordances[0].p_high"));
        let mut s = spec(10);
        s.cutpoints = [1.0, 0.0, 0.0, 0.0];
        assert!(matches!(s.validate(), Err(SynthError::Invalid { field, .. }) if field == "cutpoints"));
        let mut s = spec(10);
        s.affordances[0].action = "love".into();
        assert!(generate_corpus(&s, &LexiconSet::seed(), KanoThresholds::default()).is_err());
    }

    #[test]
    fn template_bank_must_cover_both_poles() {
        let mut s = spec(5);
        s.templates = Some(vec![Template {
            key: "read/book/at-night".into(),
            pole: Pole::HighPole,
            conllu: "1\tI\tI\tPRON\t_\t_\t2\tnsubj\t_\t_\n2\tread\tread\tVERB\t_\t_\t0\troot\t_\t_\n".into(),
        }]);
        let err = generate_corpus(&s, &LexiconSet::seed(), KanoThresholds::default()).unwrap_err();
        assert_eq!(
            err,
            SynthError::MissingTemplate {
                key: "read/book/at-night".into(),
                pole: Pole::LowPole
            }
        );
    }
}
