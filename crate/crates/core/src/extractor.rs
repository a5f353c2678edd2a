//! Rule-based extraction of affordance mentions.
//!
//! A mention fills the description form
//! `afford the ability to [action word] [action receiver] [perceived quality] [usage context]`.
//! Action words are found first; the receiver, quality and context rules
//! are then evaluated relative to each action word, in that order.
//!
//! Every rule is a predicate over (sentence, lexicons, token indices). The
//! extractor searches candidates with the predicates and records which one
//! fired, so [`replay`] can re-check any stored mention against the same
//! predicates.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::linguistics::{LexiconSet, ParsedSentence, Token, Upos};
use crate::par::{self, Exec};

/// Lemmas that mark a negated action when attached as adverbial modifiers.
pub const NEGATION_LEMMAS: [&str; 4] = ["not", "n't", "never", "no"];

const ACTION_SUFFIXES: [&str; 4] = ["ity", "ility", "ilities", "able"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleId {
    /// A verb outside the non-action list.
    ActionVerb,
    /// A noun/adjective with an action suffix, derived from a verb.
    ActionDerived,
    /// Direct object of the action word.
    ReceiverObject,
    /// Action word is a clausal modifier (with its own subject) of a noun.
    ReceiverClausal,
    /// Antonym-bearing adverb modifying a verbal/adjectival action word.
    QualityAdverb,
    /// Antonym-bearing adjective describing a nominal action word.
    QualityAdjective,
    /// Adjective that is the open clausal complement of the action word.
    QualityOpenComplement,
    /// Negation of the action word.
    QualityNegation,
    /// Positional preposition governing a nominal in the action's subtree.
    ContextPositional,
}

/// The rules in evaluation order.
pub const RULE_TABLE: [(RuleId, &str); 9] = [
    (RuleId::ActionVerb, "IF w is a verb AND w is not stative/emotional THEN w is an action word"),
    (RuleId::ActionDerived, "IF w is a noun/adjective with suffix -ity/-ility/-ilities/-able AND w derives from a verb THEN w is an action word"),
    (RuleId::ReceiverObject, "IF w is the object of action word h THEN w is the action receiver"),
    (RuleId::ReceiverClausal, "IF action word w is a clausal modifier of noun h AND w has its own subject THEN h is the action receiver"),
    (RuleId::QualityAdverb, "IF w is an adverb AND its head is a verbal/adjectival action word AND w has an antonym THEN w is a perceived quality"),
    (RuleId::QualityAdjective, "IF w is an adjective describing a nominal action word AND w has an antonym THEN w is a perceived quality"),
    (RuleId::QualityOpenComplement, "IF w is an adjective AND the open clausal complement of action word h THEN w is a perceived quality"),
    (RuleId::QualityNegation, "IF w negates action word h THEN w is a perceived quality (negated)"),
    (RuleId::ContextPositional, "IF w is a positional preposition governing the object h THEN (w, h) is a usage context"),
];

/// Which rule produced each element of a mention.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RulesFired {
    pub action: RuleId,
    pub receiver: Option<RuleId>,
    pub quality: Option<RuleId>,
    pub context: Option<RuleId>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct UsageContext {
    pub preposition: String,
    pub object: String,
}

/// Token indices behind each element, for auditing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MentionTokens {
    pub action: usize,
    pub receiver: Option<usize>,
    pub quality: Option<usize>,
    pub context_preposition: Option<usize>,
    pub context_object: Option<usize>,
}

/// One extracted affordance description from one sentence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AffordanceMention {
    pub review_id: String,
    pub sentence_index: usize,
    /// Verb lemma of the action. Derived words (`readability`) are
    /// replaced by their source verb (`read`).
    pub action_word: String,
    pub action_receiver: Option<String>,
    /// Quality lemma; absent for a bare negation.
    pub perceived_quality: Option<String>,
    pub negated: bool,
    pub usage_context: Option<UsageContext>,
    /// Byte offsets into the sentence text covering all involved tokens.
    pub char_span: (usize, usize),
    pub tokens: MentionTokens,
    pub rule_fired: RulesFired,
}

fn lemma(t: &Token) -> String {
    t.norm_lemma()
}

fn has_action_suffix(t: &Token) -> bool {
    let surface = t.surface.to_lowercase();
    let lem = lemma(t);
    ACTION_SUFFIXES.iter().any(|suf| surface.ends_with(suf) || lem.ends_with(suf))
}

/// Action-word rule for one token: which rule fired and the verb lemma.
pub fn action_rule(t: &Token, lex: &LexiconSet) -> Option<(RuleId, String)> {
    let lem = lemma(t);
    match t.upos {
        Upos::Verb if !lex.is_non_action(&lem) => Some((RuleId::ActionVerb, lem)),
        Upos::Noun | Upos::Adj if has_action_suffix(t) => {
            let verb = lex.derivations.get(&lem)?;
            (!lex.is_non_action(verb)).then(|| (RuleId::ActionDerived, verb.clone()))
        }
        _ => None,
    }
}

pub fn identify_action_words(s: &ParsedSentence, lex: &LexiconSet) -> Vec<usize> {
    s.tokens.iter().filter(|t| action_rule(t, lex).is_some()).map(|t| t.index).collect()
}

fn is_negation(t: &Token) -> bool {
    let lem = lemma(t);
    NEGATION_LEMMAS.contains(&lem.as_str()) && (matches!(t.base_rel(), "advmod" | "neg") || t.upos == Upos::Part)
}

/// Receiver rules, checked for a candidate receiver `w` of action `action`.
pub fn check_receiver(s: &ParsedSentence, action: usize, w: usize, rule: RuleId) -> bool {
    let (Some(a), Some(wt)) = (s.token(action), s.token(w)) else {
        return false;
    };
    match rule {
        RuleId::ReceiverObject => wt.head == action && wt.base_rel() == "obj",
        RuleId::ReceiverClausal => {
            a.head == w
                && a.base_rel() == "acl"
                && wt.upos.is_nominal()
                && s.children(action).any(|c| c.base_rel() == "nsubj")
        }
        _ => false,
    }
}

pub fn identify_action_receiver(s: &ParsedSentence, action: usize) -> Option<usize> {
    receiver_with_rule(s, action).map(|(i, _)| i)
}

fn receiver_with_rule(s: &ParsedSentence, action: usize) -> Option<(usize, RuleId)> {
    if let Some(obj) = s
        .children(action)
        .find(|c| check_receiver(s, action, c.index, RuleId::ReceiverObject))
    {
        return Some((obj.index, RuleId::ReceiverObject));
    }
    let head = s.token(action)?.head;
    (head != 0 && check_receiver(s, action, head, RuleId::ReceiverClausal)).then_some((head, RuleId::ReceiverClausal))
}

/// Adjectival predicate of a copular clause whose subject is `action`
/// (`the readability is great`: `great` heads `readability`).
fn copular_predicate(s: &ParsedSentence, action: usize) -> Option<usize> {
    let a = s.token(action)?;
    if a.base_rel() != "nsubj" || a.head == 0 {
        return None;
    }
    let h = s.token(a.head)?;
    (h.upos == Upos::Adj && s.children(h.index).any(|c| c.base_rel() == "cop")).then_some(h.index)
}

/// Quality rules, checked for candidate `w` of action `action`.
pub fn check_quality(s: &ParsedSentence, lex: &LexiconSet, action: usize, w: usize, rule: RuleId) -> bool {
    let (Some(a), Some(wt)) = (s.token(action), s.token(w)) else {
        return false;
    };
    if action_rule(a, lex).is_none() {
        return false;
    }
    let attached = wt.head == action;
    match rule {
        RuleId::QualityNegation => attached && is_negation(wt),
        RuleId::QualityAdverb => {
            attached
                && wt.upos == Upos::Adv
                && matches!(a.upos, Upos::Verb | Upos::Adj)
                && !is_negation(wt)
                && lex.has_antonym(&lemma(wt))
        }
        RuleId::QualityAdjective => {
            let describes = (attached && wt.base_rel() != "xcomp") || copular_predicate(s, action) == Some(w);
            describes && wt.upos == Upos::Adj && a.upos.is_nominal() && lex.has_antonym(&lemma(wt))
        }
        RuleId::QualityOpenComplement => attached && wt.upos == Upos::Adj && wt.base_rel() == "xcomp",
        _ => false,
    }
}

const QUALITY_RULES: [RuleId; 3] = [RuleId::QualityAdverb, RuleId::QualityAdjective, RuleId::QualityOpenComplement];

fn qualities_with_rule(s: &ParsedSentence, lex: &LexiconSet, action: usize) -> Vec<(usize, bool, RuleId)> {
    let mut candidates: Vec<usize> = s.children(action).map(|c| c.index).collect();
    if let Some(pred) = copular_predicate(s, action) {
        candidates.push(pred);
    }
    candidates.sort_unstable();

    let negation = candidates
        .iter()
        .copied()
        .find(|&w| check_quality(s, lex, action, w, RuleId::QualityNegation));
    let qualities: Vec<(usize, RuleId)> = candidates
        .iter()
        .filter_map(|&w| {
            QUALITY_RULES
                .iter()
                .copied()
                .find(|&r| check_quality(s, lex, action, w, r))
                .map(|r| (w, r))
        })
        .collect();
    match negation {
        // the negation flips the qualities instead of standing alone
        Some(_) if !qualities.is_empty() => qualities.into_iter().map(|(w, r)| (w, true, r)).collect(),
        Some(n) => vec![(n, true, RuleId::QualityNegation)],
        None => qualities.into_iter().map(|(w, r)| (w, false, r)).collect(),
    }
}

pub fn identify_perceived_quality(s: &ParsedSentence, action: usize, lex: &LexiconSet) -> Vec<(usize, bool)> {
    qualities_with_rule(s, lex, action)
        .into_iter()
        .map(|(w, neg, _)| (w, neg))
        .collect()
}

/// A prepositional phrase: (preposition token, object token, anchor token
/// whose head chain decides attachment).
fn prepositional_phrases(s: &ParsedSentence, lex: &LexiconSet) -> Vec<(usize, usize, usize)> {
    let mut out = Vec::new();
    for t in &s.tokens {
        // UD: object nominal heads the preposition via `case`
        if matches!(t.base_rel(), "obl" | "nmod") {
            if let Some(p) = s
                .children(t.index)
                .find(|c| c.base_rel() == "case" && lex.is_positional(&lemma(c)))
            {
                out.push((p.index, t.index, t.index));
            }
        }
        // legacy: preposition heads its object via `pobj`
        if t.base_rel() == "prep" && lex.is_positional(&lemma(t)) {
            if let Some(o) = s.children(t.index).find(|c| c.base_rel() == "pobj") {
                out.push((t.index, o.index, t.index));
            }
        }
    }
    out.sort_unstable();
    out
}

/// Nearest action word dominating `anchor`.
fn owning_action(s: &ParsedSentence, actions: &[usize], anchor: usize) -> Option<usize> {
    s.ancestors(anchor).into_iter().find(|h| actions.contains(h))
}

pub fn check_context(s: &ParsedSentence, lex: &LexiconSet, action: usize, prep: usize, object: usize) -> bool {
    let actions = identify_action_words(s, lex);
    prepositional_phrases(s, lex)
        .into_iter()
        .any(|(p, o, anchor)| p == prep && o == object && owning_action(s, &actions, anchor) == Some(action))
}

fn contexts_by_action(s: &ParsedSentence, lex: &LexiconSet, actions: &[usize]) -> BTreeMap<usize, Vec<(usize, usize)>> {
    let mut out: BTreeMap<usize, Vec<(usize, usize)>> = BTreeMap::new();
    for (p, o, anchor) in prepositional_phrases(s, lex) {
        if let Some(a) = owning_action(s, actions, anchor) {
            out.entry(a).or_default().push((p, o));
        }
    }
    out
}

pub fn identify_usage_context(s: &ParsedSentence, action: usize, lex: &LexiconSet) -> Vec<(String, String)> {
    let actions = identify_action_words(s, lex);
    contexts_by_action(s, lex, &actions)
        .remove(&action)
        .unwrap_or_default()
        .into_iter()
        .map(|(p, o)| (lemma(&s.tokens[p - 1]), lemma(&s.tokens[o - 1])))
        .collect()
}

/// All mentions in one sentence: one per (action word, quality, context)
/// combination, with absent elements left empty.
pub fn extract_affordances(s: &ParsedSentence, lex: &LexiconSet) -> Vec<AffordanceMention> {
    let actions = identify_action_words(s, lex);
    if actions.is_empty() {
        return Vec::new();
    }
    let contexts = contexts_by_action(s, lex, &actions);
    let spans = s.token_spans();
    let lem = |i: usize| lemma(&s.tokens[i - 1]);
    let mut out = Vec::new();
    for &a in &actions {
        let Some((action_rule_id, verb)) = action_rule(&s.tokens[a - 1], lex) else {
            continue;
        };
        let receiver = receiver_with_rule(s, a);
        let mut qualities: Vec<Option<(usize, bool, RuleId)>> =
            qualities_with_rule(s, lex, a).into_iter().map(Some).collect();
        if qualities.is_empty() {
            qualities.push(None);
        }
        let mut ctxs: Vec<Option<(usize, usize)>> =
            contexts.get(&a).cloned().unwrap_or_default().into_iter().map(Some).collect();
        if ctxs.is_empty() {
            ctxs.push(None);
        }
        for q in &qualities {
            for c in &ctxs {
                let (quality, quality_index, negated, quality_rule) = match *q {
                    Some((w, neg, RuleId::QualityNegation)) => (None, Some(w), neg, Some(RuleId::QualityNegation)),
                    Some((w, neg, r)) => (Some(lem(w)), Some(w), neg, Some(r)),
                    None => (None, None, false, None),
                };
                let involved: Vec<usize> = std::iter::once(a)
                    .chain(receiver.map(|(r, _)| r))
                    .chain(quality_index)
                    .chain(c.iter().flat_map(|&(p, o)| [p, o]))
                    .collect();
                let start = involved.iter().map(|&i| spans[i - 1].0).min().unwrap_or(0);
                let end = involved.iter().map(|&i| spans[i - 1].1).max().unwrap_or(0);
                out.push(AffordanceMention {
                    review_id: s.review_id.clone(),
                    sentence_index: s.sentence_index,
                    action_word: verb.clone(),
                    action_receiver: receiver.map(|(r, _)| lem(r)),
                    perceived_quality: quality,
                    negated,
                    usage_context: c.map(|(p, o)| UsageContext {
                        preposition: lem(p),
                        object: lem(o),
                    }),
                    char_span: (start, end),
                    tokens: MentionTokens {
                        action: a,
                        receiver: receiver.map(|(r, _)| r),
                        quality: quality_index,
                        context_preposition: c.map(|(p, _)| p),
                        context_object: c.map(|(_, o)| o),
                    },
                    rule_fired: RulesFired {
                        action: action_rule_id,
                        receiver: receiver.map(|(_, r)| r),
                        quality: quality_rule,
                        context: c.map(|_| RuleId::ContextPositional),
                    },
                });
            }
        }
    }
    out
}

/// Extract from many sentences, keeping input order.
pub fn extract_all(sentences: &[ParsedSentence], lex: &LexiconSet, exec: Exec) -> Vec<AffordanceMention> {
    par::map(exec, sentences, |s| extract_affordances(s, lex))
        .into_iter()
        .flatten()
        .collect()
}

/// Re-check a stored mention against the rule it claims fired.
pub fn replay(s: &ParsedSentence, m: &AffordanceMention, lex: &LexiconSet) -> Result<(), String> {
    let t = &m.tokens;
    let action = s.token(t.action).ok_or("action index out of range")?;
    match action_rule(action, lex) {
        Some((rule, verb)) if rule == m.rule_fired.action && verb == m.action_word => {}
        other => return Err(format!("action rule does not reproduce: {:?}", other)),
    }
    match (t.receiver, m.rule_fired.receiver) {
        (Some(r), Some(rule)) if check_receiver(s, t.action, r, rule) => {}
        (None, None) => {}
        other => return Err(format!("receiver rule does not reproduce: {:?}", other)),
    }
    match (t.quality, m.rule_fired.quality) {
        (Some(q), Some(rule)) if check_quality(s, lex, t.action, q, rule) => {}
        (None, None) => {}
        other => return Err(format!("quality rule does not reproduce: {:?}", other)),
    }
    match (t.context_preposition, t.context_object, m.rule_fired.context) {
        (Some(p), Some(o), Some(RuleId::ContextPositional)) if check_context(s, lex, t.action, p, o) => {}
        (None, None, None) => {}
        other => return Err(format!("context rule does not reproduce: {:?}", other)),
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linguistics::parse_conllu;

    fn sent(conllu: &str) -> ParsedSentence {
        let text = format!("# review_id = t\n{}\n", conllu.trim());
        let rep = parse_conllu(text.as_bytes()).unwrap();
        assert!(rep.diagnostics.is_empty(), "{:?}", rep.diagnostics);
        rep.sentences.into_iter().next().unwrap()
    }

    fn rows(spec: &[(&str, &str, &str, usize, &str)]) -> ParsedSentence {
        let body: String = spec
            .iter()
            .enumerate()
            .map(|(i, (form, lemma, upos, head, rel))| {
                format!("{}\t{}\t{}\t{}\t_\t_\t{}\t{}\t_\t_\n", i + 1, form, lemma, upos, head, rel)
            })
            .collect();
        sent(&body)
    }

    #[test]
    fn emotional_verb_is_not_an_action() {
        // I love this kindle
        let s = rows(&[
            ("I", "I", "PRON", 2, "nsubj"),
            ("love", "love", "VERB", 0, "root"),
            ("this", "this", "DET", 4, "det"),
            ("kindle", "kindle", "PROPN", 2, "obj"),
        ]);
        let lex = LexiconSet::seed();
        assert!(identify_action_words(&s, &lex).is_empty());
        assert!(extract_affordances(&s, &lex).is_empty());
    }

    #[test]
    fn suffix_alone_is_not_enough() {
        // the city is great
        let s = rows(&[
            ("the", "the", "DET", 2, "det"),
            ("city", "city", "NOUN", 4, "nsubj"),
            ("is", "be", "AUX", 4, "cop"),
            ("great", "great", "ADJ", 0, "root"),
        ]);
        assert!(identify_action_words(&s, &LexiconSet::seed()).is_empty());
    }

    #[test]
    fn derived_noun_is_an_action() {
        // the readability is great
        let s = rows(&[
            ("the", "the", "DET", 2, "det"),
            ("readability", "readability", "NOUN", 4, "nsubj"),
            ("is", "be", "AUX", 4, "cop"),
            ("great", "great", "ADJ", 0, "root"),
        ]);
        let lex = LexiconSet::seed();
        assert_eq!(identify_action_words(&s, &lex), vec![2]);
        let m = extract_affordances(&s, &lex);
        assert_eq!(m.len(), 1);
        assert_eq!(m[0].action_word, "read");
        assert_eq!(m[0].rule_fired.action, RuleId::ActionDerived);
        assert_eq!(m[0].perceived_quality, None);
    }

    #[test]
    fn clausal_receiver() {
        // the books I download
        let s = rows(&[
            ("the", "the", "DET", 2, "det"),
            ("books", "book", "NOUN", 0, "root"),
            ("I", "I", "PRON", 4, "nsubj"),
            ("download", "download", "VERB", 2, "acl:relcl"),
        ]);
        assert_eq!(identify_action_receiver(&s, 4), Some(2));
    }

    #[test]
    fn no_receiver() {
        // it just works
        let s = rows(&[
            ("it", "it", "PRON", 3, "nsubj"),
            ("just", "just", "ADV", 3, "advmod"),
            ("works", "work", "VERB", 0, "root"),
        ]);
        let lex = LexiconSet::seed();
        assert_eq!(identify_action_receiver(&s, 3), None);
        assert!(identify_perceived_quality(&s, 3, &lex).is_empty());
    }

    #[test]
    fn negation_flips_adverb_instead_of_standing_alone() {
        // it does n't turn smoothly
        let s = rows(&[
            ("it", "it", "PRON", 4, "nsubj"),
            ("does", "do", "AUX", 4, "aux"),
            ("n't", "not", "PART", 4, "advmod"),
            ("turn", "turn", "VERB", 0, "root"),
            ("smoothly", "smoothly", "ADV", 4, "advmod"),
        ]);
        let lex = LexiconSet::seed();
        assert_eq!(identify_perceived_quality(&s, 4, &lex), vec![(5, true)]);
        let m = extract_affordances(&s, &lex);
        assert_eq!(m.len(), 1);
        assert_eq!(m[0].perceived_quality.as_deref(), Some("smoothly"));
        assert!(m[0].negated);
    }

    #[test]
    fn about_is_not_positional() {
        // think about it
        let s = rows(&[
            ("think", "think", "VERB", 0, "root"),
            ("about", "about", "ADP", 3, "case"),
            ("it", "it", "PRON", 1, "obl"),
        ]);
        assert!(identify_usage_context(&s, 1, &LexiconSet::seed()).is_empty());
    }

    #[test]
    fn legacy_prep_pobj_context() {
        // read on the beach, Stanford-style
        let s = rows(&[
            ("read", "read", "VERB", 0, "root"),
            ("on", "on", "ADP", 1, "prep"),
            ("the", "the", "DET", 4, "det"),
            ("beach", "beach", "NOUN", 2, "pobj"),
        ]);
        let lex = LexiconSet::seed();
        assert_eq!(identify_usage_context(&s, 1, &lex), vec![("on".to_string(), "beach".to_string())]);
        let m = extract_affordances(&s, &lex);
        replay(&s, &m[0], &lex).unwrap();
    }

    #[test]
    fn context_attaches_to_nearest_dominating_action() {
        // I bought it to read at night: "at night" under read, not buy
        let s = rows(&[
            ("I", "I", "PRON", 2, "nsubj"),
            ("bought", "buy", "VERB", 0, "root"),
            ("it", "it", "PRON", 2, "obj"),
            ("to", "to", "PART", 5, "mark"),
            ("read", "read", "VERB", 2, "advcl"),
            ("at", "at", "ADP", 7, "case"),
            ("night", "night", "NOUN", 5, "obl"),
        ]);
        let lex = LexiconSet::seed();
        assert!(identify_usage_context(&s, 2, &lex).is_empty());
        assert_eq!(identify_usage_context(&s, 5, &lex).len(), 1);
    }

    #[test]
    fn replay_rejects_tampered_mentions() {
        let s = rows(&[
            ("read", "read", "VERB", 0, "root"),
            ("books", "book", "NOUN", 1, "obj"),
        ]);
        let lex = LexiconSet::seed();
        let mut m = extract_affordances(&s, &lex).remove(0);
        replay(&s, &m, &lex).unwrap();
        m.rule_fired.receiver = Some(RuleId::ReceiverClausal);
        assert!(replay(&s, &m, &lex).is_err());
    }

    #[test]
    fn rule_table_is_in_evaluation_order() {
        let ids: Vec<RuleId> = RULE_TABLE.iter().map(|(id, _)| *id).collect();
        let mut sorted = ids.clone();
        sorted.sort();
        assert_eq!(ids, sorted);
    }
}
