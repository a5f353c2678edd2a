//! Dependency-parsed sentences and the lexical resources the extraction
//! rules consult.
//!
//! Sentences arrive as CoNLL-U. Relation labels are normalized to Universal
//! Dependencies v2 names through a [`RelationAliases`] table, so corpora
//! parsed with older Stanford-style label sets still work.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::Diagnostic;

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("lexicon directory not found: {0}")]
    DirNotFound(String),
    #[error("missing lexicon file {0}")]
    MissingFile(String),
    #[error("polarity table gives {0:?} and its antonym {1:?} the same pole")]
    InconsistentPolarity(String, String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Universal Dependencies part-of-speech tags.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Upos {
    Adj,
    Adp,
    Adv,
    Aux,
    Cconj,
    Det,
    Intj,
    Noun,
    Num,
    Part,
    Pron,
    Propn,
    Punct,
    Sconj,
    Sym,
    Verb,
    X,
}

impl Upos {
    pub const ALL: [Upos; 17] = [
        Upos::Adj,
        Upos::Adp,
        Upos::Adv,
        Upos::Aux,
        Upos::Cconj,
        Upos::Det,
        Upos::Intj,
        Upos::Noun,
        Upos::Num,
        Upos::Part,
        Upos::Pron,
        Upos::Propn,
        Upos::Punct,
        Upos::Sconj,
        Upos::Sym,
        Upos::Verb,
        Upos::X,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Upos::Adj => "ADJ",
            Upos::Adp => "ADP",
            Upos::Adv => "ADV",
            Upos::Aux => "AUX",
            Upos::Cconj => "CCONJ",
            Upos::Det => "DET",
            Upos::Intj => "INTJ",
            Upos::Noun => "NOUN",
            Upos::Num => "NUM",
            Upos::Part => "PART",
            Upos::Pron => "PRON",
            Upos::Propn => "PROPN",
            Upos::Punct => "PUNCT",
            Upos::Sconj => "SCONJ",
            Upos::Sym => "SYM",
            Upos::Verb => "VERB",
            Upos::X => "X",
        }
    }

    pub fn is_nominal(self) -> bool {
        matches!(self, Upos::Noun | Upos::Propn)
    }
}

impl fmt::Display for Upos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Upos {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Upos::ALL
            .iter()
            .copied()
            .find(|u| u.as_str() == s)
            .ok_or_else(|| format!("{:?} is not a Universal Dependencies POS tag", s))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    /// 1-based position in the sentence.
    pub index: usize,
    pub surface: String,
    pub lemma: String,
    pub upos: Upos,
    /// Index of the head token, 0 for the root.
    pub head: usize,
    pub deprel: String,
}

impl Token {
    /// Relation without its subtype: `obl:tmod` → `obl`.
    pub fn base_rel(&self) -> &str {
        self.deprel.split(':').next().unwrap_or("")
    }

    /// Lowercased lemma, the key for every lexicon lookup.
    pub fn norm_lemma(&self) -> String {
        self.lemma.to_lowercase()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedSentence {
    pub review_id: String,
    pub sentence_index: usize,
    /// Raw sentence text (`# text = ...`), when the parser supplied it.
    pub text: Option<String>,
    pub tokens: Vec<Token>,
}

impl ParsedSentence {
    /// Token by 1-based index.
    pub fn token(&self, index: usize) -> Option<&Token> {
        index.checked_sub(1).and_then(|i| self.tokens.get(i))
    }

    pub fn children(&self, head: usize) -> impl Iterator<Item = &Token> + '_ {
        self.tokens.iter().filter(move |t| t.head == head)
    }

    /// Heads from `index` up to (not including) the root.
    pub fn ancestors(&self, index: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut cur = self.token(index).map(|t| t.head).unwrap_or(0);
        while cur != 0 && out.len() <= self.tokens.len() {
            out.push(cur);
            cur = self.token(cur).map(|t| t.head).unwrap_or(0);
        }
        out
    }

    /// Text the spans refer to: the `# text` line, or surfaces joined by
    /// single spaces.
    pub fn source_text(&self) -> String {
        match &self.text {
            Some(t) => t.clone(),
            None => self.tokens.iter().map(|t| t.surface.as_str()).collect::<Vec<_>>().join(" "),
        }
    }

    /// Byte span of every token inside [`Self::source_text`], found by a
    /// left-to-right scan. Tokens that cannot be located get an empty span
    /// at the scan position.
    pub fn token_spans(&self) -> Vec<(usize, usize)> {
        let text = self.source_text();
        let mut pos = 0;
        self.tokens
            .iter()
            .map(|t| match text[pos..].find(t.surface.as_str()) {
                Some(off) if !t.surface.is_empty() => {
                    let start = pos + off;
                    pos = start + t.surface.len();
                    (start, pos)
                }
                _ => (pos, pos),
            })
            .collect()
    }

    /// Check indices, heads and acyclicity.
    pub fn validate(&self) -> Result<(), String> {
        let n = self.tokens.len();
        if n == 0 {
            return Err("sentence has no tokens".into());
        }
        for (i, t) in self.tokens.iter().enumerate() {
            if t.index != i + 1 {
                return Err(format!("token indices are not contiguous at position {} (found {})", i + 1, t.index));
            }
            if t.head == t.index {
                return Err(format!("cycle: token {} heads itself", t.index));
            }
            if t.head > n {
                return Err(format!("token {} has head {} outside 0..={}", t.index, t.head, n));
            }
        }
        if !self.tokens.iter().any(|t| t.head == 0) {
            return Err("missing root: no token has head 0".into());
        }
        for t in &self.tokens {
            let mut cur = t.head;
            let mut steps = 0;
            while cur != 0 {
                steps += 1;
                if steps > n {
                    return Err(format!("cycle: head chain of token {} never reaches the root", t.index));
                }
                cur = self.tokens[cur - 1].head;
            }
        }
        Ok(())
    }
}

/// Maps legacy relation labels onto Universal Dependencies v2 names.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelationAliases {
    map: BTreeMap<String, String>,
}

impl Default for RelationAliases {
    fn default() -> Self {
        RelationAliases::from_pairs([
            ("dobj", "obj"),
            ("neg", "advmod"),
            ("nsubjpass", "nsubj:pass"),
            ("csubjpass", "csubj:pass"),
            ("auxpass", "aux:pass"),
            ("partmod", "acl"),
            ("infmod", "acl"),
            ("vmod", "acl"),
            ("rcmod", "acl:relcl"),
            ("npadvmod", "obl:npmod"),
            ("tmod", "obl:tmod"),
            ("possessive", "case"),
            ("num", "nummod"),
        ])
    }
}

impl RelationAliases {
    pub fn none() -> Self {
        RelationAliases { map: BTreeMap::new() }
    }

    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = (&'a str, &'a str)>) -> Self {
        RelationAliases {
            map: pairs.into_iter().map(|(a, b)| (a.to_string(), b.to_string())).collect(),
        }
    }

    pub fn insert(&mut self, legacy: &str, canonical: &str) {
        self.map.insert(legacy.to_string(), canonical.to_string());
    }

    pub fn canonical<'a>(&'a self, rel: &'a str) -> &'a str {
        self.map.get(rel).map(String::as_str).unwrap_or(rel)
    }
}

#[derive(Debug, Clone, Default)]
pub struct ConlluReport {
    pub sentences: Vec<ParsedSentence>,
    pub diagnostics: Vec<Diagnostic>,
}

pub fn parse_conllu<R: Read>(stream: R) -> std::io::Result<ConlluReport> {
    parse_conllu_with(stream, &RelationAliases::default())
}

/// Streaming single-pass CoNLL-U reader.
///
/// Sentences need a `# review_id = ...` comment. `# sentence_index = N` is
/// honoured when present; otherwise sentences are numbered from 0 within
/// each review in file order. Multiword-token ranges and empty nodes are
/// skipped with a diagnostic; sentences that fail validation are dropped
/// with one.
pub fn parse_conllu_with<R: Read>(stream: R, aliases: &RelationAliases) -> std::io::Result<ConlluReport> {
    let mut report = ConlluReport::default();
    let mut block = Block::default();
    let mut next_index: BTreeMap<String, usize> = BTreeMap::new();
    for (i, line) in BufReader::new(stream).lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        let trimmed = line.trim_end_matches('\r');
        if trimmed.trim().is_empty() {
            block.finish(&mut report, &mut next_index);
            continue;
        }
        if block.start_line == 0 {
            block.start_line = lineno;
        }
        if let Some(comment) = trimmed.strip_prefix('#') {
            if let Some((key, value)) = comment.split_once('=') {
                let value = value.trim().to_string();
                match key.trim() {
                    "review_id" => block.review_id = Some(value),
                    "sentence_index" => match value.parse() {
                        Ok(v) => block.sentence_index = Some(v),
                        Err(_) => report
                            .diagnostics
                            .push(Diagnostic::at(lineno, format!("sentence_index {:?} is not an integer", value))),
                    },
                    "text" => block.text = Some(value),
                    _ => {}
                }
            }
            continue;
        }
        let cols: Vec<&str> = trimmed.split('\t').collect();
        if cols.len() != 10 {
            block.error = Some(Diagnostic::at(lineno, format!("expected 10 tab-separated columns, found {}", cols.len())));
            continue;
        }
        if cols[0].contains('-') || cols[0].contains('.') {
            report
                .diagnostics
                .push(Diagnostic::at(lineno, format!("skipped multiword token or empty node {:?}", cols[0])));
            continue;
        }
        match parse_token(&cols, aliases) {
            Ok(tok) => block.tokens.push(tok),
            Err(msg) => block.error = Some(Diagnostic::at(lineno, msg)),
        }
    }
    block.finish(&mut report, &mut next_index);
    Ok(report)
}

fn parse_token(cols: &[&str], aliases: &RelationAliases) -> Result<Token, String> {
    let index = cols[0].parse::<usize>().map_err(|_| format!("bad token id {:?}", cols[0]))?;
    let head = cols[6].parse::<usize>().map_err(|_| format!("bad head {:?} for token {}", cols[6], index))?;
    let upos = cols[3].parse::<Upos>()?;
    let lemma = if cols[2] == "_" && cols[1] != "_" { cols[1] } else { cols[2] };
    Ok(Token {
        index,
        surface: cols[1].to_string(),
        lemma: lemma.to_string(),
        upos,
        head,
        deprel: aliases.canonical(cols[7]).to_string(),
    })
}

#[derive(Default)]
struct Block {
    start_line: usize,
    review_id: Option<String>,
    sentence_index: Option<usize>,
    text: Option<String>,
    tokens: Vec<Token>,
    error: Option<Diagnostic>,
}

impl Block {
    fn finish(&mut self, report: &mut ConlluReport, next_index: &mut BTreeMap<String, usize>) {
        let block = std::mem::take(self);
        if block.start_line == 0 {
            return;
        }
        if let Some(err) = block.error {
            report.diagnostics.push(Diagnostic {
                line: err.line,
                message: format!("sentence dropped: {}", err.message),
            });
            return;
        }
        let Some(review_id) = block.review_id else {
            report
                .diagnostics
                .push(Diagnostic::at(block.start_line, "sentence dropped: missing `# review_id` comment"));
            return;
        };
        let counter = next_index.entry(review_id.clone()).or_insert(0);
        let sentence_index = block.sentence_index.unwrap_or(*counter);
        *counter = sentence_index + 1;
        let sentence = ParsedSentence {
            review_id,
            sentence_index,
            text: block.text,
            tokens: block.tokens,
        };
        match sentence.validate() {
            Ok(()) => report.sentences.push(sentence),
            Err(msg) => report
                .diagnostics
                .push(Diagnostic::at(block.start_line, format!("sentence dropped: {}", msg))),
        }
    }
}

/// Serialize sentences as CoNLL-U. Columns the model does not keep
/// (XPOS, FEATS, DEPS, MISC) are written as `_`.
pub fn write_conllu(sentences: &[ParsedSentence]) -> String {
    let mut out = String::new();
    for s in sentences {
        write_sentence(&mut out, s);
    }
    out
}

pub fn write_sentence(out: &mut String, s: &ParsedSentence) {
    use std::fmt::Write;
    let _ = writeln!(out, "# review_id = {}", s.review_id);
    let _ = writeln!(out, "# sentence_index = {}", s.sentence_index);
    if let Some(text) = &s.text {
        let _ = writeln!(out, "# text = {}", text);
    }
    for t in &s.tokens {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t_\t_\t{}\t{}\t_\t_",
            t.index, t.surface, t.lemma, t.upos, t.head, t.deprel
        );
    }
    out.push('\n');
}

/// Which end of a perception scale a quality word sits on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pole {
    /// Absence or relatively low quality (X1).
    LowPole,
    /// Presence or relatively high quality (X2).
    HighPole,
}

impl Pole {
    pub fn flip(self) -> Pole {
        match self {
            Pole::LowPole => Pole::HighPole,
            Pole::HighPole => Pole::LowPole,
        }
    }
}

impl FromStr for Pole {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "low_pole" | "low" => Ok(Pole::LowPole),
            "high_pole" | "high" => Ok(Pole::HighPole),
            other => Err(format!("{:?} is not low_pole or high_pole", other)),
        }
    }
}

/// The five lexical resources behind the rules. Immutable after load.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LexiconSet {
    /// Stative, emotional and auxiliary verbs never labeled as action words.
    pub non_action_verbs: BTreeSet<String>,
    /// Derived noun/adjective lemma → source verb lemma.
    pub derivations: BTreeMap<String, String>,
    /// Symmetric antonym relation.
    pub antonyms: BTreeMap<String, BTreeSet<String>>,
    pub positional_prepositions: BTreeSet<String>,
    pub polarity: BTreeMap<String, Pole>,
}

pub const NON_ACTION_VERBS_FILE: &str = "non_action_verbs.txt";
pub const DERIVATIONS_FILE: &str = "derivations.tsv";
pub const ANTONYMS_FILE: &str = "antonyms.tsv";
pub const POSITIONAL_PREPOSITIONS_FILE: &str = "positional_prepositions.txt";
pub const POLARITY_FILE: &str = "polarity.tsv";

const SEED_FILES: [(&str, &str); 5] = [
    (NON_ACTION_VERBS_FILE, include_str!("../lexicon/non_action_verbs.txt")),
    (DERIVATIONS_FILE, include_str!("../lexicon/derivations.tsv")),
    (ANTONYMS_FILE, include_str!("../lexicon/antonyms.tsv")),
    (POSITIONAL_PREPOSITIONS_FILE, include_str!("../lexicon/positional_prepositions.txt")),
    (POLARITY_FILE, include_str!("../lexicon/polarity.tsv")),
];

impl LexiconSet {
    /// The bundled seed lexicons.
    pub fn seed() -> LexiconSet {
        let (lex, diags) = LexiconSet::from_sources(|name| {
            SEED_FILES.iter().find(|(n, _)| *n == name).map(|(_, c)| c.to_string())
        })
        .expect("bundled lexicons are valid");
        debug_assert!(diags.is_empty(), "{:?}", diags);
        lex
    }

    /// Write the bundled seed files into `dir`.
    pub fn write_seed(dir: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        for (name, content) in SEED_FILES {
            std::fs::write(dir.join(name), content)?;
        }
        Ok(())
    }

    fn from_sources(read: impl Fn(&str) -> Option<String>) -> Result<(LexiconSet, Vec<Diagnostic>), LexiconError> {
        let mut diags = Vec::new();
        let file = |name: &str| -> Result<Vec<(usize, Vec<String>)>, LexiconError> {
            let content = read(name).ok_or_else(|| LexiconError::MissingFile(name.to_string()))?;
            Ok(content
                .lines()
                .enumerate()
                .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
                .map(|(i, l)| (i + 1, l.split('\t').map(|f| f.trim().to_lowercase()).collect()))
                .collect())
        };
        let mut lex = LexiconSet::default();

        let single = |rows: Vec<(usize, Vec<String>)>, name: &str, diags: &mut Vec<Diagnostic>| {
            let mut set = BTreeSet::new();
            for (line, fields) in rows {
                match fields.as_slice() {
                    [lemma] if !lemma.is_empty() => {
                        set.insert(lemma.clone());
                    }
                    _ => diags.push(Diagnostic::at(line, format!("{}: expected one lemma per line", name))),
                }
            }
            set
        };
        lex.non_action_verbs = single(file(NON_ACTION_VERBS_FILE)?, NON_ACTION_VERBS_FILE, &mut diags);
        lex.positional_prepositions = single(file(POSITIONAL_PREPOSITIONS_FILE)?, POSITIONAL_PREPOSITIONS_FILE, &mut diags);

        for (line, fields) in file(DERIVATIONS_FILE)? {
            match fields.as_slice() {
                [derived, verb] if !derived.is_empty() && !verb.is_empty() => {
                    lex.derivations.insert(derived.clone(), verb.clone());
                }
                _ => diags.push(Diagnostic::at(line, format!("{}: expected derived<TAB>verb", DERIVATIONS_FILE))),
            }
        }
        for (line, fields) in file(ANTONYMS_FILE)? {
            match fields.as_slice() {
                [a, b] if !a.is_empty() && !b.is_empty() && a != b => {
                    lex.antonyms.entry(a.clone()).or_default().insert(b.clone());
                    lex.antonyms.entry(b.clone()).or_default().insert(a.clone());
                }
                _ => diags.push(Diagnostic::at(line, format!("{}: expected a<TAB>b with a != b", ANTONYMS_FILE))),
            }
        }
        for (line, fields) in file(POLARITY_FILE)? {
            match fields.as_slice() {
                [lemma, pole] if !lemma.is_empty() => match pole.parse::<Pole>() {
                    Ok(p) => {
                        lex.polarity.insert(lemma.clone(), p);
                    }
                    Err(e) => diags.push(Diagnostic::at(line, format!("{}: {}", POLARITY_FILE, e))),
                },
                _ => diags.push(Diagnostic::at(line, format!("{}: expected lemma<TAB>low_pole|high_pole", POLARITY_FILE))),
            }
        }
        lex.check_polarity()?;
        Ok((lex, diags))
    }

    fn check_polarity(&self) -> Result<(), LexiconError> {
        for (a, bs) in &self.antonyms {
            for b in bs {
                if let (Some(pa), Some(pb)) = (self.polarity.get(a), self.polarity.get(b)) {
                    if pa == pb {
                        let (x, y) = if a < b { (a, b) } else { (b, a) };
                        return Err(LexiconError::InconsistentPolarity(x.clone(), y.clone()));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn is_non_action(&self, lemma: &str) -> bool {
        self.non_action_verbs.contains(lemma)
    }

    pub fn has_antonym(&self, lemma: &str) -> bool {
        self.antonyms.get(lemma).is_some_and(|s| !s.is_empty())
    }

    pub fn is_positional(&self, lemma: &str) -> bool {
        self.positional_prepositions.contains(lemma)
    }

    pub fn pole(&self, lemma: &str) -> Option<Pole> {
        self.polarity.get(lemma).copied()
    }
}

/// Load the five lexicon files from `dir`. Malformed lines become
/// diagnostics; a missing directory or file is fatal.
pub fn load_lexicons(dir: &Path) -> Result<(LexiconSet, Vec<Diagnostic>), LexiconError> {
    if !dir.is_dir() {
        return Err(LexiconError::DirNotFound(dir.display().to_string()));
    }
    let result = LexiconSet::from_sources(|name| match std::fs::read_to_string(dir.join(name)) {
        Ok(c) => Some(c),
        Err(e) => {
            if e.kind() != std::io::ErrorKind::NotFound {
                log::warn!("cannot read {}: {}", name, e);
            }
            None
        }
    });
    match result {
        Err(LexiconError::MissingFile(name)) => Err(LexiconError::MissingFile(dir.join(name).display().to_string())),
        other => other,
    }
}


#[cfg(test)]
mod proptests {
    use super::*;
    use proptest::prelude::*;

    fn arb_sentence() -> impl Strategy<Value = ParsedSentence> {
        (1usize..12)
            .prop_flat_map(|n| {
                (
                    Just(n),
                    prop::collection::vec(0usize..1000, n),
                    prop::collection::vec("[a-z]{1,6}", n),
                    prop::collection::vec(prop::sample::select(Upos::ALL.to_vec()), n),
                    prop::collection::vec(prop::sample::select(vec!["obj", "nsubj", "obl", "case", "advmod", "acl:relcl"]), n),
                    "[a-z0-9]{1,6}",
                    0usize..5,
                    any::<bool>(),
                )
            })
            .prop_map(|(n, picks, words, tags, rels, rid, sidx, with_text)| {
                // every token attaches to an earlier token, so the graph is a tree
                let heads: Vec<usize> = (0..n).map(|i| if i == 0 { 0 } else { picks[i] % (i + 1) }).collect();
                let tokens = (0..n)
                    .map(|i| Token {
                        index: i + 1,
                        surface: words[i].clone(),
                        lemma: words[i].to_uppercase(),
                        upos: tags[i],
                        head: heads[i],
                        deprel: if heads[i] == 0 { "root".into() } else { rels[i].to_string() },
                    })
                    .collect::<Vec<_>>();
                let text = with_text.then(|| words.join(" "));
                ParsedSentence { review_id: rid, sentence_index: sidx, text, tokens }
            })
    }

    proptest! {
        #[test]
        fn conllu_round_trip(sents in prop::collection::vec(arb_sentence(), 0..6)) {
            let text = write_conllu(&sents);
            let rep = parse_conllu_with(text.as_bytes(), &RelationAliases::none()).unwrap();
            prop_assert!(rep.diagnostics.is_empty(), "{:?}", rep.diagnostics);
            prop_assert_eq!(rep.sentences, sents);
        }

        #[test]
        fn head_chains_reach_root(s in arb_sentence()) {
            prop_assert!(s.validate().is_ok());
            for t in &s.tokens {
                prop_assert!(s.ancestors(t.index).len() <= s.tokens.len());
            }
        }
    }
}
