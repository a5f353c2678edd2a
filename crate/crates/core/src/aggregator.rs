//! Affordance keys, frequency selection, pole assignment and the binary
//! design matrix.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::ReviewRecord;
use crate::extractor::AffordanceMention;
use crate::linguistics::{LexiconSet, Pole};
use crate::par::{self, Exec};
use crate::Diagnostic;

#[derive(Debug, Error)]
pub enum DesignError {
    #[error("design matrix has no affordance columns")]
    NoKeys,
    #[error("design csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("design csv header: expected {expected}, found {found}")]
    BadHeader { expected: String, found: String },
    #[error("design csv row {row}: {message}")]
    BadRow { row: usize, message: String },
}

/// Canonical identity of an affordance description.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct AffordanceKey {
    pub action: String,
    pub receiver: Option<String>,
    /// (preposition, object)
    pub context: Option<(String, String)>,
}

impl AffordanceKey {
    pub fn new(action: &str, receiver: Option<&str>, context: Option<(&str, &str)>) -> Self {
        let norm = |s: &str| s.trim().to_lowercase().replace(char::is_whitespace, "-");
        AffordanceKey {
            action: norm(action),
            receiver: receiver.map(norm),
            context: context.map(|(p, o)| (norm(p), norm(o))),
        }
    }
}

/// `action[/receiver][/prep-object]`, e.g. `read/book/at-night`.
impl fmt::Display for AffordanceKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.action)?;
        if let Some(r) = &self.receiver {
            write!(f, "/{r}")?;
        }
        if let Some((p, o)) = &self.context {
            write!(f, "/{p}-{o}")?;
        }
        Ok(())
    }
}

pub fn canonicalize(m: &AffordanceMention) -> AffordanceKey {
    AffordanceKey::new(
        &m.action_word,
        m.action_receiver.as_deref(),
        m.usage_context.as_ref().map(|c| (c.preposition.as_str(), c.object.as_str())),
    )
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyCount {
    pub key: AffordanceKey,
    /// Number of distinct reviews mentioning the key.
    pub reviews: usize,
}

/// Parse an exclusion list: one canonical key per line, `#` comments.
pub fn parse_exclusions(text: &str) -> BTreeSet<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_lowercase)
        .collect()
}

fn reviews_per_key(mentions: &[AffordanceMention], exec: Exec) -> BTreeMap<AffordanceKey, BTreeSet<&str>> {
    par::chunked_reduce(
        exec,
        mentions.len(),
        |range| {
            let mut acc: BTreeMap<AffordanceKey, BTreeSet<&str>> = BTreeMap::new();
            for m in &mentions[range] {
                acc.entry(canonicalize(m)).or_default().insert(m.review_id.as_str());
            }
            acc
        },
        |mut a, b| {
            for (k, ids) in b {
                a.entry(k).or_default().extend(ids);
            }
            a
        },
    )
    .unwrap_or_default()
}

/// Keys mentioned in at least `min_reviews` distinct reviews, most frequent
/// first (ties by display string), truncated to `top_n`. Keys whose display
/// string is in `exclude` are skipped before ranking.
pub fn count_and_filter(
    mentions: &[AffordanceMention],
    min_reviews: usize,
    top_n: usize,
    exclude: &BTreeSet<String>,
    exec: Exec,
) -> Vec<KeyCount> {
    let mut ranked: Vec<(String, KeyCount)> = reviews_per_key(mentions, exec)
        .into_iter()
        .map(|(key, ids)| (key.to_string(), KeyCount { key, reviews: ids.len() }))
        .filter(|(label, kc)| kc.reviews >= min_reviews.max(1) && !exclude.contains(label))
        .collect();
    ranked.sort_by(|(la, a), (lb, b)| b.reviews.cmp(&a.reviews).then_with(|| la.cmp(lb)));
    ranked.truncate(top_n.max(1));
    ranked.into_iter().map(|(_, kc)| kc).collect()
}

/// Pole of one mention: `LowPole` feeds x1, `HighPole` feeds x2.
pub fn assign_polarity(m: &AffordanceMention, lex: &LexiconSet) -> (Pole, Option<Diagnostic>) {
    match &m.perceived_quality {
        None if m.negated => (Pole::LowPole, None),
        None => (Pole::HighPole, None),
        Some(q) => match lex.pole(q) {
            Some(p) if m.negated => (p.flip(), None),
            Some(p) => (p, None),
            None => {
                let pole = if m.negated { Pole::LowPole } else { Pole::HighPole };
                let diag = Diagnostic::general(format!(
                    "review {} sentence {}: quality '{}' has no polarity entry, counted as {}",
                    m.review_id,
                    m.sentence_index,
                    q,
                    if m.negated { "low pole (negated)" } else { "high pole" }
                ));
                (pole, Some(diag))
            }
        },
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DesignRow {
    pub review_id: String,
    pub stars: u8,
    /// (x1, x2) per key, in the matrix's key order.
    pub indicators: Vec<(bool, bool)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DesignMatrix {
    pub keys: Vec<AffordanceKey>,
    pub rows: Vec<DesignRow>,
}

impl DesignMatrix {
    pub fn labels(&self) -> Vec<String> {
        self.keys.iter().map(|k| k.to_string()).collect()
    }

    /// Number of rows with x1 set and with x2 set, per key.
    pub fn pole_counts(&self) -> Vec<(usize, usize)> {
        let mut out = vec![(0, 0); self.keys.len()];
        for r in &self.rows {
            for (c, &(x1, x2)) in out.iter_mut().zip(&r.indicators) {
                c.0 += x1 as usize;
                c.1 += x2 as usize;
            }
        }
        out
    }

    /// Drop keys where one pole never occurs; their two coefficients cannot
    /// both be estimated.
    pub fn retain_estimable(&mut self) -> Vec<Diagnostic> {
        let counts = self.pole_counts();
        let keep: Vec<bool> = counts.iter().map(|&(a, b)| a > 0 && b > 0).collect();
        let diags = self
            .keys
            .iter()
            .zip(&counts)
            .filter(|(_, &(a, b))| a == 0 || b == 0)
            .map(|(k, &(a, b))| {
                Diagnostic::general(format!("affordance {k} dropped: x1 set in {a} reviews, x2 set in {b}"))
            })
            .collect();
        self.keys = self.keys.iter().zip(&keep).filter(|(_, &k)| k).map(|(k, _)| k.clone()).collect();
        for r in &mut self.rows {
            r.indicators = r.indicators.iter().zip(&keep).filter(|(_, &k)| k).map(|(x, _)| *x).collect();
        }
        diags
    }
}

/// One row per review; a key's x1 (x2) is set when any of the review's
/// mentions of that key carries the low (high) pole.
pub fn build_design_matrix(
    reviews: &[ReviewRecord],
    mentions: &[AffordanceMention],
    keys: &[AffordanceKey],
    lex: &LexiconSet,
    exec: Exec,
) -> Result<(DesignMatrix, Vec<Diagnostic>), DesignError> {
    if keys.is_empty() {
        return Err(DesignError::NoKeys);
    }
    let column: HashMap<&AffordanceKey, usize> = keys.iter().enumerate().map(|(i, k)| (k, i)).collect();
    let mut by_review: HashMap<&str, Vec<&AffordanceMention>> = HashMap::new();
    for m in mentions {
        by_review.entry(m.review_id.as_str()).or_default().push(m);
    }
    let built = par::map(exec, reviews, |r| {
        let mut indicators = vec![(false, false); keys.len()];
        let mut diags = Vec::new();
        for m in by_review.get(r.id.as_str()).into_iter().flatten() {
            let Some(&c) = column.get(&canonicalize(m)) else {
                continue;
            };
            let (pole, diag) = assign_polarity(m, lex);
            diags.extend(diag);
            match pole {
                Pole::LowPole => indicators[c].0 = true,
                Pole::HighPole => indicators[c].1 = true,
            }
        }
        (
            DesignRow {
                review_id: r.id.clone(),
                stars: r.stars,
                indicators,
            },
            diags,
        )
    });
    let mut rows = Vec::with_capacity(built.len());
    let mut diags = Vec::new();
    for (row, d) in built {
        rows.push(row);
        diags.extend(d);
    }
    Ok((DesignMatrix { keys: keys.to_vec(), rows }, diags))
}

/// Display labels for the two poles of each key: the most frequent low and
/// high quality lemmas, falling back to `non-existent`/`existent`.
pub fn pole_labels(mentions: &[AffordanceMention], keys: &[AffordanceKey], lex: &LexiconSet) -> Vec<String> {
    let mut tallies: HashMap<&AffordanceKey, [BTreeMap<String, usize>; 2]> = HashMap::new();
    for k in keys {
        tallies.insert(k, Default::default());
    }
    for m in mentions {
        let Some(q) = &m.perceived_quality else { continue };
        let key = canonicalize(m);
        let Some(t) = tallies.get_mut(&key) else { continue };
        let Some(p) = lex.pole(q) else { continue };
        let (slot, word) = match (p, m.negated) {
            (Pole::LowPole, false) => (0, q.clone()),
            (Pole::HighPole, false) => (1, q.clone()),
            (Pole::LowPole, true) => (1, format!("not {q}")),
            (Pole::HighPole, true) => (0, format!("not {q}")),
        };
        *t[slot].entry(word).or_default() += 1;
    }
    let top = |m: &BTreeMap<String, usize>, default: &str| {
        m.iter()
            .max_by(|a, b| a.1.cmp(b.1).then_with(|| b.0.cmp(a.0)))
            .map(|(w, _)| w.clone())
            .unwrap_or_else(|| default.to_string())
    };
    keys.iter()
        .map(|k| {
            let t = &tallies[k];
            format!("{}/{}", top(&t[0], "non-existent"), top(&t[1], "existent"))
        })
        .collect()
}

pub fn write_design_csv<W: Write>(w: W, d: &DesignMatrix) -> Result<(), DesignError> {
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["review_id".to_string(), "stars".to_string()];
    for k in &d.keys {
        header.push(format!("{k}__x1"));
        header.push(format!("{k}__x2"));
    }
    out.write_record(&header)?;
    for r in &d.rows {
        let mut rec = vec![r.review_id.clone(), r.stars.to_string()];
        for &(a, b) in &r.indicators {
            rec.push((a as u8).to_string());
            rec.push((b as u8).to_string());
        }
        out.write_record(&rec)?;
    }
    out.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Read a design matrix back. Keys are recovered from the column labels as
/// opaque actions (the display form is not parsed back into parts).
pub fn read_design_csv<R: Read>(r: R) -> Result<DesignMatrix, DesignError> {
    let mut rdr = csv::Reader::from_reader(r);
    let header = rdr.headers()?.clone();
    if header.len() < 2 || &header[0] != "review_id" || &header[1] != "stars" || header.len() % 2 != 0 {
        return Err(DesignError::BadHeader {
            expected: "review_id,stars,<key>__x1,<key>__x2,...".into(),
            found: header.iter().collect::<Vec<_>>().join(","),
        });
    }
    let mut keys = Vec::new();
    for pair in header.iter().skip(2).collect::<Vec<_>>().chunks(2) {
        match (pair[0].strip_suffix("__x1"), pair[1].strip_suffix("__x2")) {
            (Some(a), Some(b)) if a == b => keys.push(AffordanceKey {
                action: a.to_string(),
                receiver: None,
                context: None,
            }),
            _ => {
                return Err(DesignError::BadHeader {
                    expected: "<key>__x1,<key>__x2 pairs".into(),
                    found: format!("{},{}", pair[0], pair[1]),
                })
            }
        }
    }
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = i + 2;
        let bad = |message: String| DesignError::BadRow { row, message };
        let stars: u8 = rec[1].parse().map_err(|_| bad(format!("stars '{}'", &rec[1])))?;
        if !(1..=5).contains(&stars) {
            return Err(bad(format!("stars {stars} outside 1..=5")));
        }
        let bit = |s: &str| match s {
            "0" => Ok(false),
            "1" => Ok(true),
            other => Err(bad(format!("indicator '{other}' is not 0/1"))),
        };
        let mut indicators = Vec::with_capacity(keys.len());
        for j in 0..keys.len() {
            indicators.push((bit(&rec[2 + 2 * j])?, bit(&rec[3 + 2 * j])?));
        }
        rows.push(DesignRow {
            review_id: rec[0].to_string(),
            stars,
            indicators,
        });
    }
    Ok(DesignMatrix { keys, rows })
}
