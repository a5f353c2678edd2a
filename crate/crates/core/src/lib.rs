//! Affordance mining and Kano drift analysis for product reviews.
//!
//! The pipeline runs in stages, each a module:
//!
//! 1. [`corpus`] loads review records, applies the credibility filter and
//!    splits them into comparison windows.
//! 2. [`linguistics`] reads dependency-parsed sentences (CoNLL-U) and the
//!    lexical resources the extraction rules consult.
//! 3. [`extractor`] applies the identification rules and emits
//!    [`extractor::AffordanceMention`]s.
//! 4. [`aggregator`] canonicalizes mentions into affordance keys, selects the
//!    most frequent ones and builds the two-pole design matrix.
//! 5. [`ologit`] fits the proportional-odds ordered logit model.
//! 6. [`kano`] maps fitted coefficient pairs onto Kano categories and diffs
//!    them across windows.
//!
//! [`synth`] generates corpora with known ground truth for end-to-end checks.

pub mod aggregator;
pub mod corpus;
pub mod extractor;
pub mod kano;
pub mod linguistics;
pub mod ologit;
pub mod par;
pub mod svg;
pub mod synth;

/// A non-fatal problem found while reading an input, tied to its location.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Diagnostic {
    /// 1-based line number in the source, when the problem has one.
    pub line: Option<usize>,
    pub message: String,
}

impl Diagnostic {
    pub fn at(line: usize, message: impl Into<String>) -> Self {
        Diagnostic {
            line: Some(line),
            message: message.into(),
        }
    }

    pub fn general(message: impl Into<String>) -> Self {
        Diagnostic {
            line: None,
            message: message.into(),
        }
    }
}

impl std::fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.line {
            Some(line) => write!(f, "line {}: {}", line, self.message),
            None => f.write_str(&self.message),
        }
    }
}
