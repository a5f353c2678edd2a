//! Kano categorization from fitted coefficient pairs.
//!
//! Each affordance is the segment from `(-1, alpha)` to `(1, beta)`; its
//! slope `K = (beta - alpha)/2` and intercept `M = (alpha + beta)/2` decide
//! the category.

use std::collections::HashMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ologit::FitResult;

#[derive(Debug, Error, PartialEq)]
pub enum KanoError {
    #[error("threshold {name} must be positive and finite, got {value}")]
    BadThreshold { name: &'static str, value: f64 },
    #[error("unknown Kano category '{0}'")]
    UnknownCategory(String),
    #[error("coefficient table line {line}: {message}")]
    Coefficients { line: u64, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum KanoCategory {
    #[serde(rename = "Must-be")]
    MustBe,
    Performance,
    Attractive,
    Indifferent,
    Reverse,
    Questionable,
}

impl KanoCategory {
    pub const ALL: [KanoCategory; 6] = [
        KanoCategory::MustBe,
        KanoCategory::Performance,
        KanoCategory::Attractive,
        KanoCategory::Indifferent,
        KanoCategory::Reverse,
        KanoCategory::Questionable,
    ];

    pub fn letter(self) -> &'static str {
        match self {
            KanoCategory::MustBe => "M",
            KanoCategory::Performance => "P",
            KanoCategory::Attractive => "A",
            KanoCategory::Indifferent => "I",
            KanoCategory::Reverse => "R",
            KanoCategory::Questionable => "Q",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            KanoCategory::MustBe => "Must-be",
            KanoCategory::Performance => "Performance",
            KanoCategory::Attractive => "Attractive",
            KanoCategory::Indifferent => "Indifferent",
            KanoCategory::Reverse => "Reverse",
            KanoCategory::Questionable => "Questionable",
        }
    }
}

impl fmt::Display for KanoCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Accepts the single letter or the full name, case-insensitively.
impl FromStr for KanoCategory {
    type Err = KanoError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        KanoCategory::ALL
            .into_iter()
            .find(|c| c.letter().eq_ignore_ascii_case(t) || c.name().eq_ignore_ascii_case(t))
            .ok_or_else(|| KanoError::UnknownCategory(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KanoThresholds {
    pub k: f64,
    pub m: f64,
}

impl Default for KanoThresholds {
    fn default() -> Self {
        KanoThresholds { k: 0.2, m: 0.2 }
    }
}

impl KanoThresholds {
    pub fn new(k: f64, m: f64) -> Result<Self, KanoError> {
        for (name, value) in [("k", k), ("m", m)] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(KanoError::BadThreshold { name, value });
            }
        }
        Ok(KanoThresholds { k, m })
    }
}

/// `(K, M)` for a coefficient pair.
pub fn compute_km(alpha: f64, beta: f64) -> (f64, f64) {
    ((beta - alpha) / 2.0, (alpha + beta) / 2.0)
}

/// Category of a point. `K = 0` and `K = k` fall in the inner slope band,
/// `|M| = m` on the outer side of the intercept band.
pub fn classify(k: f64, m: f64, t: KanoThresholds) -> KanoCategory {
    if k < 0.0 {
        return KanoCategory::Reverse;
    }
    let inner_m = -t.m < m && m < t.m;
    if k <= t.k {
        if inner_m {
            KanoCategory::Indifferent
        } else {
            KanoCategory::Questionable
        }
    } else if m <= -t.m {
        KanoCategory::MustBe
    } else if inner_m {
        KanoCategory::Performance
    } else {
        KanoCategory::Attractive
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KanoPoint {
    /// Canonical affordance key.
    pub key: String,
    pub poles: String,
    pub alpha: f64,
    pub beta: f64,
    #[serde(rename = "K")]
    pub k: f64,
    #[serde(rename = "M")]
    pub m: f64,
    pub category: KanoCategory,
}

impl KanoPoint {
    pub fn new(key: impl Into<String>, poles: impl Into<String>, alpha: f64, beta: f64, t: KanoThresholds) -> Self {
        let (k, m) = compute_km(alpha, beta);
        KanoPoint {
            key: key.into(),
            poles: poles.into(),
            alpha,
            beta,
            k,
            m,
            category: classify(k, m, t),
        }
    }
}

/// One point per affordance of the fit, in column order.
pub fn classify_all(fit: &FitResult, pole_labels: &[String], t: KanoThresholds) -> Vec<KanoPoint> {
    fit.pairs()
        .into_iter()
        .enumerate()
        .map(|(i, c)| {
            KanoPoint::new(
                c.affordance,
                pole_labels.get(i).cloned().unwrap_or_default(),
                c.alpha,
                c.beta,
                t,
            )
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub key: String,
    pub cat_a: KanoCategory,
    pub cat_b: KanoCategory,
    pub delta_k: f64,
    pub delta_m: f64,
}

impl Transition {
    pub fn is_stable(&self) -> bool {
        self.cat_a == self.cat_b
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionReport {
    pub window_a: String,
    pub window_b: String,
    /// Keys in both windows, in window A order.
    pub common: Vec<Transition>,
    /// Keys selected only in window A.
    pub only_a: Vec<String>,
    pub only_b: Vec<String>,
}

/// Differences are B minus A.
pub fn compare_windows(window_a: &str, a: &[KanoPoint], window_b: &str, b: &[KanoPoint]) -> TransitionReport {
    let in_b: HashMap<&str, &KanoPoint> = b.iter().map(|p| (p.key.as_str(), p)).collect();
    let in_a: HashMap<&str, &KanoPoint> = a.iter().map(|p| (p.key.as_str(), p)).collect();
    let common = a
        .iter()
        .filter_map(|pa| {
            in_b.get(pa.key.as_str()).map(|pb| Transition {
                key: pa.key.clone(),
                cat_a: pa.category,
                cat_b: pb.category,
                delta_k: pb.k - pa.k,
                delta_m: pb.m - pa.m,
            })
        })
        .collect();
    TransitionReport {
        window_a: window_a.to_string(),
        window_b: window_b.to_string(),
        common,
        only_a: a.iter().filter(|p| !in_b.contains_key(p.key.as_str())).map(|p| p.key.clone()).collect(),
        only_b: b.iter().filter(|p| !in_a.contains_key(p.key.as_str())).map(|p| p.key.clone()).collect(),
    }
}

fn num(x: f64) -> String {
    format!("{x:.4}")
}

/// `affordance,poles,alpha,beta,K,M,kano` with single-letter categories.
pub fn write_categorization_csv<W: Write>(w: W, points: &[KanoPoint]) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["affordance", "poles", "alpha", "beta", "K", "M", "kano"])?;
    for p in points {
        out.write_record([
            p.key.clone(),
            p.poles.clone(),
            num(p.alpha),
            num(p.beta),
            num(p.k),
            num(p.m),
            p.category.letter().to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// One row of an externally supplied coefficient table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientRow {
    /// Defaults to `coefficients` when the table has no `window` column.
    #[serde(default = "default_window")]
    pub window: String,
    pub affordance: String,
    #[serde(default)]
    pub poles: String,
    pub alpha: f64,
    pub beta: f64,
}

fn default_window() -> String {
    "coefficients".into()
}

/// Read `affordance,alpha,beta` rows, with optional `window` and `poles`
/// columns. Other columns are ignored.
pub fn read_coefficients_csv<R: std::io::Read>(r: R) -> Result<Vec<CoefficientRow>, KanoError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let mut out = Vec::new();
    for rec in rdr.deserialize::<CoefficientRow>() {
        let row = rec.map_err(|e| KanoError::Coefficients {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        if !(row.alpha.is_finite() && row.beta.is_finite()) {
            return Err(KanoError::Coefficients {
                line: out.len() as u64 + 2,
                message: format!("non-finite coefficient for {}", row.affordance),
            });
        }
        out.push(row);
    }
    Ok(out)
}

/// `affordance,window_a,window_b,cat_a,cat_b,delta_K,delta_M` for the
/// common keys.
pub fn write_transition_csv<W: Write>(w: W, report: &TransitionReport) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["affordance", "window_a", "window_b", "cat_a", "cat_b", "delta_K", "delta_M"])?;
    for t in &report.common {
        out.write_record([
            t.key.clone(),
            report.window_a.clone(),
            report.window_b.clone(),
            t.cat_a.letter().to_string(),
            t.cat_b.letter().to_string(),
            num(t.delta_k),
            num(t.delta_m),
        ])?;
    }
    out.flush()?;
    Ok(())
}
