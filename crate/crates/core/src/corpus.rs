//! Review records: loading, credibility filtering and windowing.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::Diagnostic;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read {path}: {source}")]
    Unreadable {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv input has no usable header: {0}")]
    BadHeader(String),
    #[error("windows {0:?} and {1:?} overlap")]
    OverlappingWindows(String, String),
    #[error("window {0:?} is empty or reversed (start must precede end)")]
    EmptyWindow(String),
    #[error("duplicate window label {0:?}")]
    DuplicateLabel(String),
    #[error("unknown review format {0:?} (expected jsonl or csv)")]
    UnknownFormat(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// One review as posted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReviewRecord {
    pub id: String,
    pub body: String,
    /// Star rating, always in `1..=5`.
    pub stars: u8,
    pub posted_at: NaiveDate,
    pub verified: bool,
    pub helpful_votes: u32,
    pub product_id: String,
}

/// Wire shape of a row before validation. Loose types so range problems
/// surface as diagnostics instead of opaque parse failures.
#[derive(Debug, Deserialize)]
struct RawReview {
    id: String,
    body: String,
    stars: i64,
    posted_at: String,
    verified: RawBool,
    helpful_votes: i64,
    product_id: String,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum RawBool {
    Bool(bool),
    Text(String),
}

impl RawReview {
    fn validate(self) -> Result<ReviewRecord, String> {
        if !(1..=5).contains(&self.stars) {
            return Err(format!("stars={} outside the rating range 1..=5", self.stars));
        }
        let posted_at = NaiveDate::parse_from_str(&self.posted_at, "%Y-%m-%d")
            .map_err(|e| format!("posted_at {:?} is not an ISO-8601 date: {}", self.posted_at, e))?;
        let verified = match self.verified {
            RawBool::Bool(b) => b,
            RawBool::Text(t) => match t.trim().to_ascii_lowercase().as_str() {
                "true" | "1" | "yes" => true,
                "false" | "0" | "no" => false,
                other => return Err(format!("verified {:?} is not a boolean", other)),
            },
        };
        if self.helpful_votes < 0 {
            return Err(format!("helpful_votes={} is negative", self.helpful_votes));
        }
        let helpful_votes = u32::try_from(self.helpful_votes)
            .map_err(|_| format!("helpful_votes={} is too large", self.helpful_votes))?;
        Ok(ReviewRecord {
            id: self.id,
            body: self.body,
            stars: self.stars as u8,
            posted_at,
            verified,
            helpful_votes,
            product_id: self.product_id,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReviewFormat {
    Jsonl,
    Csv,
}

impl ReviewFormat {
    /// Guess from a file extension; anything that is not `.csv` is JSONL.
    pub fn from_path(path: &Path) -> ReviewFormat {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => ReviewFormat::Csv,
            _ => ReviewFormat::Jsonl,
        }
    }
}

impl std::str::FromStr for ReviewFormat {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "jsonl" | "json" => Ok(ReviewFormat::Jsonl),
            "csv" => Ok(ReviewFormat::Csv),
            other => Err(CorpusError::UnknownFormat(other.to_string())),
        }
    }
}

/// Loaded records plus per-row problems.
#[derive(Debug, Clone, Default)]
pub struct LoadReport {
    pub records: Vec<ReviewRecord>,
    pub diagnostics: Vec<Diagnostic>,
}

pub fn load_reviews(path: &Path, format: ReviewFormat) -> Result<LoadReport, CorpusError> {
    let file = File::open(path).map_err(|source| CorpusError::Unreadable {
        path: path.display().to_string(),
        source,
    })?;
    read_reviews(BufReader::new(file), format)
}

pub fn read_reviews<R: Read>(reader: R, format: ReviewFormat) -> Result<LoadReport, CorpusError> {
    match format {
        ReviewFormat::Jsonl => read_jsonl(BufReader::new(reader)),
        ReviewFormat::Csv => read_csv(reader),
    }
}

fn read_jsonl<R: BufRead>(reader: R) -> Result<LoadReport, CorpusError> {
    let mut report = LoadReport::default();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let lineno = i + 1;
        match serde_json::from_str::<RawReview>(&line) {
            Ok(raw) => match raw.validate() {
                Ok(rec) => report.records.push(rec),
                Err(msg) => report.diagnostics.push(Diagnostic::at(lineno, msg)),
            },
            Err(e) => report.diagnostics.push(Diagnostic::at(lineno, format!("malformed row: {}", e))),
        }
    }
    Ok(report)
}

const CSV_HEADER: [&str; 7] = ["id", "body", "stars", "posted_at", "verified", "helpful_votes", "product_id"];

fn read_csv<R: Read>(reader: R) -> Result<LoadReport, CorpusError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    for field in CSV_HEADER {
        if !headers.iter().any(|h| h.trim() == field) {
            return Err(CorpusError::BadHeader(format!("missing column {:?}", field)));
        }
    }
    let mut report = LoadReport::default();
    for result in rdr.records() {
        let (lineno, row) = match result {
            Ok(row) => (row.position().map(|p| p.line() as usize).unwrap_or(0), row),
            Err(e) => {
                let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
                report.diagnostics.push(Diagnostic::at(line, format!("malformed row: {}", e)));
                continue;
            }
        };
        let get = |name: &str| -> Option<&str> {
            headers.iter().position(|h| h.trim() == name).and_then(|i| row.get(i))
        };
        let parsed = (|| -> Result<ReviewRecord, String> {
            let field = |name: &str| get(name).ok_or_else(|| format!("missing field {:?}", name));
            let int = |name: &str| -> Result<i64, String> {
                let v = field(name)?;
                v.trim().parse::<i64>().map_err(|_| format!("{} {:?} is not an integer", name, v))
            };
            RawReview {
                id: field("id")?.to_string(),
                body: field("body")?.to_string(),
                stars: int("stars")?,
                posted_at: field("posted_at")?.trim().to_string(),
                verified: RawBool::Text(field("verified")?.to_string()),
                helpful_votes: int("helpful_votes")?,
                product_id: field("product_id")?.to_string(),
            }
            .validate()
        })();
        match parsed {
            Ok(rec) => report.records.push(rec),
            Err(msg) => report.diagnostics.push(Diagnostic::at(lineno, msg)),
        }
    }
    Ok(report)
}

pub fn write_reviews<W: Write>(writer: W, records: &[ReviewRecord], format: ReviewFormat) -> Result<(), CorpusError> {
    match format {
        ReviewFormat::Jsonl => {
            let mut w = std::io::BufWriter::new(writer);
            for rec in records {
                serde_json::to_writer(&mut w, rec)?;
                w.write_all(b"\n")?;
            }
            w.flush()?;
        }
        ReviewFormat::Csv => {
            let mut w = csv::Writer::from_writer(writer);
            w.write_record(CSV_HEADER)?;
            for rec in records {
                w.write_record([
                    rec.id.as_str(),
                    rec.body.as_str(),
                    &rec.stars.to_string(),
                    &rec.posted_at.format("%Y-%m-%d").to_string(),
                    if rec.verified { "true" } else { "false" },
                    &rec.helpful_votes.to_string(),
                    rec.product_id.as_str(),
                ])?;
            }
            w.flush()?;
        }
    }
    Ok(())
}

/// Which reviews count as credible.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct CredibilityPolicy {
    pub min_helpful_votes: u32,
    pub require_verified: bool,
}

impl Default for CredibilityPolicy {
    /// At least one helpful vote and a verified-purchase badge.
    fn default() -> Self {
        CredibilityPolicy {
            min_helpful_votes: 1,
            require_verified: true,
        }
    }
}

impl CredibilityPolicy {
    pub fn accepts(&self, r: &ReviewRecord) -> bool {
        r.helpful_votes >= self.min_helpful_votes && (r.verified || !self.require_verified)
    }
}

pub fn filter_credible(reviews: &[ReviewRecord], policy: &CredibilityPolicy) -> Vec<ReviewRecord> {
    reviews.iter().filter(|r| policy.accepts(r)).cloned().collect()
}

/// Half-open date interval `[start, end)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeWindow {
    pub label: String,
    pub start: NaiveDate,
    pub end: NaiveDate,
}

impl TimeWindow {
    pub fn contains(&self, d: NaiveDate) -> bool {
        self.start <= d && d < self.end
    }
}

/// How reviews are grouped into comparison windows.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Windowing {
    /// By posting date.
    Dates(Vec<TimeWindow>),
    /// By product id, one window per listed product (label = product id).
    /// An empty list means every distinct product id, sorted.
    Products(Vec<String>),
}

/// Reviews grouped by window label, in window order.
#[derive(Debug, Clone, Default)]
pub struct WindowSplit {
    pub windows: Vec<(String, Vec<ReviewRecord>)>,
    /// Reviews that fell in no window.
    pub excluded: usize,
}

impl WindowSplit {
    pub fn get(&self, label: &str) -> Option<&[ReviewRecord]> {
        self.windows.iter().find(|(l, _)| l == label).map(|(_, v)| v.as_slice())
    }

    pub fn labels(&self) -> Vec<&str> {
        self.windows.iter().map(|(l, _)| l.as_str()).collect()
    }
}

pub fn validate_windows(windows: &[TimeWindow]) -> Result<(), CorpusError> {
    let mut seen = BTreeSet::new();
    for w in windows {
        if w.start >= w.end {
            return Err(CorpusError::EmptyWindow(w.label.clone()));
        }
        if !seen.insert(w.label.as_str()) {
            return Err(CorpusError::DuplicateLabel(w.label.clone()));
        }
    }
    for (i, a) in windows.iter().enumerate() {
        for b in &windows[i + 1..] {
            if a.start < b.end && b.start < a.end {
                return Err(CorpusError::OverlappingWindows(a.label.clone(), b.label.clone()));
            }
        }
    }
    Ok(())
}

/// Assign each review to the date window containing its `posted_at`.
pub fn split_windows(reviews: &[ReviewRecord], windows: &[TimeWindow]) -> Result<WindowSplit, CorpusError> {
    validate_windows(windows)?;
    let mut buckets: Vec<Vec<ReviewRecord>> = vec![Vec::new(); windows.len()];
    let mut excluded = 0;
    for r in reviews {
        match windows.iter().position(|w| w.contains(r.posted_at)) {
            Some(i) => buckets[i].push(r.clone()),
            None => excluded += 1,
        }
    }
    Ok(WindowSplit {
        windows: windows.iter().map(|w| w.label.clone()).zip(buckets).collect(),
        excluded,
    })
}

/// Group reviews by product id.
pub fn split_by_product(reviews: &[ReviewRecord], products: &[String]) -> Result<WindowSplit, CorpusError> {
    let labels: Vec<String> = if products.is_empty() {
        reviews
            .iter()
            .map(|r| r.product_id.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    } else {
        let mut seen = BTreeSet::new();
        for p in products {
            if !seen.insert(p) {
                return Err(CorpusError::DuplicateLabel(p.clone()));
            }
        }
        products.to_vec()
    };
    let index: BTreeMap<&str, usize> = labels.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();
    let mut buckets: Vec<Vec<ReviewRecord>> = vec![Vec::new(); labels.len()];
    let mut excluded = 0;
    for r in reviews {
        match index.get(r.product_id.as_str()) {
            Some(&i) => buckets[i].push(r.clone()),
            None => excluded += 1,
        }
    }
    Ok(WindowSplit {
        windows: labels.into_iter().zip(buckets).collect(),
        excluded,
    })
}

pub fn split(reviews: &[ReviewRecord], windowing: &Windowing) -> Result<WindowSplit, CorpusError> {
    match windowing {
        Windowing::Dates(w) => split_windows(reviews, w),
        Windowing::Products(p) => split_by_product(reviews, p),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn date(s: &str) -> NaiveDate {
        NaiveDate::parse_from_str(s, "%Y-%m-%d").unwrap()
    }

    fn review(id: &str, stars: u8, posted: &str, verified: bool, votes: u32) -> ReviewRecord {
        ReviewRecord {
            id: id.into(),
            body: format!("body of {}", id),
            stars,
            posted_at: date(posted),
            verified,
            helpful_votes: votes,
            product_id: "KP2".into(),
        }
    }

    const ROW: &str = r#"{"id":"r1","body":"I can read books at night","stars":5,"posted_at":"2015-06-30","verified":true,"helpful_votes":2,"product_id":"KP2"}"#;

    #[test]
    fn jsonl_valid_rows() {
        let input = format!("{}\n{}\n{}\n", ROW, ROW.replace("r1", "r2"), ROW.replace("r1", "r3"));
        let rep = read_reviews(input.as_bytes(), ReviewFormat::Jsonl).unwrap();
        assert_eq!(rep.records.len(), 3);
        assert!(rep.diagnostics.is_empty());
        assert_eq!(rep.records[2].id, "r3");
    }

    #[test]
    fn out_of_range_stars_is_diagnosed() {
        let input = format!("{}\n{}\n", ROW, ROW.replace("\"stars\":5", "\"stars\":6"));
        let rep = read_reviews(input.as_bytes(), ReviewFormat::Jsonl).unwrap();
        assert_eq!(rep.records.len(), 1);
        assert_eq!(rep.diagnostics.len(), 1);
        assert_eq!(rep.diagnostics[0].line, Some(2));
        assert!(rep.diagnostics[0].message.contains("1..=5"));
    }

    #[test]
    fn bad_date_and_garbage_are_diagnosed() {
        let input = format!("{}\nnot json\n", ROW.replace("2015-06-30", "2015-13-01"));
        let rep = read_reviews(input.as_bytes(), ReviewFormat::Jsonl).unwrap();
        assert!(rep.records.is_empty());
        assert_eq!(rep.diagnostics.len(), 2);
    }

    #[test]
    fn csv_quoting_and_diagnostics() {
        let input = "id,body,stars,posted_at,verified,helpful_votes,product_id\n\
                     a,\"Fast, light, \"\"great\"\"\",4,2016-01-02,true,3,KP3\n\
                     b,meh,0,2016-01-02,true,3,KP3\n";
        let rep = read_reviews(input.as_bytes(), ReviewFormat::Csv).unwrap();
        assert_eq!(rep.records.len(), 1);
        assert_eq!(rep.records[0].body, "Fast, light, \"great\"");
        assert_eq!(rep.diagnostics.len(), 1);
        assert_eq!(rep.diagnostics[0].line, Some(3));
    }

    #[test]
    fn csv_missing_header_is_fatal() {
        let input = "id,body\na,b\n";
        assert!(matches!(read_reviews(input.as_bytes(), ReviewFormat::Csv), Err(CorpusError::BadHeader(_))));
    }

    #[test]
    fn unreadable_file_is_fatal() {
        let err = load_reviews(Path::new("/nonexistent/reviews.jsonl"), ReviewFormat::Jsonl).unwrap_err();
        assert!(matches!(err, CorpusError::Unreadable { .. }));
    }

    #[test]
    fn credibility_defaults() {
        let p = CredibilityPolicy::default();
        assert!(p.accepts(&review("a", 5, "2014-01-01", true, 1)));
        assert!(!p.accepts(&review("b", 5, "2014-01-01", false, 5)));
        assert!(!p.accepts(&review("c", 5, "2014-01-01", true, 0)));
    }

    fn kindle_windows() -> Vec<TimeWindow> {
        vec![
            TimeWindow { label: "A".into(), start: date("2013-09-01"), end: date("2015-07-01") },
            TimeWindow { label: "B".into(), start: date("2015-07-01"), end: date("2018-05-01") },
        ]
    }

    #[test]
    fn window_boundaries() {
        let rs = vec![
            review("a", 5, "2015-06-30", true, 1),
            review("b", 5, "2015-07-01", true, 1),
            review("c", 5, "2019-01-01", true, 1),
        ];
        let split = split_windows(&rs, &kindle_windows()).unwrap();
        assert_eq!(split.get("A").unwrap()[0].id, "a");
        assert_eq!(split.get("B").unwrap()[0].id, "b");
        assert_eq!(split.excluded, 1);
    }

    #[test]
    fn overlapping_windows_rejected() {
        let mut w = kindle_windows();
        w[1].start = date("2015-06-01");
        assert!(matches!(split_windows(&[], &w), Err(CorpusError::OverlappingWindows(..))));
    }

    #[test]
    fn product_split_defaults_to_sorted_ids() {
        let mut a = review("a", 5, "2015-06-30", true, 1);
        a.product_id = "KP3".into();
        let b = review("b", 4, "2015-06-30", true, 1);
        let split = split_by_product(&[a, b], &[]).unwrap();
        assert_eq!(split.labels(), vec!["KP2", "KP3"]);
        let only = split_by_product(&split.windows[1].1, &["KP2".to_string()]).unwrap();
        assert_eq!(only.excluded, 1);
    }

    fn arb_review() -> impl Strategy<Value = ReviewRecord> {
        (
            "[a-z0-9]{1,8}",
            "[ -~]{0,40}",
            1u8..=5,
            0i64..3000,
            any::<bool>(),
            0u32..5,
            prop::sample::select(vec!["KP2", "KP3"]),
        )
            .prop_map(|(id, body, stars, days, verified, votes, product)| ReviewRecord {
                id,
                body,
                stars,
                posted_at: date("2012-01-01") + chrono::Duration::days(days),
                verified,
                helpful_votes: votes,
                product_id: product.to_string(),
            })
    }

    proptest! {
        #[test]
        fn filter_is_idempotent(rs in prop::collection::vec(arb_review(), 0..40), votes in 0u32..3, req in any::<bool>()) {
            let p = CredibilityPolicy { min_helpful_votes: votes, require_verified: req };
            let once = filter_credible(&rs, &p);
            prop_assert_eq!(filter_credible(&once, &p), once);
        }

        #[test]
        fn split_partitions(rs in prop::collection::vec(arb_review(), 0..60)) {
            let s = split_windows(&rs, &kindle_windows()).unwrap();
            let total: usize = s.windows.iter().map(|(_, v)| v.len()).sum();
            prop_assert_eq!(total + s.excluded, rs.len());
        }

        #[test]
        fn serialization_round_trip(rs in prop::collection::vec(arb_review(), 0..20), csv in any::<bool>()) {
            let fmt = if csv { ReviewFormat::Csv } else { ReviewFormat::Jsonl };
            let mut buf = Vec::new();
            write_reviews(&mut buf, &rs, fmt).unwrap();
            let back = read_reviews(buf.as_slice(), fmt).unwrap();
            prop_assert!(back.diagnostics.is_empty());
            prop_assert_eq!(back.records, rs);
        }
    }
}
