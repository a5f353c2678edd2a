//! Pipeline configuration: a flat TOML or JSON document plus flag overrides.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use kanodrift::corpus::{CredibilityPolicy, TimeWindow, Windowing};
use kanodrift::kano::KanoThresholds;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Review records, `.jsonl` or `.csv`.
    pub reviews: Option<PathBuf>,
    /// Dependency parses of the review sentences.
    pub conllu: Option<PathBuf>,
    /// Lexicon directory; the bundled seed lexicons when absent.
    pub lexicon_dir: Option<PathBuf>,
    pub exclusion_list: Option<PathBuf>,
    /// Mentions for `analyze`; defaults to `<output_dir>/mentions.jsonl`.
    pub mentions: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub min_helpful_votes: u32,
    pub require_verified: bool,
    /// Date windows. When empty, reviews are windowed by product id.
    pub windows: Vec<TimeWindow>,
    /// Product ids to use as windows; empty means every product.
    pub products: Vec<String>,
    pub min_reviews: usize,
    pub top_n: usize,
    pub k: f64,
    pub m: f64,
    pub max_iterations: usize,
    pub threads: Option<usize>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let policy = CredibilityPolicy::default();
        let t = KanoThresholds::default();
        PipelineConfig {
            reviews: None,
            conllu: None,
            lexicon_dir: None,
            exclusion_list: None,
            mentions: None,
            output_dir: PathBuf::from("out"),
            min_helpful_votes: policy.min_helpful_votes,
            require_verified: policy.require_verified,
            windows: Vec::new(),
            products: Vec::new(),
            min_reviews: 10,
            top_n: 50,
            k: t.k,
            m: t.m,
            max_iterations: 100,
            threads: None,
        }
    }
}

impl PipelineConfig {
    /// Read a config file; `.json` is JSON, anything else TOML. Relative
    /// paths inside are taken relative to the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        let mut cfg: PipelineConfig = if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
            serde_json::from_str(&text).with_context(|| format!("invalid config {}", path.display()))?
        } else {
            toml::from_str(&text).with_context(|| format!("invalid config {}", path.display()))?
        };
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [
            &mut cfg.reviews,
            &mut cfg.conllu,
            &mut cfg.lexicon_dir,
            &mut cfg.exclusion_list,
            &mut cfg.mentions,
        ]
        .into_iter()
        .flatten()
        {
            *p = rebase(base, p);
        }
        cfg.output_dir = rebase(base, &cfg.output_dir);
        Ok(cfg)
    }

    pub fn thresholds(&self) -> Result<KanoThresholds> {
        Ok(KanoThresholds::new(self.k, self.m)?)
    }

    pub fn credibility(&self) -> CredibilityPolicy {
        CredibilityPolicy {
            min_helpful_votes: self.min_helpful_votes,
            require_verified: self.require_verified,
        }
    }

    pub fn windowing(&self) -> Result<Windowing> {
        match (self.windows.is_empty(), self.products.is_empty()) {
            (false, false) => bail!("config sets both `windows` and `products`; choose one"),
            (false, true) => Ok(Windowing::Dates(self.windows.clone())),
            _ => Ok(Windowing::Products(self.products.clone())),
        }
    }

    pub fn mentions_path(&self) -> PathBuf {
        self.mentions.clone().unwrap_or_else(|| self.output_dir.join("mentions.jsonl"))
    }

    pub fn require<'a>(&self, field: &str, value: &'a Option<PathBuf>) -> Result<&'a Path> {
        match value {
            Some(p) => Ok(p),
            None => bail!("`{field}` is not set (config file or --{})", field.replace('_', "-")),
        }
    }
}

fn rebase(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}
