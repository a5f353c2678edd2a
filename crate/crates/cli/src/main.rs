use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

use kanodrift_cli::commands::{cmd_analyze, cmd_compare, cmd_extract, cmd_simulate, load_spec, Outcome};
use kanodrift_cli::{init_threads, PipelineConfig, EXIT_INPUT};

#[derive(Parser)]
#[command(name = "kanodrift", version, about = "Mine product affordances from reviews and track their Kano categories")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML or JSON pipeline config
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[arg(long)]
    lexicon_dir: Option<PathBuf>,
    /// Worker threads; 1 gives bit-reproducible output
    #[arg(long)]
    threads: Option<usize>,
    /// Log level (error, warn, info, debug)
    #[arg(long, default_value = "warn")]
    log: String,
}

#[derive(Args, Clone)]
struct Selection {
    #[arg(long)]
    reviews: Option<PathBuf>,
    #[arg(long)]
    exclusion_list: Option<PathBuf>,
    #[arg(long)]
    min_reviews: Option<usize>,
    #[arg(long)]
    top_n: Option<usize>,
    /// Product ids to analyze as windows (comma separated)
    #[arg(long, value_delimiter = ',')]
    products: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Extract affordance mentions from parsed reviews
    Extract {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        sel: Selection,
        #[arg(long)]
        conllu: Option<PathBuf>,
    },
    /// Fit each window and categorize its affordances
    Analyze {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        sel: Selection,
        #[arg(long)]
        mentions: Option<PathBuf>,
        /// Categorize an (alpha, beta) table instead of fitting
        #[arg(long)]
        from_coefficients: Option<PathBuf>,
        #[arg(long)]
        k: Option<f64>,
        #[arg(long)]
        m: Option<f64>,
    },
    /// Diff the categories of two analyzed windows
    Compare {
        #[command(flatten)]
        common: Common,
        /// Window labels to compare (default: the first two analyzed)
        #[arg(long, num_args = 2, value_names = ["A", "B"])]
        windows: Option<Vec<String>>,
    },
    /// Generate a synthetic corpus with known ground truth
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Synth spec (JSON or TOML); the bundled demo when absent
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn base_config(c: &Common) -> Result<PipelineConfig> {
    let mut cfg = match &c.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(v) = &c.output_dir {
        cfg.output_dir = v.clone();
    }
    if let Some(v) = &c.lexicon_dir {
        cfg.lexicon_dir = Some(v.clone());
    }
    if c.threads.is_some() {
        cfg.threads = c.threads;
    }
    Ok(cfg)
}

fn apply_selection(cfg: &mut PipelineConfig, s: &Selection) {
    if let Some(v) = &s.reviews {
        cfg.reviews = Some(v.clone());
    }
    if let Some(v) = &s.exclusion_list {
        cfg.exclusion_list = Some(v.clone());
    }
    if let Some(v) = s.min_reviews {
        cfg.min_reviews = v;
    }
    if let Some(v) = s.top_n {
        cfg.top_n = v;
    }
    if !s.products.is_empty() {
        cfg.products = s.products.clone();
    }
}

fn init_log(level: &str) {
    let _ = env_logger::Builder::new()
        .parse_filters(level)
        .format_timestamp(None)
        .try_init();
}

fn run(cli: Cli) -> Result<Outcome> {
    match cli.command {
        Command::Extract { common, sel, conllu } => {
            init_log(&common.log);
            let mut cfg = base_config(&common)?;
            apply_selection(&mut cfg, &sel);
            if conllu.is_some() {
                cfg.conllu = conllu;
            }
            let exec = init_threads(cfg.threads)?;
            let stats = cmd_extract(&cfg, exec)?;
            println!("{}", serde_json::to_string_pretty(&stats)?);
            Ok(Outcome::Success)
        }
        Command::Analyze {
            common,
            sel,
            mentions,
            from_coefficients,
            k,
            m,
        } => {
            init_log(&common.log);
            let mut cfg = base_config(&common)?;
            apply_selection(&mut cfg, &sel);
            if mentions.is_some() {
                cfg.mentions = mentions;
            }
            if let Some(v) = k {
                cfg.k = v;
            }
            if let Some(v) = m {
                cfg.m = v;
            }
            let exec = init_threads(cfg.threads)?;
            let (index, outcome) = cmd_analyze(&cfg, from_coefficients.as_deref(), exec)?;
            for w in &index.windows {
                println!("{}\t{} affordances\t{}", w.label, w.keys, cfg.output_dir.join(&w.files.categorization).display());
            }
            Ok(outcome)
        }
        Command::Compare { common, windows } => {
            init_log(&common.log);
            let cfg = base_config(&common)?;
            let pair = windows.as_deref().map(|w| (w[0].as_str(), w[1].as_str()));
            let report = cmd_compare(&cfg, pair)?;
            let changed = report.common.iter().filter(|t| !t.is_stable()).count();
            println!(
                "{} -> {}: {} common, {} changed, {} only in {}, {} only in {}",
                report.window_a,
                report.window_b,
                report.common.len(),
                changed,
                report.only_a.len(),
                report.window_a,
                report.only_b.len(),
                report.window_b
            );
            Ok(Outcome::Success)
        }
        Command::Simulate { common, spec, seed } => {
            init_log(&common.log);
            let cfg = base_config(&common)?;
            let spec = load_spec(spec.as_deref())?;
            let out = cmd_simulate(&cfg, spec, seed)?;
            println!("{}", out.manifest.display());
            Ok(Outcome::Success)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(outcome) => ExitCode::from(outcome.exit_code() as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_INPUT as u8)
        }
    }
}
