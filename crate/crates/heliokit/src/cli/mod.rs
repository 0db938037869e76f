//! The `helio` command line.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use heliokit_core::imageprep::DEFAULT_MAX_DN;
use heliokit_core::metrics::{DEFAULT_PR_K, KID_DEFAULT_SUBSETS};
use heliokit_core::stats::MetricTable;
use serde_json::{Map, Value};

use crate::config::expand_config_args;
use crate::error::HelioError;
use crate::imageio::TileFormat;
use crate::records::{parse_metric_record, read_records};
use crate::tables::read_metric_table_csv;

mod eval;
mod ingest;
mod latent;
mod report;
mod synth;

pub const THREADS_ENV: &str = "HELIO_THREADS";

#[derive(Debug, Parser)]
#[command(name = "helio", version, about = "Measurement toolkit for generative models of solar EUV images")]
pub struct Cli {
    /// key = value file supplying default flags for the subcommand.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Filter, normalize and downsample a directory of FITS files.
    Ingest(IngestArgs),
    /// Render a deterministic synthetic corpus.
    Synth(SynthArgs),
    /// Compute metrics between real and generated feature files.
    Eval(EvalArgs),
    /// Correlation matrices, study statistics, run aggregates and histograms.
    Report(ReportArgs),
    /// PCA directions and edit grids for a latent bank.
    Latent(LatentArgs),
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct IngestArgs {
    /// Directory of .fits/.fit/.fts files.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    /// Output width; must divide the input width.
    #[arg(long)]
    pub resize: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_MAX_DN)]
    pub max_dn: i64,
    /// Normalize by each image's own maximum instead of --max-dn.
    #[arg(long)]
    pub per_image_max: bool,
    #[arg(long, default_value = "QUALITY")]
    pub quality_key: String,
    #[arg(long, value_enum, default_value_t = TileFormat::Htil)]
    pub format: TileFormat,
    /// Manifest path [default: OUTPUT/manifest.jsonl].
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct SynthArgs {
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, default_value_t = 16)]
    pub count: usize,
    #[arg(long, default_value_t = 256)]
    pub resolution: usize,
    /// Disc radius as a fraction of half the width.
    #[arg(long, default_value_t = 0.8)]
    pub disc_radius: f64,
    /// Loop systems per limb quadrant.
    #[arg(long, default_value_t = 1.0)]
    pub loop_density: f64,
    #[arg(long, default_value_t = 2)]
    pub holes: usize,
    #[arg(long, default_value_t = 0.01)]
    pub noise: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = TileFormat::Htil)]
    pub format: TileFormat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PatchFeatures {
    /// Box-pooled pixels on a --patch-grid lattice.
    Pooled,
    /// Pooled pixels projected on principal directions of the real patches.
    Pca,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct EvalArgs {
    #[arg(long, default_value = "model")]
    pub model: String,
    /// Real-image features (FEAT1).
    #[arg(long)]
    pub real: Option<PathBuf>,
    /// Generated-image features (FEAT1).
    #[arg(long)]
    pub fake: Option<PathBuf>,
    /// Extra Fréchet distance from another extractor, e.g. rFID=r.feat1,g.feat1.
    #[arg(long = "pair", value_name = "METRIC=REAL,FAKE")]
    pub pairs: Vec<String>,
    /// Metrics on --real/--fake: FID, KID, precision, recall, FID-p<size>.
    #[arg(long, value_delimiter = ',')]
    pub metrics: Vec<String>,
    /// Real image folder (HTIL/PNG), needed for patch FID.
    #[arg(long)]
    pub real_images: Option<PathBuf>,
    /// Generated image folder (HTIL/PNG), needed for patch FID.
    #[arg(long)]
    pub fake_images: Option<PathBuf>,
    #[arg(long, default_value_t = 10_000)]
    pub patch_count: usize,
    #[arg(long, default_value_t = 8)]
    pub patch_grid: usize,
    #[arg(long, value_enum, default_value_t = PatchFeatures::Pooled)]
    pub patch_features: PatchFeatures,
    #[arg(long, default_value_t = 16)]
    pub patch_pca_k: usize,
    /// [default: min(1000, n_real, n_fake)]
    #[arg(long)]
    pub kid_subset_size: Option<usize>,
    #[arg(long, default_value_t = KID_DEFAULT_SUBSETS)]
    pub kid_subsets: usize,
    #[arg(long, default_value_t = DEFAULT_PR_K)]
    pub pr_k: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Rows kept per feature file; larger files are subsampled.
    #[arg(long, default_value_t = 50_000)]
    pub sample_budget: usize,
    /// Replay a metric table (CSV or metric records) into a Spearman matrix.
    #[arg(long, value_name = "TABLE")]
    pub replay: Option<PathBuf>,
    /// Record output [default: stdout].
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct ReportArgs {
    /// Metric table: CSV (model, metric...) or metric records.
    #[arg(long)]
    pub metrics: Option<PathBuf>,
    /// Study CSV: subject_id,expertise,correct,n_questions.
    #[arg(long)]
    pub study: Option<PathBuf>,
    /// Repeated-run values, e.g. FID=4.1,4.3,3.9.
    #[arg(long = "runs", value_name = "NAME=V1,V2,...")]
    pub runs: Vec<String>,
    #[arg(long, default_value_t = 2)]
    pub decimals: usize,
    #[arg(long)]
    pub real_images: Option<PathBuf>,
    #[arg(long)]
    pub fake_images: Option<PathBuf>,
    /// Pixel value splitting the low and high tails.
    #[arg(long, default_value_t = 150)]
    pub tail_cutoff: u32,
    /// Write bar charts (PNG) here.
    #[arg(long)]
    pub plot_dir: Option<PathBuf>,
    /// Structured records [default: not written].
    #[arg(long)]
    pub records: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct LatentArgs {
    /// Latent bank (FEAT1, extractor id = space name).
    #[arg(long)]
    pub bank: PathBuf,
    #[arg(long)]
    pub k: usize,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Principal direction to edit along.
    #[arg(long, default_value_t = 0)]
    pub component: usize,
    /// Target coordinates along the component (offsets with --relative).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_values_t = [-3.0, -1.5, 0.0, 1.5, 3.0])]
    pub coords: Vec<f64>,
    #[arg(long)]
    pub relative: bool,
    /// Number of bank rows (from the top) to edit.
    #[arg(long, default_value_t = 4)]
    pub samples: usize,
}

/// Caps the global thread pool from `HELIO_THREADS`.
pub fn init_threads() -> Result<(), HelioError> {
    let Ok(raw) = std::env::var(THREADS_ENV) else { return Ok(()) };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n >= 1)
        .ok_or_else(|| HelioError::usage(format!("{THREADS_ENV}={raw:?} is not a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| HelioError::usage(format!("{THREADS_ENV}: {e}")))
}

/// Parses `args` (including the program name) and runs the command.
pub fn run(args: Vec<OsString>) -> Result<(), HelioError> {
    let args = expand_config_args(args)?;
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version.
            print!("{e}");
            return Ok(());
        }
        Err(e) => return Err(HelioError::usage(e.render().to_string().trim_end())),
    };
    match cli.command {
        Command::Ingest(a) => ingest::run(&a),
        Command::Synth(a) => synth::run(&a),
        Command::Eval(a) => eval::run(&a),
        Command::Report(a) => report::run(&a),
        Command::Latent(a) => latent::run(&a),
    }
}

// Helpers shared by the subcommands.

fn params(pairs: impl IntoIterator<Item = (&'static str, Value)>) -> Map<String, Value> {
    pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

fn path_value(p: &Option<PathBuf>) -> Value {
    p.as_ref().map_or(Value::Null, |p| Value::String(p.display().to_string()))
}

fn ensure_dir(dir: &Path) -> Result<(), HelioError> {
    std::fs::create_dir_all(dir).map_err(|e| HelioError::from(e).context(dir.display()))
}

/// Splits `NAME=REST`.
fn split_named<'a>(raw: &'a str, flag: &str) -> Result<(&'a str, &'a str), HelioError> {
    match raw.split_once('=') {
        Some((name, rest)) if !name.is_empty() => Ok((name, rest)),
        _ => Err(HelioError::usage(format!("--{flag} expects NAME=..., got {raw:?}"))),
    }
}

/// A CSV table, or metric records with the metrics every model reports.
fn load_metric_table(path: &Path) -> Result<MetricTable, HelioError> {
    let is_csv = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    if is_csv {
        return Ok(read_metric_table_csv(path)?);
    }
    let records = read_records(path).map_err(|m| HelioError::data("BadRecords", m))?;
    let rows = records
        .iter()
        .filter_map(parse_metric_record)
        .collect::<Result<Vec<_>, _>>()
        .map_err(|m| HelioError::data("BadRecords", m).context(path.display()))?;
    Ok(MetricTable::from_common_metrics(rows)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn later_flags_override_earlier_ones() {
        let cli = Cli::try_parse_from(["helio", "synth", "--output", "o", "--seed", "1", "--seed", "5"]).unwrap();
        let Command::Synth(a) = cli.command else { panic!() };
        assert_eq!(a.seed, 5);
    }

    #[test]
    fn negative_coordinates_parse() {
        let cli = Cli::try_parse_from(["helio", "latent", "--bank", "b", "--k", "2", "--out-dir", "o", "--coords", "-2,0.5"]).unwrap();
        let Command::Latent(a) = cli.command else { panic!() };
        assert_eq!(a.coords, vec![-2.0, 0.5]);
    }
}
