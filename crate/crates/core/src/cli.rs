//! The `ltss` command line.
//!
//! Every subcommand writes JSON. Output files are written atomically, and
//! results do not depend on `--threads`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::dataset::{load_manifest, write_manifest, write_synthetic, SyntheticProfile};
use crate::error::{Error, Result};
use crate::eval::{evaluate, EvalReport};
use crate::io::{to_json_bytes, write_atomic};
use crate::matcher::{hungarian, match_frequency_based, CostMatrix, MatchProblem};
use crate::sampler::{apply_report, sample_lt, SamplerConfig, SamplerReport};
use crate::stats::{compute_stats, split_classes, ClassStats, FrequencySplit, Mode, StatsFile};

#[derive(Debug, Parser)]
#[command(
    name = "ltss",
    version,
    about = "Long-tailed semantic segmentation toolkit"
)]
pub struct Cli {
    /// Worker threads (default: all cores)
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Log level: error, warn, info, debug or trace
    #[arg(long, global = true, default_value = "warn")]
    pub log_level: String,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CliMode {
    Image,
    Pixel,
}

impl From<CliMode> for Mode {
    fn from(m: CliMode) -> Self {
        match m {
            CliMode::Image => Mode::Image,
            CliMode::Pixel => Mode::Pixel,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Class weights and Gini coefficients of a dataset
    Stats {
        #[arg(long)]
        manifest: PathBuf,
        /// Stats JSON destination (stdout if omitted)
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the index cache (manifest plus per-class pixel counts)
        #[arg(long)]
        emit_index: Option<PathBuf>,
        #[arg(long)]
        pretty: bool,
    },
    /// Carve a long-tailed subset out of a dataset
    SampleLt {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, value_enum, default_value = "image")]
        mode: CliMode,
        #[arg(long)]
        target_gini: f64,
        /// Elimination budget (default: 70% of the images)
        #[arg(long)]
        max_eliminated: Option<usize>,
        #[arg(long)]
        out_manifest: PathBuf,
        #[arg(long)]
        report: PathBuf,
        #[arg(long)]
        pretty: bool,
    },
    /// Frequent/common/rare class split from a stats file
    Split {
        #[arg(long)]
        stats: PathBuf,
        #[arg(long, value_enum)]
        mode: CliMode,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        pretty: bool,
    },
    /// Overall and per-split mIoU of predictions
    Eval {
        #[arg(long)]
        gt_manifest: PathBuf,
        /// Directory holding `<image id>.png` predictions
        #[arg(long)]
        pred_dir: PathBuf,
        /// Stats JSON of the training set
        #[arg(long)]
        train_stats: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        pretty: bool,
    },
    /// Match queries to targets
    Match {
        /// m rows x n comma-separated costs
        #[arg(long)]
        cost: PathBuf,
        /// n target class ids
        #[arg(long)]
        classes: Option<PathBuf>,
        /// Stats JSON of the training set
        #[arg(long)]
        freq: Option<PathBuf>,
        #[arg(long)]
        t: Option<f64>,
        #[arg(long, default_value_t = 1.0)]
        s: f64,
        /// Plain Hungarian matching
        #[arg(long)]
        one_to_one: bool,
        /// Use pixel-level instead of image-level class frequencies
        #[arg(long)]
        pixel_frequency: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a synthetic label-map dataset
    GenSynth {
        #[arg(long)]
        classes: u32,
        #[arg(long)]
        images: u32,
        #[arg(long, default_value_t = 0.0)]
        rank_decay: f64,
        #[arg(long, default_value_t = 32)]
        size: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Runs a parsed command line inside a pool of `--threads` workers.
pub fn run(cli: Cli) -> Result<()> {
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::Usage("--threads must be at least 1".into()));
        }
        pool = pool.num_threads(n);
    }
    let pool = pool
        .build()
        .map_err(|e| Error::Usage(format!("cannot start worker pool: {e}")))?;
    pool.install(|| run_command(cli.command))
}

fn run_command(command: Command) -> Result<()> {
    match command {
        Command::Stats {
            manifest,
            out,
            emit_index,
            pretty,
        } => {
            let index = load_manifest(&manifest)?;
            let stats = compute_stats(&index)?;
            if let Some(path) = emit_index {
                write_manifest(&index, &path)?;
            }
            emit(
                &stats.to_file(),
                out.as_deref(),
                pretty.then(|| stats_table(&stats)),
            )
        }
        Command::SampleLt {
            manifest,
            mode,
            target_gini,
            max_eliminated,
            out_manifest,
            report,
            pretty,
        } => {
            if !(target_gini > 0.0 && target_gini < 1.0) {
                return Err(Error::Usage(format!(
                    "--target-gini must lie in (0, 1), got {target_gini}"
                )));
            }
            let index = load_manifest(&manifest)?;
            let mut config = SamplerConfig::new(target_gini, mode.into());
            config.max_eliminated = max_eliminated;
            let result = sample_lt(&index, &config)?;
            let subset = apply_report(&index, &result)?;
            let subset = subset.with_name(format!("{}-lt", index.name()));
            write_manifest(&subset, &out_manifest)?;
            emit(
                &result,
                Some(&report),
                pretty.then(|| sampler_table(&result)),
            )
        }
        Command::Split {
            stats,
            mode,
            out,
            pretty,
        } => {
            let stats = ClassStats::read(&stats)?;
            let split = split_classes(&stats, mode.into());
            emit(&split, out.as_deref(), pretty.then(|| split_table(&split)))
        }
        Command::Eval {
            gt_manifest,
            pred_dir,
            train_stats,
            out,
            pretty,
        } => {
            let index = load_manifest(&gt_manifest)?;
            let stats = ClassStats::read(&train_stats)?;
            let report = evaluate(&index, &pred_dir, &stats)?;
            emit(&report, out.as_deref(), pretty.then(|| eval_table(&report)))
        }
        Command::Match {
            cost,
            classes,
            freq,
            t,
            s,
            one_to_one,
            pixel_frequency,
            out,
        } => {
            let cost = read_cost_csv(&cost)?;
            let result = if one_to_one {
                hungarian(&cost)?
            } else {
                let (Some(classes), Some(freq), Some(t)) = (classes, freq, t) else {
                    return Err(Error::Usage(
                        "frequency-based matching needs --classes, --freq and --t".into(),
                    ));
                };
                if !(t > 0.0 && s >= 1.0) {
                    return Err(Error::Usage(format!(
                        "need --t > 0 and --s >= 1, got t = {t}, s = {s}"
                    )));
                }
                let target_classes = read_class_csv(&classes)?;
                let stats = ClassStats::read(&freq)?;
                let mode = if pixel_frequency {
                    Mode::Pixel
                } else {
                    Mode::Image
                };
                let problem = build_problem(cost, target_classes, &stats, mode, t, s)?;
                match_frequency_based(&problem)?
            };
            emit(&result, out.as_deref(), None::<String>)
        }
        Command::GenSynth {
            classes,
            images,
            rank_decay,
            size,
            seed,
            out,
        } => {
            let profile = SyntheticProfile {
                num_classes: classes,
                num_images: images,
                rank_decay,
                image_size: size,
                seed,
            };
            profile
                .validate()
                .map_err(|e| Error::Usage(e.to_string()))?;
            let index = write_synthetic(&profile, &out)?;
            log::info!("wrote {} images to {}", index.len(), out.display());
            Ok(())
        }
    }
}

/// Frequencies for the classes among the targets, taken from training stats.
pub fn build_problem(
    cost: CostMatrix,
    target_classes: Vec<u32>,
    stats: &ClassStats,
    mode: Mode,
    t: f64,
    s: f64,
) -> Result<MatchProblem> {
    let freqs = stats.frequencies(mode);
    let mut class_frequency = BTreeMap::new();
    for &c in &target_classes {
        let p = *freqs.get(c as usize).ok_or_else(|| {
            Error::InvalidParameter(format!(
                "target class {c} is outside the {} classes of the statistics",
                freqs.len()
            ))
        })?;
        class_frequency.insert(c, p);
    }
    let problem = MatchProblem {
        cost,
        target_classes,
        class_frequency,
        t,
        s,
    };
    problem.validate()?;
    Ok(problem)
}

fn csv_reader(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Csv {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
}

fn csv_fields(path: &Path) -> Result<Vec<Vec<String>>> {
    let mut rows = Vec::new();
    for record in csv_reader(path)?.records() {
        let record = record.map_err(|e| Error::Csv {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        let fields: Vec<String> = record
            .iter()
            .filter(|f| !f.is_empty())
            .map(str::to_string)
            .collect();
        if !fields.is_empty() {
            rows.push(fields);
        }
    }
    Ok(rows)
}

pub fn read_cost_csv(path: &Path) -> Result<CostMatrix> {
    let rows = csv_fields(path)?
        .into_iter()
        .map(|row| {
            row.iter()
                .map(|f| {
                    f.parse::<f64>().map_err(|_| Error::Csv {
                        path: path.to_path_buf(),
                        message: format!("not a number: {f:?}"),
                    })
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    if rows.is_empty() {
        return Err(Error::Csv {
            path: path.to_path_buf(),
            message: "empty cost matrix".into(),
        });
    }
    CostMatrix::from_rows(&rows)
}

/// Class ids, one per line or comma-separated.
pub fn read_class_csv(path: &Path) -> Result<Vec<u32>> {
    csv_fields(path)?
        .into_iter()
        .flatten()
        .map(|f| {
            f.parse::<u32>().map_err(|_| Error::Csv {
                path: path.to_path_buf(),
                message: format!("not a class id: {f:?}"),
            })
        })
        .collect()
}

/// Writes `value` as JSON to `out` (stdout when `None`). A `table`, when
/// given, is printed to stdout; it replaces the JSON there if `out` is unset.
fn emit<T: Serialize>(value: &T, out: Option<&Path>, table: Option<String>) -> Result<()> {
    let bytes = to_json_bytes(value);
    match out {
        Some(path) => write_atomic(path, &bytes)?,
        None if table.is_none() => {
            use std::io::Write;
            std::io::stdout()
                .write_all(&bytes)
                .map_err(|e| Error::io("<stdout>", e))?;
        }
        None => {}
    }
    if let Some(t) = table {
        print!("{t}");
    }
    Ok(())
}

fn stats_table(stats: &ClassStats) -> String {
    let file: StatsFile = stats.to_file();
    let mut s = String::new();
    let _ = writeln!(
        s,
        "images {}  classes {}",
        file.mode_agnostic.num_images, file.mode_agnostic.num_classes
    );
    let _ = writeln!(
        s,
        "gini image {:.4}  pixel {:.4}",
        stats.gini_image, stats.gini_pixel
    );
    let _ = writeln!(s, "{:>6} {:>10} {:>12}", "class", "images", "pixel-frac");
    for (c, (i, p)) in stats
        .image_weights
        .iter()
        .zip(&stats.pixel_weights)
        .enumerate()
    {
        let _ = writeln!(s, "{c:>6} {i:>10} {p:>12.4}");
    }
    s
}

fn sampler_table(r: &SamplerReport) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "kept {}  eliminated {} (budget {})  stop {:?}",
        r.kept_ids.len(),
        r.eliminated_count,
        r.max_eliminated,
        r.stop_reason
    );
    let _ = writeln!(
        s,
        "gini image {:.4} -> {:.4}  pixel {:.4} -> {:.4}",
        r.initial_gini_image, r.achieved_gini_image, r.initial_gini_pixel, r.achieved_gini_pixel
    );
    s
}

fn split_table(split: &FrequencySplit) -> String {
    let fmt = |set: &std::collections::BTreeSet<u32>| {
        set.iter().map(u32::to_string).collect::<Vec<_>>().join(" ")
    };
    format!(
        "mode {}\nfrequent ({}): {}\ncommon   ({}): {}\nrare     ({}): {}\n",
        split.mode,
        split.frequent.len(),
        fmt(&split.frequent),
        split.common.len(),
        fmt(&split.common),
        split.rare.len(),
        fmt(&split.rare)
    )
}

fn eval_table(r: &EvalReport) -> String {
    let cell =
        |v: Option<f64>| v.map_or_else(|| "   -  ".to_string(), |x| format!("{:6.2}", 100.0 * x));
    let mut s = String::new();
    let _ = writeln!(s, "mIoU {:6.2}", 100.0 * r.miou);
    let _ = writeln!(s, "{:>6} {:>6} {:>6} {:>6}", "level", "r", "c", "f");
    for (name, l) in [("image", &r.image_level), ("pixel", &r.pixel_level)] {
        let _ = writeln!(
            s,
            "{name:>6} {} {} {}",
            cell(l.miou_r),
            cell(l.miou_c),
            cell(l.miou_f)
        );
    }
    s
}
