//! The `cflow` command line.
//!
//! Exit codes: 0 success, 1 fatal error, 2 finished with some frames skipped
//! for missing or unreadable flow, 64 usage error, 74 I/O error.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::eval::{
    correlation, frame_scores_csv, heatmap, heatmap_csv, histogram, histogram_csv, score_tracks,
    skips_csv, sweep, sweep_csv, ScoreConfig, ScoreKind, ScoreReport, SweepConfig, TtcBins,
};
use crate::flow::{parse_flo, summarize, DirFlowStore, FlowError};
use crate::metric::CFlowParams;
use crate::synth::{load_scenarios, materialize, MaterializeError};
use crate::track::{load_tracks, LoadError, DEFAULT_IOU_THRESHOLD};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FATAL: i32 = 1;
pub const EXIT_PARTIAL: i32 = 2;
pub const EXIT_USAGE: i32 = 64;
pub const EXIT_IO: i32 = 74;

#[derive(Debug, Parser)]
#[command(
    name = "cflow",
    version,
    about = "Flow-based credibility scores for pedestrian boxes"
)]
struct Cli {
    /// More log output (-v info, -vv debug, -vvv trace).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Score every ground-truth frame and write frame_scores.csv.
    Score(RunArgs),
    /// Score, then write threshold sweeps, histograms, heatmaps and correlation.
    Eval {
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        report: ReportArgs,
    },
    /// Materialize synthetic scenarios as .flo files plus tracks.jsonl.
    Synth(SynthArgs),
    /// Print the header and u statistics of a .flo file.
    Flo { path: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Gt,
    Pred,
    Both,
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Track file, one JSON record per frame.
    #[arg(long)]
    tracks: PathBuf,
    /// Directory holding the .flo files named by `flow_ref`.
    #[arg(long)]
    flows: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// TOML file with [cflow] and [eval] tables; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    k: Option<u64>,
    #[arg(long)]
    min_samples: Option<usize>,
    #[arg(long)]
    tau_d: Option<f64>,
    #[arg(long)]
    tau_u: Option<f64>,
    #[arg(long)]
    tau_eps: Option<f64>,
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    /// Hypothesize boxes for missed detections inside the window.
    #[arg(long)]
    fill_gaps: bool,
    #[arg(long)]
    iou_threshold: Option<f64>,
    /// Worker threads (0 = all cores). Does not affect the output.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
}

#[derive(Debug, Args)]
struct ReportArgs {
    /// Score threshold; repeat for several.
    #[arg(long)]
    xi: Vec<f64>,
    /// Comma-separated TTC bin edges in seconds.
    #[arg(long, value_delimiter = ',')]
    ttc_bins: Option<Vec<f64>>,
    /// Report FN_POOR and FN_MISS separately.
    #[arg(long)]
    split_fn: bool,
    /// Score bin width for histograms and heatmaps.
    #[arg(long)]
    bin_width: Option<f64>,
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Scenario file with one [[scenario]] table per scene.
    #[arg(long)]
    scenarios: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Replace scenario seeds: the i-th expanded scenario gets seed + i.
    #[arg(long)]
    seed: Option<u64>,
    /// Write into a non-empty output directory.
    #[arg(long)]
    force: bool,
}

/// Settings read from `--config`; every key is optional.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    #[serde(default)]
    cflow: FileParams,
    #[serde(default)]
    eval: FileEval,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileParams {
    k: Option<u64>,
    min_samples: Option<usize>,
    tau_d: Option<f64>,
    tau_u: Option<f64>,
    tau_eps: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileEval {
    mode: Option<Mode>,
    fill_gaps: Option<bool>,
    iou_threshold: Option<f64>,
    xi: Option<Vec<f64>>,
    ttc_bins: Option<Vec<f64>>,
    split_fn: Option<bool>,
    bin_width: Option<f64>,
}

/// The settings a run actually used, echoed as `effective_config.toml`.
#[derive(Debug, Serialize)]
struct Effective {
    tracks: String,
    flows: String,
    cflow: CFlowParams,
    eval: EffectiveEval,
}

#[derive(Debug, Serialize)]
struct EffectiveEval {
    mode: Mode,
    fill_gaps: bool,
    iou_threshold: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    xi: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    ttc_bins: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    split_fn: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    bin_width: Option<f64>,
}

/// A failed command: message plus exit code.
struct Failure(i32, String);

impl Failure {
    fn usage(msg: impl Into<String>) -> Self {
        Failure(EXIT_USAGE, msg.into())
    }

    fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        Failure(EXIT_IO, format!("{}: {e}", path.display()))
    }

    fn fatal(msg: impl Into<String>) -> Self {
        Failure(EXIT_FATAL, msg.into())
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        2 => log::LevelFilter::Debug,
        _ => log::LevelFilter::Trace,
    };
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .try_init();

    let result = match cli.command {
        Command::Score(run) => cmd_run(&run, None),
        Command::Eval { run, report } => cmd_run(&run, Some(&report)),
        Command::Synth(args) => cmd_synth(&args),
        Command::Flo { path } => cmd_flo(&path),
    };
    match result {
        Ok(code) => code,
        Err(Failure(code, msg)) => {
            eprintln!("cflow: {msg}");
            code
        }
    }
}

fn read_config(path: Option<&Path>) -> Result<FileConfig, Failure> {
    let Some(path) = path else {
        return Ok(FileConfig::default());
    };
    let text = std::fs::read_to_string(path).map_err(|e| Failure::io(path, e))?;
    toml::from_str(&text).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

struct Resolved {
    score: ScoreConfig,
    sweep: SweepConfig,
    bin_width: f64,
    mode: Mode,
    effective: Effective,
}

fn resolve(run: &RunArgs, report: Option<&ReportArgs>) -> Result<Resolved, Failure> {
    let file = read_config(run.config.as_deref())?;
    let defaults = CFlowParams::default();
    let params = CFlowParams {
        k: run.k.or(file.cflow.k).unwrap_or(defaults.k),
        min_samples: run
            .min_samples
            .or(file.cflow.min_samples)
            .unwrap_or(defaults.min_samples),
        tau_d: run.tau_d.or(file.cflow.tau_d).unwrap_or(defaults.tau_d),
        tau_u: run.tau_u.or(file.cflow.tau_u).unwrap_or(defaults.tau_u),
        tau_eps: run
            .tau_eps
            .or(file.cflow.tau_eps)
            .unwrap_or(defaults.tau_eps),
    };
    params
        .validate()
        .map_err(|e| Failure::usage(e.to_string()))?;

    let mode = run.mode.or(file.eval.mode).unwrap_or(Mode::Both);
    let fill_gaps = run.fill_gaps || file.eval.fill_gaps.unwrap_or(false);
    let iou_threshold = run
        .iou_threshold
        .or(file.eval.iou_threshold)
        .unwrap_or(DEFAULT_IOU_THRESHOLD);
    if !(iou_threshold > 0.0 && iou_threshold <= 1.0) {
        return Err(Failure::usage("--iou-threshold must lie in (0, 1]"));
    }
    let score = ScoreConfig {
        params,
        gt: mode != Mode::Pred,
        pred: mode != Mode::Gt,
        fill_gaps,
        iou_threshold,
        jobs: run.jobs,
    };

    let defaults = SweepConfig::default();
    let mut sweep = defaults.clone();
    let mut bin_width = 0.1;
    let mut echo = EffectiveEval {
        mode,
        fill_gaps,
        iou_threshold,
        xi: None,
        ttc_bins: None,
        split_fn: None,
        bin_width: None,
    };
    if let Some(r) = report {
        let xi = if !r.xi.is_empty() {
            r.xi.clone()
        } else {
            file.eval.xi.clone().unwrap_or(defaults.thresholds)
        };
        let edges = r
            .ttc_bins
            .clone()
            .or(file.eval.ttc_bins.clone())
            .unwrap_or_else(|| defaults.ttc_bins.edges().to_vec());
        sweep = SweepConfig {
            thresholds: xi,
            ttc_bins: TtcBins::new(edges).map_err(|e| Failure::usage(e.to_string()))?,
            split_fn: r.split_fn || file.eval.split_fn.unwrap_or(false),
        };
        sweep
            .validate()
            .map_err(|e| Failure::usage(e.to_string()))?;
        bin_width = r.bin_width.or(file.eval.bin_width).unwrap_or(bin_width);
        // rejects widths that do not tile [0, 1]
        histogram(&[], ScoreKind::Gt, bin_width, false)
            .map_err(|e| Failure::usage(e.to_string()))?;
        echo.xi = Some(sweep.thresholds.clone());
        echo.ttc_bins = Some(sweep.ttc_bins.edges().to_vec());
        echo.split_fn = Some(sweep.split_fn);
        echo.bin_width = Some(bin_width);
    }
    Ok(Resolved {
        score,
        sweep,
        bin_width,
        mode,
        effective: Effective {
            tracks: run.tracks.display().to_string(),
            flows: run.flows.display().to_string(),
            cflow: params,
            eval: echo,
        },
    })
}

fn write(out: &Path, name: &str, contents: &str) -> Result<(), Failure> {
    let path = out.join(name);
    std::fs::write(&path, contents).map_err(|e| Failure::io(&path, e))
}

fn cmd_run(run: &RunArgs, report: Option<&ReportArgs>) -> Result<i32, Failure> {
    let cfg = resolve(run, report)?;
    if !run.flows.is_dir() {
        return Err(Failure::io(&run.flows, "not a directory"));
    }
    let tracks = load_tracks(&run.tracks).map_err(|e| match e {
        LoadError::Io { .. } => Failure(EXIT_IO, e.to_string()),
        other => Failure::fatal(other.to_string()),
    })?;
    std::fs::create_dir_all(&run.out).map_err(|e| Failure::io(&run.out, e))?;

    let store = DirFlowStore::new(&run.flows);
    let scored: ScoreReport = score_tracks(&tracks, &store, &cfg.score);
    log::info!(
        "{} tracks, {} scored frames, {} skips",
        tracks.len(),
        scored.scores.len(),
        scored.skips.len()
    );
    for (cause, n) in scored.skip_counts() {
        log::info!("skipped {n} ({cause})");
    }

    let echo = toml::to_string(&cfg.effective).map_err(|e| Failure::fatal(e.to_string()))?;
    write(&run.out, "effective_config.toml", &echo)?;
    write(
        &run.out,
        "frame_scores.csv",
        &frame_scores_csv(&scored.scores),
    )?;
    write(&run.out, "skips.csv", &skips_csv(&scored.skips))?;

    if report.is_some() {
        let kinds: &[ScoreKind] = match cfg.mode {
            Mode::Gt => &[ScoreKind::Gt],
            Mode::Pred => &[ScoreKind::Hyp],
            Mode::Both => &[ScoreKind::Gt, ScoreKind::Hyp],
        };
        let (mut sw, mut hist, mut heat) = (Vec::new(), Vec::new(), Vec::new());
        for &kind in kinds {
            sw.extend(sweep(&scored.scores, kind, &cfg.sweep));
            let bad_width = |e: crate::eval::ReportError| Failure::usage(e.to_string());
            hist.extend(
                histogram(&scored.scores, kind, cfg.bin_width, cfg.sweep.split_fn)
                    .map_err(bad_width)?,
            );
            heat.extend(
                heatmap(&scored.scores, kind, cfg.bin_width, &cfg.sweep.ttc_bins)
                    .map_err(bad_width)?,
            );
        }
        write(&run.out, "sweep.csv", &sweep_csv(&sw))?;
        write(&run.out, "histogram.csv", &histogram_csv(&hist))?;
        write(&run.out, "heatmap.csv", &heatmap_csv(&heat))?;
        if cfg.mode == Mode::Both {
            let c = correlation(&scored.scores, cfg.sweep.thresholds[0]);
            write(&run.out, "correlation.txt", &c.to_text())?;
        }
    }

    let failures = scored.failures().count();
    if failures > 0 {
        eprintln!(
            "cflow: {failures} frame evaluations skipped for unreadable flow; see {}",
            run.out.join("skips.csv").display()
        );
        return Ok(EXIT_PARTIAL);
    }
    Ok(EXIT_OK)
}

fn cmd_synth(args: &SynthArgs) -> Result<i32, Failure> {
    let mut specs = load_scenarios(&args.scenarios).map_err(|e| match e {
        MaterializeError::Read { .. } => Failure(EXIT_IO, e.to_string()),
        other => Failure::fatal(other.to_string()),
    })?;
    if let Some(seed) = args.seed {
        for (i, s) in specs.iter_mut().enumerate() {
            s.seed = seed.wrapping_add(i as u64);
        }
    }
    materialize(&specs, &args.out, args.force).map_err(|e| match e {
        MaterializeError::Io { .. } => Failure(EXIT_IO, e.to_string()),
        other => Failure::fatal(other.to_string()),
    })?;
    log::info!("wrote {} scenarios to {}", specs.len(), args.out.display());
    Ok(EXIT_OK)
}

fn cmd_flo(path: &Path) -> Result<i32, Failure> {
    let bytes = std::fs::read(path).map_err(|e| Failure::io(path, e))?;
    let map = parse_flo(&bytes)
        .map_err(|e: FlowError| Failure::fatal(format!("{}: {e}", path.display())))?;
    let s = summarize(&map);
    println!("width: {}", s.width);
    println!("height: {}", s.height);
    println!("u_min: {}", s.u_min);
    println!("u_max: {}", s.u_max);
    println!("u_median: {}", s.u_median);
    Ok(EXIT_OK)
}
