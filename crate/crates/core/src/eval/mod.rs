//! Scoring whole track sets and summarizing the scores.

mod report;
mod stats;

pub use report::{
    correlation, frame_scores_csv, heatmap, heatmap_csv, histogram, histogram_csv, skips_csv,
    sweep, sweep_csv, Correlation, HeatmapRow, HistogramRow, ReportError, ScoreKind, SweepConfig,
    SweepRow, TtcBins, UNBINNED,
};
pub use stats::{pearson, roc_auc, StatsError};

use std::cell::RefCell;
use std::collections::HashMap;
use std::sync::Arc;

use rayon::prelude::*;

use crate::flow::{FlowLoadError, FlowMap, FlowSource};
use crate::hypothesis::{fill_window, HypothesisError, ScoreMode, WindowError};
use crate::metric::{cflow, CFlowError, CFlowParams, CFlowResult};
use crate::track::{Outcome, Track, TrackFrame, DEFAULT_IOU_THRESHOLD};

/// Scores for one ground-truth pedestrian at one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameScore {
    pub track_id: String,
    pub frame_index: u64,
    pub ttc: Option<f64>,
    pub outcome: Outcome,
    /// Window of ground-truth boxes.
    pub gt: Option<CFlowResult>,
    /// Window of detections with a hypothesized current box.
    pub hyp: Option<CFlowResult>,
}

impl FrameScore {
    pub fn score_gt(&self) -> Option<f64> {
        self.gt.map(|r| r.score)
    }

    pub fn score_hyp(&self) -> Option<f64> {
        self.hyp.map(|r| r.score)
    }

    pub fn score(&self, kind: ScoreKind) -> Option<f64> {
        match kind {
            ScoreKind::Gt => self.score_gt(),
            ScoreKind::Hyp => self.score_hyp(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreConfig {
    pub params: CFlowParams,
    pub gt: bool,
    pub pred: bool,
    /// Hypothesize boxes for interior frames without a detection.
    pub fill_gaps: bool,
    pub iou_threshold: f64,
    /// Worker threads; 0 uses the global pool.
    pub jobs: usize,
}

impl Default for ScoreConfig {
    fn default() -> Self {
        Self {
            params: CFlowParams::default(),
            gt: true,
            pred: true,
            fill_gaps: false,
            iou_threshold: DEFAULT_IOU_THRESHOLD,
            jobs: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SkipCause {
    /// Less than `k` frames of history, or fewer than `min_samples` samples.
    InsufficientWindow,
    /// Fewer than two usable detections to extrapolate from.
    TooFewDetections,
    /// A box fell outside its flow map.
    EmptyRegion,
    /// A referenced flow map is missing or unreadable.
    FlowUnavailable(String),
    Invalid(String),
}

impl SkipCause {
    /// Causes that indicate broken input rather than an unscorable frame.
    pub fn is_failure(&self) -> bool {
        matches!(self, SkipCause::FlowUnavailable(_) | SkipCause::Invalid(_))
    }

    pub fn label(&self) -> &'static str {
        match self {
            SkipCause::InsufficientWindow => "insufficient_window",
            SkipCause::TooFewDetections => "too_few_detections",
            SkipCause::EmptyRegion => "empty_region",
            SkipCause::FlowUnavailable(_) => "flow_unavailable",
            SkipCause::Invalid(_) => "invalid",
        }
    }

    pub fn detail(&self) -> &str {
        match self {
            SkipCause::FlowUnavailable(d) | SkipCause::Invalid(d) => d,
            _ => "",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Skip {
    pub track_id: String,
    pub frame_index: u64,
    pub mode: ScoreMode,
    pub cause: SkipCause,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScoreReport {
    pub scores: Vec<FrameScore>,
    pub skips: Vec<Skip>,
}

impl ScoreReport {
    pub fn failures(&self) -> impl Iterator<Item = &Skip> {
        self.skips.iter().filter(|s| s.cause.is_failure())
    }

    /// Skip counts per cause label, sorted by label.
    pub fn skip_counts(&self) -> Vec<(&'static str, usize)> {
        let mut counts: HashMap<&'static str, usize> = HashMap::new();
        for s in &self.skips {
            *counts.entry(s.cause.label()).or_default() += 1;
        }
        let mut out: Vec<_> = counts.into_iter().collect();
        out.sort_unstable();
        out
    }
}

/// Memoizes flow maps for the frames of one track.
struct TrackFlows<'a, F: ?Sized> {
    inner: &'a F,
    cache: RefCell<HashMap<String, Arc<FlowMap>>>,
}

impl<F: FlowSource + ?Sized> FlowSource for TrackFlows<'_, F> {
    fn load(&self, flow_ref: &str) -> Result<Arc<FlowMap>, FlowLoadError> {
        if let Some(m) = self.cache.borrow().get(flow_ref) {
            return Ok(Arc::clone(m));
        }
        let m = self.inner.load(flow_ref)?;
        self.cache
            .borrow_mut()
            .insert(flow_ref.to_string(), Arc::clone(&m));
        Ok(m)
    }
}

fn window_cause(e: WindowError) -> SkipCause {
    match e {
        WindowError::Hypothesis {
            source: HypothesisError::TooFewDetections { .. },
            ..
        } => SkipCause::TooFewDetections,
        WindowError::EmptyRegion { .. } => SkipCause::EmptyRegion,
        WindowError::Flow { .. } => SkipCause::FlowUnavailable(e.to_string()),
        other => SkipCause::Invalid(other.to_string()),
    }
}

fn metric_cause(e: CFlowError) -> SkipCause {
    match e {
        CFlowError::InsufficientWindow { .. } => SkipCause::InsufficientWindow,
        other => SkipCause::Invalid(other.to_string()),
    }
}

fn score_frame<F: FlowSource + ?Sized>(
    track: &Track,
    frame: &TrackFrame,
    mode: ScoreMode,
    cfg: &ScoreConfig,
    flows: &F,
) -> Result<CFlowResult, SkipCause> {
    let first = track.first_frame_index().unwrap_or(0);
    // the window must reach back k frames into the track
    if frame.frame_index < first + cfg.params.k {
        return Err(SkipCause::InsufficientWindow);
    }
    let window = fill_window(
        track,
        frame.frame_index,
        mode,
        &cfg.params,
        cfg.fill_gaps,
        cfg.iou_threshold,
        flows,
    )
    .map_err(window_cause)?;
    cflow(&window, frame.frame_index, &cfg.params).map_err(metric_cause)
}

fn score_track<F: FlowSource + ?Sized>(track: &Track, cfg: &ScoreConfig, flows: &F) -> ScoreReport {
    let cached = TrackFlows {
        inner: flows,
        cache: RefCell::new(HashMap::new()),
    };
    let mut report = ScoreReport::default();
    for frame in track.frames.iter().filter(|f| f.gt_box.is_some()) {
        let mut run = |mode: ScoreMode| match score_frame(track, frame, mode, cfg, &cached) {
            Ok(r) => Some(r),
            Err(cause) => {
                if cause.is_failure() {
                    log::warn!(
                        "track {} frame {} ({}): {}",
                        track.track_id,
                        frame.frame_index,
                        mode.as_str(),
                        cause.detail()
                    );
                } else {
                    log::debug!(
                        "track {} frame {} ({}): skipped, {}",
                        track.track_id,
                        frame.frame_index,
                        mode.as_str(),
                        cause.label()
                    );
                }
                report.skips.push(Skip {
                    track_id: track.track_id.clone(),
                    frame_index: frame.frame_index,
                    mode,
                    cause,
                });
                None
            }
        };
        let gt = if cfg.gt { run(ScoreMode::Gt) } else { None };
        let hyp = if cfg.pred { run(ScoreMode::Pred) } else { None };
        if gt.is_some() || hyp.is_some() {
            report.scores.push(FrameScore {
                track_id: track.track_id.clone(),
                frame_index: frame.frame_index,
                ttc: frame.ttc,
                outcome: frame.outcome(cfg.iou_threshold),
                gt,
                hyp,
            });
        }
    }
    report
}

/// Scores every ground-truth frame of every track.
///
/// Frames whose window cannot be built are recorded as skips rather than
/// aborting the run. Results are ordered by track then frame regardless of
/// the degree of parallelism.
pub fn score_tracks<F: FlowSource + Sync + ?Sized>(
    tracks: &[Track],
    flows: &F,
    cfg: &ScoreConfig,
) -> ScoreReport {
    let run = || {
        tracks
            .par_iter()
            .map(|t| score_track(t, cfg, flows))
            .collect::<Vec<_>>()
    };
    let parts = if cfg.jobs == 0 {
        run()
    } else {
        match rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.jobs)
            .build()
        {
            Ok(pool) => pool.install(run),
            Err(e) => {
                log::warn!(
                    "cannot build a {}-thread pool ({e}); using the global pool",
                    cfg.jobs
                );
                run()
            }
        }
    };
    let mut report = ScoreReport::default();
    for part in parts {
        report.scores.extend(part.scores);
        report.skips.extend(part.skips);
    }
    report
        .scores
        .sort_by(|a, b| (&a.track_id, a.frame_index).cmp(&(&b.track_id, b.frame_index)));
    report.skips.sort_by(|a, b| {
        (&a.track_id, a.frame_index, a.mode.as_str()).cmp(&(
            &b.track_id,
            b.frame_index,
            b.mode.as_str(),
        ))
    });
    report
}
