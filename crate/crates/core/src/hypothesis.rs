//! Hypothesized boxes for frames without a detection, and assembly of
//! scoring windows from a track.
//!
//! The upper-left corner is extrapolated from earlier detections: a line
//! is fitted through their corners by total least squares, the mean
//! per-frame displacement between the first and last detection gives the
//! step length, and the last corner is advanced along the line by one step
//! per missing frame. Width and height are copied from the last detection.

use thiserror::Error;

use crate::flow::{median_flow, FlowError, FlowLoadError, FlowSource};
use crate::metric::{BoxSource, CFlowParams, WindowSample};
use crate::track::{BBox, BoxError, Outcome, Track, TrackFrame};

/// Corner spread below which detections count as stationary, pixels.
pub const STATIONARY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisInput {
    /// Earlier detections, strictly increasing in frame index.
    pub detections: Vec<(u64, BBox)>,
    pub target_frame: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hypothesis {
    pub bbox: BBox,
    /// Mean per-frame displacement of the upper-left corner, pixels.
    pub step_px: f64,
    /// Unit direction of travel; `None` when the detections did not move.
    pub direction: Option<(f64, f64)>,
    pub n_detections: usize,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HypothesisError {
    #[error("need at least 2 detections, have {have}")]
    TooFewDetections { have: usize },
    #[error("target frame {target} is not after the last detection {last}")]
    BadTarget { target: u64, last: u64 },
    #[error("detections are not strictly increasing at frame {frame_index}")]
    UnsortedDetections { frame_index: u64 },
    #[error("extrapolated box is invalid: {0}")]
    InvalidBox(#[from] BoxError),
}

pub fn hypothesize_box(input: &HypothesisInput) -> Result<Hypothesis, HypothesisError> {
    let dets = &input.detections;
    if dets.len() < 2 {
        return Err(HypothesisError::TooFewDetections { have: dets.len() });
    }
    for pair in dets.windows(2) {
        if pair[1].0 <= pair[0].0 {
            return Err(HypothesisError::UnsortedDetections {
                frame_index: pair[1].0,
            });
        }
    }
    let (first_idx, first_box) = dets[0];
    let (last_idx, last_box) = dets[dets.len() - 1];
    if input.target_frame <= last_idx {
        return Err(HypothesisError::BadTarget {
            target: input.target_frame,
            last: last_idx,
        });
    }

    let corners: Vec<(f64, f64)> = dets.iter().map(|(_, b)| b.upper_left()).collect();
    let (x0, y0) = first_box.upper_left();
    let (x1, y1) = last_box.upper_left();
    let chord = (x1 - x0, y1 - y0);
    let step_px = chord.0.hypot(chord.1) / (last_idx - first_idx) as f64;

    let stationary = corners
        .iter()
        .all(|&(x, y)| (x - x0).hypot(y - y0) <= STATIONARY_TOLERANCE);
    let direction = if stationary {
        None
    } else {
        Some(travel_direction(&corners, chord))
    };

    let ahead = (input.target_frame - last_idx) as f64;
    let (hx, hy) = match direction {
        Some((dx, dy)) => (x1 + step_px * ahead * dx, y1 + step_px * ahead * dy),
        None => (x1, y1),
    };
    Ok(Hypothesis {
        bbox: last_box.with_upper_left(hx, hy)?,
        step_px,
        direction,
        n_detections: dets.len(),
    })
}

/// Principal axis of the corner scatter, oriented along `chord`.
fn travel_direction(corners: &[(f64, f64)], chord: (f64, f64)) -> (f64, f64) {
    let n = corners.len() as f64;
    let cx = corners.iter().map(|p| p.0).sum::<f64>() / n;
    let cy = corners.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for &(x, y) in corners {
        let (dx, dy) = (x - cx, y - cy);
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }

    let half_gap = (sxx - syy) / 2.0;
    let root = half_gap.hypot(sxy);
    let lambda = (sxx + syy) / 2.0 + root;
    // Two algebraically equivalent eigenvector forms; keep the longer one.
    let a = (lambda - syy, sxy);
    let b = (sxy, lambda - sxx);
    let v = if a.0.hypot(a.1) >= b.0.hypot(b.1) {
        a
    } else {
        b
    };
    let norm = v.0.hypot(v.1);

    let scale = sxx.max(syy).max(f64::MIN_POSITIVE);
    let (mut dx, mut dy) = if norm <= 1e-12 * scale || root <= 1e-12 * scale {
        // isotropic scatter has no preferred axis: fall back to the chord
        let c = chord.0.hypot(chord.1);
        if c == 0.0 {
            return (1.0, 0.0);
        }
        (chord.0 / c, chord.1 / c)
    } else {
        (v.0 / norm, v.1 / norm)
    };
    if dx * chord.0 + dy * chord.1 < 0.0 {
        dx = -dx;
        dy = -dy;
    }
    (dx, dy)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScoreMode {
    /// Window built from ground-truth boxes.
    Gt,
    /// Window built from true-positive predictions with a hypothesized box
    /// at the current frame.
    Pred,
}

impl ScoreMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            ScoreMode::Gt => "gt",
            ScoreMode::Pred => "pred",
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WindowError {
    #[error("track {track_id}: frame {t0} not in track")]
    MissingFrame { track_id: String, t0: u64 },
    #[error("track {track_id}: no ground-truth box at frame {t0}")]
    MissingGt { track_id: String, t0: u64 },
    #[error("track {track_id} frame {t0}: {source}")]
    Hypothesis {
        track_id: String,
        t0: u64,
        #[source]
        source: HypothesisError,
    },
    #[error("track {track_id} frame {frame_index}: {source}")]
    Flow {
        track_id: String,
        frame_index: u64,
        #[source]
        source: FlowLoadError,
    },
    #[error("track {track_id} frame {frame_index}: box lies outside the flow map")]
    EmptyRegion { track_id: String, frame_index: u64 },
}

/// Whether a frame's prediction can seed a hypothesis: a true positive
/// when ground truth exists, any prediction otherwise.
pub fn is_usable_detection(frame: &TrackFrame, iou_threshold: f64) -> bool {
    match (&frame.pred_box, &frame.gt_box) {
        (None, _) => false,
        (Some(_), None) => true,
        (Some(_), Some(_)) => frame.outcome(iou_threshold) == Outcome::Tp,
    }
}

/// Builds the scoring window `[t0 - k, t0]` for one track.
///
/// Ground-truth mode emits one sample per frame carrying a ground-truth
/// box. Prediction mode emits samples for usable detections before `t0`,
/// a hypothesized sample at `t0`, and with `fill_gaps` also hypothesized
/// samples for interior frames that lack a detection.
pub fn fill_window<F: FlowSource + ?Sized>(
    track: &Track,
    t0: u64,
    mode: ScoreMode,
    params: &CFlowParams,
    fill_gaps: bool,
    iou_threshold: f64,
    flows: &F,
) -> Result<Vec<WindowSample>, WindowError> {
    let current = track.frame(t0).ok_or_else(|| WindowError::MissingFrame {
        track_id: track.track_id.clone(),
        t0,
    })?;
    let lo = t0.saturating_sub(params.k);
    let sample_at = |frame: &TrackFrame, bbox: BBox, source: BoxSource| {
        flow_sample(track, frame, bbox, source, flows)
    };

    match mode {
        ScoreMode::Gt => {
            if current.gt_box.is_none() {
                return Err(WindowError::MissingGt {
                    track_id: track.track_id.clone(),
                    t0,
                });
            }
            track
                .frames_in(lo, t0)
                .iter()
                .filter_map(|f| f.gt_box.map(|b| (f, b)))
                .map(|(f, b)| sample_at(f, b, BoxSource::Gt))
                .collect()
        }
        ScoreMode::Pred => {
            let (_, history) = track
                .frames_in(lo, t0)
                .split_last()
                .expect("the current frame ends the range");
            let detections: Vec<(u64, BBox)> = history
                .iter()
                .filter(|f| is_usable_detection(f, iou_threshold))
                .map(|f| (f.frame_index, f.pred_box.unwrap()))
                .collect();
            let hyp = hypothesize_box(&HypothesisInput {
                detections: detections.clone(),
                target_frame: t0,
            })
            .map_err(|source| WindowError::Hypothesis {
                track_id: track.track_id.clone(),
                t0,
                source,
            })?;

            let first_det = detections[0].0;
            let mut out = Vec::with_capacity(history.len() + 1);
            for f in history.iter().filter(|f| f.frame_index >= first_det) {
                if let Ok(i) = detections.binary_search_by_key(&f.frame_index, |d| d.0) {
                    out.push(sample_at(f, detections[i].1, BoxSource::Pred)?);
                } else if fill_gaps {
                    let g = f.frame_index;
                    let prior: Vec<(u64, BBox)> = detections
                        .iter()
                        .copied()
                        .filter(|d| d.0 < g && d.0 + params.k >= g)
                        .collect();
                    let gap_input = HypothesisInput {
                        detections: prior,
                        target_frame: g,
                    };
                    // gaps without two earlier detections stay empty
                    if let Ok(h) = hypothesize_box(&gap_input) {
                        out.push(sample_at(f, h.bbox, BoxSource::Hyp)?);
                    }
                }
            }
            out.push(sample_at(current, hyp.bbox, BoxSource::Hyp)?);
            Ok(out)
        }
    }
}

fn flow_sample<F: FlowSource + ?Sized>(
    track: &Track,
    frame: &TrackFrame,
    bbox: BBox,
    source: BoxSource,
    flows: &F,
) -> Result<WindowSample, WindowError> {
    let map = flows
        .load(&frame.flow_ref)
        .map_err(|source| WindowError::Flow {
            track_id: track.track_id.clone(),
            frame_index: frame.frame_index,
            source,
        })?;
    let u = median_flow(&map, &bbox).map_err(|e| match e {
        FlowError::EmptyRegion { .. } => WindowError::EmptyRegion {
            track_id: track.track_id.clone(),
            frame_index: frame.frame_index,
        },
        other => WindowError::Flow {
            track_id: track.track_id.clone(),
            frame_index: frame.frame_index,
            source: FlowLoadError::Parse {
                flow_ref: frame.flow_ref.clone(),
                source: other,
            },
        },
    })?;
    Ok(WindowSample {
        timestamp: frame.timestamp,
        frame_index: frame.frame_index,
        bbox,
        u,
        source,
    })
}
