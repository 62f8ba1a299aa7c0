//! Flow-based credibility scoring for pedestrian bounding boxes.
//!
//! For a pedestrian track, the median horizontal optical flow inside the
//! box is followed over a short window of frames. A window whose flow
//! evolves linearly while the box grows is credible; a sudden flow break,
//! or a box that shrinks against smooth flow, is not. The score lies in
//! `[0, 1]` and low values mark frames worth inspecting for missed
//! detections.
//!
//! Modules:
//!
//! * [`flow`]: `.flo` files and box-restricted median flow
//! * [`track`]: boxes, tracks, IoU matching and the JSONL track format
//! * [`metric`]: the score itself
//! * [`hypothesis`]: extrapolated boxes for frames without a detection
//! * [`synth`]: deterministic synthetic scenes and an independent oracle
//! * [`eval`]: per-frame scoring, threshold sweeps, histograms, correlation
//! * [`cli`]: the `cflow` command line

pub mod cli;
pub mod eval;
pub mod flow;
pub mod hypothesis;
pub mod metric;
pub mod synth;
pub mod track;

pub use flow::{median_flow, parse_flo, write_flo, FlowMap};
pub use hypothesis::{fill_window, hypothesize_box, Hypothesis, HypothesisInput, ScoreMode};
pub use metric::{cflow, BoxSource, CFlowParams, CFlowResult, WindowSample};
pub use track::{classify_frame, diagonal, iou, BBox, Outcome, Track, TrackFrame};
