//! Detection and ground-truth tracks, box geometry and per-frame outcome
//! classification.

mod jsonl;

pub use jsonl::{load_tracks, parse_tracks, save_tracks, write_tracks, LoadError};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default IoU threshold separating a true positive from a poor detection.
pub const DEFAULT_IOU_THRESHOLD: f64 = 0.5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BoxError {
    #[error("box fields must be finite")]
    NonFinite,
    #[error("box width and height must be positive (got {width} x {height})")]
    NonPositive { width: f64, height: f64 },
}

/// Axis-aligned box in pixel coordinates, anchored at its upper-left corner.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct BBox {
    x_ul: f64,
    y_ul: f64,
    width: f64,
    height: f64,
}

impl BBox {
    pub fn new(x_ul: f64, y_ul: f64, width: f64, height: f64) -> Result<Self, BoxError> {
        if ![x_ul, y_ul, width, height].iter().all(|v| v.is_finite()) {
            return Err(BoxError::NonFinite);
        }
        if width <= 0.0 || height <= 0.0 {
            return Err(BoxError::NonPositive { width, height });
        }
        Ok(Self {
            x_ul,
            y_ul,
            width,
            height,
        })
    }

    pub fn x_ul(&self) -> f64 {
        self.x_ul
    }

    pub fn y_ul(&self) -> f64 {
        self.y_ul
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn height(&self) -> f64 {
        self.height
    }

    /// Exclusive right edge.
    pub fn x_end(&self) -> f64 {
        self.x_ul + self.width
    }

    /// Exclusive bottom edge.
    pub fn y_end(&self) -> f64 {
        self.y_ul + self.height
    }

    pub fn area(&self) -> f64 {
        self.width * self.height
    }

    pub fn upper_left(&self) -> (f64, f64) {
        (self.x_ul, self.y_ul)
    }

    /// Same size, upper-left corner moved to `(x, y)`.
    pub fn with_upper_left(&self, x: f64, y: f64) -> Result<Self, BoxError> {
        Self::new(x, y, self.width, self.height)
    }

    pub fn translated(&self, dx: f64, dy: f64) -> Result<Self, BoxError> {
        Self::new(self.x_ul + dx, self.y_ul + dy, self.width, self.height)
    }
}

impl TryFrom<[f64; 4]> for BBox {
    type Error = BoxError;

    fn try_from(v: [f64; 4]) -> Result<Self, Self::Error> {
        BBox::new(v[0], v[1], v[2], v[3])
    }
}

impl From<BBox> for [f64; 4] {
    fn from(b: BBox) -> Self {
        [b.x_ul, b.y_ul, b.width, b.height]
    }
}

/// Intersection over union using continuous box geometry.
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    // edge arithmetic (x_ul + width) - x_ul need not return width exactly
    if a == b {
        return 1.0;
    }
    let ix = (a.x_end().min(b.x_end()) - a.x_ul.max(b.x_ul)).max(0.0);
    let iy = (a.y_end().min(b.y_end()) - a.y_ul.max(b.y_ul)).max(0.0);
    let inter = ix * iy;
    if inter <= 0.0 {
        return 0.0;
    }
    let union = a.area() + b.area() - inter;
    (inter / union).clamp(0.0, 1.0)
}

/// Length of the box diagonal in pixels.
pub fn diagonal(b: &BBox) -> f64 {
    (b.width * b.width + b.height * b.height).sqrt()
}

/// Classification of one (frame, pedestrian) pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Outcome {
    /// Prediction matches ground truth with IoU at or above the threshold.
    Tp,
    /// Prediction overlaps ground truth, but below the threshold.
    FnPoor,
    /// Ground truth without any overlapping prediction.
    FnMiss,
    /// Prediction without ground truth.
    Fp,
    None,
}

impl Outcome {
    pub fn as_str(&self) -> &'static str {
        match self {
            Outcome::Tp => "TP",
            Outcome::FnPoor => "FN_POOR",
            Outcome::FnMiss => "FN_MISS",
            Outcome::Fp => "FP",
            Outcome::None => "NONE",
        }
    }

    /// Both flavours of missed detection.
    pub fn is_false_negative(&self) -> bool {
        matches!(self, Outcome::FnPoor | Outcome::FnMiss)
    }
}

impl std::fmt::Display for Outcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.pad(self.as_str())
    }
}

impl std::str::FromStr for Outcome {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "TP" => Ok(Outcome::Tp),
            "FN_POOR" => Ok(Outcome::FnPoor),
            "FN_MISS" => Ok(Outcome::FnMiss),
            "FP" => Ok(Outcome::Fp),
            "NONE" => Ok(Outcome::None),
            other => Err(format!("unknown outcome {other:?}")),
        }
    }
}

pub fn classify_frame(gt: Option<&BBox>, pred: Option<&BBox>, iou_threshold: f64) -> Outcome {
    match (gt, pred) {
        (Some(g), Some(p)) => {
            let overlap = iou(g, p);
            if overlap >= iou_threshold {
                Outcome::Tp
            } else if overlap > 0.0 {
                Outcome::FnPoor
            } else {
                Outcome::FnMiss
            }
        }
        (Some(_), None) => Outcome::FnMiss,
        (None, Some(_)) => Outcome::Fp,
        (None, None) => Outcome::None,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackFrame {
    pub frame_index: u64,
    /// Seconds.
    pub timestamp: f64,
    pub gt_box: Option<BBox>,
    pub pred_box: Option<BBox>,
    pub pred_score: Option<f64>,
    /// Time-to-collision in seconds, ingested as an annotation.
    pub ttc: Option<f64>,
    /// Flow map for the (previous, this) image pair.
    pub flow_ref: String,
}

impl TrackFrame {
    pub fn outcome(&self, iou_threshold: f64) -> Outcome {
        classify_frame(self.gt_box.as_ref(), self.pred_box.as_ref(), iou_threshold)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    pub track_id: String,
    pub frames: Vec<TrackFrame>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrackError {
    #[error("track {track_id}: frame_index {frame_index} is duplicated or out of order")]
    FrameOrder { track_id: String, frame_index: u64 },
    #[error("track {track_id}: timestamp at frame {frame_index} does not increase")]
    TimestampOrder { track_id: String, frame_index: u64 },
    #[error("track {track_id}: invalid ttc at frame {frame_index}")]
    InvalidTtc { track_id: String, frame_index: u64 },
}

impl Track {
    /// Checks ordering and annotation invariants.
    pub fn validate(&self) -> Result<(), TrackError> {
        for pair in self.frames.windows(2) {
            if pair[1].frame_index <= pair[0].frame_index {
                return Err(TrackError::FrameOrder {
                    track_id: self.track_id.clone(),
                    frame_index: pair[1].frame_index,
                });
            }
            if pair[1].timestamp.is_nan() || pair[1].timestamp <= pair[0].timestamp {
                return Err(TrackError::TimestampOrder {
                    track_id: self.track_id.clone(),
                    frame_index: pair[1].frame_index,
                });
            }
        }
        for f in &self.frames {
            if let Some(ttc) = f.ttc {
                if !ttc.is_finite() || ttc < 0.0 {
                    return Err(TrackError::InvalidTtc {
                        track_id: self.track_id.clone(),
                        frame_index: f.frame_index,
                    });
                }
            }
        }
        Ok(())
    }

    pub fn frame(&self, frame_index: u64) -> Option<&TrackFrame> {
        self.frames
            .binary_search_by_key(&frame_index, |f| f.frame_index)
            .ok()
            .map(|i| &self.frames[i])
    }

    /// Frames whose index lies in `[lo, hi]`, in order.
    pub fn frames_in(&self, lo: u64, hi: u64) -> &[TrackFrame] {
        let start = self.frames.partition_point(|f| f.frame_index < lo);
        let end = self.frames.partition_point(|f| f.frame_index <= hi);
        &self.frames[start..end.max(start)]
    }

    pub fn first_frame_index(&self) -> Option<u64> {
        self.frames.first().map(|f| f.frame_index)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bb(x: f64, y: f64, w: f64, h: f64) -> BBox {
        BBox::new(x, y, w, h).unwrap()
    }

    #[test]
    fn iou_reference_cases() {
        let a = bb(0.0, 0.0, 1.0, 1.0);
        assert_eq!(iou(&a, &a), 1.0);
        assert_eq!(iou(&a, &bb(5.0, 5.0, 1.0, 1.0)), 0.0);
        // touching edges share no area
        assert_eq!(iou(&a, &bb(1.0, 0.0, 1.0, 1.0)), 0.0);
        // intersection 0.5, union 1.5
        let third = iou(&a, &bb(0.5, 0.0, 1.0, 1.0));
        assert!((third - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn classify_covers_all_cases() {
        let a = bb(0.0, 0.0, 1.0, 1.0);
        let shifted = bb(0.5, 0.0, 1.0, 1.0);
        let far = bb(9.0, 9.0, 1.0, 1.0);
        assert_eq!(classify_frame(Some(&a), None, 0.5), Outcome::FnMiss);
        assert_eq!(classify_frame(Some(&a), Some(&a), 0.5), Outcome::Tp);
        assert_eq!(
            classify_frame(Some(&a), Some(&shifted), 0.5),
            Outcome::FnPoor
        );
        assert_eq!(classify_frame(Some(&a), Some(&far), 0.5), Outcome::FnMiss);
        assert_eq!(classify_frame(None, Some(&a), 0.5), Outcome::Fp);
        assert_eq!(classify_frame(None, None, 0.5), Outcome::None);
        // 1/3 clears a lower threshold
        assert_eq!(classify_frame(Some(&a), Some(&shifted), 0.3), Outcome::Tp);
    }

    #[test]
    fn diagonal_values() {
        assert_eq!(diagonal(&bb(0.0, 0.0, 3.0, 4.0)), 5.0);
        assert!(diagonal(&bb(0.0, 0.0, 1.0, 1e-4)) > 1.0);
        assert!((diagonal(&bb(0.0, 0.0, 10.0, 10.0)) - 14.142_135_623_730_951).abs() < 1e-12);
    }

    #[test]
    fn rejects_invalid_boxes() {
        assert!(BBox::new(0.0, 0.0, 0.0, 1.0).is_err());
        assert!(BBox::new(0.0, 0.0, 1.0, -1.0).is_err());
        assert!(BBox::new(f64::NAN, 0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn frames_in_window() {
        let frames = [0u64, 1, 3, 4, 7]
            .iter()
            .map(|&i| TrackFrame {
                frame_index: i,
                timestamp: i as f64,
                gt_box: None,
                pred_box: None,
                pred_score: None,
                ttc: None,
                flow_ref: String::new(),
            })
            .collect();
        let t = Track {
            track_id: "t".into(),
            frames,
        };
        let idx: Vec<u64> = t.frames_in(2, 5).iter().map(|f| f.frame_index).collect();
        assert_eq!(idx, vec![3, 4]);
        assert!(t.frames_in(8, 10).is_empty());
        assert_eq!(t.frame(3).unwrap().frame_index, 3);
        assert!(t.frame(2).is_none());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn any_box() -> impl Strategy<Value = BBox> {
            (-50.0..50.0f64, -50.0..50.0f64, 0.1..40.0f64, 0.1..40.0f64)
                .prop_map(|(x, y, w, h)| BBox::new(x, y, w, h).unwrap())
        }

        proptest! {
            #[test]
            fn iou_symmetric_and_bounded(a in any_box(), b in any_box()) {
                let ab = iou(&a, &b);
                prop_assert_eq!(ab, iou(&b, &a));
                prop_assert!((0.0..=1.0).contains(&ab));
                prop_assert_eq!(iou(&a, &a), 1.0);
                if a != b {
                    prop_assert!(ab < 1.0);
                }
            }
        }
    }
}
