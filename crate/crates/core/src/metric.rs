//! The credibility score for the box at the current frame `t0`.
//!
//! A window holds up to `k + 1` samples `(timestamp, box, u)` ending at
//! `t0`, where `u` is the median horizontal flow inside the box. The score
//! combines two window statistics:
//!
//! * `epsilon`, the sum of absolute residuals of `u` against its
//!   least-squares line over time (sudden flow changes inflate it), and
//! * `delta_d`, the change of the box diagonal into the current frame.
//!
//! Both are made dimensionless and combined as
//! `sigmoid(delta_d_norm / epsilon_norm)`: a consistent window with a
//! growing box scores near 1, a shrinking box against smooth flow scores
//! near 0, and erratic flow pulls the score toward 0.5.
//!
//! In f64 the sigmoid rounds to exactly 1.0 for arguments above ~37 and to
//! 0.0 below ~-745, so saturated windows may report the closed bounds.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::track::{diagonal, BBox};

/// Which box fed a window sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BoxSource {
    Gt,
    Pred,
    /// Extrapolated box for a frame without a detection.
    Hyp,
}

impl BoxSource {
    pub fn as_str(&self) -> &'static str {
        match self {
            BoxSource::Gt => "GT",
            BoxSource::Pred => "PRED",
            BoxSource::Hyp => "HYP",
        }
    }

    /// Whether the box size was measured rather than carried over.
    pub fn is_observed(&self) -> bool {
        !matches!(self, BoxSource::Hyp)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowSample {
    /// Seconds; the regression abscissa.
    pub timestamp: f64,
    pub frame_index: u64,
    pub bbox: BBox,
    /// Median horizontal flow inside `bbox`, pixels/frame.
    pub u: f64,
    pub source: BoxSource,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CFlowParams {
    /// Window depth: frames before `t0` that may contribute.
    pub k: u64,
    pub min_samples: usize,
    /// Floor on the diagonal used to normalize `delta_d`, pixels.
    pub tau_d: f64,
    /// Floor on the flow scale used to normalize `epsilon`, pixels/frame.
    pub tau_u: f64,
    /// Floor on the normalized error.
    pub tau_eps: f64,
}

impl Default for CFlowParams {
    fn default() -> Self {
        Self {
            k: 5,
            min_samples: 3,
            tau_d: 1.0,
            tau_u: 0.1,
            tau_eps: 1e-3,
        }
    }
}

impl CFlowParams {
    pub fn validate(&self) -> Result<(), CFlowError> {
        let floors_ok = [self.tau_d, self.tau_u, self.tau_eps]
            .iter()
            .all(|v| v.is_finite() && *v > 0.0);
        if !floors_ok {
            return Err(CFlowError::InvalidParams(
                "all floors must be finite and > 0".into(),
            ));
        }
        if self.min_samples < 3 {
            return Err(CFlowError::InvalidParams("min_samples must be >= 3".into()));
        }
        if self.k < 2 {
            return Err(CFlowError::InvalidParams("k must be >= 2".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    /// Flow change per second.
    pub slope: f64,
    /// Flow at timestamp 0.
    pub intercept: f64,
}

impl LineFit {
    pub fn predict(&self, t: f64) -> f64 {
        self.intercept + self.slope * t
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CFlowResult {
    pub score: f64,
    pub epsilon: f64,
    pub epsilon_norm: f64,
    pub delta_d: f64,
    pub delta_d_norm: f64,
    pub n_samples: usize,
    /// The `epsilon_norm` floor was applied.
    pub saturated: bool,
}

impl CFlowResult {
    pub const CSV_HEADER: &'static str =
        "score,epsilon,epsilon_norm,delta_d,delta_d_norm,n_samples,saturated";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.score,
            self.epsilon,
            self.epsilon_norm,
            self.delta_d,
            self.delta_d_norm,
            self.n_samples,
            self.saturated
        )
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CFlowError {
    #[error("window has {have} samples, at least {need} required")]
    InsufficientWindow { have: usize, need: usize },
    #[error("window is not strictly increasing at frame {frame_index}")]
    UnsortedWindow { frame_index: u64 },
    #[error("no sample at current frame {t0}")]
    MissingCurrent { t0: u64 },
    #[error("sample at frame {frame_index} lies outside the window ending at {t0}")]
    OutsideWindow { frame_index: u64, t0: u64 },
    #[error("all timestamps are equal")]
    DegenerateAbscissa,
    #[error("non-finite value in window at frame {frame_index}")]
    NonFinite { frame_index: u64 },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
}

/// Ordinary least-squares line through `(t, u)` points.
pub fn fit_points(points: &[(f64, f64)]) -> Result<LineFit, CFlowError> {
    if points.len() < 2 {
        return Err(CFlowError::InsufficientWindow {
            have: points.len(),
            need: 2,
        });
    }
    let n = points.len() as f64;
    let t_mean = points.iter().map(|p| p.0).sum::<f64>() / n;
    let u_mean = points.iter().map(|p| p.1).sum::<f64>() / n;
    let (sxy, sxx) = points.iter().fold((0.0, 0.0), |(sxy, sxx), &(t, u)| {
        let dt = t - t_mean;
        (sxy + dt * (u - u_mean), sxx + dt * dt)
    });
    if sxx == 0.0 {
        return Err(CFlowError::DegenerateAbscissa);
    }
    let slope = sxy / sxx;
    Ok(LineFit {
        slope,
        intercept: u_mean - slope * t_mean,
    })
}

/// Least-squares fit of `u` against timestamp.
pub fn fit_line(samples: &[WindowSample]) -> Result<LineFit, CFlowError> {
    let points: Vec<(f64, f64)> = samples.iter().map(|s| (s.timestamp, s.u)).collect();
    fit_points(&points)
}

/// Sum of absolute residuals of the samples against `fit`.
pub fn epsilon(samples: &[WindowSample], fit: &LineFit) -> f64 {
    samples
        .iter()
        .map(|s| (s.u - fit.predict(s.timestamp)).abs())
        .sum()
}

/// Signed change of diagonal from the previous box to the current one.
pub fn delta_d(box_t0: &BBox, box_t1: &BBox) -> f64 {
    diagonal(box_t0) - diagonal(box_t1)
}

/// Diagonal change into the current frame, with the two diagonals it was
/// taken between.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SizeChange {
    pub delta_d: f64,
    pub d_current: f64,
    pub d_previous: f64,
}

/// Diagonal change for a sorted window.
///
/// When the current box was measured, this is the change between the two
/// most recent samples. A hypothesized current box only repeats the size
/// of the last detection, so in that case the current diagonal is instead
/// extrapolated from the mean per-frame diagonal change between the first
/// and last measured boxes of the window.
pub fn size_change(window: &[WindowSample]) -> Result<SizeChange, CFlowError> {
    let n = window.len();
    if n < 2 {
        return Err(CFlowError::InsufficientWindow { have: n, need: 2 });
    }
    let current = &window[n - 1];
    if current.source.is_observed() {
        let previous = &window[n - 2];
        return Ok(SizeChange {
            delta_d: delta_d(&current.bbox, &previous.bbox),
            d_current: diagonal(&current.bbox),
            d_previous: diagonal(&previous.bbox),
        });
    }

    let first = window.iter().find(|s| s.source.is_observed());
    let last = window.iter().rev().find(|s| s.source.is_observed());
    let (first, last) = match (first, last) {
        (Some(f), Some(l)) if f.frame_index < l.frame_index => (f, l),
        _ => {
            let have = window.iter().filter(|s| s.source.is_observed()).count();
            return Err(CFlowError::InsufficientWindow { have, need: 2 });
        }
    };
    let d_first = diagonal(&first.bbox);
    let d_last = diagonal(&last.bbox);
    let step = (d_last - d_first) / (last.frame_index - first.frame_index) as f64;
    let ahead = (current.frame_index - last.frame_index) as f64;
    let d_current = (d_last + step * ahead).max(0.0);
    Ok(SizeChange {
        delta_d: d_current - d_last,
        d_current,
        d_previous: d_last,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Normalized {
    pub delta_d_norm: f64,
    pub epsilon_norm: f64,
    pub saturated: bool,
}

/// Makes `delta_d` and `epsilon` dimensionless using only window-intrinsic
/// scales:
///
/// * `delta_d_norm = delta_d / max(d_current, d_previous, tau_d)`
/// * `epsilon_norm = max(epsilon / (n * max(median |u|, tau_u)), tau_eps)`
pub fn normalize(
    change: &SizeChange,
    epsilon: f64,
    samples: &[WindowSample],
    params: &CFlowParams,
) -> Normalized {
    let d_scale = change.d_current.max(change.d_previous).max(params.tau_d);
    let delta_d_norm = if change.delta_d == 0.0 {
        0.0
    } else {
        change.delta_d / d_scale
    };

    let mut abs_u: Vec<f64> = samples.iter().map(|s| s.u.abs()).collect();
    let u_scale = median_f64(&mut abs_u).max(params.tau_u);
    let raw = epsilon / (samples.len() as f64 * u_scale);
    let saturated = raw.is_nan() || raw <= params.tau_eps;
    Normalized {
        delta_d_norm,
        epsilon_norm: if saturated { params.tau_eps } else { raw },
        saturated,
    }
}

fn median_f64(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

/// Logistic function, evaluated on the branch that cannot overflow.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Score from already-normalized inputs.
pub fn credibility(delta_d_norm: f64, epsilon_norm: f64) -> f64 {
    sigmoid(delta_d_norm / epsilon_norm)
}

/// Scores the box at frame `t0` from a window sorted by frame index.
///
/// Every sample must lie in `[t0 - k, t0]` and the last one must sit at
/// `t0`. Gaps are allowed as long as `min_samples` samples remain.
pub fn cflow(
    window: &[WindowSample],
    t0: u64,
    params: &CFlowParams,
) -> Result<CFlowResult, CFlowError> {
    params.validate()?;
    for pair in window.windows(2) {
        if pair[1].frame_index <= pair[0].frame_index {
            return Err(CFlowError::UnsortedWindow {
                frame_index: pair[1].frame_index,
            });
        }
    }
    let lo = t0.saturating_sub(params.k);
    if let Some(s) = window
        .iter()
        .find(|s| s.frame_index < lo || s.frame_index > t0)
    {
        return Err(CFlowError::OutsideWindow {
            frame_index: s.frame_index,
            t0,
        });
    }
    if window.last().map(|s| s.frame_index) != Some(t0) {
        return Err(CFlowError::MissingCurrent { t0 });
    }
    if window.len() < params.min_samples {
        return Err(CFlowError::InsufficientWindow {
            have: window.len(),
            need: params.min_samples,
        });
    }
    if let Some(s) = window
        .iter()
        .find(|s| !s.u.is_finite() || !s.timestamp.is_finite())
    {
        return Err(CFlowError::NonFinite {
            frame_index: s.frame_index,
        });
    }

    let fit = fit_line(window)?;
    let eps = epsilon(window, &fit);
    let change = size_change(window)?;
    let norm = normalize(&change, eps, window, params);
    Ok(CFlowResult {
        score: credibility(norm.delta_d_norm, norm.epsilon_norm),
        epsilon: eps,
        epsilon_norm: norm.epsilon_norm,
        delta_d: change.delta_d,
        delta_d_norm: norm.delta_d_norm,
        n_samples: window.len(),
        saturated: norm.saturated,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bb(w: f64, h: f64) -> BBox {
        BBox::new(10.0, 10.0, w, h).unwrap()
    }

    fn sample(i: u64, t: f64, u: f64, b: BBox) -> WindowSample {
        WindowSample {
            timestamp: t,
            frame_index: i,
            bbox: b,
            u,
            source: BoxSource::Gt,
        }
    }

    fn series(pts: &[(f64, f64)]) -> Vec<WindowSample> {
        pts.iter()
            .enumerate()
            .map(|(i, &(t, u))| sample(i as u64, t, u, bb(3.0, 4.0)))
            .collect()
    }

    #[test]
    fn fit_line_reference_cases() {
        let f = fit_line(&series(&[(0.0, 1.0), (1.0, 2.0), (2.0, 3.0)])).unwrap();
        assert!((f.slope - 1.0).abs() < 1e-15 && (f.intercept - 1.0).abs() < 1e-15);

        let f = fit_line(&series(&[(0.0, 5.0), (1.0, 5.0), (2.0, 5.0)])).unwrap();
        assert_eq!((f.slope, f.intercept), (0.0, 5.0));

        let s = series(&[(0.0, 0.0), (1.0, 1.0), (2.0, 0.0)]);
        let f = fit_line(&s).unwrap();
        assert_eq!(f.slope, 0.0);
        assert!((f.intercept - 1.0 / 3.0).abs() < 1e-15);
        assert!((epsilon(&s, &f) - 4.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn fit_line_rejects_equal_timestamps() {
        let s = series(&[(1.0, 0.0), (1.0, 1.0)]);
        assert_eq!(fit_line(&s), Err(CFlowError::DegenerateAbscissa));
    }

    #[test]
    fn epsilon_zero_on_collinear_data() {
        let mut s = series(&[(0.0, 2.0), (0.1, 2.5), (0.2, 3.0)]);
        let f = fit_line(&s).unwrap();
        assert!(epsilon(&s, &f) < 1e-12);
        s.push(sample(3, 0.3, 3.5, bb(3.0, 4.0)));
        let f = fit_line(&s).unwrap();
        assert!(epsilon(&s, &f) < 1e-12);
    }

    #[test]
    fn delta_d_sign() {
        assert_eq!(delta_d(&bb(3.0, 4.0), &bb(3.0, 4.0)), 0.0);
        assert_eq!(delta_d(&bb(6.0, 8.0), &bb(3.0, 4.0)), 5.0);
        assert_eq!(delta_d(&bb(3.0, 4.0), &bb(6.0, 8.0)), -5.0);
    }

    #[test]
    fn normalize_reference_cases() {
        let p = CFlowParams::default();
        let s = series(&[(0.0, 1.0), (1.0, 2.0), (2.0, 3.0)]);
        let change = SizeChange {
            delta_d: 5.0,
            d_current: 10.0,
            d_previous: 5.0,
        };
        let n = normalize(&change, 0.0, &s, &p);
        assert_eq!(n.delta_d_norm, 0.5);
        assert_eq!(n.epsilon_norm, p.tau_eps);
        assert!(n.saturated);

        let zero = SizeChange {
            delta_d: 0.0,
            d_current: 0.0,
            d_previous: 0.0,
        };
        assert_eq!(normalize(&zero, 1.0, &s, &p).delta_d_norm, 0.0);

        // epsilon 3 over 3 samples with median |u| = 2 -> 0.5
        let n = normalize(&change, 3.0, &s, &p);
        assert_eq!(n.epsilon_norm, 0.5);
        assert!(!n.saturated);
    }

    #[test]
    fn sigmoid_values() {
        assert_eq!(sigmoid(0.0), 0.5);
        for x in [1.0, 10.0, 100.0] {
            assert!((sigmoid(x) + sigmoid(-x) - 1.0).abs() < 1e-15);
        }
        assert!((sigmoid(3f64.ln()) - 0.75).abs() < 1e-15);
        assert!(sigmoid(-700.0) > 0.0 && sigmoid(-700.0).is_finite());
        assert_eq!(sigmoid(700.0), 1.0);
        assert_eq!(sigmoid(-1000.0), 0.0);
    }

    #[test]
    fn equal_diagonals_score_half() {
        let s = series(&[(0.0, 1.0), (0.1, 1.7), (0.2, 0.4), (0.3, 2.0)]);
        let r = cflow(&s, 3, &CFlowParams::default()).unwrap();
        assert_eq!(r.score, 0.5);
        assert_eq!(r.delta_d_norm, 0.0);
    }

    #[test]
    fn growing_box_with_collinear_flow_saturates_high() {
        let mut s = series(&[(0.0, 1.0), (0.1, 1.5), (0.2, 2.0)]);
        s[2].bbox = bb(6.0, 8.0);
        let r = cflow(&s, 2, &CFlowParams::default()).unwrap();
        assert!(r.saturated);
        assert_eq!(r.delta_d_norm, 0.5);
        assert!(r.score >= 0.999);
    }

    #[test]
    fn window_contract_errors() {
        let p = CFlowParams::default();
        let s = series(&[(0.0, 1.0), (0.1, 1.5), (0.2, 2.0)]);
        assert_eq!(
            cflow(&s[..2], 1, &p),
            Err(CFlowError::InsufficientWindow { have: 2, need: 3 })
        );
        assert_eq!(cflow(&s, 3, &p), Err(CFlowError::MissingCurrent { t0: 3 }));
        let mut swapped = s.clone();
        swapped.swap(0, 1);
        assert!(matches!(
            cflow(&swapped, 2, &p),
            Err(CFlowError::UnsortedWindow { .. })
        ));
        let mut far = s.clone();
        far[0].frame_index = 0;
        assert!(matches!(
            cflow(&far, 9, &p),
            Err(CFlowError::OutsideWindow { .. })
        ));
        let bad = CFlowParams {
            min_samples: 2,
            ..p
        };
        assert!(matches!(
            cflow(&s, 2, &bad),
            Err(CFlowError::InvalidParams(_))
        ));
    }

    #[test]
    fn hypothesized_current_extrapolates_diagonal() {
        // observed diagonals 5 @0, 10 @2; hypothesis at 3 carries 10
        let mut s = vec![
            sample(0, 0.0, 1.0, bb(3.0, 4.0)),
            sample(2, 0.2, 1.2, bb(6.0, 8.0)),
            sample(3, 0.3, 1.3, bb(6.0, 8.0)),
        ];
        s[2].source = BoxSource::Hyp;
        let c = size_change(&s).unwrap();
        assert!((c.delta_d - 2.5).abs() < 1e-12);
        assert!((c.d_current - 12.5).abs() < 1e-12);
        assert_eq!(c.d_previous, 10.0);
        // the literal last-two difference would be zero
        assert_eq!(delta_d(&s[2].bbox, &s[1].bbox), 0.0);
    }
}
