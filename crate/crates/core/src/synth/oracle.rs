//! Reference evaluation of the credibility score on synthetic scenes.
//!
//! Everything here is recomputed from first principles and shares no code
//! with the scoring pipeline: pixel membership is tested per pixel over the
//! whole map, medians come from a full sort, the regression is written out
//! in closed form, the travel direction comes from the half-angle formula
//! of the corner covariance, and the score is one expression.

use thiserror::Error;

use super::{generate, ScenarioSpec, Scene, SpecError};
use crate::flow::FlowMap;
use crate::hypothesis::ScoreMode;
use crate::metric::CFlowParams;
use crate::track::BBox;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error(transparent)]
    Spec(#[from] SpecError),
    #[error("frame {0} is not part of the scene")]
    NoFrame(u64),
    #[error("window holds {have} samples, {need} required")]
    InsufficientWindow { have: usize, need: usize },
    #[error("need two detections before the current frame, have {have}")]
    TooFewDetections { have: usize },
    #[error("box at frame {0} covers no pixel")]
    EmptyRegion(u64),
}

/// Generates `spec` and evaluates the score at `frame`.
pub fn oracle_cflow(
    spec: &ScenarioSpec,
    frame: u64,
    mode: ScoreMode,
    params: &CFlowParams,
    iou_threshold: f64,
) -> Result<f64, OracleError> {
    let scene = generate(spec)?;
    oracle_cflow_scene(&scene, frame, mode, params, iou_threshold)
}

struct Point {
    frame: u64,
    t: f64,
    bbox: BBox,
    u: f64,
    measured: bool,
}

/// Evaluates the score at `frame` on an already generated scene.
pub fn oracle_cflow_scene(
    scene: &Scene,
    frame: u64,
    mode: ScoreMode,
    params: &CFlowParams,
    iou_threshold: f64,
) -> Result<f64, OracleError> {
    let frames = &scene.track.frames;
    let pos = frames
        .iter()
        .position(|f| f.frame_index == frame)
        .ok_or(OracleError::NoFrame(frame))?;
    let first = frame.saturating_sub(params.k);

    let mut points = Vec::new();
    match mode {
        ScoreMode::Gt => {
            for (f, map) in frames.iter().zip(&scene.flows) {
                if f.frame_index < first || f.frame_index > frame {
                    continue;
                }
                if let Some(b) = f.gt_box {
                    points.push(Point {
                        frame: f.frame_index,
                        t: f.timestamp,
                        bbox: b,
                        u: sorted_median(map, &b).ok_or(OracleError::EmptyRegion(f.frame_index))?,
                        measured: true,
                    });
                }
            }
        }
        ScoreMode::Pred => {
            for (f, map) in frames.iter().zip(&scene.flows) {
                if f.frame_index < first || f.frame_index >= frame {
                    continue;
                }
                let (Some(p), Some(g)) = (f.pred_box, f.gt_box) else {
                    continue;
                };
                if overlap_ratio(&p, &g) >= iou_threshold {
                    points.push(Point {
                        frame: f.frame_index,
                        t: f.timestamp,
                        bbox: p,
                        u: sorted_median(map, &p).ok_or(OracleError::EmptyRegion(f.frame_index))?,
                        measured: true,
                    });
                }
            }
            if points.len() < 2 {
                return Err(OracleError::TooFewDetections { have: points.len() });
            }
            let hyp = extrapolate(&points, frame);
            let cur = &frames[pos];
            points.push(Point {
                frame,
                t: cur.timestamp,
                bbox: hyp,
                u: sorted_median(&scene.flows[pos], &hyp).ok_or(OracleError::EmptyRegion(frame))?,
                measured: false,
            });
        }
    }
    if points.len() < params.min_samples || points.last().map(|p| p.frame) != Some(frame) {
        return Err(OracleError::InsufficientWindow {
            have: points.len(),
            need: params.min_samples,
        });
    }

    // least squares of u on t
    let n = points.len() as f64;
    let tm = points.iter().map(|p| p.t).sum::<f64>() / n;
    let um = points.iter().map(|p| p.u).sum::<f64>() / n;
    let b1 = points.iter().map(|p| (p.t - tm) * (p.u - um)).sum::<f64>()
        / points.iter().map(|p| (p.t - tm).powi(2)).sum::<f64>();
    let b0 = um - b1 * tm;
    let err: f64 = points.iter().map(|p| (p.u - (b0 + b1 * p.t)).abs()).sum();

    // diagonal change into the current frame
    let diag = |b: &BBox| (b.width().powi(2) + b.height().powi(2)).sqrt();
    let last = points.len() - 1;
    let (d_now, d_before) = if points[last].measured {
        (diag(&points[last].bbox), diag(&points[last - 1].bbox))
    } else {
        let m: Vec<&Point> = points.iter().filter(|p| p.measured).collect();
        let (a, z) = (m[0], m[m.len() - 1]);
        let rate = (diag(&z.bbox) - diag(&a.bbox)) / (z.frame - a.frame) as f64;
        let d = diag(&z.bbox) + rate * (frame - z.frame) as f64;
        (if d > 0.0 { d } else { 0.0 }, diag(&z.bbox))
    };

    let mut mags: Vec<f64> = points.iter().map(|p| p.u.abs()).collect();
    mags.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let k = mags.len();
    let mag = if k % 2 == 1 {
        mags[k / 2]
    } else {
        (mags[k / 2 - 1] + mags[k / 2]) / 2.0
    };

    let dd = d_now - d_before;
    let x = if dd == 0.0 {
        0.0
    } else {
        let dn = dd / f64::max(f64::max(d_now, d_before), params.tau_d);
        let en = err / (n * f64::max(mag, params.tau_u));
        dn / if en > params.tau_eps {
            en
        } else {
            params.tau_eps
        }
    };
    Ok(if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        x.exp() / (1.0 + x.exp())
    })
}

fn overlap_ratio(a: &BBox, b: &BBox) -> f64 {
    if a == b {
        return 1.0;
    }
    let w = f64::min(a.x_ul() + a.width(), b.x_ul() + b.width()) - f64::max(a.x_ul(), b.x_ul());
    let h = f64::min(a.y_ul() + a.height(), b.y_ul() + b.height()) - f64::max(a.y_ul(), b.y_ul());
    if w <= 0.0 || h <= 0.0 {
        return 0.0;
    }
    w * h / (a.width() * a.height() + b.width() * b.height() - w * h)
}

/// Median over every pixel `(ix, iy)` with `x_ul <= ix < x_ul + width`
/// (same for y), by full sort.
fn sorted_median(map: &FlowMap, b: &BBox) -> Option<f64> {
    let (x0, x1) = (b.x_ul(), b.x_ul() + b.width());
    let (y0, y1) = (b.y_ul(), b.y_ul() + b.height());
    let mut vals = Vec::new();
    for iy in 0..map.height() {
        let y = iy as f64;
        if y < y0 || y >= y1 {
            continue;
        }
        for ix in 0..map.width() {
            let x = ix as f64;
            if x >= x0 && x < x1 {
                vals.push(map.u()[iy * map.width() + ix] as f64);
            }
        }
    }
    if vals.is_empty() {
        return None;
    }
    vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = vals.len();
    Some(if n % 2 == 1 {
        vals[n / 2]
    } else {
        (vals[n / 2 - 1] + vals[n / 2]) / 2.0
    })
}

fn extrapolate(points: &[Point], target: u64) -> BBox {
    let a = &points[0];
    let z = &points[points.len() - 1];
    let (ax, ay) = (a.bbox.x_ul(), a.bbox.y_ul());
    let (zx, zy) = (z.bbox.x_ul(), z.bbox.y_ul());
    let chord = (zx - ax, zy - ay);
    let step = (chord.0 * chord.0 + chord.1 * chord.1).sqrt() / (z.frame - a.frame) as f64;

    let still = points
        .iter()
        .all(|p| ((p.bbox.x_ul() - ax).powi(2) + (p.bbox.y_ul() - ay).powi(2)).sqrt() <= 1e-9);
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.bbox.x_ul()).sum::<f64>() / n;
    let my = points.iter().map(|p| p.bbox.y_ul()).sum::<f64>() / n;
    let cxx: f64 = points.iter().map(|p| (p.bbox.x_ul() - mx).powi(2)).sum();
    let cyy: f64 = points.iter().map(|p| (p.bbox.y_ul() - my).powi(2)).sum();
    let cxy: f64 = points
        .iter()
        .map(|p| (p.bbox.x_ul() - mx) * (p.bbox.y_ul() - my))
        .sum();

    let (mut dx, mut dy) = if ((cxx - cyy).powi(2) + 4.0 * cxy * cxy).sqrt() <= 2e-12 * cxx.max(cyy)
    {
        let c = (chord.0 * chord.0 + chord.1 * chord.1).sqrt();
        if c > 0.0 {
            (chord.0 / c, chord.1 / c)
        } else {
            (1.0, 0.0)
        }
    } else {
        let angle = 0.5 * (2.0 * cxy).atan2(cxx - cyy);
        (angle.cos(), angle.sin())
    };
    if dx * chord.0 + dy * chord.1 < 0.0 {
        dx = -dx;
        dy = -dy;
    }
    let ahead = (target - z.frame) as f64;
    let (hx, hy) = if still {
        (zx, zy)
    } else {
        (zx + step * ahead * dx, zy + step * ahead * dy)
    };
    BBox::new(hx, hy, z.bbox.width(), z.bbox.height()).expect("finite extrapolation")
}
