//! Threshold sweeps, histograms and heatmaps over frame scores, and their
//! CSV renderings.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::stats::pearson;
use super::{FrameScore, Skip};
use crate::metric::CFlowResult;
use crate::track::Outcome;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoreKind {
    Gt,
    Hyp,
}

impl ScoreKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ScoreKind::Gt => "gt",
            ScoreKind::Hyp => "hyp",
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReportError {
    #[error("TTC bin edges must be finite, non-negative and strictly increasing (an optional last edge may be inf)")]
    BadEdges,
    #[error("score bin width {0} must divide 1 into a whole number of bins")]
    BadBinWidth(f64),
    #[error("thresholds must lie in (0, 1) and increase strictly")]
    BadThresholds,
}

pub const UNBINNED: &str = "unbinned";

/// Time-to-collision bins `[e0, e1], (e1, e2], ..., (en, inf)`, plus a
/// trailing bin for frames without a usable TTC.
#[derive(Debug, Clone, PartialEq)]
pub struct TtcBins {
    edges: Vec<f64>,
}

impl TtcBins {
    pub fn new(edges: Vec<f64>) -> Result<Self, ReportError> {
        let mut edges = edges;
        if edges.last() == Some(&f64::INFINITY) {
            edges.pop();
        }
        let ok = !edges.is_empty()
            && edges.iter().all(|e| e.is_finite() && *e >= 0.0)
            && edges.windows(2).all(|w| w[0] < w[1]);
        if !ok {
            return Err(ReportError::BadEdges);
        }
        Ok(Self { edges })
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    /// Number of bins including the unbinned one.
    pub fn len(&self) -> usize {
        self.edges.len() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn label(&self, bin: usize) -> String {
        let n = self.edges.len();
        match bin {
            0 if n == 1 => format!("[{},inf)", self.edges[0]),
            0 => format!("[{},{}]", self.edges[0], self.edges[1]),
            b if b + 1 < n => format!("({},{}]", self.edges[b], self.edges[b + 1]),
            b if b + 1 == n => format!("({},inf)", self.edges[b]),
            _ => UNBINNED.to_string(),
        }
    }

    pub fn index(&self, ttc: Option<f64>) -> usize {
        let unbinned = self.edges.len();
        let Some(t) = ttc.filter(|t| !t.is_nan()) else {
            return unbinned;
        };
        if t < self.edges[0] {
            return unbinned;
        }
        // bins are closed on the right; the first is closed on both sides
        self.edges[1..]
            .iter()
            .position(|&e| t <= e)
            .unwrap_or(self.edges.len() - 1)
    }
}

impl Default for TtcBins {
    fn default() -> Self {
        Self {
            edges: vec![0.0, 1.0, 2.0, 3.0, 4.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub thresholds: Vec<f64>,
    pub ttc_bins: TtcBins,
    /// Report FN_POOR and FN_MISS separately instead of pooled as FN.
    pub split_fn: bool,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            thresholds: vec![0.1, 0.3],
            ttc_bins: TtcBins::default(),
            split_fn: false,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<(), ReportError> {
        let ok = !self.thresholds.is_empty()
            && self.thresholds.iter().all(|&x| x > 0.0 && x < 1.0)
            && self.thresholds.windows(2).all(|w| w[0] < w[1]);
        if ok {
            Ok(())
        } else {
            Err(ReportError::BadThresholds)
        }
    }
}

fn groups(split_fn: bool) -> &'static [&'static str] {
    if split_fn {
        &["TP", "FN_POOR", "FN_MISS"]
    } else {
        &["TP", "FN"]
    }
}

fn group_of(outcome: Outcome, split_fn: bool) -> Option<usize> {
    match (outcome, split_fn) {
        (Outcome::Tp, _) => Some(0),
        (Outcome::FnPoor, true) => Some(1),
        (Outcome::FnMiss, true) => Some(2),
        (Outcome::FnPoor | Outcome::FnMiss, false) => Some(1),
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub kind: ScoreKind,
    pub ttc_bin: String,
    pub xi: f64,
    pub outcome: &'static str,
    pub n: usize,
    /// Frames with score at or below `xi`.
    pub flagged: usize,
    /// `100 * flagged / n`; `None` for an empty cell.
    pub percent: Option<f64>,
}

/// Share of TP and FN frames scoring at or below each threshold, per TTC bin.
///
/// Rows are ordered by TTC bin, then threshold, then outcome, with the
/// unbinned frames last. Empty cells are kept with a `None` percentage.
pub fn sweep(scores: &[FrameScore], kind: ScoreKind, cfg: &SweepConfig) -> Vec<SweepRow> {
    let groups = groups(cfg.split_fn);
    let bins = &cfg.ttc_bins;
    let mut rows = Vec::with_capacity(bins.len() * cfg.thresholds.len() * groups.len());
    for bin in 0..bins.len() {
        let label = bins.label(bin);
        for &xi in &cfg.thresholds {
            for (g, name) in groups.iter().enumerate() {
                let cell = scores.iter().filter(|s| {
                    bins.index(s.ttc) == bin && group_of(s.outcome, cfg.split_fn) == Some(g)
                });
                let (mut n, mut flagged) = (0, 0);
                for s in cell {
                    if let Some(v) = s.score(kind) {
                        n += 1;
                        flagged += usize::from(v <= xi);
                    }
                }
                rows.push(SweepRow {
                    kind,
                    ttc_bin: label.clone(),
                    xi,
                    outcome: name,
                    n,
                    flagged,
                    percent: (n > 0).then(|| 100.0 * flagged as f64 / n as f64),
                });
            }
        }
    }
    rows
}

fn bin_count(width: f64) -> Result<usize, ReportError> {
    if !(width > 0.0 && width <= 1.0) {
        return Err(ReportError::BadBinWidth(width));
    }
    let n = (1.0 / width).round();
    if (n * width - 1.0).abs() > 1e-9 {
        return Err(ReportError::BadBinWidth(width));
    }
    Ok(n as usize)
}

fn score_bin(score: f64, n: usize) -> usize {
    ((score.clamp(0.0, 1.0) * n as f64).floor() as usize).min(n - 1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct HistogramRow {
    pub kind: ScoreKind,
    pub bin_low: f64,
    pub outcome: &'static str,
    pub count: usize,
}

/// Score histogram per outcome group. Empty input gives no rows.
pub fn histogram(
    scores: &[FrameScore],
    kind: ScoreKind,
    bin_width: f64,
    split_fn: bool,
) -> Result<Vec<HistogramRow>, ReportError> {
    let n = bin_count(bin_width)?;
    let groups = groups(split_fn);
    let mut counts = vec![vec![0usize; groups.len()]; n];
    let mut any = false;
    for s in scores {
        if let (Some(v), Some(g)) = (s.score(kind), group_of(s.outcome, split_fn)) {
            counts[score_bin(v, n)][g] += 1;
            any = true;
        }
    }
    if !any {
        return Ok(Vec::new());
    }
    let mut rows = Vec::with_capacity(n * groups.len());
    for (b, row) in counts.iter().enumerate() {
        for (g, &count) in row.iter().enumerate() {
            rows.push(HistogramRow {
                kind,
                bin_low: b as f64 / n as f64,
                outcome: groups[g],
                count,
            });
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeatmapRow {
    pub kind: ScoreKind,
    pub score_bin_low: f64,
    pub ttc_bin: String,
    pub count: usize,
}

/// Joint counts of score bin and TTC bin over all scored frames.
pub fn heatmap(
    scores: &[FrameScore],
    kind: ScoreKind,
    bin_width: f64,
    bins: &TtcBins,
) -> Result<Vec<HeatmapRow>, ReportError> {
    let n = bin_count(bin_width)?;
    let mut counts = vec![vec![0usize; bins.len()]; n];
    let mut any = false;
    for s in scores {
        if let Some(v) = s.score(kind) {
            counts[score_bin(v, n)][bins.index(s.ttc)] += 1;
            any = true;
        }
    }
    if !any {
        return Ok(Vec::new());
    }
    let mut rows = Vec::with_capacity(n * bins.len());
    for (b, row) in counts.iter().enumerate() {
        for (t, &count) in row.iter().enumerate() {
            rows.push(HeatmapRow {
                kind,
                score_bin_low: b as f64 / n as f64,
                ttc_bin: bins.label(t),
                count,
            });
        }
    }
    Ok(rows)
}

/// Agreement between the ground-truth and the hypothesized score.
#[derive(Debug, Clone, PartialEq)]
pub struct Correlation {
    /// Frames carrying both scores.
    pub n: usize,
    pub rho: Option<f64>,
    pub n_fn: usize,
    /// Correlation restricted to FN frames.
    pub rho_fn: Option<f64>,
    pub xi: f64,
    /// Frames flagged (`score <= xi`) by the ground-truth score.
    pub gt_flagged: usize,
    /// Of those, frames also flagged by the hypothesized score.
    pub both_flagged: usize,
}

impl Correlation {
    pub fn agreement(&self) -> Option<f64> {
        (self.gt_flagged > 0).then(|| self.both_flagged as f64 / self.gt_flagged as f64)
    }
}

pub fn correlation(scores: &[FrameScore], xi: f64) -> Correlation {
    let pairs: Vec<(f64, f64, bool)> = scores
        .iter()
        .filter_map(|s| Some((s.score_gt()?, s.score_hyp()?, s.outcome.is_false_negative())))
        .collect();
    let rho_of = |fn_only: bool| {
        let (xs, ys): (Vec<f64>, Vec<f64>) = pairs
            .iter()
            .filter(|p| !fn_only || p.2)
            .map(|p| (p.0, p.1))
            .unzip();
        pearson(&xs, &ys).ok()
    };
    let gt_flagged = pairs.iter().filter(|p| p.0 <= xi).count();
    let both_flagged = pairs.iter().filter(|p| p.0 <= xi && p.1 <= xi).count();
    Correlation {
        n: pairs.len(),
        rho: rho_of(false),
        n_fn: pairs.iter().filter(|p| p.2).count(),
        rho_fn: rho_of(true),
        xi,
        gt_flagged,
        both_flagged,
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn render<F>(header: &[&str], fill: F) -> String
where
    F: FnOnce(&mut csv::Writer<Vec<u8>>) -> csv::Result<()>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    let result = w.write_record(header).and_then(|_| fill(&mut w));
    // writing into memory cannot fail
    result.expect("in-memory csv");
    let bytes = w.into_inner().expect("in-memory csv");
    String::from_utf8(bytes).expect("csv input is utf-8")
}

fn result_fields(r: Option<&CFlowResult>) -> [String; 7] {
    match r {
        Some(r) => [
            r.score.to_string(),
            r.epsilon.to_string(),
            r.epsilon_norm.to_string(),
            r.delta_d.to_string(),
            r.delta_d_norm.to_string(),
            r.n_samples.to_string(),
            r.saturated.to_string(),
        ],
        None => Default::default(),
    }
}

pub fn frame_scores_csv(scores: &[FrameScore]) -> String {
    let cols: Vec<&str> = CFlowResult::CSV_HEADER.split(',').collect();
    let mut header = vec!["track_id", "frame_index", "ttc_s", "outcome"];
    let gt: Vec<String> = cols.iter().map(|c| format!("gt_{c}")).collect();
    let hyp: Vec<String> = cols.iter().map(|c| format!("hyp_{c}")).collect();
    header.extend(gt.iter().map(String::as_str));
    header.extend(hyp.iter().map(String::as_str));
    render(&header, |w| {
        for s in scores {
            let mut rec = vec![
                s.track_id.clone(),
                s.frame_index.to_string(),
                opt(s.ttc),
                s.outcome.as_str().to_string(),
            ];
            rec.extend(result_fields(s.gt.as_ref()));
            rec.extend(result_fields(s.hyp.as_ref()));
            w.write_record(&rec)?;
        }
        Ok(())
    })
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    render(
        &[
            "score", "ttc_bin", "xi", "outcome", "n", "flagged", "percent",
        ],
        |w| {
            for r in rows {
                w.write_record([
                    r.kind.as_str().to_string(),
                    r.ttc_bin.clone(),
                    r.xi.to_string(),
                    r.outcome.to_string(),
                    r.n.to_string(),
                    r.flagged.to_string(),
                    opt(r.percent),
                ])?;
            }
            Ok(())
        },
    )
}

pub fn histogram_csv(rows: &[HistogramRow]) -> String {
    render(&["score", "bin_low", "outcome", "count"], |w| {
        for r in rows {
            w.write_record([
                r.kind.as_str().to_string(),
                r.bin_low.to_string(),
                r.outcome.to_string(),
                r.count.to_string(),
            ])?;
        }
        Ok(())
    })
}

pub fn heatmap_csv(rows: &[HeatmapRow]) -> String {
    render(&["score", "score_bin_low", "ttc_bin", "count"], |w| {
        for r in rows {
            w.write_record([
                r.kind.as_str().to_string(),
                r.score_bin_low.to_string(),
                r.ttc_bin.clone(),
                r.count.to_string(),
            ])?;
        }
        Ok(())
    })
}

pub fn skips_csv(skips: &[Skip]) -> String {
    render(
        &["track_id", "frame_index", "mode", "cause", "detail"],
        |w| {
            for s in skips {
                w.write_record([
                    s.track_id.as_str(),
                    &s.frame_index.to_string(),
                    s.mode.as_str(),
                    s.cause.label(),
                    s.cause.detail(),
                ])?;
            }
            Ok(())
        },
    )
}

impl Correlation {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "n = {}", self.n);
        let _ = writeln!(out, "rho = {}", opt(self.rho));
        let _ = writeln!(out, "n_fn = {}", self.n_fn);
        let _ = writeln!(out, "rho_fn = {}", opt(self.rho_fn));
        let _ = writeln!(out, "xi = {}", self.xi);
        let _ = writeln!(out, "gt_flagged = {}", self.gt_flagged);
        let _ = writeln!(out, "both_flagged = {}", self.both_flagged);
        let _ = writeln!(out, "agreement = {}", opt(self.agreement()));
        out
    }
}
