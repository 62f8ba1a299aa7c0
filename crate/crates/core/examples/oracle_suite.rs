//! Runs the reference oracle over the committed scenario suites and writes
//! `tests/data/oracle_scores.csv` and `tests/data/oracle_summary.txt`.
//!
//! ```text
//! cargo run --release --example oracle_suite [DATA_DIR]
//! ```

use std::fmt::Write as _;
use std::path::PathBuf;

use cflow::eval::{pearson, roc_auc};
use cflow::synth::{generate, load_scenarios, oracle_cflow_scene};
use cflow::{CFlowParams, Outcome, ScoreMode};

const SUITES: [&str; 2] = ["discrimination.toml", "correlation.toml"];

struct Row {
    suite: &'static str,
    scenario: String,
    frame: u64,
    outcome: Outcome,
    gt: Option<f64>,
    hyp: Option<f64>,
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        (xs[n / 2 - 1] + xs[n / 2]) / 2.0
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data"));
    let params = CFlowParams::default();
    let iou = cflow::track::DEFAULT_IOU_THRESHOLD;

    let mut rows = Vec::new();
    for suite in SUITES {
        for spec in load_scenarios(dir.join(suite))? {
            let scene = generate(&spec)?;
            // frames whose window reaches back k frames into the track
            for f in scene.track.frames.iter().skip(params.k as usize) {
                let score =
                    |mode| oracle_cflow_scene(&scene, f.frame_index, mode, &params, iou).ok();
                rows.push(Row {
                    suite,
                    scenario: spec.name.clone(),
                    frame: f.frame_index,
                    outcome: f.outcome(iou),
                    gt: score(ScoreMode::Gt),
                    hyp: score(ScoreMode::Pred),
                });
            }
        }
    }

    let mut csv = String::from("suite,scenario,frame_index,outcome,score_gt,score_hyp\n");
    for r in &rows {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{}",
            r.suite,
            r.scenario,
            r.frame,
            r.outcome,
            opt(r.gt),
            opt(r.hyp)
        );
    }
    std::fs::write(dir.join("oracle_scores.csv"), csv)?;

    let disc: Vec<&Row> = rows.iter().filter(|r| r.suite == SUITES[0]).collect();
    let tp: Vec<f64> = disc
        .iter()
        .filter(|r| r.outcome == Outcome::Tp)
        .filter_map(|r| r.gt)
        .collect();
    let onset: Vec<f64> = disc
        .iter()
        .filter(|r| r.scenario.starts_with("occlusion") && r.frame == 10)
        .filter_map(|r| r.gt)
        .collect();
    let fns: Vec<f64> = disc
        .iter()
        .filter(|r| r.outcome.is_false_negative())
        .filter_map(|r| r.gt)
        .collect();

    let pairs: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.suite == SUITES[1] && r.outcome.is_false_negative())
        .filter_map(|r| Some((r.gt?, r.hyp?)))
        .collect();
    let (gts, hyps): (Vec<f64>, Vec<f64>) = pairs.iter().copied().unzip();
    let low = pairs.iter().filter(|p| p.0 <= 0.1).count();
    let both = pairs.iter().filter(|p| p.0 <= 0.1 && p.1 <= 0.1).count();

    let mut summary = String::new();
    let _ = writeln!(summary, "consistent_frames = {}", tp.len());
    let _ = writeln!(summary, "consistent_median = {}", median(tp.clone()));
    let _ = writeln!(summary, "onset_frames = {}", onset.len());
    let _ = writeln!(summary, "onset_median = {}", median(onset));
    let _ = writeln!(summary, "roc_auc = {}", opt(roc_auc(&tp, &fns)));
    let _ = writeln!(summary, "jitter_pairs = {}", pairs.len());
    let _ = writeln!(
        summary,
        "jitter_pearson = {}",
        opt(pearson(&gts, &hyps).ok())
    );
    let _ = writeln!(summary, "jitter_gt_low = {low}");
    let _ = writeln!(summary, "jitter_both_low = {both}");
    std::fs::write(dir.join("oracle_summary.txt"), &summary)?;
    print!("{summary}");
    Ok(())
}
