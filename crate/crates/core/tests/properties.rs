use proptest::prelude::*;

use cflow::eval::{histogram, pearson, sweep, FrameScore, ScoreKind, SweepConfig};
use cflow::metric::credibility;
use cflow::track::{parse_tracks, write_tracks};
use cflow::{
    cflow, hypothesize_box, median_flow, parse_flo, write_flo, BBox, BoxSource, CFlowParams,
    CFlowResult, FlowMap, HypothesisInput, Outcome, Track, TrackFrame, WindowSample,
};

fn flow_map() -> impl Strategy<Value = FlowMap> {
    (1usize..24, 1usize..24).prop_flat_map(|(w, h)| {
        let vals = prop::collection::vec(-100.0f32..100.0, w * h);
        (vals.clone(), vals).prop_map(move |(u, v)| FlowMap::new(w, h, u, v).unwrap())
    })
}

fn bbox() -> impl Strategy<Value = BBox> {
    (-10.0..30.0, -10.0..30.0, 0.5..30.0, 0.5..30.0)
        .prop_map(|(x, y, w, h)| BBox::new(x, y, w, h).unwrap())
}

fn sorted_median(map: &FlowMap, b: &BBox) -> Option<f64> {
    let mut vals: Vec<f64> = Vec::new();
    for iy in 0..map.height() {
        for ix in 0..map.width() {
            let (x, y) = (ix as f64, iy as f64);
            if x >= b.x_ul()
                && x < b.x_ul() + b.width()
                && y >= b.y_ul()
                && y < b.y_ul() + b.height()
            {
                vals.push(map.u()[iy * map.width() + ix] as f64);
            }
        }
    }
    vals.sort_by(f64::total_cmp);
    let n = vals.len();
    match n {
        0 => None,
        _ if n % 2 == 1 => Some(vals[n / 2]),
        _ => Some((vals[n / 2 - 1] + vals[n / 2]) / 2.0),
    }
}

/// Six GT samples at frames 0..=5 with growing boxes and random flow.
fn window() -> impl Strategy<Value = Vec<WindowSample>> {
    (
        prop::collection::vec(-5.0..5.0f64, 6),
        prop::collection::vec(0.0..2.0f64, 6),
        (5.0..40.0f64, 10.0..80.0f64),
    )
        .prop_map(|(us, growth, (w, h))| {
            let mut size = (w, h);
            us.iter()
                .zip(&growth)
                .enumerate()
                .map(|(i, (&u, &g))| {
                    size = (size.0 + g * 0.5, size.1 + g);
                    WindowSample {
                        timestamp: 0.1 * i as f64,
                        frame_index: i as u64,
                        bbox: BBox::new(3.0 * i as f64, 10.0, size.0, size.1).unwrap(),
                        u,
                        source: BoxSource::Gt,
                    }
                })
                .collect()
        })
}

fn result(score: f64) -> CFlowResult {
    CFlowResult {
        score,
        epsilon: 0.0,
        epsilon_norm: 0.0,
        delta_d: 0.0,
        delta_d_norm: 0.0,
        n_samples: 6,
        saturated: false,
    }
}

fn frame_scores() -> impl Strategy<Value = Vec<FrameScore>> {
    let one = (
        prop::sample::select(vec![
            Outcome::Tp,
            Outcome::FnPoor,
            Outcome::FnMiss,
            Outcome::Fp,
        ]),
        prop::option::of(0.0..6.0f64),
        0.0..=1.0f64,
    )
        .prop_map(|(outcome, ttc, score)| FrameScore {
            track_id: "p".into(),
            frame_index: 0,
            ttc,
            outcome,
            gt: Some(result(score)),
            hyp: None,
        });
    prop::collection::vec(one, 0..40)
}

fn track() -> impl Strategy<Value = Track> {
    let frame = (
        1u64..4,
        0.01..1.0f64,
        prop::option::of(bbox()),
        prop::option::of((bbox(), 0.0..=1.0f64)),
        prop::option::of(0.0..10.0f64),
    );
    ("[a-z]{1,6}", prop::collection::vec(frame, 1..8)).prop_map(|(id, raw)| {
        let (mut idx, mut t) = (0u64, 0.0f64);
        let frames = raw
            .into_iter()
            .map(|(step, dt, gt, pred, ttc)| {
                idx += step;
                t += dt;
                TrackFrame {
                    frame_index: idx,
                    timestamp: t,
                    gt_box: gt,
                    pred_box: pred.map(|p| p.0),
                    pred_score: pred.map(|p| p.1),
                    ttc,
                    flow_ref: format!("{id}_{idx}.flo"),
                }
            })
            .collect();
        Track {
            track_id: id,
            frames,
        }
    })
}

proptest! {
    #[test]
    fn flo_round_trip_is_exact(map in flow_map()) {
        let back = parse_flo(&write_flo(&map)).unwrap();
        prop_assert_eq!(back, map);
    }

    #[test]
    fn median_matches_full_sort(map in flow_map(), b in bbox()) {
        let ours = median_flow(&map, &b).ok();
        prop_assert_eq!(ours, sorted_median(&map, &b));
    }

    #[test]
    fn score_is_a_probability(win in window()) {
        let r = cflow(&win, 5, &CFlowParams::default()).unwrap();
        prop_assert!((0.0..=1.0).contains(&r.score));
        prop_assert!(r.epsilon >= 0.0);
    }

    #[test]
    fn score_ignores_time_origin(win in window(), shift in -50.0..50.0f64) {
        let base = cflow(&win, 5, &CFlowParams::default()).unwrap().score;
        let moved: Vec<WindowSample> = win
            .iter()
            .map(|s| WindowSample { timestamp: s.timestamp + shift, ..*s })
            .collect();
        let shifted = cflow(&moved, 5, &CFlowParams::default()).unwrap().score;
        prop_assert!((base - shifted).abs() <= 1e-6, "{} vs {}", base, shifted);
    }

    #[test]
    fn score_ignores_box_position(win in window(), dx in -40.0..40.0f64, dy in -40.0..40.0f64) {
        let base = cflow(&win, 5, &CFlowParams::default()).unwrap().score;
        let moved: Vec<WindowSample> = win
            .iter()
            .map(|s| WindowSample { bbox: s.bbox.translated(dx, dy).unwrap(), ..*s })
            .collect();
        prop_assert_eq!(base, cflow(&moved, 5, &CFlowParams::default()).unwrap().score);
    }

    #[test]
    fn credibility_is_monotone(dn in -2.0..2.0f64, step in 0.0..1.0f64, en in 1e-3..5.0f64) {
        prop_assert!(credibility(dn + step, en) >= credibility(dn, en));
        prop_assert_eq!(credibility(0.0, en), 0.5);
    }

    #[test]
    fn hypothesis_translates_with_detections(
        ul in (-100.0..100.0f64, -100.0..100.0f64),
        vel in (-5.0..5.0f64, -5.0..5.0f64),
        shift in (-50.0..50.0f64, -50.0..50.0f64),
        noise in prop::collection::vec((-0.5..0.5f64, -0.5..0.5f64), 4),
    ) {
        let frames = [0u64, 1, 3, 4];
        let dets = |dx: f64, dy: f64| -> Vec<(u64, BBox)> {
            frames
                .iter()
                .zip(&noise)
                .map(|(&f, n)| {
                    let x = ul.0 + vel.0 * f as f64 + n.0 + dx;
                    let y = ul.1 + vel.1 * f as f64 + n.1 + dy;
                    (f, BBox::new(x, y, 10.0, 25.0).unwrap())
                })
                .collect()
        };
        let a = hypothesize_box(&HypothesisInput { detections: dets(0.0, 0.0), target_frame: 5 }).unwrap();
        let b = hypothesize_box(&HypothesisInput { detections: dets(shift.0, shift.1), target_frame: 5 }).unwrap();
        prop_assert!((b.bbox.x_ul() - a.bbox.x_ul() - shift.0).abs() < 1e-6);
        prop_assert!((b.bbox.y_ul() - a.bbox.y_ul() - shift.1).abs() < 1e-6);
        prop_assert_eq!(a.bbox.width(), 10.0);
    }

    #[test]
    fn jsonl_round_trip(tracks in prop::collection::vec(track(), 1..4)) {
        let mut tracks = tracks;
        tracks.sort_by(|a, b| a.track_id.cmp(&b.track_id));
        tracks.dedup_by(|a, b| a.track_id == b.track_id);
        let mut buf = Vec::new();
        write_tracks(&mut buf, &tracks).unwrap();
        prop_assert_eq!(parse_tracks(buf.as_slice()).unwrap(), tracks);
    }

    #[test]
    fn sweep_is_bounded_and_monotone(scores in frame_scores()) {
        let cfg = SweepConfig { thresholds: vec![0.1, 0.3, 0.7], ..SweepConfig::default() };
        let rows = sweep(&scores, ScoreKind::Gt, &cfg);
        for r in &rows {
            if let Some(p) = r.percent {
                prop_assert!((0.0..=100.0).contains(&p));
            }
        }
        // rows run bin-major, then threshold, then outcome (TP, FN)
        for bin in rows.chunks(3 * 2) {
            for g in 0..2 {
                let ps: Vec<usize> = (0..3).map(|x| bin[2 * x + g].flagged).collect();
                prop_assert!(ps[0] <= ps[1] && ps[1] <= ps[2]);
                prop_assert!(bin[g].n == bin[2 + g].n && bin[g].n == bin[4 + g].n);
            }
        }
        let total_n: usize = rows.iter().filter(|r| r.xi == 0.1).map(|r| r.n).sum();
        let eligible = scores.iter().filter(|s| s.outcome != Outcome::Fp).count();
        prop_assert_eq!(total_n, eligible);
    }

    #[test]
    fn histogram_counts_every_scored_frame(scores in frame_scores()) {
        let rows = histogram(&scores, ScoreKind::Gt, 0.1, true).unwrap();
        for (name, outcome) in [("TP", Outcome::Tp), ("FN_POOR", Outcome::FnPoor), ("FN_MISS", Outcome::FnMiss)] {
            let counted: usize = rows.iter().filter(|r| r.outcome == name).map(|r| r.count).sum();
            prop_assert_eq!(counted, scores.iter().filter(|s| s.outcome == outcome).count());
        }
    }

    #[test]
    fn pearson_symmetric_and_affine_invariant(
        pairs in prop::collection::vec((-10.0..10.0f64, -10.0..10.0f64), 3..30),
        a in 0.1..10.0f64,
        b in -10.0..10.0f64,
    ) {
        let (xs, ys): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        if let Ok(r) = pearson(&xs, &ys) {
            prop_assert!((-1.0..=1.0).contains(&r));
            prop_assert!((pearson(&ys, &xs).unwrap() - r).abs() < 1e-12);
            let scaled: Vec<f64> = xs.iter().map(|x| a * x + b).collect();
            prop_assert!((pearson(&scaled, &ys).unwrap() - r).abs() < 1e-9);
        }
    }
}
