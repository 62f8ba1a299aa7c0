use cflow::eval::{
    heatmap, histogram, pearson, score_tracks, sweep, FrameScore, ScoreConfig, ScoreKind,
    StatsError, SweepConfig, TtcBins,
};
use cflow::flow::MemoryFlowStore;
use cflow::synth::{generate, oracle_cflow_scene, parse_scenarios};
use cflow::{CFlowParams, CFlowResult, Outcome, ScoreMode};

fn scored(outcome: Outcome, ttc: Option<f64>, score: f64) -> FrameScore {
    FrameScore {
        track_id: "x".into(),
        frame_index: 0,
        ttc,
        outcome,
        gt: Some(CFlowResult {
            score,
            epsilon: 0.0,
            epsilon_norm: 0.0,
            delta_d: 0.0,
            delta_d_norm: 0.0,
            n_samples: 3,
            saturated: false,
        }),
        hyp: None,
    }
}

#[test]
fn sweep_toy_table() {
    let fns: Vec<FrameScore> = [0.05, 0.08, 0.2, 0.6]
        .iter()
        .map(|&s| scored(Outcome::FnMiss, Some(0.5), s))
        .collect();
    let cfg = SweepConfig {
        thresholds: vec![0.1],
        ..SweepConfig::default()
    };
    let rows = sweep(&fns, ScoreKind::Gt, &cfg);
    assert_eq!(rows[1].outcome, "FN");
    assert_eq!(rows[1].percent, Some(50.0));

    let tps = [
        scored(Outcome::Tp, Some(0.5), 0.9),
        scored(Outcome::Tp, Some(3.5), 0.31),
    ];
    let rows = sweep(&tps, ScoreKind::Gt, &SweepConfig::default());
    assert!(rows
        .iter()
        .filter(|r| r.outcome == "TP")
        .all(|r| r.percent.is_none() || r.percent == Some(0.0)));

    let edge = [scored(Outcome::FnPoor, Some(0.5), 0.1)];
    let rows = sweep(&edge, ScoreKind::Gt, &cfg);
    assert_eq!((rows[1].n, rows[1].flagged), (1, 1));
}

#[test]
fn histogram_boundaries() {
    let tps = [
        scored(Outcome::Tp, None, 0.5),
        scored(Outcome::Tp, None, 0.55),
    ];
    let rows = histogram(&tps, ScoreKind::Gt, 0.1, false).unwrap();
    let hit: Vec<_> = rows.iter().filter(|r| r.count > 0).collect();
    assert_eq!(hit.len(), 1);
    assert_eq!(
        (hit[0].bin_low, hit[0].outcome, hit[0].count),
        (0.5, "TP", 2)
    );

    let top = [scored(Outcome::Tp, None, 1.0 - f64::EPSILON)];
    let rows = histogram(&top, ScoreKind::Gt, 0.1, false).unwrap();
    assert_eq!(rows.iter().find(|r| r.count > 0).unwrap().bin_low, 0.9);
    assert!(histogram(&[], ScoreKind::Gt, 0.1, false)
        .unwrap()
        .is_empty());
}

#[test]
fn heatmap_hand_binned() {
    let toy = [
        scored(Outcome::Tp, Some(0.5), 0.95),
        scored(Outcome::Tp, Some(1.0), 0.91),
        scored(Outcome::FnMiss, Some(1.5), 0.02),
        scored(Outcome::FnPoor, Some(7.0), 0.45),
        scored(Outcome::Tp, None, 0.45),
    ];
    let rows = heatmap(&toy, ScoreKind::Gt, 0.1, &TtcBins::default()).unwrap();
    assert_eq!(rows.len(), 10 * 6);
    let nonzero: Vec<(f64, &str, usize)> = rows
        .iter()
        .filter(|r| r.count > 0)
        .map(|r| (r.score_bin_low, r.ttc_bin.as_str(), r.count))
        .collect();
    assert_eq!(
        nonzero,
        vec![
            (0.0, "(1,2]", 1),
            (0.4, "(4,inf)", 1),
            (0.4, "unbinned", 1),
            (0.9, "[0,1]", 2)
        ]
    );
}

#[test]
fn pearson_closed_form() {
    let r = pearson(&[1.0, 2.0, 3.0], &[1.0, 2.0, 4.0]).unwrap();
    assert!((r - 3.0 / (2.0f64 * (14.0 / 3.0)).sqrt()).abs() < 1e-12);
    assert!((r - 0.9819805).abs() < 1e-7);
    assert_eq!(pearson(&[1.0, 2.0, 3.0], &[-1.0, -2.0, -3.0]), Ok(-1.0));
    assert_eq!(
        pearson(&[1.0, 1.0], &[0.0, 1.0]),
        Err(StatsError::DegenerateVariance)
    );
}

#[test]
fn occlusion_onset_scores_low_and_hypothesis_matches_oracle() {
    let specs = parse_scenarios(
        r#"
[[scenario]]
name = "occluded"
image_w = 96
image_h = 72
n_frames = 12
dt = 0.1
background_u = -1.0
ped_start = [20.0, 15.0, 14.0, 30.0]
ped_velocity = [0.5, 0.0]
growth_rate = 1.02
ped_u0 = 2.5
noise_std = 0.05
seed = 9
events = [{ kind = "occlusion", frame = 8, fraction = 0.5 }, { kind = "dropout", frames = [8] }]
"#,
    )
    .unwrap();
    let scene = generate(&specs[0]).unwrap();
    let mut store = MemoryFlowStore::new();
    for (f, m) in scene.track.frames.iter().zip(&scene.flows) {
        store.insert(f.flow_ref.clone(), m.clone());
    }
    let report = score_tracks(
        std::slice::from_ref(&scene.track),
        &store,
        &ScoreConfig::default(),
    );
    let onset = report.scores.iter().find(|s| s.frame_index == 8).unwrap();
    assert_eq!(onset.outcome, Outcome::FnMiss);
    assert!(onset.score_gt().unwrap() < 0.5);
    let oracle =
        oracle_cflow_scene(&scene, 8, ScoreMode::Pred, &CFlowParams::default(), 0.5).unwrap();
    assert!((onset.score_hyp().unwrap() - oracle).abs() <= 1e-12);
}
