//! Compares the ground-truth score with the score of hypothesized boxes on
//! frames where the detector missed, using the committed jitter suite.
//! Agreement means the score can flag missed pedestrians without labels.

use std::path::PathBuf;

use cflow::eval::{correlation, score_tracks, ScoreConfig};
use cflow::flow::MemoryFlowStore;
use cflow::synth::{generate, load_scenarios};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let suite = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| {
            PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data/correlation.toml")
        });
    let mut store = MemoryFlowStore::new();
    let mut tracks = Vec::new();
    for spec in load_scenarios(&suite)? {
        let scene = generate(&spec)?;
        for (f, map) in scene.track.frames.iter().zip(scene.flows) {
            store.insert(f.flow_ref.clone(), map);
        }
        tracks.push(scene.track);
    }
    let report = score_tracks(&tracks, &store, &ScoreConfig::default());
    let missed: Vec<_> = report
        .scores
        .into_iter()
        .filter(|s| s.outcome.is_false_negative())
        .collect();

    let c = correlation(&missed, 0.1);
    print!("{}", c.to_text());
    for s in missed.iter().take(6) {
        println!(
            "{:<22} frame {:>2}: gt {:.3e}  hyp {:.3e}",
            s.track_id,
            s.frame_index,
            s.score_gt().unwrap_or(f64::NAN),
            s.score_hyp().unwrap_or(f64::NAN)
        );
    }
    Ok(())
}
