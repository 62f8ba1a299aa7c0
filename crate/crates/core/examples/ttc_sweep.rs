//! Threshold sweep over TTC bins on the committed discrimination suite:
//! what share of TP and FN frames each threshold flags.

use std::path::PathBuf;

use cflow::eval::{histogram, score_tracks, sweep, ScoreConfig, ScoreKind, SweepConfig};
use cflow::flow::MemoryFlowStore;
use cflow::synth::{generate, load_scenarios};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let suite = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| {
            PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data/discrimination.toml")
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
    println!(
        "{} tracks, {} scored frames",
        tracks.len(),
        report.scores.len()
    );

    let cfg = SweepConfig::default();
    println!(
        "{:<10} {:>4} {:<3} {:>5} {:>8}",
        "ttc", "xi", "", "n", "flagged"
    );
    for r in sweep(&report.scores, ScoreKind::Gt, &cfg) {
        if r.n == 0 {
            continue;
        }
        println!(
            "{:<10} {:>4} {:<3} {:>5} {:>7.1}%",
            r.ttc_bin,
            r.xi,
            r.outcome,
            r.n,
            r.percent.unwrap_or(0.0)
        );
    }

    println!("\nscore histogram (bins with frames)");
    for r in histogram(&report.scores, ScoreKind::Gt, 0.1, false)? {
        if r.count > 0 {
            println!(
                "[{:.1}, {:.1}) {:<3} {}",
                r.bin_low,
                r.bin_low + 0.1,
                r.outcome,
                r.count
            );
        }
    }
    Ok(())
}
