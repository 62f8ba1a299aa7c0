//! Scores two hand-made windows: a pedestrian walking steadily towards the
//! camera, and the same pedestrian whose box suddenly shrinks while its flow
//! jumps.

use cflow::metric::{fit_line, size_change};
use cflow::{cflow, BBox, BoxSource, CFlowParams, WindowSample};

fn window(sizes: &[(f64, f64)], us: &[f64]) -> Vec<WindowSample> {
    sizes
        .iter()
        .zip(us)
        .enumerate()
        .map(|(i, (&(w, h), &u))| WindowSample {
            timestamp: 0.1 * i as f64,
            frame_index: i as u64,
            bbox: BBox::new(50.0 + 2.0 * i as f64, 40.0, w, h).unwrap(),
            u,
            source: BoxSource::Gt,
        })
        .collect()
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let params = CFlowParams::default();
    let steady = window(
        &[
            (20.0, 40.0),
            (20.6, 41.2),
            (21.2, 42.4),
            (21.8, 43.6),
            (22.4, 44.8),
            (23.0, 46.0),
        ],
        &[2.0, 2.1, 2.2, 2.3, 2.4, 2.5],
    );
    let broken = window(
        &[
            (20.0, 40.0),
            (20.6, 41.2),
            (21.2, 42.4),
            (21.8, 43.6),
            (22.4, 44.8),
            (11.0, 46.0),
        ],
        &[2.0, 2.1, 2.2, 2.3, 2.4, -0.8],
    );

    for (name, win) in [("steady", &steady), ("broken", &broken)] {
        let fit = fit_line(win)?;
        let change = size_change(win)?;
        let r = cflow(win, 5, &params)?;
        println!("{name}:");
        println!("  u = {:.3} + {:.3} t", fit.intercept, fit.slope);
        println!(
            "  diagonal {:.2} -> {:.2} px",
            change.d_previous, change.d_current
        );
        println!(
            "  epsilon {:.4} (norm {:.4}{}), delta_d {:.3} (norm {:.4})",
            r.epsilon,
            r.epsilon_norm,
            if r.saturated { ", floored" } else { "" },
            r.delta_d,
            r.delta_d_norm
        );
        println!("  score {:.6}", r.score);
    }
    Ok(())
}
