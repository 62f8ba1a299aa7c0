//! Extrapolates a box for a frame the detector missed.
//!
//! Detections exist at frames 0, 1, 3 and 4 (frame 2 was also missed); the
//! box for frame 5 is hypothesized from them.

use cflow::{hypothesize_box, BBox, HypothesisInput};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let detections = vec![
        (0, BBox::new(100.0, 50.0, 14.0, 32.0)?),
        (1, BBox::new(106.1, 51.4, 14.0, 32.0)?),
        (3, BBox::new(117.9, 54.1, 14.5, 33.0)?),
        (4, BBox::new(124.0, 55.6, 14.5, 33.0)?),
    ];
    let h = hypothesize_box(&HypothesisInput {
        detections,
        target_frame: 5,
    })?;
    println!("from {} detections", h.n_detections);
    println!("step {:.3} px/frame", h.step_px);
    if let Some((dx, dy)) = h.direction {
        println!("direction ({dx:.4}, {dy:.4})");
    }
    let b = h.bbox;
    println!(
        "frame 5: x_ul {:.3}, y_ul {:.3}, {} x {}",
        b.x_ul(),
        b.y_ul(),
        b.width(),
        b.height()
    );
    Ok(())
}
