//! Writes a small flow map to `.flo`, reads it back and prints a summary.
//!
//! ```text
//! cargo run --example flo_roundtrip [OUT.flo]
//! ```

use cflow::flow::summarize;
use cflow::{median_flow, parse_flo, write_flo, BBox, FlowMap};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (w, h) = (32, 24);
    // background drifts left, a 8x12 block moves right
    let mut u = vec![-1.0f32; w * h];
    for y in 6..18 {
        for x in 10..18 {
            u[y * w + x] = 2.5;
        }
    }
    let map = FlowMap::new(w, h, u, vec![0.0; w * h])?;

    let bytes = write_flo(&map);
    if let Some(path) = std::env::args().nth(1) {
        std::fs::write(&path, &bytes)?;
        println!("wrote {path}");
    }
    let back = parse_flo(&bytes)?;
    assert_eq!(back, map);

    let s = summarize(&back);
    println!("{} bytes, {}x{}", bytes.len(), s.width, s.height);
    println!("u in [{}, {}], median {}", s.u_min, s.u_max, s.u_median);

    let block = BBox::new(10.0, 6.0, 8.0, 12.0)?;
    let wider = BBox::new(8.0, 6.0, 12.0, 12.0)?;
    println!("median u in block: {}", median_flow(&back, &block)?);
    println!(
        "median u with background margin: {}",
        median_flow(&back, &wider)?
    );
    Ok(())
}
