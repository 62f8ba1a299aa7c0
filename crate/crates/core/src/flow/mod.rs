//! Dense optical-flow maps: `.flo` encoding and box-restricted median flow.
//!
//! The `.flo` layout is little-endian throughout:
//!
//! ```text
//! bytes 0..4   f32 202021.25 (the ASCII tag "PIEH")
//! bytes 4..8   i32 width
//! bytes 8..12  i32 height
//! bytes 12..   height rows x width columns x (u, v) as f32, top row first
//! ```
//!
//! Only the horizontal component `u` feeds the credibility score; `v` is
//! kept so that files round-trip bit for bit.

mod store;

pub use store::{DirFlowStore, FlowLoadError, FlowSource, MemoryFlowStore};

use std::ops::Range;

use thiserror::Error;

use crate::track::BBox;

pub const FLO_MAGIC: [u8; 4] = *b"PIEH";
pub const FLO_HEADER_LEN: usize = 12;
/// Default cap on `width * height` accepted by the parser.
pub const DEFAULT_MAX_PIXELS: u64 = 10_000 * 10_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FlowError {
    #[error("bad magic: expected \"PIEH\" (202021.25), found {found:02x?}")]
    BadMagic { found: Vec<u8> },
    #[error("truncated flow file: expected {expected} bytes, found {actual}")]
    Truncated { expected: u64, actual: u64 },
    #[error("unexpected trailing data: expected {expected} bytes, found {actual}")]
    TrailingData { expected: u64, actual: u64 },
    #[error("bad dimensions {width} x {height}")]
    BadDims { width: i64, height: i64 },
    #[error("non-finite flow value at pixel {pixel}")]
    NonFinite { pixel: usize },
    #[error("flow grids must hold width*height = {expected} values (u: {u}, v: {v})")]
    GridSize { expected: usize, u: usize, v: usize },
    #[error("box covers no pixel of the {width} x {height} map")]
    EmptyRegion { width: usize, height: usize },
}

/// Per-pixel horizontal and vertical flow for one image pair, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowMap {
    width: usize,
    height: usize,
    u: Vec<f32>,
    v: Vec<f32>,
}

impl FlowMap {
    pub fn new(width: usize, height: usize, u: Vec<f32>, v: Vec<f32>) -> Result<Self, FlowError> {
        if width == 0 || height == 0 || width > i32::MAX as usize || height > i32::MAX as usize {
            return Err(FlowError::BadDims {
                width: width as i64,
                height: height as i64,
            });
        }
        let expected = width * height;
        if u.len() != expected || v.len() != expected {
            return Err(FlowError::GridSize {
                expected,
                u: u.len(),
                v: v.len(),
            });
        }
        if let Some(pixel) = u
            .iter()
            .zip(&v)
            .position(|(a, b)| !a.is_finite() || !b.is_finite())
        {
            return Err(FlowError::NonFinite { pixel });
        }
        Ok(Self {
            width,
            height,
            u,
            v,
        })
    }

    /// Map with constant flow everywhere.
    pub fn constant(width: usize, height: usize, u: f32, v: f32) -> Result<Self, FlowError> {
        Self::new(
            width,
            height,
            vec![u; width * height],
            vec![v; width * height],
        )
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn u(&self) -> &[f32] {
        &self.u
    }

    pub fn v(&self) -> &[f32] {
        &self.v
    }

    pub fn u_at(&self, x: usize, y: usize) -> f32 {
        self.u[y * self.width + x]
    }

    /// Integer pixel ranges `(xs, ys)` covered by `b`, clipped to the map.
    ///
    /// Pixel `(ix, iy)` belongs to the box iff `x_ul <= ix < x_ul + width`
    /// and likewise for `y`.
    pub fn pixel_span(&self, b: &BBox) -> Option<PixelSpan> {
        box_pixel_span(b, self.width, self.height)
    }

    /// Horizontal flow values of all pixels inside the clipped box.
    pub fn u_in_box(&self, b: &BBox) -> Result<Vec<f32>, FlowError> {
        let (xs, ys) = self.pixel_span(b).ok_or(FlowError::EmptyRegion {
            width: self.width,
            height: self.height,
        })?;
        let mut out = Vec::with_capacity(xs.len() * ys.len());
        for y in ys {
            let row = &self.u[y * self.width..(y + 1) * self.width];
            out.extend_from_slice(&row[xs.clone()]);
        }
        Ok(out)
    }
}

/// Column and row ranges of a box on a pixel grid.
pub type PixelSpan = (Range<usize>, Range<usize>);

/// Pixels of a `width x height` grid covered by `b`, or `None` if the
/// clipped box is empty.
pub fn box_pixel_span(b: &BBox, width: usize, height: usize) -> Option<PixelSpan> {
    let xs = clip_span(b.x_ul(), b.x_end(), width)?;
    let ys = clip_span(b.y_ul(), b.y_end(), height)?;
    Some((xs, ys))
}

fn clip_span(lo: f64, hi: f64, len: usize) -> Option<Range<usize>> {
    // smallest integer >= lo, and one past the largest integer < hi
    let start = lo.ceil().max(0.0);
    let end = hi.ceil().min(len as f64);
    if end <= start {
        return None;
    }
    Some(start as usize..end as usize)
}

/// Parses a `.flo` byte buffer with the default dimension cap.
pub fn parse_flo(bytes: &[u8]) -> Result<FlowMap, FlowError> {
    parse_flo_with_cap(bytes, DEFAULT_MAX_PIXELS)
}

pub fn parse_flo_with_cap(bytes: &[u8], max_pixels: u64) -> Result<FlowMap, FlowError> {
    if bytes.len() >= 4 && bytes[..4] != FLO_MAGIC {
        return Err(FlowError::BadMagic {
            found: bytes[..4].to_vec(),
        });
    }
    if bytes.len() < FLO_HEADER_LEN {
        return Err(FlowError::Truncated {
            expected: FLO_HEADER_LEN as u64,
            actual: bytes.len() as u64,
        });
    }
    let width = i32::from_le_bytes(bytes[4..8].try_into().unwrap()) as i64;
    let height = i32::from_le_bytes(bytes[8..12].try_into().unwrap()) as i64;
    if width <= 0 || height <= 0 || (width as u64) * (height as u64) > max_pixels {
        return Err(FlowError::BadDims { width, height });
    }
    let pixels = (width as u64) * (height as u64);
    let expected = FLO_HEADER_LEN as u64 + 8 * pixels;
    let actual = bytes.len() as u64;
    if actual < expected {
        return Err(FlowError::Truncated { expected, actual });
    }
    if actual > expected {
        return Err(FlowError::TrailingData { expected, actual });
    }

    let n = pixels as usize;
    let mut u = Vec::with_capacity(n);
    let mut v = Vec::with_capacity(n);
    for (pixel, chunk) in bytes[FLO_HEADER_LEN..].chunks_exact(8).enumerate() {
        let a = f32::from_le_bytes(chunk[..4].try_into().unwrap());
        let b = f32::from_le_bytes(chunk[4..].try_into().unwrap());
        if !a.is_finite() || !b.is_finite() {
            return Err(FlowError::NonFinite { pixel });
        }
        u.push(a);
        v.push(b);
    }
    Ok(FlowMap {
        width: width as usize,
        height: height as usize,
        u,
        v,
    })
}

pub fn write_flo(map: &FlowMap) -> Vec<u8> {
    let mut out = Vec::with_capacity(FLO_HEADER_LEN + 8 * map.u.len());
    out.extend_from_slice(&FLO_MAGIC);
    out.extend_from_slice(&(map.width as i32).to_le_bytes());
    out.extend_from_slice(&(map.height as i32).to_le_bytes());
    for (a, b) in map.u.iter().zip(&map.v) {
        out.extend_from_slice(&a.to_le_bytes());
        out.extend_from_slice(&b.to_le_bytes());
    }
    out
}

/// Median of the horizontal flow over the pixels covered by `b`.
///
/// Even counts average the two middle values.
pub fn median_flow(map: &FlowMap, b: &BBox) -> Result<f64, FlowError> {
    let mut values = map.u_in_box(b)?;
    Ok(median_in_place(&mut values))
}

/// Median of a nonempty slice, reordering it. Even lengths average the
/// two middle values.
pub(crate) fn median_in_place(values: &mut [f32]) -> f64 {
    debug_assert!(!values.is_empty());
    let n = values.len();
    let mid = n / 2;
    let (lower, upper_mid, _) = values.select_nth_unstable_by(mid, f32::total_cmp);
    let upper_mid = *upper_mid as f64;
    if n % 2 == 1 {
        upper_mid
    } else {
        let lower_mid = lower.iter().copied().max_by(f32::total_cmp).unwrap() as f64;
        (lower_mid + upper_mid) / 2.0
    }
}

/// Summary of the horizontal component, for inspection tools.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowSummary {
    pub width: usize,
    pub height: usize,
    pub u_min: f64,
    pub u_max: f64,
    pub u_median: f64,
}

pub fn summarize(map: &FlowMap) -> FlowSummary {
    let mut u = map.u.clone();
    let u_min = u.iter().copied().min_by(f32::total_cmp).unwrap() as f64;
    let u_max = u.iter().copied().max_by(f32::total_cmp).unwrap() as f64;
    FlowSummary {
        width: map.width,
        height: map.height,
        u_min,
        u_max,
        u_median: median_in_place(&mut u),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bb(x: f64, y: f64, w: f64, h: f64) -> BBox {
        BBox::new(x, y, w, h).unwrap()
    }

    #[test]
    fn decodes_hand_encoded_single_pixel() {
        let mut bytes = Vec::new();
        bytes.extend_from_slice(&202021.25f32.to_le_bytes());
        bytes.extend_from_slice(&1i32.to_le_bytes());
        bytes.extend_from_slice(&1i32.to_le_bytes());
        bytes.extend_from_slice(&2.5f32.to_le_bytes());
        bytes.extend_from_slice(&(-1.0f32).to_le_bytes());
        // the sentinel float spells the tag
        assert_eq!(&bytes[..4], b"PIEH");
        let map = parse_flo(&bytes).unwrap();
        assert_eq!(map, FlowMap::new(1, 1, vec![2.5], vec![-1.0]).unwrap());
    }

    #[test]
    fn header_only_is_truncated() {
        let mut bytes = FLO_MAGIC.to_vec();
        bytes.extend_from_slice(&4i32.to_le_bytes());
        bytes.extend_from_slice(&4i32.to_le_bytes());
        assert_eq!(
            parse_flo(&bytes),
            Err(FlowError::Truncated {
                expected: 12 + 8 * 16,
                actual: 12
            })
        );
        assert!(matches!(
            parse_flo(&bytes[..6]),
            Err(FlowError::Truncated { .. })
        ));
    }

    #[test]
    fn rejects_bad_magic_dims_and_nan() {
        let good = write_flo(&FlowMap::constant(2, 2, 1.0, 0.0).unwrap());
        let mut bad = good.clone();
        bad[0] = b'X';
        assert!(matches!(parse_flo(&bad), Err(FlowError::BadMagic { .. })));

        let mut neg = good.clone();
        neg[4..8].copy_from_slice(&(-2i32).to_le_bytes());
        assert!(matches!(parse_flo(&neg), Err(FlowError::BadDims { .. })));
        assert!(matches!(
            parse_flo_with_cap(&good, 3),
            Err(FlowError::BadDims { .. })
        ));

        let mut nan = good.clone();
        nan[12..16].copy_from_slice(&f32::NAN.to_le_bytes());
        assert_eq!(parse_flo(&nan), Err(FlowError::NonFinite { pixel: 0 }));

        let mut long = good;
        long.push(0);
        assert!(matches!(
            parse_flo(&long),
            Err(FlowError::TrailingData { .. })
        ));
    }

    #[test]
    fn write_sizes_and_dims() {
        let m = FlowMap::constant(1, 1, 0.0, 0.0).unwrap();
        assert_eq!(write_flo(&m).len(), 20);
        let a = write_flo(&FlowMap::new(2, 1, vec![1.0, 2.0], vec![0.0, 0.0]).unwrap());
        let b = write_flo(&FlowMap::new(1, 2, vec![1.0, 2.0], vec![0.0, 0.0]).unwrap());
        assert_ne!(a[..12], b[..12]);
        assert_eq!(a[12..], b[12..]);
    }

    #[test]
    fn median_cases() {
        let m = FlowMap::constant(8, 6, 3.0, 0.0).unwrap();
        assert_eq!(median_flow(&m, &bb(1.5, 0.2, 3.0, 4.0)).unwrap(), 3.0);

        let m = FlowMap::new(2, 2, vec![4.0, 1.0, 3.0, 2.0], vec![0.0; 4]).unwrap();
        assert_eq!(median_flow(&m, &bb(0.0, 0.0, 2.0, 2.0)).unwrap(), 2.5);
        // clipped box still covers everything
        assert_eq!(median_flow(&m, &bb(-5.0, -5.0, 50.0, 50.0)).unwrap(), 2.5);

        assert!(matches!(
            median_flow(&m, &bb(-3.0, 0.0, 3.0, 1.0)),
            Err(FlowError::EmptyRegion { .. })
        ));
        assert!(matches!(
            median_flow(&m, &bb(0.0, 2.0, 1.0, 1.0)),
            Err(FlowError::EmptyRegion { .. })
        ));
    }

    #[test]
    fn half_open_membership() {
        let m = FlowMap::constant(10, 10, 0.0, 0.0).unwrap();
        // [1.5, 4.0) holds 2 and 3; [0.0, 1.0) holds 0
        let (xs, ys) = m.pixel_span(&bb(1.5, 0.0, 2.5, 1.0)).unwrap();
        assert_eq!(xs, 2..4);
        assert_eq!(ys, 0..1);
        // sub-pixel box between integer coordinates covers nothing
        assert!(m.pixel_span(&bb(2.2, 2.2, 0.5, 0.5)).is_none());
    }
}
