//! Deterministic synthetic pedestrian scenes.
//!
//! A scene is a static background with uniform horizontal flow and one
//! pedestrian box that translates at constant velocity and scales about its
//! centre by `growth_rate` per frame. Pixels inside the box carry the
//! pedestrian flow `ped_u0 + ped_u_slope * frame`. Scripted events perturb
//! the scene:
//!
//! * `flow_jump` adds `delta_u` to the pedestrian flow from a frame on,
//! * `occlusion` covers the right `fraction` of the pedestrian with
//!   background flow from a frame on, and the ground-truth box shrinks to
//!   the visible left part,
//! * `dropout` removes the predicted box on listed frames,
//! * `jitter` perturbs both corners of the predicted box with Gaussian noise.
//!
//! # Noise
//!
//! Random numbers come from ChaCha8 (`rand_chacha::ChaCha8Rng`), seeded
//! with `seed_from_u64(spec.seed)` and switched to stream `frame` for the
//! flow noise of that frame, or `JITTER_STREAM | frame` for box jitter.
//! Uniform doubles are `rng.gen::<f64>()` (53-bit); Gaussian pairs use the
//! Box-Muller transform on `(1 - a, b)`. Flow noise is drawn row-major,
//! one pair per pixel, the first value added to `u` and the second to `v`.
//! Box jitter draws two pairs per frame for `(x_ul, y_ul)` and
//! `(x_lr, y_lr)`.

mod config;
pub mod oracle;

pub use config::{load_scenarios, materialize, parse_scenarios, MaterializeError};
pub use oracle::{oracle_cflow, oracle_cflow_scene, OracleError};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::flow::{box_pixel_span, FlowMap};
use crate::track::{BBox, Track, TrackFrame};

/// Stream tag for predicted-box jitter.
pub const JITTER_STREAM: u64 = 1 << 40;
/// Shortest scene accepted, `k + 2` for the default window depth.
pub const MIN_FRAMES: usize = 7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Event {
    FlowJump {
        frame: usize,
        delta_u: f64,
    },
    Occlusion {
        frame: usize,
        fraction: f64,
    },
    Dropout {
        frames: Vec<usize>,
    },
    Jitter {
        std: f64,
        #[serde(default)]
        from_frame: usize,
    },
}

fn one() -> f64 {
    1.0
}

fn one_usize() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    /// Track id of the generated pedestrian.
    pub name: String,
    pub image_w: usize,
    pub image_h: usize,
    pub n_frames: usize,
    /// Seconds per frame.
    pub dt: f64,
    pub background_u: f64,
    pub ped_start: BBox,
    /// Pixels per frame, `[x, y]`.
    pub ped_velocity: [f64; 2],
    /// Per-frame scale factor of the box about its centre; 1 keeps the size.
    #[serde(default = "one")]
    pub growth_rate: f64,
    pub ped_u0: f64,
    #[serde(default)]
    pub ped_u_slope: f64,
    #[serde(default)]
    pub events: Vec<Event>,
    #[serde(default)]
    pub noise_std: f64,
    #[serde(default)]
    pub seed: u64,
    /// Time-to-collision at frame 0; decreases by `dt` per frame.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ttc_start: Option<f64>,
    /// Number of copies to materialize, with consecutive seeds.
    #[serde(default = "one_usize")]
    pub replicas: usize,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpecError {
    #[error("scenario {name}: {message}")]
    Invalid { name: String, message: String },
    #[error("scenario {name}: pedestrian box leaves the image at frame {frame}")]
    BoxExitsImage { name: String, frame: usize },
    #[error("scenario {name}: event frame {frame} outside [0, {n_frames})")]
    EventFrame {
        name: String,
        frame: usize,
        n_frames: usize,
    },
}

/// Generated flow maps (one per frame) and the matching track.
#[derive(Debug, Clone)]
pub struct Scene {
    pub flows: Vec<FlowMap>,
    pub track: Track,
}

impl ScenarioSpec {
    fn invalid(&self, message: impl Into<String>) -> SpecError {
        SpecError::Invalid {
            name: self.name.clone(),
            message: message.into(),
        }
    }

    pub fn validate(&self) -> Result<(), SpecError> {
        if self.name.is_empty() {
            return Err(self.invalid("name must not be empty"));
        }
        if self.image_w == 0 || self.image_h == 0 {
            return Err(self.invalid("image dimensions must be positive"));
        }
        if self.n_frames < MIN_FRAMES {
            return Err(self.invalid(format!("n_frames must be >= {MIN_FRAMES}")));
        }
        let reals = [
            self.dt,
            self.background_u,
            self.ped_velocity[0],
            self.ped_velocity[1],
            self.growth_rate,
            self.ped_u0,
            self.ped_u_slope,
            self.noise_std,
        ];
        if reals.iter().any(|v| !v.is_finite()) {
            return Err(self.invalid("all numeric fields must be finite"));
        }
        if self.dt <= 0.0 {
            return Err(self.invalid("dt must be positive"));
        }
        if self.growth_rate <= 0.0 {
            return Err(self.invalid("growth_rate must be positive"));
        }
        if self.noise_std < 0.0 {
            return Err(self.invalid("noise_std must be >= 0"));
        }
        if self.replicas == 0 {
            return Err(self.invalid("replicas must be >= 1"));
        }
        if let Some(t) = self.ttc_start {
            if !t.is_finite() || t < 0.0 {
                return Err(self.invalid("ttc_start must be finite and >= 0"));
            }
        }
        for event in &self.events {
            let frames: Vec<usize> = match event {
                Event::FlowJump { frame, delta_u } => {
                    if !delta_u.is_finite() {
                        return Err(self.invalid("flow_jump delta_u must be finite"));
                    }
                    vec![*frame]
                }
                Event::Occlusion { frame, fraction } => {
                    if !(*fraction > 0.0 && *fraction < 1.0) {
                        return Err(self.invalid("occlusion fraction must lie in (0, 1)"));
                    }
                    vec![*frame]
                }
                Event::Dropout { frames } => frames.clone(),
                Event::Jitter { std, from_frame } => {
                    if !std.is_finite() || *std < 0.0 {
                        return Err(self.invalid("jitter std must be finite and >= 0"));
                    }
                    vec![*from_frame]
                }
            };
            if let Some(&frame) = frames.iter().find(|&&f| f >= self.n_frames) {
                return Err(SpecError::EventFrame {
                    name: self.name.clone(),
                    frame,
                    n_frames: self.n_frames,
                });
            }
        }
        for frame in 0..self.n_frames {
            let b = self.pedestrian_box(frame);
            let inside = b.x_ul() >= 1.0
                && b.y_ul() >= 1.0
                && b.x_end() <= self.image_w as f64 - 1.0
                && b.y_end() <= self.image_h as f64 - 1.0;
            if !inside {
                return Err(SpecError::BoxExitsImage {
                    name: self.name.clone(),
                    frame,
                });
            }
        }
        Ok(())
    }

    /// Full pedestrian extent at `frame`, occlusions ignored.
    pub fn pedestrian_box(&self, frame: usize) -> BBox {
        let s = &self.ped_start;
        let f = frame as f64;
        let scale = self.growth_rate.powi(frame as i32);
        let cx = s.x_ul() + s.width() / 2.0 + self.ped_velocity[0] * f;
        let cy = s.y_ul() + s.height() / 2.0 + self.ped_velocity[1] * f;
        let w = s.width() * scale;
        let h = s.height() * scale;
        BBox::new(cx - w / 2.0, cy - h / 2.0, w, h).expect("validated spec yields valid boxes")
    }

    /// Occluded fraction in effect at `frame`, if any.
    pub fn occlusion_at(&self, frame: usize) -> Option<f64> {
        self.events
            .iter()
            .filter_map(|e| match e {
                Event::Occlusion { frame: f, fraction } if *f <= frame => Some((*f, *fraction)),
                _ => None,
            })
            .max_by_key(|(f, _)| *f)
            .map(|(_, phi)| phi)
    }

    /// Visible part of the pedestrian, as a ground-truth labeler would box it.
    pub fn gt_box(&self, frame: usize) -> BBox {
        let full = self.pedestrian_box(frame);
        match self.occlusion_at(frame) {
            Some(phi) => BBox::new(
                full.x_ul(),
                full.y_ul(),
                full.width() * (1.0 - phi),
                full.height(),
            )
            .expect("occlusion fraction below 1"),
            None => full,
        }
    }

    /// Occluder region at `frame`: the right part of the pedestrian box.
    pub fn occluder_box(&self, frame: usize) -> Option<BBox> {
        let phi = self.occlusion_at(frame)?;
        let full = self.pedestrian_box(frame);
        let visible = full.width() * (1.0 - phi);
        BBox::new(
            full.x_ul() + visible,
            full.y_ul(),
            full.width() - visible,
            full.height(),
        )
        .ok()
    }

    /// Pedestrian flow at `frame`, including active flow jumps.
    pub fn pedestrian_u(&self, frame: usize) -> f64 {
        let jumps: f64 = self
            .events
            .iter()
            .filter_map(|e| match e {
                Event::FlowJump { frame: f, delta_u } if *f <= frame => Some(*delta_u),
                _ => None,
            })
            .sum();
        self.ped_u0 + self.ped_u_slope * frame as f64 + jumps
    }

    pub fn is_dropped(&self, frame: usize) -> bool {
        self.events
            .iter()
            .any(|e| matches!(e, Event::Dropout { frames } if frames.contains(&frame)))
    }

    fn jitter_std(&self, frame: usize) -> Option<f64> {
        self.events.iter().rev().find_map(|e| match e {
            Event::Jitter { std, from_frame } if *from_frame <= frame && *std > 0.0 => Some(*std),
            _ => None,
        })
    }

    pub fn flow_ref(&self, frame: usize) -> String {
        format!("{}_{:04}.flo", self.name, frame)
    }

    pub fn ttc(&self, frame: usize) -> Option<f64> {
        self.ttc_start
            .map(|t| (t - frame as f64 * self.dt).max(0.0))
    }
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Box-Muller pair of independent standard normals.
fn gaussian_pair(rng: &mut ChaCha8Rng) -> (f64, f64) {
    let a: f64 = rng.gen();
    let b: f64 = rng.gen();
    let r = (-2.0 * (1.0 - a).ln()).sqrt();
    let theta = std::f64::consts::TAU * b;
    (r * theta.cos(), r * theta.sin())
}

fn fill_span(grid: &mut [f64], map_w: usize, map_h: usize, b: &BBox, value: f64) {
    if let Some((xs, ys)) = box_pixel_span(b, map_w, map_h) {
        for y in ys {
            grid[y * map_w + xs.start..y * map_w + xs.end].fill(value);
        }
    }
}

pub fn render_frame(spec: &ScenarioSpec, frame: usize) -> FlowMap {
    let (w, h) = (spec.image_w, spec.image_h);
    let mut u = vec![spec.background_u; w * h];
    fill_span(
        &mut u,
        w,
        h,
        &spec.pedestrian_box(frame),
        spec.pedestrian_u(frame),
    );
    if let Some(occ) = spec.occluder_box(frame) {
        fill_span(&mut u, w, h, &occ, spec.background_u);
    }
    let mut v = vec![0.0f64; w * h];
    if spec.noise_std > 0.0 {
        let mut rng = rng_for(spec.seed, frame as u64);
        for (pu, pv) in u.iter_mut().zip(v.iter_mut()) {
            let (a, b) = gaussian_pair(&mut rng);
            *pu += spec.noise_std * a;
            *pv += spec.noise_std * b;
        }
    }
    FlowMap::new(
        w,
        h,
        u.into_iter().map(|x| x as f32).collect(),
        v.into_iter().map(|x| x as f32).collect(),
    )
    .expect("finite synthetic flow")
}

fn predicted_box(spec: &ScenarioSpec, frame: usize, gt: &BBox) -> Option<BBox> {
    if spec.is_dropped(frame) {
        return None;
    }
    let Some(std) = spec.jitter_std(frame) else {
        return Some(*gt);
    };
    let mut rng = rng_for(spec.seed, JITTER_STREAM | frame as u64);
    let (ax, ay) = gaussian_pair(&mut rng);
    let (bx, by) = gaussian_pair(&mut rng);
    let x0 = gt.x_ul() + std * ax;
    let y0 = gt.y_ul() + std * ay;
    let x1 = gt.x_end() + std * bx;
    let y1 = gt.y_end() + std * by;
    Some(BBox::new(x0, y0, x1 - x0, y1 - y0).unwrap_or(*gt))
}

/// Renders every frame of the scenario. Pure in `spec`, seed included.
pub fn generate(spec: &ScenarioSpec) -> Result<Scene, SpecError> {
    spec.validate()?;
    let flows = (0..spec.n_frames).map(|f| render_frame(spec, f)).collect();
    let frames = (0..spec.n_frames)
        .map(|f| {
            let gt = spec.gt_box(f);
            TrackFrame {
                frame_index: f as u64,
                timestamp: f as f64 * spec.dt,
                gt_box: Some(gt),
                pred_box: predicted_box(spec, f, &gt),
                pred_score: None,
                ttc: spec.ttc(f),
                flow_ref: spec.flow_ref(f),
            }
        })
        .collect();
    Ok(Scene {
        flows,
        track: Track {
            track_id: spec.name.clone(),
            frames,
        },
    })
}

impl Scene {
    pub fn flow_store(&self) -> crate::flow::MemoryFlowStore {
        let mut store = crate::flow::MemoryFlowStore::new();
        for (frame, map) in self.track.frames.iter().zip(&self.flows) {
            store.insert(frame.flow_ref.clone(), map.clone());
        }
        store
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::write_flo;
    use crate::track::diagonal;

    pub(crate) fn base_spec() -> ScenarioSpec {
        ScenarioSpec {
            name: "base".into(),
            image_w: 64,
            image_h: 48,
            n_frames: 10,
            dt: 0.1,
            background_u: -1.0,
            ped_start: BBox::new(10.0, 8.0, 8.0, 16.0).unwrap(),
            ped_velocity: [0.0, 0.0],
            growth_rate: 1.0,
            ped_u0: 2.0,
            ped_u_slope: 0.0,
            events: vec![],
            noise_std: 0.0,
            seed: 7,
            ttc_start: Some(3.0),
            replicas: 1,
        }
    }

    #[test]
    fn constant_scene_repeats() {
        let scene = generate(&base_spec()).unwrap();
        assert!(scene.flows.windows(2).all(|p| p[0] == p[1]));
        let first = scene.track.frames[0].gt_box;
        assert!(scene.track.frames.iter().all(|f| f.gt_box == first));
        assert_eq!(scene.flows[0].u_at(12, 10), 2.0);
        assert_eq!(scene.flows[0].u_at(0, 0), -1.0);
    }

    #[test]
    fn growth_scales_diagonal() {
        let spec = ScenarioSpec {
            growth_rate: 1.05,
            ..base_spec()
        };
        let d0 = diagonal(&spec.ped_start);
        for f in 0..spec.n_frames {
            let d = diagonal(&spec.gt_box(f));
            assert!((d - d0 * 1.05f64.powi(f as i32)).abs() < 1e-9);
        }
    }

    #[test]
    fn seeded_generation_is_deterministic() {
        let spec = ScenarioSpec {
            noise_std: 0.3,
            events: vec![Event::Jitter {
                std: 1.0,
                from_frame: 0,
            }],
            ..base_spec()
        };
        let a = generate(&spec).unwrap();
        let b = generate(&spec).unwrap();
        for (x, y) in a.flows.iter().zip(&b.flows) {
            assert_eq!(write_flo(x), write_flo(y));
        }
        assert_eq!(a.track, b.track);
        let other = generate(&ScenarioSpec { seed: 8, ..spec }).unwrap();
        assert_ne!(write_flo(&a.flows[0]), write_flo(&other.flows[0]));
    }

    #[test]
    fn occlusion_shrinks_ground_truth() {
        let spec = ScenarioSpec {
            events: vec![Event::Occlusion {
                frame: 5,
                fraction: 0.5,
            }],
            ..base_spec()
        };
        let scene = generate(&spec).unwrap();
        assert_eq!(scene.track.frames[4].gt_box.unwrap().width(), 8.0);
        assert_eq!(scene.track.frames[5].gt_box.unwrap().width(), 4.0);
        // right half of the pedestrian now moves with the background
        assert_eq!(scene.flows[5].u_at(15, 10), -1.0);
        assert_eq!(scene.flows[5].u_at(12, 10), 2.0);
    }

    #[test]
    fn dropout_and_spec_errors() {
        let spec = ScenarioSpec {
            events: vec![Event::Dropout { frames: vec![3] }],
            ..base_spec()
        };
        let scene = generate(&spec).unwrap();
        assert!(scene.track.frames[3].pred_box.is_none());
        assert!(scene.track.frames[2].pred_box.is_some());

        let escaping = ScenarioSpec {
            ped_velocity: [10.0, 0.0],
            ..base_spec()
        };
        assert!(matches!(
            generate(&escaping),
            Err(SpecError::BoxExitsImage { .. })
        ));
        let late = ScenarioSpec {
            events: vec![Event::FlowJump {
                frame: 10,
                delta_u: 1.0,
            }],
            ..base_spec()
        };
        assert!(matches!(generate(&late), Err(SpecError::EventFrame { .. })));
        let bad_phi = ScenarioSpec {
            events: vec![Event::Occlusion {
                frame: 2,
                fraction: 1.0,
            }],
            ..base_spec()
        };
        assert!(matches!(generate(&bad_phi), Err(SpecError::Invalid { .. })));
    }
}
