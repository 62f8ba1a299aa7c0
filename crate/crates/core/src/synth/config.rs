//! Scenario files and on-disk corpora.
//!
//! A scenario file is TOML with one `[[scenario]]` table per scene:
//!
//! ```toml
//! [[scenario]]
//! name = "approach"
//! image_w = 160
//! image_h = 120
//! n_frames = 20
//! dt = 0.1
//! background_u = -1.0
//! ped_start = [40.0, 30.0, 16.0, 32.0]
//! ped_velocity = [0.5, 0.0]
//! growth_rate = 1.03
//! ped_u0 = 3.0
//! noise_std = 0.05
//! seed = 1
//! replicas = 10
//! events = [{ kind = "occlusion", frame = 10, fraction = 0.5 }]
//! ```
//!
//! Replicated scenarios are named `<name>-000`, `<name>-001`, ... and use
//! seeds `seed`, `seed + 1`, ...

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{generate, ScenarioSpec, SpecError};
use crate::flow::write_flo;
use crate::track::write_tracks;

#[derive(Debug, Error)]
pub enum MaterializeError {
    #[error("cannot read scenario file {path}: {message}")]
    Read { path: String, message: String },
    #[error("scenario file: {0}")]
    Parse(String),
    #[error(transparent)]
    Spec(#[from] SpecError),
    #[error("duplicate scenario name {0:?}")]
    DuplicateName(String),
    #[error("output directory {0} is not empty (use --force to overwrite)")]
    Collision(String),
    #[error("writing {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    #[serde(default)]
    scenario: Vec<ScenarioSpec>,
}

/// Parses scenario TOML and expands replicas.
pub fn parse_scenarios(text: &str) -> Result<Vec<ScenarioSpec>, MaterializeError> {
    let file: ScenarioFile =
        toml::from_str(text).map_err(|e| MaterializeError::Parse(e.to_string()))?;
    let mut out = Vec::new();
    for spec in file.scenario {
        spec.validate()?;
        if spec.replicas == 1 {
            out.push(spec);
            continue;
        }
        for i in 0..spec.replicas {
            out.push(ScenarioSpec {
                name: format!("{}-{:03}", spec.name, i),
                seed: spec.seed.wrapping_add(i as u64),
                replicas: 1,
                ..spec.clone()
            });
        }
    }
    let mut names: Vec<&str> = out.iter().map(|s| s.name.as_str()).collect();
    names.sort_unstable();
    if let Some(dup) = names.windows(2).find(|w| w[0] == w[1]) {
        return Err(MaterializeError::DuplicateName(dup[0].to_string()));
    }
    Ok(out)
}

pub fn load_scenarios(path: impl AsRef<Path>) -> Result<Vec<ScenarioSpec>, MaterializeError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| MaterializeError::Read {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse_scenarios(&text)
}

/// Writes `flows/<name>_<frame>.flo`, `tracks.jsonl` and the expanded
/// `scenarios.toml` under `out_dir`.
pub fn materialize(
    specs: &[ScenarioSpec],
    out_dir: &Path,
    force: bool,
) -> Result<(), MaterializeError> {
    let io = |path: &Path| {
        let path = path.display().to_string();
        move |source| MaterializeError::Io { path, source }
    };
    if out_dir.exists() {
        let occupied = std::fs::read_dir(out_dir)
            .map_err(io(out_dir))?
            .next()
            .is_some();
        if occupied && !force {
            return Err(MaterializeError::Collision(out_dir.display().to_string()));
        }
    }
    let flow_dir = out_dir.join("flows");
    std::fs::create_dir_all(&flow_dir).map_err(io(&flow_dir))?;

    let mut tracks = Vec::with_capacity(specs.len());
    for spec in specs {
        let scene = generate(spec)?;
        for (frame, map) in scene.track.frames.iter().zip(&scene.flows) {
            let path = flow_dir.join(&frame.flow_ref);
            std::fs::write(&path, write_flo(map)).map_err(io(&path))?;
        }
        tracks.push(scene.track);
    }

    let tracks_path = out_dir.join("tracks.jsonl");
    let mut buf = Vec::new();
    write_tracks(&mut buf, &tracks).map_err(io(&tracks_path))?;
    std::fs::write(&tracks_path, buf).map_err(io(&tracks_path))?;

    let echo_path = out_dir.join("scenarios.toml");
    let echo = toml::to_string(&ScenarioFile {
        scenario: specs.to_vec(),
    })
    .map_err(|e| MaterializeError::Parse(e.to_string()))?;
    std::fs::write(&echo_path, echo).map_err(io(&echo_path))?;
    Ok(())
}
