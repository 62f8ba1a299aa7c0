//! Line-delimited JSON track records: one record per (track, frame).

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{BBox, Track, TrackError, TrackFrame};

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: missing field `{field}`")]
    MissingField { line: usize, field: &'static str },
    #[error(transparent)]
    Order(#[from] TrackError),
}

const REQUIRED: [&str; 4] = ["track_id", "frame_index", "timestamp_s", "flow_ref"];

#[derive(Debug, Serialize, Deserialize)]
struct Record {
    track_id: String,
    frame_index: u64,
    timestamp_s: f64,
    flow_ref: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gt_box: Option<BBox>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pred_box: Option<BBox>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pred_score: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    ttc_s: Option<f64>,
}

pub fn load_tracks(path: impl AsRef<Path>) -> Result<Vec<Track>, LoadError> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| LoadError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_tracks(BufReader::new(file)).map_err(|e| match e {
        LoadError::Io { source, .. } => LoadError::Io {
            path: path.display().to_string(),
            source,
        },
        other => other,
    })
}

/// Groups records by `track_id` (tracks come out sorted by id) and sorts
/// each track by `frame_index`.
pub fn parse_tracks(reader: impl BufRead) -> Result<Vec<Track>, LoadError> {
    let mut grouped: BTreeMap<String, Vec<TrackFrame>> = BTreeMap::new();
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|source| LoadError::Io {
            path: String::new(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value =
            serde_json::from_str(&line).map_err(|e| LoadError::Parse {
                line: lineno,
                message: e.to_string(),
            })?;
        let obj = value.as_object().ok_or(LoadError::Parse {
            line: lineno,
            message: "record is not a JSON object".into(),
        })?;
        if let Some(field) = REQUIRED.iter().find(|f| !obj.contains_key(**f)) {
            return Err(LoadError::MissingField {
                line: lineno,
                field,
            });
        }
        let rec: Record = serde_json::from_value(value).map_err(|e| LoadError::Parse {
            line: lineno,
            message: e.to_string(),
        })?;
        if !rec.timestamp_s.is_finite() {
            return Err(LoadError::Parse {
                line: lineno,
                message: "timestamp_s must be finite".into(),
            });
        }
        if let Some(ttc) = rec.ttc_s {
            if !ttc.is_finite() || ttc < 0.0 {
                return Err(LoadError::Parse {
                    line: lineno,
                    message: format!("ttc_s must be finite and >= 0 (got {ttc})"),
                });
            }
        }
        grouped.entry(rec.track_id).or_default().push(TrackFrame {
            frame_index: rec.frame_index,
            timestamp: rec.timestamp_s,
            gt_box: rec.gt_box,
            pred_box: rec.pred_box,
            pred_score: rec.pred_score,
            ttc: rec.ttc_s,
            flow_ref: rec.flow_ref,
        });
    }

    let mut tracks = Vec::with_capacity(grouped.len());
    for (track_id, mut frames) in grouped {
        frames.sort_by_key(|f| f.frame_index);
        let track = Track { track_id, frames };
        track.validate()?;
        tracks.push(track);
    }
    Ok(tracks)
}

pub fn write_tracks(mut out: impl Write, tracks: &[Track]) -> std::io::Result<()> {
    for track in tracks {
        for f in &track.frames {
            let rec = Record {
                track_id: track.track_id.clone(),
                frame_index: f.frame_index,
                timestamp_s: f.timestamp,
                flow_ref: f.flow_ref.clone(),
                gt_box: f.gt_box,
                pred_box: f.pred_box,
                pred_score: f.pred_score,
                ttc_s: f.ttc,
            };
            serde_json::to_writer(&mut out, &rec)?;
            out.write_all(b"\n")?;
        }
    }
    Ok(())
}

pub fn save_tracks(path: impl AsRef<Path>, tracks: &[Track]) -> std::io::Result<()> {
    let file = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    write_tracks(&mut w, tracks)?;
    w.flush()
}
