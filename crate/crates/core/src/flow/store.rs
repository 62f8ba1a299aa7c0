use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use thiserror::Error;

use super::{parse_flo_with_cap, FlowError, FlowMap, DEFAULT_MAX_PIXELS};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FlowLoadError {
    #[error("flow map {0:?} not found")]
    NotFound(String),
    #[error("flow map {flow_ref:?}: {message}")]
    Io { flow_ref: String, message: String },
    #[error("flow map {flow_ref:?}: {source}")]
    Parse {
        flow_ref: String,
        #[source]
        source: FlowError,
    },
}

/// Resolves a frame's `flow_ref` to its flow map.
pub trait FlowSource {
    fn load(&self, flow_ref: &str) -> Result<Arc<FlowMap>, FlowLoadError>;
}

/// Reads `.flo` files relative to a root directory.
#[derive(Debug, Clone)]
pub struct DirFlowStore {
    root: PathBuf,
    max_pixels: u64,
}

impl DirFlowStore {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self {
            root: root.into(),
            max_pixels: DEFAULT_MAX_PIXELS,
        }
    }

    pub fn with_max_pixels(mut self, max_pixels: u64) -> Self {
        self.max_pixels = max_pixels;
        self
    }

    pub fn root(&self) -> &Path {
        &self.root
    }
}

impl FlowSource for DirFlowStore {
    fn load(&self, flow_ref: &str) -> Result<Arc<FlowMap>, FlowLoadError> {
        let path = self.root.join(flow_ref);
        let bytes = std::fs::read(&path).map_err(|e| {
            if e.kind() == std::io::ErrorKind::NotFound {
                FlowLoadError::NotFound(flow_ref.to_string())
            } else {
                FlowLoadError::Io {
                    flow_ref: flow_ref.to_string(),
                    message: e.to_string(),
                }
            }
        })?;
        parse_flo_with_cap(&bytes, self.max_pixels)
            .map(Arc::new)
            .map_err(|source| FlowLoadError::Parse {
                flow_ref: flow_ref.to_string(),
                source,
            })
    }
}

#[derive(Debug, Clone, Default)]
pub struct MemoryFlowStore {
    maps: HashMap<String, Arc<FlowMap>>,
}

impl MemoryFlowStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, flow_ref: impl Into<String>, map: FlowMap) {
        self.maps.insert(flow_ref.into(), Arc::new(map));
    }

    pub fn len(&self) -> usize {
        self.maps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.maps.is_empty()
    }
}

impl FlowSource for MemoryFlowStore {
    fn load(&self, flow_ref: &str) -> Result<Arc<FlowMap>, FlowLoadError> {
        self.maps
            .get(flow_ref)
            .cloned()
            .ok_or_else(|| FlowLoadError::NotFound(flow_ref.to_string()))
    }
}
