//! JSON cache of the assembled and reduced model.
//!
//! The file holds the inputs the model was built from next to the model
//! itself; a cache whose inputs differ from the configuration is rebuilt.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::{read_json, write_json, ExperimentConfig, MaterialConfig, MeshConfig};
use crate::adhesive::AdhesiveEnergyConfig;
use crate::error::Result;
use crate::forward::ForwardModel;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelKey {
    pub mesh: MeshConfig,
    pub material: MaterialConfig,
    pub adhesive: AdhesiveEnergyConfig,
    pub qp_tol: f64,
}

impl ModelKey {
    pub fn of(cfg: &ExperimentConfig) -> Self {
        Self { mesh: cfg.mesh.clone(), material: cfg.material.clone(), adhesive: cfg.adhesive.clone(), qp_tol: cfg.tolerances.qp }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModelCache {
    pub key: ModelKey,
    pub model: ForwardModel,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CacheStatus {
    Hit,
    Written,
    Stale,
}

/// Loads the model from `path` when its key matches, otherwise builds it and
/// (re)writes the cache.
pub fn cached_model(cfg: &ExperimentConfig, path: &Path) -> Result<(ForwardModel, CacheStatus)> {
    let key = ModelKey::of(cfg);
    let mut status = CacheStatus::Written;
    if path.exists() {
        match read_json::<ModelCache>(path) {
            Ok(c) if c.key == key => return Ok((c.model, CacheStatus::Hit)),
            Ok(_) => status = CacheStatus::Stale,
            Err(e) => {
                log::warn!("ignoring unreadable mesh cache: {e}");
                status = CacheStatus::Stale;
            }
        }
    }
    let model = cfg.build_model()?;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|source| crate::error::Error::Io { path: dir.display().to_string(), source })?;
    }
    write_json(path, &ModelCache { key, model: model.clone() })?;
    Ok((model, status))
}
