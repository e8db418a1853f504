//! The models a server can switch between.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use lop_core::projection::OrchestrationModel;
use lop_core::score_io::OrchestraLayout;
use serde::Serialize;

use crate::ServerError;

/// Loaded models keyed by id (the file stem). Read-only once built.
#[derive(Debug, Default, Clone)]
pub struct ModelRegistry {
    models: BTreeMap<String, Arc<OrchestrationModel>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ModelInfo {
    pub id: String,
    pub kind: String,
    pub orchestra_dim: usize,
    pub horizon: usize,
    pub quantization: u32,
    pub layout: OrchestraLayout,
}

impl ModelRegistry {
    /// Loads every `*.lopm` file in `dir`.
    pub fn load_dir(dir: impl AsRef<Path>) -> Result<Self, ServerError> {
        let dir = dir.as_ref();
        let read = std::fs::read_dir(dir).map_err(|e| ServerError::ModelsDir(format!("{}: {e}", dir.display())))?;
        let mut registry = Self::default();
        for entry in read {
            let path = entry.map_err(|e| ServerError::ModelsDir(e.to_string()))?.path();
            if path.extension().and_then(|e| e.to_str()) != Some("lopm") {
                continue;
            }
            let id = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string();
            let model = OrchestrationModel::load(&path)?;
            log::info!("loaded model `{id}` ({}, D={})", model.kind(), model.orchestra_dim());
            registry.insert(id, model);
        }
        Ok(registry)
    }

    pub fn insert(&mut self, id: impl Into<String>, model: OrchestrationModel) {
        self.models.insert(id.into(), Arc::new(model));
    }

    pub fn get(&self, id: &str) -> Option<Arc<OrchestrationModel>> {
        self.models.get(id).cloned()
    }

    /// The first id in sorted order, used when a session starts.
    pub fn default_id(&self) -> Option<&str> {
        self.models.keys().next().map(String::as_str)
    }

    pub fn ids(&self) -> Vec<String> {
        self.models.keys().cloned().collect()
    }

    pub fn len(&self) -> usize {
        self.models.len()
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }

    pub fn info(&self) -> Vec<ModelInfo> {
        self.models
            .iter()
            .map(|(id, m)| ModelInfo {
                id: id.clone(),
                kind: m.kind().to_string(),
                orchestra_dim: m.orchestra_dim(),
                horizon: m.horizon,
                quantization: m.quantization,
                layout: m.layout.clone(),
            })
            .collect()
    }
}
