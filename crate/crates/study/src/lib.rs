//! Study protocol and service: templates, per-participant task sequencing,
//! durable progress and responses, and the REST interface serving tasks and
//! sample blobs.

pub mod blobs;
pub mod config;
pub mod expand;
pub mod service;
pub mod store;
pub mod template;

use std::path::Path;
use std::sync::Arc;

pub use blobs::{BlobError, BlobStore};
pub use config::ServiceConfig;
pub use expand::expand_for_user;
pub use service::{router, serve, serve_listener, AppState};
pub use store::{ActionLogEntry, NextTask, ParticipantRecord, ResponseRecord, StudyError, StudyStore};
pub use template::{parse_template, StudyTemplate, TemplateError};

/// Parses a template file and checks that every model it references is present.
pub fn load_template(path: &Path, blobs: &BlobStore) -> Result<StudyTemplate, StudyError> {
    let text = std::fs::read_to_string(path).map_err(BlobError::Io)?;
    let template = parse_template(&text)?;
    for model in template.model_refs() {
        blobs.get(&model)?;
    }
    Ok(template)
}

/// Opens the database and blob directory of `config` and registers its templates.
pub fn open_state(config: &ServiceConfig) -> Result<AppState, StudyError> {
    let blobs = Arc::new(BlobStore::open(&config.blob_dir)?);
    let store = Arc::new(StudyStore::open(&config.database)?);
    for path in &config.templates {
        let template = load_template(path, &blobs)?;
        store.register_study(&template)?;
    }
    Ok(AppState { store, blobs })
}
