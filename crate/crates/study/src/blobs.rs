//! Directory of immutable sample blobs with their JSON sidecars.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use bayesvis_core::samples::{JointSamples, SampleError, SampleSidecar};
use thiserror::Error;

use crate::template::valid_id;

#[derive(Debug, Error)]
pub enum BlobError {
    #[error("unknown blob `{0}`")]
    NotFound(String),
    #[error("invalid blob id `{0}`")]
    InvalidId(String),
    #[error("blob `{id}`: {source}")]
    Decode { id: String, source: SampleError },
    #[error("blob `{id}` sidecar: {source}")]
    Sidecar { id: String, source: serde_json::Error },
    #[error("blob `{id}` already exists with different contents")]
    Conflict { id: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Raw bytes and decoded samples of one blob.
#[derive(Debug)]
pub struct LoadedBlob {
    pub bytes: Vec<u8>,
    pub sidecar: SampleSidecar,
    pub samples: JointSamples,
}

/// Blob `id` lives in `{dir}/{id}.bin` with its sidecar in `{dir}/{id}.json`.
#[derive(Debug)]
pub struct BlobStore {
    dir: PathBuf,
    cache: RwLock<HashMap<String, Arc<LoadedBlob>>>,
}

impl BlobStore {
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, BlobError> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(Self {
            dir,
            cache: RwLock::new(HashMap::new()),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn paths(&self, id: &str) -> Result<(PathBuf, PathBuf), BlobError> {
        if !valid_id(id) {
            return Err(BlobError::InvalidId(id.to_owned()));
        }
        Ok((self.dir.join(format!("{id}.bin")), self.dir.join(format!("{id}.json"))))
    }

    pub fn contains(&self, id: &str) -> bool {
        self.paths(id).is_ok_and(|(bin, json)| bin.is_file() && json.is_file())
    }

    /// Loads (and caches) blob `id`, validating it against its sidecar.
    pub fn get(&self, id: &str) -> Result<Arc<LoadedBlob>, BlobError> {
        if let Some(b) = self.cache.read().expect("blob cache poisoned").get(id) {
            return Ok(b.clone());
        }
        let (bin, json) = self.paths(id)?;
        if !bin.is_file() || !json.is_file() {
            return Err(BlobError::NotFound(id.to_owned()));
        }
        let bytes = fs::read(bin)?;
        let sidecar: SampleSidecar = serde_json::from_slice(&fs::read(json)?).map_err(|source| BlobError::Sidecar {
            id: id.to_owned(),
            source,
        })?;
        let samples = JointSamples::load(&bytes, &sidecar).map_err(|source| BlobError::Decode {
            id: id.to_owned(),
            source,
        })?;
        let loaded = Arc::new(LoadedBlob { bytes, sidecar, samples });
        self.cache
            .write()
            .expect("blob cache poisoned")
            .insert(id.to_owned(), loaded.clone());
        Ok(loaded)
    }

    /// Writes a new blob. Rewriting identical contents is a no-op; blobs are
    /// never replaced.
    pub fn put(&self, id: &str, samples: &JointSamples) -> Result<(), BlobError> {
        let (bin, json) = self.paths(id)?;
        let bytes = samples.to_blob();
        let sidecar = serde_json::to_vec_pretty(&samples.sidecar()).map_err(|source| BlobError::Sidecar {
            id: id.to_owned(),
            source,
        })?;
        if bin.exists() {
            return if fs::read(&bin)? == bytes {
                Ok(())
            } else {
                Err(BlobError::Conflict { id: id.to_owned() })
            };
        }
        write_atomic(&json, &sidecar)?;
        write_atomic(&bin, &bytes)?;
        Ok(())
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(tmp, path)
}
