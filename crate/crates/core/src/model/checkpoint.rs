use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ModelParams;
use crate::error::{Error, Result};
use crate::taxonomy::Taxonomy;
use crate::training::Scheme;

/// A saved model: parameters plus the label space and scheme they were trained for.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub taxonomy_fingerprint: String,
    pub scheme: Scheme,
    pub params: ModelParams,
}

impl Checkpoint {
    pub fn new(taxonomy: &Taxonomy, scheme: Scheme, params: ModelParams) -> Self {
        Self {
            taxonomy_fingerprint: taxonomy.fingerprint(),
            scheme,
            params,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("checkpoint serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ck: Checkpoint = serde_json::from_str(text).map_err(|e| Error::MalformedDocument(e.to_string()))?;
        ck.params.validate()?;
        Ok(ck)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// Fails unless the checkpoint was trained for `taxonomy`.
    pub fn check_taxonomy(&self, taxonomy: &Taxonomy) -> Result<()> {
        if self.taxonomy_fingerprint != taxonomy.fingerprint() {
            return Err(Error::TaxonomyMismatch);
        }
        self.params.check_taxonomy(taxonomy)
    }
}
