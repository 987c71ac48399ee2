use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::filters::Lexicon;
use crate::ngram::NgramModel;

/// Where stage parameters that name files get their contents. Relative
/// paths resolve against `base_dir`. Preloaded entries shadow the filesystem,
/// which lets callers run plans without touching disk.
#[derive(Debug, Clone, Default)]
pub struct Resources {
    pub base_dir: Option<PathBuf>,
    /// Used by perplexity filters that do not name a model.
    pub default_lm: Option<Arc<NgramModel>>,
    models: BTreeMap<String, Arc<NgramModel>>,
    lexicons: BTreeMap<String, Arc<Lexicon>>,
}

impl Resources {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_base_dir(mut self, dir: impl Into<PathBuf>) -> Self {
        self.base_dir = Some(dir.into());
        self
    }

    pub fn with_default_lm(mut self, model: Arc<NgramModel>) -> Self {
        self.default_lm = Some(model);
        self
    }

    pub fn with_model(mut self, path: &str, model: Arc<NgramModel>) -> Self {
        self.models.insert(path.to_string(), model);
        self
    }

    pub fn with_lexicon(mut self, path: &str, lexicon: Lexicon) -> Self {
        self.lexicons.insert(path.to_string(), Arc::new(lexicon));
        self
    }

    pub fn resolve(&self, path: &str) -> PathBuf {
        match &self.base_dir {
            Some(base) if Path::new(path).is_relative() => base.join(path),
            _ => PathBuf::from(path),
        }
    }

    pub fn model(&self, path: &str) -> Result<Arc<NgramModel>, String> {
        if let Some(m) = self.models.get(path) {
            return Ok(m.clone());
        }
        let full = self.resolve(path);
        let bytes = std::fs::read(&full).map_err(|e| format!("cannot read model {}: {e}", full.display()))?;
        NgramModel::from_bytes(&bytes)
            .map(Arc::new)
            .map_err(|e| format!("cannot load model {}: {e}", full.display()))
    }

    pub fn lexicon(&self, path: &str) -> Result<Arc<Lexicon>, String> {
        if let Some(l) = self.lexicons.get(path) {
            return Ok(l.clone());
        }
        let full = self.resolve(path);
        let text = std::fs::read_to_string(&full).map_err(|e| format!("cannot read lexicon {}: {e}", full.display()))?;
        Ok(Arc::new(Lexicon::parse(&text)))
    }
}
