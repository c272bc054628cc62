use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use super::{Dataset, DatasetId, DatasetMeta};
use crate::error::{Error, Result};

/// Extension of canonical dataset files.
pub const DATASET_EXTENSION: &str = "ds";

#[derive(Debug, Clone, Default)]
pub struct Registry {
    datasets: BTreeMap<DatasetId, Dataset>,
}

impl Registry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, dataset: Dataset) -> Result<()> {
        let id = dataset.meta.dataset_id.clone();
        if self.datasets.contains_key(&id) {
            return Err(Error::DuplicateDataset(id.to_string()));
        }
        self.datasets.insert(id, dataset);
        Ok(())
    }

    /// Registers every `*.ds` file in `dir`, in file-name order.
    pub fn load_dir(dir: &Path) -> Result<Self> {
        let mut paths: Vec<_> = fs::read_dir(dir)
            .map_err(|e| Error::io(dir, e))?
            .filter_map(|entry| entry.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|ext| ext == DATASET_EXTENSION))
            .collect();
        paths.sort();
        let mut registry = Registry::new();
        for path in paths {
            registry.register(Dataset::read_canonical(&path)?)?;
        }
        Ok(registry)
    }

    pub fn get(&self, id: &DatasetId) -> Result<&Dataset> {
        self.datasets
            .get(id)
            .ok_or_else(|| Error::UnknownDataset(id.to_string()))
    }

    pub fn contains(&self, id: &DatasetId) -> bool {
        self.datasets.contains_key(id)
    }

    pub fn len(&self) -> usize {
        self.datasets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.datasets.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Dataset> {
        self.datasets.values()
    }

    /// One metadata row per dataset, ordered by language then id.
    pub fn stats(&self) -> Result<Vec<DatasetMeta>> {
        if self.datasets.is_empty() {
            return Err(Error::EmptyRegistry);
        }
        let mut rows: Vec<DatasetMeta> = self.datasets.values().map(|d| d.meta.clone()).collect();
        rows.sort_by(|a, b| {
            a.language
                .cmp(&b.language)
                .then_with(|| a.dataset_id.cmp(&b.dataset_id))
        });
        Ok(rows)
    }
}
