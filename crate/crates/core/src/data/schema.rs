use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnKind {
    Numeric,
    Categorical,
    Label,
    /// Present in the file but not used as a feature.
    Ignore,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    pub kind: ColumnKind,
}

/// Layout of a CSV file and the mapping from raw labels to class ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSchema {
    #[serde(default)]
    pub has_header: bool,
    pub columns: Vec<ColumnSpec>,
    /// Class names; a class id is the position in this list.
    pub classes: Vec<String>,
    pub normal_class: String,
    /// Raw label to class name. Labels missing here must equal a class name.
    #[serde(default)]
    pub label_map: BTreeMap<String, String>,
    /// JSON object merged into `label_map`, relative to the schema file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label_map_file: Option<PathBuf>,
    /// Maximum rows kept per class name.
    #[serde(default)]
    pub class_caps: BTreeMap<String, usize>,
    #[serde(default)]
    pub cap_seed: u64,
    /// Replacement for NaN and infinite numeric cells; `None` rejects them.
    #[serde(default)]
    pub replace_non_finite: Option<f64>,
}

impl DatasetSchema {
    /// Read a schema document, resolving `label_map_file` against its directory.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut schema: DatasetSchema =
            serde_json::from_str(&text).map_err(|e| Error::Schema(format!("{}: {e}", path.display())))?;
        if let Some(file) = schema.label_map_file.take() {
            let file = path.parent().unwrap_or(Path::new(".")).join(file);
            let text = std::fs::read_to_string(&file).map_err(|e| Error::io(&file, e))?;
            let extra: BTreeMap<String, String> = serde_json::from_str(&text)
                .map_err(|e| Error::Schema(format!("{}: {e}", file.display())))?;
            for (k, v) in extra {
                schema.label_map.entry(k).or_insert(v);
            }
        }
        schema.validate()?;
        Ok(schema)
    }

    pub fn validate(&self) -> Result<()> {
        let labels = self
            .columns
            .iter()
            .filter(|c| c.kind == ColumnKind::Label)
            .count();
        if labels != 1 {
            return Err(Error::Schema(format!("expected one label column, found {labels}")));
        }
        if self.classes.is_empty() {
            return Err(Error::Schema("no classes declared".into()));
        }
        for (i, c) in self.classes.iter().enumerate() {
            if self.classes[..i].contains(c) {
                return Err(Error::Schema(format!("duplicate class {c:?}")));
            }
        }
        if self.class_id(&self.normal_class).is_none() {
            return Err(Error::Schema(format!(
                "normal class {:?} is not a declared class",
                self.normal_class
            )));
        }
        for (raw, class) in &self.label_map {
            if self.class_id(class).is_none() {
                return Err(Error::Schema(format!("label {raw:?} maps to unknown class {class:?}")));
            }
        }
        for class in self.class_caps.keys() {
            if self.class_id(class).is_none() {
                return Err(Error::Schema(format!("cap for unknown class {class:?}")));
            }
        }
        Ok(())
    }

    pub fn class_id(&self, name: &str) -> Option<usize> {
        self.classes.iter().position(|c| c == name)
    }

    pub fn normal_id(&self) -> usize {
        self.class_id(&self.normal_class).unwrap_or(0)
    }

    /// Class id of a raw label cell.
    pub fn resolve_label(&self, raw: &str) -> Option<usize> {
        let raw = raw.trim();
        match self.label_map.get(raw) {
            Some(class) => self.class_id(class),
            None => self.class_id(raw),
        }
    }

    pub fn label_column(&self) -> usize {
        self.columns
            .iter()
            .position(|c| c.kind == ColumnKind::Label)
            .unwrap_or(0)
    }

    pub fn feature_columns(&self) -> impl Iterator<Item = (usize, &ColumnSpec)> {
        self.columns
            .iter()
            .enumerate()
            .filter(|(_, c)| matches!(c.kind, ColumnKind::Numeric | ColumnKind::Categorical))
    }

    /// Number of feature columns before encoding.
    pub fn raw_width(&self) -> usize {
        self.feature_columns().count()
    }
}
