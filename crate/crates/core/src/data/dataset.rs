use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Real,
    Synthetic,
}

/// One unencoded feature column. Categorical cells are dictionary encoded in
/// first-seen order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum RawColumn {
    Numeric(Vec<f64>),
    Categorical { levels: Vec<String>, codes: Vec<u32> },
}

impl RawColumn {
    pub fn len(&self) -> usize {
        match self {
            RawColumn::Numeric(v) => v.len(),
            RawColumn::Categorical { codes, .. } => codes.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn value(&self, row: usize) -> RawValue {
        match self {
            RawColumn::Numeric(v) => RawValue::Number(v[row]),
            RawColumn::Categorical { levels, codes } => {
                RawValue::Level(levels[codes[row] as usize].clone())
            }
        }
    }

    fn select(&self, rows: &[usize]) -> Self {
        match self {
            RawColumn::Numeric(v) => RawColumn::Numeric(rows.iter().map(|&r| v[r]).collect()),
            RawColumn::Categorical { levels, codes } => RawColumn::Categorical {
                levels: levels.clone(),
                codes: rows.iter().map(|&r| codes[r]).collect(),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum RawValue {
    Number(f64),
    Level(String),
}

impl std::fmt::Display for RawValue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RawValue::Number(v) => write!(f, "{v}"),
            RawValue::Level(s) => f.write_str(s),
        }
    }
}

/// Feature columns as read from disk, before scaling and one-hot expansion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawDataset {
    pub names: Vec<String>,
    pub columns: Vec<RawColumn>,
    pub labels: Vec<usize>,
    pub class_names: Vec<String>,
    pub normal_class: usize,
    pub provenance: Vec<Provenance>,
}

impl RawDataset {
    pub fn rows(&self) -> usize {
        self.labels.len()
    }

    /// Number of feature columns before encoding.
    pub fn raw_width(&self) -> usize {
        self.columns.len()
    }

    pub fn row(&self, i: usize) -> Vec<RawValue> {
        self.columns.iter().map(|c| c.value(i)).collect()
    }

    /// Row-wise concatenation; categorical level tables are merged.
    pub fn concat(&self, other: &RawDataset) -> Result<RawDataset> {
        if self.names != other.names || self.class_names != other.class_names {
            return Err(Error::ShapeMismatch("datasets have different layouts".into()));
        }
        let mut columns = Vec::with_capacity(self.columns.len());
        for (a, b) in self.columns.iter().zip(&other.columns) {
            columns.push(match (a, b) {
                (RawColumn::Numeric(x), RawColumn::Numeric(y)) => {
                    RawColumn::Numeric(x.iter().chain(y).copied().collect())
                }
                (
                    RawColumn::Categorical { levels, codes },
                    RawColumn::Categorical {
                        levels: l2,
                        codes: c2,
                    },
                ) => {
                    let mut levels = levels.clone();
                    let mut codes = codes.clone();
                    for &c in c2 {
                        let name = &l2[c as usize];
                        let code = match levels.iter().position(|l| l == name) {
                            Some(p) => p,
                            None => {
                                levels.push(name.clone());
                                levels.len() - 1
                            }
                        };
                        codes.push(code as u32);
                    }
                    RawColumn::Categorical { levels, codes }
                }
                _ => return Err(Error::ShapeMismatch("column kinds differ".into())),
            });
        }
        Ok(RawDataset {
            names: self.names.clone(),
            columns,
            labels: self.labels.iter().chain(&other.labels).copied().collect(),
            class_names: self.class_names.clone(),
            normal_class: self.normal_class,
            provenance: self.provenance.iter().chain(&other.provenance).copied().collect(),
        })
    }
}

/// Encoded feature matrix (row-major) with class labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub features: Vec<f64>,
    pub width: usize,
    pub labels: Vec<usize>,
    pub feature_names: Vec<String>,
    pub class_names: Vec<String>,
    pub normal_class: usize,
    pub provenance: Vec<Provenance>,
}

impl Dataset {
    pub fn new(
        features: Vec<f64>,
        width: usize,
        labels: Vec<usize>,
        feature_names: Vec<String>,
        class_names: Vec<String>,
        normal_class: usize,
    ) -> Result<Self> {
        let n = labels.len();
        let ds = Dataset {
            features,
            width,
            provenance: vec![Provenance::Real; n],
            labels,
            feature_names,
            class_names,
            normal_class,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        if self.features.len() != self.labels.len() * self.width {
            return Err(Error::ShapeMismatch(format!(
                "{} values for {} rows of width {}",
                self.features.len(),
                self.labels.len(),
                self.width
            )));
        }
        if self.feature_names.len() != self.width || self.provenance.len() != self.labels.len() {
            return Err(Error::ShapeMismatch("names or provenance do not match".into()));
        }
        if self.normal_class >= self.class_names.len()
            || self.labels.iter().any(|&l| l >= self.class_names.len())
        {
            return Err(Error::ShapeMismatch("label outside the class table".into()));
        }
        if self.features.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue("dataset features".into()));
        }
        Ok(())
    }

    pub fn rows(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.width..(i + 1) * self.width]
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    /// Keep only the listed feature columns, in the given order.
    pub fn select_features(&self, cols: &[usize]) -> Result<Dataset> {
        if cols.iter().any(|&c| c >= self.width) {
            return Err(Error::ShapeMismatch("feature index out of range".into()));
        }
        let mut features = Vec::with_capacity(self.rows() * cols.len());
        for i in 0..self.rows() {
            let row = self.row(i);
            features.extend(cols.iter().map(|&c| row[c]));
        }
        Ok(Dataset {
            features,
            width: cols.len(),
            labels: self.labels.clone(),
            feature_names: cols.iter().map(|&c| self.feature_names[c].clone()).collect(),
            class_names: self.class_names.clone(),
            normal_class: self.normal_class,
            provenance: self.provenance.clone(),
        })
    }

    pub fn concat(&self, other: &Dataset) -> Result<Dataset> {
        if self.width != other.width
            || self.feature_names != other.feature_names
            || self.class_names != other.class_names
        {
            return Err(Error::ShapeMismatch("datasets have different layouts".into()));
        }
        let mut out = self.clone();
        out.features.extend_from_slice(&other.features);
        out.labels.extend_from_slice(&other.labels);
        out.provenance.extend_from_slice(&other.provenance);
        Ok(out)
    }

    pub fn class_counts(&self) -> Vec<usize> {
        count_labels(&self.labels, self.num_classes())
    }
}

pub(crate) fn count_labels(labels: &[usize], k: usize) -> Vec<usize> {
    let mut counts = vec![0; k];
    for &l in labels {
        counts[l] += 1;
    }
    counts
}

/// Row-labelled collections that can be subset by row index.
pub trait Labeled: Sized {
    fn labels(&self) -> &[usize];
    fn class_names(&self) -> &[String];
    fn normal_class(&self) -> usize;
    /// Rows at `rows`, in that order.
    fn select(&self, rows: &[usize]) -> Self;
}

impl Labeled for Dataset {
    fn labels(&self) -> &[usize] {
        &self.labels
    }

    fn class_names(&self) -> &[String] {
        &self.class_names
    }

    fn normal_class(&self) -> usize {
        self.normal_class
    }

    fn select(&self, rows: &[usize]) -> Self {
        let mut features = Vec::with_capacity(rows.len() * self.width);
        for &r in rows {
            features.extend_from_slice(self.row(r));
        }
        Dataset {
            features,
            width: self.width,
            labels: rows.iter().map(|&r| self.labels[r]).collect(),
            feature_names: self.feature_names.clone(),
            class_names: self.class_names.clone(),
            normal_class: self.normal_class,
            provenance: rows.iter().map(|&r| self.provenance[r]).collect(),
        }
    }
}

impl Labeled for RawDataset {
    fn labels(&self) -> &[usize] {
        &self.labels
    }

    fn class_names(&self) -> &[String] {
        &self.class_names
    }

    fn normal_class(&self) -> usize {
        self.normal_class
    }

    fn select(&self, rows: &[usize]) -> Self {
        RawDataset {
            names: self.names.clone(),
            columns: self.columns.iter().map(|c| c.select(rows)).collect(),
            labels: rows.iter().map(|&r| self.labels[r]).collect(),
            class_names: self.class_names.clone(),
            normal_class: self.normal_class,
            provenance: rows.iter().map(|&r| self.provenance[r]).collect(),
        }
    }
}
