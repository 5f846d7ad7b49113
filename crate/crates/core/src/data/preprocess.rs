use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::dataset::{Dataset, Provenance, RawColumn, RawDataset, RawValue};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ColumnTransform {
    /// `(v − min) / (max − min)`, or 0 when the range is empty.
    MinMax { name: String, min: f64, max: f64 },
    /// One indicator per level in first-seen order; unseen levels encode as zeros.
    OneHot { name: String, levels: Vec<String> },
}

impl ColumnTransform {
    pub fn name(&self) -> &str {
        match self {
            ColumnTransform::MinMax { name, .. } | ColumnTransform::OneHot { name, .. } => name,
        }
    }

    pub fn width(&self) -> usize {
        match self {
            ColumnTransform::MinMax { .. } => 1,
            ColumnTransform::OneHot { levels, .. } => levels.len(),
        }
    }
}

/// Fitted encoder from raw columns to a `[0, 1]` feature matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreprocessPlan {
    pub transforms: Vec<ColumnTransform>,
    /// SHA-256 of the fitted transforms.
    pub fingerprint: String,
}

impl PreprocessPlan {
    pub fn fit(raw: &RawDataset) -> Result<Self> {
        if raw.rows() == 0 {
            return Err(Error::EmptyDataset);
        }
        let transforms: Vec<ColumnTransform> = raw
            .names
            .iter()
            .zip(&raw.columns)
            .map(|(name, col)| match col {
                RawColumn::Numeric(v) => ColumnTransform::MinMax {
                    name: name.clone(),
                    min: v.iter().copied().fold(f64::INFINITY, f64::min),
                    max: v.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                },
                RawColumn::Categorical { levels, codes } => {
                    let mut used = vec![false; levels.len()];
                    let mut order = Vec::new();
                    for &c in codes {
                        if !std::mem::replace(&mut used[c as usize], true) {
                            order.push(levels[c as usize].clone());
                        }
                    }
                    ColumnTransform::OneHot {
                        name: name.clone(),
                        levels: order,
                    }
                }
            })
            .collect();
        let fingerprint = fingerprint(&transforms);
        Ok(Self {
            transforms,
            fingerprint,
        })
    }

    pub fn encoded_width(&self) -> usize {
        self.transforms.iter().map(|t| t.width()).sum()
    }

    pub fn raw_width(&self) -> usize {
        self.transforms.len()
    }

    /// Encoded column names; one-hot columns are `name=level`.
    pub fn feature_names(&self) -> Vec<String> {
        let mut out = Vec::with_capacity(self.encoded_width());
        for t in &self.transforms {
            match t {
                ColumnTransform::MinMax { name, .. } => out.push(name.clone()),
                ColumnTransform::OneHot { name, levels } => {
                    out.extend(levels.iter().map(|l| format!("{name}={l}")))
                }
            }
        }
        out
    }

    fn check_layout(&self, raw: &RawDataset) -> Result<()> {
        if raw.names.len() != self.transforms.len() {
            return Err(Error::PlanMismatch(format!(
                "plan has {} columns, dataset has {}",
                self.transforms.len(),
                raw.names.len()
            )));
        }
        for ((t, name), col) in self.transforms.iter().zip(&raw.names).zip(&raw.columns) {
            let kinds_agree = matches!(
                (t, col),
                (ColumnTransform::MinMax { .. }, RawColumn::Numeric(_))
                    | (ColumnTransform::OneHot { .. }, RawColumn::Categorical { .. })
            );
            if t.name() != name || !kinds_agree {
                return Err(Error::PlanMismatch(format!("column {name:?}")));
            }
        }
        Ok(())
    }

    pub fn apply(&self, raw: &RawDataset) -> Result<Dataset> {
        self.check_layout(raw)?;
        let width = self.encoded_width();
        let n = raw.rows();
        let mut features = vec![0.0; n * width];
        let mut offset = 0;
        for (t, col) in self.transforms.iter().zip(&raw.columns) {
            match (t, col) {
                (ColumnTransform::MinMax { min, max, .. }, RawColumn::Numeric(v)) => {
                    for (i, &x) in v.iter().enumerate() {
                        features[i * width + offset] = scale(x, *min, *max);
                    }
                }
                (ColumnTransform::OneHot { levels: fitted, .. }, RawColumn::Categorical { levels, codes }) => {
                    let slot: Vec<Option<usize>> = levels
                        .iter()
                        .map(|l| fitted.iter().position(|f| f == l))
                        .collect();
                    for (i, &c) in codes.iter().enumerate() {
                        if let Some(s) = slot[c as usize] {
                            features[i * width + offset + s] = 1.0;
                        }
                    }
                }
                _ => unreachable!("layout checked"),
            }
            offset += t.width();
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue("preprocess".into()));
        }
        Ok(Dataset {
            features,
            width,
            labels: raw.labels.clone(),
            feature_names: self.feature_names(),
            class_names: raw.class_names.clone(),
            normal_class: raw.normal_class,
            provenance: raw.provenance.clone(),
        })
    }

    /// Raw values of one encoded row. Scaled values are clamped to `[0, 1]`
    /// and one-hot blocks decoded by argmax (first index on ties).
    pub fn inverse_row(&self, row: &[f64]) -> Result<Vec<RawValue>> {
        if row.len() != self.encoded_width() {
            return Err(Error::PlanMismatch(format!(
                "row width {} for encoded width {}",
                row.len(),
                self.encoded_width()
            )));
        }
        let mut offset = 0;
        let mut out = Vec::with_capacity(self.transforms.len());
        for t in &self.transforms {
            match t {
                ColumnTransform::MinMax { min, max, .. } => {
                    let v = row[offset].clamp(0.0, 1.0);
                    out.push(RawValue::Number(if max > min { (min + v * (max - min)).clamp(*min, *max) } else { *min }));
                }
                ColumnTransform::OneHot { levels, .. } => {
                    let block = &row[offset..offset + levels.len()];
                    let best = argmax(block);
                    out.push(RawValue::Level(levels[best].clone()));
                }
            }
            offset += t.width();
        }
        Ok(out)
    }

    /// Inverse-transform a row-major encoded matrix into a raw dataset.
    pub fn inverse(
        &self,
        rows: &[f64],
        labels: Vec<usize>,
        class_names: Vec<String>,
        normal_class: usize,
        provenance: Provenance,
    ) -> Result<RawDataset> {
        let w = self.encoded_width();
        if w == 0 || rows.len() != labels.len() * w {
            return Err(Error::PlanMismatch("encoded matrix does not match the plan".into()));
        }
        let decoded: Vec<Vec<RawValue>> = rows
            .chunks(w)
            .map(|r| self.inverse_row(r))
            .collect::<Result<_>>()?;
        let columns = self
            .transforms
            .iter()
            .enumerate()
            .map(|(j, t)| match t {
                ColumnTransform::MinMax { .. } => RawColumn::Numeric(
                    decoded
                        .iter()
                        .map(|r| match &r[j] {
                            RawValue::Number(x) => *x,
                            RawValue::Level(_) => unreachable!(),
                        })
                        .collect(),
                ),
                ColumnTransform::OneHot { levels, .. } => RawColumn::Categorical {
                    levels: levels.clone(),
                    codes: decoded
                        .iter()
                        .map(|r| match &r[j] {
                            RawValue::Level(l) => levels.iter().position(|x| x == l).unwrap_or(0) as u32,
                            RawValue::Number(_) => unreachable!(),
                        })
                        .collect(),
                },
            })
            .collect();
        Ok(RawDataset {
            names: self.transforms.iter().map(|t| t.name().to_string()).collect(),
            columns,
            provenance: vec![provenance; labels.len()],
            labels,
            class_names,
            normal_class,
        })
    }
}

fn scale(x: f64, min: f64, max: f64) -> f64 {
    if max > min {
        (x - min) / (max - min)
    } else {
        0.0
    }
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

fn fingerprint(transforms: &[ColumnTransform]) -> String {
    let mut h = Sha256::new();
    for t in transforms {
        h.update(t.name().as_bytes());
        h.update([0]);
        match t {
            ColumnTransform::MinMax { min, max, .. } => {
                h.update(b"minmax");
                h.update(min.to_bits().to_le_bytes());
                h.update(max.to_bits().to_le_bytes());
            }
            ColumnTransform::OneHot { levels, .. } => {
                h.update(b"onehot");
                for l in levels {
                    h.update(l.as_bytes());
                    h.update([0]);
                }
            }
        }
    }
    hex::encode(h.finalize())
}

/// Encode `raw` with `plan`, or with a plan fitted on `raw` when none is given.
pub fn preprocess(raw: &RawDataset, plan: Option<&PreprocessPlan>) -> Result<(Dataset, PreprocessPlan)> {
    let plan = match plan {
        Some(p) => p.clone(),
        None => PreprocessPlan::fit(raw)?,
    };
    Ok((plan.apply(raw)?, plan))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn raw(nums: Vec<f64>, protos: &[&str]) -> RawDataset {
        let mut levels: Vec<String> = Vec::new();
        let codes = protos
            .iter()
            .map(|p| match levels.iter().position(|l| l == p) {
                Some(i) => i as u32,
                None => {
                    levels.push(p.to_string());
                    levels.len() as u32 - 1
                }
            })
            .collect();
        let n = nums.len();
        RawDataset {
            names: vec!["x".into(), "proto".into()],
            columns: vec![RawColumn::Numeric(nums), RawColumn::Categorical { levels, codes }],
            labels: vec![0; n],
            class_names: vec!["normal".into()],
            normal_class: 0,
            provenance: vec![Provenance::Real; n],
        }
    }

    #[test]
    fn min_max_and_one_hot() {
        let r = raw(vec![2.0, 4.0, 6.0], &["tcp", "udp", "icmp"]);
        let (d, plan) = preprocess(&r, None).unwrap();
        assert_eq!(d.width, 4);
        assert_eq!(d.feature_names, vec!["x", "proto=tcp", "proto=udp", "proto=icmp"]);
        assert_eq!(d.row(0), &[0.0, 1.0, 0.0, 0.0]);
        assert_eq!(d.row(1), &[0.5, 0.0, 1.0, 0.0]);
        assert_eq!(d.row(2), &[1.0, 0.0, 0.0, 1.0]);
        let back = plan.inverse_row(d.row(1)).unwrap();
        assert_eq!(back, vec![RawValue::Number(4.0), RawValue::Level("udp".into())]);
    }

    #[test]
    fn constant_column_maps_to_zero() {
        let r = raw(vec![5.0, 5.0, 5.0], &["tcp", "tcp", "tcp"]);
        let (d, plan) = preprocess(&r, None).unwrap();
        assert_eq!(d.features.iter().step_by(2).copied().collect::<Vec<_>>(), vec![0.0; 3]);
        assert_eq!(plan.inverse_row(&[0.7, 1.0]).unwrap()[0], RawValue::Number(5.0));
    }

    #[test]
    fn unseen_levels_encode_as_zeros() {
        let (_, plan) = preprocess(&raw(vec![0.0, 1.0], &["tcp", "udp"]), None).unwrap();
        let test = raw(vec![0.5], &["icmp"]);
        let d = plan.apply(&test).unwrap();
        assert_eq!(d.row(0), &[0.5, 0.0, 0.0]);
    }

    #[test]
    fn plan_mismatch_is_detected() {
        let (_, plan) = preprocess(&raw(vec![0.0, 1.0], &["tcp", "udp"]), None).unwrap();
        let mut other = raw(vec![0.0], &["tcp"]);
        other.names[0] = "y".into();
        assert!(matches!(plan.apply(&other), Err(Error::PlanMismatch(_))));
        assert!(plan.inverse_row(&[0.0]).is_err());
    }

    #[test]
    fn inverse_clamps_and_argmaxes() {
        let (_, plan) = preprocess(&raw(vec![10.0, 20.0], &["a", "b"]), None).unwrap();
        let r = plan
            .inverse(&[1.7, 0.2, 0.3, -0.4, 0.9, 0.1], vec![0, 0], vec!["normal".into()], 0, Provenance::Synthetic)
            .unwrap();
        assert_eq!(r.row(0), vec![RawValue::Number(20.0), RawValue::Level("b".into())]);
        assert_eq!(r.row(1), vec![RawValue::Number(10.0), RawValue::Level("a".into())]);
        assert_eq!(r.provenance, vec![Provenance::Synthetic; 2]);
        let re = plan.apply(&r).unwrap();
        assert_eq!(re.features, vec![1.0, 0.0, 1.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn fingerprint_tracks_fitted_values() {
        let a = PreprocessPlan::fit(&raw(vec![0.0, 1.0], &["a", "b"])).unwrap();
        let b = PreprocessPlan::fit(&raw(vec![0.0, 2.0], &["a", "b"])).unwrap();
        assert_ne!(a.fingerprint, b.fingerprint);
        assert_eq!(a, PreprocessPlan::fit(&raw(vec![0.0, 1.0], &["a", "b"])).unwrap());
    }
}
