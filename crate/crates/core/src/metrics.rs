//! Classification metrics and the pretraining ablation summary.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::archive::sha256_hex;
use crate::error::{Error, Result};
use crate::gan::TrainTrace;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub name: String,
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// `confusion[truth][predicted]`.
    pub confusion: Vec<Vec<usize>>,
    pub total: usize,
    pub accuracy: f64,
    pub classes: Vec<ClassMetrics>,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// One-vs-rest counts per class, macro averages over all `k` classes.
pub fn evaluate(predicted: &[usize], truth: &[usize], k: usize) -> Result<EvalReport> {
    if predicted.len() != truth.len() {
        return Err(Error::LengthMismatch {
            left: predicted.len(),
            right: truth.len(),
        });
    }
    if let Some(bad) = predicted.iter().chain(truth).find(|&&c| c >= k) {
        return Err(Error::ShapeMismatch(format!("class id {bad} with {k} classes")));
    }
    let n = truth.len();
    let mut confusion = vec![vec![0usize; k]; k];
    for (&p, &t) in predicted.iter().zip(truth) {
        confusion[t][p] += 1;
    }
    let classes: Vec<ClassMetrics> = (0..k)
        .map(|c| {
            let tp = confusion[c][c];
            let support: usize = confusion[c].iter().sum();
            let predicted_c: usize = confusion.iter().map(|row| row[c]).sum();
            let fp = predicted_c - tp;
            let fn_ = support - tp;
            let precision = ratio(tp, predicted_c);
            let recall = ratio(tp, support);
            let f1 = if precision + recall == 0.0 {
                0.0
            } else {
                2.0 * precision * recall / (precision + recall)
            };
            ClassMetrics {
                name: c.to_string(),
                tp,
                fp,
                fn_,
                tn: n - tp - fp - fn_,
                precision,
                recall,
                f1,
                support,
            }
        })
        .collect();
    let mean = |f: fn(&ClassMetrics) -> f64| {
        if k == 0 {
            0.0
        } else {
            classes.iter().map(f).sum::<f64>() / k as f64
        }
    };
    Ok(EvalReport {
        total: n,
        accuracy: ratio((0..k).map(|c| confusion[c][c]).sum(), n),
        macro_precision: mean(|m| m.precision),
        macro_recall: mean(|m| m.recall),
        macro_f1: mean(|m| m.f1),
        confusion,
        classes,
    })
}

impl EvalReport {
    pub fn with_names(mut self, names: &[String]) -> Self {
        for (m, n) in self.classes.iter_mut().zip(names) {
            m.name = n.clone();
        }
        self
    }

    pub fn recall_of(&self, name: &str) -> Option<f64> {
        self.classes.iter().find(|m| m.name == name).map(|m| m.recall)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Archive(e.to_string()))
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("class,support,tp,fp,fn,tn,precision,recall,f1\n");
        for m in &self.classes {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                m.name, m.support, m.tp, m.fp, m.fn_, m.tn, m.precision, m.recall, m.f1
            ));
        }
        out.push_str(&format!(
            "macro,{},,,,,{},{},{}\naccuracy,{},,,,,,,{}\n",
            self.total, self.macro_precision, self.macro_recall, self.macro_f1, self.total, self.accuracy
        ));
        out
    }

    /// Rows are true classes, columns predicted classes.
    pub fn confusion_csv(&self) -> String {
        let names: Vec<&str> = self.classes.iter().map(|m| m.name.as_str()).collect();
        let mut out = format!("truth\\predicted,{}\n", names.join(","));
        for (name, row) in names.iter().zip(&self.confusion) {
            let cells: Vec<String> = row.iter().map(usize::to_string).collect();
            out.push_str(&format!("{name},{}\n", cells.join(",")));
        }
        out
    }

    pub fn content_hash(&self) -> Result<String> {
        let bytes = serde_json::to_vec(self).map_err(|e| Error::Archive(e.to_string()))?;
        Ok(sha256_hex(&bytes))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub class: String,
    pub steps_with: usize,
    pub steps_without: usize,
    pub stopped_with: bool,
    pub stopped_without: bool,
    /// `steps_without / steps_with`, present only when both runs met the
    /// stopping criterion.
    pub speedup: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricDeltas {
    pub accuracy_with: f64,
    pub accuracy_without: f64,
    pub macro_f1_with: f64,
    pub macro_f1_without: f64,
    pub accuracy_delta: f64,
    pub macro_f1_delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub rows: Vec<AblationRow>,
    pub metrics: Option<MetricDeltas>,
}

/// Pair fine-tune traces by class. `reports` holds the evaluation of the
/// pipeline with and without pretraining, in that order.
pub fn ablation_report(
    with: &BTreeMap<String, TrainTrace>,
    without: &BTreeMap<String, TrainTrace>,
    reports: Option<(&EvalReport, &EvalReport)>,
) -> Result<AblationReport> {
    if !with.keys().eq(without.keys()) {
        return Err(Error::KeyMismatch(format!(
            "with {:?}, without {:?}",
            with.keys().collect::<Vec<_>>(),
            without.keys().collect::<Vec<_>>()
        )));
    }
    let rows = with
        .iter()
        .zip(without.values())
        .map(|((class, a), b)| {
            let (sa, sb) = (a.stopped_on_criterion(), b.stopped_on_criterion());
            AblationRow {
                class: class.clone(),
                steps_with: a.steps_to_stop,
                steps_without: b.steps_to_stop,
                stopped_with: sa,
                stopped_without: sb,
                speedup: (sa && sb && a.steps_to_stop > 0)
                    .then(|| b.steps_to_stop as f64 / a.steps_to_stop as f64),
            }
        })
        .collect();
    let metrics = reports.map(|(w, wo)| MetricDeltas {
        accuracy_with: w.accuracy,
        accuracy_without: wo.accuracy,
        macro_f1_with: w.macro_f1,
        macro_f1_without: wo.macro_f1,
        accuracy_delta: w.accuracy - wo.accuracy,
        macro_f1_delta: w.macro_f1 - wo.macro_f1,
    });
    Ok(AblationReport { rows, metrics })
}

impl AblationReport {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Archive(e.to_string()))
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("class,steps_with,steps_without,stopped_with,stopped_without,speedup\n");
        for r in &self.rows {
            let speedup = r.speedup.map_or(String::new(), |s| s.to_string());
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.class, r.steps_with, r.steps_without, r.stopped_with, r.stopped_without, speedup
            ));
        }
        if let Some(m) = &self.metrics {
            out.push_str(&format!(
                "# accuracy_with={},accuracy_without={},macro_f1_with={},macro_f1_without={}\n",
                m.accuracy_with, m.accuracy_without, m.macro_f1_with, m.macro_f1_without
            ));
        }
        out
    }
}
