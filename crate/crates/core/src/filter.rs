//! Class census and routing of normal traffic and minority attack classes.

use serde::{Deserialize, Serialize};

use crate::data::Labeled;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassCount {
    pub class: usize,
    pub name: String,
    pub count: usize,
    /// `n_normal / n_class`; absent for the normal class and empty classes.
    pub ratio: Option<f64>,
}

impl ClassCount {
    /// Ratio rounded to three decimals for reports.
    pub fn display_ratio(&self) -> Option<String> {
        self.ratio.map(|r| format!("{r:.3}"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassCensus {
    pub classes: Vec<ClassCount>,
    pub normal_class: usize,
    pub normal_count: usize,
    pub total: usize,
}

impl ClassCensus {
    pub fn count(&self, class: usize) -> usize {
        self.classes[class].count
    }

    /// Attack classes with a defined ratio.
    pub fn attack_ratios(&self) -> impl Iterator<Item = &ClassCount> {
        self.classes.iter().filter(|c| c.ratio.is_some())
    }

    /// `class,samples,imbalance_ratio` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("class,samples,imbalance_ratio\n");
        for c in &self.classes {
            out.push_str(&format!(
                "{},{},{}\n",
                c.name,
                c.count,
                c.display_ratio().unwrap_or_default()
            ));
        }
        out
    }
}

pub fn class_census<D: Labeled>(data: &D) -> Result<ClassCensus> {
    let labels = data.labels();
    if labels.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let names = data.class_names();
    let mut counts = vec![0usize; names.len()];
    for &l in labels {
        counts[l] += 1;
    }
    let normal = data.normal_class();
    let n_normal = counts[normal];
    if n_normal == 0 {
        return Err(Error::MissingNormalClass);
    }
    let classes = names
        .iter()
        .enumerate()
        .map(|(c, name)| ClassCount {
            class: c,
            name: name.clone(),
            count: counts[c],
            ratio: (c != normal && counts[c] > 0).then(|| n_normal as f64 / counts[c] as f64),
        })
        .collect();
    Ok(ClassCensus {
        classes,
        normal_class: normal,
        normal_count: n_normal,
        total: labels.len(),
    })
}

/// Routed subsets of one dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterOutput<D> {
    pub normal: D,
    /// One subset per minority class, in class order.
    pub minority: Vec<(usize, D)>,
    /// Attack rows of classes below the threshold.
    pub passthrough: D,
    pub gamma: f64,
    pub census: ClassCensus,
}

impl<D> FilterOutput<D> {
    pub fn minority_classes(&self) -> Vec<usize> {
        self.minority.iter().map(|(c, _)| *c).collect()
    }
}

/// An attack class is a minority class when `n_normal / n_c ≥ gamma`.
pub fn filter_minority<D: Labeled>(data: &D, gamma: f64) -> Result<FilterOutput<D>> {
    if !(gamma > 0.0) {
        return Err(Error::InvalidFraction(format!("gamma must be positive, got {gamma}")));
    }
    let census = class_census(data)?;
    let selected: Vec<usize> = census
        .attack_ratios()
        .filter(|c| c.ratio.is_some_and(|r| r >= gamma))
        .map(|c| c.class)
        .collect();
    let labels = data.labels();
    let rows_of = |pred: &dyn Fn(usize) -> bool| -> Vec<usize> {
        (0..labels.len()).filter(|&i| pred(labels[i])).collect()
    };
    let normal = census.normal_class;
    Ok(FilterOutput {
        normal: data.select(&rows_of(&|l| l == normal)),
        minority: selected
            .iter()
            .map(|&c| (c, data.select(&rows_of(&|l| l == c))))
            .collect(),
        passthrough: data.select(&rows_of(&|l| l != normal && !selected.contains(&l))),
        gamma,
        census,
    })
}
