use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::dataset::{Provenance, RawColumn, RawDataset};
use super::schema::{ColumnKind, DatasetSchema};
use crate::error::{Error, Result};

struct Parsed {
    index: usize,
    label: usize,
    numbers: Vec<f64>,
    levels: Vec<String>,
}

/// Per-class row caps by reservoir sampling; survivors keep file order.
struct Reservoirs {
    caps: Vec<Option<usize>>,
    seen: Vec<usize>,
    kept: Vec<Vec<Parsed>>,
    rng: ChaCha8Rng,
}

impl Reservoirs {
    fn offer(&mut self, row: Parsed) {
        let c = row.label;
        let k = self.seen[c];
        self.seen[c] += 1;
        match self.caps[c] {
            Some(cap) if k >= cap => {
                let j = self.rng.random_range(0..=k);
                if j < cap {
                    self.kept[c][j] = row;
                }
            }
            _ => self.kept[c].push(row),
        }
    }

    fn into_rows(self) -> Vec<Parsed> {
        let mut rows: Vec<Parsed> = self.kept.into_iter().flatten().collect();
        rows.sort_by_key(|r| r.index);
        rows
    }
}

/// Read a CSV file laid out by `schema`.
pub fn load_dataset(path: &Path, schema: &DatasetSchema) -> Result<RawDataset> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    load_dataset_with(std::io::BufReader::new(file), schema).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        e => e,
    })
}

/// Read CSV text from any reader. Blank lines are skipped; with a header,
/// later copies of the header line (concatenated exports) are skipped too.
pub fn load_dataset_with<R: Read>(reader: R, schema: &DatasetSchema) -> Result<RawDataset> {
    schema.validate()?;
    let mut csv = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let k = schema.classes.len();
    let mut res = Reservoirs {
        caps: schema
            .classes
            .iter()
            .map(|c| schema.class_caps.get(c).copied())
            .collect(),
        seen: vec![0; k],
        kept: (0..k).map(|_| Vec::new()).collect(),
        rng: ChaCha8Rng::seed_from_u64(schema.cap_seed),
    };
    let label_col = schema.label_column();
    let mut header: Option<csv::StringRecord> = None;
    let mut record = csv::StringRecord::new();
    let mut index = 0;
    loop {
        let more = csv.read_record(&mut record).map_err(csv_error)?;
        if !more {
            break;
        }
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        if record.len() != schema.columns.len() {
            return Err(Error::RowArity {
                line,
                expected: schema.columns.len(),
                found: record.len(),
            });
        }
        if schema.has_header {
            match &header {
                None => {
                    header = Some(record.clone());
                    continue;
                }
                Some(h) if h == &record => continue,
                _ => {}
            }
        }
        let raw_label = &record[label_col];
        let label = schema.resolve_label(raw_label).ok_or_else(|| Error::UnknownLabel {
            line,
            value: raw_label.to_string(),
        })?;
        let mut parsed = Parsed {
            index,
            label,
            numbers: Vec::new(),
            levels: Vec::new(),
        };
        for (col, spec) in schema.feature_columns() {
            let cell = &record[col];
            match spec.kind {
                ColumnKind::Numeric => parsed.numbers.push(parse_number(cell, line, &spec.name, schema)?),
                _ => parsed.levels.push(cell.to_string()),
            }
        }
        res.offer(parsed);
        index += 1;
    }
    Ok(assemble(res.into_rows(), schema))
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io("<csv>", io),
        other => Error::ParseValue {
            line,
            column: "<record>".into(),
            value: format!("{other:?}"),
        },
    }
}

fn parse_number(cell: &str, line: usize, column: &str, schema: &DatasetSchema) -> Result<f64> {
    let v: f64 = cell.parse().map_err(|_| Error::ParseValue {
        line,
        column: column.to_string(),
        value: cell.to_string(),
    })?;
    if v.is_finite() {
        return Ok(v);
    }
    schema
        .replace_non_finite
        .ok_or_else(|| Error::NonFiniteValue(format!("line {line}, column {column}")))
}

fn assemble(rows: Vec<Parsed>, schema: &DatasetSchema) -> RawDataset {
    let mut names = Vec::new();
    let mut columns = Vec::new();
    let (mut ni, mut ci) = (0, 0);
    for (_, spec) in schema.feature_columns() {
        names.push(spec.name.clone());
        if spec.kind == ColumnKind::Numeric {
            columns.push(RawColumn::Numeric(rows.iter().map(|r| r.numbers[ni]).collect()));
            ni += 1;
        } else {
            let mut table: BTreeMap<&str, u32> = BTreeMap::new();
            let mut levels = Vec::new();
            let codes = rows
                .iter()
                .map(|r| {
                    let s = r.levels[ci].as_str();
                    *table.entry(s).or_insert_with(|| {
                        levels.push(s.to_string());
                        levels.len() as u32 - 1
                    })
                })
                .collect();
            columns.push(RawColumn::Categorical { levels, codes });
            ci += 1;
        }
    }
    RawDataset {
        names,
        columns,
        provenance: vec![Provenance::Real; rows.len()],
        labels: rows.iter().map(|r| r.label).collect(),
        class_names: schema.classes.clone(),
        normal_class: schema.normal_id(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::RawValue;

    fn schema(header: bool) -> DatasetSchema {
        let mut s: DatasetSchema = serde_json::from_str(
            r#"{
                "columns": [
                    {"name": "dur", "kind": "numeric"},
                    {"name": "proto", "kind": "categorical"},
                    {"name": "label", "kind": "label"},
                    {"name": "difficulty", "kind": "ignore"}
                ],
                "classes": ["normal", "dos", "u2r"],
                "normal_class": "normal",
                "label_map": {"smurf": "dos", "neptune": "dos", "rootkit": "u2r"}
            }"#,
        )
        .unwrap();
        s.has_header = header;
        s
    }

    #[test]
    fn loads_rows_in_file_order() {
        let text = "0,tcp,normal,21\n1.5,udp,smurf,18\n\n2,tcp,rootkit,7\n";
        let d = load_dataset_with(text.as_bytes(), &schema(false)).unwrap();
        assert_eq!(d.labels, vec![0, 1, 2]);
        assert_eq!(d.columns[0], RawColumn::Numeric(vec![0.0, 1.5, 2.0]));
        assert_eq!(d.row(1)[1], RawValue::Level("udp".into()));
        assert_eq!(d.raw_width(), 2);
    }

    #[test]
    fn skips_header_and_repeated_headers() {
        let text = "dur,proto,label,d\n0,tcp,normal,1\ndur,proto,label,d\n1,udp,normal,1\n";
        let d = load_dataset_with(text.as_bytes(), &schema(true)).unwrap();
        assert_eq!(d.rows(), 2);
    }

    #[test]
    fn reports_row_arity_and_labels() {
        let err = load_dataset_with("0,tcp,normal,1\n1,udp,normal\n".as_bytes(), &schema(false));
        assert!(matches!(err, Err(Error::RowArity { line: 2, expected: 4, found: 3 })));
        let err = load_dataset_with("0,tcp,satan,1\n".as_bytes(), &schema(false));
        assert!(matches!(err, Err(Error::UnknownLabel { line: 1, .. })));
        let err = load_dataset_with("x,tcp,normal,1\n".as_bytes(), &schema(false));
        assert!(matches!(err, Err(Error::ParseValue { line: 1, .. })));
    }

    #[test]
    fn non_finite_cells_follow_the_schema_policy() {
        let text = "Infinity,tcp,normal,1\nNaN,tcp,normal,1\n";
        assert!(matches!(
            load_dataset_with(text.as_bytes(), &schema(false)),
            Err(Error::NonFiniteValue(_))
        ));
        let mut s = schema(false);
        s.replace_non_finite = Some(0.0);
        let d = load_dataset_with(text.as_bytes(), &s).unwrap();
        assert_eq!(d.columns[0], RawColumn::Numeric(vec![0.0, 0.0]));
    }

    #[test]
    fn caps_are_seeded_and_keep_order() {
        let text: String = (0..100).map(|i| format!("{i},tcp,smurf,1\n{i},tcp,normal,1\n")).collect();
        let mut s = schema(false);
        s.class_caps.insert("dos".into(), 10);
        s.cap_seed = 7;
        let a = load_dataset_with(text.as_bytes(), &s).unwrap();
        let b = load_dataset_with(text.as_bytes(), &s).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.labels.iter().filter(|&&l| l == 1).count(), 10);
        assert_eq!(a.labels.iter().filter(|&&l| l == 0).count(), 100);
        let RawColumn::Numeric(v) = &a.columns[0] else { panic!() };
        let dos: Vec<f64> = v.iter().zip(&a.labels).filter(|(_, &l)| l == 1).map(|(x, _)| *x).collect();
        assert!(dos.windows(2).all(|w| w[0] < w[1]));
        s.cap_seed = 8;
        assert_ne!(load_dataset_with(text.as_bytes(), &s).unwrap(), a);
    }
}
