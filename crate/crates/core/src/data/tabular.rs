//! CSV ingestion, output and majority-class undersampling.

use std::collections::HashMap;
use std::path::Path;

use rand::seq::index;

use super::schema::{denormalize, normalize, ColumnKind, Schema};
use super::{Dataset, Provenance};
use crate::embedding::LabeledPoint;
use crate::error::{Error, Result};
use crate::rng;

/// Loads a CSV against the schema file next to it. Numerical ranges missing
/// from the schema are computed from this file.
pub fn load_tabular(csv_path: &Path, schema_path: &Path) -> Result<Dataset> {
    let schema = Schema::from_file(schema_path)?;
    load_tabular_with(csv_path, &schema)
}

enum Cell {
    Num(f64),
    Level(usize),
}

/// Loads a CSV against an in-memory schema. Pass the training set's schema
/// to load a test split with the training statistics.
pub fn load_tabular_with(csv_path: &Path, schema: &Schema) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(csv_path)
        .map_err(csv_error)?;
    let header = reader.headers().map_err(csv_error)?.clone();
    let mut position: HashMap<&str, usize> = HashMap::new();
    for (i, h) in header.iter().enumerate() {
        position.insert(h, i);
    }
    let mut source = Vec::with_capacity(schema.columns().len());
    for col in schema.columns() {
        let idx = position
            .get(col.name.as_str())
            .copied()
            .ok_or_else(|| Error::SchemaMismatch(format!("column '{}' missing from {}", col.name, csv_path.display())))?;
        source.push(idx);
    }
    if header.len() != schema.columns().len() {
        let extra: Vec<&str> = header.iter().filter(|h| !schema.names().contains(h)).collect();
        return Err(Error::SchemaMismatch(format!("columns not in schema: {}", extra.join(", "))));
    }

    let mut table: Vec<Vec<Cell>> = Vec::new();
    for (row_idx, record) in reader.records().enumerate() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map_or(row_idx as u64 + 2, |p| p.line());
        let row_no = row_idx + 1;
        let mut cells = Vec::with_capacity(source.len());
        for (col, &src) in schema.columns().iter().zip(&source) {
            let raw = record.get(src).ok_or_else(|| Error::Parse { line, message: "short record".into() })?;
            let cell = match &col.kind {
                ColumnKind::Numerical { .. } => {
                    let v: f64 = raw.parse().map_err(|_| Error::Parse {
                        line,
                        message: format!("column '{}': '{raw}' is not a number", col.name),
                    })?;
                    if !v.is_finite() {
                        return Err(Error::Parse { line, message: format!("column '{}': non-finite value", col.name) });
                    }
                    Cell::Num(v)
                }
                ColumnKind::Categorical { levels } | ColumnKind::Ordinal { levels } | ColumnKind::Label { levels } => {
                    let pos = levels.iter().position(|l| l == raw).ok_or_else(|| {
                        Error::SchemaMismatch(format!("row {row_no}: unknown level '{raw}' in column '{}'", col.name))
                    })?;
                    Cell::Level(pos)
                }
            };
            cells.push(cell);
        }
        table.push(cells);
    }

    let ranges = match schema.ranges() {
        Some(r) => r,
        None => {
            if table.is_empty() {
                return Err(Error::EmptyDataset);
            }
            let mut ranges = Vec::new();
            for (j, col) in schema.columns().iter().enumerate() {
                if let ColumnKind::Numerical { range } = col.kind {
                    ranges.push(range.unwrap_or_else(|| {
                        table.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), row| match row[j] {
                            Cell::Num(v) => (lo.min(v), hi.max(v)),
                            Cell::Level(_) => (lo, hi),
                        })
                    }));
                }
            }
            ranges
        }
    };
    let schema = schema.with_ranges(&ranges)?;
    let cat_width = schema.categorical_width();

    let rows = table
        .into_iter()
        .map(|cells| {
            let mut x_num = Vec::with_capacity(ranges.len());
            let mut x_cat = vec![0.0; cat_width];
            let mut offset = 0;
            let mut y = 0;
            for (cell, col) in cells.into_iter().zip(schema.columns()) {
                match (cell, &col.kind) {
                    (Cell::Num(v), _) => x_num.push(normalize(v, ranges[x_num.len()])),
                    (Cell::Level(l), ColumnKind::Label { .. }) => y = l,
                    (Cell::Level(l), kind) => {
                        x_cat[offset + l] = 1.0;
                        offset += kind.one_hot_levels().map_or(0, <[String]>::len);
                    }
                }
            }
            LabeledPoint::new(x_num, x_cat, y)
        })
        .collect();
    Dataset::new(schema, rows, Provenance::Real(csv_path.display().to_string()))
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Parse { line, message: format!("{other:?}") },
    }
}

/// Writes the dataset in original units with the schema's column order.
/// Each one-hot block is written as its most probable level.
pub fn write_csv(ds: &Dataset, path: &Path) -> Result<()> {
    let mut writer = csv::Writer::from_path(path).map_err(csv_error)?;
    let schema = ds.schema();
    writer.write_record(schema.names()).map_err(csv_error)?;
    let ranges = schema.ranges().expect("dataset schemas are resolved");
    let mut fields: Vec<String> = Vec::with_capacity(schema.columns().len());
    for row in ds.rows() {
        fields.clear();
        let (mut num, mut offset) = (0, 0);
        for col in schema.columns() {
            match &col.kind {
                ColumnKind::Numerical { .. } => {
                    fields.push(format!("{}", denormalize(row.x_num[num], ranges[num])));
                    num += 1;
                }
                ColumnKind::Label { levels } => fields.push(levels[row.y].clone()),
                ColumnKind::Categorical { levels } | ColumnKind::Ordinal { levels } => {
                    let block = &row.x_cat[offset..offset + levels.len()];
                    fields.push(levels[argmax(block)].clone());
                    offset += levels.len();
                }
            }
        }
        writer.write_record(&fields).map_err(csv_error)?;
    }
    writer.flush()?;
    Ok(())
}

/// Index of the first maximum.
pub(crate) fn argmax(values: &[f64]) -> usize {
    values.iter().enumerate().fold(0, |best, (i, &v)| if v > values[best] { i } else { best })
}

/// Keeps `ceil(rate * n_max)` randomly chosen rows of the largest class
/// (lowest index on ties) and every row of the other classes, preserving
/// row order.
pub fn undersample(ds: &Dataset, rate: f64, seed: u64) -> Result<Dataset> {
    if !(rate > 0.0 && rate <= 1.0) {
        return Err(Error::InvalidConfig(format!("undersample rate must lie in (0, 1], got {rate}")));
    }
    let counts = ds.class_counts();
    let majority = counts.iter().enumerate().fold(0, |best, (c, &n)| if n > counts[best] { c } else { best });
    let members: Vec<usize> = ds.rows().iter().enumerate().filter(|(_, r)| r.y == majority).map(|(i, _)| i).collect();
    let keep_count = ((rate * members.len() as f64).ceil() as usize).min(members.len());
    let mut rng = rng::seeded(seed, rng::stream::SUBSAMPLE);
    let mut keep = vec![true; ds.len()];
    for &i in &members {
        keep[i] = false;
    }
    for pick in index::sample(&mut rng, members.len(), keep_count) {
        keep[members[pick]] = true;
    }
    let rows = ds.rows().iter().zip(keep).filter(|(_, k)| *k).map(|(r, _)| r.clone()).collect();
    Dataset::new(ds.schema().clone(), rows, ds.provenance().clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
        let p = dir.join(name);
        std::fs::File::create(&p).unwrap().write_all(text.as_bytes()).unwrap();
        p
    }

    const SCHEMA: &str = "v: numerical\ncolor: categorical red|green|blue\nclass: label a|b\n";

    #[test]
    fn loads_and_encodes() {
        let dir = tempfile::tempdir().unwrap();
        let schema = write(dir.path(), "s.schema", SCHEMA);
        let csv = write(dir.path(), "d.csv", "v,color,class\n-5,red,a\n15,blue,b\n5,green,a\n");
        let ds = load_tabular(&csv, &schema).unwrap();
        assert_eq!(ds.len(), 3);
        assert_eq!(ds.schema().ranges().unwrap(), vec![(-5.0, 15.0)]);
        assert_eq!(ds.rows()[2].x_num, vec![0.5]);
        for r in ds.rows() {
            assert_eq!(r.x_cat.len(), 3);
            assert_eq!(r.x_cat.iter().sum::<f64>(), 1.0);
        }
        assert_eq!(ds.rows()[1].x_cat, vec![0.0, 0.0, 1.0]);
        assert_eq!(ds.class_counts(), vec![2, 1]);
    }

    #[test]
    fn header_order_is_free_but_output_follows_schema() {
        let dir = tempfile::tempdir().unwrap();
        let schema = write(dir.path(), "s.schema", SCHEMA);
        let csv = write(dir.path(), "d.csv", "class,v,color\na,1,red\nb,3,blue\n");
        let ds = load_tabular(&csv, &schema).unwrap();
        let out = dir.path().join("o.csv");
        write_csv(&ds, &out).unwrap();
        assert_eq!(std::fs::read_to_string(out).unwrap(), "v,color,class\n1,red,a\n3,blue,b\n");
    }

    #[test]
    fn unknown_level_names_row() {
        let dir = tempfile::tempdir().unwrap();
        let schema = write(dir.path(), "s.schema", SCHEMA);
        let mut text = String::from("v,color,class\n");
        for i in 1..=20 {
            let color = if i == 17 { "purple" } else { "red" };
            text.push_str(&format!("{i},{color},a\n"));
        }
        let csv = write(dir.path(), "d.csv", &text);
        match load_tabular(&csv, &schema) {
            Err(Error::SchemaMismatch(msg)) => assert!(msg.contains("row 17"), "{msg}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn parse_errors_carry_line() {
        let dir = tempfile::tempdir().unwrap();
        let schema = write(dir.path(), "s.schema", SCHEMA);
        let csv = write(dir.path(), "d.csv", "v,color,class\n1,red,a\nx,red,a\n");
        assert!(matches!(load_tabular(&csv, &schema), Err(Error::Parse { line: 3, .. })));
        let csv = write(dir.path(), "e.csv", "v,class\n1,a\n");
        assert!(matches!(load_tabular(&csv, &schema), Err(Error::SchemaMismatch(_))));
    }

    fn labeled(counts: &[usize]) -> Dataset {
        let schema = Schema::parse("v: numerical 0 1\nc: label a|b|c\n").unwrap();
        let rows = counts
            .iter()
            .enumerate()
            .flat_map(|(c, &n)| (0..n).map(move |i| LabeledPoint::new(vec![i as f64 / 1000.0], vec![], c)))
            .collect();
        Dataset::new(schema, rows, Provenance::Synthetic("test".into())).unwrap()
    }

    #[test]
    fn undersample_majority() {
        let ds = labeled(&[1000, 100, 0]);
        assert_eq!(undersample(&ds, 1.0, 3).unwrap(), ds);
        let u = undersample(&ds, 0.2, 3).unwrap();
        assert_eq!(u.class_counts(), vec![200, 100, 0]);
        assert_eq!(undersample(&ds, 0.2, 3).unwrap(), u);
        let tie = labeled(&[50, 50, 10]);
        assert_eq!(undersample(&tie, 0.5, 1).unwrap().class_counts(), vec![25, 50, 10]);
        assert!(undersample(&ds, 0.0, 1).is_err());
    }
}
