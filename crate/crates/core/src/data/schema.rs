//! Column schemas and the plain-text schema file format.
//!
//! One column per line, in CSV header order:
//!
//! ```text
//! # comment
//! age: numerical
//! x1: numerical -4 4
//! workclass: categorical Private|Self-emp|?
//! grade: ordinal low|mid|high
//! income: label <=50K|>50K
//! ```
//!
//! Numerical ranges are optional; missing ones are computed from the first
//! CSV loaded against the schema.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum ColumnKind {
    Numerical { range: Option<(f64, f64)> },
    Categorical { levels: Vec<String> },
    /// Encoded exactly like a categorical column.
    Ordinal { levels: Vec<String> },
    Label { levels: Vec<String> },
}

impl ColumnKind {
    fn tag(&self) -> &'static str {
        match self {
            ColumnKind::Numerical { .. } => "numerical",
            ColumnKind::Categorical { .. } => "categorical",
            ColumnKind::Ordinal { .. } => "ordinal",
            ColumnKind::Label { .. } => "label",
        }
    }

    /// Levels of a one-hot encoded column.
    pub fn one_hot_levels(&self) -> Option<&[String]> {
        match self {
            ColumnKind::Categorical { levels } | ColumnKind::Ordinal { levels } => Some(levels),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub name: String,
    pub kind: ColumnKind,
}

/// Validated schema: unique names, exactly one label column, at least two
/// levels per categorical column.
#[derive(Debug, Clone, PartialEq)]
pub struct Schema {
    columns: Vec<Column>,
    label_index: usize,
}

impl Schema {
    pub fn new(columns: Vec<Column>) -> Result<Self> {
        let mut label_index = None;
        for (i, col) in columns.iter().enumerate() {
            if col.name.is_empty() {
                return Err(Error::InvalidSchema(format!("column {} has an empty name", i + 1)));
            }
            if columns[..i].iter().any(|c| c.name == col.name) {
                return Err(Error::InvalidSchema(format!("duplicate column '{}'", col.name)));
            }
            match &col.kind {
                ColumnKind::Numerical { range: Some((lo, hi)) } => {
                    if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                        return Err(Error::InvalidSchema(format!("column '{}' has invalid range [{lo}, {hi}]", col.name)));
                    }
                }
                ColumnKind::Numerical { range: None } => {}
                ColumnKind::Categorical { levels } | ColumnKind::Ordinal { levels } => {
                    if levels.len() < 2 {
                        return Err(Error::InvalidSchema(format!("column '{}' needs at least two levels", col.name)));
                    }
                    check_unique_levels(&col.name, levels)?;
                }
                ColumnKind::Label { levels } => {
                    if label_index.replace(i).is_some() {
                        return Err(Error::InvalidSchema("more than one label column".into()));
                    }
                    if levels.is_empty() {
                        return Err(Error::InvalidSchema(format!("label column '{}' has no levels", col.name)));
                    }
                    check_unique_levels(&col.name, levels)?;
                }
            }
        }
        let label_index = label_index.ok_or_else(|| Error::InvalidSchema("no label column".into()))?;
        Ok(Self { columns, label_index })
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut columns = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let parse_err = |message: String| Error::Parse { line: lineno as u64 + 1, message };
            let (name, rest) = line.split_once(':').ok_or_else(|| parse_err("expected 'name: kind'".into()))?;
            let rest = rest.trim();
            let (tag, args) = rest.split_once(char::is_whitespace).unwrap_or((rest, ""));
            let args = args.trim();
            let levels = || -> Vec<String> {
                if args.is_empty() {
                    Vec::new()
                } else {
                    args.split('|').map(|l| l.trim().to_string()).collect()
                }
            };
            let kind = match tag {
                "numerical" => {
                    let bounds: Vec<&str> = args.split_whitespace().collect();
                    let range = match bounds.as_slice() {
                        [] => None,
                        [lo, hi] => {
                            let lo: f64 = lo.parse().map_err(|_| parse_err(format!("bad minimum '{lo}'")))?;
                            let hi: f64 = hi.parse().map_err(|_| parse_err(format!("bad maximum '{hi}'")))?;
                            Some((lo, hi))
                        }
                        _ => return Err(parse_err("numerical range needs 'min max'".into())),
                    };
                    ColumnKind::Numerical { range }
                }
                "categorical" => ColumnKind::Categorical { levels: levels() },
                "ordinal" => ColumnKind::Ordinal { levels: levels() },
                "label" => ColumnKind::Label { levels: levels() },
                other => return Err(parse_err(format!("unknown column kind '{other}'"))),
            };
            columns.push(Column { name: name.trim().to_string(), kind });
        }
        Self::new(columns)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Text form accepted by [`Schema::parse`]; ranges are written with
    /// round-trip precision.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for col in &self.columns {
            let _ = write!(out, "{}: {}", col.name, col.kind.tag());
            match &col.kind {
                ColumnKind::Numerical { range: Some((lo, hi)) } => {
                    let _ = write!(out, " {lo:?} {hi:?}");
                }
                ColumnKind::Numerical { range: None } => {}
                ColumnKind::Categorical { levels } | ColumnKind::Ordinal { levels } | ColumnKind::Label { levels } => {
                    let _ = write!(out, " {}", levels.join("|"));
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn write_file(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn names(&self) -> Vec<&str> {
        self.columns.iter().map(|c| c.name.as_str()).collect()
    }

    pub fn label_column(&self) -> &Column {
        &self.columns[self.label_index]
    }

    pub fn label_levels(&self) -> &[String] {
        match &self.label_column().kind {
            ColumnKind::Label { levels } => levels,
            _ => unreachable!("label index always points at a label column"),
        }
    }

    pub fn num_classes(&self) -> usize {
        self.label_levels().len()
    }

    pub fn num_numerical(&self) -> usize {
        self.columns.iter().filter(|c| matches!(c.kind, ColumnKind::Numerical { .. })).count()
    }

    /// Widths of the one-hot blocks in column order.
    pub fn categorical_blocks(&self) -> Vec<usize> {
        self.columns.iter().filter_map(|c| c.kind.one_hot_levels().map(<[String]>::len)).collect()
    }

    pub fn categorical_width(&self) -> usize {
        self.categorical_blocks().iter().sum()
    }

    /// Numerical ranges in column order, or `None` if any is still unknown.
    pub fn ranges(&self) -> Option<Vec<(f64, f64)>> {
        self.columns
            .iter()
            .filter_map(|c| match c.kind {
                ColumnKind::Numerical { range } => Some(range),
                _ => None,
            })
            .collect()
    }

    /// Same names, kinds and levels; numerical ranges are not compared.
    pub fn is_compatible(&self, other: &Schema) -> bool {
        self.columns.len() == other.columns.len()
            && self.columns.iter().zip(&other.columns).all(|(a, b)| {
                a.name == b.name
                    && match (&a.kind, &b.kind) {
                        (ColumnKind::Numerical { .. }, ColumnKind::Numerical { .. }) => true,
                        (ka, kb) => ka == kb,
                    }
            })
    }

    /// Copy of the schema with numerical ranges filled in, in column order.
    pub(crate) fn with_ranges(&self, ranges: &[(f64, f64)]) -> Result<Self> {
        let mut it = ranges.iter();
        let mut columns = self.columns.clone();
        for col in &mut columns {
            if let ColumnKind::Numerical { range } = &mut col.kind {
                let r = it.next().ok_or_else(|| Error::ShapeMismatch("too few numerical ranges".into()))?;
                *range = Some(*r);
            }
        }
        if it.next().is_some() {
            return Err(Error::ShapeMismatch("too many numerical ranges".into()));
        }
        Self::new(columns)
    }
}

fn check_unique_levels(name: &str, levels: &[String]) -> Result<()> {
    for (i, l) in levels.iter().enumerate() {
        if l.is_empty() {
            return Err(Error::InvalidSchema(format!("column '{name}' has an empty level")));
        }
        if levels[..i].contains(l) {
            return Err(Error::InvalidSchema(format!("column '{name}' repeats level '{l}'")));
        }
    }
    Ok(())
}

/// Min-max scaling to `[0, 1]`; values outside the range are clipped and a
/// constant column maps to 0.
pub fn normalize(value: f64, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        ((value - lo) / (hi - lo)).clamp(0.0, 1.0)
    } else {
        0.0
    }
}

/// Inverse of [`normalize`] for values in `[0, 1]`; others are clipped first.
pub fn denormalize(value: f64, (lo, hi): (f64, f64)) -> f64 {
    lo + value.clamp(0.0, 1.0) * (hi - lo)
}

#[cfg(test)]
mod tests {
    use super::*;

    const TEXT: &str = "# demo\nage: numerical\nx: numerical -5 15\ncolor: categorical red|green|blue\nsize: ordinal s|m|l\nclass: label no|yes\n";

    #[test]
    fn parse_and_roundtrip() {
        let s = Schema::parse(TEXT).unwrap();
        assert_eq!(s.names(), ["age", "x", "color", "size", "class"]);
        assert_eq!(s.num_numerical(), 2);
        assert_eq!(s.categorical_blocks(), [3, 3]);
        assert_eq!(s.num_classes(), 2);
        assert!(s.ranges().is_none());
        assert_eq!(Schema::parse(&s.to_text()).unwrap(), s);
        let filled = s.with_ranges(&[(0.1, 0.30000000000000004), (-5.0, 15.0)]).unwrap();
        assert_eq!(Schema::parse(&filled.to_text()).unwrap(), filled);
        assert!(filled.is_compatible(&s));
    }

    #[test]
    fn rejects_invalid_schemas() {
        assert!(matches!(Schema::parse("a: numerical\n"), Err(Error::InvalidSchema(_))));
        assert!(matches!(Schema::parse("a: label x|y\nb: label x|y\n"), Err(Error::InvalidSchema(_))));
        assert!(matches!(Schema::parse("a: categorical x\nb: label x|y\n"), Err(Error::InvalidSchema(_))));
        assert!(matches!(Schema::parse("a: float\n"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(Schema::parse("# c\nb: label x|y\na: numerical 1\n"), Err(Error::Parse { line: 3, .. })));
    }

    #[test]
    fn min_max_scaling() {
        assert_eq!(normalize(5.0, (-5.0, 15.0)), 0.5);
        assert_eq!(normalize(20.0, (-5.0, 15.0)), 1.0);
        assert_eq!(normalize(3.0, (3.0, 3.0)), 0.0);
        for &v in &[-5.0, -1.25, 0.0, 3.3, 14.999] {
            assert!((denormalize(normalize(v, (-5.0, 15.0)), (-5.0, 15.0)) - v).abs() < 1e-9);
        }
    }
}
