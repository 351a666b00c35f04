//! Datasets: the 2-D Gaussian-grid benchmark and schema-driven CSV tables.
//!
//! A [`Dataset`] stores records in model space: numerical columns min-max
//! scaled to `[0, 1]`, categorical and ordinal columns one-hot encoded, and
//! the label as a class index. The schema carries what is needed to map
//! back to the original units.

mod grid;
mod schema;
mod tabular;

pub use grid::{make_gaussian_grid, make_gaussian_grid_with, nll, GridMixture};
pub use schema::{denormalize, normalize, Column, ColumnKind, Schema};
pub use tabular::{load_tabular, load_tabular_with, undersample, write_csv};
pub(crate) use tabular::argmax;

use crate::embedding::LabeledPoint;
use crate::error::{Error, Result};

/// Where a dataset came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Provenance {
    Real(String),
    Synthetic(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    schema: Schema,
    rows: Vec<LabeledPoint>,
    provenance: Provenance,
}

impl Dataset {
    /// Checks that every row matches the schema widths and label range and
    /// that the schema has all numerical ranges resolved.
    pub fn new(schema: Schema, rows: Vec<LabeledPoint>, provenance: Provenance) -> Result<Self> {
        if schema.ranges().is_none() {
            return Err(Error::InvalidSchema("numerical ranges are unresolved".into()));
        }
        let num = schema.num_numerical();
        let cat = schema.categorical_width();
        let classes = schema.num_classes();
        for (i, row) in rows.iter().enumerate() {
            if row.x_num.len() != num || row.x_cat.len() != cat {
                return Err(Error::SchemaMismatch(format!(
                    "row {} has {}+{} features, schema expects {num}+{cat}",
                    i + 1,
                    row.x_num.len(),
                    row.x_cat.len()
                )));
            }
            if row.y >= classes {
                return Err(Error::LabelOutOfRange { label: row.y, num_classes: classes });
            }
        }
        Ok(Self { schema, rows, provenance })
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn rows(&self) -> &[LabeledPoint] {
        &self.rows
    }

    pub fn into_rows(self) -> Vec<LabeledPoint> {
        self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn num_classes(&self) -> usize {
        self.schema.num_classes()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes()];
        for r in &self.rows {
            counts[r.y] += 1;
        }
        counts
    }

    /// Rows with numerical columns mapped back to their original units.
    pub fn raw_points(&self) -> Vec<LabeledPoint> {
        let ranges = self.schema.ranges().expect("validated at construction");
        self.rows
            .iter()
            .map(|r| {
                let x_num = r.x_num.iter().zip(&ranges).map(|(&v, &rg)| denormalize(v, rg)).collect();
                LabeledPoint::new(x_num, r.x_cat.clone(), r.y)
            })
            .collect()
    }

    /// Numerical features only, in model space.
    pub fn numerical_matrix(&self) -> Vec<Vec<f64>> {
        self.rows.iter().map(|r| r.x_num.clone()).collect()
    }
}
