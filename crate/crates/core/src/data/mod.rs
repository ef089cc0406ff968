//! Dataset model, CSV I/O, splitting and synthetic data.

mod csv_io;
mod schema;
mod split;
mod synth;

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

pub use csv_io::{load_csv, save_csv};
pub use schema::{FeatureSpec, Schema, SchemaSpec};
pub use split::{split, Split};
pub use synth::{generate_synthetic, DimRange, SynthConfig};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub id: String,
    pub features: Vec<f64>,
    pub labels: BTreeMap<String, String>,
}

/// An immutable, validated collection of records sharing one schema.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    schema: Schema,
    records: Vec<Record>,
}

impl Dataset {
    pub fn new(schema: Schema, records: Vec<Record>) -> Result<Self> {
        schema.validate()?;
        let d = schema.n_features();
        let mut ids = HashSet::with_capacity(records.len());
        for (row, r) in records.iter().enumerate() {
            if r.features.len() != d {
                return Err(Error::RecordDimension {
                    id: r.id.clone(),
                    expected: d,
                    found: r.features.len(),
                });
            }
            if let Some(j) = r.features.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFiniteFeature {
                    row,
                    column: schema.feature_names[j].clone(),
                });
            }
            for attr in schema.attributes() {
                if !r.labels.contains_key(attr) {
                    return Err(Error::MissingLabel {
                        id: r.id.clone(),
                        attribute: attr.to_string(),
                    });
                }
            }
            if !ids.insert(r.id.as_str()) {
                return Err(Error::DuplicateId(r.id.clone()));
            }
        }
        Ok(Dataset { schema, records })
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.schema.n_features()
    }

    pub fn features(&self, index: usize) -> &[f64] {
        &self.records[index].features
    }

    /// Feature `j` across all records.
    pub fn column(&self, j: usize) -> Vec<f64> {
        self.records.iter().map(|r| r.features[j]).collect()
    }

    pub fn labels(&self, attribute: &str) -> Result<LabelColumn> {
        if !self.schema.has_attribute(attribute) {
            return Err(Error::UnknownAttribute(attribute.to_string()));
        }
        let values: Vec<&str> = self
            .records
            .iter()
            .map(|r| r.labels[attribute].as_str())
            .collect();
        Ok(LabelColumn::from_values(&values))
    }

    /// Attributes with fewer than two distinct classes.
    pub fn degenerate_attributes(&self) -> Vec<String> {
        self.schema
            .attributes()
            .filter(|a| {
                let distinct: HashSet<&str> =
                    self.records.iter().map(|r| r.labels[*a].as_str()).collect();
                distinct.len() < 2
            })
            .map(str::to_string)
            .collect()
    }

    pub fn is_degenerate(&self) -> bool {
        !self.degenerate_attributes().is_empty()
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.records.iter().position(|r| r.id == id)
    }

    pub fn id_index(&self) -> HashMap<&str, usize> {
        self.records
            .iter()
            .enumerate()
            .map(|(i, r)| (r.id.as_str(), i))
            .collect()
    }

    /// Records at `indices`, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            schema: self.schema.clone(),
            records: indices.iter().map(|&i| self.records[i].clone()).collect(),
        }
    }

    /// Same records and labels with every feature vector replaced.
    pub fn with_features(&self, features: Vec<Vec<f64>>) -> Result<Dataset> {
        if features.len() != self.records.len() {
            return Err(Error::LengthMismatch {
                left: self.records.len(),
                right: features.len(),
            });
        }
        let records = self
            .records
            .iter()
            .zip(features)
            .map(|(r, f)| Record {
                id: r.id.clone(),
                features: f,
                labels: r.labels.clone(),
            })
            .collect();
        Dataset::new(self.schema.clone(), records)
    }
}

/// Categorical labels encoded as indices into a sorted class list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelColumn {
    pub classes: Vec<String>,
    pub codes: Vec<usize>,
}

impl LabelColumn {
    pub fn from_values<S: AsRef<str>>(values: &[S]) -> Self {
        let classes: Vec<String> = values
            .iter()
            .map(|v| v.as_ref().to_string())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let lookup: HashMap<&str, usize> = classes
            .iter()
            .enumerate()
            .map(|(i, c)| (c.as_str(), i))
            .collect();
        let codes = values.iter().map(|v| lookup[v.as_ref()]).collect();
        LabelColumn { classes, codes }
    }

    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.classes.len()];
        for &c in &self.codes {
            counts[c] += 1;
        }
        counts
    }
}
