use std::collections::HashMap;
use std::fs::File;
use std::path::Path;

use super::{Dataset, Record, SchemaSpec};
use crate::error::{Error, Result};

/// Read a dataset from a headered CSV file.
///
/// Row numbers in errors are 1-based and do not count the header. Without an
/// id column, ids are the 0-based row indices.
pub fn load_csv(path: impl AsRef<Path>, spec: &SchemaSpec) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let schema = spec.resolve(Some(&header))?;

    let position: HashMap<&str, usize> = header
        .iter()
        .enumerate()
        .map(|(i, h)| (h.as_str(), i))
        .collect();
    let find = |name: &str| {
        position
            .get(name)
            .copied()
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let feature_cols = schema
        .feature_names
        .iter()
        .map(|f| find(f))
        .collect::<Result<Vec<_>>>()?;
    let label_cols = schema
        .attributes()
        .map(|a| Ok((a.to_string(), find(a)?)))
        .collect::<Result<Vec<_>>>()?;
    let id_col = schema.id_column.as_deref().map(find).transpose()?;

    let mut records = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row = row?;
        let row_no = i + 1;
        let mut features = Vec::with_capacity(feature_cols.len());
        for (&col, name) in feature_cols.iter().zip(&schema.feature_names) {
            let cell = row.get(col).unwrap_or("").trim();
            let value: f64 = cell.parse().map_err(|_| Error::NonNumericFeature {
                row: row_no,
                column: name.clone(),
                value: cell.to_string(),
            })?;
            if !value.is_finite() {
                return Err(Error::NonFiniteFeature {
                    row: row_no,
                    column: name.clone(),
                });
            }
            features.push(value);
        }
        let labels = label_cols
            .iter()
            .map(|(name, col)| (name.clone(), row.get(*col).unwrap_or("").to_string()))
            .collect();
        let id = match id_col {
            Some(col) => row.get(col).unwrap_or("").to_string(),
            None => i.to_string(),
        };
        records.push(Record {
            id,
            features,
            labels,
        });
    }
    if records.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Dataset::new(schema, records)
}

/// Write a dataset as CSV: id column (when the schema names one), features in
/// schema order, then one column per attribute.
///
/// Features use the shortest decimal form that parses back to the same double.
pub fn save_csv(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut writer = csv::Writer::from_writer(file);
    let schema = dataset.schema();

    let mut header: Vec<&str> = Vec::new();
    if let Some(id) = &schema.id_column {
        header.push(id);
    }
    header.extend(schema.feature_names.iter().map(String::as_str));
    let attributes: Vec<&str> = schema.attributes().collect();
    header.extend(&attributes);
    writer.write_record(&header)?;

    let mut row: Vec<String> = Vec::with_capacity(header.len());
    for r in dataset.records() {
        row.clear();
        if schema.id_column.is_some() {
            row.push(r.id.clone());
        }
        row.extend(r.features.iter().map(|v| format!("{v:?}")));
        row.extend(attributes.iter().map(|a| r.labels[*a].clone()));
        writer.write_record(&row)?;
    }
    writer
        .flush()
        .map_err(|e| Error::io(path, e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::tests::{record, schema2};
    use std::io::Write;

    fn spec() -> SchemaSpec {
        serde_json::from_str(
            r#"{"features": ["f0", "f1"], "attribute_of_interest": "emotion"}"#,
        )
        .unwrap()
    }

    fn write(dir: &tempfile::TempDir, name: &str, body: &str) -> std::path::PathBuf {
        let p = dir.path().join(name);
        std::fs::File::create(&p)
            .unwrap()
            .write_all(body.as_bytes())
            .unwrap();
        p
    }

    #[test]
    fn loads_three_rows() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            &dir,
            "a.csv",
            "f0,f1,emotion\n1.5,2,happy\n0,-1e-3,sad\n3,4,happy\n",
        );
        let ds = load_csv(&p, &spec()).unwrap();
        assert_eq!(ds.len(), 3);
        assert_eq!(ds.n_features(), 2);
        assert_eq!(ds.records()[1].features, vec![0.0, -1e-3]);
        assert_eq!(ds.records()[2].id, "2");
    }

    #[test]
    fn missing_column() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "a.csv", "f0,emotion\n1,happy\n");
        assert!(matches!(load_csv(&p, &spec()), Err(Error::MissingColumn(c)) if c == "f1"));
    }

    #[test]
    fn non_numeric_feature_reports_row_and_column() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "a.csv", "f0,f1,emotion\n1,2,a\n3,abc,b\n");
        match load_csv(&p, &spec()) {
            Err(Error::NonNumericFeature { row, column, .. }) => {
                assert_eq!(row, 2);
                assert_eq!(column, "f1");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn duplicate_ids_and_empty_files() {
        let dir = tempfile::tempdir().unwrap();
        let spec: SchemaSpec = serde_json::from_str(
            r#"{"features": ["f0"], "attribute_of_interest": "e", "id_column": "id"}"#,
        )
        .unwrap();
        let p = write(&dir, "dup.csv", "id,f0,e\nx,1,a\nx,2,b\n");
        assert!(matches!(load_csv(&p, &spec), Err(Error::DuplicateId(_))));
        let p = write(&dir, "empty.csv", "id,f0,e\n");
        assert!(matches!(load_csv(&p, &spec), Err(Error::EmptyDataset)));
    }

    #[test]
    fn round_trip_preserves_everything() {
        let dir = tempfile::tempdir().unwrap();
        let ds = Dataset::new(
            schema2(),
            vec![
                record("r1", &[0.1 + 0.2, -7.25e-300], "happy", "p1"),
                record("r2", &[1e300, 0.0], "sad", "p2"),
            ],
        )
        .unwrap();
        let p = dir.path().join("rt.csv");
        save_csv(&ds, &p).unwrap();
        let back = load_csv(&p, &ds.schema().clone().into()).unwrap();
        assert_eq!(back, ds);
        // 0.1 + 0.2 is not 0.3 in binary; the decimal form must keep that.
        assert_eq!(back.records()[0].features[0], 0.1 + 0.2);
        assert_ne!(back.records()[0].features[0], 0.3);
    }

    #[test]
    fn unwritable_path_is_io_error() {
        let ds = Dataset::new(schema2(), vec![record("r1", &[0.0, 1.0], "a", "p")]).unwrap();
        let err = save_csv(&ds, "/nonexistent-dir/sub/out.csv").unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }
}
