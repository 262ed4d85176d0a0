//! CSV with header `f0,...,f{d-1}[,label]`.

use std::fs;
use std::path::Path;

use super::{Dataset, Provenance};
use crate::error::{Error, Result};
use crate::hash;
use crate::matrix::Matrix;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CsvSchema {
    /// Fail when the file has no `label` column.
    pub require_labels: bool,
    /// Declared number of classes; inferred as `max label + 1` (at least 2) when absent.
    pub class_count: Option<usize>,
}

impl CsvSchema {
    pub fn labeled(class_count: usize) -> Self {
        Self {
            require_labels: true,
            class_count: Some(class_count),
        }
    }
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    Error::Parse {
        line,
        message: format!("{}: {e}", path.display()),
    }
}

pub fn ingest_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<Dataset> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(bytes.as_slice());

    let header = reader.headers().map_err(|e| csv_err(path, e))?.clone();
    let names: Vec<&str> = header.iter().collect();
    let has_label = names.last() == Some(&"label");
    let dim = if has_label {
        names.len() - 1
    } else {
        names.len()
    };
    for (i, name) in names[..dim].iter().enumerate() {
        if *name != format!("f{i}") {
            return Err(Error::Schema(format!(
                "{}: column {i} is `{name}`, expected `f{i}`",
                path.display()
            )));
        }
    }
    if dim == 0 {
        return Err(Error::Schema(format!(
            "{}: no feature columns",
            path.display()
        )));
    }
    if schema.require_labels && !has_label {
        return Err(Error::Schema(format!(
            "{}: missing `label` column",
            path.display()
        )));
    }

    let mut data = Vec::new();
    let mut labels = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_err(path, e))?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let bad = |message: String| Error::Parse {
            line,
            message: format!("{}: {message}", path.display()),
        };
        if record.len() != names.len() {
            return Err(bad(format!(
                "expected {} fields, found {}",
                names.len(),
                record.len()
            )));
        }
        for field in record.iter().take(dim) {
            let v: f64 = field
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| bad(format!("`{field}` is not a finite number")))?;
            data.push(v);
        }
        if has_label {
            let field = &record[dim];
            let y: usize = field
                .parse()
                .map_err(|_| bad(format!("label `{field}` is not a non-negative integer")))?;
            if let Some(k) = schema.class_count {
                if y >= k {
                    return Err(bad(format!("label {y} out of range for {k} classes")));
                }
            }
            labels.push(y);
        }
    }
    let rows = data.len() / dim;
    if rows == 0 {
        return Err(Error::Schema(format!("{}: no data rows", path.display())));
    }
    let class_count = schema
        .class_count
        .unwrap_or_else(|| labels.iter().max().map_or(2, |m| (m + 1).max(2)));
    let prov = Provenance::new(path.file_name().map_or_else(
        || path.display().to_string(),
        |s| s.to_string_lossy().into_owned(),
    ))
    .with("path", path.display())
    .with("file_fingerprint", hash::hex(hash::fnv64(&bytes)));
    Dataset::new(
        Matrix::new(rows, dim, data)?,
        has_label.then_some(labels),
        class_count,
        prov,
    )
}

/// Writes values in shortest round-trip form, so ingesting reproduces them exactly.
pub fn write_csv(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = (0..ds.dim()).map(|i| format!("f{i}")).collect();
    if ds.labels().is_some() {
        header.push("label".into());
    }
    let to_err = |e: csv::Error| Error::io(path, std::io::Error::other(e));
    w.write_record(&header).map_err(to_err)?;
    for (r, row) in ds.inputs().iter_rows().enumerate() {
        let mut fields: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        if let Some(labels) = ds.labels() {
            fields.push(labels[r].to_string());
        }
        w.write_record(&fields).map_err(to_err)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::io(path, std::io::Error::other(e.to_string())))?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::two_moons;

    #[test]
    fn export_then_ingest_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let ds = two_moons(50, 0.1, 3).unwrap();
        let path = dir.path().join("m.csv");
        write_csv(&ds, &path).unwrap();
        let back = ingest_csv(&path, &CsvSchema::labeled(2)).unwrap();
        assert_eq!(back.inputs(), ds.inputs());
        assert_eq!(back.labels(), ds.labels());
        assert!(back.provenance().params.contains_key("file_fingerprint"));
    }

    #[test]
    fn six_row_fixture() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("six.csv");
        fs::write(
            &path,
            "f0,f1,label\n0.0,1.0,0\n1.5,-2,1\n3,4,2\n-1,-1,0\n2.25,0.5,1\n7,8,2\n",
        )
        .unwrap();
        let ds = ingest_csv(&path, &CsvSchema::labeled(3)).unwrap();
        assert_eq!(ds.len(), 6);
        assert_eq!(ds.dim(), 2);
        assert_eq!(ds.class_count(), 3);
        assert_eq!(ds.inputs().row(1), &[1.5, -2.0]);
        assert_eq!(ds.labels().unwrap(), &[0, 1, 2, 0, 1, 2]);
    }

    #[test]
    fn schema_and_row_errors() {
        let dir = tempfile::tempdir().unwrap();
        let nolabel = dir.path().join("a.csv");
        fs::write(&nolabel, "f0,f1\n1,2\n").unwrap();
        assert!(matches!(
            ingest_csv(&nolabel, &CsvSchema::labeled(2)),
            Err(Error::Schema(_))
        ));
        let unlabeled = ingest_csv(&nolabel, &CsvSchema::default()).unwrap();
        assert!(unlabeled.labels().is_none());

        let malformed = dir.path().join("b.csv");
        fs::write(&malformed, "f0,f1,label\n1,2,0\n1,x,1\n").unwrap();
        match ingest_csv(&malformed, &CsvSchema::labeled(2)) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }

        let range = dir.path().join("c.csv");
        fs::write(&range, "f0,label\n1,0\n2,5\n").unwrap();
        match ingest_csv(&range, &CsvSchema::labeled(2)) {
            Err(Error::Parse { line, message }) => {
                assert_eq!(line, 3);
                assert!(message.contains("out of range"));
            }
            other => panic!("unexpected {other:?}"),
        }

        let header = dir.path().join("d.csv");
        fs::write(&header, "x,y\n1,2\n").unwrap();
        assert!(matches!(
            ingest_csv(&header, &CsvSchema::default()),
            Err(Error::Schema(_))
        ));
    }
}
