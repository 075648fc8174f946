use std::fs::File;
use std::io::Write;
use std::path::Path;

use super::{Dataset, Matrix};
use crate::error::{Error, Result};

/// Column selection for [`load_csv_with`].
#[derive(Debug, Clone, Default)]
pub struct CsvColumns {
    pub treatment: String,
    pub outcome: String,
    pub covariates: Vec<String>,
    /// Additional numeric columns returned alongside the dataset (e.g. known propensities).
    pub extra: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct CsvLoad {
    pub dataset: Dataset,
    /// Rows removed because one of the selected columns was missing.
    pub dropped_rows: usize,
    /// One vector per requested extra column, aligned with the dataset rows.
    pub extra: Vec<Vec<f64>>,
}

/// Reads a header-first CSV file. Tokens `NA` and empty are missing values; a row
/// with a missing value in any selected column is dropped and counted.
pub fn load_csv(
    path: impl AsRef<Path>,
    treatment: &str,
    outcome: &str,
    covariates: &[&str],
) -> Result<CsvLoad> {
    load_csv_with(
        path,
        &CsvColumns {
            treatment: treatment.into(),
            outcome: outcome.into(),
            covariates: covariates.iter().map(|s| s.to_string()).collect(),
            extra: Vec::new(),
        },
    )
}

pub fn load_csv_with(path: impl AsRef<Path>, cols: &CsvColumns) -> Result<CsvLoad> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(file);
    let headers = rdr.headers()?.clone();
    if headers.is_empty() || headers.iter().all(|h| h.trim().is_empty()) {
        return Err(Error::EmptyInput);
    }
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::Schema(name.to_string()))
    };
    let a_col = find(&cols.treatment)?;
    let y_col = find(&cols.outcome)?;
    let x_cols: Vec<usize> = cols
        .covariates
        .iter()
        .map(|c| find(c))
        .collect::<Result<_>>()?;
    let e_cols: Vec<usize> = cols.extra.iter().map(|c| find(c)).collect::<Result<_>>()?;

    let p = x_cols.len();
    let mut x = Vec::new();
    let mut a = Vec::new();
    let mut y = Vec::new();
    let mut extra = vec![Vec::new(); e_cols.len()];
    let mut dropped = 0usize;
    let mut buf = Vec::with_capacity(p + e_cols.len());

    for (r, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = r + 1;
        let tok = |j: usize| rec.get(j).map(str::trim).unwrap_or("");
        let missing = |s: &str| s.is_empty() || s == "NA";

        if std::iter::once(a_col)
            .chain(std::iter::once(y_col))
            .chain(x_cols.iter().copied())
            .chain(e_cols.iter().copied())
            .any(|j| missing(tok(j)))
        {
            dropped += 1;
            continue;
        }

        let av = parse_binary(tok(a_col), row, &cols.treatment)?;
        let yv = parse_binary(tok(y_col), row, &cols.outcome)?;
        buf.clear();
        for (&j, name) in x_cols
            .iter()
            .chain(&e_cols)
            .zip(cols.covariates.iter().chain(&cols.extra))
        {
            let v: f64 = tok(j).parse().map_err(|_| Error::Parse {
                row,
                message: format!("column `{name}`: `{}` is not a number", tok(j)),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    row,
                    message: format!("column `{name}`: non-finite value"),
                });
            }
            buf.push(v);
        }
        x.extend_from_slice(&buf[..p]);
        for (k, v) in buf[p..].iter().enumerate() {
            extra[k].push(*v);
        }
        a.push(av);
        y.push(yv);
    }

    if a.is_empty() {
        return Err(Error::EmptyInput);
    }
    let n = a.len();
    let dataset = Dataset::with_names(
        Matrix::from_row_major(n, p, x),
        a,
        y,
        cols.covariates.clone(),
    )?;
    Ok(CsvLoad {
        dataset,
        dropped_rows: dropped,
        extra,
    })
}

fn parse_binary(tok: &str, row: usize, col: &str) -> Result<f64> {
    match tok.parse::<f64>() {
        Ok(v) if v == 0.0 || v == 1.0 => Ok(v),
        _ => Err(Error::Parse {
            row,
            message: format!("column `{col}`: `{tok}` is not a 0/1 value"),
        }),
    }
}

/// Column names from the header line, trimmed.
pub fn csv_header(path: impl AsRef<Path>) -> Result<Vec<String>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(file);
    let headers: Vec<String> = rdr
        .headers()?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    if headers.iter().all(|h| h.is_empty()) {
        return Err(Error::EmptyInput);
    }
    Ok(headers)
}

/// Writes covariates (under their column names) followed by the treatment and
/// outcome columns. Reals use the shortest representation that round-trips.
pub fn write_csv(
    d: &Dataset,
    path: impl AsRef<Path>,
    treatment: &str,
    outcome: &str,
) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    let mut header: Vec<&str> = d.column_names().iter().map(String::as_str).collect();
    header.push(treatment);
    header.push(outcome);
    w.write_record(&header)?;
    let mut rec = Vec::with_capacity(d.p() + 2);
    for i in 0..d.n() {
        rec.clear();
        rec.extend(d.x().row(i).iter().map(|v| v.to_string()));
        rec.push(format!("{}", d.a()[i] as u8));
        rec.push(format!("{}", d.y()[i] as u8));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    w.into_inner()
        .map_err(|e| Error::io(path, e.into_error()))?
        .flush()
        .map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn write(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn four_rows() {
        let f = write("x1,a,y\n0.5,1,1\n1.5,0,0\n-2,1,0\n3,0,1\n");
        let l = load_csv(f.path(), "a", "y", &["x1"]).unwrap();
        assert_eq!(l.dataset.n(), 4);
        assert_eq!(l.dataset.p(), 1);
        assert_eq!(l.dropped_rows, 0);
        assert_eq!(l.dataset.x().column(0), vec![0.5, 1.5, -2.0, 3.0]);
    }

    #[test]
    fn missing_token_drops_row() {
        let f = write("x1,a,y\n0.5,1,1\nNA,0,0\n-2,1,0\n3,0,1\n");
        let l = load_csv(f.path(), "a", "y", &["x1"]).unwrap();
        assert_eq!(l.dataset.n(), 3);
        assert_eq!(l.dropped_rows, 1);
        let f = write("x1,a,y\n0.5,1,1\n,0,0\n");
        assert_eq!(
            load_csv(f.path(), "a", "y", &["x1"]).unwrap().dropped_rows,
            1
        );
    }

    #[test]
    fn missing_in_unselected_column_is_kept() {
        let f = write("x1,junk,a,y\n0.5,NA,1,1\n1,2,0,0\n");
        let l = load_csv(f.path(), "a", "y", &["x1"]).unwrap();
        assert_eq!(l.dataset.n(), 2);
    }

    #[test]
    fn missing_column_is_schema_error() {
        let f = write("x1,a,y\n0.5,1,1\n");
        match load_csv(f.path(), "a", "y", &["x2"]) {
            Err(Error::Schema(c)) => assert_eq!(c, "x2"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn non_binary_treatment_reports_row() {
        let f = write("x1,a,y\n0.5,1,1\n0.1,2,0\n");
        match load_csv(f.path(), "a", "y", &["x1"]) {
            Err(Error::Parse { row, .. }) => assert_eq!(row, 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn empty_file() {
        let f = write("");
        assert!(matches!(
            load_csv(f.path(), "a", "y", &[]),
            Err(Error::EmptyInput)
        ));
        let f = write("x1,a,y\n");
        assert!(matches!(
            load_csv(f.path(), "a", "y", &["x1"]),
            Err(Error::EmptyInput)
        ));
    }

    #[test]
    fn extra_columns_are_returned() {
        let f = write("x1,e,a,y\n0.5,0.3,1,1\n1.5,0.6,0,0\n");
        let l = load_csv_with(
            f.path(),
            &CsvColumns {
                treatment: "a".into(),
                outcome: "y".into(),
                covariates: vec!["x1".into()],
                extra: vec!["e".into()],
            },
        )
        .unwrap();
        assert_eq!(l.extra, vec![vec![0.3, 0.6]]);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn write_then_load_is_identity(
            rows in prop::collection::vec((prop::array::uniform3(-1e6f64..1e6), any::<bool>(), any::<bool>()), 1..40)
        ) {
            let x = Matrix::from_rows(&rows.iter().map(|r| r.0).collect::<Vec<_>>());
            let a = rows.iter().map(|r| r.1 as u8 as f64).collect();
            let y = rows.iter().map(|r| r.2 as u8 as f64).collect();
            let d = Dataset::new(x, a, y).unwrap();
            let f = tempfile::NamedTempFile::new().unwrap();
            write_csv(&d, f.path(), "a", "y").unwrap();
            let back = load_csv(f.path(), "a", "y", &["x1", "x2", "x3"]).unwrap();
            prop_assert_eq!(back.dataset, d);
        }
    }
}
