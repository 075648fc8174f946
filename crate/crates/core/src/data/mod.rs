//! Observed-data containers, CSV ingestion and covariate expansion.

mod csv_io;
mod matrix;
mod moments;

pub use csv_io::{csv_header, load_csv, load_csv_with, write_csv, CsvColumns, CsvLoad};
pub use matrix::Matrix;
pub use moments::{moment_functionals, MomentFunctionals};

use crate::error::{Error, Result};

/// Observed sample: covariates `x`, binary treatment `a` and binary outcome `y`.
///
/// Treatment and outcome are stored as reals that are exactly `0.0` or `1.0`,
/// which keeps the estimating equations free of casts.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    x: Matrix,
    a: Vec<f64>,
    y: Vec<f64>,
    column_names: Vec<String>,
}

impl Dataset {
    pub fn new(x: Matrix, a: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        let names = (1..=x.ncols()).map(|j| format!("x{j}")).collect();
        Self::with_names(x, a, y, names)
    }

    pub fn with_names(
        x: Matrix,
        a: Vec<f64>,
        y: Vec<f64>,
        column_names: Vec<String>,
    ) -> Result<Self> {
        let n = x.nrows();
        if n == 0 {
            return Err(Error::EmptyInput);
        }
        if a.len() != n || y.len() != n {
            return Err(Error::Argument(format!(
                "x has {n} rows but a has {} and y has {}",
                a.len(),
                y.len()
            )));
        }
        if column_names.len() != x.ncols() {
            return Err(Error::Argument(format!(
                "{} column names for {} covariates",
                column_names.len(),
                x.ncols()
            )));
        }
        for (i, (&ai, &yi)) in a.iter().zip(&y).enumerate() {
            if !is_binary(ai) {
                return Err(Error::Parse {
                    row: i + 1,
                    message: format!("treatment value {ai} is not 0/1"),
                });
            }
            if !is_binary(yi) {
                return Err(Error::Parse {
                    row: i + 1,
                    message: format!("outcome value {yi} is not 0/1"),
                });
            }
        }
        if let Some(pos) = x.as_slice().iter().position(|v| !v.is_finite()) {
            return Err(Error::Parse {
                row: pos / x.ncols().max(1) + 1,
                message: "non-finite covariate".into(),
            });
        }
        Ok(Dataset {
            x,
            a,
            y,
            column_names,
        })
    }

    pub fn n(&self) -> usize {
        self.a.len()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn x(&self) -> &Matrix {
        &self.x
    }

    pub fn a(&self) -> &[f64] {
        &self.a
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.column_names
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::Schema(name.to_string()))
    }

    /// Rows in the given order; indices may repeat (bootstrap resampling).
    pub fn select_rows(&self, idx: &[usize]) -> Dataset {
        Dataset {
            x: self.x.select_rows(idx),
            a: idx.iter().map(|&i| self.a[i]).collect(),
            y: idx.iter().map(|&i| self.y[i]).collect(),
            column_names: self.column_names.clone(),
        }
    }

    /// Number of treated events, `sum A*Y`.
    pub fn treated_cases(&self) -> usize {
        self.a
            .iter()
            .zip(&self.y)
            .filter(|(&a, &y)| a == 1.0 && y == 1.0)
            .count()
    }

    /// Number of untreated non-events, `sum (1-A)(1-Y)`.
    pub fn control_noncases(&self) -> usize {
        self.a
            .iter()
            .zip(&self.y)
            .filter(|(&a, &y)| a == 0.0 && y == 0.0)
            .count()
    }

    /// Appends one product column `<cont>:<disc>` for every (continuous, discrete) pair.
    pub fn expand_interactions(&self, continuous: &[&str], discrete: &[&str]) -> Result<Dataset> {
        if let Some(c) = continuous.iter().find(|c| discrete.contains(c)) {
            return Err(Error::Argument(format!(
                "column `{c}` listed as both continuous and discrete"
            )));
        }
        let cont: Vec<usize> = continuous
            .iter()
            .map(|c| self.column_index(c))
            .collect::<Result<_>>()?;
        let disc: Vec<usize> = discrete
            .iter()
            .map(|c| self.column_index(c))
            .collect::<Result<_>>()?;

        let mut extra = Vec::with_capacity(cont.len() * disc.len());
        let mut names = self.column_names.clone();
        for (&cj, cname) in cont.iter().zip(continuous) {
            for (&dj, dname) in disc.iter().zip(discrete) {
                extra.push(self.x.rows().map(|r| r[cj] * r[dj]).collect::<Vec<f64>>());
                names.push(format!("{cname}:{dname}"));
            }
        }
        Ok(Dataset {
            x: self.x.with_appended_columns(&extra),
            a: self.a.clone(),
            y: self.y.clone(),
            column_names: names,
        })
    }
}

/// Free-function form of [`Dataset::expand_interactions`].
pub fn expand_interactions(d: &Dataset, continuous: &[&str], discrete: &[&str]) -> Result<Dataset> {
    d.expand_interactions(continuous, discrete)
}

fn is_binary(v: f64) -> bool {
    v == 0.0 || v == 1.0
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> Dataset {
        let x = Matrix::from_rows(&[[1.0, 0.0], [2.0, 1.0], [0.0, 1.0], [3.0, 0.0]]);
        Dataset::with_names(
            x,
            vec![1.0, 0.0, 1.0, 0.0],
            vec![1.0, 1.0, 0.0, 0.0],
            vec!["age".into(), "sex".into()],
        )
        .unwrap()
    }

    #[test]
    fn rejects_non_binary_treatment() {
        let x = Matrix::from_rows(&[[0.0], [1.0]]);
        let err = Dataset::new(x, vec![1.0, 2.0], vec![0.0, 1.0]).unwrap_err();
        assert!(matches!(err, Error::Parse { row: 2, .. }));
    }

    #[test]
    fn rejects_non_finite_covariates() {
        let x = Matrix::from_rows(&[[0.0], [f64::NAN]]);
        assert!(Dataset::new(x, vec![1.0, 0.0], vec![0.0, 1.0]).is_err());
    }

    #[test]
    fn rejects_empty() {
        let x = Matrix::zeros(0, 1);
        assert!(matches!(
            Dataset::new(x, vec![], vec![]),
            Err(Error::EmptyInput)
        ));
    }

    #[test]
    fn one_interaction_column() {
        let d = small().expand_interactions(&["age"], &["sex"]).unwrap();
        assert_eq!(d.p(), 3);
        assert_eq!(d.column_names()[2], "age:sex");
        assert_eq!(d.x().column(2), vec![0.0, 2.0, 0.0, 0.0]);
        // originals untouched
        assert_eq!(d.x().column(0), vec![1.0, 2.0, 0.0, 3.0]);
    }

    #[test]
    fn zero_continuous_column_gives_zero_products() {
        let x = Matrix::from_rows(&[[0.0, 1.0], [0.0, 0.0], [0.0, 1.0]]);
        let d = Dataset::new(x, vec![1.0, 0.0, 1.0], vec![1.0, 0.0, 0.0]).unwrap();
        let e = d.expand_interactions(&["x1"], &["x2"]).unwrap();
        assert!(e.x().column(2).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn overlapping_lists_rejected() {
        let err = small()
            .expand_interactions(&["age"], &["age", "sex"])
            .unwrap_err();
        assert!(matches!(err, Error::Argument(_)));
    }

    #[test]
    fn unknown_column_is_schema_error() {
        let err = small().expand_interactions(&["bmi"], &["sex"]).unwrap_err();
        assert!(matches!(err, Error::Schema(c) if c == "bmi"));
    }

    #[test]
    fn counts() {
        let d = small();
        assert_eq!(d.treated_cases(), 1);
        assert_eq!(d.control_noncases(), 1);
    }
}
