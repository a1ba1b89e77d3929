//! Regression datasets and CSV ingestion.

use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Standard deviations below this are floored when standardizing.
pub const STD_FLOOR: f64 = 1e-12;

/// Features `X` (n×p) and responses `Y` (n×q) sharing row order.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub x: Matrix,
    pub y: Matrix,
    pub feature_names: Vec<String>,
    pub response_names: Vec<String>,
    pub standardized: bool,
}

impl Dataset {
    /// Wraps matrices with generated column names `x1..xp`, `y1..yq`.
    pub fn new(x: Matrix, y: Matrix) -> Result<Self> {
        let feature_names = (1..=x.cols()).map(|j| format!("x{j}")).collect();
        let response_names = (1..=y.cols()).map(|j| format!("y{j}")).collect();
        Self::with_names(x, y, feature_names, response_names)
    }

    pub fn with_names(
        x: Matrix,
        y: Matrix,
        feature_names: Vec<String>,
        response_names: Vec<String>,
    ) -> Result<Self> {
        if x.rows() != y.rows() {
            return Err(Error::shape(format!(
                "{} feature rows but {} response rows",
                x.rows(),
                y.rows()
            )));
        }
        if x.rows() < 3 {
            return Err(Error::InsufficientSamples {
                needed: 3,
                got: x.rows(),
            });
        }
        if feature_names.len() != x.cols() || response_names.len() != y.cols() {
            return Err(Error::shape("column names do not match matrix widths"));
        }
        if let Some(dup) = response_names.iter().find(|r| feature_names.contains(r)) {
            return Err(Error::InvalidConfig(format!(
                "column {dup:?} is both a feature and a response"
            )));
        }
        Ok(Self {
            x,
            y,
            feature_names,
            response_names,
            standardized: false,
        })
    }

    pub fn n(&self) -> usize {
        self.x.rows()
    }

    pub fn p(&self) -> usize {
        self.x.cols()
    }

    pub fn q(&self) -> usize {
        self.y.cols()
    }

    /// Rescales each feature column to zero mean and unit (population)
    /// standard deviation.
    pub fn standardize(mut self) -> Self {
        self.x = standardize_columns(&self.x);
        self.standardized = true;
        self
    }
}

pub fn standardize_columns(m: &Matrix) -> Matrix {
    let n = m.rows() as f64;
    let centered = m.center_columns();
    let stds: Vec<f64> = (0..m.cols())
        .map(|j| {
            let var = (0..m.rows()).map(|i| centered[(i, j)].powi(2)).sum::<f64>() / n;
            var.sqrt().max(STD_FLOOR)
        })
        .collect();
    let mut out = centered;
    for i in 0..m.rows() {
        for (j, s) in stds.iter().enumerate() {
            out[(i, j)] /= s;
        }
    }
    out
}

/// Reads a headered numeric CSV. Columns named in `response_columns` become
/// `Y` (in the given order); every other column is a feature.
pub fn load_csv(path: &Path, response_columns: &[String], standardize: bool) -> Result<Dataset> {
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Csv(e.to_string()))?
        .iter()
        .map(str::to_owned)
        .collect();

    if response_columns.is_empty() {
        return Err(Error::InvalidConfig("no response column given".into()));
    }
    let mut response_idx = Vec::with_capacity(response_columns.len());
    for name in response_columns {
        let idx = headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown response column {name:?}")))?;
        if response_idx.contains(&idx) {
            return Err(Error::InvalidConfig(format!(
                "response column {name:?} repeated"
            )));
        }
        response_idx.push(idx);
    }
    let feature_idx: Vec<usize> = (0..headers.len())
        .filter(|i| !response_idx.contains(i))
        .collect();
    if feature_idx.is_empty() {
        return Err(Error::InvalidConfig("no feature columns left".into()));
    }

    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (r, record) in reader.records().enumerate() {
        // data row r sits on line r + 2
        let line = r + 2;
        let record = record.map_err(|e| Error::Csv(e.to_string()))?;
        if record.len() != headers.len() {
            return Err(Error::Csv(format!(
                "line {line}: {} cells, header has {}",
                record.len(),
                headers.len()
            )));
        }
        let mut values = Vec::with_capacity(record.len());
        for (c, cell) in record.iter().enumerate() {
            if cell.is_empty() {
                return Err(Error::Csv(format!(
                    "line {line}, column {:?}: empty cell",
                    headers[c]
                )));
            }
            let v: f64 = cell.parse().map_err(|_| {
                Error::Csv(format!(
                    "line {line}, column {:?}: not a number: {cell:?}",
                    headers[c]
                ))
            })?;
            if !v.is_finite() {
                return Err(Error::Csv(format!(
                    "line {line}, column {:?}: non-finite value {cell:?}",
                    headers[c]
                )));
            }
            values.push(v);
        }
        xs.extend(feature_idx.iter().map(|&i| values[i]));
        ys.extend(response_idx.iter().map(|&i| values[i]));
    }

    let n = xs.len() / feature_idx.len();
    if n < 3 {
        return Err(Error::InsufficientSamples { needed: 3, got: n });
    }
    let x = Matrix::from_vec(n, feature_idx.len(), xs)?;
    let y = Matrix::from_vec(n, response_idx.len(), ys)?;
    for j in 0..y.cols() {
        let first = y[(0, j)];
        if (0..n).all(|i| y[(i, j)] == first) {
            return Err(Error::DegenerateResponse);
        }
    }
    let ds = Dataset::with_names(
        x,
        y,
        feature_idx.iter().map(|&i| headers[i].clone()).collect(),
        response_columns.to_vec(),
    )?;
    Ok(if standardize { ds.standardize() } else { ds })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_tmp(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn loads_small_file() {
        let f = write_tmp("a,y\n1,2\n2,4\n3,7\n");
        let ds = load_csv(f.path(), &names(&["y"]), false).unwrap();
        assert_eq!((ds.n(), ds.p(), ds.q()), (3, 1, 1));
        assert_eq!(ds.feature_names, names(&["a"]));
        assert_eq!(ds.y.col(0), vec![2.0, 4.0, 7.0]);
    }

    #[test]
    fn empty_cell_is_named() {
        let f = write_tmp("a,b,y\n1,2,3\n4,,6\n7,8,9\n");
        let err = load_csv(f.path(), &names(&["y"]), false).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 3") && msg.contains("\"b\""), "{msg}");
    }

    #[test]
    fn non_numeric_and_unknown_response() {
        let f = write_tmp("a,y\n1,2\nx,4\n3,7\n");
        assert!(matches!(
            load_csv(f.path(), &names(&["y"]), false),
            Err(Error::Csv(_))
        ));
        let f = write_tmp("a,y\n1,2\n2,4\n3,7\n");
        assert!(matches!(
            load_csv(f.path(), &names(&["z"]), false),
            Err(Error::InvalidConfig(_))
        ));
        assert!(matches!(
            load_csv(Path::new("/no/such/file.csv"), &names(&["y"]), false),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn constant_response_rejected() {
        let f = write_tmp("a,y\n1,2\n2,2\n3,2\n");
        assert!(matches!(
            load_csv(f.path(), &names(&["y"]), false),
            Err(Error::DegenerateResponse)
        ));
    }

    #[test]
    fn standardization() {
        let f = write_tmp("a,b,y\n1,100,0\n2,300,1\n4,200,0\n8,900,1\n");
        let ds = load_csv(f.path(), &names(&["y"]), true).unwrap();
        assert!(ds.standardized);
        for j in 0..ds.p() {
            let c = ds.x.col(j);
            let mean = c.iter().sum::<f64>() / c.len() as f64;
            let sd = (c.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / c.len() as f64).sqrt();
            assert!(mean.abs() <= 1e-12);
            assert!((sd - 1.0).abs() <= 1e-9);
        }
    }
}
