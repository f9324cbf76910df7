//! JSON matrix files: `{"dim": n, "real": [[...]], "imag": [[...]]}` with rows as inner arrays.

use std::fs;
use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixJson {
    pub dim: usize,
    pub real: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub imag: Option<Vec<Vec<f64>>>,
}

impl MatrixJson {
    pub fn from_matrix<T: Scalar>(m: &DMatrix<T>) -> Self {
        let n = m.nrows();
        let real = (0..n).map(|i| (0..n).map(|j| m[(i, j)].real()).collect()).collect();
        let imag = T::IS_COMPLEX.then(|| (0..n).map(|i| (0..n).map(|j| m[(i, j)].imaginary()).collect()).collect());
        Self { dim: n, real, imag }
    }

    pub fn has_imaginary_part(&self) -> bool {
        self.imag.as_ref().is_some_and(|im| im.iter().flatten().any(|v| *v != 0.0))
    }

    pub fn to_matrix<T: Scalar>(&self) -> Result<DMatrix<T>> {
        let n = self.dim;
        check_rows(&self.real, n, "real")?;
        if let Some(im) = &self.imag {
            check_rows(im, n, "imag")?;
        }
        if !T::IS_COMPLEX && self.has_imaginary_part() {
            return Err(Error::Parse("complex entries in a real-valued context".into()));
        }
        Ok(DMatrix::from_fn(n, n, |i, j| {
            let im = self.imag.as_ref().map_or(0.0, |m| m[i][j]);
            T::from_parts(self.real[i][j], im)
        }))
    }
}

fn check_rows(rows: &[Vec<f64>], n: usize, field: &str) -> Result<()> {
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        return Err(Error::Parse(format!("`{field}` must be a {n}x{n} array of rows")));
    }
    Ok(())
}

pub fn parse_matrix<T: Scalar>(text: &str) -> Result<DMatrix<T>> {
    let js: MatrixJson = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    js.to_matrix()
}

pub fn parse_matrix_set<T: Scalar>(text: &str) -> Result<Vec<DMatrix<T>>> {
    let js: Vec<MatrixJson> = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    js.iter().map(MatrixJson::to_matrix).collect()
}

pub fn matrix_to_string<T: Scalar>(m: &DMatrix<T>) -> String {
    serde_json::to_string(&MatrixJson::from_matrix(m)).expect("finite matrices always serialize")
}

pub fn matrix_set_to_string<T: Scalar>(ms: &[DMatrix<T>]) -> String {
    let js: Vec<MatrixJson> = ms.iter().map(MatrixJson::from_matrix).collect();
    serde_json::to_string(&js).expect("finite matrices always serialize")
}

/// True if any matrix in the JSON set at `text` has a nonzero imaginary part.
pub fn set_is_complex(text: &str) -> Result<bool> {
    let js: Vec<MatrixJson> = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    Ok(js.iter().any(MatrixJson::has_imaginary_part))
}

pub fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn read_matrix<T: Scalar>(path: &Path) -> Result<DMatrix<T>> {
    parse_matrix(&read_to_string(path)?)
}

pub fn read_matrix_set<T: Scalar>(path: &Path) -> Result<Vec<DMatrix<T>>> {
    parse_matrix_set(&read_to_string(path)?)
}

/// Writes through a temporary file in the target directory and renames it into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(contents).map_err(|e| Error::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

pub fn write_matrix<T: Scalar>(path: &Path, m: &DMatrix<T>) -> Result<()> {
    write_atomic(path, matrix_to_string(m).as_bytes())
}

pub fn write_matrix_set<T: Scalar>(path: &Path, ms: &[DMatrix<T>]) -> Result<()> {
    write_atomic(path, matrix_set_to_string(ms).as_bytes())
}
