//! CSV and manifest primitives shared by dataset and model bundles.
//!
//! Matrices are stored one row per line with a header of column indices.
//! Values use the shortest round-tripping decimal form, so a save/load
//! cycle reproduces every f64 bit-exactly.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};

pub fn write_matrix_csv(path: &Path, mat: &Array2<f64>) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut w = BufWriter::new(file);
    let ncols = mat.ncols();
    let mut line = String::new();
    for j in 0..ncols {
        if j > 0 {
            line.push(',');
        }
        line.push_str(&j.to_string());
    }
    line.push('\n');
    w.write_all(line.as_bytes())
        .map_err(|e| Error::io(path.display().to_string(), e))?;
    for row in mat.rows() {
        line.clear();
        for (j, v) in row.iter().enumerate() {
            if j > 0 {
                line.push(',');
            }
            line.push_str(&format!("{v}"));
        }
        line.push('\n');
        w.write_all(line.as_bytes())
            .map_err(|e| Error::io(path.display().to_string(), e))?;
    }
    w.flush().map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn read_matrix_csv(path: &Path) -> Result<Array2<f64>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let reader = BufReader::new(file);
    let mut lines = reader.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Integrity(format!("{}: empty file", path.display())))?
        .map_err(|e| Error::io(path.display().to_string(), e))?;
    let ncols = if header.is_empty() {
        0
    } else {
        header.split(',').count()
    };
    let mut data = Vec::new();
    let mut nrows = 0;
    for (i, line) in lines.enumerate() {
        let line = line.map_err(|e| Error::io(path.display().to_string(), e))?;
        if line.is_empty() {
            continue;
        }
        let mut count = 0;
        for tok in line.split(',') {
            let v: f64 = tok.parse().map_err(|_| {
                Error::Integrity(format!("{}: bad value '{tok}' on line {}", path.display(), i + 2))
            })?;
            data.push(v);
            count += 1;
        }
        if count != ncols {
            return Err(Error::Integrity(format!(
                "{}: line {} has {count} values, expected {ncols}",
                path.display(),
                i + 2
            )));
        }
        nrows += 1;
    }
    Array2::from_shape_vec((nrows, ncols), data)
        .map_err(|e| Error::Integrity(format!("{}: {e}", path.display())))
}

pub fn write_vector_csv(path: &Path, v: &Array1<f64>) -> Result<()> {
    let mat = v.clone().insert_axis(ndarray::Axis(0));
    write_matrix_csv(path, &mat)
}

pub fn read_vector_csv(path: &Path) -> Result<Array1<f64>> {
    let mat = read_matrix_csv(path)?;
    if mat.nrows() != 1 {
        return Err(Error::Integrity(format!(
            "{}: expected a single-row vector, got {} rows",
            path.display(),
            mat.nrows()
        )));
    }
    Ok(mat.row(0).to_owned())
}

/// Ordered key=value manifest.
#[derive(Debug, Clone, Default)]
pub struct Manifest {
    entries: Vec<(String, String)>,
}

impl Manifest {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, key: &str, value: impl ToString) {
        self.entries.push((key.to_string(), value.to_string()));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn require(&self, key: &str) -> Result<&str> {
        self.get(key)
            .ok_or_else(|| Error::Integrity(format!("manifest missing key '{key}'")))
    }

    pub fn require_parsed<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        self.require(key)?.parse().map_err(|_| {
            Error::Integrity(format!("manifest key '{key}' has unparsable value"))
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        for (k, v) in &self.entries {
            out.push_str(k);
            out.push('=');
            out.push_str(v);
            out.push('\n');
        }
        fs::write(path, out).map_err(|e| Error::io(path.display().to_string(), e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        let mut entries = Vec::new();
        for line in text.lines() {
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::Integrity(format!("{}: malformed manifest line '{line}'", path.display()))
            })?;
            entries.push((k.to_string(), v.to_string()));
        }
        Ok(Manifest { entries })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn matrix_roundtrip_is_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        let m = array![
            [1.0, -0.0, std::f64::consts::PI],
            [1e-308, -2.5e17, 0.1 + 0.2]
        ];
        write_matrix_csv(&path, &m).unwrap();
        let back = read_matrix_csv(&path).unwrap();
        assert_eq!(m.shape(), back.shape());
        for (a, b) in m.iter().zip(back.iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn truncated_matrix_is_an_integrity_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        std::fs::write(&path, "0,1,2\n1.0,2.0\n").unwrap();
        assert!(matches!(read_matrix_csv(&path), Err(Error::Integrity(_))));
    }

    #[test]
    fn manifest_roundtrip_preserves_order_and_values() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("manifest.txt");
        let mut m = Manifest::new();
        m.push("s", 42usize);
        m.push("hash", "abcd1234");
        m.save(&path).unwrap();
        let back = Manifest::load(&path).unwrap();
        assert_eq!(back.require_parsed::<usize>("s").unwrap(), 42);
        assert_eq!(back.require("hash").unwrap(), "abcd1234");
        assert!(back.get("nope").is_none());
    }
}
