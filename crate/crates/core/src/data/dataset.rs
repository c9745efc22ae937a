use std::collections::HashMap;
use std::io::Read;
use std::path::Path;

use crate::simsearch::BitVector;
use crate::{Error, Result};

/// Bit-packed boolean rows keyed by unique, ordered identifiers.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryDataset {
    ids: Vec<String>,
    rows: Vec<BitVector>,
    d: usize,
    feature_names: Vec<String>,
    index: HashMap<String, usize>,
}

impl BinaryDataset {
    /// Builds a dataset, checking id uniqueness and row widths. Empty
    /// `feature_names` are replaced by `f1..fd`.
    pub fn new(ids: Vec<String>, rows: Vec<BitVector>, d: usize, mut feature_names: Vec<String>) -> Result<Self> {
        if ids.len() != rows.len() {
            return Err(Error::Data(format!("{} ids for {} rows", ids.len(), rows.len())));
        }
        if feature_names.is_empty() {
            feature_names = (1..=d).map(|j| format!("f{j}")).collect();
        }
        if feature_names.len() != d {
            return Err(Error::Data(format!("{} feature names for width {d}", feature_names.len())));
        }
        let mut index = HashMap::with_capacity(ids.len());
        for (i, (id, row)) in ids.iter().zip(&rows).enumerate() {
            if row.width() != d {
                return Err(Error::Data(format!("row {id} has width {}, expected {d}", row.width())));
            }
            if index.insert(id.clone(), i).is_some() {
                return Err(Error::Data(format!("duplicate id {id}")));
            }
        }
        Ok(Self {
            ids,
            rows,
            d,
            feature_names,
            index,
        })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    #[inline]
    pub fn d(&self) -> usize {
        self.d
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn id(&self, i: usize) -> &str {
        &self.ids[i]
    }

    pub fn rows(&self) -> &[BitVector] {
        &self.rows
    }

    pub fn row(&self, i: usize) -> &BitVector {
        &self.rows[i]
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn row_f64(&self, i: usize) -> Vec<f64> {
        self.rows[i].to_f64()
    }

    pub fn dense_rows(&self) -> Vec<Vec<f64>> {
        self.rows.iter().map(BitVector::to_f64).collect()
    }

    /// Rows at `indices`, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.len()) {
            return Err(Error::InvalidArgument(format!("row index {bad} out of range")));
        }
        Self::new(
            indices.iter().map(|&i| self.ids[i].clone()).collect(),
            indices.iter().map(|&i| self.rows[i].clone()).collect(),
            self.d,
            self.feature_names.clone(),
        )
    }

    /// CSV serialisation, `\n` line endings.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::with_capacity(self.len() * (2 * self.d + 8));
        out.push_str("id");
        for name in &self.feature_names {
            out.push(',');
            out.push_str(name);
        }
        out.push('\n');
        for (id, row) in self.ids.iter().zip(&self.rows) {
            out.push_str(id);
            for j in 0..self.d {
                out.push_str(if row.get(j) { ",1" } else { ",0" });
            }
            out.push('\n');
        }
        out
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv_string()).map_err(|e| Error::io(path, e))
    }

    /// SHA-256 of the canonical CSV serialisation.
    pub fn checksum(&self) -> String {
        super::sha256_hex(self.to_csv_string().as_bytes())
    }
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    let message = match e.kind() {
        csv::ErrorKind::UnequalLengths {
            expected_len, len, ..
        } => format!("ragged row: expected {expected_len} fields, found {len}"),
        _ => e.to_string(),
    };
    Error::Parse {
        line,
        column: 0,
        message,
    }
}

/// Parses a dataset from any reader.
pub fn parse_csv<R: Read>(reader: R) -> Result<BinaryDataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header = rdr.headers().map_err(csv_error)?.clone();
    if header.get(0).map(str::trim) != Some("id") {
        return Err(Error::Parse {
            line: 1,
            column: 1,
            message: "first header column must be \"id\"".into(),
        });
    }
    let feature_names: Vec<String> = header.iter().skip(1).map(|s| s.trim().to_string()).collect();
    let d = feature_names.len();
    let mut ids = Vec::new();
    let mut rows = Vec::new();
    let mut seen = HashMap::new();
    for record in rdr.records() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map_or(0, |p| p.line());
        let id = record.get(0).unwrap_or("").trim().to_string();
        if id.is_empty() {
            return Err(Error::Parse {
                line,
                column: 1,
                message: "empty id".into(),
            });
        }
        if let Some(prev) = seen.insert(id.clone(), line) {
            return Err(Error::Parse {
                line,
                column: 1,
                message: format!("duplicate id {id:?} (first seen on line {prev})"),
            });
        }
        let mut row = BitVector::zeros(d);
        for (j, cell) in record.iter().skip(1).enumerate() {
            match cell.trim() {
                "0" => {}
                "1" => row.set(j, true),
                other => {
                    return Err(Error::Parse {
                        line,
                        column: j + 2,
                        message: format!("cell must be 0 or 1, found {other:?}"),
                    })
                }
            }
        }
        ids.push(id);
        rows.push(row);
    }
    BinaryDataset::new(ids, rows, d, feature_names)
}

pub fn load_csv(path: impl AsRef<Path>) -> Result<BinaryDataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_csv(std::io::BufReader::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_small_file() {
        let ds = parse_csv("id,a,b\np1,1,0\np2,0,1\n".as_bytes()).unwrap();
        assert_eq!((ds.len(), ds.d()), (2, 2));
        assert!(ds.row(0).get(0) && !ds.row(0).get(1));
        assert!(!ds.row(1).get(0) && ds.row(1).get(1));
        assert_eq!(ds.index_of("p2"), Some(1));
        assert_eq!(ds.feature_names(), &["a".to_string(), "b".to_string()]);
    }

    #[test]
    fn bad_cell_names_line_and_column() {
        let err = parse_csv("id,a,b\np1,1,0\np2,2,1\n".as_bytes()).unwrap_err();
        match err {
            Error::Parse { line, column, .. } => assert_eq!((line, column), (3, 2)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn duplicate_and_ragged_rejected() {
        let dup = parse_csv("id,a\np1,1\np1,0\n".as_bytes()).unwrap_err();
        assert!(dup.to_string().contains("duplicate"), "{dup}");
        let ragged = parse_csv("id,a,b\np1,1\n".as_bytes()).unwrap_err();
        assert!(ragged.to_string().contains("line 2"), "{ragged}");
        assert!(parse_csv("name,a\np1,1\n".as_bytes()).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let text = "id,x,y,z\nr1,1,0,1\nr2,0,0,0\n";
        let ds = parse_csv(text.as_bytes()).unwrap();
        assert_eq!(ds.to_csv_string(), text);
    }
}
