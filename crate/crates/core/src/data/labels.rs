use std::fmt;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::dataset::BinaryDataset;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Normal,
    Anomaly,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Normal => "normal",
            Label::Anomaly => "anomaly",
        }
    }

    pub fn is_anomaly(self) -> bool {
        self == Label::Anomaly
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "normal" => Ok(Label::Normal),
            "anomaly" => Ok(Label::Anomaly),
            other => Err(Error::InvalidArgument(format!(
                "label must be \"normal\" or \"anomaly\", found {other:?}"
            ))),
        }
    }
}

/// Ground-truth labels aligned with a dataset's row order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    labels: Vec<Label>,
}

impl LabelMap {
    pub fn new(labels: Vec<Label>) -> Self {
        Self { labels }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn get(&self, row: usize) -> Label {
        self.labels[row]
    }

    pub fn as_slice(&self) -> &[Label] {
        &self.labels
    }

    pub fn anomaly_count(&self) -> usize {
        self.labels.iter().filter(|l| l.is_anomaly()).count()
    }

    pub fn anomaly_fraction(&self) -> f64 {
        if self.labels.is_empty() {
            0.0
        } else {
            self.anomaly_count() as f64 / self.labels.len() as f64
        }
    }

    pub fn relevance(&self) -> Vec<bool> {
        self.labels.iter().map(|l| l.is_anomaly()).collect()
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        Self::new(indices.iter().map(|&i| self.labels[i]).collect())
    }

    pub fn to_csv_string(&self, dataset: &BinaryDataset) -> String {
        let mut out = String::from("id,label\n");
        for (id, label) in dataset.ids().iter().zip(&self.labels) {
            out.push_str(id);
            out.push(',');
            out.push_str(label.as_str());
            out.push('\n');
        }
        out
    }

    pub fn save_csv(&self, dataset: &BinaryDataset, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv_string(dataset)).map_err(|e| Error::io(path, e))
    }
}

/// Parses an `id,label` file against `dataset`. Ids missing from the file are
/// an error unless `missing_as_normal` is set, in which case they are Normal.
pub fn parse_labels<R: Read>(reader: R, dataset: &BinaryDataset, missing_as_normal: bool) -> Result<LabelMap> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header = rdr.headers().map_err(|e| Error::Data(e.to_string()))?.clone();
    let cols: Vec<&str> = header.iter().map(str::trim).collect();
    if cols != ["id", "label"] {
        return Err(Error::Parse {
            line: 1,
            column: 1,
            message: format!("label header must be \"id,label\", found {:?}", cols.join(",")),
        });
    }
    let mut labels: Vec<Option<Label>> = vec![None; dataset.len()];
    for record in rdr.records() {
        let record = record.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line()),
            column: 0,
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let id = record.get(0).unwrap_or("").trim();
        let row = dataset.index_of(id).ok_or_else(|| Error::Parse {
            line,
            column: 1,
            message: format!("label for unknown id {id:?}"),
        })?;
        let label: Label = record.get(1).unwrap_or("").parse().map_err(|e: Error| Error::Parse {
            line,
            column: 2,
            message: e.to_string(),
        })?;
        if labels[row].replace(label).is_some() {
            return Err(Error::Parse {
                line,
                column: 1,
                message: format!("duplicate label for id {id:?}"),
            });
        }
    }
    let missing = labels.iter().filter(|l| l.is_none()).count();
    if missing > 0 && !missing_as_normal {
        let first = labels.iter().position(Option::is_none).unwrap();
        return Err(Error::Data(format!(
            "{missing} dataset ids have no label (first: {:?}); pass the missing-as-normal option to treat them as normal",
            dataset.id(first)
        )));
    }
    Ok(LabelMap::new(labels.into_iter().map(|l| l.unwrap_or(Label::Normal)).collect()))
}

pub fn load_labels(path: impl AsRef<Path>, dataset: &BinaryDataset, missing_as_normal: bool) -> Result<LabelMap> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_labels(std::io::BufReader::new(file), dataset, missing_as_normal)
}
