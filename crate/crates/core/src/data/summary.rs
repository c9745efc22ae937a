use std::fmt;

use serde::{Deserialize, Serialize};

use super::dataset::BinaryDataset;
use super::labels::LabelMap;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub rows: usize,
    pub features: usize,
    pub anomalies: Option<usize>,
}

impl DatasetSummary {
    pub fn anomaly_percent(&self) -> Option<f64> {
        self.anomalies.map(|a| if self.rows == 0 { 0.0 } else { 100.0 * a as f64 / self.rows as f64 })
    }

    /// Percentage rounded to two decimals, e.g. `1.00%`.
    pub fn percent_string(&self) -> Option<String> {
        self.anomaly_percent().map(|p| format!("{p:.2}%"))
    }
}

impl fmt::Display for DatasetSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:>8} {:>8} {:>9} {:>9}", "rows", "features", "anomalies", "percent")?;
        let (a, p) = match (self.anomalies, self.percent_string()) {
            (Some(a), Some(p)) => (a.to_string(), p),
            _ => ("-".into(), "-".into()),
        };
        write!(f, "{:>8} {:>8} {:>9} {:>9}", self.rows, self.features, a, p)
    }
}

pub fn summary(dataset: &BinaryDataset, labels: Option<&LabelMap>) -> DatasetSummary {
    DatasetSummary {
        rows: dataset.len(),
        features: dataset.d(),
        anomalies: labels.map(LabelMap::anomaly_count),
    }
}
