//! Boolean feature tables, label files, synthetic data and splits.
//!
//! Dataset files are UTF-8 CSV with a header `id,<f1>,...,<fd>` and cells
//! `0`/`1`. Label files are `id,label` with `label ∈ {normal, anomaly}`.

mod dataset;
mod labels;
mod split;
mod summary;
mod synth;

pub use dataset::{load_csv, parse_csv, BinaryDataset};
pub use labels::{load_labels, parse_labels, Label, LabelMap};
pub use split::{split, split_indices};
pub use summary::{summary, DatasetSummary};
pub use synth::{generate_synthetic, AnomalyMode, SyntheticSpec};

/// Lower-case hex SHA-256 digest.
pub fn sha256_hex(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}
