use rand::seq::SliceRandom;

use super::dataset::BinaryDataset;
use super::labels::LabelMap;
use crate::rng::child_rng;
use crate::{Error, Result};

/// Seeded partition of `0..n` into (train, holdout), each sorted ascending.
/// With `stratify`, each label class is split separately.
pub fn split_indices(
    n: usize,
    labels: Option<&LabelMap>,
    fraction: f64,
    seed: u64,
    stratify: bool,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidArgument(format!("split fraction {fraction} not in (0, 1)")));
    }
    let mut rng = child_rng(seed, 0);
    let groups: Vec<Vec<usize>> = match (stratify, labels) {
        (false, _) => vec![(0..n).collect()],
        (true, Some(l)) => {
            if l.len() != n {
                return Err(Error::InvalidArgument(format!("{} labels for {n} rows", l.len())));
            }
            let (anom, norm): (Vec<usize>, Vec<usize>) = (0..n).partition(|&i| l.get(i).is_anomaly());
            vec![norm, anom]
        }
        (true, None) => return Err(Error::InvalidArgument("stratified split requires labels".into())),
    };
    let (mut train, mut holdout) = (Vec::new(), Vec::new());
    for mut g in groups {
        g.shuffle(&mut rng);
        let k = (g.len() as f64 * fraction).round() as usize;
        holdout.extend_from_slice(&g[k..]);
        g.truncate(k);
        train.extend(g);
    }
    if train.is_empty() || holdout.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "split of {n} rows at fraction {fraction} leaves an empty part"
        )));
    }
    train.sort_unstable();
    holdout.sort_unstable();
    Ok((train, holdout))
}

/// Train and holdout datasets plus their labels when given.
pub fn split(
    dataset: &BinaryDataset,
    labels: Option<&LabelMap>,
    fraction: f64,
    seed: u64,
    stratify: bool,
) -> Result<((BinaryDataset, Option<LabelMap>), (BinaryDataset, Option<LabelMap>))> {
    let (a, b) = split_indices(dataset.len(), labels, fraction, seed, stratify)?;
    let part = |idx: &[usize]| -> Result<_> { Ok((dataset.subset(idx)?, labels.map(|l| l.subset(idx)))) };
    Ok((part(&a)?, part(&b)?))
}
