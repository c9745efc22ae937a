use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::dataset::BinaryDataset;
use super::labels::{Label, LabelMap};
use crate::rng::child_rng;
use crate::simsearch::BitVector;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AnomalyMode {
    /// Anomalies come from a few prototypes obtained by perturbing normal
    /// prototypes.
    ClusterShifted,
    /// Each anomalous bit is set independently with the prototype density.
    UniformRare,
    /// Anomaly prototypes mix two normal prototypes bit by bit, so they sit
    /// between clusters rather than next to one.
    Blended,
}

/// Parameters of the imbalanced synthetic generator. Generation is a pure
/// function of this value; all randomness flows from `seed` through ChaCha8.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticSpec {
    pub n: usize,
    pub d: usize,
    pub anomaly_fraction: f64,
    pub n_normal_clusters: usize,
    /// Probability that a prototype bit is set.
    pub prototype_density: f64,
    /// Per-bit flip probability applied to every generated row.
    pub flip_noise: f64,
    pub anomaly_mode: AnomalyMode,
    /// Fraction of prototype bits flipped to form an anomaly prototype.
    pub anomaly_shift: f64,
    pub anomaly_groups: usize,
    /// Weight ratio between consecutive normal clusters; 1 gives equal sizes.
    pub cluster_size_decay: f64,
    /// Share of normal rows drawn with `noisy_flip` instead of `flip_noise`.
    /// These are the unremarkable-but-hard-to-reconstruct rows that an
    /// unsupervised score confuses with anomalies.
    pub noisy_fraction: f64,
    pub noisy_flip: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            n: 2000,
            d: 64,
            anomaly_fraction: 0.01,
            n_normal_clusters: 3,
            prototype_density: 0.3,
            flip_noise: 0.03,
            anomaly_mode: AnomalyMode::Blended,
            anomaly_shift: 0.0,
            anomaly_groups: 2,
            cluster_size_decay: 0.8,
            noisy_fraction: 0.05,
            noisy_flip: 0.1,
            seed: 42,
        }
    }
}

impl SyntheticSpec {
    /// n=2000, d=64, 1% anomalies, seed 42.
    pub fn canonical() -> Self {
        Self::default()
    }

    pub fn anomaly_count(&self) -> usize {
        ((self.n as f64 * self.anomaly_fraction).round() as usize).max(1)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("infeasible synthetic spec: {m}")));
        if self.n < 2 || self.d == 0 {
            return bad("need n >= 2 and d >= 1");
        }
        if !(self.anomaly_fraction > 0.0 && self.anomaly_fraction < 0.5) {
            return bad("anomaly_fraction must lie in (0, 0.5)");
        }
        if self.n_normal_clusters == 0 || self.anomaly_groups == 0 {
            return bad("cluster counts must be positive");
        }
        for (name, p) in [
            ("prototype_density", self.prototype_density),
            ("flip_noise", self.flip_noise),
            ("anomaly_shift", self.anomaly_shift),
            ("noisy_fraction", self.noisy_fraction),
            ("noisy_flip", self.noisy_flip),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return bad(&format!("{name} must lie in [0, 1]"));
            }
        }
        if !(self.cluster_size_decay > 0.0 && self.cluster_size_decay <= 1.0) {
            return bad("cluster_size_decay must lie in (0, 1]");
        }
        if self.anomaly_count() >= self.n {
            return bad("no room for normal rows");
        }
        Ok(())
    }
}

fn bernoulli_bits(rng: &mut impl Rng, d: usize, p: f64) -> Vec<bool> {
    (0..d).map(|_| rng.gen::<f64>() < p).collect()
}

fn with_noise(rng: &mut impl Rng, proto: &[bool], noise: f64) -> BitVector {
    let bits: Vec<bool> = proto.iter().map(|&b| b ^ (rng.gen::<f64>() < noise)).collect();
    BitVector::from_bools(&bits)
}

/// Draws a labelled dataset. Row ids are `r0000`, `r0001`, ...
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<(BinaryDataset, LabelMap)> {
    spec.validate()?;
    let mut rng = child_rng(spec.seed, 0);
    let (n, d) = (spec.n, spec.d);

    let prototypes: Vec<Vec<bool>> =
        (0..spec.n_normal_clusters).map(|_| bernoulli_bits(&mut rng, d, spec.prototype_density)).collect();
    let anomaly_protos: Vec<Vec<bool>> = (0..spec.anomaly_groups)
        .map(|_| {
            let a = rng.gen_range(0..prototypes.len());
            let base = match spec.anomaly_mode {
                AnomalyMode::Blended if prototypes.len() > 1 => {
                    let b = (a + 1 + rng.gen_range(0..prototypes.len() - 1)) % prototypes.len();
                    prototypes[a]
                        .iter()
                        .zip(&prototypes[b])
                        .map(|(&x, &y)| if rng.gen::<bool>() { x } else { y })
                        .collect()
                }
                _ => prototypes[a].clone(),
            };
            base.iter().map(|&b| b ^ (rng.gen::<f64>() < spec.anomaly_shift)).collect()
        })
        .collect();

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let mut labels = vec![Label::Normal; n];
    for &i in &order[..spec.anomaly_count()] {
        labels[i] = Label::Anomaly;
    }

    let weights: Vec<f64> = (0..prototypes.len()).map(|c| spec.cluster_size_decay.powi(c as i32)).collect();
    let total: f64 = weights.iter().sum();
    let mut anomaly_seen = 0usize;
    let rows: Vec<BitVector> = labels
        .iter()
        .map(|label| match label {
            Label::Normal => {
                let mut u = rng.gen::<f64>() * total;
                let mut c = 0;
                while c + 1 < weights.len() && u >= weights[c] {
                    u -= weights[c];
                    c += 1;
                }
                let noise = if rng.gen::<f64>() < spec.noisy_fraction {
                    spec.noisy_flip
                } else {
                    spec.flip_noise
                };
                with_noise(&mut rng, &prototypes[c], noise)
            }
            Label::Anomaly => {
                let row = match spec.anomaly_mode {
                    AnomalyMode::ClusterShifted | AnomalyMode::Blended => {
                        with_noise(&mut rng, &anomaly_protos[anomaly_seen % anomaly_protos.len()], spec.flip_noise)
                    }
                    AnomalyMode::UniformRare => BitVector::from_bools(&bernoulli_bits(&mut rng, d, spec.prototype_density)),
                };
                anomaly_seen += 1;
                row
            }
        })
        .collect();

    let width = (n - 1).to_string().len().max(4);
    let ids = (0..n).map(|i| format!("r{i:0width$}")).collect();
    Ok((BinaryDataset::new(ids, rows, d, Vec::new())?, LabelMap::new(labels)))
}
