use serde::{Deserialize, Serialize};

use crate::numerics::OptimizerKind;
use crate::{Error, Result};

/// Above this input width the attention gate defaults to a low-rank factorisation.
pub const DENSE_ATTENTION_MAX_D: usize = 2048;
pub const DEFAULT_ATTENTION_RANK: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum AttentionMode {
    /// Full `d × d` weight matrix.
    Dense,
    /// `W = U Vᵀ` with `U, V ∈ R^{d×rank}`.
    LowRank { rank: usize },
}

/// Hyperparameters of the model and its training loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sda2eConfig {
    /// Input feature count.
    pub d: usize,
    /// Latent (bottleneck) width, `0 < k < d`.
    pub k: usize,
    /// Encoder hidden widths from input towards the bottleneck; the decoder mirrors them.
    pub hidden_layers: Vec<usize>,
    /// Weight of the generator adversarial term.
    pub alpha: f64,
    /// Weight of the generator sparsity term.
    pub beta: f64,
    /// Weight of the attention regulariser.
    pub gamma: f64,
    /// Weight of the discriminator sparsity term.
    pub delta: f64,
    /// Hinge margin on the fake reconstruction energy.
    pub margin: f64,
    /// Target activation frequency of each latent unit.
    pub rho: f64,
    /// L1 coefficient on attention masks.
    pub lambda: f64,
    pub lr_generator: f64,
    pub lr_discriminator: f64,
    pub lr_attention: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub attention: AttentionMode,
    /// Scale `c` of the activation surrogate `1 − exp(−z/c)`.
    pub sparsity_sharpness: f64,
    pub optimizer: OptimizerKind,
}

/// `⌈d/8⌉` clamped to `[2, 64]` and kept below `d`.
pub fn default_latent_dim(d: usize) -> usize {
    d.div_ceil(8).clamp(2, 64).min(d.saturating_sub(1))
}

/// `[max(k, ⌈d/2⌉)]`.
pub fn default_hidden_layers(d: usize, k: usize) -> Vec<usize> {
    vec![k.max(d.div_ceil(2))]
}

impl Sda2eConfig {
    /// Default configuration for inputs of width `d`.
    pub fn for_dimension(d: usize) -> Self {
        let k = default_latent_dim(d);
        let attention = if d > DENSE_ATTENTION_MAX_D {
            tracing::warn!(d, rank = DEFAULT_ATTENTION_RANK, "dense attention too large, using low-rank gate");
            AttentionMode::LowRank {
                rank: DEFAULT_ATTENTION_RANK,
            }
        } else {
            AttentionMode::Dense
        };
        Self {
            d,
            k,
            hidden_layers: default_hidden_layers(d, k),
            alpha: 1.0,
            beta: 0.1,
            gamma: 0.01,
            delta: 0.1,
            margin: 1.0,
            rho: 0.1,
            lambda: 0.01,
            lr_generator: 1e-3,
            lr_discriminator: 1e-3,
            lr_attention: 1e-3,
            batch_size: 32,
            epochs: 100,
            seed: 0,
            attention,
            sparsity_sharpness: 0.1,
            optimizer: OptimizerKind::AdaptiveMoment,
        }
    }

    /// Sets `k` and re-derives the default hidden widths.
    pub fn with_latent_dim(mut self, k: usize) -> Self {
        self.k = k;
        self.hidden_layers = default_hidden_layers(self.d, k);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if !(0 < self.k && self.k < self.d) {
            return fail(format!("0 < k < d violated (k = {}, d = {})", self.k, self.d));
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return fail(format!("0 < rho < 1 violated (rho = {})", self.rho));
        }
        if !(self.margin > 0.0 && self.margin.is_finite()) {
            return fail(format!("margin m > 0 violated (m = {})", self.margin));
        }
        for (name, v) in [
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("gamma", self.gamma),
            ("delta", self.delta),
            ("lambda", self.lambda),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return fail(format!("{name} >= 0 violated ({name} = {v})"));
            }
        }
        for (name, v) in [
            ("lr_generator", self.lr_generator),
            ("lr_discriminator", self.lr_discriminator),
            ("lr_attention", self.lr_attention),
            ("sparsity_sharpness", self.sparsity_sharpness),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return fail(format!("{name} > 0 violated ({name} = {v})"));
            }
        }
        if self.batch_size < 1 {
            return fail("batch size B >= 1 violated".into());
        }
        if self.hidden_layers.contains(&0) {
            return fail("hidden layer widths must be positive".into());
        }
        if let AttentionMode::LowRank { rank } = self.attention {
            if rank == 0 || rank > self.d {
                return fail(format!("attention rank must be in [1, d] (rank = {rank})"));
            }
        }
        Ok(())
    }

    /// Number of attention parameters a dense gate of this width would hold.
    pub fn dense_attention_params(&self) -> usize {
        self.d * self.d + self.d
    }
}
