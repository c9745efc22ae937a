//! The sparse dual adversarial attention autoencoder.

mod checkpoint;
mod config;
mod loss;
mod model;
mod train;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, CHECKPOINT_VERSION};
pub use config::{
    default_hidden_layers, default_latent_dim, AttentionMode, Sda2eConfig, DEFAULT_ATTENTION_RANK,
    DENSE_ATTENTION_MAX_D,
};
pub use loss::{
    accumulate_gradients, analytic_gradients, batch_losses, discriminator_loss, empirical_activation,
    generator_loss, indicator_activation, kl_sparsity, sparsity_stats, LossBreakdown, SparsityStats,
    RHO_HAT_CEIL, RHO_HAT_FLOOR,
};
pub use model::{Autoencoder, ForwardTrace, GeneratorPass, ParamGroup, Sda2eModel};
pub use train::{
    fit, latent_activation_frequency, train, train_rows, EpochStats, TrainHistory, TrainOptions, TrainedModel,
};
