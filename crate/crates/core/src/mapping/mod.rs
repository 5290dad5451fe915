//! Crossmodal mapping networks: small GeLU MLPs trained with a per-pixel
//! cosine loss and Adam.

mod adam;
mod checkpoint;
mod loss;
mod mlp;
mod train;

pub use adam::{adam_step, AdamState};
pub use checkpoint::{read_checkpoint, write_checkpoint, write_loss_csv};
pub use loss::{cosine_loss, cosine_loss_grad, loss_at_pixel, NORM_EPS};
pub use mlp::{gelu, gelu_derivative, Arch, Dense, Gradients, MappingNetwork, MlpSpec, Trace};
pub use train::{map_features, train, MappingPair, Mode, TrainConfig, Trained};
