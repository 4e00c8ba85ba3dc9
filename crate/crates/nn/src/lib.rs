//! Conditional noise-prediction U-Net with hand-written reverse-mode
//! differentiation, Adam and checkpointing.

pub mod adam;
pub mod checkpoint;
pub mod error;
pub mod graph;
pub mod real;
pub mod unet;

pub use adam::{lr_at, Adam, LR0};
pub use checkpoint::{Checkpoint, CheckpointMeta, CKPT_MAGIC, CKPT_VERSION};
pub use error::{NnError, Result};
pub use real::{Precision, Real};
pub use unet::{timestep_embedding, UNet, UNetConfig};
