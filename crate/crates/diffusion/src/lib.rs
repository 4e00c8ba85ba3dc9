//! Conditional denoising diffusion over normalized visibility grids.

pub mod error;
pub mod process;
pub mod sample;
pub mod schedule;
pub mod train;

pub use error::{DiffError, Result};
pub use process::{posterior_mean_var, predict_x0, q_sample, q_step, step_with_eps, NoisePredictor};
pub use sample::{mitigate, sample_chain};
pub use schedule::{NoiseSchedule, ScheduleConfig};
pub use train::{draw_batch, train_step, training_loss, BatchDraw, TrainConfig, TrainSet};
